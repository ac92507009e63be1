#include "cplus/transform.hpp"

#include <algorithm>
#include <cmath>

namespace cplus {

std::string fresh_observation_name(Pomdp const& m, std::string base) {
    while (m.find_observation(base)) base += '\'';
    return base;
}

namespace {

std::string fresh_state_name(Pomdp const& m, std::string base) {
    while (m.find_state(base)) base += '\'';
    return base;
}

}  // namespace

RewardPomdp make_reward_pomdp(Pomdp const& m, ObservationSet const& bad, double discount) {
    if (bad.empty()) throw PreconditionError("reward construction needs a nonempty bad set");
    if (!(discount > 0.0 && discount < 1.0)) throw PreconditionError("discount must lie in (0,1)");
    PomdpBuilder b = to_builder(m);
    ObsId zq = b.add_observation(fresh_observation_name(m, "sink"));
    StateId q = b.add_state(fresh_state_name(m, "sink"), zq);
    for (ActionId a = 0; a < m.num_actions(); ++a) b.set_transition(q, a, {{q, 1.0}});
    for (StateId s = 0; s < m.num_states(); ++s) {
        if (!bad.contains(m.observation(s))) continue;
        for (ActionId a = 0; a < m.num_actions(); ++a) b.set_transition(s, a, {{q, 1.0}});
    }
    RewardPomdp out{std::move(b).build(), bad, q, zq, discount};
    out.bad.resize(out.base.num_observations());
    return out;
}

double discounted_value(RewardPomdp const& rm, Fsc const& policy, double tol) {
    Fsc f = policy;
    if (f.num_observations() < rm.base.num_observations())
        f = f.with_extra_observations(rm.base.num_observations() - f.num_observations());
    auto product = build_product(rm.base, f);
    auto const& mc = product.chain;
    std::size_t const n = mc.num_states();
    std::vector<double> reward(n), value(n, 0.0), next(n);
    for (std::size_t i = 0; i < n; ++i) {
        StateId s = product.pomdp_state[i];
        ObsId z = rm.base.observation(s);
        reward[i] = rm.reward(z, f.action(product.node[i], z));
    }
    double const lambda = rm.discount;
    double const factor = lambda / (1.0 - lambda);
    for (;;) {
        double diff = 0.0;
        for (std::size_t i = 0; i < n; ++i) {
            double acc = 0.0;
            for (auto const& e : mc.rows[i]) acc += e.probability * value[e.state];
            next[i] = reward[i] + lambda * acc;
            diff = std::max(diff, std::abs(next[i] - value[i]));
        }
        value.swap(next);
        if (factor * diff <= tol) break;
    }
    return value[mc.initial];
}

UnrolledModel unroll_reach_avoid(Pomdp const& m, ObjectiveSpec const& spec) {
    if (spec.kind != ObjectiveKind::BoundedReachAvoid || !spec.horizon || !spec.good)
        throw PreconditionError("unrolling needs a bounded reach-avoid objective");
    std::size_t const H = *spec.horizon;
    ObservationSet const& good = *spec.good;
    ObservationSet const& bad = spec.bad;

    PomdpBuilder b;
    for (ObsId z = 0; z < m.num_observations(); ++z) b.add_observation(m.observation_name(z));
    for (ActionId a = 0; a < m.num_actions(); ++a) b.add_action(m.action_name(a));
    auto id = [&](StateId s, std::size_t k) { return static_cast<StateId>(k * m.num_states() + s); };
    for (std::size_t k = 0; k <= H; ++k)
        for (StateId s = 0; s < m.num_states(); ++s)
            b.add_state(m.state_name(s) + "@" + std::to_string(k), m.observation(s));
    ObsId z_reached = b.add_observation(fresh_observation_name(m, "reached"));
    std::string failed_name = fresh_observation_name(m, "failed");
    if (failed_name == m.observation_name(z_reached)) failed_name += '\'';
    ObsId z_failed = b.add_observation(failed_name);
    StateId reached = b.add_state("reached", z_reached);
    StateId failed = b.add_state("failed", z_failed);

    auto all_to = [&](StateId from, StateId to) {
        for (ActionId a = 0; a < m.num_actions(); ++a) b.set_transition(from, a, {{to, 1.0}});
    };
    all_to(reached, reached);
    all_to(failed, failed);
    for (std::size_t k = 0; k <= H; ++k)
        for (StateId s = 0; s < m.num_states(); ++s) {
            ObsId z = m.observation(s);
            StateId from = id(s, k);
            if (bad.contains(z)) {
                all_to(from, failed);
            } else if (good.contains(z)) {
                all_to(from, reached);
            } else if (k == H) {
                all_to(from, failed);
            } else {
                for (ActionId a = 0; a < m.num_actions(); ++a) {
                    if (!m.enabled(s, a)) continue;
                    Distribution row;
                    for (auto const& e : m.distribution(s, a)) row.push_back({id(e.state, k + 1), e.probability});
                    b.set_transition(from, a, std::move(row));
                }
            }
        }
    b.set_initial(id(m.initial_state(), 0));

    UnrolledModel out{std::move(b).build(), {}, reached, failed, H};
    out.objective.kind = ObjectiveKind::Safety;
    out.objective.alpha = spec.alpha;
    out.objective.bad = ObservationSet(out.pomdp.num_observations());
    for (ObsId z : bad.members()) out.objective.bad.insert(z);
    out.objective.bad.insert(z_failed);
    return out;
}

}  // namespace cplus
