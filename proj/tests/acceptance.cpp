// One PASS/FAIL line per acceptance criterion. Exit status is the number of failures.

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <functional>
#include <random>
#include <sstream>
#include <string>

#include "support.hpp"

using namespace cplus;

namespace {

struct Result {
    bool pass = true;
    std::string detail;
    void require(bool ok, std::string const& what) {
        if (!ok) {
            pass = false;
            if (!detail.empty()) detail += "; ";
            detail += what;
        }
    }
};

double seconds_since(std::chrono::steady_clock::time_point t0) {
    return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
}

std::string fmt(double x, int digits = 6) {
    std::ostringstream s;
    s.precision(digits);
    s << x;
    return s.str();
}

struct Grid {
    LoadedModel lm = test::grid4x3();
    Pomdp const& m = lm.pomdp;
    Fsc shuttle = load_fsc_file(m, test::model_path("shuttle.fsc"));
    Fsc right = load_fsc_file(m, test::model_path("always_right.fsc"));
};

Result illustrative_run() {
    Grid g;
    Result r;
    ObjectiveSpec spec = g.lm.objective;
    spec.alpha = 0.7;
    FscOracle oracle(g.shuttle);
    auto t0 = std::chrono::steady_clock::now();
    SynthesisReport rep = cplus_synthesize(g.m, spec, oracle);
    double elapsed = seconds_since(t0);
    r.require(rep.outcome == Outcome::Fsc, "outcome " + to_string(rep.outcome));
    r.require(rep.iterations == 2, "iterations " + std::to_string(rep.iterations));
    if (rep.trace.size() == 2) {
        auto const& first = rep.trace[0];
        r.require(first.hypothesis.num_nodes() == 1 && first.hypothesis.action(0, 1) == *g.m.find_action("right"),
                  "first hypothesis is not the one-node always-right controller");
        r.require(first.top_path && std::abs(*first.top_path - 0.6561) < 1e-12, "top path");
        r.require(first.suffix && *first.suffix == Word(3, *g.m.find_observation("gray")), "suffix");
    }
    r.require(rep.verified_probability && std::abs(*rep.verified_probability - 0.729) <= 1e-9, "verified value");
    r.require(elapsed < 1.0, "runtime " + fmt(elapsed));
    std::string top = rep.trace.empty() || !rep.trace[0].top_path ? "-" : fmt(*rep.trace[0].top_path);
    r.detail = "iterations=" + std::to_string(rep.iterations) + " top_path=" + top +
               " verified=" + fmt(rep.verified_probability.value_or(-1), 10) + " time=" + fmt(elapsed, 3) + "s" +
               (r.detail.empty() ? "" : " | " + r.detail);
    return r;
}

Result checker_exactness() {
    Grid g;
    Result r;
    std::mt19937_64 rng(2718);
    std::string detail;
    for (auto [fsc, want, name] : {std::tuple{g.right, 0.0, "always-right"}, std::tuple{g.shuttle, 0.729, "shuttle"}}) {
        ProductChain p = build_product(g.m, fsc);
        auto bad = bad_mask(p, g.m, g.lm.objective.bad);
        double safe = safety_probability(p.chain, bad);
        double exact = static_cast<double>(1 - test::exact_reach(p.chain, bad));
        std::size_t const n = 100000;
        std::size_t survived = 0;
        for (std::size_t i = 0; i < n; ++i)
            if (!run_fsc(g.m, fsc, g.lm.objective.bad, 200, rng).bad_hit) ++survived;
        double freq = static_cast<double>(survived) / n;
        // Wilson 99% interval
        double z = 2.5758, center = (freq + z * z / (2 * n)) / (1 + z * z / n);
        double half = z * std::sqrt(freq * (1 - freq) / n + z * z / (4.0 * n * n)) / (1 + z * z / n);
        r.require(std::abs(safe - want) <= 1e-9, std::string(name) + " checker");
        r.require(std::abs(exact - want) <= 1e-9, std::string(name) + " rational");
        r.require(std::abs(freq - safe) <= std::abs(center - freq) + half, std::string(name) + " monte carlo");
        detail += std::string(detail.empty() ? "" : " ") + name + ": checker=" + fmt(safe, 10) + " exact=" +
                  fmt(exact, 10) + " mc=" + fmt(freq, 5);
    }
    r.detail = detail + (r.detail.empty() ? "" : " | " + r.detail);
    return r;
}

Result counterexample_contract() {
    Result r;
    std::mt19937_64 rng(314);
    int instances = 0, compared = 0;
    std::size_t max_paths = 0;
    while (instances < 100) {
        std::size_t n = 3 + rng() % 28;
        auto [mc, bad] = test::random_chain(rng, n, 0.5);
        double reach = test::short_path_mass(mc, bad, 8);
        if (reach < 0.05) continue;
        double alpha = 1 - reach * std::uniform_real_distribution<double>(0.2, 0.9)(rng);
        ++instances;
        Counterexample cex = enumerate_counterexample(mc, bad, 1 - alpha);
        max_paths = std::max(max_paths, cex.paths.size());
        bool ok = cex.total > 1 - alpha;
        for (std::size_t i = 0; i < cex.paths.size() && ok; ++i) {
            auto const& p = cex.paths[i];
            ok = bad[p.back()] && std::none_of(p.begin(), p.end() - 1, [&](StateId s) { return bad[s] != 0; });
            if (i) ok = ok && cex.probs[i] <= cex.probs[i - 1];
            for (std::size_t j = 0; j < cex.paths.size() && ok; ++j) {
                auto const& q = cex.paths[j];
                if (i != j && p.size() <= q.size() && std::equal(p.begin(), p.end(), q.begin())) ok = false;
            }
        }
        r.require(ok, "instance " + std::to_string(instances) + " violates the path contract");
        std::size_t longest = 0;
        for (auto const& p : cex.paths) longest = std::max(longest, p.size() - 1);
        if (n <= 8 && longest <= 12) {
            std::map<std::vector<StateId>, double> all;
            std::vector<StateId> path{mc.initial};
            test::first_visit_paths(mc, bad, 12, path, 1.0, all);
            double measure = 0.0;
            for (auto const& p : cex.paths) measure += all.count(p) ? all[p] : std::nan("");
            r.require(std::abs(measure - cex.total) <= 1e-12, "cylinder measure mismatch");
            ++compared;
        }
    }
    r.require(compared >= 10, "too few brute-force comparisons");
    r.detail = "instances=100 brute_force_compared=" + std::to_string(compared) +
               " max_paths=" + std::to_string(max_paths) + (r.detail.empty() ? "" : " | " + r.detail);
    return r;
}

Result relative_completeness() {
    Result r;
    std::mt19937_64 rng(4242);
    int done = 0;
    std::size_t max_iters = 0;
    double max_time = 0;
    while (done < 50) {
        auto lm = test::random_pomdp(rng, 2 + rng() % 7, 2 + rng() % 2, 2 + rng() % 3);
        Fsc target = test::random_fsc(rng, lm.pomdp, 1 + rng() % 4);
        ProductChain p = build_product(lm.pomdp, target);
        double value = safety_probability(p.chain, bad_mask(p, lm.pomdp, lm.objective.bad));
        if (value < 0.06) continue;
        ObjectiveSpec spec = lm.objective;
        spec.alpha = std::max(0.0, value - 0.05 - std::uniform_real_distribution<double>(0.0, 0.3)(rng));
        FscOracle oracle(target);
        SynthesisReport rep = cplus_synthesize(lm.pomdp, spec, oracle, {64, 60.0});
        ++done;
        max_iters = std::max(max_iters, rep.iterations);
        max_time = std::max(max_time, rep.wall_time);
        r.require(rep.outcome == Outcome::Fsc,
                  "instance " + std::to_string(done) + ": " + to_string(rep.outcome) + " (" + rep.message + ")");
        if (rep.verified_probability) r.require(*rep.verified_probability > spec.alpha, "verified <= alpha");
    }
    r.detail = "instances=50 max_iterations=" + std::to_string(max_iters) + " max_time=" + fmt(max_time, 3) + "s" +
               (r.detail.empty() ? "" : " | " + r.detail);
    return r;
}

Result oracle_soundness() {
    Result r;
    std::mt19937_64 rng(1234);
    int checked = 0, mismatches = 0;
    for (int family = 0; family < 30; ++family) {
        auto lm = test::random_pomdp(rng, 2 + family % 5, 2 + family % 2, 3);
        Pomdp const& m = lm.pomdp;
        BeliefViOracle o(m, lm.objective.bad, 6);
        std::vector<History> queries{History(m.observation(m.initial_state()))};
        for (int k = 0; k < 4; ++k) {
            History h = queries.front();
            for (int step = 0; step < 1 + k % 2; ++step) h = h.extended(rng() % m.num_actions(), rng() % 3);
            if (validate_history(m, h) && !lm.objective.bad.contains(h.last_observation())) queries.push_back(h);
        }
        for (auto const& h : queries) {
            Belief b = belief_from_history(m, h);
            test::Weights w;
            for (auto const& [s, p] : b.entries()) w[s] = p;
            if (o.best_action(h) != test::brute_argmax(m, lm.objective.bad, w, 6)) ++mismatches;
            ++checked;
        }
    }
    r.require(mismatches == 0, std::to_string(mismatches) + " belief-vi mismatches");

    Grid g;
    RewardPomdp rm = make_reward_pomdp(g.m, g.lm.objective.bad);
    History start(*g.m.find_observation("gray"));
    BeliefViOracle exact(g.m, g.lm.objective.bad);
    ActionId want = exact.best_action(start);
    int agree = 0;
    for (std::uint64_t seed = 0; seed < 20; ++seed) {
        SparseSampler s(rm, {500, 90, seed});
        if (s.best_action(start) == want) ++agree;
    }
    r.require(agree >= 19, "sampler agreement " + std::to_string(agree) + "/20");
    r.detail = "decision_tree_queries=" + std::to_string(checked) + " mismatches=" + std::to_string(mismatches) +
               " sampler_agreement=" + std::to_string(agree) + "/20 (" + g.m.action_name(want) + ")" +
               (r.detail.empty() ? "" : " | " + r.detail);
    return r;
}

Result benchmark_values() {
    Result r;
    std::string detail;
    auto run = [&](std::string const& name, LoadedModel lm, double alpha, std::uint64_t seed,
                   std::function<void(SynthesisReport const&)> extra) {
        lm.objective.alpha = alpha;
        SafetyInstance inst = make_safety_instance(lm.pomdp, lm.objective);
        RewardPomdp rm = make_reward_pomdp(inst.model, inst.bad);
        SparseSampler oracle(rm, {500, 90, seed});
        SynthesisReport rep = cplus_synthesize(inst, oracle, {100, 60.0});
        r.require(rep.outcome == Outcome::Fsc, name + " " + to_string(rep.outcome));
        r.require(rep.wall_time < 60.0, name + " too slow");
        if (rep.outcome == Outcome::Fsc) extra(rep);
        detail += (detail.empty() ? "" : " ") + name + ": value=" + fmt(rep.verified_probability.value_or(-1), 4) +
                  " nodes=" + std::to_string(rep.fsc ? rep.fsc->num_nodes() : 0) + " time=" + fmt(rep.wall_time, 3) + "s";
    };
    for (std::size_t n : {2, 3})
        run("cards-removed-" + std::to_string(n), gen_cards(n, CardsVariant::Removed, CardsMode::Bounded), 0.5, 0,
            [&](SynthesisReport const& rep) { r.require(*rep.verified_probability > 0.5, "cards value"); });
    for (std::uint64_t seed = 1; seed <= 5; ++seed)
        run("grid5/seed" + std::to_string(seed), gen_grid_world(5, 0.1, 0.1, seed), 0.2, seed,
            [&](SynthesisReport const& rep) { r.require(rep.fsc->num_nodes() <= 8, "grid controller too large"); });
    r.detail = detail + (r.detail.empty() ? "" : " | " + r.detail);
    return r;
}

Result discount_convergence() {
    Grid g;
    Result r;
    std::vector<double> gaps;
    for (double lambda : {0.9, 0.99, 0.999}) {
        RewardPomdp rm = make_reward_pomdp(g.m, g.lm.objective.bad, lambda);
        gaps.push_back(std::abs(1 + discounted_value(rm, g.shuttle, 1e-12) - 0.729));
    }
    r.require(gaps[0] > gaps[1] && gaps[1] > gaps[2], "gap not strictly decreasing");
    r.require(gaps[2] <= 0.05, "gap at 0.999 above 0.05");
    r.detail = "gaps=" + fmt(gaps[0]) + "," + fmt(gaps[1]) + "," + fmt(gaps[2]) + (r.detail.empty() ? "" : " | " + r.detail);
    return r;
}

/// Draw until two different cards have been seen, then guess the third.
Fsc two_distinct_cards_policy(Pomdp const& u) {
    std::string text = "init start\nstart start -> draw first\n";
    for (int j = 1; j <= 3; ++j) {
        text += "first c" + std::to_string(j) + " -> draw seen" + std::to_string(j) + "\n";
        for (int k = 1; k <= 3; ++k) {
            std::string card = "c" + std::to_string(k);
            if (k == j)
                text += "seen" + std::to_string(j) + " " + card + " -> draw seen" + std::to_string(j) + "\n";
            else
                text += "seen" + std::to_string(j) + " " + card + " -> guess" + std::to_string(6 - j - k) + " seen" +
                        std::to_string(j) + "\n";
        }
    }
    return parse_fsc(u, text);
}

Result reach_avoid_reduction() {
    Result r;
    LoadedModel cards = gen_cards(3, CardsVariant::Removed, CardsMode::Bounded);
    SafetyInstance inst = make_safety_instance(cards.pomdp, cards.objective);
    Fsc policy = two_distinct_cards_policy(inst.model);
    ProductChain p = build_product(inst.model, policy);
    double value = safety_probability(p.chain, bad_mask(p, inst.model, inst.bad), 1e-12);
    BeliefViOracle optimum(inst.model, inst.bad, inst.unrolled->horizon + 2);
    double best = optimum.value(Belief::point(inst.model.initial_state()), inst.unrolled->horizon + 2);
    r.require(std::abs(value - 1.0) <= 1e-9, "policy value " + fmt(value, 12) + " != 1");
    r.detail = "horizon=" + std::to_string(inst.unrolled->horizon) + " policy_value=" + fmt(value, 12) +
               " optimal_value=" + fmt(best, 12) + (r.detail.empty() ? "" : " | " + r.detail);
    return r;
}

}  // namespace

int main() {
    struct Criterion {
        char const* name;
        Result (*run)();
    };
    Criterion const criteria[] = {
        {"1 illustrative run", illustrative_run},
        {"2 checker exactness", checker_exactness},
        {"3 counterexample contract", counterexample_contract},
        {"4 relative completeness", relative_completeness},
        {"5 oracle soundness", oracle_soundness},
        {"6 benchmark values", benchmark_values},
        {"7 discount convergence", discount_convergence},
        {"8 reach-avoid reduction", reach_avoid_reduction},
    };
    int failures = 0;
    for (auto const& c : criteria) {
        Result r;
        try {
            r = c.run();
        } catch (std::exception const& e) {
            r.pass = false;
            r.detail = std::string("exception: ") + e.what();
        }
        if (!r.pass) ++failures;
        std::printf("[%s] criterion %s: %s\n", r.pass ? "PASS" : "FAIL", c.name, r.detail.c_str());
        std::fflush(stdout);
    }
    return failures;
}
