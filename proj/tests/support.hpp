#pragma once

#include <boost/multiprecision/cpp_int.hpp>

#include <algorithm>
#include <cmath>
#include <deque>
#include <map>
#include <random>
#include <string>
#include <vector>

#include "cplus/driver.hpp"

namespace cplus::test {

using Rational = boost::multiprecision::cpp_rational;

inline std::string model_path(std::string const& name) { return std::string(CPLUS_MODELS_DIR) + "/" + name; }

inline LoadedModel grid4x3() { return load_model_file(model_path("grid4x3.pom")); }

/// Pr(<>Bad) from the initial state by Gaussian elimination over exact rationals.
inline Rational exact_reach(MarkovChain const& mc, std::vector<char> const& bad) {
    std::size_t const n = mc.num_states();
    std::vector<std::vector<StateId>> pred(n);
    for (StateId s = 0; s < n; ++s)
        for (auto const& e : mc.rows[s]) pred[e.state].push_back(s);
    std::vector<char> reach(bad);
    std::deque<StateId> work;
    for (StateId s = 0; s < n; ++s)
        if (bad[s]) work.push_back(s);
    while (!work.empty()) {
        StateId s = work.front();
        work.pop_front();
        for (StateId p : pred[s])
            if (!reach[p]) {
                reach[p] = 1;
                work.push_back(p);
            }
    }
    if (bad[mc.initial]) return 1;
    if (!reach[mc.initial]) return 0;

    std::vector<StateId> unknown;
    std::vector<long> index(n, -1);
    for (StateId s = 0; s < n; ++s)
        if (reach[s] && !bad[s]) {
            index[s] = static_cast<long>(unknown.size());
            unknown.push_back(s);
        }
    std::size_t const k = unknown.size();
    std::vector<std::vector<Rational>> a(k, std::vector<Rational>(k + 1, Rational(0)));
    for (std::size_t i = 0; i < k; ++i) {
        a[i][i] = 1;
        for (auto const& e : mc.rows[unknown[i]]) {
            Rational p(e.probability);
            if (bad[e.state])
                a[i][k] += p;
            else if (index[e.state] >= 0)
                a[i][static_cast<std::size_t>(index[e.state])] -= p;
        }
    }
    for (std::size_t c = 0; c < k; ++c) {
        std::size_t pivot = c;
        while (a[pivot][c] == 0) ++pivot;
        std::swap(a[c], a[pivot]);
        for (std::size_t r = 0; r < k; ++r) {
            if (r == c || a[r][c] == 0) continue;
            Rational f = a[r][c] / a[c][c];
            for (std::size_t j = c; j <= k; ++j) a[r][j] -= f * a[c][j];
        }
    }
    std::size_t i = static_cast<std::size_t>(index[mc.initial]);
    return a[i][k] / a[i][i];
}

/// Unnormalized state weights.
using Weights = std::map<StateId, double>;

/// Probability mass that avoids Bad for `steps` steps under the best
/// observation-based decision tree, by full enumeration of the tree.
inline double brute_value(Pomdp const& m, ObservationSet const& bad, Weights const& w, std::size_t steps) {
    double mass = 0.0;
    for (auto const& [s, p] : w) mass += p;
    if (steps == 0) return mass;
    double best = 0.0;
    for (ActionId a = 0; a < m.num_actions(); ++a) {
        if (!std::all_of(w.begin(), w.end(), [&](auto const& e) { return m.enabled(e.first, a); })) continue;
        std::map<ObsId, Weights> split;
        for (auto const& [s, p] : w)
            for (auto const& e : m.distribution(s, a))
                if (!bad.contains(m.observation(e.state))) split[m.observation(e.state)][e.state] += p * e.probability;
        double acc = 0.0;
        for (auto const& [z, next] : split) acc += brute_value(m, bad, next, steps - 1);
        best = std::max(best, acc);
    }
    return best;
}

/// Root argmax of brute_value, ties to the lowest action index.
inline ActionId brute_argmax(Pomdp const& m, ObservationSet const& bad, Weights const& w, std::size_t steps) {
    ActionId best_a = 0;
    double best = -1.0;
    for (ActionId a = 0; a < m.num_actions(); ++a) {
        if (!std::all_of(w.begin(), w.end(), [&](auto const& e) { return m.enabled(e.first, a); })) continue;
        std::map<ObsId, Weights> split;
        for (auto const& [s, p] : w)
            for (auto const& e : m.distribution(s, a))
                if (!bad.contains(m.observation(e.state))) split[m.observation(e.state)][e.state] += p * e.probability;
        double acc = 0.0;
        for (auto const& [z, next] : split) acc += brute_value(m, bad, next, steps - 1);
        if (acc > best + 1e-12) {
            best = acc;
            best_a = a;
        }
    }
    return best_a;
}

inline Distribution random_row(std::mt19937_64& rng, std::size_t n, std::size_t max_succ) {
    std::uniform_int_distribution<std::size_t> count(1, max_succ), pick(0, n - 1);
    std::uniform_int_distribution<int> weight(1, 9);
    std::map<StateId, int> w;
    std::size_t k = count(rng);
    for (std::size_t i = 0; i < k; ++i) w[static_cast<StateId>(pick(rng))] += weight(rng);
    int total = 0;
    for (auto const& [s, x] : w) total += x;
    Distribution row;
    for (auto const& [s, x] : w) row.push_back({s, static_cast<double>(x) / total});
    return row;
}

/// Random chain whose last state is an absorbing bad state. Each other state
/// has up to three successors, one of them the bad state with probability `leak`.
inline std::pair<MarkovChain, std::vector<char>> random_chain(std::mt19937_64& rng, std::size_t n, double leak = 0.0) {
    MarkovChain mc;
    std::vector<char> bad(n, 0);
    bad[n - 1] = 1;
    std::bernoulli_distribution to_bad(leak);
    for (std::size_t s = 0; s + 1 < n; ++s) {
        Distribution row = random_row(rng, n, 3);
        if (to_bad(rng) && row.back().state != n - 1) {
            double w = std::uniform_int_distribution<int>(1, 9)(rng) / 10.0;
            for (auto& e : row) e.probability *= 1 - w;
            row.push_back({static_cast<StateId>(n - 1), w});
        }
        mc.rows.push_back(row);
    }
    mc.rows.push_back({{static_cast<StateId>(n - 1), 1.0}});
    mc.initial = 0;
    return {mc, bad};
}

/// Random POMDP: observation 0 ("bad") marks absorbing bad states, every
/// action is enabled everywhere, the initial state is safe.
inline LoadedModel random_pomdp(std::mt19937_64& rng, std::size_t states, std::size_t actions, std::size_t observations) {
    PomdpBuilder b;
    for (std::size_t z = 0; z < observations; ++z) b.add_observation(z == 0 ? "bad" : "z" + std::to_string(z));
    for (std::size_t a = 0; a < actions; ++a) b.add_action("a" + std::to_string(a));
    std::uniform_int_distribution<std::size_t> obs(1, observations - 1);
    std::bernoulli_distribution is_bad(0.25);
    std::vector<char> bad(states, 0);
    for (std::size_t s = 0; s < states; ++s) {
        bad[s] = s > 0 && is_bad(rng);
        b.add_state("s" + std::to_string(s), bad[s] ? 0 : static_cast<ObsId>(obs(rng)));
    }
    for (std::size_t s = 0; s < states; ++s)
        for (std::size_t a = 0; a < actions; ++a)
            b.set_transition(static_cast<StateId>(s), static_cast<ActionId>(a),
                             bad[s] ? Distribution{{static_cast<StateId>(s), 1.0}} : random_row(rng, states, 3));
    b.set_initial(0);
    LoadedModel out{std::move(b).build(), {}};
    out.objective.bad = ObservationSet(observations, {0});
    return out;
}

/// Random controller over `m` with up to `nodes` nodes.
inline Fsc random_fsc(std::mt19937_64& rng, Pomdp const& m, std::size_t nodes) {
    std::uniform_int_distribution<NodeId> node(0, static_cast<NodeId>(nodes - 1));
    std::uniform_int_distribution<ActionId> act(0, static_cast<ActionId>(m.num_actions() - 1));
    Fsc f(nodes, m.num_observations());
    for (NodeId n = 0; n < nodes; ++n)
        for (ObsId z = 0; z < m.num_observations(); ++z) f.set(n, z, act(rng), node(rng));
    return f;
}

/// Brute-force first-visit paths of length <= max_len from the initial state.
inline void first_visit_paths(MarkovChain const& mc, std::vector<char> const& bad, std::size_t max_len,
                              std::vector<StateId>& path, double p,
                              std::map<std::vector<StateId>, double>& out) {
    StateId s = path.back();
    if (bad[s]) {
        out[path] = p;
        return;
    }
    if (path.size() > max_len) return;
    for (auto const& e : mc.rows[s]) {
        path.push_back(e.state);
        first_visit_paths(mc, bad, max_len, path, p * e.probability, out);
        path.pop_back();
    }
}

/// Mass of first-visit paths of length <= max_len. Any target below it is met
/// by at most as many paths as the brute-force enumeration produces.
inline double short_path_mass(MarkovChain const& mc, std::vector<char> const& bad, std::size_t max_len) {
    std::map<std::vector<StateId>, double> all;
    std::vector<StateId> path{mc.initial};
    first_visit_paths(mc, bad, max_len, path, 1.0, all);
    double mass = 0.0;
    for (auto const& [q, p] : all) mass += p;
    return mass;
}

}  // namespace cplus::test
