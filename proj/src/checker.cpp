#include "cplus/checker.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <deque>
#include <queue>
#include <sstream>

namespace cplus {

namespace {

constexpr std::size_t kMaxSweeps = 10'000'000;
constexpr std::size_t kMaxSearchNodes = 50'000'000;
constexpr double kBoundarySlack = 1e-6;

std::vector<std::vector<StateId>> predecessors(MarkovChain const& mc) {
    std::vector<std::vector<StateId>> pred(mc.num_states());
    for (StateId s = 0; s < mc.num_states(); ++s)
        for (auto const& e : mc.rows[s])
            if (e.probability > 0.0) pred[e.state].push_back(s);
    return pred;
}

/// States that reach `targets` through states satisfying `through` (targets included).
std::vector<char> backward_reach(std::vector<std::vector<StateId>> const& pred, std::vector<char> const& targets,
                                 std::vector<char> const& through) {
    std::vector<char> seen = targets;
    std::deque<StateId> work;
    for (StateId s = 0; s < seen.size(); ++s)
        if (seen[s]) work.push_back(s);
    while (!work.empty()) {
        StateId s = work.front();
        work.pop_front();
        for (StateId p : pred[s])
            if (!seen[p] && through[p]) {
                seen[p] = 1;
                work.push_back(p);
            }
    }
    return seen;
}

}  // namespace

ReachResult reach_probability(MarkovChain const& mc, std::vector<char> const& bad, double tol) {
    std::size_t const n = mc.num_states();
    if (bad.size() != n) throw PreconditionError("bad mask size does not match the chain");
    auto pred = predecessors(mc);
    std::vector<char> all(n, 1);
    std::vector<char> can_reach = backward_reach(pred, bad, all);
    std::vector<char> prob0(n);
    for (std::size_t s = 0; s < n; ++s) prob0[s] = !can_reach[s];
    std::vector<char> not_bad(n);
    for (std::size_t s = 0; s < n; ++s) not_bad[s] = !bad[s];
    // States that can dodge Bad forever by reaching a prob-0 state first.
    std::vector<char> can_avoid = backward_reach(pred, prob0, not_bad);

    ReachResult out{};
    std::vector<double> lower(n, 0.0), upper(n, 0.0);
    std::vector<StateId> unknown;
    for (StateId s = 0; s < n; ++s) {
        if (prob0[s]) continue;
        if (!can_avoid[s]) {
            lower[s] = upper[s] = 1.0;
        } else {
            upper[s] = 1.0;
            unknown.push_back(s);
        }
    }
    double width = unknown.empty() ? 0.0 : 1.0;
    while (width > 2.0 * tol && out.iterations < kMaxSweeps) {
        ++out.iterations;
        width = 0.0;
        for (StateId s : unknown) {
            double l = 0.0, u = 0.0;
            for (auto const& e : mc.rows[s]) {
                l += e.probability * lower[e.state];
                u += e.probability * upper[e.state];
            }
            lower[s] = std::max(lower[s], l);
            upper[s] = std::min(upper[s], u);
            width = std::max(width, upper[s] - lower[s]);
        }
    }
    out.per_state.resize(n);
    for (std::size_t s = 0; s < n; ++s) out.per_state[s] = 0.5 * (lower[s] + upper[s]);
    out.lower = lower[mc.initial];
    out.upper = upper[mc.initial];
    out.reach = out.per_state[mc.initial];
    return out;
}

double safety_probability(MarkovChain const& mc, std::vector<char> const& bad, double tol) {
    return reach_probability(mc, bad, tol).safety();
}

Counterexample enumerate_counterexample(MarkovChain const& mc, std::vector<char> const& bad, double mass,
                                        std::size_t path_cap) {
    auto reach = reach_probability(mc, bad, 1e-12);
    if (reach.upper <= mass)
        throw CounterexampleError("target mass " + std::to_string(mass) + " is not below Pr(<>Bad) = " +
                                  std::to_string(reach.reach));

    struct SearchNode {
        StateId state;
        std::int64_t parent;
        double prob;
    };
    struct Entry {
        double prob;
        std::uint64_t seq;
        std::size_t node;
        bool operator<(Entry const& o) const { return prob != o.prob ? prob < o.prob : seq > o.seq; }
    };
    std::vector<SearchNode> pool;
    std::priority_queue<Entry> frontier;
    std::uint64_t seq = 0;
    pool.push_back({mc.initial, -1, 1.0});
    frontier.push({1.0, seq++, 0});

    Counterexample cex;
    while (!frontier.empty()) {
        Entry top = frontier.top();
        frontier.pop();
        SearchNode const node = pool[top.node];
        if (bad[node.state]) {
            std::vector<StateId> path;
            for (std::int64_t i = static_cast<std::int64_t>(top.node); i >= 0; i = pool[i].parent)
                path.push_back(pool[i].state);
            std::reverse(path.begin(), path.end());
            cex.paths.push_back(std::move(path));
            cex.probs.push_back(node.prob);
            cex.total += node.prob;
            if (cex.total > mass) return cex;
            if (cex.paths.size() >= path_cap)
                throw CounterexampleError("counterexample path cap of " + std::to_string(path_cap) +
                                          " reached at mass " + std::to_string(cex.total));
            continue;
        }
        for (auto const& e : mc.rows[node.state]) {
            if (e.probability <= 0.0 || reach.per_state[e.state] <= 0.0) continue;
            if (pool.size() >= kMaxSearchNodes)
                throw CounterexampleError("counterexample search exhausted its node budget");
            pool.push_back({e.state, static_cast<std::int64_t>(top.node), node.prob * e.probability});
            frontier.push({pool.back().prob, seq++, pool.size() - 1});
        }
    }
    throw CounterexampleError("path enumeration exhausted below the target mass");
}

Verdict check_threshold(MarkovChain const& mc, std::vector<char> const& bad, double alpha, double tol,
                        std::size_t path_cap) {
    if (!(alpha >= 0.0 && alpha < 1.0)) throw PreconditionError("alpha must lie in [0,1)");
    auto reach = reach_probability(mc, bad, tol);
    if (reach.safety_lower() > alpha) return Holds{reach.safety()};
    double const target = 1.0 - alpha;
    if (reach.lower > target) return enumerate_counterexample(mc, bad, target, path_cap);
    // Pr([]!Bad) == alpha up to tolerance: collect paths up to the reachable
    // mass minus a small slack.
    double relaxed = std::max(0.0, std::min(target, reach.lower) - std::max(tol, kBoundarySlack));
    Counterexample cex = enumerate_counterexample(mc, bad, relaxed, path_cap);
    cex.exceeds_target = cex.total > target;
    return cex;
}

std::string format_counterexample(MarkovChain const& mc, Counterexample const& cex,
                                  std::function<std::string(StateId)> const& label,
                                  std::function<std::string(StateId)> const& observation) {
    std::ostringstream out;
    char buf[32];
    for (std::size_t i = 0; i < cex.paths.size(); ++i) {
        auto const& path = cex.paths[i];
        std::snprintf(buf, sizeof buf, "%.10g", cex.probs[i]);
        out << buf << '\t';
        for (std::size_t k = 0; k < path.size(); ++k) {
            if (k > 0) {
                std::snprintf(buf, sizeof buf, "%.10g", path_probability(mc, {path[k - 1], path[k]}));
                out << ' ' << buf << ' ';
            }
            out << label(path[k]);
        }
        out << '\t';
        for (std::size_t k = 0; k < path.size(); ++k) out << (k ? " " : "") << observation(path[k]);
        out << '\n';
    }
    return out.str();
}

}  // namespace cplus
