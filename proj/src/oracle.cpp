#include "cplus/oracle.hpp"

#include <algorithm>
#include <cmath>
#include <deque>
#include <fstream>
#include <limits>
#include <mutex>
#include <sstream>

namespace cplus {

namespace {

constexpr double kTie = 1e-12;

std::uint64_t splitmix64(std::uint64_t x) {
    x += 0x9e3779b97f4a7c15ULL;
    x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
    x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
    return x ^ (x >> 31);
}

std::vector<StateId> support_of(Belief const& b) {
    std::vector<StateId> out;
    for (auto const& [s, p] : b.entries()) out.push_back(s);
    return out;
}

}  // namespace

std::vector<ActionId> common_actions(Pomdp const& m, std::vector<StateId> const& states) {
    std::vector<ActionId> out;
    for (ActionId a = 0; a < m.num_actions(); ++a)
        if (std::all_of(states.begin(), states.end(), [&](StateId s) { return m.enabled(s, a); })) out.push_back(a);
    return out;
}

ActionId fallback_action(Pomdp const& m, Belief const& b) {
    StateId best = b.entries().front().first;
    double p = -1.0;
    for (auto const& [s, q] : b.entries())
        if (q > p) {
            p = q;
            best = s;
        }
    return m.enabled_actions(best).front();
}

// ---------------------------------------------------------------------------
// Sparse sampler

struct SparseSampler::Node {
    std::size_t depth = 0;
    std::vector<Particle> particles;
    double lower_init = 0.0;
    double upper_init = 0.0;
    double lower = 0.0;
    double upper = 0.0;
    bool expanded = false;

    struct Branch {
        ActionId action;
        double reward = 0.0;
        double lower = 0.0;
        double upper = 0.0;
        std::vector<std::unique_ptr<Node>> children;
    };
    std::vector<Branch> branches;
};

SparseSampler::SparseSampler(RewardPomdp const& rm, SamplerConfig config) : rm_(rm), config_(config) {
    if (config_.budget == 0) throw PreconditionError("sampler budget must be at least 1");
}

double SparseSampler::uniform(std::uint32_t scenario, std::size_t depth) const {
    std::uint64_t key = splitmix64(config_.seed) ^ splitmix64((static_cast<std::uint64_t>(scenario) << 32) ^ depth);
    return static_cast<double>(splitmix64(key) >> 11) * 0x1.0p-53;
}

StateId SparseSampler::step(StateId s, ActionId a, double u) const {
    auto const& row = rm_.base.distribution(s, a);
    for (auto const& e : row) {
        if (u < e.probability) return e.state;
        u -= e.probability;
    }
    return row.back().state;
}

ActionId SparseSampler::rollout_action(StateId s, ActionId preferred) const {
    if (rm_.base.enabled(s, preferred)) return preferred;
    return rm_.base.enabled_actions(s).front();
}

double SparseSampler::rollout(Particle p, std::size_t depth, ActionId a) const {
    double value = 0.0;
    double weight = 1.0;
    StateId s = p.state;
    for (std::size_t d = depth; d < config_.depth; ++d) {
        if (s == rm_.sink) break;
        if (rm_.bad.contains(rm_.base.observation(s))) {
            value -= weight;
            break;
        }
        ActionId b = rollout_action(s, a);
        auto const& row = rm_.base.distribution(s, b);
        if (row.size() == 1 && row.front().state == s) break;
        s = step(s, b, uniform(p.scenario, d + 1));
        weight *= rm_.discount;
    }
    return value;
}

namespace {

/// Optimal k-step discounted value of the fully observable model, per state.
std::vector<std::vector<double>> mdp_values(RewardPomdp const& rm, std::size_t depth) {
    Pomdp const& m = rm.base;
    std::vector<std::vector<double>> v(depth + 1, std::vector<double>(m.num_states(), 0.0));
    for (std::size_t k = 1; k <= depth; ++k)
        for (StateId s = 0; s < m.num_states(); ++s) {
            double best = -std::numeric_limits<double>::infinity();
            for (ActionId a : m.enabled_actions(s)) {
                double acc = rm.reward(m.observation(s), a);
                for (auto const& e : m.distribution(s, a)) acc += rm.discount * e.probability * v[k - 1][e.state];
                best = std::max(best, acc);
            }
            v[k][s] = best;
        }
    return v;
}

}  // namespace

void SparseSampler::init_bounds(Node& node) const {
    double const K = static_cast<double>(config_.budget);
    double best = -std::numeric_limits<double>::infinity();
    for (ActionId a = 0; a < rm_.base.num_actions(); ++a) {
        double acc = 0.0;
        for (auto const& p : node.particles) acc += rollout(p, node.depth, a);
        best = std::max(best, acc / K);
    }
    node.lower_init = best;
    node.lower = node.lower_init;
}

void SparseSampler::expand(Node& node) const {
    double const K = static_cast<double>(config_.budget);
    std::vector<StateId> states;
    for (auto const& p : node.particles) states.push_back(p.state);
    std::sort(states.begin(), states.end());
    states.erase(std::unique(states.begin(), states.end()), states.end());
    auto actions = common_actions(rm_.base, states);
    if (actions.empty()) {
        for (ActionId a = 0; a < rm_.base.num_actions(); ++a) actions.push_back(a);
    }
    for (ActionId a : actions) {
        Node::Branch br;
        br.action = a;
        std::map<ObsId, std::vector<Particle>> groups;
        for (auto const& p : node.particles) {
            br.reward += rm_.reward(rm_.base.observation(p.state), a) / K;
            StateId next = step(p.state, rollout_action(p.state, a), uniform(p.scenario, node.depth + 1));
            groups[rm_.base.observation(next)].push_back({p.scenario, next});
        }
        for (auto& [z, particles] : groups) {
            auto child = std::make_unique<Node>();
            child->depth = node.depth + 1;
            child->particles = std::move(particles);
            br.children.push_back(std::move(child));
        }
        node.branches.push_back(std::move(br));
    }
    node.expanded = true;
}

void SparseSampler::backup(Node& node) const {
    double best_lower = -std::numeric_limits<double>::infinity();
    double best_upper = -std::numeric_limits<double>::infinity();
    for (auto& br : node.branches) {
        br.lower = br.reward;
        br.upper = br.reward;
        for (auto const& c : br.children) {
            br.lower += rm_.discount * c->lower;
            br.upper += rm_.discount * c->upper;
        }
        best_lower = std::max(best_lower, br.lower);
        best_upper = std::max(best_upper, br.upper);
    }
    node.lower = std::max(node.lower_init, best_lower);
    node.upper = std::max(node.lower, std::min(node.upper_init, best_upper));
}

ActionId SparseSampler::best_action(History const& h) {
    if (!validate_history(rm_.base, h)) throw PreconditionError("action query on an invalid history");
    return best_action_from(belief_from_history(rm_.base, h));
}

ActionId SparseSampler::best_action_from(Belief const& b) {
    auto root_actions = common_actions(rm_.base, support_of(b));
    ActionId fallback = root_actions.empty() ? fallback_action(rm_.base, b) : root_actions.front();
    last_ = RootStats{};
    if (config_.depth == 0) return fallback;

    auto const bounds = mdp_values(rm_, config_.depth);
    std::size_t nodes = 0;
    auto initialize = [&](Node& node) {
        init_bounds(node);
        double up = 0.0;
        for (auto const& p : node.particles) up += bounds[config_.depth - node.depth][p.state];
        node.upper_init = std::max(up / static_cast<double>(config_.budget), node.lower_init);
        node.upper = node.upper_init;
        ++nodes;
    };

    Node root;
    for (std::uint32_t k = 0; k < config_.budget; ++k) {
        double u = uniform(k, 0);
        StateId s = b.entries().back().first;
        for (auto const& [state, p] : b.entries()) {
            if (u < p) {
                s = state;
                break;
            }
            u -= p;
        }
        root.particles.push_back({k, s});
    }
    initialize(root);

    auto expand_node = [&](Node& node) {
        expand(node);
        for (auto& br : node.branches)
            for (auto& c : br.children) initialize(*c);
        backup(node);
    };

    expand_node(root);
    std::size_t trials = 0;
    while (trials < config_.max_trials && root.upper - root.lower > config_.target_gap) {
        ++trials;
        std::vector<Node*> path{&root};
        Node* node = &root;
        while (node->depth < config_.depth && node->expanded) {
            Node::Branch* pick = nullptr;
            for (auto& br : node->branches)
                if (!pick || br.upper > pick->upper + kTie) pick = &br;
            Node* next = nullptr;
            double gap = kTie;
            for (auto& c : pick->children)
                if (c->upper - c->lower > gap) {
                    gap = c->upper - c->lower;
                    next = c.get();
                }
            if (!next) break;
            node = next;
            path.push_back(node);
            if (!node->expanded && node->depth < config_.depth) {
                expand_node(*node);
                break;
            }
        }
        if (path.size() == 1 && !(root.upper - root.lower > config_.target_gap)) break;
        bool progressed = path.size() > 1;
        for (auto it = path.rbegin(); it != path.rend(); ++it)
            if ((*it)->expanded) backup(**it);
        if (!progressed) break;
    }

    last_.lower = root.lower;
    last_.upper = root.upper;
    last_.trials = trials;
    last_.nodes = nodes;
    ActionId best = fallback;
    double best_value = -std::numeric_limits<double>::infinity();
    for (auto const& br : root.branches) {
        last_.action_lower.push_back(br.lower);
        bool allowed = root_actions.empty() ||
                       std::find(root_actions.begin(), root_actions.end(), br.action) != root_actions.end();
        if (allowed && br.lower > best_value + kTie) {
            best_value = br.lower;
            best = br.action;
        }
    }
    last_.estimate = std::clamp(best_value, root.lower, root.upper);
    return best;
}

// ---------------------------------------------------------------------------
// Belief value iteration

BeliefViOracle::BeliefViOracle(Pomdp const& m, ObservationSet const& bad, std::size_t horizon)
    : m_(m), bad_(bad), horizon_(horizon == 0 ? 3 * m.num_states() : horizon) {
    bad_.resize(m.num_observations());
    std::size_t const n = m.num_states();
    std::vector<std::vector<StateId>> pred(n);
    for (StateId s = 0; s < n; ++s)
        for (ActionId a : m.enabled_actions(s))
            for (auto const& e : m.distribution(s, a)) pred[e.state].push_back(s);
    std::vector<char> reaches_bad(n, 0);
    std::deque<StateId> work;
    for (StateId s = 0; s < n; ++s)
        if (bad_.contains(m.observation(s))) {
            reaches_bad[s] = 1;
            work.push_back(s);
        }
    while (!work.empty()) {
        StateId s = work.front();
        work.pop_front();
        for (StateId p : pred[s])
            if (!reaches_bad[p]) {
                reaches_bad[p] = 1;
                work.push_back(p);
            }
    }
    safe_absorbing_.resize(n);
    for (StateId s = 0; s < n; ++s) safe_absorbing_[s] = !reaches_bad[s];
}

double BeliefViOracle::upper_bound(Belief const& b, std::size_t steps) {
    while (mdp_bound_.size() <= steps) {
        std::size_t k = mdp_bound_.size();
        std::vector<double> v(m_.num_states(), 0.0);
        for (StateId s = 0; s < m_.num_states(); ++s) {
            if (bad_.contains(m_.observation(s))) continue;
            if (k == 0) {
                v[s] = 1.0;
                continue;
            }
            double best = 0.0;
            for (ActionId a : m_.enabled_actions(s)) {
                double acc = 0.0;
                for (auto const& e : m_.distribution(s, a)) acc += e.probability * mdp_bound_[k - 1][e.state];
                best = std::max(best, acc);
            }
            v[s] = best;
        }
        mdp_bound_.push_back(std::move(v));
    }
    double acc = 0.0;
    for (auto const& [s, p] : b.entries()) acc += p * mdp_bound_[steps][s];
    return std::min(acc, 1.0);
}

std::vector<std::pair<ObsId, std::pair<double, Belief>>> BeliefViOracle::successors(Belief const& b,
                                                                                    ActionId a) const {
    std::map<ObsId, std::vector<std::pair<StateId, double>>> mass;
    for (auto const& [s, p] : b.entries())
        for (auto const& e : m_.distribution(s, a)) mass[m_.observation(e.state)].push_back({e.state, p * e.probability});
    std::vector<std::pair<ObsId, std::pair<double, Belief>>> out;
    for (auto& [z, entries] : mass) {
        if (bad_.contains(z)) continue;
        double total = 0.0;
        for (auto const& [s, p] : entries) total += p;
        if (total <= 0.0) continue;
        out.push_back({z, {total, Belief(std::move(entries))}});
    }
    return out;
}

double BeliefViOracle::q_upper(Belief const& b, ActionId a, std::size_t steps) {
    double acc = 0.0;
    for (auto const& [z, pb] : successors(b, a)) acc += pb.first * upper_bound(pb.second, steps - 1);
    return acc;
}

double BeliefViOracle::q_value(Belief const& b, ActionId a, std::size_t steps) {
    double acc = 0.0;
    for (auto const& [z, pb] : successors(b, a)) acc += pb.first * value(pb.second, steps - 1);
    return acc;
}

double BeliefViOracle::value(Belief const& b, std::size_t steps) {
    if (steps == 0) return 1.0;
    auto const& entries = b.entries();
    if (std::all_of(entries.begin(), entries.end(), [&](auto const& e) { return safe_absorbing_[e.first] != 0; }))
        return 1.0;
    double const bound = upper_bound(b, steps);
    if (bound <= 0.0) return 0.0;
    std::vector<std::pair<StateId, std::int64_t>> key;
    key.reserve(entries.size());
    for (auto const& [s, p] : entries) key.emplace_back(s, std::llround(p * 1e12));
    auto memo_key = std::make_pair(steps, std::move(key));
    if (auto it = memo_.find(memo_key); it != memo_.end()) return it->second;

    double best = 0.0;
    for (ActionId a : common_actions(m_, support_of(b))) {
        if (best >= bound - kTie) break;
        if (q_upper(b, a, steps) <= best) continue;
        best = std::max(best, q_value(b, a, steps));
    }
    memo_.emplace(std::move(memo_key), best);
    return best;
}

ActionId BeliefViOracle::best_action_from(Belief const& b) {
    auto actions = common_actions(m_, support_of(b));
    if (actions.empty()) return fallback_action(m_, b);
    ActionId best_a = actions.front();
    double best = -1.0;
    for (ActionId a : actions) {
        if (q_upper(b, a, horizon_) < best - kTie) continue;
        double v = q_value(b, a, horizon_);
        if (v > best + kTie) {
            best = v;
            best_a = a;
        }
    }
    return best_a;
}

ActionId BeliefViOracle::best_action(History const& h) {
    if (!validate_history(m_, h)) throw PreconditionError("action query on an invalid history");
    return best_action_from(belief_from_history(m_, h));
}

// ---------------------------------------------------------------------------

ActionId FscOracle::best_action(History const& h) {
    NodeId n = f_.initial();
    for (std::size_t i = 0; i + 1 < h.observations.size(); ++i) n = f_.next(n, h.observations[i]);
    return f_.action(n, h.last_observation());
}

CompositeOracle::CompositeOracle(Pomdp const& m, std::unique_ptr<BeliefViOracle> exact,
                                 std::unique_ptr<SparseSampler> sampler, std::size_t support_cap)
    : m_(m), exact_(std::move(exact)), sampler_(std::move(sampler)), support_cap_(support_cap) {}

ActionId CompositeOracle::best_action(History const& h) {
    if (!validate_history(m_, h)) throw PreconditionError("action query on an invalid history");
    Belief b = belief_from_history(m_, h);
    if (b.support_size() <= support_cap_ || !sampler_) return exact_->best_action_from(b);
    return sampler_->best_action_from(b);
}

// ---------------------------------------------------------------------------

std::optional<ActionId> QueryCache::find(History const& h) const {
    std::shared_lock lock(mutex_);
    if (auto it = entries_.find(h); it != entries_.end()) return it->second;
    return std::nullopt;
}

void QueryCache::insert(History const& h, ActionId a) {
    std::unique_lock lock(mutex_);
    entries_[h] = a;
}

std::size_t QueryCache::size() const {
    std::shared_lock lock(mutex_);
    return entries_.size();
}

void QueryCache::clear() {
    std::unique_lock lock(mutex_);
    entries_.clear();
}

void QueryCache::load(Pomdp const& m, std::string const& path) {
    std::ifstream in(path);
    if (!in) return;
    std::string line;
    std::size_t number = 0;
    while (std::getline(in, line)) {
        ++number;
        if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
        auto arrow = line.find("->");
        if (arrow == std::string::npos) throw ModelError("cache record lacks '->'", number);
        History h = parse_history(m, line.substr(0, arrow));
        std::istringstream rest(line.substr(arrow + 2));
        std::string name;
        rest >> name;
        auto a = m.find_action(name);
        if (!a) throw ModelError("unknown action '" + name + "'", number);
        insert(h, *a);
    }
}

void QueryCache::save(Pomdp const& m, std::string const& path) const {
    std::ofstream out(path);
    if (!out) throw ModelError("cannot write cache file '" + path + "'");
    std::shared_lock lock(mutex_);
    for (auto const& [h, a] : entries_) out << format_history(m, h) << " -> " << m.action_name(a) << '\n';
}

std::optional<ActionId> answer_action_query(ActionOracle& ao, QueryCache& cache, Pomdp const& m,
                                            ObservationSet const& bad, History const& h, QueryStats* stats) {
    if (stats) {
        ++stats->queries;
        if (stats->deadline && std::chrono::steady_clock::now() > *stats->deadline)
            throw TimeoutError("synthesis deadline reached");
    }
    if (std::any_of(h.observations.begin(), h.observations.end(), [&](ObsId z) { return bad.contains(z); }))
        return std::nullopt;
    if (!validate_history(m, h)) return std::nullopt;
    if (auto hit = cache.find(h)) return hit;
    if (stats) ++stats->oracle_calls;
    ActionId a = ao.best_action(h);
    cache.insert(h, a);
    return a;
}

}  // namespace cplus
