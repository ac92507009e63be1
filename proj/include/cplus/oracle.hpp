#pragma once

#include <chrono>
#include <cstdint>
#include <map>
#include <memory>
#include <optional>
#include <shared_mutex>
#include <string>
#include <vector>

#include "cplus/fsc.hpp"
#include "cplus/model.hpp"
#include "cplus/transform.hpp"

namespace cplus {

/// Answers "which action after history h". Implementations are deterministic
/// for a fixed configuration, and return an action enabled in every state
/// consistent with h whenever such an action exists.
class ActionOracle {
public:
    virtual ~ActionOracle() = default;
    virtual ActionId best_action(History const& h) = 0;
    virtual std::string name() const = 0;
};

/// Actions enabled in every state of `states`, in index order.
std::vector<ActionId> common_actions(Pomdp const& m, std::vector<StateId> const& states);

/// Fallback when nothing is enabled everywhere: lowest action enabled in the most likely state.
ActionId fallback_action(Pomdp const& m, Belief const& b);

struct SamplerConfig {
    std::size_t budget = 500;   ///< number of scenarios
    std::size_t depth = 90;     ///< maximum tree depth
    std::uint64_t seed = 0;
    std::size_t max_trials = 200;
    double target_gap = 1e-3;   ///< stop once the root bound gap is this small
};

/// Determinized sparse belief-tree search: `budget` scenarios, each a fixed
/// initial-state draw and random stream, shared by all actions. Every node
/// keeps a lower bound (best fixed-action rollout) and an upper bound; trials
/// descend along the action with the best upper bound and the child with the
/// largest weighted gap. The root action maximizing the lower bound wins.
class SparseSampler : public ActionOracle {
public:
    SparseSampler(RewardPomdp const& rm, SamplerConfig config = {});

    ActionId best_action(History const& h) override;
    std::string name() const override { return "sampler"; }

    /// Root statistics of the most recent search.
    struct RootStats {
        double lower = 0.0;
        double upper = 0.0;
        double estimate = 0.0;
        std::vector<double> action_lower;
        std::size_t trials = 0;
        std::size_t nodes = 0;
    };
    RootStats const& last_root() const { return last_; }

    /// Search from an explicit belief over the base model's states.
    ActionId best_action_from(Belief const& b);

private:
    struct Node;
    struct Particle {
        std::uint32_t scenario;
        StateId state;
    };

    double uniform(std::uint32_t scenario, std::size_t depth) const;
    StateId step(StateId s, ActionId a, double u) const;
    ActionId rollout_action(StateId s, ActionId preferred) const;
    double rollout(Particle p, std::size_t depth, ActionId a) const;
    void init_bounds(Node& node) const;
    void expand(Node& node) const;
    void backup(Node& node) const;

    RewardPomdp const& rm_;
    SamplerConfig config_;
    RootStats last_;
};

/// Exact finite-horizon belief value iteration: maximizes the probability of
/// avoiding Bad for the next `horizon` steps from the belief after h.
class BeliefViOracle : public ActionOracle {
public:
    /// horizon 0 selects the default lookahead 3 |S|.
    BeliefViOracle(Pomdp const& m, ObservationSet const& bad, std::size_t horizon = 0);

    ActionId best_action(History const& h) override;
    std::string name() const override { return "belief-vi"; }

    ActionId best_action_from(Belief const& b);
    /// Probability of avoiding Bad for `steps` steps from b under an optimal
    /// observation-based policy (1 when steps is 0).
    double value(Belief const& b, std::size_t steps);
    std::size_t horizon() const { return horizon_; }

private:
    double upper_bound(Belief const& b, std::size_t steps);
    double q_value(Belief const& b, ActionId a, std::size_t steps);
    double q_upper(Belief const& b, ActionId a, std::size_t steps);
    std::vector<std::pair<ObsId, std::pair<double, Belief>>> successors(Belief const& b, ActionId a) const;

    Pomdp const& m_;
    ObservationSet bad_;
    std::size_t horizon_;
    std::vector<char> safe_absorbing_;
    std::vector<std::vector<double>> mdp_bound_;  ///< [steps][state]
    std::map<std::pair<std::size_t, std::vector<std::pair<StateId, std::int64_t>>>, double> memo_;
};

/// The policy of a fixed controller: run it over h's observations.
class FscOracle : public ActionOracle {
public:
    explicit FscOracle(Fsc f) : f_(std::move(f)) {}
    ActionId best_action(History const& h) override;
    std::string name() const override { return "fsc"; }

private:
    Fsc f_;
};

/// Belief VI while the belief support stays within `support_cap`; the sampler beyond.
class CompositeOracle : public ActionOracle {
public:
    CompositeOracle(Pomdp const& m, std::unique_ptr<BeliefViOracle> exact, std::unique_ptr<SparseSampler> sampler,
                    std::size_t support_cap);
    ActionId best_action(History const& h) override;
    std::string name() const override { return "composite"; }

private:
    Pomdp const& m_;
    std::unique_ptr<BeliefViOracle> exact_;
    std::unique_ptr<SparseSampler> sampler_;
    std::size_t support_cap_;
};

/// History -> action memo. Concurrent reads, exclusive writes.
class QueryCache {
public:
    std::optional<ActionId> find(History const& h) const;
    void insert(History const& h, ActionId a);
    std::size_t size() const;
    void clear();

    /// One record per line: "obs a obs ... obs -> action".
    void load(Pomdp const& m, std::string const& path);
    void save(Pomdp const& m, std::string const& path) const;

private:
    mutable std::shared_mutex mutex_;
    std::map<History, ActionId> entries_;
};

/// Counts oracle invocations and enforces an optional deadline.
struct QueryStats {
    std::size_t queries = 0;          ///< answer_action_query calls
    std::size_t oracle_calls = 0;     ///< cache misses forwarded to the oracle
    std::optional<std::chrono::steady_clock::time_point> deadline;
};

/// nullopt is the don't-care symbol x: returned for invalid histories and for
/// histories whose last observation is bad (play has already failed there).
/// Otherwise the cached answer, or the oracle's, which is then cached.
/// Throws TimeoutError once the deadline in `stats` has passed.
std::optional<ActionId> answer_action_query(ActionOracle& ao, QueryCache& cache, Pomdp const& m,
                                            ObservationSet const& bad, History const& h, QueryStats* stats = nullptr);

}  // namespace cplus
