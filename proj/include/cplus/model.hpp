#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <string_view>
#include <unordered_map>
#include <utility>
#include <vector>

#include "cplus/errors.hpp"

namespace cplus {

using StateId = std::uint32_t;
using ActionId = std::uint32_t;
using ObsId = std::uint32_t;

struct Successor {
    StateId state;
    double probability;

    friend bool operator==(Successor const&, Successor const&) = default;
};

/// Sparse distribution, sorted by successor index, zero entries dropped.
using Distribution = std::vector<Successor>;

/// Tolerance used when the text format checks row sums.
inline constexpr double kParseSumTolerance = 1e-9;
/// Tolerance for stochasticity of rows and beliefs held in memory.
inline constexpr double kStochasticTolerance = 1e-12;

/// A subset of the observation alphabet.
class ObservationSet {
public:
    ObservationSet() = default;
    explicit ObservationSet(std::size_t alphabet_size) : members_(alphabet_size, false) {}
    ObservationSet(std::size_t alphabet_size, std::initializer_list<ObsId> members);

    bool contains(ObsId z) const { return z < members_.size() && members_[z]; }
    void insert(ObsId z);
    void resize(std::size_t alphabet_size) { members_.resize(alphabet_size, false); }
    std::size_t alphabet_size() const { return members_.size(); }
    std::size_t count() const;
    bool empty() const { return count() == 0; }
    std::vector<ObsId> members() const;

    friend bool operator==(ObservationSet const&, ObservationSet const&) = default;

private:
    std::vector<bool> members_;
};

/// Finite POMDP with a partial transition function. Immutable once built.
class Pomdp {
public:
    std::size_t num_states() const { return state_names_.size(); }
    std::size_t num_actions() const { return action_names_.size(); }
    std::size_t num_observations() const { return observation_names_.size(); }

    StateId initial_state() const { return initial_; }
    ObsId observation(StateId s) const { return observation_of_[s]; }
    std::vector<StateId> const& states_with(ObsId z) const { return states_by_observation_[z]; }

    bool enabled(StateId s, ActionId a) const { return transitions_[s][a].has_value(); }
    /// Requires enabled(s, a).
    Distribution const& distribution(StateId s, ActionId a) const { return *transitions_[s][a]; }
    std::vector<ActionId> enabled_actions(StateId s) const;

    std::string const& state_name(StateId s) const { return state_names_[s]; }
    std::string const& action_name(ActionId a) const { return action_names_[a]; }
    std::string const& observation_name(ObsId z) const { return observation_names_[z]; }
    std::optional<StateId> find_state(std::string_view name) const;
    std::optional<ActionId> find_action(std::string_view name) const;
    std::optional<ObsId> find_observation(std::string_view name) const;

private:
    friend class PomdpBuilder;
    Pomdp() = default;

    std::vector<std::string> state_names_;
    std::vector<std::string> action_names_;
    std::vector<std::string> observation_names_;
    std::vector<std::vector<std::optional<Distribution>>> transitions_;
    std::vector<ObsId> observation_of_;
    std::vector<std::vector<StateId>> states_by_observation_;
    StateId initial_ = 0;
};

/// Accumulates a POMDP and validates it on build().
class PomdpBuilder {
public:
    ObsId add_observation(std::string name);
    ActionId add_action(std::string name);
    StateId add_state(std::string name, ObsId observation);
    void set_initial(StateId s) { initial_ = s; }
    /// Entries with equal successor are merged; zero-probability entries dropped.
    void set_transition(StateId s, ActionId a, Distribution distribution);
    void clear_transition(StateId s, ActionId a);

    std::size_t num_states() const { return model_.state_names_.size(); }
    std::size_t num_actions() const { return model_.action_names_.size(); }
    std::size_t num_observations() const { return model_.observation_names_.size(); }

    /// Throws ModelError when a row is not stochastic, a state has no enabled
    /// action, or the initial state is unset.
    Pomdp build() &&;

private:
    Pomdp model_;
    std::optional<StateId> initial_;
};

/// Starts a builder pre-populated with a copy of `m`.
PomdpBuilder to_builder(Pomdp const& m);

/// Finite Markov chain with total, stochastic rows.
struct MarkovChain {
    std::vector<Distribution> rows;
    StateId initial = 0;

    std::size_t num_states() const { return rows.size(); }
};

/// Alternating observation/action sequence z0 a0 z1 ... zi that ends with an observation.
struct History {
    std::vector<ObsId> observations;
    std::vector<ActionId> actions;

    History() = default;
    explicit History(ObsId first) : observations{first} {}
    History(std::vector<ObsId> obs, std::vector<ActionId> acts);

    std::size_t length() const { return actions.size(); }
    ObsId last_observation() const { return observations.back(); }
    History extended(ActionId a, ObsId z) const;
    History prefix(std::size_t steps) const;

    friend bool operator==(History const&, History const&) = default;
    friend auto operator<=>(History const& lhs, History const& rhs) {
        if (auto c = lhs.observations <=> rhs.observations; c != 0) return c;
        return lhs.actions <=> rhs.actions;
    }
};

/// Renders a history using the model's symbol names, e.g. "gray right gray".
std::string format_history(Pomdp const& m, History const& h);
/// Inverse of format_history. Throws ModelError on unknown symbols or bad alternation.
History parse_history(Pomdp const& m, std::string_view text);

/// Sparse posterior over states. Entries are positive and sum to one.
class Belief {
public:
    Belief() = default;
    static Belief point(StateId s) { return Belief({{s, 1.0}}); }
    /// Drops non-positive entries, merges duplicates and normalizes. Throws on zero mass.
    explicit Belief(std::vector<std::pair<StateId, double>> entries);

    std::vector<std::pair<StateId, double>> const& entries() const { return entries_; }
    double operator[](StateId s) const;
    std::size_t support_size() const { return entries_.size(); }
    double total() const;

private:
    std::vector<std::pair<StateId, double>> entries_;
};

/// Bayes update after playing `a` and observing `z`.
/// Throws PreconditionError if `a` is disabled in a support state and
/// InconsistentObservation if `z` has zero likelihood.
Belief belief_update(Pomdp const& m, Belief const& b, ActionId a, ObsId z);

/// Posterior over states given a history, conditioning on the existence of a
/// realizing path. Unlike belief_update, states where the played action is
/// disabled simply drop out. Throws InconsistentObservation for invalid histories.
Belief belief_from_history(Pomdp const& m, History const& h);

/// Set of states that end some finite path realizing `h` (empty iff h is invalid).
std::vector<StateId> consistent_states(Pomdp const& m, History const& h);

bool validate_history(Pomdp const& m, History const& h);

/// Product of consecutive transition probabilities; 1 for a single state.
double path_probability(MarkovChain const& mc, std::vector<StateId> const& path);

enum class ObjectiveKind { Safety, BoundedReachAvoid };

struct ObjectiveSpec {
    ObjectiveKind kind = ObjectiveKind::Safety;
    ObservationSet bad;
    std::optional<ObservationSet> good;
    std::optional<std::size_t> horizon;
    double alpha = 0.0;

    /// Throws PreconditionError when alpha is outside [0,1) or a reach-avoid
    /// objective lacks its horizon or good set.
    void validate() const;
};

/// Contents of a model file: the POMDP plus the bad/good observation sets it declares.
struct LoadedModel {
    Pomdp pomdp;
    ObjectiveSpec objective;
};

/// Parses the explicit line-oriented format. Bad states are turned into
/// absorbing sinks under every action. Errors carry line numbers.
LoadedModel parse_model(std::string_view text);
LoadedModel load_model_file(std::string const& path);

/// Canonical text form; parse_model(serialize_model(x)) reproduces x.
std::string serialize_model(Pomdp const& m, ObjectiveSpec const& objective);

/// Makes every state whose observation is in `bad` absorbing under all actions.
Pomdp make_bad_absorbing(Pomdp const& m, ObservationSet const& bad);

}  // namespace cplus
