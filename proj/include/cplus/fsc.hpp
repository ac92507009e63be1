#pragma once

#include <cstdint>
#include <optional>
#include <random>
#include <string>
#include <string_view>
#include <vector>

#include "cplus/model.hpp"

namespace cplus {

using NodeId = std::uint32_t;

/// Mealy-style finite-state controller: at node n seeing z, play gamma(n, z)
/// and move to delta(n, z). Cells may be flagged "unspecified" when they were
/// filled by a default rule rather than chosen by the learner or the user.
class Fsc {
public:
    Fsc() = default;
    /// All cells start as unspecified self-loops playing action 0.
    Fsc(std::size_t num_nodes, std::size_t num_observations, NodeId initial = 0);

    std::size_t num_nodes() const { return num_nodes_; }
    std::size_t num_observations() const { return num_observations_; }
    NodeId initial() const { return initial_; }

    ActionId action(NodeId n, ObsId z) const { return action_[index(n, z)]; }
    NodeId next(NodeId n, ObsId z) const { return next_[index(n, z)]; }
    bool specified(NodeId n, ObsId z) const { return specified_[index(n, z)] != 0; }

    void set(NodeId n, ObsId z, ActionId a, NodeId successor, bool is_specified = true);
    void set_initial(NodeId n) { initial_ = n; }

    /// Copy with `extra` additional observation columns, filled with
    /// unspecified self-loops playing `action`.
    Fsc with_extra_observations(std::size_t extra, ActionId action = 0) const;

    /// Node reached after reading `observations` from the initial node.
    NodeId run(std::vector<ObsId> const& observations) const;

    friend bool operator==(Fsc const&, Fsc const&) = default;

private:
    std::size_t index(NodeId n, ObsId z) const { return static_cast<std::size_t>(n) * num_observations_ + z; }

    std::size_t num_nodes_ = 0;
    std::size_t num_observations_ = 0;
    NodeId initial_ = 0;
    std::vector<ActionId> action_;
    std::vector<NodeId> next_;
    std::vector<char> specified_;
};

/// Action used for cells nobody specified: the lowest action enabled in every
/// state carrying `z`, or failing that the lowest action enabled in some such state.
ActionId default_action(Pomdp const& m, ObsId z);

/// Replaces the action of every unspecified cell by default_action.
Fsc fill_unspecified(Pomdp const& m, Fsc f);

/// Reachable fragment of P x F together with back-maps to (state, node).
struct ProductChain {
    MarkovChain chain;
    std::vector<StateId> pomdp_state;
    std::vector<NodeId> node;
    /// Absorbing state entered when the controller plays a disabled action (Crash mode only).
    std::optional<StateId> crash;
};

enum class DisabledMode { Throw, Crash };

/// Worklist construction from (s0, n0). In Throw mode a disabled action at a
/// reachable pair raises DisabledActionError naming (state, node, observation,
/// action); in Crash mode the pair moves to an extra absorbing state that
/// bad_mask reports as bad.
ProductChain build_product(Pomdp const& m, Fsc const& f, DisabledMode mode = DisabledMode::Throw);

/// Per product state: does its POMDP state carry a bad observation?
std::vector<char> bad_mask(ProductChain const& product, Pomdp const& m, ObservationSet const& bad);

std::string product_state_name(ProductChain const& product, Pomdp const& m, StateId ps);

struct FscRun {
    std::vector<StateId> path;
    std::vector<NodeId> nodes;
    bool bad_hit = false;
};

/// Simulates `steps` transitions under the controller; stops early at the first bad observation.
FscRun run_fsc(Pomdp const& m, Fsc const& f, ObservationSet const& bad, std::size_t steps, std::uint64_t seed);
/// Same, drawing from a caller-owned generator.
FscRun run_fsc(Pomdp const& m, Fsc const& f, ObservationSet const& bad, std::size_t steps, std::mt19937_64& rng);

/// Text form: optional "init <node>" line, then "node obs -> action node" lines.
/// Missing cells become unspecified self-loops with default_action.
Fsc parse_fsc(Pomdp const& m, std::string_view text);
Fsc load_fsc_file(Pomdp const& m, std::string const& path);
/// Writes specified cells only, so unspecified cells survive a round trip.
std::string serialize_fsc(Pomdp const& m, Fsc const& f);

/// GraphViz rendering: one edge per (node, observation) labelled "z / a";
/// unspecified cells are dashed.
std::string export_dot(Pomdp const& m, Fsc const& f);
/// Reads back the output of export_dot.
Fsc parse_dot(Pomdp const& m, std::string_view dot);

}  // namespace cplus
