#pragma once

#include <cstddef>
#include <functional>
#include <string>
#include <variant>
#include <vector>

#include "cplus/model.hpp"

namespace cplus {

inline constexpr double kDefaultCheckTolerance = 1e-10;
inline constexpr std::size_t kDefaultPathCap = 1'000'000;

/// Reachability probabilities of a bad set with a certified error bound.
struct ReachResult {
    double reach;       ///< Pr(<>Bad) from the initial state, within `error`.
    double lower;       ///< Certified lower bound on Pr(<>Bad).
    double upper;       ///< Certified upper bound on Pr(<>Bad).
    std::vector<double> per_state;
    std::size_t iterations = 0;

    double safety() const { return 1.0 - reach; }
    double safety_lower() const { return 1.0 - upper; }
    double safety_upper() const { return 1.0 - lower; }
};

/// Graph precomputation of the prob-0 and prob-1 sets of <>Bad, then interval
/// iteration on the remaining states until the bracket is at most 2*tol wide.
ReachResult reach_probability(MarkovChain const& mc, std::vector<char> const& bad, double tol = kDefaultCheckTolerance);

/// Pr([]!Bad) = 1 - Pr(<>Bad) from the initial state.
double safety_probability(MarkovChain const& mc, std::vector<char> const& bad, double tol = kDefaultCheckTolerance);

/// Finite set of first-visit paths to Bad. Cylinders are pairwise disjoint,
/// so `total` is exactly the measure of their union.
struct Counterexample {
    std::vector<std::vector<StateId>> paths;
    std::vector<double> probs;
    double total = 0.0;
    /// False only when the requested mass sat on the reachable boundary and
    /// enumeration stopped short of exceeding it (see check_threshold).
    bool exceeds_target = true;
};

/// Best-first enumeration in nonincreasing path probability until the
/// cumulative mass strictly exceeds `mass`. Throws CounterexampleError if
/// Pr(<>Bad) <= mass or the path cap is hit.
Counterexample enumerate_counterexample(MarkovChain const& mc, std::vector<char> const& bad, double mass,
                                        std::size_t path_cap = kDefaultPathCap);

struct Holds {
    double safety;
};

using Verdict = std::variant<Holds, Counterexample>;

/// `Holds` iff the certified lower bound of Pr([]!Bad) exceeds alpha; otherwise a
/// counterexample of mass > 1 - alpha. When the safety probability equals
/// alpha within tolerance no such finite set exists; the enumeration then
/// stops once within `tol` of the reachable mass and flags exceeds_target = false.
Verdict check_threshold(MarkovChain const& mc, std::vector<char> const& bad, double alpha,
                        double tol = kDefaultCheckTolerance, std::size_t path_cap = kDefaultPathCap);

/// One line per path: probability, states with step probabilities, observation trace.
/// `label` names a chain state; `observation` gives the symbol used for the trace projection.
std::string format_counterexample(MarkovChain const& mc, Counterexample const& cex,
                                  std::function<std::string(StateId)> const& label,
                                  std::function<std::string(StateId)> const& observation);

}  // namespace cplus
