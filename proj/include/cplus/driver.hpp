#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "cplus/checker.hpp"
#include "cplus/fsc.hpp"
#include "cplus/learner.hpp"
#include "cplus/model.hpp"
#include "cplus/oracle.hpp"
#include "cplus/transform.hpp"

namespace cplus {

enum class Outcome { Fsc, Fail, Timeout };

std::string to_string(Outcome o);

struct SynthesisLimits {
    std::size_t max_iters = 100;
    double timeout_seconds = 600.0;
};

/// What one model-checking query saw.
struct IterationRecord {
    Fsc hypothesis;
    std::optional<double> safety;        ///< set when the threshold held
    std::optional<double> top_path;      ///< probability of the first counterexample path
    double counterexample_mass = 0.0;
    std::size_t counterexample_paths = 0;
    std::optional<Word> suffix;          ///< column added by counterexample processing
};

struct SynthesisReport {
    Outcome outcome = Outcome::Fail;
    std::optional<Fsc> fsc;
    std::size_t iterations = 0;          ///< model-checking queries
    std::size_t oracle_queries = 0;      ///< queries that reached the oracle (cache misses)
    std::size_t table_queries = 0;       ///< all action queries, cached or not
    std::optional<double> verified_probability;
    double wall_time = 0.0;
    std::string message;
    std::vector<IterationRecord> trace;
};

/// The safety instance CPLUS actually runs on: the model itself, or its
/// unrolling when the objective is bounded reach-avoid.
struct SafetyInstance {
    Pomdp model;
    ObservationSet bad;
    double alpha = 0.0;
    std::optional<UnrolledModel> unrolled;
};

SafetyInstance make_safety_instance(Pomdp const& m, ObjectiveSpec const& spec);

/// Learn-check-refine loop. The oracle must plan over `instance.model`.
SynthesisReport cplus_synthesize(SafetyInstance const& instance, ActionOracle& ao, SynthesisLimits limits = {},
                                 QueryCache* cache = nullptr);

/// Convenience overload: builds the safety instance first.
SynthesisReport cplus_synthesize(Pomdp const& m, ObjectiveSpec const& spec, ActionOracle& ao,
                                 SynthesisLimits limits = {}, QueryCache* cache = nullptr);

/// n x n grid, one "safe" observation for all non-hole cells, holes observed
/// as "hole" and absorbing. Moves succeed with 1 - slip and stay otherwise;
/// moves against the border leave the robot in place. A "start" state moves
/// to a uniformly random safe cell under every action.
LoadedModel gen_grid_world(std::size_t n, double bad_fraction, double slip, std::uint64_t seed);

/// Number of holes gen_grid_world places: round-half-even of fraction * n^2,
/// at least 1 when the fraction is positive, and leaving one safe cell.
std::size_t grid_hole_count(std::size_t n, double bad_fraction);

enum class CardsVariant { Removed, Added };
enum class CardsMode { Bounded, Unbounded };

inline constexpr double kForcedGuessProbability = 0.05;

/// Card game: a hidden card is missing (Removed) or duplicated (Added); each
/// step the player draws uniformly from the deck or guesses. Bounded mode is a
/// reach-avoid objective with horizon 2n; unbounded mode is a safety
/// objective in which every draw forces a guess with probability 0.05.
LoadedModel gen_cards(std::size_t n, CardsVariant variant, CardsMode mode);

}  // namespace cplus
