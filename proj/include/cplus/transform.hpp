#pragma once

#include <cstddef>

#include "cplus/fsc.hpp"
#include "cplus/model.hpp"

namespace cplus {

inline constexpr double kDefaultDiscount = 0.95;

/// Safety instance recast as a discounted-reward POMDP: bad states move to a
/// fresh absorbing sink q under every action, and r(z, a) = -1 iff z is bad.
struct RewardPomdp {
    Pomdp base;
    ObservationSet bad;
    StateId sink = 0;
    ObsId sink_observation = 0;
    double discount = kDefaultDiscount;

    int reward(ObsId z, ActionId) const { return bad.contains(z) ? -1 : 0; }
    bool terminal(StateId s) const { return s == sink || bad.contains(base.observation(s)); }
};

RewardPomdp make_reward_pomdp(Pomdp const& m, ObservationSet const& bad, double discount = kDefaultDiscount);

/// E[sum_i discount^i r(O(s_i), a_i)] under `policy`, to absolute error `tol`.
/// `policy` may be defined over the original alphabet; the sink column is added.
double discounted_value(RewardPomdp const& rm, Fsc const& policy, double tol = 1e-10);

/// Pure safety instance equivalent to a bounded reach-avoid objective.
struct UnrolledModel {
    Pomdp pomdp;
    ObjectiveSpec objective;
    StateId reached = 0;   ///< absorbing, carries a fresh safe observation
    StateId failed = 0;    ///< absorbing, carries a fresh bad observation
    std::size_t horizon = 0;
};

/// States (s, k) for k = 0..H named "s@k", plus the two absorbing states.
/// A good observation jumps to `reached`; a bad observation, or a non-good
/// observation at k = H, jumps to `failed`.
UnrolledModel unroll_reach_avoid(Pomdp const& m, ObjectiveSpec const& spec);

/// Unique variant of `base` not already used as an observation name.
std::string fresh_observation_name(Pomdp const& m, std::string base);

}  // namespace cplus
