#include "cplus/driver.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <numeric>
#include <random>

namespace cplus {

std::string to_string(Outcome o) {
    switch (o) {
        case Outcome::Fsc: return "fsc";
        case Outcome::Fail: return "fail";
        case Outcome::Timeout: return "timeout";
    }
    return "unknown";
}

SafetyInstance make_safety_instance(Pomdp const& m, ObjectiveSpec const& spec) {
    spec.validate();
    if (spec.kind == ObjectiveKind::BoundedReachAvoid) {
        UnrolledModel u = unroll_reach_avoid(m, spec);
        SafetyInstance out{u.pomdp, u.objective.bad, spec.alpha, std::nullopt};
        out.unrolled = std::move(u);
        return out;
    }
    ObservationSet bad = spec.bad;
    bad.resize(m.num_observations());
    return {make_bad_absorbing(m, bad), bad, spec.alpha, std::nullopt};
}

SynthesisReport cplus_synthesize(Pomdp const& m, ObjectiveSpec const& spec, ActionOracle& ao, SynthesisLimits limits,
                                 QueryCache* cache) {
    return cplus_synthesize(make_safety_instance(m, spec), ao, limits, cache);
}

SynthesisReport cplus_synthesize(SafetyInstance const& instance, ActionOracle& ao, SynthesisLimits limits,
                                 QueryCache* cache) {
    using clock = std::chrono::steady_clock;
    auto const start = clock::now();
    QueryCache local;
    QueryCache& qc = cache ? *cache : local;
    QueryContext ctx{ao, qc, instance.model, instance.bad};
    ctx.stats.deadline = start + std::chrono::duration_cast<clock::duration>(
                                     std::chrono::duration<double>(limits.timeout_seconds));
    SynthesisReport report;
    auto finish = [&](Outcome o, std::string message) {
        report.outcome = o;
        report.message = std::move(message);
        report.oracle_queries = ctx.stats.oracle_calls;
        report.table_queries = ctx.stats.queries;
        report.wall_time = std::chrono::duration<double>(clock::now() - start).count();
        return report;
    };

    try {
        ObservationTable table = init_table(ctx);
        for (;;) {
            if (report.iterations >= limits.max_iters)
                return finish(Outcome::Timeout, "iteration limit reached");
            if (clock::now() > *ctx.stats.deadline) return finish(Outcome::Timeout, "synthesis deadline reached");
            close_table(table, ctx);
            Hypothesis hyp = build_hypothesis(table, instance.model);
            ProductChain product = build_product(instance.model, hyp.fsc, DisabledMode::Crash);
            auto bad = bad_mask(product, instance.model, instance.bad);
            ++report.iterations;
            IterationRecord record{hyp.fsc, {}, {}, 0.0, 0, {}};
            Verdict verdict = check_threshold(product.chain, bad, instance.alpha);
            if (auto const* holds = std::get_if<Holds>(&verdict)) {
                record.safety = holds->safety;
                report.trace.push_back(record);
                auto strict = reach_probability(product.chain, bad, 1e-12);
                if (strict.safety_lower() > instance.alpha) {
                    report.fsc = hyp.fsc;
                    report.verified_probability = strict.safety();
                    return finish(Outcome::Fsc, "threshold verified");
                }
                verdict = enumerate_counterexample(product.chain, bad,
                                                   std::max(0.0, std::min(1.0 - instance.alpha, strict.lower) - 1e-9));
                report.trace.pop_back();
            }
            auto const& cex = std::get<Counterexample>(verdict);
            record.top_path = cex.probs.empty() ? std::nullopt : std::optional<double>(cex.probs.front());
            record.counterexample_mass = cex.total;
            record.counterexample_paths = cex.paths.size();
            auto outcome = process_counterexample(table, cex, product, hyp, ctx);
            if (outcome.refined) record.suffix = outcome.suffix;
            report.trace.push_back(std::move(record));
            if (!outcome.refined) return finish(Outcome::Fail, "oracle agrees with the hypothesis on every counterexample path");
        }
    } catch (TimeoutError const& e) {
        return finish(Outcome::Timeout, e.what());
    } catch (CounterexampleError const& e) {
        return finish(Outcome::Fail, e.what());
    }
}

std::size_t grid_hole_count(std::size_t n, double bad_fraction) {
    if (bad_fraction <= 0.0) return 0;
    auto count = static_cast<std::size_t>(std::nearbyint(bad_fraction * static_cast<double>(n * n)));
    return std::clamp<std::size_t>(count, 1, n * n - 1);
}

LoadedModel gen_grid_world(std::size_t n, double bad_fraction, double slip, std::uint64_t seed) {
    if (n < 2) throw PreconditionError("grid side must be at least 2");
    if (!(slip >= 0.0 && slip < 1.0)) throw PreconditionError("slip must lie in [0,1)");
    std::vector<std::size_t> cells(n * n);
    std::iota(cells.begin(), cells.end(), 0);
    std::mt19937_64 rng(seed);
    std::shuffle(cells.begin(), cells.end(), rng);
    std::vector<char> hole(n * n, 0);
    for (std::size_t i = 0; i < grid_hole_count(n, bad_fraction); ++i) hole[cells[i]] = 1;

    PomdpBuilder b;
    ObsId z_start = b.add_observation("start");
    ObsId z_safe = b.add_observation("safe");
    ObsId z_hole = b.add_observation("hole");
    ActionId up = b.add_action("up");
    ActionId down = b.add_action("down");
    ActionId left = b.add_action("left");
    ActionId right = b.add_action("right");
    StateId start = b.add_state("start", z_start);
    auto id = [&](std::size_t x, std::size_t y) { return static_cast<StateId>(1 + y * n + x); };
    for (std::size_t y = 0; y < n; ++y)
        for (std::size_t x = 0; x < n; ++x)
            b.add_state("(" + std::to_string(x) + "," + std::to_string(y) + ")", hole[y * n + x] ? z_hole : z_safe);

    Distribution spread;
    std::size_t safe = n * n - static_cast<std::size_t>(std::count(hole.begin(), hole.end(), 1));
    for (std::size_t c = 0; c < n * n; ++c)
        if (!hole[c]) spread.push_back({id(c % n, c / n), 1.0 / static_cast<double>(safe)});
    for (ActionId a = 0; a < 4; ++a) b.set_transition(start, a, spread);

    for (std::size_t y = 0; y < n; ++y)
        for (std::size_t x = 0; x < n; ++x) {
            StateId s = id(x, y);
            for (ActionId a : {up, down, left, right}) {
                if (hole[y * n + x]) {
                    b.set_transition(s, a, {{s, 1.0}});
                    continue;
                }
                long nx = static_cast<long>(x) + (a == right) - (a == left);
                long ny = static_cast<long>(y) + (a == up) - (a == down);
                bool inside = nx >= 0 && ny >= 0 && nx < static_cast<long>(n) && ny < static_cast<long>(n);
                if (!inside) {
                    b.set_transition(s, a, {{s, 1.0}});
                    continue;
                }
                b.set_transition(s, a, {{id(static_cast<std::size_t>(nx), static_cast<std::size_t>(ny)), 1.0 - slip},
                                        {s, slip}});
            }
        }
    b.set_initial(start);
    LoadedModel out{std::move(b).build(), {}};
    out.objective.kind = ObjectiveKind::Safety;
    out.objective.bad = ObservationSet(out.pomdp.num_observations(), {z_hole});
    return out;
}

LoadedModel gen_cards(std::size_t n, CardsVariant variant, CardsMode mode) {
    if (n < 2) throw PreconditionError("deck size must be at least 2");
    bool const removed = variant == CardsVariant::Removed;
    bool const unbounded = mode == CardsMode::Unbounded;
    double const nd = static_cast<double>(n);

    PomdpBuilder b;
    ObsId z_start = b.add_observation("start");
    std::vector<ObsId> z_card;
    for (std::size_t j = 1; j <= n; ++j) z_card.push_back(b.add_observation("c" + std::to_string(j)));
    ObsId z_forced = unbounded ? b.add_observation("forced") : 0;
    ObsId z_win = b.add_observation("win");
    ObsId z_lose = b.add_observation("lose");
    ActionId draw = b.add_action("draw");
    std::vector<ActionId> guess;
    for (std::size_t g = 1; g <= n; ++g) guess.push_back(b.add_action("guess" + std::to_string(g)));

    StateId start = b.add_state("start", z_start);
    // shown[i][j]: hidden card i, card j just drawn
    std::vector<std::vector<std::optional<StateId>>> shown(n, std::vector<std::optional<StateId>>(n));
    for (std::size_t i = 0; i < n; ++i)
        for (std::size_t j = 0; j < n; ++j)
            if (!removed || i != j)
                shown[i][j] = b.add_state("h" + std::to_string(i + 1) + "c" + std::to_string(j + 1), z_card[j]);
    std::vector<StateId> forced;
    if (unbounded)
        for (std::size_t i = 0; i < n; ++i) forced.push_back(b.add_state("h" + std::to_string(i + 1) + "forced", z_forced));
    StateId win = b.add_state("win", z_win);
    StateId lose = b.add_state("lose", z_lose);

    auto draw_from = [&](std::size_t i) {
        Distribution row;
        double const deck = removed ? nd - 1.0 : nd + 1.0;
        double const go = unbounded ? 1.0 - kForcedGuessProbability : 1.0;
        for (std::size_t j = 0; j < n; ++j) {
            if (!shown[i][j]) continue;
            double copies = (!removed && i == j) ? 2.0 : 1.0;
            row.push_back({*shown[i][j], go * copies / deck});
        }
        if (unbounded) row.push_back({forced[i], kForcedGuessProbability});
        return row;
    };
    auto set_guesses = [&](StateId s, std::size_t i) {
        for (std::size_t g = 0; g < n; ++g) b.set_transition(s, guess[g], {{g == i ? win : lose, 1.0}});
    };

    Distribution initial_draw;
    for (std::size_t i = 0; i < n; ++i)
        for (auto e : draw_from(i)) initial_draw.push_back({e.state, e.probability / nd});
    b.set_transition(start, draw, initial_draw);
    for (std::size_t g = 0; g < n; ++g) b.set_transition(start, guess[g], {{win, 1.0 / nd}, {lose, 1.0 - 1.0 / nd}});
    for (std::size_t i = 0; i < n; ++i) {
        for (std::size_t j = 0; j < n; ++j) {
            if (!shown[i][j]) continue;
            b.set_transition(*shown[i][j], draw, draw_from(i));
            set_guesses(*shown[i][j], i);
        }
        if (unbounded) set_guesses(forced[i], i);
    }
    for (ActionId a = 0; a <= n; ++a) {
        b.set_transition(win, a, {{win, 1.0}});
        b.set_transition(lose, a, {{lose, 1.0}});
    }
    b.set_initial(start);

    LoadedModel out{std::move(b).build(), {}};
    std::size_t const alphabet = out.pomdp.num_observations();
    out.objective.bad = ObservationSet(alphabet, {z_lose});
    out.objective.good = ObservationSet(alphabet, {z_win});
    out.objective.alpha = 0.5;
    if (unbounded) {
        out.objective.kind = ObjectiveKind::Safety;
    } else {
        out.objective.kind = ObjectiveKind::BoundedReachAvoid;
        out.objective.horizon = 2 * n;
    }
    return out;
}

}  // namespace cplus
