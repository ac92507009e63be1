#include <gtest/gtest.h>

#include <algorithm>
#include <numeric>
#include <random>

#include "support.hpp"

using namespace cplus;

namespace {

struct Grid {
    LoadedModel lm = test::grid4x3();
    Pomdp const& m = lm.pomdp;
    ProductChain product(std::string const& file) const {
        return build_product(m, load_fsc_file(m, test::model_path(file)));
    }
    std::vector<char> bad(ProductChain const& p) const { return bad_mask(p, m, lm.objective.bad); }
};

Grid const& g() {
    static Grid grid;
    return grid;
}

/// 0 -> bad with 1/2, 0 -> 1 with 1/2; 1 -> bad with 1/2, 1 -> 0 with 1/2.
MarkovChain geometric() { return {{{{1, 0.5}, {2, 0.5}}, {{0, 0.5}, {2, 0.5}}, {{2, 1.0}}}, 0}; }

void check_contract(MarkovChain const& mc, std::vector<char> const& bad, Counterexample const& cex, double mass) {
    EXPECT_GT(cex.total, mass);
    EXPECT_NEAR(std::accumulate(cex.probs.begin(), cex.probs.end(), 0.0), cex.total, 1e-12);
    for (std::size_t i = 0; i < cex.paths.size(); ++i) {
        auto const& p = cex.paths[i];
        EXPECT_EQ(p.front(), mc.initial);
        EXPECT_TRUE(bad[p.back()]);
        for (std::size_t k = 0; k + 1 < p.size(); ++k) EXPECT_FALSE(bad[p[k]]);
        EXPECT_NEAR(path_probability(mc, p), cex.probs[i], 1e-15);
        if (i) EXPECT_LE(cex.probs[i], cex.probs[i - 1]);
    }
    for (std::size_t i = 0; i < cex.paths.size(); ++i)
        for (std::size_t j = 0; j < cex.paths.size(); ++j) {
            if (i == j) continue;
            auto const& a = cex.paths[i];
            auto const& b = cex.paths[j];
            bool prefix = a.size() <= b.size() && std::equal(a.begin(), a.end(), b.begin());
            EXPECT_FALSE(prefix);
        }
}

}  // namespace

TEST(Safety, NoBadReachable) {
    MarkovChain mc{{{{1, 1.0}}, {{1, 1.0}}, {{2, 1.0}}}, 0};
    EXPECT_EQ(safety_probability(mc, {0, 0, 1}), 1.0);
}

TEST(Safety, AlwaysRightIsZero) {
    auto p = g().product("always_right.fsc");
    EXPECT_NEAR(safety_probability(p.chain, g().bad(p)), 0.0, 1e-9);
    EXPECT_NEAR(static_cast<double>(test::exact_reach(p.chain, g().bad(p))), 1.0, 1e-12);
}

TEST(Safety, ShuttleIsPoint729) {
    auto p = g().product("shuttle.fsc");
    EXPECT_NEAR(safety_probability(p.chain, g().bad(p)), 0.729, 1e-9);
    double exact = static_cast<double>(1 - test::exact_reach(p.chain, g().bad(p)));
    EXPECT_NEAR(exact, 0.729, 1e-12);
}

TEST(Safety, MatchesRationalSolveOnSmallChains) {
    std::mt19937_64 rng(17);
    for (int trial = 0; trial < 300; ++trial) {
        auto [mc, bad] = test::random_chain(rng, 2 + trial % 9);
        ReachResult r = reach_probability(mc, bad);
        double exact = static_cast<double>(test::exact_reach(mc, bad));
        EXPECT_NEAR(r.reach, exact, 1e-9);
        EXPECT_LE(r.lower, exact + 1e-12);
        EXPECT_GE(r.upper, exact - 1e-12);
        EXPECT_NEAR(safety_probability(mc, bad) + r.reach, 1.0, 2e-10);
    }
}

TEST(Threshold, ShuttleHolds) {
    auto p = g().product("shuttle.fsc");
    Verdict v = check_threshold(p.chain, g().bad(p), 0.7);
    ASSERT_TRUE(std::holds_alternative<Holds>(v));
    EXPECT_NEAR(std::get<Holds>(v).safety, 0.729, 1e-9);
}

TEST(Threshold, AlwaysRightGivesFourStepTrace) {
    auto p = g().product("always_right.fsc");
    auto bad = g().bad(p);
    Verdict v = check_threshold(p.chain, bad, 0.7);
    ASSERT_TRUE(std::holds_alternative<Counterexample>(v));
    auto const& cex = std::get<Counterexample>(v);
    ASSERT_EQ(cex.paths.size(), 1u);
    EXPECT_NEAR(cex.probs[0], 0.6561, 1e-12);
    EXPECT_EQ(cex.paths[0].size(), 5u);
    for (std::size_t i = 0; i + 1 < 5; ++i)
        EXPECT_EQ(g().m.observation_name(g().m.observation(p.pomdp_state[cex.paths[0][i]])), "gray");
    check_contract(p.chain, bad, cex, 0.3);
}

TEST(Threshold, ZeroSafetyAtHalf) {
    MarkovChain mc = geometric();
    Verdict v = check_threshold(mc, {0, 0, 1}, 0.5);
    ASSERT_TRUE(std::holds_alternative<Counterexample>(v));
    check_contract(mc, {0, 0, 1}, std::get<Counterexample>(v), 0.5);
}

TEST(Threshold, InvariantUnderRenumbering) {
    std::mt19937_64 rng(23);
    for (int trial = 0; trial < 100; ++trial) {
        auto [mc, bad] = test::random_chain(rng, 3 + trial % 10, 0.5);
        double reach = static_cast<double>(test::exact_reach(mc, bad));
        double u = std::uniform_real_distribution<double>(0.2, 0.9)(rng);
        double short_mass = test::short_path_mass(mc, bad, 8);
        bool holds = trial % 2 == 0 && reach < 0.95;
        if (!holds && short_mass < 0.05) continue;
        double alpha = holds ? (1 - reach) * u : 1 - short_mass * u;
        std::vector<StateId> perm(mc.num_states());
        std::iota(perm.begin(), perm.end(), 0);
        std::shuffle(perm.begin(), perm.end(), rng);
        MarkovChain renamed;
        renamed.rows.resize(mc.num_states());
        std::vector<char> renamed_bad(mc.num_states());
        for (StateId s = 0; s < mc.num_states(); ++s) {
            Distribution row;
            for (auto const& e : mc.rows[s]) row.push_back({perm[e.state], e.probability});
            std::sort(row.begin(), row.end(), [](auto const& x, auto const& y) { return x.state < y.state; });
            renamed.rows[perm[s]] = row;
            renamed_bad[perm[s]] = bad[s];
        }
        renamed.initial = perm[mc.initial];
        Verdict a = check_threshold(mc, bad, alpha);
        Verdict b = check_threshold(renamed, renamed_bad, alpha);
        ASSERT_EQ(a.index(), b.index());
        if (auto const* h = std::get_if<Holds>(&a)) {
            EXPECT_NEAR(h->safety, std::get<Holds>(b).safety, 1e-9);
        } else {
            auto const& ca = std::get<Counterexample>(a);
            auto const& cb = std::get<Counterexample>(b);
            EXPECT_NEAR(ca.total, cb.total, 1e-9);
            EXPECT_NEAR(ca.probs.front(), cb.probs.front(), 1e-12);
        }
    }
}

TEST(Enumerate, UniqueWitness) {
    MarkovChain mc{{{{1, 0.3}, {2, 0.7}}, {{1, 1.0}}, {{2, 1.0}}}, 0};
    Counterexample cex = enumerate_counterexample(mc, {0, 1, 0}, 0.2);
    ASSERT_EQ(cex.paths.size(), 1u);
    EXPECT_EQ(cex.paths[0], (std::vector<StateId>{0, 1}));
    EXPECT_NEAR(cex.total, 0.3, 1e-15);
}

TEST(Enumerate, GeometricChainTwoPaths) {
    Counterexample cex = enumerate_counterexample(geometric(), {0, 0, 1}, 0.6);
    ASSERT_EQ(cex.paths.size(), 2u);
    EXPECT_NEAR(cex.total, 0.75, 1e-15);
    EXPECT_EQ(cex.paths[0], (std::vector<StateId>{0, 2}));
    EXPECT_EQ(cex.paths[1], (std::vector<StateId>{0, 1, 2}));
}

TEST(Enumerate, InfeasibleMassThrows) {
    MarkovChain mc{{{{1, 0.3}, {2, 0.7}}, {{1, 1.0}}, {{2, 1.0}}}, 0};
    EXPECT_THROW(enumerate_counterexample(mc, {0, 1, 0}, 0.3), CounterexampleError);
}

TEST(Enumerate, ContractAndCylinderMeasureOnRandomChains) {
    std::mt19937_64 rng(31);
    int compared = 0;
    for (int trial = 0; trial < 150; ++trial) {
        auto [mc, bad] = test::random_chain(rng, 3 + trial % 6, 0.5);
        double reach = test::short_path_mass(mc, bad, 8);
        if (reach < 0.05) continue;
        double mass = reach * std::uniform_real_distribution<double>(0.1, 0.9)(rng);
        Counterexample cex = enumerate_counterexample(mc, bad, mass);
        check_contract(mc, bad, cex, mass);
        std::size_t longest = 0;
        for (auto const& p : cex.paths) longest = std::max(longest, p.size() - 1);
        if (longest > 12) continue;
        std::map<std::vector<StateId>, double> all;
        std::vector<StateId> path{mc.initial};
        test::first_visit_paths(mc, bad, 12, path, 1.0, all);
        double measure = 0.0;
        for (auto const& p : cex.paths) {
            auto it = all.find(p);
            ASSERT_NE(it, all.end());
            measure += it->second;
        }
        EXPECT_NEAR(measure, cex.total, 1e-12);
        ++compared;
    }
    EXPECT_GT(compared, 50);
}

TEST(Format, OneLinePerPath) {
    Counterexample cex = enumerate_counterexample(geometric(), {0, 0, 1}, 0.6);
    std::string text = format_counterexample(
        geometric(), cex, [](StateId s) { return "s" + std::to_string(s); }, [](StateId) { return "o"; });
    EXPECT_EQ(std::count(text.begin(), text.end(), '\n'), 2);
    EXPECT_NE(text.find("s0"), std::string::npos);
}
