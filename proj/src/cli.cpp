#include "cplus/cli.hpp"

#include <CLI11.hpp>
#include <json.hpp>

#include <fstream>
#include <iostream>
#include <memory>

#include "cplus/driver.hpp"

namespace cplus {

namespace {

using nlohmann::json;

void write_file(std::string const& path, std::string const& text) {
    std::ofstream f(path);
    if (!f) throw ModelError("cannot write '" + path + "'");
    f << text;
}

json word_json(Pomdp const& m, Word const& w) {
    json out = json::array();
    for (ObsId z : w) out.push_back(m.observation_name(z));
    return out;
}

struct Options {
    std::string model;
    std::string fsc;
    std::string oracle = "belief-vi";
    std::string cache;
    std::string out;
    std::string dot;
    std::string report = "text";
    double alpha = -1.0;
    double discount = kDefaultDiscount;
    std::size_t budget = 500;
    std::size_t depth = 90;
    std::size_t lookahead = 0;
    std::size_t support_cap = 64;
    long horizon = -1;
    std::uint64_t seed = 0;
    std::size_t max_iters = 100;
    double timeout = 600.0;
    std::size_t steps = 200;
    std::size_t runs = 10000;
};

/// Model file plus command-line overrides of alpha and horizon.
LoadedModel load_with_overrides(Options const& o) {
    LoadedModel lm = load_model_file(o.model);
    if (o.alpha >= 0.0) lm.objective.alpha = o.alpha;
    if (o.horizon >= 0) {
        if (!lm.objective.good) throw ModelError("--horizon needs a model with a 'good' section");
        lm.objective.kind = ObjectiveKind::BoundedReachAvoid;
        lm.objective.horizon = static_cast<std::size_t>(o.horizon);
    }
    lm.objective.validate();
    return lm;
}

int run_synth(Options const& o, std::ostream& out) {
    LoadedModel lm = load_with_overrides(o);
    SafetyInstance inst = make_safety_instance(lm.pomdp, lm.objective);
    std::unique_ptr<RewardPomdp> rm;
    std::unique_ptr<ActionOracle> oracle;
    auto sampler = [&]() {
        rm = std::make_unique<RewardPomdp>(make_reward_pomdp(inst.model, inst.bad, o.discount));
        return std::make_unique<SparseSampler>(*rm, SamplerConfig{o.budget, o.depth, o.seed});
    };
    if (o.oracle == "sampler") {
        oracle = sampler();
    } else if (o.oracle == "belief-vi") {
        oracle = std::make_unique<BeliefViOracle>(inst.model, inst.bad, o.lookahead);
    } else if (o.oracle == "composite") {
        auto s = sampler();
        oracle = std::make_unique<CompositeOracle>(
            inst.model, std::make_unique<BeliefViOracle>(inst.model, inst.bad, o.lookahead), std::move(s),
            o.support_cap);
    } else if (o.oracle.rfind("fsc:", 0) == 0) {
        oracle = std::make_unique<FscOracle>(load_fsc_file(inst.model, o.oracle.substr(4)));
    } else {
        throw CLI::ValidationError("--oracle", "expected sampler, belief-vi, composite or fsc:<file>");
    }

    QueryCache cache;
    if (!o.cache.empty()) cache.load(inst.model, o.cache);
    SynthesisReport r = cplus_synthesize(inst, *oracle, {o.max_iters, o.timeout}, &cache);
    if (!o.cache.empty()) cache.save(inst.model, o.cache);
    if (r.fsc && !o.out.empty()) write_file(o.out, serialize_fsc(inst.model, *r.fsc));
    if (r.fsc && !o.dot.empty()) write_file(o.dot, export_dot(inst.model, *r.fsc));

    if (o.report == "json-lines") {
        for (std::size_t i = 0; i < r.trace.size(); ++i) {
            auto const& t = r.trace[i];
            json line{{"iteration", i + 1}, {"hypothesis_nodes", t.hypothesis.num_nodes()}};
            if (t.safety) line["safety"] = *t.safety;
            if (t.top_path) line["counterexample_top_path"] = *t.top_path;
            if (t.counterexample_paths) {
                line["counterexample_paths"] = t.counterexample_paths;
                line["counterexample_mass"] = t.counterexample_mass;
            }
            if (t.suffix) line["suffix"] = word_json(inst.model, *t.suffix);
            out << line.dump() << '\n';
        }
        json summary{{"outcome", to_string(r.outcome)},
                     {"iterations", r.iterations},
                     {"oracle_queries", r.oracle_queries},
                     {"wall_time", r.wall_time},
                     {"message", r.message}};
        if (r.fsc) summary["fsc_nodes"] = r.fsc->num_nodes();
        if (r.verified_probability) summary["verified_probability"] = *r.verified_probability;
        out << summary.dump() << '\n';
    } else {
        out << "outcome: " << to_string(r.outcome) << " (" << r.message << ")\n"
            << "iterations: " << r.iterations << "\n"
            << "oracle queries: " << r.oracle_queries << "\n";
        if (r.verified_probability) out << "verified probability: " << *r.verified_probability << "\n";
        out << "wall time: " << r.wall_time << " s\n";
        if (r.fsc) out << "controller (" << r.fsc->num_nodes() << " nodes):\n" << serialize_fsc(inst.model, *r.fsc);
    }
    switch (r.outcome) {
        case Outcome::Fsc: return kExitOk;
        case Outcome::Fail: return kExitFail;
        case Outcome::Timeout: return kExitTimeout;
    }
    return kExitFail;
}

int run_check(Options const& o, std::ostream& out) {
    LoadedModel lm = load_with_overrides(o);
    SafetyInstance inst = make_safety_instance(lm.pomdp, lm.objective);
    Fsc f = load_fsc_file(inst.model, o.fsc);
    ProductChain product = build_product(inst.model, f);
    auto bad = bad_mask(product, inst.model, inst.bad);
    Verdict v = check_threshold(product.chain, bad, inst.alpha);
    if (auto const* h = std::get_if<Holds>(&v)) {
        out << "holds: Pr([]!Bad) = " << h->safety << " > " << inst.alpha << "\n";
        return kExitOk;
    }
    auto const& cex = std::get<Counterexample>(v);
    out << "violated: Pr([]!Bad) = " << safety_probability(product.chain, bad) << " <= " << inst.alpha << "\n"
        << "counterexample: " << cex.paths.size() << " paths, mass " << cex.total << "\n"
        << format_counterexample(
               product.chain, cex, [&](StateId s) { return product_state_name(product, inst.model, s); },
               [&](StateId s) { return inst.model.observation_name(inst.model.observation(product.pomdp_state[s])); });
    return kExitFail;
}

int run_simulate(Options const& o, std::ostream& out) {
    LoadedModel lm = load_with_overrides(o);
    SafetyInstance inst = make_safety_instance(lm.pomdp, lm.objective);
    Fsc f = load_fsc_file(inst.model, o.fsc);
    std::mt19937_64 rng(o.seed);
    std::size_t safe = 0;
    for (std::size_t i = 0; i < o.runs; ++i)
        if (!run_fsc(inst.model, f, inst.bad, o.steps, rng).bad_hit) ++safe;
    out << "runs: " << o.runs << "\nsteps: " << o.steps << "\nsurvival: "
        << static_cast<double>(safe) / static_cast<double>(o.runs) << "\n";
    return kExitOk;
}

int run_export(Options const& o, std::ostream& out) {
    LoadedModel lm = load_model_file(o.model);
    Fsc f = load_fsc_file(lm.pomdp, o.fsc);
    std::string dot = export_dot(lm.pomdp, f);
    if (o.out.empty())
        out << dot;
    else
        write_file(o.out, dot);
    return kExitOk;
}

}  // namespace

int cli_main(int argc, char const* const* argv, std::ostream& out, std::ostream& err) {
    CLI::App app{"Finite-state controller synthesis for POMDP threshold safety"};
    app.require_subcommand(1);
    Options o;

    auto model_opts = [&](CLI::App* cmd) {
        cmd->add_option("--model", o.model, "model file")->required();
        cmd->add_option("--alpha", o.alpha, "safety threshold in [0,1)");
        cmd->add_option("--horizon", o.horizon, "unroll a reach-avoid objective to this horizon");
    };

    auto* synth = app.add_subcommand("synth", "learn a controller");
    model_opts(synth);
    synth->add_option("--oracle", o.oracle, "sampler | belief-vi | composite | fsc:<file>");
    synth->add_option("--discount", o.discount, "sampler discount factor");
    synth->add_option("--budget", o.budget, "sampler scenarios");
    synth->add_option("--depth", o.depth, "sampler tree depth");
    synth->add_option("--lookahead", o.lookahead, "belief-vi lookahead (0 = 3|S|)");
    synth->add_option("--support-cap", o.support_cap, "composite: largest belief support for belief-vi");
    synth->add_option("--seed", o.seed);
    synth->add_option("--max-iters", o.max_iters);
    synth->add_option("--timeout", o.timeout, "seconds");
    synth->add_option("--cache", o.cache, "persistent action-query cache");
    synth->add_option("--out", o.out, "write the controller here");
    synth->add_option("--dot", o.dot, "write the controller as GraphViz");
    synth->add_option("--report", o.report)->check(CLI::IsMember({"text", "json-lines"}));

    auto* check = app.add_subcommand("check", "model check a controller");
    model_opts(check);
    check->add_option("--fsc", o.fsc)->required();

    auto* simulate = app.add_subcommand("simulate", "Monte Carlo runs of a controller");
    model_opts(simulate);
    simulate->add_option("--fsc", o.fsc)->required();
    simulate->add_option("--steps", o.steps);
    simulate->add_option("--runs", o.runs);
    simulate->add_option("--seed", o.seed);

    auto* gen = app.add_subcommand("gen", "generate a benchmark model");
    gen->require_subcommand(1);
    std::size_t n = 5;
    double bad_fraction = 0.1, slip = 0.1;
    std::string variant = "removed", mode = "bounded", gen_out;
    auto* grid = gen->add_subcommand("grid", "n x n grid world");
    grid->add_option("--n", n);
    grid->add_option("--bad-fraction", bad_fraction);
    grid->add_option("--slip", slip);
    grid->add_option("--seed", o.seed);
    grid->add_option("--out", gen_out);
    auto* cards = gen->add_subcommand("cards", "card guessing game");
    cards->add_option("--n", n);
    cards->add_option("--variant", variant)->check(CLI::IsMember({"removed", "added"}));
    cards->add_option("--mode", mode)->check(CLI::IsMember({"bounded", "unbounded"}));
    cards->add_option("--out", gen_out);

    auto* dot = app.add_subcommand("export-dot", "render a controller as GraphViz");
    dot->add_option("--model", o.model)->required();
    dot->add_option("--fsc", o.fsc)->required();
    dot->add_option("--out", o.out);

    try {
        app.parse(argc, argv);
    } catch (CLI::ParseError const& e) {
        if (e.get_exit_code() == 0) {
            out << app.help();
            return kExitOk;
        }
        err << e.what() << "\n";
        return kExitUsage;
    }

    try {
        if (synth->parsed()) return run_synth(o, out);
        if (check->parsed()) return run_check(o, out);
        if (simulate->parsed()) return run_simulate(o, out);
        if (dot->parsed()) return run_export(o, out);
        if (gen->parsed()) {
            LoadedModel lm = grid->parsed()
                                 ? gen_grid_world(n, bad_fraction, slip, o.seed)
                                 : gen_cards(n, variant == "added" ? CardsVariant::Added : CardsVariant::Removed,
                                             mode == "unbounded" ? CardsMode::Unbounded : CardsMode::Bounded);
            std::string text = serialize_model(lm.pomdp, lm.objective);
            if (gen_out.empty())
                out << text;
            else
                write_file(gen_out, text);
            return kExitOk;
        }
    } catch (CLI::Error const& e) {
        err << e.what() << "\n";
        return kExitUsage;
    } catch (ModelError const& e) {
        err << "error: " << e.what() << "\n";
        return kExitUsage;
    } catch (std::exception const& e) {
        err << "error: " << e.what() << "\n";
        return kExitUsage;
    }
    return kExitUsage;
}

}  // namespace cplus
