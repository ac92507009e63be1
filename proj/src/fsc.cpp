#include "cplus/fsc.hpp"

#include <algorithm>
#include <deque>
#include <fstream>
#include <map>
#include <regex>
#include <sstream>

namespace cplus {

Fsc::Fsc(std::size_t num_nodes, std::size_t num_observations, NodeId initial)
    : num_nodes_(num_nodes),
      num_observations_(num_observations),
      initial_(initial),
      action_(num_nodes * num_observations, 0),
      next_(num_nodes * num_observations, 0),
      specified_(num_nodes * num_observations, 0) {
    for (NodeId n = 0; n < num_nodes; ++n)
        for (ObsId z = 0; z < num_observations; ++z) next_[index(n, z)] = n;
}

void Fsc::set(NodeId n, ObsId z, ActionId a, NodeId successor, bool is_specified) {
    if (n >= num_nodes_ || z >= num_observations_ || successor >= num_nodes_)
        throw PreconditionError("controller cell out of range");
    action_[index(n, z)] = a;
    next_[index(n, z)] = successor;
    specified_[index(n, z)] = is_specified ? 1 : 0;
}

Fsc Fsc::with_extra_observations(std::size_t extra, ActionId action) const {
    Fsc out(num_nodes_, num_observations_ + extra, initial_);
    for (NodeId n = 0; n < num_nodes_; ++n) {
        for (ObsId z = 0; z < num_observations_; ++z) out.set(n, z, this->action(n, z), next(n, z), specified(n, z));
        for (ObsId z = static_cast<ObsId>(num_observations_); z < out.num_observations_; ++z)
            out.set(n, z, action, n, false);
    }
    return out;
}

NodeId Fsc::run(std::vector<ObsId> const& observations) const {
    NodeId n = initial_;
    for (ObsId z : observations) n = next(n, z);
    return n;
}

ActionId default_action(Pomdp const& m, ObsId z) {
    auto const& states = m.states_with(z);
    for (ActionId a = 0; a < m.num_actions(); ++a)
        if (!states.empty() && std::all_of(states.begin(), states.end(), [&](StateId s) { return m.enabled(s, a); }))
            return a;
    for (ActionId a = 0; a < m.num_actions(); ++a)
        if (std::any_of(states.begin(), states.end(), [&](StateId s) { return m.enabled(s, a); })) return a;
    return 0;
}

Fsc fill_unspecified(Pomdp const& m, Fsc f) {
    for (NodeId n = 0; n < f.num_nodes(); ++n)
        for (ObsId z = 0; z < f.num_observations(); ++z)
            if (!f.specified(n, z)) f.set(n, z, default_action(m, z), f.next(n, z), false);
    return f;
}

ProductChain build_product(Pomdp const& m, Fsc const& f, DisabledMode mode) {
    if (f.num_observations() != m.num_observations())
        throw PreconditionError("controller alphabet size " + std::to_string(f.num_observations()) +
                                " does not match the model's " + std::to_string(m.num_observations()));
    ProductChain out;
    std::map<std::pair<StateId, NodeId>, StateId> index;
    std::deque<std::pair<StateId, NodeId>> work;
    auto intern = [&](StateId s, NodeId n) {
        auto [it, inserted] = index.emplace(std::make_pair(s, n), static_cast<StateId>(out.pomdp_state.size()));
        if (inserted) {
            out.pomdp_state.push_back(s);
            out.node.push_back(n);
            out.chain.rows.emplace_back();
            work.emplace_back(s, n);
        }
        return it->second;
    };
    out.chain.initial = intern(m.initial_state(), f.initial());
    while (!work.empty()) {
        auto [s, n] = work.front();
        work.pop_front();
        StateId from = index.at({s, n});
        ObsId z = m.observation(s);
        ActionId a = f.action(n, z);
        if (!m.enabled(s, a)) {
            if (mode == DisabledMode::Throw)
                throw DisabledActionError("controller plays disabled action '" + m.action_name(a) + "' at state '" +
                                          m.state_name(s) + "', node n" + std::to_string(n) + ", observation '" +
                                          m.observation_name(z) + "'");
            if (!out.crash) {
                out.crash = static_cast<StateId>(out.pomdp_state.size());
                out.pomdp_state.push_back(s);
                out.node.push_back(n);
                out.chain.rows.push_back({{*out.crash, 1.0}});
            }
            out.chain.rows[from] = {{*out.crash, 1.0}};
            continue;
        }
        NodeId n2 = f.next(n, z);
        Distribution row;
        for (auto const& e : m.distribution(s, a)) row.push_back({intern(e.state, n2), e.probability});
        std::sort(row.begin(), row.end(), [](auto const& l, auto const& r) { return l.state < r.state; });
        out.chain.rows[from] = std::move(row);
    }
    return out;
}

std::vector<char> bad_mask(ProductChain const& product, Pomdp const& m, ObservationSet const& bad) {
    std::vector<char> mask(product.pomdp_state.size(), 0);
    for (std::size_t i = 0; i < mask.size(); ++i) mask[i] = bad.contains(m.observation(product.pomdp_state[i])) ? 1 : 0;
    if (product.crash) mask[*product.crash] = 1;
    return mask;
}

std::string product_state_name(ProductChain const& product, Pomdp const& m, StateId ps) {
    if (product.crash && ps == *product.crash) return "crash";
    return m.state_name(product.pomdp_state[ps]) + "/n" + std::to_string(product.node[ps]);
}

FscRun run_fsc(Pomdp const& m, Fsc const& f, ObservationSet const& bad, std::size_t steps, std::mt19937_64& rng) {
    std::uniform_real_distribution<double> unit(0.0, 1.0);
    FscRun run;
    StateId s = m.initial_state();
    NodeId n = f.initial();
    run.path.push_back(s);
    run.nodes.push_back(n);
    run.bad_hit = bad.contains(m.observation(s));
    for (std::size_t t = 0; t < steps && !run.bad_hit; ++t) {
        ObsId z = m.observation(s);
        ActionId a = f.action(n, z);
        if (!m.enabled(s, a))
            throw DisabledActionError("controller plays disabled action '" + m.action_name(a) + "' at state '" +
                                      m.state_name(s) + "'");
        auto const& row = m.distribution(s, a);
        double u = unit(rng);
        StateId next = row.back().state;
        for (auto const& e : row) {
            if (u < e.probability) {
                next = e.state;
                break;
            }
            u -= e.probability;
        }
        n = f.next(n, z);
        s = next;
        run.path.push_back(s);
        run.nodes.push_back(n);
        run.bad_hit = bad.contains(m.observation(s));
    }
    return run;
}

FscRun run_fsc(Pomdp const& m, Fsc const& f, ObservationSet const& bad, std::size_t steps, std::uint64_t seed) {
    std::mt19937_64 rng(seed);
    return run_fsc(m, f, bad, steps, rng);
}

namespace {

struct CellSpec {
    std::string node, obs, action, next;
    bool specified;
    std::size_t line;
};

Fsc assemble(Pomdp const& m, std::vector<std::string> const& node_order, std::vector<CellSpec> const& cells) {
    std::map<std::string, NodeId> ids;
    for (auto const& name : node_order) ids.emplace(name, static_cast<NodeId>(ids.size()));
    Fsc f(ids.size(), m.num_observations(), 0);
    for (NodeId n = 0; n < f.num_nodes(); ++n)
        for (ObsId z = 0; z < f.num_observations(); ++z) f.set(n, z, default_action(m, z), n, false);
    std::map<std::pair<NodeId, ObsId>, std::size_t> seen;
    for (auto const& c : cells) {
        auto z = m.find_observation(c.obs);
        if (!z) throw ModelError("unknown observation '" + c.obs + "'", c.line);
        auto a = m.find_action(c.action);
        if (!a) throw ModelError("unknown action '" + c.action + "'", c.line);
        NodeId n = ids.at(c.node);
        if (!seen.emplace(std::make_pair(n, *z), c.line).second)
            throw ModelError("cell (" + c.node + ", " + c.obs + ") given twice", c.line);
        f.set(n, *z, *a, ids.at(c.next), c.specified);
    }
    return f;
}

}  // namespace

Fsc parse_fsc(Pomdp const& m, std::string_view text) {
    std::istringstream in{std::string(text)};
    std::string raw;
    std::size_t number = 0;
    std::vector<std::string> order;
    std::vector<CellSpec> cells;
    auto note = [&](std::string const& name) {
        if (std::find(order.begin(), order.end(), name) == order.end()) order.push_back(name);
    };
    bool have_init = false;
    while (std::getline(in, raw)) {
        ++number;
        if (auto hash = raw.find('#'); hash != std::string::npos) raw.erase(hash);
        std::istringstream line(raw);
        std::vector<std::string> tok;
        for (std::string t; line >> t;) tok.push_back(t);
        if (tok.empty()) continue;
        if (tok[0] == "init" || tok[0] == "init:") {
            if (tok.size() != 2 || have_init || !order.empty())
                throw ModelError("'init <node>' must come first and only once", number);
            have_init = true;
            note(tok[1]);
            continue;
        }
        if (tok.size() != 5 || tok[2] != "->") throw ModelError("expected 'node obs -> action node'", number);
        note(tok[0]);
        note(tok[4]);
        cells.push_back({tok[0], tok[1], tok[3], tok[4], true, number});
    }
    if (order.empty()) throw ModelError("controller has no nodes");
    return assemble(m, order, cells);
}

Fsc load_fsc_file(Pomdp const& m, std::string const& path) {
    std::ifstream in(path);
    if (!in) throw ModelError("cannot open controller file '" + path + "'");
    std::stringstream buffer;
    buffer << in.rdbuf();
    return parse_fsc(m, buffer.str());
}

std::string serialize_fsc(Pomdp const& m, Fsc const& f) {
    std::ostringstream out;
    out << "init n" << f.initial() << '\n';
    // Declare every node so that nodes without specified cells keep their index.
    std::vector<char> mentioned(f.num_nodes(), 0);
    mentioned[f.initial()] = 1;
    for (NodeId n = 0; n < f.num_nodes(); ++n)
        for (ObsId z = 0; z < f.num_observations(); ++z) {
            if (!f.specified(n, z)) continue;
            out << 'n' << n << ' ' << m.observation_name(z) << " -> " << m.action_name(f.action(n, z)) << " n"
                << f.next(n, z) << '\n';
            mentioned[n] = mentioned[f.next(n, z)] = 1;
        }
    for (NodeId n = 0; n < f.num_nodes(); ++n)
        if (!mentioned[n]) out << "# n" << n << " has no specified cells\n";
    return out.str();
}

std::string export_dot(Pomdp const& m, Fsc const& f) {
    std::ostringstream out;
    out << "digraph fsc {\n  rankdir=LR;\n  __start [shape=point];\n";
    for (NodeId n = 0; n < f.num_nodes(); ++n)
        out << "  n" << n << " [shape=" << (n == f.initial() ? "doublecircle" : "circle") << "];\n";
    out << "  __start -> n" << f.initial() << ";\n";
    for (NodeId n = 0; n < f.num_nodes(); ++n)
        for (ObsId z = 0; z < f.num_observations(); ++z) {
            out << "  n" << n << " -> n" << f.next(n, z) << " [label=\"" << m.observation_name(z) << " / "
                << m.action_name(f.action(n, z)) << '"';
            if (!f.specified(n, z)) out << ", style=dashed";
            out << "];\n";
        }
    out << "}\n";
    return out.str();
}

Fsc parse_dot(Pomdp const& m, std::string_view dot) {
    static const std::regex node_re(R"re(^\s*(n\d+) \[shape=(circle|doublecircle)\];\s*$)re");
    static const std::regex edge_re(R"re(^\s*(n\d+) -> (n\d+) \[label="(\S+) / (\S+)"(, style=dashed)?\];\s*$)re");
    std::istringstream in{std::string(dot)};
    std::string raw;
    std::vector<std::string> order;
    std::string initial;
    std::vector<CellSpec> cells;
    std::size_t number = 0;
    while (std::getline(in, raw)) {
        ++number;
        std::smatch match;
        if (std::regex_match(raw, match, node_re)) {
            order.push_back(match[1]);
            if (match[2] == "doublecircle") initial = match[1];
        } else if (std::regex_match(raw, match, edge_re)) {
            cells.push_back({match[1], match[3], match[4], match[2], !match[5].matched, number});
        }
    }
    if (order.empty() || initial.empty()) throw ModelError("not a controller graph");
    Fsc f = assemble(m, order, cells);
    f.set_initial(static_cast<NodeId>(std::find(order.begin(), order.end(), initial) - order.begin()));
    return f;
}

}  // namespace cplus
