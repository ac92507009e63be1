#include "cplus/model.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <map>
#include <set>
#include <sstream>

namespace cplus {

ObservationSet::ObservationSet(std::size_t alphabet_size, std::initializer_list<ObsId> members)
    : members_(alphabet_size, false) {
    for (ObsId z : members) insert(z);
}

void ObservationSet::insert(ObsId z) {
    if (z >= members_.size()) members_.resize(z + 1, false);
    members_[z] = true;
}

std::size_t ObservationSet::count() const {
    return static_cast<std::size_t>(std::count(members_.begin(), members_.end(), true));
}

std::vector<ObsId> ObservationSet::members() const {
    std::vector<ObsId> out;
    for (ObsId z = 0; z < members_.size(); ++z)
        if (members_[z]) out.push_back(z);
    return out;
}

std::vector<ActionId> Pomdp::enabled_actions(StateId s) const {
    std::vector<ActionId> out;
    for (ActionId a = 0; a < num_actions(); ++a)
        if (enabled(s, a)) out.push_back(a);
    return out;
}

namespace {

template <typename Names>
std::optional<std::uint32_t> find_name(Names const& names, std::string_view name) {
    auto it = std::find(names.begin(), names.end(), name);
    if (it == names.end()) return std::nullopt;
    return static_cast<std::uint32_t>(it - names.begin());
}

Distribution normalize_entries(Distribution d) {
    std::sort(d.begin(), d.end(), [](auto const& l, auto const& r) { return l.state < r.state; });
    Distribution merged;
    for (auto const& e : d) {
        if (e.probability <= 0.0) continue;
        if (!merged.empty() && merged.back().state == e.state)
            merged.back().probability += e.probability;
        else
            merged.push_back(e);
    }
    return merged;
}

}  // namespace

std::optional<StateId> Pomdp::find_state(std::string_view name) const { return find_name(state_names_, name); }
std::optional<ActionId> Pomdp::find_action(std::string_view name) const { return find_name(action_names_, name); }
std::optional<ObsId> Pomdp::find_observation(std::string_view name) const {
    return find_name(observation_names_, name);
}

ObsId PomdpBuilder::add_observation(std::string name) {
    model_.observation_names_.push_back(std::move(name));
    return static_cast<ObsId>(model_.observation_names_.size() - 1);
}

ActionId PomdpBuilder::add_action(std::string name) {
    model_.action_names_.push_back(std::move(name));
    for (auto& row : model_.transitions_) row.emplace_back();
    return static_cast<ActionId>(model_.action_names_.size() - 1);
}

StateId PomdpBuilder::add_state(std::string name, ObsId observation) {
    model_.state_names_.push_back(std::move(name));
    model_.observation_of_.push_back(observation);
    model_.transitions_.emplace_back(model_.action_names_.size());
    return static_cast<StateId>(model_.state_names_.size() - 1);
}

void PomdpBuilder::set_transition(StateId s, ActionId a, Distribution distribution) {
    model_.transitions_.at(s).at(a) = normalize_entries(std::move(distribution));
}

void PomdpBuilder::clear_transition(StateId s, ActionId a) { model_.transitions_.at(s).at(a).reset(); }

Pomdp PomdpBuilder::build() && {
    Pomdp& m = model_;
    if (m.state_names_.empty()) throw ModelError("model has no states");
    if (m.action_names_.empty()) throw ModelError("model has no actions");
    if (!initial_) throw ModelError("initial state not set");
    if (*initial_ >= m.num_states()) throw ModelError("initial state out of range");
    m.initial_ = *initial_;
    m.states_by_observation_.assign(m.num_observations(), {});
    for (StateId s = 0; s < m.num_states(); ++s) {
        if (m.observation_of_[s] >= m.num_observations())
            throw ModelError("state '" + m.state_names_[s] + "' has an unknown observation");
        m.states_by_observation_[m.observation_of_[s]].push_back(s);
        bool any = false;
        for (ActionId a = 0; a < m.num_actions(); ++a) {
            auto& row = m.transitions_[s][a];
            if (!row) continue;
            any = true;
            double sum = 0.0;
            for (auto const& e : *row) {
                if (e.state >= m.num_states())
                    throw ModelError("transition from '" + m.state_names_[s] + "' targets an unknown state");
                sum += e.probability;
            }
            if (std::abs(sum - 1.0) > kParseSumTolerance)
                throw ModelError("distribution sum of (" + m.state_names_[s] + ", " + m.action_names_[a] +
                                 ") is " + std::to_string(sum));
            if (std::abs(sum - 1.0) > kStochasticTolerance)
                for (auto& e : *row) e.probability /= sum;
        }
        if (!any) throw ModelError("state '" + m.state_names_[s] + "' has no enabled action");
    }
    return std::move(model_);
}

PomdpBuilder to_builder(Pomdp const& m) {
    PomdpBuilder b;
    for (ObsId z = 0; z < m.num_observations(); ++z) b.add_observation(m.observation_name(z));
    for (ActionId a = 0; a < m.num_actions(); ++a) b.add_action(m.action_name(a));
    for (StateId s = 0; s < m.num_states(); ++s) b.add_state(m.state_name(s), m.observation(s));
    for (StateId s = 0; s < m.num_states(); ++s)
        for (ActionId a = 0; a < m.num_actions(); ++a)
            if (m.enabled(s, a)) b.set_transition(s, a, m.distribution(s, a));
    b.set_initial(m.initial_state());
    return b;
}

Pomdp make_bad_absorbing(Pomdp const& m, ObservationSet const& bad) {
    PomdpBuilder b = to_builder(m);
    for (StateId s = 0; s < m.num_states(); ++s) {
        if (!bad.contains(m.observation(s))) continue;
        for (ActionId a = 0; a < m.num_actions(); ++a) b.set_transition(s, a, {{s, 1.0}});
    }
    return std::move(b).build();
}

History::History(std::vector<ObsId> obs, std::vector<ActionId> acts)
    : observations(std::move(obs)), actions(std::move(acts)) {
    if (observations.empty() || actions.size() + 1 != observations.size())
        throw PreconditionError("history must alternate observations and actions and end with an observation");
}

History History::extended(ActionId a, ObsId z) const {
    History h = *this;
    h.actions.push_back(a);
    h.observations.push_back(z);
    return h;
}

History History::prefix(std::size_t steps) const {
    History h;
    h.observations.assign(observations.begin(), observations.begin() + static_cast<std::ptrdiff_t>(steps + 1));
    h.actions.assign(actions.begin(), actions.begin() + static_cast<std::ptrdiff_t>(steps));
    return h;
}

std::string format_history(Pomdp const& m, History const& h) {
    std::string out;
    for (std::size_t i = 0; i < h.observations.size(); ++i) {
        if (i > 0) out += ' ' + m.action_name(h.actions[i - 1]) + ' ';
        out += m.observation_name(h.observations[i]);
    }
    return out;
}

namespace {

std::vector<std::string> split_ws(std::string_view text) {
    std::vector<std::string> out;
    std::istringstream in{std::string(text)};
    std::string tok;
    while (in >> tok) out.push_back(tok);
    return out;
}

}  // namespace

History parse_history(Pomdp const& m, std::string_view text) {
    auto tokens = split_ws(text);
    if (tokens.empty() || tokens.size() % 2 == 0) throw ModelError("history must alternate observations and actions");
    History h;
    for (std::size_t i = 0; i < tokens.size(); ++i) {
        if (i % 2 == 0) {
            auto z = m.find_observation(tokens[i]);
            if (!z) throw ModelError("unknown observation '" + tokens[i] + "'");
            h.observations.push_back(*z);
        } else {
            auto a = m.find_action(tokens[i]);
            if (!a) throw ModelError("unknown action '" + tokens[i] + "'");
            h.actions.push_back(*a);
        }
    }
    return h;
}

Belief::Belief(std::vector<std::pair<StateId, double>> entries) {
    std::sort(entries.begin(), entries.end());
    for (auto const& [s, p] : entries) {
        if (p <= 0.0) continue;
        if (!entries_.empty() && entries_.back().first == s)
            entries_.back().second += p;
        else
            entries_.emplace_back(s, p);
    }
    double sum = total();
    if (!(sum > 0.0)) throw InconsistentObservation("belief has zero mass");
    for (auto& e : entries_) e.second /= sum;
}

double Belief::operator[](StateId s) const {
    auto it = std::lower_bound(entries_.begin(), entries_.end(), std::pair<StateId, double>{s, -1.0});
    return (it != entries_.end() && it->first == s) ? it->second : 0.0;
}

double Belief::total() const {
    double sum = 0.0;
    for (auto const& e : entries_) sum += e.second;
    return sum;
}

namespace {

std::vector<std::pair<StateId, double>> propagate(Pomdp const& m, std::vector<std::pair<StateId, double>> const& from,
                                                  ActionId a, ObsId z, bool require_enabled) {
    std::map<StateId, double> next;
    for (auto const& [s, p] : from) {
        if (!m.enabled(s, a)) {
            if (require_enabled)
                throw PreconditionError("action '" + m.action_name(a) + "' is disabled in support state '" +
                                        m.state_name(s) + "'");
            continue;
        }
        for (auto const& e : m.distribution(s, a))
            if (m.observation(e.state) == z) next[e.state] += p * e.probability;
    }
    return {next.begin(), next.end()};
}

}  // namespace

Belief belief_update(Pomdp const& m, Belief const& b, ActionId a, ObsId z) {
    auto next = propagate(m, b.entries(), a, z, true);
    if (next.empty())
        throw InconsistentObservation("observation '" + m.observation_name(z) + "' is impossible after action '" +
                                      m.action_name(a) + "'");
    return Belief(std::move(next));
}

Belief belief_from_history(Pomdp const& m, History const& h) {
    if (h.observations.empty() || m.observation(m.initial_state()) != h.observations.front())
        throw InconsistentObservation("history does not start with the initial observation");
    std::vector<std::pair<StateId, double>> current{{m.initial_state(), 1.0}};
    for (std::size_t i = 0; i < h.actions.size(); ++i) {
        current = propagate(m, current, h.actions[i], h.observations[i + 1], false);
        if (current.empty()) throw InconsistentObservation("history is not realizable");
        double sum = 0.0;
        for (auto const& e : current) sum += e.second;
        for (auto& e : current) e.second /= sum;
    }
    return Belief(std::move(current));
}

std::vector<StateId> consistent_states(Pomdp const& m, History const& h) {
    if (h.observations.empty() || h.actions.size() + 1 != h.observations.size()) return {};
    if (m.observation(m.initial_state()) != h.observations.front()) return {};
    std::vector<StateId> current{m.initial_state()};
    std::vector<char> mark(m.num_states(), 0);
    for (std::size_t i = 0; i < h.actions.size(); ++i) {
        ActionId a = h.actions[i];
        ObsId z = h.observations[i + 1];
        if (a >= m.num_actions() || z >= m.num_observations()) return {};
        std::vector<StateId> next;
        for (StateId s : current) {
            if (!m.enabled(s, a)) continue;
            for (auto const& e : m.distribution(s, a))
                if (m.observation(e.state) == z && !mark[e.state]) {
                    mark[e.state] = 1;
                    next.push_back(e.state);
                }
        }
        for (StateId s : next) mark[s] = 0;
        if (next.empty()) return {};
        std::sort(next.begin(), next.end());
        current = std::move(next);
    }
    return current;
}

bool validate_history(Pomdp const& m, History const& h) { return !consistent_states(m, h).empty(); }

double path_probability(MarkovChain const& mc, std::vector<StateId> const& path) {
    double p = 1.0;
    for (std::size_t i = 0; i + 1 < path.size(); ++i) {
        double step = 0.0;
        for (auto const& e : mc.rows.at(path[i]))
            if (e.state == path[i + 1]) step = e.probability;
        p *= step;
    }
    return p;
}

void ObjectiveSpec::validate() const {
    if (!(alpha >= 0.0 && alpha < 1.0)) throw PreconditionError("alpha must lie in [0,1)");
    if (kind == ObjectiveKind::BoundedReachAvoid && (!horizon || !good))
        throw PreconditionError("bounded reach-avoid needs a horizon and good observations");
}

// ---------------------------------------------------------------------------
// Text format

namespace {

struct Line {
    std::size_t number;
    std::vector<std::string> tokens;
};

double parse_probability(std::string const& tok, std::size_t line) {
    double value = 0.0;
    auto [ptr, ec] = std::from_chars(tok.data(), tok.data() + tok.size(), value);
    if (ec != std::errc() || ptr != tok.data() + tok.size() || !(value >= 0.0) || value > 1.0)
        throw ModelError("invalid probability '" + tok + "'", line);
    return value;
}

const std::set<std::string> kSections{"states", "actions", "observations", "obsfun", "init",
                                      "transitions", "bad", "good", "horizon"};

}  // namespace

LoadedModel parse_model(std::string_view text) {
    std::map<std::string, std::vector<Line>> sections;
    std::map<std::string, std::size_t> header_line;
    std::string current;
    std::istringstream in{std::string(text)};
    std::string raw;
    std::size_t number = 0;
    while (std::getline(in, raw)) {
        ++number;
        if (auto hash = raw.find('#'); hash != std::string::npos) raw.erase(hash);
        auto tokens = split_ws(raw);
        if (tokens.empty()) continue;
        std::string const& head = tokens.front();
        auto colon = head.find(':');
        if (colon != std::string::npos) {
            std::string name = head.substr(0, colon);
            if (!kSections.count(name)) throw ModelError("malformed section '" + name + "'", number);
            if (header_line.count(name)) throw ModelError("duplicate section '" + name + "'", number);
            header_line[name] = number;
            current = name;
            sections[name];
            std::vector<std::string> rest;
            if (colon + 1 < head.size()) rest.push_back(head.substr(colon + 1));
            rest.insert(rest.end(), tokens.begin() + 1, tokens.end());
            if (!rest.empty()) sections[name].push_back({number, std::move(rest)});
            continue;
        }
        if (current.empty()) throw ModelError("content outside of any section", number);
        sections[current].push_back({number, std::move(tokens)});
    }

    for (char const* required : {"states", "actions", "observations", "obsfun", "init", "transitions", "bad"})
        if (!sections.count(required)) throw ModelError(std::string("missing section '") + required + ":'");

    auto flat = [&](std::string const& name) {
        std::vector<std::pair<std::string, std::size_t>> out;
        for (auto const& line : sections[name])
            for (auto const& t : line.tokens) out.emplace_back(t, line.number);
        return out;
    };

    PomdpBuilder builder;
    std::map<std::string, ObsId> obs_ids;
    std::map<std::string, ActionId> action_ids;
    std::map<std::string, StateId> state_ids;
    for (auto const& [name, line] : flat("observations")) {
        if (obs_ids.count(name)) throw ModelError("duplicate observation '" + name + "'", line);
        obs_ids[name] = builder.add_observation(name);
    }
    for (auto const& [name, line] : flat("actions")) {
        if (action_ids.count(name)) throw ModelError("duplicate action '" + name + "'", line);
        action_ids[name] = builder.add_action(name);
    }
    auto state_decls = flat("states");
    std::map<std::string, ObsId> obsfun;
    for (auto const& line : sections["obsfun"]) {
        if (line.tokens.size() != 2) throw ModelError("obsfun lines are 'state observation'", line.number);
        auto z = obs_ids.find(line.tokens[1]);
        if (z == obs_ids.end()) throw ModelError("unknown identifier '" + line.tokens[1] + "'", line.number);
        if (!obsfun.emplace(line.tokens[0], z->second).second)
            throw ModelError("observation of '" + line.tokens[0] + "' given twice", line.number);
    }
    for (auto const& [name, line] : state_decls) {
        if (state_ids.count(name)) throw ModelError("duplicate state '" + name + "'", line);
        auto z = obsfun.find(name);
        if (z == obsfun.end()) throw ModelError("state '" + name + "' has no observation", line);
        state_ids[name] = builder.add_state(name, z->second);
    }
    for (auto const& line : sections["obsfun"])
        if (!state_ids.count(line.tokens[0]))
            throw ModelError("unknown identifier '" + line.tokens[0] + "'", line.number);

    auto lookup_state = [&](std::string const& name, std::size_t line) {
        auto it = state_ids.find(name);
        if (it == state_ids.end()) throw ModelError("unknown identifier '" + name + "'", line);
        return it->second;
    };

    auto init = flat("init");
    if (init.size() != 1) throw ModelError("init takes exactly one state", header_line["init"]);
    StateId initial = lookup_state(init[0].first, init[0].second);
    builder.set_initial(initial);

    std::map<std::pair<StateId, ActionId>, std::pair<Distribution, std::size_t>> rows;
    std::set<std::tuple<StateId, ActionId, StateId>> seen;
    for (auto const& line : sections["transitions"]) {
        if (line.tokens.size() != 4)
            throw ModelError("transition lines are 'state action successor probability'", line.number);
        StateId s = lookup_state(line.tokens[0], line.number);
        auto a = action_ids.find(line.tokens[1]);
        if (a == action_ids.end()) throw ModelError("unknown identifier '" + line.tokens[1] + "'", line.number);
        StateId t = lookup_state(line.tokens[2], line.number);
        double p = parse_probability(line.tokens[3], line.number);
        if (!seen.emplace(s, a->second, t).second) throw ModelError("duplicate transition", line.number);
        auto& row = rows[{s, a->second}];
        if (row.first.empty()) row.second = line.number;
        row.first.push_back({t, p});
    }
    auto line_name = [&](std::pair<StateId, ActionId> const& key) {
        std::string out;
        for (auto const& [name, id] : state_ids)
            if (id == key.first) out = name;
        for (auto const& [name, id] : action_ids)
            if (id == key.second) out += ", " + name;
        return out;
    };
    for (auto& [key, row] : rows) {
        double sum = 0.0;
        for (auto const& e : row.first) sum += e.probability;
        if (std::abs(sum - 1.0) > kParseSumTolerance)
            throw ModelError("distribution sum of (" + line_name(key) + ") is " + std::to_string(sum), row.second);
        builder.set_transition(key.first, key.second, row.first);
    }

    ObjectiveSpec objective;
    auto read_obs_set = [&](std::string const& name) {
        ObservationSet set(builder.num_observations());
        for (auto const& [tok, line] : flat(name)) {
            auto z = obs_ids.find(tok);
            if (z == obs_ids.end()) throw ModelError("unknown identifier '" + tok + "'", line);
            set.insert(z->second);
        }
        return set;
    };
    objective.bad = read_obs_set("bad");
    if (sections.count("good")) objective.good = read_obs_set("good");
    if (sections.count("horizon")) {
        auto h = flat("horizon");
        std::size_t value = 0;
        if (h.size() != 1) throw ModelError("horizon takes one integer", header_line["horizon"]);
        auto [ptr, ec] = std::from_chars(h[0].first.data(), h[0].first.data() + h[0].first.size(), value);
        if (ec != std::errc() || ptr != h[0].first.data() + h[0].first.size())
            throw ModelError("invalid horizon '" + h[0].first + "'", h[0].second);
        objective.horizon = value;
        if (objective.good) objective.kind = ObjectiveKind::BoundedReachAvoid;
    }

    // Bad states are sinks; this has to happen before validation so that a
    // bad state listed without transitions still loads.
    for (auto const& [name, s] : state_ids) {
        if (!objective.bad.contains(obsfun[name])) continue;
        for (ActionId a = 0; a < builder.num_actions(); ++a) builder.set_transition(s, a, {{s, 1.0}});
    }
    if (objective.bad.contains(obsfun[init[0].first]))
        throw ModelError("initial state carries a bad observation", init[0].second);

    return LoadedModel{std::move(builder).build(), std::move(objective)};
}

LoadedModel load_model_file(std::string const& path) {
    std::ifstream in(path);
    if (!in) throw ModelError("cannot open model file '" + path + "'");
    std::stringstream buffer;
    buffer << in.rdbuf();
    return parse_model(buffer.str());
}

std::string serialize_model(Pomdp const& m, ObjectiveSpec const& objective) {
    std::ostringstream out;
    auto list = [&](char const* header, std::size_t n, auto name) {
        out << header;
        for (std::size_t i = 0; i < n; ++i) out << ' ' << name(i);
        out << '\n';
    };
    list("states:", m.num_states(), [&](std::size_t i) { return m.state_name(static_cast<StateId>(i)); });
    list("actions:", m.num_actions(), [&](std::size_t i) { return m.action_name(static_cast<ActionId>(i)); });
    list("observations:", m.num_observations(),
         [&](std::size_t i) { return m.observation_name(static_cast<ObsId>(i)); });
    out << "obsfun:\n";
    for (StateId s = 0; s < m.num_states(); ++s)
        out << m.state_name(s) << ' ' << m.observation_name(m.observation(s)) << '\n';
    out << "init: " << m.state_name(m.initial_state()) << '\n';
    out << "transitions:\n";
    char buf[32];
    for (StateId s = 0; s < m.num_states(); ++s)
        for (ActionId a = 0; a < m.num_actions(); ++a) {
            if (!m.enabled(s, a)) continue;
            for (auto const& e : m.distribution(s, a)) {
                std::snprintf(buf, sizeof buf, "%.17g", e.probability);
                out << m.state_name(s) << ' ' << m.action_name(a) << ' ' << m.state_name(e.state) << ' ' << buf
                    << '\n';
            }
        }
    auto obs_list = [&](char const* header, ObservationSet const& set) {
        out << header;
        for (ObsId z : set.members()) out << ' ' << m.observation_name(z);
        out << '\n';
    };
    obs_list("bad:", objective.bad);
    if (objective.good) obs_list("good:", *objective.good);
    if (objective.horizon) out << "horizon: " << *objective.horizon << '\n';
    return out.str();
}

}  // namespace cplus
