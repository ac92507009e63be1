#include "cplus/learner.hpp"

#include <algorithm>
#include <sstream>

namespace cplus {

namespace {

bool shorter_then_lex(Word const& a, Word const& b) {
    if (a.size() != b.size()) return a.size() < b.size();
    return a < b;
}

Word concat(Word a, Word const& b) {
    a.insert(a.end(), b.begin(), b.end());
    return a;
}

std::string cells_text(Pomdp const& m, std::vector<Cell> const& cells) {
    std::string out;
    for (auto const& c : cells) {
        if (!out.empty()) out += ' ';
        out += c ? m.action_name(*c) : "x";
    }
    return out;
}

std::string word_text(Pomdp const& m, Word const& w) {
    if (w.empty()) return "eps";
    std::string out;
    for (ObsId z : w) {
        if (!out.empty()) out += ' ';
        out += m.observation_name(z);
    }
    return out;
}

}  // namespace

bool ObservationTable::in_prefixes(Word const& w) const {
    return std::find(prefixes_.begin(), prefixes_.end(), w) != prefixes_.end();
}

std::vector<Cell> const& ObservationTable::entry(Word const& row, std::size_t column) const {
    return rows_.at(row).cells.at(column);
}

std::vector<Cell> ObservationTable::row_vector(Word const& row) const {
    std::vector<Cell> out;
    for (auto const& cells : rows_.at(row).cells) out.insert(out.end(), cells.begin(), cells.end());
    return out;
}

bool ObservationTable::all_dont_care(Word const& row) const {
    for (auto const& cells : rows_.at(row).cells)
        for (auto const& c : cells)
            if (c) return false;
    return true;
}

bool ObservationTable::rows_equal(Word const& a, Word const& b) const {
    return rows_.at(a).cells == rows_.at(b).cells;
}

std::vector<Word> ObservationTable::extensions(std::size_t alphabet) const {
    std::vector<Word> out;
    for (auto const& s : prefixes_)
        for (ObsId z = 0; z < alphabet; ++z) {
            Word w = s;
            w.push_back(z);
            if (!in_prefixes(w)) out.push_back(std::move(w));
        }
    std::sort(out.begin(), out.end(), shorter_then_lex);
    out.erase(std::unique(out.begin(), out.end()), out.end());
    return out;
}

std::vector<Cell> fill_entry(ObservationTable const& t, Word const& row, Word const& column, QueryContext& ctx) {
    std::vector<Cell> out(column.size());
    auto const& prefix = t.rows_.at(row).prefix;
    if (!prefix) return out;
    Word obs = prefix->first;
    std::vector<ActionId> acts = prefix->second;
    for (std::size_t i = 0; i < column.size(); ++i) {
        obs.push_back(column[i]);
        Cell c = ctx.ask(History(obs, acts));
        if (!c) break;
        out[i] = c;
        acts.push_back(*c);
    }
    return out;
}

void ObservationTable::ensure_row(Word const& w, QueryContext& ctx) {
    if (rows_.count(w)) return;
    Row row;
    if (w.empty()) {
        row.prefix.emplace();
    } else {
        Word parent(w.begin(), w.end() - 1);
        ensure_row(parent, ctx);
        auto const& pp = rows_.at(parent).prefix;
        if (pp) {
            Word obs = pp->first;
            std::vector<ActionId> acts = pp->second;
            obs.push_back(w.back());
            if (Cell c = ctx.ask(History(obs, acts))) {
                acts.push_back(*c);
                row.prefix.emplace(std::move(obs), std::move(acts));
            }
        }
    }
    rows_.emplace(w, std::move(row));
    fill_row(w, ctx);
}

void ObservationTable::fill_row(Word const& w, QueryContext& ctx) {
    auto& cells = rows_.at(w).cells;
    while (cells.size() < suffixes_.size()) {
        std::size_t column = cells.size();
        cells.push_back(fill_entry(*this, w, suffixes_[column], ctx));
    }
}

ObservationTable init_table(QueryContext& ctx) {
    ObservationTable t;
    std::size_t const alphabet = ctx.model.num_observations();
    for (ObsId z = 0; z < alphabet; ++z) t.suffixes_.push_back({z});
    t.prefixes_.push_back({});
    t.ensure_row({}, ctx);
    for (ObsId z = 0; z < alphabet; ++z) t.ensure_row({z}, ctx);
    return t;
}

void add_suffix(ObservationTable& t, Word const& suffix, QueryContext& ctx) {
    if (std::find(t.suffixes_.begin(), t.suffixes_.end(), suffix) != t.suffixes_.end()) return;
    t.suffixes_.push_back(suffix);
    for (auto& [w, row] : t.rows_) t.fill_row(w, ctx);
}

void close_table(ObservationTable& t, QueryContext& ctx) {
    std::size_t const alphabet = ctx.model.num_observations();
    for (;;) {
        std::optional<Word> novel;
        for (auto const& w : t.extensions(alphabet)) {
            t.ensure_row(w, ctx);
            if (t.all_dont_care(w)) continue;
            bool matched = std::any_of(t.prefixes_.begin(), t.prefixes_.end(),
                                       [&](Word const& s) { return t.rows_equal(s, w); });
            if (!matched) {
                novel = w;
                break;
            }
        }
        if (!novel) return;
        t.prefixes_.push_back(*novel);
        for (ObsId z = 0; z < alphabet; ++z) t.ensure_row(concat(*novel, {z}), ctx);
    }
}

std::string ObservationTable::dump(Pomdp const& m) const {
    std::vector<std::string> header{""};
    for (auto const& e : suffixes_) header.push_back(word_text(m, e));
    std::vector<std::vector<std::string>> lines;
    auto render = [&](Word const& w) {
        std::vector<std::string> line{word_text(m, w)};
        for (auto const& cells : rows_.at(w).cells) line.push_back(cells_text(m, cells));
        return line;
    };
    for (auto const& s : prefixes_) lines.push_back(render(s));
    std::size_t const rule = lines.size();
    for (auto const& w : extensions(m.num_observations()))
        if (rows_.count(w) && !all_dont_care(w)) lines.push_back(render(w));

    std::vector<std::size_t> width(header.size(), 0);
    auto measure = [&](std::vector<std::string> const& line) {
        for (std::size_t i = 0; i < line.size(); ++i) width[i] = std::max(width[i], line[i].size());
    };
    measure(header);
    for (auto const& l : lines) measure(l);
    std::ostringstream out;
    auto emit = [&](std::vector<std::string> const& line) {
        for (std::size_t i = 0; i < line.size(); ++i) {
            out << (i ? " | " : "") << line[i];
            if (i + 1 < line.size()) out << std::string(width[i] - line[i].size(), ' ');
        }
        out << '\n';
    };
    emit(header);
    std::size_t total = 0;
    for (auto w : width) total += w + 3;
    for (std::size_t i = 0; i < lines.size(); ++i) {
        if (i == rule) out << std::string(total, '-') << '\n';
        emit(lines[i]);
    }
    return out.str();
}

Hypothesis build_hypothesis(ObservationTable const& t, Pomdp const& m) {
    auto const& S = t.prefixes();
    std::size_t const alphabet = m.num_observations();
    Hypothesis hyp{Fsc(S.size(), alphabet, 0), S};
    for (NodeId n = 0; n < S.size(); ++n)
        for (ObsId z = 0; z < alphabet; ++z) {
            Word ext = concat(S[n], {z});
            if (!t.has_row(ext) || t.all_dont_care(ext)) {
                hyp.fsc.set(n, z, default_action(m, z), n, false);
                continue;
            }
            auto it = std::find_if(S.begin(), S.end(), [&](Word const& s) { return t.rows_equal(s, ext); });
            if (it == S.end()) throw PreconditionError("table is not closed at row '" + word_text(m, ext) + "'");
            NodeId target = static_cast<NodeId>(it - S.begin());
            Cell c = t.entry(S[n], z).front();
            if (c)
                hyp.fsc.set(n, z, *c, target);
            else
                hyp.fsc.set(n, z, default_action(m, z), target, false);
        }
    return hyp;
}

CounterexampleOutcome process_counterexample(ObservationTable& t, Counterexample const& cex,
                                             ProductChain const& product, Hypothesis const& hyp, QueryContext& ctx) {
    Pomdp const& m = ctx.model;
    for (std::size_t p = 0; p < cex.paths.size(); ++p) {
        auto const& path = cex.paths[p];
        std::size_t real = path.size();
        if (product.crash && path.back() == *product.crash) --real;
        std::size_t const scan = product.crash && path.back() == *product.crash ? real : real - 1;

        Word obs;
        std::vector<ActionId> acts;
        std::optional<std::size_t> split;
        for (std::size_t i = 0; i < scan; ++i) {
            StateId ps = path[i];
            ObsId z = m.observation(product.pomdp_state[ps]);
            ActionId a = hyp.fsc.action(product.node[ps], z);
            obs.push_back(z);
            Cell answer = ctx.ask(History(obs, acts));
            if (answer && *answer != a) {
                split = i;
                break;
            }
            acts.push_back(a);
        }
        if (!split) continue;

        Word const& w = obs;
        std::size_t const len = w.size();
        if (len < 2) continue;
        ActionId const hyp_out = hyp.fsc.action(product.node[path[*split]], w.back());
        auto oracle_side = [&](std::size_t j) {
            Word head(w.begin(), w.begin() + static_cast<std::ptrdiff_t>(j));
            Word const& access = hyp.access[hyp.fsc.run(head)];
            Word tail(w.begin() + static_cast<std::ptrdiff_t>(j), w.end());
            Cell beta = fill_entry(t, access, tail, ctx).back();
            return beta && *beta != hyp_out;
        };
        std::size_t lo = 0, hi = len - 1;
        while (hi - lo > 1) {
            std::size_t mid = lo + (hi - lo) / 2;
            if (oracle_side(mid))
                lo = mid;
            else
                hi = mid;
        }
        Word suffix(w.begin() + static_cast<std::ptrdiff_t>(hi), w.end());
        if (std::find(t.suffixes().begin(), t.suffixes().end(), suffix) != t.suffixes().end()) continue;
        add_suffix(t, suffix, ctx);
        return {true, suffix, p, *split};
    }
    return {};
}

}  // namespace cplus
