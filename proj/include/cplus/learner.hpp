#pragma once

#include <map>
#include <optional>
#include <string>
#include <vector>

#include "cplus/checker.hpp"
#include "cplus/fsc.hpp"
#include "cplus/model.hpp"
#include "cplus/oracle.hpp"

namespace cplus {

/// Observation sequence; rows and columns of the table are words.
using Word = std::vector<ObsId>;
/// One table position: an action, or nullopt for the don't-care symbol x.
using Cell = std::optional<ActionId>;

/// Everything needed to pose action queries during learning.
struct QueryContext {
    ActionOracle& oracle;
    QueryCache& cache;
    Pomdp const& model;
    ObservationSet bad;
    QueryStats stats{};

    Cell ask(History const& h) { return answer_action_query(oracle, cache, model, bad, h, &stats); }
};

/// L*-style table (S, E, T) with action-sequence entries.
class ObservationTable {
public:
    std::vector<Word> const& prefixes() const { return prefixes_; }
    std::vector<Word> const& suffixes() const { return suffixes_; }
    bool in_prefixes(Word const& w) const;
    bool has_row(Word const& w) const { return rows_.count(w) != 0; }

    /// T(row, suffixes()[column]).
    std::vector<Cell> const& entry(Word const& row, std::size_t column) const;
    /// Concatenation of all entries of a row, in column order.
    std::vector<Cell> row_vector(Word const& row) const;
    bool all_dont_care(Word const& row) const;
    bool rows_equal(Word const& a, Word const& b) const;

    /// S.Z minus S, shortest first and then lexicographic by observation index.
    std::vector<Word> extensions(std::size_t alphabet) const;

    /// Aligned text: S rows, a rule, then S.Z rows. All-x rows are omitted.
    std::string dump(Pomdp const& m) const;

private:
    friend ObservationTable init_table(QueryContext& ctx);
    friend void close_table(ObservationTable& t, QueryContext& ctx);
    friend void add_suffix(ObservationTable& t, Word const& suffix, QueryContext& ctx);
    friend std::vector<Cell> fill_entry(ObservationTable const& t, Word const& row, Word const& column,
                                        QueryContext& ctx);

    struct Row {
        /// Interleaved history of the row word with oracle actions; nullopt once an answer is x.
        std::optional<std::pair<Word, std::vector<ActionId>>> prefix;
        std::vector<std::vector<Cell>> cells;
    };

    void ensure_row(Word const& w, QueryContext& ctx);
    void fill_row(Word const& w, QueryContext& ctx);

    std::vector<Word> prefixes_;
    std::vector<Word> suffixes_;
    std::map<Word, Row> rows_;
};

/// S = {epsilon}, E = Z (in index order), every entry filled by action queries.
ObservationTable init_table(QueryContext& ctx);

/// Answers along the interleaved history of (row, column); x from the first invalid position on.
std::vector<Cell> fill_entry(ObservationTable const& t, Word const& row, Word const& column, QueryContext& ctx);

/// Promotes novel rows of S.Z into S until closed. Rows that are entirely x
/// are compatible with every row and never promoted.
void close_table(ObservationTable& t, QueryContext& ctx);

/// Adds a column and fills it for every row.
void add_suffix(ObservationTable& t, Word const& suffix, QueryContext& ctx);

struct Hypothesis {
    Fsc fsc;
    std::vector<Word> access;  ///< access sequence (a word of S) per node
};

/// One node per row of S. Cells whose entry is x, and transitions into
/// all-x rows, become unspecified self-loops with the default action.
Hypothesis build_hypothesis(ObservationTable const& t, Pomdp const& m);

struct CounterexampleOutcome {
    bool refined = false;     ///< false means CPLUS fails
    Word suffix;              ///< column added to E
    std::size_t path = 0;     ///< index of the disagreeing path
    std::size_t position = 0; ///< first disagreeing position on that path
};

/// Scans counterexample paths in order for a prefix where the hypothesis and
/// the oracle disagree, then locates a distinguishing suffix by Rivest-Schapire
/// binary search and adds it to E.
CounterexampleOutcome process_counterexample(ObservationTable& t, Counterexample const& cex,
                                             ProductChain const& product, Hypothesis const& hyp, QueryContext& ctx);

}  // namespace cplus
