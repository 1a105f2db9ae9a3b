#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <set>
#include <span>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "codkit/likert.hpp"

namespace codkit {

struct PreferenceBallot {
    std::string article_id;
    std::string annotator_id;
    std::set<int> chosen_steps;  // 1-based; more than one means a tie
    std::uint64_t blinding_seed = 0;
    std::string ts;

    bool operator==(const PreferenceBallot&) const = default;
};

nlohmann::json to_json(const PreferenceBallot& ballot);
/// Throws std::invalid_argument when a required field is missing or the
/// chosen set is empty.
PreferenceBallot ballot_from_json(const nlohmann::json& j);

/// Reads ballot JSONL; malformed rows throw RowError.
std::vector<PreferenceBallot> load_ballots(const std::filesystem::path& path);

struct AnnotatorShares {
    std::string annotator_id;
    std::size_t ballots = 0;
    std::vector<double> shares;  // percent per step; ties count fully
};

struct VoteShareTable {
    int n_steps = 0;
    std::vector<AnnotatorShares> annotators;  // sorted by annotator id
    std::vector<double> aggregate;            // percent per step; ties split
    std::size_t total_ballots = 0;
};

/// Per-annotator shares count every named step of a tie ballot in full;
/// the aggregate gives each ballot one vote split evenly over its steps.
/// Throws DegenerateInput on no ballots and std::out_of_range on a step
/// outside 1..n_steps.
VoteShareTable vote_shares(std::span<const PreferenceBallot> ballots, int n_steps);

struct StepSummary {
    int modal = 0;
    int median = 0;
    double expected = 0.0;
};

/// modal = argmax share (lowest step on ties); median = first step whose
/// cumulative share reaches 50; expected = sum s * share(s) / 100.
StepSummary step_summary(std::span<const double> aggregate_shares);

/// Fleiss' kappa over an items x categories count matrix. Counts may be
/// fractional (split tie ballots). Returns 1.0 when all mass sits in one
/// category. Throws DegenerateInput on fewer than 2 items, categories, or
/// raters, or a row that does not sum to raters_per_item.
double fleiss_kappa(const std::vector<std::vector<double>>& counts, double raters_per_item);

struct KappaInput {
    std::vector<std::vector<double>> counts;
    int raters = 0;
    std::vector<std::string> articles;  // row order
};

/// Items are articles, categories are steps. Only articles rated by the
/// largest observed number of annotators are kept so rows share a rater count.
KappaInput kappa_matrix(std::span<const PreferenceBallot> ballots, int n_steps);

/// First-place votes per summary id ("<article>#<step>") under split-tie
/// credit. The overload seeds every (article, step) in `articles` with zero.
std::map<std::string, double> preference_vector(std::span<const PreferenceBallot> ballots);
std::map<std::string, double> preference_vector(std::span<const PreferenceBallot> ballots,
                                                std::span<const std::string> articles, int n_steps);

/// Sample Pearson correlation. Throws DegenerateInput on unequal lengths,
/// fewer than 2 points, or a constant vector.
double pearson(std::span<const double> x, std::span<const double> y);

struct MetaEvalRow {
    Dimension dimension;
    double correlation = 0.0;
    std::size_t n = 0;
};

/// Summary-level Pearson r between first-place counts and Likert scores, per
/// dimension present in `scores`. Items with gaps are skipped.
std::vector<MetaEvalRow> meta_eval(const std::map<std::string, double>& preferences,
                                   std::span<const JudgedItem> scores);

}  // namespace codkit
