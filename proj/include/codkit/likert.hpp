#pragma once

#include <array>
#include <filesystem>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include <nlohmann/json.hpp>

#include "codkit/codchain.hpp"
#include "codkit/llm.hpp"

namespace codkit {

enum class Dimension { Informative, Quality, Coherence, Attributable, Overall };

inline constexpr std::array<Dimension, 5> kAllDimensions = {
    Dimension::Informative, Dimension::Quality, Dimension::Coherence, Dimension::Attributable, Dimension::Overall};

struct LikertDimension {
    Dimension id;
    std::string_view name;
    std::string_view definition;
    bool includes_article;
};

const LikertDimension& dimension_info(Dimension d);

/// Case-insensitive lookup by name; throws std::invalid_argument when unknown.
Dimension dimension_from_name(std::string_view name);

/// Parses "all" or a comma-separated list of dimension names.
std::vector<Dimension> parse_dimension_list(std::string_view spec);

/// Fills the rating template. The article block is left out for dimensions
/// that are judged on the summary alone. Throws DegenerateInput on an empty
/// summary, or on an empty article for an article-dependent dimension.
std::string build_likert_prompt(Dimension dim, std::string_view article, std::string_view summary);
std::string build_likert_prompt(std::string_view dim_name, std::string_view article, std::string_view summary);

class LikertParseError : public Error {
public:
    using Error::Error;
};

/// First standalone integer within 1..5. Throws LikertParseError when none.
int parse_likert(std::string_view raw);

inline constexpr std::string_view kLikertReminder = "Respond with a single integer 1-5.";

/// Summary id for the step-th (1-based) summary of an article's chain.
std::string summary_id(std::string_view article_id, int step);

struct JudgedItem {
    std::string summary_id;
    std::string article_id;
    int step = 0;
    Dimension dimension = Dimension::Overall;
    std::optional<int> score;  // empty: gap (client or parse failure)
    std::string raw;
    std::string error;
};

nlohmann::json to_json(const JudgedItem& item);
JudgedItem judged_item_from_json(const nlohmann::json& j);

struct StepMeans {
    int step = 0;
    std::map<Dimension, double> means;  // dimensions with at least one score
    std::map<Dimension, std::size_t> counts;
    /// Mean of the per-dimension means; empty when no dimension was scored.
    std::optional<double> average;
};

struct LikertScores {
    std::vector<JudgedItem> items;
    std::vector<StepMeans> steps;  // ascending step
    std::size_t gaps = 0;
};

/// Per-step per-dimension means and the cross-dimension average.
LikertScores aggregate_likert(std::vector<JudgedItem> items);

struct JudgeOptions {
    std::size_t workers = 4;
    double temperature = 0.0;
    int max_tokens = 16;
};

/// One request per (summary, dimension). A failed parse is retried once with
/// kLikertReminder appended; anything still failing is kept as a gap.
LikertScores judge_corpus(std::span<const CoDChain> chains, const std::map<std::string, std::string>& articles,
                          std::span<const Dimension> dims, LlmClient& client, const JudgeOptions& options = {});

}  // namespace codkit
