#pragma once

#include <filesystem>
#include <string>
#include <string_view>
#include <vector>

#include <nlohmann/json.hpp>

#include "codkit/errors.hpp"
#include "codkit/llm.hpp"
#include "codkit/textcore.hpp"

namespace codkit {

/// The densification prompt template shipped with the build. Placeholders:
/// {{ARTICLE}}, {{N_STEPS}}, {{ENTITIES_MIN}}, {{ENTITIES_MAX}}, {{INITIAL_WORDS}}.
std::string_view default_cod_template();

struct PromptSpec {
    int n_steps = 5;
    int entities_min = 1;
    int entities_max = 3;
    int initial_words = 80;
    int vanilla_words = 70;
    std::string template_text{default_cod_template()};

    /// Throws std::invalid_argument when a field is out of range.
    void validate() const;

    /// Replaces the template with the contents of `path`.
    void load_template(const std::filesystem::path& path);
};

struct CoDStep {
    std::vector<std::string> missing_entities;
    std::string summary;

    bool operator==(const CoDStep&) const = default;
};

struct CoDChain {
    std::string article_id;
    std::vector<CoDStep> steps;
    std::string model_id;
    std::string created_at;
    std::string prompt_fingerprint;
    int attempt_count = 1;
    std::vector<std::string> raw_refs;  // logged raw responses, one per attempt

    bool operator==(const CoDChain&) const = default;
};

nlohmann::json to_json(const CoDChain& chain);
CoDChain chain_from_json(const nlohmann::json& j);

/// Response-format failures; each carries the raw text it failed on.
class ResponseFormatError : public Error {
public:
    ResponseFormatError(const std::string& what, std::string raw) : Error(what), raw_(std::move(raw)) {}
    const std::string& raw() const { return raw_; }

private:
    std::string raw_;
};

class ParseError : public ResponseFormatError {
public:
    using ResponseFormatError::ResponseFormatError;
};

class LengthMismatch : public ResponseFormatError {
public:
    LengthMismatch(std::size_t found, std::size_t expected, std::string raw);
    std::size_t found() const { return found_; }
    std::size_t expected() const { return expected_; }

private:
    std::size_t found_;
    std::size_t expected_;
};

class SchemaError : public ResponseFormatError {
public:
    SchemaError(std::size_t index, std::string key, std::string raw);
    std::size_t index() const { return index_; }
    const std::string& key() const { return key_; }

private:
    std::size_t index_;
    std::string key_;
};

class ChainGenerationError : public Error {
public:
    ChainGenerationError(const std::string& what, std::string last_raw, int attempts)
        : Error(what), last_raw_(std::move(last_raw)), attempts_(attempts) {}
    const std::string& last_raw() const { return last_raw_; }
    int attempts() const { return attempts_; }

private:
    std::string last_raw_;
    int attempts_;
};

/// Throws DegenerateInput on an empty article.
std::string build_cod_prompt(std::string_view article, const PromptSpec& spec = {});
std::string build_vanilla_prompt(std::string_view article, int word_budget = 70);

std::string prompt_fingerprint(std::string_view prompt);

/// Finds the first JSON array in `raw` (prose and code fences around it are
/// ignored) and checks it against the step contract. The returned chain has
/// only `steps` filled. "Missing_Entities" may be a list or a
/// ";"-delimited string.
CoDChain parse_cod_response(std::string_view raw, const PromptSpec& spec = {});

/// Inverse of parse_cod_response for the step array.
std::string serialize_steps(const std::vector<CoDStep>& steps);

enum class WarningKind { LengthDeviation, LengthGrowth, EmptyMissingEntities };

struct ChainWarning {
    std::size_t step = 0;  // 1-based
    WarningKind kind = WarningKind::LengthDeviation;
    std::string message;
};

/// Advisory checks: token length drifting from step 1 by more than
/// `tolerance`, step-over-step growth beyond `tolerance`, and steps with no
/// missing entities.
std::vector<ChainWarning> validate_chain(const CoDChain& chain, double tolerance = 0.2,
                                         const AbbreviationList& abbreviations = AbbreviationList::defaults());

struct RetryPolicy {
    int max_retries = 2;
};

struct GenerationSettings {
    double temperature = 0.0;
    int max_tokens = 1024;
};

inline constexpr std::string_view kJsonReminder = "Answer in valid JSON only.";

struct ChainRun {
    CoDChain chain;
    std::vector<std::string> raw_attempts;
};

/// Sends the densification prompt once, retrying with a JSON reminder while
/// the reply breaks the response contract. Client errors propagate.
ChainRun run_cod(std::string_view article_id, std::string_view article, const PromptSpec& spec,
                 LlmClient& client, RetryPolicy retry = {}, GenerationSettings settings = {});

struct VanillaSummary {
    std::string article_id;
    std::string summary;
    std::string model_id;
    std::string prompt_fingerprint;
    std::string raw_ref;
};

VanillaSummary run_vanilla(std::string_view article_id, std::string_view article, int word_budget,
                           LlmClient& client, GenerationSettings settings = {});

}  // namespace codkit
