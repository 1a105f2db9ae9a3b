#pragma once

#include <filesystem>
#include <map>
#include <mutex>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include <nlohmann/json.hpp>

#include "codkit/align.hpp"
#include "codkit/codchain.hpp"
#include "codkit/entities.hpp"
#include "codkit/errors.hpp"
#include "codkit/likert.hpp"
#include "codkit/prefstats.hpp"

namespace codkit {

struct ArticleRecord {
    std::string article_id;
    std::string text;
    std::optional<std::string> reference_summary;
    std::string source;

    bool operator==(const ArticleRecord&) const = default;
};

nlohmann::json to_json(const ArticleRecord& record);
ArticleRecord article_from_json(const nlohmann::json& j);

/// Column (CSV) or key (JSONL) names for each record field. An empty
/// reference name means the corpus carries no reference summaries.
struct FieldMap {
    std::string id = "article_id";
    std::string text = "text";
    std::string reference = "reference_summary";

    /// "id=...,text=...,reference=..."; unspecified keys keep defaults.
    static FieldMap parse(std::string_view spec);
};

struct CorpusImport {
    std::vector<ArticleRecord> records;
    std::vector<std::string> warnings;
};

/// Reads JSONL, or CSV when the extension is .csv (RFC 4180 quoting, first
/// row is the header). Malformed rows, missing or empty text and duplicate
/// ids throw RowError carrying the physical line of the offending record.
CorpusImport import_corpus(const std::filesystem::path& path, const FieldMap& fields = {},
                           std::string_view source_tag = {});

/// Splits RFC 4180 CSV into records; each record remembers its first line.
struct CsvRecord {
    std::size_t line = 0;
    std::vector<std::string> fields;
};
std::vector<CsvRecord> parse_csv(std::string_view text);

nlohmann::json to_json(const VanillaSummary& summary);
VanillaSummary vanilla_from_json(const nlohmann::json& j);

struct SummaryMetrics;

class CorruptionError : public Error {
public:
    using Error::Error;
};

class RunNotFound : public Error {
public:
    using Error::Error;
};

class RunExists : public Error {
public:
    using Error::Error;
};

/// One directory per run under `runs_dir`. Every tracked file is listed in
/// manifest.json with its SHA-256; reads verify the hash. Writes go through
/// temp-file-then-rename. Immutable files (articles, chains, vanilla) can be
/// written once; derived files may be replaced.
class RunStore {
public:
    static RunStore create(const std::filesystem::path& runs_dir, std::string_view run_id,
                           nlohmann::json config = nlohmann::json::object());
    /// Throws RunNotFound when the directory or its manifest is missing.
    static RunStore open(const std::filesystem::path& runs_dir, std::string_view run_id);
    static bool valid_run_id(std::string_view run_id);

    RunStore(RunStore&& other) noexcept;

    const std::string& run_id() const { return run_id_; }
    const std::filesystem::path& dir() const { return dir_; }
    std::filesystem::path raw_dir() const { return dir_ / "raw"; }
    std::filesystem::path report_dir() const { return dir_ / "report"; }
    nlohmann::json manifest() const;

    void set_model_id(std::string_view model);
    void add_prompt_fingerprint(std::string_view fingerprint);

    bool has(std::string_view file) const;

    void save_articles(std::span<const ArticleRecord> articles);
    std::vector<ArticleRecord> load_articles();

    /// Throws RunExists when the run already holds chains.
    void save_chains(std::span<const CoDChain> chains);
    std::vector<CoDChain> load_chains();

    void save_vanilla(std::span<const VanillaSummary> summaries);
    std::vector<VanillaSummary> load_vanilla();

    void save_metrics(std::span<const SummaryMetrics> metrics);
    std::vector<SummaryMetrics> load_metrics();

    void save_scores(std::span<const JudgedItem> items);
    std::vector<JudgedItem> load_scores();

    void save_ballots(std::span<const PreferenceBallot> ballots);
    std::vector<PreferenceBallot> load_ballots();

    /// Replaces a tracked JSONL or text file; `immutable` refuses overwrite.
    void write_tracked(std::string_view file, std::string_view content, bool immutable = false);
    /// Reads a tracked file after checking its hash.
    std::string read_tracked(std::string_view file);
    /// Writes an untracked file below the run (report outputs).
    void write_untracked(const std::filesystem::path& relative, std::string_view content);

    /// Warnings raised by loads (missing optional files, empty runs).
    std::vector<std::string> take_warnings();

private:
    RunStore(std::filesystem::path dir, std::string run_id, nlohmann::json manifest);
    void write_manifest();
    std::vector<nlohmann::json> read_jsonl(std::string_view file);
    void write_jsonl(std::string_view file, const std::vector<nlohmann::json>& rows, bool immutable);

    std::filesystem::path dir_;
    std::string run_id_;
    nlohmann::json manifest_;
    std::vector<std::string> warnings_;
    mutable std::mutex mutex_;
};

// Per-summary statistics.

enum class SystemKind { CoD, Human, Vanilla };
std::string_view to_string(SystemKind kind);
SystemKind system_kind_from_string(std::string_view name);

struct SummaryMetrics {
    std::string summary_id;
    std::string article_id;
    SystemKind system = SystemKind::CoD;
    int step = 0;  // 0 outside CoD chains
    std::string error;  // non-empty: row flagged, numbers meaningless

    std::size_t tokens = 0;
    std::size_t entities = 0;
    double entity_density = 0.0;
    double extractive_density = 0.0;
    double extractive_coverage = 0.0;
    double fusion = 0.0;
    std::optional<ContentRank> content;

    bool ok() const { return error.empty(); }
};

nlohmann::json to_json(const SummaryMetrics& m);
SummaryMetrics metrics_from_json(const nlohmann::json& j);

struct MetricsConfig {
    ExtractorConfig extractor;
    AlignOptions align;
    /// Optional precomputed entity sets keyed by summary id.
    const std::map<std::string, EntitySet>* sidecar = nullptr;
    std::size_t workers = 4;
};

SummaryMetrics summary_metrics(std::string_view summary_id, std::string_view article_id, SystemKind system,
                               int step, std::string_view article, std::string_view summary,
                               const MetricsConfig& config = {});

/// One row per CoD step, vanilla summary and reference summary, ordered by
/// (system, article, step). Chains naming an unknown article throw Error.
std::vector<SummaryMetrics> compute_metrics(std::span<const ArticleRecord> articles,
                                            std::span<const CoDChain> chains,
                                            std::span<const VanillaSummary> vanilla,
                                            const MetricsConfig& config = {});

// Report tables.

struct Table1Row {
    SystemKind system = SystemKind::CoD;
    int step = 0;
    double tokens = 0.0;
    double entities = 0.0;
    double density = 0.0;  // mean of per-summary ratios
    std::size_t n = 0;
};

std::vector<Table1Row> table1_rows(std::span<const SummaryMetrics> metrics);
std::string table1_csv(std::span<const Table1Row> rows);
std::string table2_csv(const VoteShareTable& table);
std::string table3_csv(const LikertScores& scores);
std::string table5_csv(std::span<const MetaEvalRow> rows);
/// File name → CSV for the per-step CoD series.
std::map<std::string, std::string> series_csvs(std::span<const SummaryMetrics> metrics);
std::string format_step_summary(const StepSummary& summary);

struct ReportOptions {
    bool meta_eval = false;
    int n_steps = 0;  // 0: inferred from chains, then ballots, else 5
    MetricsConfig metrics;
};

struct ReportResult {
    std::vector<std::string> emitted;              // file names under report/
    std::map<std::string, std::string> skipped;    // table → reason
    std::string summary_text;
    bool all_skipped() const { return emitted.empty(); }
};

/// Writes report/ from persisted run data only. Metrics are read from
/// metrics.jsonl when present, otherwise recomputed from chains.
ReportResult emit_report(RunStore& store, const ReportOptions& options = {});

}  // namespace codkit
