#include "codkit/datastore.hpp"

#include <algorithm>
#include <fstream>
#include <set>
#include <sstream>
#include <utility>
#include <cctype>

#include "codkit/util.hpp"

namespace codkit {

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

constexpr std::string_view kManifest = "manifest.json";

std::string scalar_to_string(const json& v) {
    if (v.is_string()) return v.get<std::string>();
    if (v.is_number_integer() || v.is_number_unsigned()) return v.dump();
    throw std::invalid_argument("expected a string or integer, got " + std::string(v.type_name()));
}

std::string trim(std::string_view s) {
    const auto b = s.find_first_not_of(" \t\r\n");
    if (b == std::string_view::npos) return {};
    const auto e = s.find_last_not_of(" \t\r\n");
    return std::string(s.substr(b, e - b + 1));
}

ArticleRecord make_record(std::string id, std::string text, std::optional<std::string> reference,
                          std::string_view source) {
    if (trim(id).empty()) throw std::invalid_argument("empty article id");
    if (trim(text).empty()) throw std::invalid_argument("empty article text for '" + id + "'");
    if (reference && trim(*reference).empty()) reference.reset();
    return {std::move(id), std::move(text), std::move(reference), std::string(source)};
}

}  // namespace

json to_json(const ArticleRecord& r) {
    json j = {{"article_id", r.article_id}, {"text", r.text}, {"source", r.source}};
    if (r.reference_summary) j["reference_summary"] = *r.reference_summary;
    return j;
}

ArticleRecord article_from_json(const json& j) {
    ArticleRecord r;
    r.article_id = j.at("article_id").get<std::string>();
    r.text = j.at("text").get<std::string>();
    if (j.contains("reference_summary") && !j["reference_summary"].is_null())
        r.reference_summary = j["reference_summary"].get<std::string>();
    r.source = j.value("source", std::string());
    return r;
}

FieldMap FieldMap::parse(std::string_view spec) {
    FieldMap map;
    std::size_t pos = 0;
    while (pos <= spec.size()) {
        const auto comma = std::min(spec.find(',', pos), spec.size());
        const std::string item = trim(spec.substr(pos, comma - pos));
        pos = comma + 1;
        if (item.empty()) continue;
        const auto eq = item.find('=');
        if (eq == std::string::npos) throw std::invalid_argument("field map entry lacks '=': " + item);
        const std::string key = trim(std::string_view(item).substr(0, eq));
        const std::string value = trim(std::string_view(item).substr(eq + 1));
        if (key == "id") map.id = value;
        else if (key == "text") map.text = value;
        else if (key == "reference") map.reference = value;
        else throw std::invalid_argument("unknown field map key '" + key + "' (id, text, reference)");
    }
    if (map.id.empty() || map.text.empty()) throw std::invalid_argument("field map needs id and text names");
    return map;
}

std::vector<CsvRecord> parse_csv(std::string_view text) {
    std::vector<CsvRecord> out;
    CsvRecord current{1, {}};
    std::string field;
    std::size_t line = 1;
    bool quoted = false;
    bool field_started = false;
    bool record_has_content = false;

    const auto end_field = [&] {
        current.fields.push_back(std::move(field));
        field.clear();
        field_started = false;
    };
    const auto end_record = [&] {
        if (record_has_content || field_started || !current.fields.empty()) {
            end_field();
            out.push_back(std::move(current));
        }
        current = CsvRecord{line, {}};
        record_has_content = false;
    };

    for (std::size_t i = 0; i < text.size(); ++i) {
        const char c = text[i];
        if (quoted) {
            if (c == '"') {
                if (i + 1 < text.size() && text[i + 1] == '"') {
                    field.push_back('"');
                    ++i;
                } else {
                    quoted = false;
                }
            } else {
                if (c == '\n') ++line;
                field.push_back(c);
            }
            continue;
        }
        switch (c) {
            case '"':
                if (!field.empty()) throw RowError(line, "stray quote inside an unquoted CSV field");
                quoted = true;
                field_started = true;
                record_has_content = true;
                break;
            case ',':
                record_has_content = true;
                end_field();
                break;
            case '\r':
                break;
            case '\n':
                ++line;
                end_record();
                break;
            default:
                field.push_back(c);
                field_started = true;
                record_has_content = true;
        }
    }
    if (quoted) throw RowError(current.line, "unterminated quoted CSV field");
    end_record();
    return out;
}

CorpusImport import_corpus(const fs::path& path, const FieldMap& fields, std::string_view source_tag) {
    std::ifstream probe(path);
    if (!probe) throw Error("cannot read corpus: " + path.string());
    probe.close();
    const std::string source = source_tag.empty() ? path.filename().string() : std::string(source_tag);

    CorpusImport result;
    std::map<std::string, std::size_t> seen;
    const auto accept = [&](ArticleRecord record, std::size_t line) {
        const auto [it, inserted] = seen.try_emplace(record.article_id, line);
        if (!inserted)
            throw RowError(line, "duplicate article_id '" + record.article_id + "' (first on line " +
                                     std::to_string(it->second) + ", again on line " + std::to_string(line) + ")");
        result.records.push_back(std::move(record));
    };

    std::string ext = path.extension().string();
    std::transform(ext.begin(), ext.end(), ext.begin(), [](unsigned char c) { return std::tolower(c); });

    if (ext == ".csv") {
        const auto rows = parse_csv(read_file(path));
        if (!rows.empty()) {
            const auto& header = rows.front().fields;
            const auto column = [&](const std::string& name) -> std::optional<std::size_t> {
                const auto it = std::find(header.begin(), header.end(), name);
                if (it == header.end()) return std::nullopt;
                return static_cast<std::size_t>(it - header.begin());
            };
            const auto id_col = column(fields.id);
            const auto text_col = column(fields.text);
            const auto ref_col = fields.reference.empty() ? std::nullopt : column(fields.reference);
            if (!id_col) throw RowError(rows.front().line, "header lacks id column '" + fields.id + "'");
            if (!text_col) throw RowError(rows.front().line, "header lacks text column '" + fields.text + "'");
            for (std::size_t r = 1; r < rows.size(); ++r) {
                const auto& row = rows[r];
                if (row.fields.size() != header.size())
                    throw RowError(row.line, "expected " + std::to_string(header.size()) + " fields, found " +
                                                 std::to_string(row.fields.size()));
                try {
                    std::optional<std::string> ref;
                    if (ref_col) ref = row.fields[*ref_col];
                    accept(make_record(row.fields[*id_col], row.fields[*text_col], ref, source), row.line);
                } catch (const RowError&) {
                    throw;
                } catch (const std::exception& e) {
                    throw RowError(row.line, e.what());
                }
            }
        }
    } else {
        std::ifstream in(path);
        std::string line;
        std::size_t line_no = 0;
        while (std::getline(in, line)) {
            ++line_no;
            if (trim(line).empty()) continue;
            try {
                const json j = json::parse(line);
                if (!j.is_object()) throw std::invalid_argument("row is not a JSON object");
                if (!j.contains(fields.id)) throw std::invalid_argument("missing id field '" + fields.id + "'");
                if (!j.contains(fields.text) || j[fields.text].is_null())
                    throw std::invalid_argument("missing text field '" + fields.text + "'");
                std::optional<std::string> ref;
                if (!fields.reference.empty() && j.contains(fields.reference) && !j[fields.reference].is_null())
                    ref = j[fields.reference].get<std::string>();
                accept(make_record(scalar_to_string(j[fields.id]), j[fields.text].get<std::string>(), ref, source),
                       line_no);
            } catch (const RowError&) {
                throw;
            } catch (const std::exception& e) {
                throw RowError(line_no, e.what());
            }
        }
    }
    if (result.records.empty()) result.warnings.push_back("corpus " + path.string() + " holds no records");
    return result;
}

json to_json(const VanillaSummary& v) {
    return {{"article_id", v.article_id},
            {"summary", v.summary},
            {"model_id", v.model_id},
            {"prompt_fingerprint", v.prompt_fingerprint},
            {"raw_ref", v.raw_ref}};
}

VanillaSummary vanilla_from_json(const json& j) {
    return {j.at("article_id").get<std::string>(), j.at("summary").get<std::string>(),
            j.value("model_id", std::string()), j.value("prompt_fingerprint", std::string()),
            j.value("raw_ref", std::string())};
}

// RunStore

bool RunStore::valid_run_id(std::string_view id) {
    if (id.empty() || id == "." || id == "..") return false;
    return std::all_of(id.begin(), id.end(), [](char c) {
        return std::isalnum(static_cast<unsigned char>(c)) || c == '-' || c == '_' || c == '.';
    });
}

RunStore::RunStore(fs::path dir, std::string run_id, json manifest)
    : dir_(std::move(dir)), run_id_(std::move(run_id)), manifest_(std::move(manifest)) {}

RunStore::RunStore(RunStore&& other) noexcept
    : dir_(std::move(other.dir_)),
      run_id_(std::move(other.run_id_)),
      manifest_(std::move(other.manifest_)),
      warnings_(std::move(other.warnings_)) {}

RunStore RunStore::create(const fs::path& runs_dir, std::string_view run_id, json config) {
    if (!valid_run_id(run_id)) throw std::invalid_argument("invalid run id '" + std::string(run_id) + "'");
    const fs::path dir = runs_dir / std::string(run_id);
    if (fs::exists(dir)) throw RunExists("run '" + std::string(run_id) + "' already exists; runs are append-only");
    fs::create_directories(dir / "raw");
    fs::create_directories(dir / "report");
    json manifest = {{"run_id", std::string(run_id)},
                     {"created_at", utc_timestamp()},
                     {"model_id", ""},
                     {"prompt_fingerprints", json::array()},
                     {"config", std::move(config)},
                     {"files", json::object()}};
    RunStore store(dir, std::string(run_id), std::move(manifest));
    store.write_manifest();
    return store;
}

RunStore RunStore::open(const fs::path& runs_dir, std::string_view run_id) {
    if (!valid_run_id(run_id)) throw std::invalid_argument("invalid run id '" + std::string(run_id) + "'");
    const fs::path dir = runs_dir / std::string(run_id);
    if (!fs::is_regular_file(dir / kManifest)) throw RunNotFound("no run '" + std::string(run_id) + "' in " + runs_dir.string());
    json manifest;
    try {
        manifest = json::parse(read_file(dir / kManifest));
    } catch (const json::exception& e) {
        throw CorruptionError("manifest of run '" + std::string(run_id) + "' is not valid JSON: " + e.what());
    }
    if (!manifest.contains("files") || !manifest["files"].is_object())
        throw CorruptionError("manifest of run '" + std::string(run_id) + "' lacks a file inventory");
    return RunStore(dir, std::string(run_id), std::move(manifest));
}

json RunStore::manifest() const {
    std::lock_guard lock(mutex_);
    return manifest_;
}

void RunStore::write_manifest() { write_file_atomic(dir_ / kManifest, manifest_.dump(2) + "\n"); }

void RunStore::set_model_id(std::string_view model) {
    std::lock_guard lock(mutex_);
    manifest_["model_id"] = std::string(model);
    write_manifest();
}

void RunStore::add_prompt_fingerprint(std::string_view fingerprint) {
    std::lock_guard lock(mutex_);
    auto& list = manifest_["prompt_fingerprints"];
    for (const auto& f : list) {
        if (f == fingerprint) return;
    }
    list.push_back(std::string(fingerprint));
    write_manifest();
}

bool RunStore::has(std::string_view file) const {
    std::lock_guard lock(mutex_);
    return manifest_["files"].contains(std::string(file));
}

void RunStore::write_tracked(std::string_view file, std::string_view content, bool immutable) {
    std::lock_guard lock(mutex_);
    const std::string name(file);
    if (immutable && manifest_["files"].contains(name))
        throw RunExists(name + " already exists in run '" + run_id_ + "' and is immutable");
    write_file_atomic(dir_ / name, content);
    manifest_["files"][name] = {{"sha256", sha256_hex(content)}, {"bytes", content.size()}};
    write_manifest();
}

std::string RunStore::read_tracked(std::string_view file) {
    std::string expected;
    {
        std::lock_guard lock(mutex_);
        const std::string name(file);
        if (!manifest_["files"].contains(name)) throw Error(name + " is not part of run '" + run_id_ + "'");
        expected = manifest_["files"][name].at("sha256").get<std::string>();
    }
    const fs::path path = dir_ / std::string(file);
    if (!fs::is_regular_file(path)) throw CorruptionError(path.string() + " is listed in the manifest but missing");
    std::string content = read_file(path);
    if (sha256_hex(content) != expected)
        throw CorruptionError(path.string() + " does not match its manifest hash; the run is corrupted");
    return content;
}

void RunStore::write_untracked(const fs::path& relative, std::string_view content) {
    const fs::path target = dir_ / relative;
    fs::create_directories(target.parent_path());
    write_file_atomic(target, content);
}

std::vector<std::string> RunStore::take_warnings() {
    std::lock_guard lock(mutex_);
    return std::exchange(warnings_, {});
}

void RunStore::write_jsonl(std::string_view file, const std::vector<json>& rows, bool immutable) {
    std::string content;
    for (const auto& r : rows) {
        content += r.dump();
        content += '\n';
    }
    write_tracked(file, content, immutable);
}

std::vector<json> RunStore::read_jsonl(std::string_view file) {
    if (!has(file)) {
        std::lock_guard lock(mutex_);
        warnings_.push_back("run '" + run_id_ + "' has no " + std::string(file));
        return {};
    }
    const std::string content = read_tracked(file);
    std::vector<json> rows;
    std::istringstream in(content);
    std::string line;
    std::size_t line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        if (trim(line).empty()) continue;
        try {
            rows.push_back(json::parse(line));
        } catch (const json::exception& e) {
            throw RowError(line_no, std::string(file) + ": " + e.what());
        }
    }
    if (rows.empty()) {
        std::lock_guard lock(mutex_);
        warnings_.push_back(std::string(file) + " in run '" + run_id_ + "' is empty");
    }
    return rows;
}

namespace {

template <typename T, typename Conv>
std::vector<T> convert_rows(const std::vector<json>& rows, std::string_view file, Conv conv) {
    std::vector<T> out;
    out.reserve(rows.size());
    for (std::size_t i = 0; i < rows.size(); ++i) {
        try {
            out.push_back(conv(rows[i]));
        } catch (const std::exception& e) {
            throw RowError(i + 1, std::string(file) + ": " + e.what());
        }
    }
    return out;
}

template <typename T>
std::vector<json> to_rows(std::span<const T> items) {
    std::vector<json> rows;
    rows.reserve(items.size());
    for (const auto& item : items) rows.push_back(to_json(item));
    return rows;
}

}  // namespace

void RunStore::save_articles(std::span<const ArticleRecord> a) { write_jsonl("articles.jsonl", to_rows(a), true); }
std::vector<ArticleRecord> RunStore::load_articles() {
    return convert_rows<ArticleRecord>(read_jsonl("articles.jsonl"), "articles.jsonl", article_from_json);
}

void RunStore::save_chains(std::span<const CoDChain> c) { write_jsonl("chains.jsonl", to_rows(c), true); }
std::vector<CoDChain> RunStore::load_chains() {
    return convert_rows<CoDChain>(read_jsonl("chains.jsonl"), "chains.jsonl", chain_from_json);
}

void RunStore::save_vanilla(std::span<const VanillaSummary> v) { write_jsonl("vanilla.jsonl", to_rows(v), true); }
std::vector<VanillaSummary> RunStore::load_vanilla() {
    return convert_rows<VanillaSummary>(read_jsonl("vanilla.jsonl"), "vanilla.jsonl", vanilla_from_json);
}

void RunStore::save_metrics(std::span<const SummaryMetrics> m) { write_jsonl("metrics.jsonl", to_rows(m), false); }
std::vector<SummaryMetrics> RunStore::load_metrics() {
    return convert_rows<SummaryMetrics>(read_jsonl("metrics.jsonl"), "metrics.jsonl", metrics_from_json);
}

void RunStore::save_scores(std::span<const JudgedItem> s) { write_jsonl("scores.jsonl", to_rows(s), false); }
std::vector<JudgedItem> RunStore::load_scores() {
    return convert_rows<JudgedItem>(read_jsonl("scores.jsonl"), "scores.jsonl", judged_item_from_json);
}

void RunStore::save_ballots(std::span<const PreferenceBallot> b) { write_jsonl("ballots.jsonl", to_rows(b), false); }
std::vector<PreferenceBallot> RunStore::load_ballots() {
    return convert_rows<PreferenceBallot>(read_jsonl("ballots.jsonl"), "ballots.jsonl", ballot_from_json);
}

}  // namespace codkit
