#include "codkit/codchain.hpp"

#include <cmath>
#include <sstream>
#include <stdexcept>

#include "codkit/util.hpp"

namespace codkit {

using nlohmann::json;

namespace {

#include "codkit/cod_prompt_template.inc"

std::string render(std::string_view tmpl, const std::vector<std::pair<std::string_view, std::string>>& values) {
    std::string out;
    out.reserve(tmpl.size());
    std::size_t i = 0;
    while (i < tmpl.size()) {
        const auto open = tmpl.find("{{", i);
        if (open == std::string_view::npos) {
            out.append(tmpl.substr(i));
            break;
        }
        out.append(tmpl.substr(i, open - i));
        const auto close = tmpl.find("}}", open + 2);
        if (close == std::string_view::npos) {
            out.append(tmpl.substr(open));
            break;
        }
        const auto name = tmpl.substr(open + 2, close - open - 2);
        bool replaced = false;
        for (const auto& [key, value] : values) {
            if (key == name) {
                out.append(value);
                replaced = true;
                break;
            }
        }
        if (!replaced) out.append(tmpl.substr(open, close + 2 - open));
        i = close + 2;
    }
    return out;
}

bool is_blank(std::string_view s) { return s.find_first_not_of(" \t\r\n") == std::string_view::npos; }

std::string trim(std::string_view s) {
    const auto b = s.find_first_not_of(" \t\r\n");
    if (b == std::string_view::npos) return {};
    const auto e = s.find_last_not_of(" \t\r\n");
    return std::string(s.substr(b, e - b + 1));
}

// End (exclusive) of the bracketed value opening at `begin`, honoring JSON
// string literals; npos when unbalanced.
std::size_t matching_close(std::string_view raw, std::size_t begin) {
    int depth = 0;
    bool in_string = false;
    for (std::size_t i = begin; i < raw.size(); ++i) {
        const char c = raw[i];
        if (in_string) {
            if (c == '\\') ++i;
            else if (c == '"') in_string = false;
            continue;
        }
        switch (c) {
            case '"': in_string = true; break;
            case '[': case '{': ++depth; break;
            case ']': case '}':
                if (--depth == 0) return i + 1;
                break;
            default: break;
        }
    }
    return std::string_view::npos;
}

std::optional<json> first_json_array(std::string_view raw) {
    for (auto pos = raw.find('['); pos != std::string_view::npos; pos = raw.find('[', pos + 1)) {
        const auto end = matching_close(raw, pos);
        if (end == std::string_view::npos) continue;
        json parsed = json::parse(raw.substr(pos, end - pos), nullptr, false);
        if (!parsed.is_discarded() && parsed.is_array()) return parsed;
    }
    return std::nullopt;
}

std::vector<std::string> parse_entities(const json& value, std::size_t index, std::string_view raw) {
    std::vector<std::string> out;
    if (value.is_string()) {
        std::string_view s = value.get_ref<const std::string&>();
        std::size_t start = 0;
        while (start <= s.size()) {
            auto end = s.find(';', start);
            if (end == std::string_view::npos) end = s.size();
            if (auto item = trim(s.substr(start, end - start)); !item.empty()) out.push_back(std::move(item));
            start = end + 1;
        }
        return out;
    }
    if (value.is_array()) {
        for (const auto& e : value) {
            if (!e.is_string()) throw SchemaError(index, "Missing_Entities", std::string(raw));
            if (auto item = trim(e.get<std::string>()); !item.empty()) out.push_back(std::move(item));
        }
        return out;
    }
    if (value.is_null()) return out;
    throw SchemaError(index, "Missing_Entities", std::string(raw));
}

}  // namespace

std::string_view default_cod_template() { return kDefaultCodTemplate; }

void PromptSpec::validate() const {
    if (n_steps < 1) throw std::invalid_argument("n_steps must be >= 1");
    if (entities_min < 0 || entities_min > entities_max)
        throw std::invalid_argument("entities_per_step range must satisfy 0 <= min <= max");
    if (initial_words < 1 || vanilla_words < 1) throw std::invalid_argument("word budgets must be positive");
    if (template_text.find("{{ARTICLE}}") == std::string::npos)
        throw std::invalid_argument("prompt template lacks an {{ARTICLE}} placeholder");
}

void PromptSpec::load_template(const std::filesystem::path& path) { template_text = read_file(path); }

LengthMismatch::LengthMismatch(std::size_t found, std::size_t expected, std::string raw)
    : ResponseFormatError("expected " + std::to_string(expected) + " steps, found " + std::to_string(found),
                          std::move(raw)),
      found_(found),
      expected_(expected) {}

SchemaError::SchemaError(std::size_t index, std::string key, std::string raw)
    : ResponseFormatError("step " + std::to_string(index) + ": missing or invalid \"" + key + "\"",
                          std::move(raw)),
      index_(index),
      key_(std::move(key)) {}

json to_json(const CoDChain& chain) {
    json steps = json::array();
    for (const auto& s : chain.steps) {
        steps.push_back({{"missing_entities", s.missing_entities}, {"summary", s.summary}});
    }
    return {
        {"article_id", chain.article_id},
        {"steps", steps},
        {"model_id", chain.model_id},
        {"created_at", chain.created_at},
        {"prompt_fingerprint", chain.prompt_fingerprint},
        {"attempt_count", chain.attempt_count},
        {"raw_refs", chain.raw_refs},
    };
}

CoDChain chain_from_json(const json& j) {
    CoDChain c;
    c.article_id = j.at("article_id").get<std::string>();
    for (const auto& s : j.at("steps")) {
        c.steps.push_back({s.at("missing_entities").get<std::vector<std::string>>(), s.at("summary").get<std::string>()});
    }
    c.model_id = j.value("model_id", std::string());
    c.created_at = j.value("created_at", std::string());
    c.prompt_fingerprint = j.value("prompt_fingerprint", std::string());
    c.attempt_count = j.value("attempt_count", 1);
    c.raw_refs = j.value("raw_refs", std::vector<std::string>{});
    return c;
}

std::string build_cod_prompt(std::string_view article, const PromptSpec& spec) {
    if (is_blank(article)) throw DegenerateInput("cannot build a prompt for an empty article");
    spec.validate();
    return render(spec.template_text, {
                                          {"ARTICLE", std::string(article)},
                                          {"N_STEPS", std::to_string(spec.n_steps)},
                                          {"ENTITIES_MIN", std::to_string(spec.entities_min)},
                                          {"ENTITIES_MAX", std::to_string(spec.entities_max)},
                                          {"INITIAL_WORDS", std::to_string(spec.initial_words)},
                                      });
}

std::string build_vanilla_prompt(std::string_view article, int word_budget) {
    if (is_blank(article)) throw DegenerateInput("cannot build a prompt for an empty article");
    if (word_budget < 1) throw std::invalid_argument("word budget must be positive");
    std::string out = "Article: ";
    out.append(article);
    out.append("\n\nWrite a VERY short summary of the Article. Do not exceed ");
    out.append(std::to_string(word_budget));
    out.append(" words.");
    return out;
}

std::string prompt_fingerprint(std::string_view prompt) { return sha256_hex(prompt); }

CoDChain parse_cod_response(std::string_view raw, const PromptSpec& spec) {
    const auto array = first_json_array(raw);
    if (!array) throw ParseError("no JSON array found in response", std::string(raw));
    if (array->size() != static_cast<std::size_t>(spec.n_steps))
        throw LengthMismatch(array->size(), static_cast<std::size_t>(spec.n_steps), std::string(raw));

    CoDChain chain;
    for (std::size_t k = 0; k < array->size(); ++k) {
        const json& element = (*array)[k];
        if (!element.is_object()) throw SchemaError(k, "Missing_Entities", std::string(raw));
        if (!element.contains("Missing_Entities")) throw SchemaError(k, "Missing_Entities", std::string(raw));
        if (!element.contains("Denser_Summary") || !element["Denser_Summary"].is_string() ||
            is_blank(element["Denser_Summary"].get_ref<const std::string&>())) {
            throw SchemaError(k, "Denser_Summary", std::string(raw));
        }
        chain.steps.push_back({parse_entities(element["Missing_Entities"], k, raw),
                               element["Denser_Summary"].get<std::string>()});
    }
    return chain;
}

std::string serialize_steps(const std::vector<CoDStep>& steps) {
    json array = json::array();
    for (const auto& s : steps) {
        array.push_back({{"Missing_Entities", s.missing_entities}, {"Denser_Summary", s.summary}});
    }
    return array.dump(2);
}

std::vector<ChainWarning> validate_chain(const CoDChain& chain, double tolerance,
                                         const AbbreviationList& abbreviations) {
    std::vector<ChainWarning> warnings;
    std::vector<std::size_t> lengths;
    for (const auto& s : chain.steps) lengths.push_back(token_count(s.summary, abbreviations));

    for (std::size_t k = 0; k < chain.steps.size(); ++k) {
        const std::size_t step = k + 1;
        if (chain.steps[k].missing_entities.empty()) {
            warnings.push_back({step, WarningKind::EmptyMissingEntities,
                                "step " + std::to_string(step) + " lists no missing entities"});
        }
        if (k == 0 || lengths[0] == 0) continue;
        const double base = static_cast<double>(lengths[0]);
        const double deviation = std::abs(static_cast<double>(lengths[k]) - base) / base;
        if (deviation > tolerance) {
            warnings.push_back({step, WarningKind::LengthDeviation,
                                "step " + std::to_string(step) + " has " + std::to_string(lengths[k]) +
                                    " tokens vs " + std::to_string(lengths[0]) + " at step 1"});
        }
        const double previous = static_cast<double>(lengths[k - 1]);
        if (previous > 0 && (static_cast<double>(lengths[k]) - previous) / previous > tolerance) {
            warnings.push_back({step, WarningKind::LengthGrowth,
                                "step " + std::to_string(step) + " grew from " + std::to_string(lengths[k - 1]) +
                                    " to " + std::to_string(lengths[k]) + " tokens"});
        }
    }
    return warnings;
}

ChainRun run_cod(std::string_view article_id, std::string_view article, const PromptSpec& spec,
                 LlmClient& client, RetryPolicy retry, GenerationSettings settings) {
    const std::string prompt = build_cod_prompt(article, spec);
    ChainRun run;
    std::vector<std::string> refs;
    std::string last_error;

    for (int attempt = 1; attempt <= retry.max_retries + 1; ++attempt) {
        LlmRequest request;
        request.prompt = attempt == 1 ? prompt : prompt + "\n\n" + std::string(kJsonReminder);
        request.temperature = settings.temperature;
        request.max_tokens = settings.max_tokens;
        LlmResponse response = client.complete(request);
        run.raw_attempts.push_back(response.text);
        refs.push_back(response.log_ref);
        try {
            CoDChain chain = parse_cod_response(response.text, spec);
            chain.article_id = std::string(article_id);
            chain.model_id = client.model_id();
            chain.created_at = utc_timestamp();
            chain.prompt_fingerprint = prompt_fingerprint(prompt);
            chain.attempt_count = attempt;
            chain.raw_refs = std::move(refs);
            run.chain = std::move(chain);
            return run;
        } catch (const ResponseFormatError& e) {
            last_error = e.what();
        }
    }
    throw ChainGenerationError("article " + std::string(article_id) + ": no valid chain after " +
                                   std::to_string(run.raw_attempts.size()) + " attempts (" + last_error + ")",
                               run.raw_attempts.back(), static_cast<int>(run.raw_attempts.size()));
}

VanillaSummary run_vanilla(std::string_view article_id, std::string_view article, int word_budget,
                           LlmClient& client, GenerationSettings settings) {
    LlmRequest request;
    request.prompt = build_vanilla_prompt(article, word_budget);
    request.temperature = settings.temperature;
    request.max_tokens = settings.max_tokens;
    const LlmResponse response = client.complete(request);
    if (is_blank(response.text)) throw ParseError("empty vanilla summary", response.text);
    return {std::string(article_id), trim(response.text), client.model_id(), prompt_fingerprint(request.prompt),
            response.log_ref};
}

}  // namespace codkit
