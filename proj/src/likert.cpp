#include "codkit/likert.hpp"

#include <algorithm>
#include <cctype>
#include <stdexcept>

#include "codkit/util.hpp"

namespace codkit {

namespace {

constexpr std::array<LikertDimension, 5> kDimensions = {{
    {Dimension::Informative, "Informative",
     "An informative summary captures the important information in the article and presents it accurately "
     "and concisely.",
     true},
    {Dimension::Quality, "Quality", "A high quality summary is comprehensible and understandable.", false},
    {Dimension::Coherence, "Coherence", "A coherent summary is well-structured and well-organized.", false},
    {Dimension::Attributable, "Attributable",
     "Is all the information in the summary fully attributable to the Article?", true},
    {Dimension::Overall, "Overall",
     "A good summary should convey the main ideas in the Article in a concise, logical, and coherent fashion.",
     true},
}};

bool iequals(std::string_view a, std::string_view b) {
    return a.size() == b.size() && std::equal(a.begin(), a.end(), b.begin(), [](char x, char y) {
               return std::tolower(static_cast<unsigned char>(x)) == std::tolower(static_cast<unsigned char>(y));
           });
}

bool is_blank(std::string_view s) { return s.find_first_not_of(" \t\r\n") == std::string_view::npos; }

bool is_digit(char c) { return c >= '0' && c <= '9'; }

}  // namespace

const LikertDimension& dimension_info(Dimension d) { return kDimensions[static_cast<std::size_t>(d)]; }

Dimension dimension_from_name(std::string_view name) {
    for (const auto& info : kDimensions) {
        if (iequals(info.name, name)) return info.id;
    }
    throw std::invalid_argument("unknown Likert dimension '" + std::string(name) + "'");
}

std::vector<Dimension> parse_dimension_list(std::string_view spec) {
    if (iequals(spec, "all")) return {kAllDimensions.begin(), kAllDimensions.end()};
    std::vector<Dimension> out;
    std::size_t start = 0;
    while (start <= spec.size()) {
        auto end = spec.find(',', start);
        if (end == std::string_view::npos) end = spec.size();
        auto item = spec.substr(start, end - start);
        while (!item.empty() && item.front() == ' ') item.remove_prefix(1);
        while (!item.empty() && item.back() == ' ') item.remove_suffix(1);
        if (!item.empty()) {
            const Dimension d = dimension_from_name(item);
            if (std::find(out.begin(), out.end(), d) == out.end()) out.push_back(d);
        }
        start = end + 1;
    }
    if (out.empty()) throw std::invalid_argument("empty dimension list");
    return out;
}

std::string build_likert_prompt(Dimension dim, std::string_view article, std::string_view summary) {
    const auto& info = dimension_info(dim);
    if (is_blank(summary)) throw DegenerateInput("cannot rate an empty summary");
    if (info.includes_article && is_blank(article))
        throw DegenerateInput(std::string(info.name) + " ratings need the article");

    std::string out;
    if (info.includes_article) {
        out += "Article: ";
        out += article;
        out += "\n\n";
    }
    out += "Summary: ";
    out += summary;
    out += "\n\nPlease rate the summary (1=worst to 5=best) with respect to ";
    out += info.name;
    out += ".\n\n";
    out += info.definition;
    return out;
}

std::string build_likert_prompt(std::string_view dim_name, std::string_view article, std::string_view summary) {
    return build_likert_prompt(dimension_from_name(dim_name), article, summary);
}

int parse_likert(std::string_view raw) {
    std::size_t i = 0;
    while (i < raw.size()) {
        if (!is_digit(raw[i])) {
            ++i;
            continue;
        }
        std::size_t j = i;
        while (j < raw.size() && is_digit(raw[j])) ++j;
        // Standalone: not glued to letters, and not part of a decimal.
        const bool letter_before = i > 0 && std::isalpha(static_cast<unsigned char>(raw[i - 1]));
        const bool decimal_before = i > 1 && (raw[i - 1] == '.' || raw[i - 1] == ',') && is_digit(raw[i - 2]);
        const bool letter_after = j < raw.size() && std::isalpha(static_cast<unsigned char>(raw[j]));
        const bool decimal_after =
            j + 1 < raw.size() && (raw[j] == '.' || raw[j] == ',') && is_digit(raw[j + 1]);
        if (!letter_before && !decimal_before && !letter_after && !decimal_after && j - i == 1) {
            const int value = raw[i] - '0';
            if (value >= 1 && value <= 5) return value;
        }
        i = j;
    }
    throw LikertParseError("no rating between 1 and 5 in response: " + std::string(raw.substr(0, 120)));
}

std::string summary_id(std::string_view article_id, int step) {
    return std::string(article_id) + "#" + std::to_string(step);
}

nlohmann::json to_json(const JudgedItem& item) {
    nlohmann::json j = {
        {"summary_id", item.summary_id},
        {"article_id", item.article_id},
        {"step", item.step},
        {"dimension", dimension_info(item.dimension).name},
        {"score", item.score ? nlohmann::json(*item.score) : nlohmann::json(nullptr)},
        {"raw", item.raw},
    };
    if (!item.error.empty()) j["error"] = item.error;
    return j;
}

JudgedItem judged_item_from_json(const nlohmann::json& j) {
    JudgedItem item;
    item.summary_id = j.at("summary_id").get<std::string>();
    item.step = j.at("step").get<int>();
    item.article_id = j.value("article_id", item.summary_id.substr(0, item.summary_id.rfind('#')));
    item.dimension = dimension_from_name(j.at("dimension").get<std::string>());
    if (j.contains("score") && !j["score"].is_null()) {
        const int s = j["score"].get<int>();
        if (s < 1 || s > 5) throw std::invalid_argument("score outside 1..5 for " + item.summary_id);
        item.score = s;
    }
    item.raw = j.value("raw", std::string());
    item.error = j.value("error", std::string());
    return item;
}

LikertScores aggregate_likert(std::vector<JudgedItem> items) {
    LikertScores out;
    std::map<int, std::map<Dimension, std::pair<double, std::size_t>>> sums;
    for (const auto& item : items) {
        auto& step = sums[item.step];
        if (!item.score) {
            ++out.gaps;
            continue;
        }
        auto& [sum, count] = step[item.dimension];
        sum += *item.score;
        ++count;
    }
    for (const auto& [step, dims] : sums) {
        StepMeans m;
        m.step = step;
        double total = 0.0;
        for (const auto& [dim, acc] : dims) {
            const double mean = acc.first / static_cast<double>(acc.second);
            m.means[dim] = mean;
            m.counts[dim] = acc.second;
            total += mean;
        }
        if (!m.means.empty()) m.average = total / static_cast<double>(m.means.size());
        out.steps.push_back(std::move(m));
    }
    out.items = std::move(items);
    return out;
}

LikertScores judge_corpus(std::span<const CoDChain> chains, const std::map<std::string, std::string>& articles,
                          std::span<const Dimension> dims, LlmClient& client, const JudgeOptions& options) {
    if (chains.empty()) throw DegenerateInput("nothing to judge: no chains");
    if (dims.empty()) throw DegenerateInput("nothing to judge: no dimensions");

    std::vector<JudgedItem> items;
    for (const auto& chain : chains) {
        for (std::size_t k = 0; k < chain.steps.size(); ++k) {
            for (const Dimension d : dims) {
                JudgedItem item;
                item.article_id = chain.article_id;
                item.step = static_cast<int>(k + 1);
                item.summary_id = summary_id(chain.article_id, item.step);
                item.dimension = d;
                items.push_back(std::move(item));
            }
        }
    }

    const auto summary_of = [&](const JudgedItem& item) -> const std::string& {
        for (const auto& chain : chains) {
            if (chain.article_id == item.article_id) return chain.steps[static_cast<std::size_t>(item.step - 1)].summary;
        }
        throw std::logic_error("unreachable");
    };

    parallel_for(items.size(), options.workers, [&](std::size_t i) {
        JudgedItem& item = items[i];
        try {
            const auto article = articles.find(item.article_id);
            const std::string_view article_text = article == articles.end() ? std::string_view() : article->second;
            const std::string prompt = build_likert_prompt(item.dimension, article_text, summary_of(item));
            for (int attempt = 0; attempt < 2 && !item.score; ++attempt) {
                LlmRequest request;
                request.prompt = attempt == 0 ? prompt : prompt + "\n\n" + std::string(kLikertReminder);
                request.temperature = options.temperature;
                request.max_tokens = options.max_tokens;
                const LlmResponse response = client.complete(request);
                item.raw = response.text;
                try {
                    item.score = parse_likert(response.text);
                    item.error.clear();
                } catch (const LikertParseError& e) {
                    item.error = e.what();
                }
            }
        } catch (const std::exception& e) {
            item.error = e.what();
        }
    });
    return aggregate_likert(std::move(items));
}

}  // namespace codkit
