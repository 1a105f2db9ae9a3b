#include "codkit/entities.hpp"

#include <algorithm>
#include <array>
#include <fstream>
#include <numeric>

#include <nlohmann/json.hpp>
#include <unicode/uchar.h>
#include <unicode/utf8.h>

#include "codkit/errors.hpp"

namespace codkit {

namespace {

// Closed-class words and frequent sentence openers. A sentence-initial
// capitalized token in this list is never an entity on its own.
constexpr auto kCommonWords = std::to_array<std::string_view>({
    "a", "about", "above", "according", "across", "after", "again", "against", "all", "almost",
    "also", "although", "always", "among", "an", "and", "another", "any", "are", "around",
    "as", "at", "be", "because", "been", "before", "being", "below", "between", "both",
    "but", "by", "can", "could", "despite", "did", "do", "does", "during", "each",
    "earlier", "either", "even", "every", "few", "finally", "first", "for", "from", "further",
    "had", "has", "have", "having", "he", "her", "here", "hers", "herself", "him",
    "himself", "his", "how", "however", "i", "if", "in", "instead", "into", "is",
    "it", "its", "itself", "just", "last", "later", "less", "many", "may", "me",
    "meanwhile", "more", "moreover", "most", "much", "must", "my", "near", "neither", "never",
    "nevertheless", "new", "next", "no", "nor", "not", "now", "of", "off", "often",
    "on", "once", "one", "only", "or", "other", "others", "our", "ours", "out",
    "over", "own", "perhaps", "previously", "rather", "recently", "same", "several", "she", "should",
    "since", "so", "some", "still", "such", "than", "that", "the", "their", "theirs",
    "them", "then", "there", "therefore", "these", "they", "this", "those", "though", "through",
    "thus", "to", "today", "tomorrow", "too", "two", "under", "until", "up", "upon",
    "us", "very", "was", "we", "were", "what", "when", "where", "whether", "which",
    "while", "who", "whom", "whose", "why", "will", "with", "within", "without", "would",
    "yesterday", "yet", "you", "your", "yours", "three", "it's"});

constexpr auto kTitles = std::to_array<std::string_view>(
    {"Mr.", "Mrs.", "Ms.", "Dr.", "Prof.", "Mr", "Mrs", "Ms", "Dr", "Sir"});

constexpr auto kLocativePrepositions =
    std::to_array<std::string_view>({"in", "at", "from", "to", "near", "across", "outside"});

bool is_common_word(std::string_view folded) {
    return std::find(kCommonWords.begin(), kCommonWords.end(), folded) != kCommonWords.end();
}

bool is_title(std::string_view token) {
    return std::find(kTitles.begin(), kTitles.end(), token) != kTitles.end();
}

bool is_locative(std::string_view folded) {
    return std::find(kLocativePrepositions.begin(), kLocativePrepositions.end(), folded) !=
           kLocativePrepositions.end();
}

template <typename Fn>
void for_each_code_point(std::string_view text, Fn&& fn) {
    const auto* bytes = reinterpret_cast<const uint8_t*>(text.data());
    const auto length = static_cast<int32_t>(text.size());
    int32_t i = 0;
    while (i < length) {
        UChar32 c;
        U8_NEXT(bytes, i, length, c);
        if (!fn(c)) return;
    }
}

UChar32 first_code_point(std::string_view text) {
    UChar32 first = -1;
    for_each_code_point(text, [&](UChar32 c) {
        first = c;
        return false;
    });
    return first;
}

bool is_capitalized(std::string_view token) {
    const UChar32 c = first_code_point(token);
    return c >= 0 && (u_isupper(c) || u_istitle(c));
}

bool has_digit(std::string_view token) {
    bool found = false;
    for_each_code_point(token, [&](UChar32 c) {
        found = c >= 0 && u_isdigit(c);
        return !found;
    });
    return found;
}

bool has_letter(std::string_view token) {
    bool found = false;
    for_each_code_point(token, [&](UChar32 c) {
        found = c >= 0 && u_isalpha(c);
        return !found;
    });
    return found;
}

bool is_all_punct(std::string_view token) {
    bool all = true;
    for_each_code_point(token, [&](UChar32 c) {
        all = c >= 0 && u_ispunct(c);
        return all;
    });
    return all;
}

bool is_currency_prefixed(std::string_view token) {
    const UChar32 c = first_code_point(token);
    return c >= 0 && u_charType(c) == U_CURRENCY_SYMBOL;
}

bool is_acronym(std::string_view token) {
    int letters = 0;
    bool upper = true;
    for_each_code_point(token, [&](UChar32 c) {
        if (u_isalpha(c)) {
            ++letters;
            if (!u_isupper(c)) upper = false;
        }
        return upper;
    });
    return upper && letters >= 2;
}

bool is_year(std::string_view token) {
    if (token.size() != 4 || !std::all_of(token.begin(), token.end(), [](char c) { return c >= '0' && c <= '9'; }))
        return false;
    const int year = std::stoi(std::string(token));
    return year >= 1800 && year <= 2099;
}

// Length in bytes of a trailing possessive ('s or ’s), or 0.
std::size_t possessive_suffix(std::string_view token) {
    if (token.size() > 2 && (token.ends_with("'s") || token.ends_with("'S"))) return 2;
    if (token.size() > 4 && token.ends_with("\xE2\x80\x99s")) return 4;
    return 0;
}

struct LocatedToken {
    std::string_view text;
    Span span;  // into the whole-text source
};

struct SentenceTokens {
    std::vector<LocatedToken> tokens;
    std::size_t first_word = 0;
};

std::optional<EntityCategory> parse_category(std::string_view name) {
    static constexpr std::array<std::pair<std::string_view, EntityCategory>, 6> kNames = {{
        {"PERSON_LIKE", EntityCategory::PersonLike},
        {"ORG_LOC_LIKE", EntityCategory::OrgLocLike},
        {"NUMERIC", EntityCategory::Numeric},
        {"DATE_LIKE", EntityCategory::DateLike},
        {"MONEY", EntityCategory::Money},
        {"OTHER", EntityCategory::Other},
    }};
    for (const auto& [n, c] : kNames) {
        if (n == name) return c;
    }
    return std::nullopt;
}

class RuleExtractor {
public:
    RuleExtractor(std::string_view text, const ExtractorConfig& config) : config_(config) {
        const SentenceSeq sentences = split_sentences(text, config.abbreviations);
        source_ = sentences.source;
        for (const auto& sentence : sentences.sentences) {
            TokenSeq local = tokenize(sentence.text, config.abbreviations);
            SentenceTokens st;
            for (const auto& t : local.tokens) {
                const Span s{t.span.begin + sentence.span.begin, t.span.end + sentence.span.begin};
                st.tokens.push_back({std::string_view(source_).substr(s.begin, s.size()), s});
            }
            while (st.first_word < st.tokens.size() && is_all_punct(st.tokens[st.first_word].text))
                ++st.first_word;
            sentences_.push_back(std::move(st));
        }
        for (const auto& st : sentences_) {
            for (std::size_t i = 0; i < st.tokens.size(); ++i) {
                const auto text = st.tokens[i].text;
                if (!has_letter(text)) continue;
                if (is_capitalized(text)) {
                    if (i != st.first_word) capitalized_mid_.insert(std::string(text));
                } else {
                    lowercase_seen_.insert(fold_case(text));
                }
            }
        }
    }

    EntitySet run() {
        for (const auto& st : sentences_) scan_sentence(st);
        return std::move(result_);
    }

private:
    void scan_sentence(const SentenceTokens& st) {
        const auto& toks = st.tokens;
        std::size_t i = 0;
        while (i < toks.size()) {
            const auto text = toks[i].text;
            if (is_capitalized(text) && has_letter(text)) {
                std::size_t j = i;
                while (j < toks.size() && is_capitalized(toks[j].text) && has_letter(toks[j].text)) ++j;
                take_run(st, i, j);
                i = j;
                continue;
            }
            if (is_currency_prefixed(text) && has_digit(text)) {
                add(toks[i].span, EntityCategory::Money);
            } else if (has_digit(text)) {
                add(toks[i].span, is_year(text) ? EntityCategory::DateLike : EntityCategory::Numeric);
            }
            ++i;
        }
    }

    bool accept_initial(std::string_view token) const {
        if (config_.gazetteer.lookup(token)) return true;
        if (capitalized_mid_.contains(std::string(token))) return true;
        const std::string folded = fold_case(token);
        return !is_common_word(folded) && !lowercase_seen_.contains(folded);
    }

    void take_run(const SentenceTokens& st, std::size_t begin, std::size_t end) {
        const auto& toks = st.tokens;
        bool titled = false;
        while (begin < end && is_title(toks[begin].text)) {
            titled = true;
            ++begin;
        }
        if (begin == end) return;
        if (!titled && begin == st.first_word && !accept_initial(toks[begin].text)) ++begin;
        if (begin == end) return;
        if (end - begin == 1 && is_common_word(fold_case(toks[begin].text))) return;

        Span span{toks[begin].span.begin, toks[end - 1].span.end};
        span.end -= possessive_suffix(toks[end - 1].text);
        const std::string_view surface = std::string_view(source_).substr(span.begin, span.size());

        EntityCategory category = EntityCategory::Other;
        if (titled) {
            category = EntityCategory::PersonLike;
        } else if (auto g = config_.gazetteer.lookup(surface)) {
            category = *g;
        } else if (end - begin == 1 && is_acronym(surface)) {
            category = EntityCategory::OrgLocLike;
        } else if (begin > 0 && is_locative(fold_case(toks[begin - 1].text))) {
            category = EntityCategory::OrgLocLike;
        } else if (end - begin >= 2 && end - begin <= 3) {
            category = EntityCategory::PersonLike;
        }
        add(span, category);
    }

    void add(Span span, EntityCategory category) {
        if (span.size() == 0) return;
        result_.insert({source_.substr(span.begin, span.size()), category, span});
    }

    const ExtractorConfig& config_;
    std::string source_;
    std::vector<SentenceTokens> sentences_;
    std::unordered_set<std::string> capitalized_mid_;
    std::unordered_set<std::string> lowercase_seen_;
    EntitySet result_;
};

}  // namespace

std::string_view to_string(EntityCategory category) {
    switch (category) {
        case EntityCategory::PersonLike: return "PERSON_LIKE";
        case EntityCategory::OrgLocLike: return "ORG_LOC_LIKE";
        case EntityCategory::Numeric: return "NUMERIC";
        case EntityCategory::DateLike: return "DATE_LIKE";
        case EntityCategory::Money: return "MONEY";
        case EntityCategory::Other: return "OTHER";
    }
    return "OTHER";
}

bool EntitySet::insert(Entity entity) {
    std::string key = fold_case(entity.surface);
    if (!keys_.insert(std::move(key)).second) return false;
    entities_.push_back(std::move(entity));
    return true;
}

bool EntitySet::contains(std::string_view surface) const {
    return keys_.contains(fold_case(surface));
}

const Gazetteer& Gazetteer::defaults() {
    static const Gazetteer g = [] {
        Gazetteer out;
        for (const char* term : {"Monday", "Tuesday", "Wednesday", "Thursday", "Friday", "Saturday",
                                 "Sunday", "January", "February", "March", "April", "May", "June",
                                 "July", "August", "September", "October", "November", "December"}) {
            out.add(term, EntityCategory::DateLike);
        }
        return out;
    }();
    return g;
}

Gazetteer Gazetteer::from_file(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw Error("cannot read gazetteer file: " + path.string());
    Gazetteer out;
    std::string line;
    std::size_t line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        if (!line.empty() && line.back() == '\r') line.pop_back();
        if (line.empty() || line.front() == '#') continue;
        EntityCategory category = EntityCategory::Other;
        const auto tab = line.find('\t');
        std::string term = line.substr(0, tab);
        if (tab != std::string::npos) {
            const auto parsed = parse_category(line.substr(tab + 1));
            if (!parsed) throw RowError(line_no, "unknown entity category '" + line.substr(tab + 1) + "'");
            category = *parsed;
        }
        out.add(nfc_normalize(term), category);
    }
    return out;
}

void Gazetteer::add(std::string_view term, EntityCategory category) {
    terms_.insert_or_assign(fold_case(term), category);
}

void Gazetteer::merge(const Gazetteer& other) {
    for (const auto& [term, category] : other.terms_) terms_.insert_or_assign(term, category);
}

std::optional<EntityCategory> Gazetteer::lookup(std::string_view term) const {
    const auto it = terms_.find(fold_case(term));
    if (it == terms_.end()) return std::nullopt;
    return it->second;
}

EntitySet extract_entities(std::string_view text, const ExtractorConfig& config) {
    return RuleExtractor(text, config).run();
}

DensityRecord make_density_record(std::size_t token_count, std::size_t entity_count) {
    if (token_count == 0) throw DegenerateInput("entity density of a zero-token summary is undefined");
    if (entity_count > token_count)
        throw DegenerateInput("entity count " + std::to_string(entity_count) + " exceeds token count " +
                              std::to_string(token_count));
    return {token_count, entity_count,
            static_cast<double>(entity_count) / static_cast<double>(token_count)};
}

DensityRecord entity_density(std::string_view summary, const EntitySet& entities,
                             const AbbreviationList& abbreviations) {
    return make_density_record(token_count(summary, abbreviations), entities.size());
}

double corpus_density(std::span<const DensityRecord> records) {
    if (records.empty()) throw DegenerateInput("corpus density of an empty record list");
    double sum = 0.0;
    for (const auto& r : records) sum += r.density;
    return sum / static_cast<double>(records.size());
}

std::map<std::string, EntitySet> load_entity_sidecar(
    const std::filesystem::path& path, const std::map<std::string, std::string>& summaries) {
    std::ifstream in(path);
    if (!in) throw Error("cannot read entity sidecar: " + path.string());

    std::map<std::string, EntitySet> out;
    std::string line;
    std::size_t line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
        nlohmann::json row;
        try {
            row = nlohmann::json::parse(line);
        } catch (const nlohmann::json::parse_error& e) {
            throw RowError(line_no, std::string("invalid JSON: ") + e.what());
        }
        if (!row.is_object() || !row.contains("summary_id") || !row["summary_id"].is_string() ||
            !row.contains("entities") || !row["entities"].is_array()) {
            throw RowError(line_no, "expected {\"summary_id\": string, \"entities\": [string]}");
        }
        const std::string id = row["summary_id"].get<std::string>();
        const auto summary = summaries.find(id);
        if (summary == summaries.end()) throw RowError(line_no, "unknown summary id '" + id + "'");
        if (out.contains(id)) throw RowError(line_no, "duplicate summary id '" + id + "'");

        const std::string source = nfc_normalize(summary->second);
        const std::string folded_source = fold_case(source);
        EntitySet set;
        for (const auto& e : row["entities"]) {
            if (!e.is_string()) throw RowError(line_no, "entities must be strings");
            std::string surface = nfc_normalize(e.get<std::string>());
            if (surface.empty()) continue;
            std::optional<Span> span;
            if (const auto pos = source.find(surface); pos != std::string::npos) {
                span = Span{pos, pos + surface.size()};
            } else if (const auto folded = fold_case(surface);
                       folded.size() == surface.size() && folded_source.size() == source.size()) {
                // Case-insensitive fallback; only valid when folding kept byte offsets.
                if (const auto p = folded_source.find(folded); p != std::string::npos) {
                    span = Span{p, p + surface.size()};
                    surface = source.substr(p, surface.size());
                }
            }
            set.insert({std::move(surface), EntityCategory::Other, span});
        }
        out.emplace(id, std::move(set));
    }
    return out;
}

}  // namespace codkit
