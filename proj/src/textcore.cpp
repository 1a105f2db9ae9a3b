#include "codkit/textcore.hpp"

#include <fstream>
#include <stdexcept>

#include <unicode/normalizer2.h>
#include <unicode/uchar.h>
#include <unicode/unistr.h>
#include <unicode/utf8.h>

namespace codkit {

namespace {

struct CodePoint {
    UChar32 value;
    std::size_t offset;  // byte offset into the chunk's parent string
    std::size_t length;  // bytes
};

std::vector<CodePoint> decode(std::string_view text, std::size_t base) {
    std::vector<CodePoint> out;
    const auto* bytes = reinterpret_cast<const uint8_t*>(text.data());
    const auto length = static_cast<int32_t>(text.size());
    int32_t i = 0;
    while (i < length) {
        const int32_t start = i;
        UChar32 c;
        U8_NEXT(bytes, i, length, c);
        if (c < 0) c = 0xFFFD;
        out.push_back({c, base + static_cast<std::size_t>(start),
                       static_cast<std::size_t>(i - start)});
    }
    return out;
}

bool is_space(UChar32 c) { return u_isUWhiteSpace(c); }

bool is_punct(UChar32 c) { return u_ispunct(c); }

bool is_closer(UChar32 c) {
    switch (c) {
        case '"': case '\'': case ')': case ']': case '}':
        case 0x2019: case 0x201D: case 0x00BB:
            return true;
        default:
            return false;
    }
}

bool is_opener(UChar32 c) {
    switch (c) {
        case '"': case '\'': case '(': case '[': case '{':
        case 0x2018: case 0x201C: case 0x00AB:
            return true;
        default:
            return false;
    }
}

bool is_terminal(UChar32 c) { return c == '.' || c == '!' || c == '?' || c == 0x2026; }

// Whitespace-delimited chunk [begin, end) of code point indices.
struct Chunk {
    std::size_t begin;
    std::size_t end;
};

std::vector<Chunk> chunks_of(const std::vector<CodePoint>& cps) {
    std::vector<Chunk> out;
    std::size_t i = 0;
    while (i < cps.size()) {
        while (i < cps.size() && is_space(cps[i].value)) ++i;
        if (i == cps.size()) break;
        const std::size_t b = i;
        while (i < cps.size() && !is_space(cps[i].value)) ++i;
        out.push_back({b, i});
    }
    return out;
}

std::string_view slice(std::string_view src, const std::vector<CodePoint>& cps,
                       std::size_t b, std::size_t e) {
    if (b >= e) return {};
    const std::size_t from = cps[b].offset;
    const std::size_t to = cps[e - 1].offset + cps[e - 1].length;
    return src.substr(from, to - from);
}

Span span_of(const std::vector<CodePoint>& cps, std::size_t b, std::size_t e) {
    return {cps[b].offset, cps[e - 1].offset + cps[e - 1].length};
}

void emit(TokenSeq& seq, const std::vector<CodePoint>& cps, std::size_t b, std::size_t e) {
    const Span s = span_of(cps, b, e);
    seq.tokens.push_back({seq.source.substr(s.begin, s.size()), s});
}

void tokenize_chunk(TokenSeq& seq, const std::vector<CodePoint>& cps, Chunk chunk,
                    const AbbreviationList& abbreviations) {
    const std::string_view src = seq.source;
    std::size_t i = chunk.begin;
    std::size_t j = chunk.end;

    // Leading punctuation; runs of one repeated mark ("...", "--") stay together.
    while (i < j && is_punct(cps[i].value) && !abbreviations.contains(slice(src, cps, i, j))) {
        std::size_t k = i + 1;
        while (k < j && cps[k].value == cps[i].value) ++k;
        emit(seq, cps, i, k);
        i = k;
    }

    std::vector<std::pair<std::size_t, std::size_t>> trailing;
    while (i < j && is_punct(cps[j - 1].value) && !abbreviations.contains(slice(src, cps, i, j))) {
        std::size_t k = j - 1;
        while (k > i && cps[k - 1].value == cps[j - 1].value) --k;
        trailing.emplace_back(k, j);
        j = k;
    }

    if (i < j) emit(seq, cps, i, j);
    for (auto it = trailing.rbegin(); it != trailing.rend(); ++it) emit(seq, cps, it->first, it->second);
}

// True when the chunk closes a sentence on its own terms (terminal mark,
// optionally followed by closing quotes or brackets, and not an abbreviation).
bool ends_sentence(std::string_view src, const std::vector<CodePoint>& cps, Chunk chunk,
                   const AbbreviationList& abbreviations) {
    std::size_t e = chunk.end;
    while (e > chunk.begin && is_closer(cps[e - 1].value)) --e;
    if (e == chunk.begin || !is_terminal(cps[e - 1].value)) return false;
    if (cps[e - 1].value != '.') return true;

    std::size_t b = chunk.begin;
    while (b < e && is_opener(cps[b].value)) ++b;
    return !abbreviations.contains(slice(src, cps, b, e));
}

bool starts_sentence(const std::vector<CodePoint>& cps, Chunk chunk) {
    const UChar32 c = cps[chunk.begin].value;
    return u_isupper(c) || u_istitle(c) || is_opener(c);
}

bool newline_between(const std::vector<CodePoint>& cps, std::size_t from, std::size_t to) {
    for (std::size_t k = from; k < to; ++k) {
        if (cps[k].value == '\n' || cps[k].value == 0x2029 || cps[k].value == 0x2028) return true;
    }
    return false;
}

}  // namespace

std::vector<std::string> TokenSeq::words() const {
    std::vector<std::string> out;
    out.reserve(tokens.size());
    for (const auto& t : tokens) out.push_back(t.text);
    return out;
}

AbbreviationList::AbbreviationList(std::vector<std::string> entries)
    : entries_(std::make_move_iterator(entries.begin()), std::make_move_iterator(entries.end())) {}

const AbbreviationList& AbbreviationList::defaults() {
    static const AbbreviationList list({"Mr.", "Mrs.", "Dr.", "U.S.", "St."});
    return list;
}

AbbreviationList AbbreviationList::from_file(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw std::runtime_error("cannot read abbreviation file: " + path.string());
    std::vector<std::string> entries;
    std::string line;
    while (std::getline(in, line)) {
        while (!line.empty() && (line.back() == '\r' || line.back() == ' ' || line.back() == '\t'))
            line.pop_back();
        const auto first = line.find_first_not_of(" \t");
        if (first == std::string::npos || line[first] == '#') continue;
        entries.push_back(nfc_normalize(line.substr(first)));
    }
    return AbbreviationList(std::move(entries));
}

bool AbbreviationList::contains(std::string_view token) const {
    if (token.empty() || entries_.empty()) return false;
    return entries_.find(std::string(token)) != entries_.end();
}

std::string nfc_normalize(std::string_view text) {
    UErrorCode status = U_ZERO_ERROR;
    const icu::Normalizer2* nfc = icu::Normalizer2::getNFCInstance(status);
    if (U_FAILURE(status)) throw std::runtime_error("ICU NFC normalizer unavailable");

    const auto input = icu::UnicodeString::fromUTF8(icu::StringPiece(text.data(), static_cast<int32_t>(text.size())));
    if (nfc->isNormalized(input, status) && U_SUCCESS(status)) return std::string(text);
    status = U_ZERO_ERROR;
    const icu::UnicodeString normalized = nfc->normalize(input, status);
    if (U_FAILURE(status)) throw std::runtime_error("NFC normalization failed");
    std::string out;
    normalized.toUTF8String(out);
    return out;
}

std::string fold_case(std::string_view text) {
    bool ascii = true;
    for (const char c : text) {
        if (static_cast<unsigned char>(c) >= 0x80) {
            ascii = false;
            break;
        }
    }
    if (ascii) {
        std::string out(text);
        for (auto& c : out) {
            if (c >= 'A' && c <= 'Z') c = static_cast<char>(c - 'A' + 'a');
        }
        return out;
    }
    auto u = icu::UnicodeString::fromUTF8(icu::StringPiece(text.data(), static_cast<int32_t>(text.size())));
    u.foldCase();
    std::string out;
    u.toUTF8String(out);
    return out;
}

TokenSeq tokenize(std::string_view text, const AbbreviationList& abbreviations) {
    TokenSeq seq;
    seq.source = nfc_normalize(text);
    const auto cps = decode(seq.source, 0);
    for (const Chunk chunk : chunks_of(cps)) tokenize_chunk(seq, cps, chunk, abbreviations);
    return seq;
}

SentenceSeq split_sentences(std::string_view text, const AbbreviationList& abbreviations,
                            SentenceOptions options) {
    SentenceSeq seq;
    seq.source = nfc_normalize(text);
    const std::string_view src = seq.source;
    const auto cps = decode(src, 0);
    const auto chunks = chunks_of(cps);

    std::size_t first = 0;  // index of the first chunk of the open sentence
    for (std::size_t c = 0; c < chunks.size(); ++c) {
        bool boundary = c + 1 == chunks.size();
        if (!boundary) {
            const Chunk next = chunks[c + 1];
            if (options.newline_is_boundary && newline_between(cps, chunks[c].end, next.begin)) {
                boundary = true;
            } else if (ends_sentence(src, cps, chunks[c], abbreviations) && starts_sentence(cps, next)) {
                boundary = true;
            }
        }
        if (boundary) {
            const Span s = span_of(cps, chunks[first].begin, chunks[c].end);
            seq.sentences.push_back({std::string(src.substr(s.begin, s.size())), s});
            first = c + 1;
        }
    }
    return seq;
}

std::size_t token_count(std::string_view text, const AbbreviationList& abbreviations) {
    return tokenize(text, abbreviations).size();
}

std::vector<std::string> folded_words(const TokenSeq& tokens) {
    std::vector<std::string> out;
    out.reserve(tokens.size());
    for (const auto& t : tokens.tokens) out.push_back(fold_case(t.text));
    return out;
}

}  // namespace codkit
