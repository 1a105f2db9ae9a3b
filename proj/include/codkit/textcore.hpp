#pragma once

#include <cstddef>
#include <filesystem>
#include <string>
#include <string_view>
#include <unordered_set>
#include <vector>

namespace codkit {

/// Half-open byte range [begin, end) into a normalized source string.
struct Span {
    std::size_t begin = 0;
    std::size_t end = 0;

    std::size_t size() const { return end - begin; }
    bool operator==(const Span&) const = default;
};

struct Token {
    std::string text;
    Span span;
};

/// Tokens of one text. `source` is the NFC-normalized input; every span
/// indexes into it, so `source.substr(span)` reproduces the token verbatim.
struct TokenSeq {
    std::string source;
    std::vector<Token> tokens;

    std::size_t size() const { return tokens.size(); }
    bool empty() const { return tokens.empty(); }
    std::vector<std::string> words() const;
};

struct Sentence {
    std::string text;
    Span span;
};

struct SentenceSeq {
    std::string source;
    std::vector<Sentence> sentences;

    std::size_t size() const { return sentences.size(); }
    bool empty() const { return sentences.empty(); }
    const Sentence& operator[](std::size_t i) const { return sentences[i]; }
};

/// Tokens that keep their trailing period ("Mr.", "U.S.") and never end a
/// sentence. Matching is exact and case-sensitive.
class AbbreviationList {
public:
    AbbreviationList() = default;
    explicit AbbreviationList(std::vector<std::string> entries);

    /// Mr., Mrs., Dr., U.S., St.
    static const AbbreviationList& defaults();

    /// One abbreviation per line; blank lines and lines starting with '#'
    /// are skipped. Throws std::runtime_error when the file cannot be read.
    static AbbreviationList from_file(const std::filesystem::path& path);

    bool contains(std::string_view token) const;
    std::size_t size() const { return entries_.size(); }

private:
    std::unordered_set<std::string> entries_;
};

struct SentenceOptions {
    /// A line break between two chunks always closes the current sentence.
    /// News corpora store one paragraph or bullet per line.
    bool newline_is_boundary = true;
};

std::string nfc_normalize(std::string_view text);

/// Unicode simple case folding; used for every case-insensitive comparison
/// in the metrics layer.
std::string fold_case(std::string_view text);

TokenSeq tokenize(std::string_view text,
                  const AbbreviationList& abbreviations = AbbreviationList::defaults());

SentenceSeq split_sentences(std::string_view text,
                            const AbbreviationList& abbreviations = AbbreviationList::defaults(),
                            SentenceOptions options = {});

std::size_t token_count(std::string_view text,
                        const AbbreviationList& abbreviations = AbbreviationList::defaults());

/// Case-folded token strings, the comparison form used by ROUGE and fragments.
std::vector<std::string> folded_words(const TokenSeq& tokens);

}  // namespace codkit
