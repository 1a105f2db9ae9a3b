#include "codkit/align.hpp"

#include <algorithm>
#include <stdexcept>
#include <unordered_map>

#include "codkit/errors.hpp"

namespace codkit {

namespace {

// Scores within this distance are ties; the lower source index wins.
constexpr double kTieEpsilon = 1e-12;

struct GramOverlap {
    std::size_t overlap = 0;
    std::size_t candidate = 0;
    std::size_t target = 0;
};

GramOverlap unigram_overlap(std::span<const std::uint32_t> cand, std::span<const std::uint32_t> target) {
    std::unordered_map<std::uint32_t, long> counts;
    for (const auto id : target) ++counts[id];
    GramOverlap g{0, cand.size(), target.size()};
    for (const auto id : cand) {
        if (auto it = counts.find(id); it != counts.end() && it->second > 0) {
            --it->second;
            ++g.overlap;
        }
    }
    return g;
}

GramOverlap bigram_overlap(std::span<const std::uint32_t> cand, std::span<const std::uint32_t> target) {
    const auto key = [](std::uint32_t a, std::uint32_t b) { return (std::uint64_t{a} << 32) | b; };
    std::unordered_map<std::uint64_t, long> counts;
    for (std::size_t i = 0; i + 1 < target.size(); ++i) ++counts[key(target[i], target[i + 1])];
    GramOverlap g{0, cand.size() > 0 ? cand.size() - 1 : 0, target.size() > 0 ? target.size() - 1 : 0};
    for (std::size_t i = 0; i + 1 < cand.size(); ++i) {
        if (auto it = counts.find(key(cand[i], cand[i + 1])); it != counts.end() && it->second > 0) {
            --it->second;
            ++g.overlap;
        }
    }
    return g;
}

double f1(const GramOverlap& g) {
    if (g.overlap == 0) return 0.0;
    return 2.0 * static_cast<double>(g.overlap) / static_cast<double>(g.candidate + g.target);
}

double recall(const GramOverlap& g) {
    if (g.target == 0) return 0.0;
    return static_cast<double>(g.overlap) / static_cast<double>(g.target);
}

}  // namespace

AlignScorer rouge12_f1_scorer() {
    return [](std::span<const std::uint32_t> cand, std::span<const std::uint32_t> target) {
        return 0.5 * (f1(unigram_overlap(cand, target)) + f1(bigram_overlap(cand, target)));
    };
}

AlignScorer rouge12_recall_scorer() {
    return [](std::span<const std::uint32_t> cand, std::span<const std::uint32_t> target) {
        return 0.5 * (recall(unigram_overlap(cand, target)) + recall(bigram_overlap(cand, target)));
    };
}

AlignScorer scorer_by_name(std::string_view name) {
    if (name == "rouge12-f1") return rouge12_f1_scorer();
    if (name == "rouge12-recall") return rouge12_recall_scorer();
    throw std::invalid_argument("unknown alignment scorer '" + std::string(name) +
                                "' (expected rouge12-f1 or rouge12-recall)");
}

SentenceAligner::SentenceAligner(const SentenceSeq& source, AlignOptions options)
    : options_(std::move(options)) {
    if (source.empty()) throw DegenerateInput("alignment needs at least one source sentence");
    const AbbreviationList& abbrevs =
        options_.abbreviations ? *options_.abbreviations : AbbreviationList::defaults();
    source_ids_.reserve(source.size());
    for (const auto& s : source.sentences) source_ids_.push_back(encode(tokenize(s.text, abbrevs)));
}

std::vector<std::uint32_t> SentenceAligner::encode(const TokenSeq& tokens) {
    std::vector<std::uint32_t> ids;
    ids.reserve(tokens.size());
    for (const auto& t : tokens.tokens) {
        const auto [it, inserted] =
            vocabulary_.try_emplace(fold_case(t.text), static_cast<std::uint32_t>(vocabulary_.size()));
        ids.push_back(it->second);
    }
    return ids;
}

std::vector<std::size_t> SentenceAligner::align(std::string_view target_sentence) {
    const AbbreviationList& abbrevs =
        options_.abbreviations ? *options_.abbreviations : AbbreviationList::defaults();
    const std::vector<std::uint32_t> target = encode(tokenize(target_sentence, abbrevs));

    const std::size_t n = source_ids_.size();
    const std::size_t cap = std::min(options_.max_selected, n);
    std::vector<std::size_t> selected;
    std::vector<bool> taken(n, false);
    std::vector<std::uint32_t> candidate;
    double current = 0.0;

    while (selected.size() < cap) {
        std::optional<std::size_t> best_index;
        double best_score = 0.0;
        for (std::size_t s = 0; s < n; ++s) {
            if (taken[s]) continue;
            candidate.clear();
            for (std::size_t k = 0; k < n; ++k) {
                if (taken[k] || k == s) candidate.insert(candidate.end(), source_ids_[k].begin(), source_ids_[k].end());
            }
            const double score = options_.scorer(candidate, target);
            if (!best_index || score > best_score + kTieEpsilon) {
                best_index = s;
                best_score = score;
            }
        }
        if (!best_index || best_score - current <= options_.min_gain) break;
        taken[*best_index] = true;
        selected.push_back(*best_index);
        current = best_score;
    }
    return selected;
}

AlignmentMap SentenceAligner::align_all(const SentenceSeq& summary) {
    AlignmentMap out;
    out.reserve(summary.size());
    for (const auto& s : summary.sentences) out.push_back(align(s.text));
    return out;
}

std::vector<std::size_t> align_sentence(const SentenceSeq& source, std::string_view target_sentence,
                                        const AlignOptions& options) {
    return SentenceAligner(source, options).align(target_sentence);
}

AlignmentMap align_summary(const SentenceSeq& source, const SentenceSeq& summary, const AlignOptions& options) {
    return SentenceAligner(source, options).align_all(summary);
}

double fusion_score(const AlignmentMap& alignments) {
    if (alignments.empty()) throw DegenerateInput("fusion needs at least one summary sentence");
    std::size_t total = 0;
    for (const auto& a : alignments) total += a.size();
    return static_cast<double>(total) / static_cast<double>(alignments.size());
}

double fusion_score(const SentenceSeq& source, const SentenceSeq& summary, const AlignOptions& options) {
    if (summary.empty()) throw DegenerateInput("fusion needs at least one summary sentence");
    return fusion_score(align_summary(source, summary, options));
}

std::optional<ContentRank> content_distribution(const AlignmentMap& alignments, std::size_t n_source) {
    std::size_t count = 0;
    double rank_sum = 0.0;
    double norm_sum = 0.0;
    for (const auto& sentence : alignments) {
        for (const auto index : sentence) {
            if (index >= n_source) throw std::out_of_range("aligned index beyond source length");
            ++count;
            rank_sum += static_cast<double>(index + 1);
            if (n_source > 1) norm_sum += static_cast<double>(index) / static_cast<double>(n_source - 1);
        }
    }
    if (count == 0) return std::nullopt;
    return ContentRank{rank_sum / static_cast<double>(count), norm_sum / static_cast<double>(count)};
}

std::optional<ContentRank> content_distribution(const SentenceSeq& source, const SentenceSeq& summary,
                                                const AlignOptions& options) {
    if (summary.empty()) throw DegenerateInput("content distribution needs at least one summary sentence");
    return content_distribution(align_summary(source, summary, options), source.size());
}

IndirectStats indirect_stats(const SentenceSeq& source, const SentenceSeq& summary, const AlignOptions& options) {
    if (summary.empty()) throw DegenerateInput("indirect statistics need at least one summary sentence");
    IndirectStats stats;
    stats.alignments = align_summary(source, summary, options);
    stats.fusion = fusion_score(stats.alignments);
    stats.content = content_distribution(stats.alignments, source.size());
    return stats;
}

}  // namespace codkit
