#pragma once

#include <cstdint>
#include <functional>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

#include "codkit/textcore.hpp"

namespace codkit {

/// Scores a candidate token-id sequence against a target; larger is better.
/// Ids come from a per-document vocabulary of case-folded tokens.
using AlignScorer =
    std::function<double(std::span<const std::uint32_t> candidate, std::span<const std::uint32_t> target)>;

/// Mean of ROUGE-1 F1 and ROUGE-2 F1 (the default).
AlignScorer rouge12_f1_scorer();
/// Mean of ROUGE-1 recall and ROUGE-2 recall.
AlignScorer rouge12_recall_scorer();
/// "rouge12-f1" or "rouge12-recall"; throws std::invalid_argument otherwise.
AlignScorer scorer_by_name(std::string_view name);

struct AlignOptions {
    AlignScorer scorer = rouge12_f1_scorer();
    std::size_t max_selected = 10;
    /// A candidate is accepted only when its gain exceeds this.
    double min_gain = 1e-9;
    const AbbreviationList* abbreviations = nullptr;  // null: defaults
};

/// Per summary sentence, the aligned source-sentence indices in selection order.
using AlignmentMap = std::vector<std::vector<std::size_t>>;

/// Greedy relative-gain aligner over one source document. Candidate sets are
/// scored on the selected sentences concatenated in document order.
class SentenceAligner {
public:
    /// Throws DegenerateInput when `source` has no sentences.
    SentenceAligner(const SentenceSeq& source, AlignOptions options = {});

    std::vector<std::size_t> align(std::string_view target_sentence);
    AlignmentMap align_all(const SentenceSeq& summary);

    std::size_t source_size() const { return source_ids_.size(); }

private:
    std::vector<std::uint32_t> encode(const TokenSeq& tokens);

    AlignOptions options_;
    std::vector<std::vector<std::uint32_t>> source_ids_;
    std::unordered_map<std::string, std::uint32_t> vocabulary_;
};

std::vector<std::size_t> align_sentence(const SentenceSeq& source, std::string_view target_sentence,
                                        const AlignOptions& options = {});

AlignmentMap align_summary(const SentenceSeq& source, const SentenceSeq& summary,
                           const AlignOptions& options = {});

/// Mean number of aligned source sentences per summary sentence. Throws
/// DegenerateInput on an empty map.
double fusion_score(const AlignmentMap& alignments);
double fusion_score(const SentenceSeq& source, const SentenceSeq& summary, const AlignOptions& options = {});

struct ContentRank {
    double mean_rank = 0.0;        // 1-based
    double normalized_rank = 0.0;  // (rank-1)/(n_source-1); 0 when n_source == 1
};

/// Pools every aligned index (with multiplicity across summary sentences).
/// Empty when nothing aligned anywhere.
std::optional<ContentRank> content_distribution(const AlignmentMap& alignments, std::size_t n_source);
std::optional<ContentRank> content_distribution(const SentenceSeq& source, const SentenceSeq& summary,
                                                const AlignOptions& options = {});

struct IndirectStats {
    double fusion = 0.0;
    std::optional<ContentRank> content;
    AlignmentMap alignments;
};

IndirectStats indirect_stats(const SentenceSeq& source, const SentenceSeq& summary,
                             const AlignOptions& options = {});

}  // namespace codkit
