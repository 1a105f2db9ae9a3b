#pragma once

#include <cstddef>
#include <span>
#include <string>
#include <vector>

#include "codkit/textcore.hpp"

namespace codkit {

struct RougeScore {
    double precision = 0.0;
    double recall = 0.0;
    double f1 = 0.0;
    int n = 1;
};

/// Clipped n-gram overlap. Token comparison is exact on the given strings;
/// the TokenSeq overload case-folds first. Sides with no n-grams contribute
/// zero components. Throws std::invalid_argument when n < 1.
RougeScore rouge_n(std::span<const std::string> candidate, std::span<const std::string> reference, int n);
RougeScore rouge_n(const TokenSeq& candidate, const TokenSeq& reference, int n);

struct Fragment {
    std::size_t summary_start = 0;
    std::size_t article_start = 0;
    std::size_t length = 0;

    bool operator==(const Fragment&) const = default;
};

using FragmentSet = std::vector<Fragment>;

/// Greedy left-to-right scan of the summary: at each position take the
/// longest span that occurs contiguously in the article (earliest article
/// occurrence on ties), then skip past it; advance by one when nothing
/// matches.
FragmentSet extractive_fragments(std::span<const std::string> article, std::span<const std::string> summary);
FragmentSet extractive_fragments(const TokenSeq& article, const TokenSeq& summary);

/// (1/summary_len) * sum |f|^2. Throws DegenerateInput when summary_len <= 0.
double extractive_density(const FragmentSet& fragments, long summary_len);

/// (1/summary_len) * sum |f|. Throws DegenerateInput when summary_len <= 0.
double extractive_coverage(const FragmentSet& fragments, long summary_len);

}  // namespace codkit
