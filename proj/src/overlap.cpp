#include "codkit/overlap.hpp"

#include <algorithm>
#include <map>
#include <stdexcept>
#include <string_view>

#include "codkit/errors.hpp"

namespace codkit {

namespace {

using Gram = std::vector<std::string_view>;

std::map<Gram, std::size_t> count_grams(std::span<const std::string> tokens, std::size_t n) {
    std::map<Gram, std::size_t> counts;
    if (tokens.size() < n) return counts;
    for (std::size_t i = 0; i + n <= tokens.size(); ++i) {
        Gram g(tokens.begin() + static_cast<std::ptrdiff_t>(i),
               tokens.begin() + static_cast<std::ptrdiff_t>(i + n));
        ++counts[std::move(g)];
    }
    return counts;
}

}  // namespace

RougeScore rouge_n(std::span<const std::string> candidate, std::span<const std::string> reference, int n) {
    if (n < 1) throw std::invalid_argument("rouge_n: n must be >= 1");
    const auto order = static_cast<std::size_t>(n);
    const auto cand = count_grams(candidate, order);
    const auto ref = count_grams(reference, order);

    std::size_t cand_total = 0;
    std::size_t ref_total = 0;
    std::size_t overlap = 0;
    for (const auto& [g, c] : cand) cand_total += c;
    for (const auto& [g, c] : ref) {
        ref_total += c;
        if (const auto it = cand.find(g); it != cand.end()) overlap += std::min(c, it->second);
    }

    RougeScore score;
    score.n = n;
    if (cand_total > 0) score.precision = static_cast<double>(overlap) / static_cast<double>(cand_total);
    if (ref_total > 0) score.recall = static_cast<double>(overlap) / static_cast<double>(ref_total);
    // 2PR/(P+R) reduces to 2*overlap/(|cand|+|ref|) whenever both sides are non-empty.
    if (overlap > 0)
        score.f1 = 2.0 * static_cast<double>(overlap) / static_cast<double>(cand_total + ref_total);
    return score;
}

RougeScore rouge_n(const TokenSeq& candidate, const TokenSeq& reference, int n) {
    const auto c = folded_words(candidate);
    const auto r = folded_words(reference);
    return rouge_n(c, r, n);
}

FragmentSet extractive_fragments(std::span<const std::string> article, std::span<const std::string> summary) {
    const std::size_t a = article.size();
    const std::size_t s = summary.size();
    FragmentSet out;
    if (a == 0 || s == 0) return out;

    // lcp[i][j]: length of the common run starting at summary i / article j.
    std::vector<std::size_t> lcp((s + 1) * (a + 1), 0);
    const auto at = [a](std::size_t i, std::size_t j) { return i * (a + 1) + j; };
    for (std::size_t i = s; i-- > 0;) {
        for (std::size_t j = a; j-- > 0;) {
            if (summary[i] == article[j]) lcp[at(i, j)] = lcp[at(i + 1, j + 1)] + 1;
        }
    }

    std::size_t i = 0;
    while (i < s) {
        std::size_t best_len = 0;
        std::size_t best_pos = 0;
        for (std::size_t j = 0; j < a; ++j) {
            if (lcp[at(i, j)] > best_len) {
                best_len = lcp[at(i, j)];
                best_pos = j;
            }
        }
        if (best_len == 0) {
            ++i;
            continue;
        }
        out.push_back({i, best_pos, best_len});
        i += best_len;
    }
    return out;
}

FragmentSet extractive_fragments(const TokenSeq& article, const TokenSeq& summary) {
    const auto a = folded_words(article);
    const auto s = folded_words(summary);
    return extractive_fragments(a, s);
}

double extractive_density(const FragmentSet& fragments, long summary_len) {
    if (summary_len <= 0) throw DegenerateInput("extractive density needs a positive summary length");
    double sum = 0.0;
    for (const auto& f : fragments) sum += static_cast<double>(f.length) * static_cast<double>(f.length);
    return sum / static_cast<double>(summary_len);
}

double extractive_coverage(const FragmentSet& fragments, long summary_len) {
    if (summary_len <= 0) throw DegenerateInput("extractive coverage needs a positive summary length");
    double sum = 0.0;
    for (const auto& f : fragments) sum += static_cast<double>(f.length);
    return sum / static_cast<double>(summary_len);
}

}  // namespace codkit
