#include <gtest/gtest.h>

#include <algorithm>
#include <random>
#include <set>

#include "codkit/align.hpp"
#include "codkit/errors.hpp"
#include "codkit/overlap.hpp"

using namespace codkit;

namespace {

SentenceSeq make_source(const std::vector<std::string>& sentences) {
    SentenceSeq seq;
    for (const auto& s : sentences) seq.sentences.push_back({s, {}});
    return seq;
}

std::vector<std::string> folded(std::string_view text) { return folded_words(tokenize(text)); }

double oracle_score(const std::vector<std::string>& source, const std::vector<std::size_t>& picked,
                    const std::vector<std::string>& target) {
    std::vector<std::size_t> order = picked;
    std::sort(order.begin(), order.end());
    std::vector<std::string> words;
    for (const auto i : order) {
        const auto w = folded(source[i]);
        words.insert(words.end(), w.begin(), w.end());
    }
    return 0.5 * (rouge_n(words, target, 1).f1 + rouge_n(words, target, 2).f1);
}

// Greedy replay with string-keyed ROUGE.
std::vector<std::size_t> greedy_oracle(const std::vector<std::string>& source, std::string_view target_text) {
    const auto target = folded(target_text);
    std::vector<std::size_t> picked;
    double current = 0.0;
    const std::size_t cap = std::min<std::size_t>(10, source.size());
    while (picked.size() < cap) {
        std::optional<std::size_t> best;
        double best_score = 0.0;
        for (std::size_t s = 0; s < source.size(); ++s) {
            if (std::find(picked.begin(), picked.end(), s) != picked.end()) continue;
            auto trial = picked;
            trial.push_back(s);
            const double score = oracle_score(source, trial, target);
            if (!best || score > best_score + 1e-12) {
                best = s;
                best_score = score;
            }
        }
        if (!best || best_score - current <= 1e-9) break;
        picked.push_back(*best);
        current = best_score;
    }
    return picked;
}

std::set<std::size_t> best_subset_oracle(const std::vector<std::string>& source, std::string_view target_text) {
    const auto target = folded(target_text);
    std::set<std::size_t> best;
    double best_score = 0.0;
    for (unsigned mask = 1; mask < (1u << source.size()); ++mask) {
        std::vector<std::size_t> picked;
        for (std::size_t i = 0; i < source.size(); ++i) {
            if (mask & (1u << i)) picked.push_back(i);
        }
        const double score = oracle_score(source, picked, target);
        if (score > best_score + 1e-12) {
            best_score = score;
            best = {picked.begin(), picked.end()};
        }
    }
    return best;
}

}  // namespace

TEST(AlignSentence, EmptySourceThrows) {
    EXPECT_THROW(align_sentence(SentenceSeq{}, "anything"), DegenerateInput);
}

TEST(AlignSentence, ExactCopy) {
    const auto source = make_source({"Rain hit the coast.", "Officials closed roads.", "Schools reopened Friday."});
    for (std::size_t k = 0; k < source.size(); ++k) {
        EXPECT_EQ(align_sentence(source, source[k].text), std::vector<std::size_t>{k});
    }
}

TEST(AlignSentence, NoSharedTokens) {
    const auto source = make_source({"alpha beta", "gamma delta"});
    EXPECT_TRUE(align_sentence(source, "omega psi").empty());
}

TEST(AlignSentence, ConcatenationMatchesBestSubset) {
    const std::vector<std::string> sentences = {"red green blue", "apples pears plums figs", "cats dogs mice",
                                                "rivers lakes seas oceans", "north south east"};
    const std::string target = sentences[1] + " " + sentences[3];
    const auto got = align_sentence(make_source(sentences), target);
    const std::set<std::size_t> as_set(got.begin(), got.end());
    EXPECT_EQ(as_set, (std::set<std::size_t>{1, 3}));
    EXPECT_EQ(as_set, best_subset_oracle(sentences, target));
}

TEST(AlignSentence, TiesPickLowestIndex) {
    const auto source = make_source({"storm damage", "storm damage", "unrelated words"});
    EXPECT_EQ(align_sentence(source, "storm damage"), std::vector<std::size_t>{0});
}

TEST(AlignSentence, CapLimitsSelection) {
    std::vector<std::string> sentences;
    std::string target;
    for (int i = 0; i < 14; ++i) {
        sentences.push_back("w" + std::to_string(i));
        target += "w" + std::to_string(i) + " ";
    }
    AlignOptions options;
    EXPECT_EQ(align_sentence(make_source(sentences), target, options).size(), 10u);
    options.max_selected = 3;
    EXPECT_EQ(align_sentence(make_source(sentences), target, options).size(), 3u);
}

TEST(AlignSentence, MatchesGreedyOracleAndGainsArePositive) {
    std::mt19937 rng(5);
    const std::vector<std::string> vocab = {"a", "b", "c", "d", "e", "f", "g"};
    const auto random_sentence = [&](std::size_t max_len) {
        std::string s;
        const std::size_t n = 1 + rng() % max_len;
        for (std::size_t i = 0; i < n; ++i) s += vocab[rng() % vocab.size()] + " ";
        return s;
    };
    for (int round = 0; round < 500; ++round) {
        std::vector<std::string> sentences(1 + rng() % 6);
        for (auto& s : sentences) s = random_sentence(6);
        const std::string target = random_sentence(9);
        const auto got = align_sentence(make_source(sentences), target);
        ASSERT_EQ(got, greedy_oracle(sentences, target)) << "round " << round;

        const auto t = folded(target);
        double last = 0.0;
        std::vector<std::size_t> prefix;
        for (const auto i : got) {
            prefix.push_back(i);
            const double score = oracle_score(sentences, prefix, t);
            EXPECT_GT(score - last, 1e-9);
            last = score;
        }
    }
}

TEST(AlignSentence, RecallScorerSelectsSupersets) {
    AlignOptions options;
    options.scorer = scorer_by_name("rouge12-recall");
    const auto source = make_source({"a b c d e f", "x y"});
    EXPECT_EQ(align_sentence(source, "a b", options), std::vector<std::size_t>{0});
    EXPECT_THROW(scorer_by_name("rouge-l"), std::invalid_argument);
}

TEST(Fusion, Examples) {
    EXPECT_DOUBLE_EQ(fusion_score(AlignmentMap{{0}}), 1.0);
    EXPECT_DOUBLE_EQ(fusion_score(AlignmentMap{{2}, {0, 1, 4}}), 2.0);
    EXPECT_DOUBLE_EQ(fusion_score(AlignmentMap{{}, {1, 2}}), 1.0);
    EXPECT_THROW(fusion_score(AlignmentMap{}), DegenerateInput);
}

TEST(Fusion, FromTexts) {
    const auto source = split_sentences("Rain hit the coast. Officials closed roads. Schools reopened Friday.");
    const auto summary = split_sentences("Rain hit the coast. Officials closed roads and schools reopened Friday.");
    const double f = fusion_score(source, summary);
    EXPECT_GE(f, 0.0);
    EXPECT_LE(f, static_cast<double>(source.size()));
    EXPECT_THROW(fusion_score(source, SentenceSeq{}), DegenerateInput);
}

TEST(ContentDistribution, PureLead) {
    const auto r = content_distribution(AlignmentMap{{0}, {0}}, 5);
    ASSERT_TRUE(r);
    EXPECT_DOUBLE_EQ(r->mean_rank, 1.0);
    EXPECT_DOUBLE_EQ(r->normalized_rank, 0.0);
}

TEST(ContentDistribution, UniformCoverage) {
    for (std::size_t n = 1; n <= 9; ++n) {
        AlignmentMap map;
        for (std::size_t i = 0; i < n; ++i) map.push_back({i});
        const auto r = content_distribution(map, n);
        ASSERT_TRUE(r);
        EXPECT_DOUBLE_EQ(r->mean_rank, (static_cast<double>(n) + 1) / 2);
        EXPECT_DOUBLE_EQ(r->normalized_rank, n == 1 ? 0.0 : 0.5);
    }
}

TEST(ContentDistribution, SingleSourceSentence) {
    const auto r = content_distribution(AlignmentMap{{0}}, 1);
    ASSERT_TRUE(r);
    EXPECT_EQ(r->normalized_rank, 0.0);
}

TEST(ContentDistribution, NothingAlignedIsUndefined) {
    EXPECT_FALSE(content_distribution(AlignmentMap{{}, {}}, 4));
}

TEST(ContentDistribution, OutOfRangeIndex) {
    EXPECT_THROW(content_distribution(AlignmentMap{{7}}, 3), std::out_of_range);
}

TEST(IndirectStats, ConsistentWithParts) {
    const auto source = split_sentences("Rain hit the coast. Officials closed roads. Schools reopened Friday.");
    const auto summary = split_sentences("Schools reopened Friday. Rain hit the coast.");
    const auto stats = indirect_stats(source, summary);
    EXPECT_EQ(stats.alignments, align_summary(source, summary));
    EXPECT_DOUBLE_EQ(stats.fusion, fusion_score(stats.alignments));
    ASSERT_TRUE(stats.content);
    EXPECT_DOUBLE_EQ(stats.content->mean_rank, 2.0);
}
