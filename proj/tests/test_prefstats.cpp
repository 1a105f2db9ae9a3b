#include <gtest/gtest.h>

#include <cmath>
#include <fstream>
#include <numeric>
#include <random>

#include "codkit/prefstats.hpp"
#include "support.hpp"

using namespace codkit;

namespace {

PreferenceBallot ballot(std::string article, std::string annotator, std::set<int> steps) {
    return {std::move(article), std::move(annotator), std::move(steps), 0, "t"};
}

// Independent Fleiss computation written from the textbook definition.
double fleiss_oracle(const std::vector<std::vector<double>>& m, double n) {
    const double items = static_cast<double>(m.size());
    const std::size_t k = m[0].size();
    double p_bar = 0.0;
    std::vector<double> p(k, 0.0);
    for (const auto& row : m) {
        double sq = 0.0;
        for (std::size_t j = 0; j < k; ++j) {
            sq += row[j] * row[j];
            p[j] += row[j];
        }
        p_bar += (sq - n) / (n * (n - 1));
    }
    p_bar /= items;
    double pe = 0.0;
    for (double pj : p) pe += (pj / (items * n)) * (pj / (items * n));
    return (p_bar - pe) / (1.0 - pe);
}

double pearson_oracle(const std::vector<double>& x, const std::vector<double>& y) {
    const double n = static_cast<double>(x.size());
    double sx = 0, sy = 0, sxx = 0, syy = 0, sxy = 0;
    for (std::size_t i = 0; i < x.size(); ++i) {
        sx += x[i];
        sy += y[i];
        sxx += x[i] * x[i];
        syy += y[i] * y[i];
        sxy += x[i] * y[i];
    }
    return (n * sxy - sx * sy) / std::sqrt((n * sxx - sx * sx) * (n * syy - sy * sy));
}

JudgedItem item(const std::string& id, Dimension d, std::optional<int> score) {
    JudgedItem j;
    j.summary_id = id;
    j.dimension = d;
    j.score = score;
    return j;
}

}  // namespace

TEST(Ballot, JsonRoundTripAndErrors) {
    PreferenceBallot b{"art", "ann", {2, 4}, 42, "2023-01-01T00:00:00Z"};
    EXPECT_EQ(ballot_from_json(nlohmann::json::parse(to_json(b).dump())), b);
    auto j = to_json(b);
    j["chosen_steps"] = nlohmann::json::array();
    EXPECT_THROW(ballot_from_json(j), std::invalid_argument);
    auto k = to_json(b);
    k.erase("annotator_id");
    EXPECT_THROW(ballot_from_json(k), std::invalid_argument);
}

TEST(Ballot, LoadReportsLine) {
    tsupport::TempDir dir;
    const auto path = dir / "b.jsonl";
    {
        std::ofstream f(path);
        f << to_json(ballot("a", "x", {1})).dump() << "\n\n{\"article_id\":\"b\"}\n";
    }
    try {
        load_ballots(path);
        FAIL() << "expected RowError";
    } catch (const RowError& e) {
        EXPECT_EQ(e.line(), 3u);
    }
}

TEST(VoteShares, SingleBallot) {
    const std::vector<PreferenceBallot> b = {ballot("a", "x", {2})};
    const auto t = vote_shares(b, 5);
    EXPECT_EQ(t.aggregate, (std::vector<double>{0, 100, 0, 0, 0}));
    EXPECT_EQ(t.annotators.at(0).shares, t.aggregate);
}

TEST(VoteShares, TiesFullPerAnnotatorSplitAggregate) {
    const std::vector<PreferenceBallot> b = {ballot("a", "x", {2}), ballot("b", "x", {2, 4})};
    const auto t = vote_shares(b, 5);
    ASSERT_EQ(t.annotators.size(), 1u);
    EXPECT_DOUBLE_EQ(t.annotators[0].shares[1], 100.0);
    EXPECT_DOUBLE_EQ(t.annotators[0].shares[3], 50.0);
    EXPECT_DOUBLE_EQ(t.aggregate[1], 75.0);
    EXPECT_DOUBLE_EQ(t.aggregate[3], 25.0);
    EXPECT_NEAR(std::accumulate(t.aggregate.begin(), t.aggregate.end(), 0.0), 100.0, 1e-9);
}

TEST(VoteShares, Errors) {
    EXPECT_THROW(vote_shares({}, 5), DegenerateInput);
    const std::vector<PreferenceBallot> bad = {ballot("a", "x", {6})};
    EXPECT_THROW(vote_shares(bad, 5), std::out_of_range);
    const std::vector<PreferenceBallot> zero = {ballot("a", "x", {0})};
    EXPECT_THROW(vote_shares(zero, 5), std::out_of_range);
}

TEST(VoteShares, AnnotatorsSorted) {
    const std::vector<PreferenceBallot> b = {ballot("a", "zed", {1}), ballot("a", "amy", {3})};
    const auto t = vote_shares(b, 3);
    EXPECT_EQ(t.annotators[0].annotator_id, "amy");
    EXPECT_EQ(t.annotators[1].annotator_id, "zed");
    EXPECT_EQ(t.total_ballots, 2u);
}

TEST(VoteShares, RandomAggregateSumsToHundred) {
    std::mt19937 rng(5);
    for (int round = 0; round < 200; ++round) {
        std::vector<PreferenceBallot> b;
        for (int i = 0, n = 1 + rng() % 30; i < n; ++i) {
            std::set<int> s;
            for (int c = 0, m = 1 + rng() % 3; c < m; ++c) s.insert(1 + rng() % 5);
            b.push_back(ballot("a" + std::to_string(i), std::to_string(rng() % 4), s));
        }
        const auto t = vote_shares(b, 5);
        EXPECT_NEAR(std::accumulate(t.aggregate.begin(), t.aggregate.end(), 0.0), 100.0, 1e-9);
        for (const auto& a : t.annotators) {
            EXPECT_GE(std::accumulate(a.shares.begin(), a.shares.end(), 0.0), 100.0 - 1e-9);
        }
    }
}

TEST(VoteShares, PublishedSharesFixture) {
    const auto b = load_ballots(tsupport::fixture("table2_ballots.jsonl"));
    const auto t = vote_shares(b, 5);
    const std::vector<std::vector<double>> published = {{3, 25, 22, 29, 21},
                                                    {2, 28, 28, 25, 17},
                                                    {13, 43, 21, 13, 10},
                                                    {17.4, 31.4, 24.4, 26.7, 16.3}};
    ASSERT_EQ(t.annotators.size(), 4u);
    for (std::size_t a = 0; a < 4; ++a) {
        for (std::size_t s = 0; s < 5; ++s) EXPECT_NEAR(t.annotators[a].shares[s], published[a][s], 0.05);
    }
    const std::vector<double> aggregate = {8.3, 30.8, 23.0, 22.5, 15.5};
    for (std::size_t s = 0; s < 5; ++s) EXPECT_NEAR(t.aggregate[s], aggregate[s], 0.2);
    const auto summary = step_summary(t.aggregate);
    EXPECT_EQ(summary.modal, 2);
    EXPECT_EQ(summary.median, 3);
    EXPECT_NEAR(summary.expected, 3.06, 0.01);
}

TEST(StepSummary, Basics) {
    const std::vector<double> all5 = {0, 0, 0, 0, 100};
    const auto s = step_summary(all5);
    EXPECT_EQ(s.modal, 5);
    EXPECT_EQ(s.median, 5);
    EXPECT_DOUBLE_EQ(s.expected, 5.0);
    const std::vector<double> tie = {50, 50};
    EXPECT_EQ(step_summary(tie).modal, 1);
    EXPECT_EQ(step_summary(tie).median, 1);
    EXPECT_DOUBLE_EQ(step_summary(tie).expected, 1.5);
    const std::vector<double> zero = {0, 0, 0};
    EXPECT_THROW(step_summary(zero), DegenerateInput);
}

TEST(Fleiss, PerfectAndOpposed) {
    EXPECT_NEAR(fleiss_kappa({{3, 0, 0}, {0, 3, 0}, {0, 0, 3}}, 3), 1.0, 1e-9);
    EXPECT_NEAR(fleiss_kappa({{2, 0}, {2, 0}}, 2), 1.0, 1e-9);
    EXPECT_NEAR(fleiss_kappa({{1, 1}, {1, 1}}, 2), -1.0, 1e-9);
}

TEST(Fleiss, MatchesOracleOnRandomMatrices) {
    std::mt19937 rng(9);
    for (int round = 0; round < 300; ++round) {
        const int raters = 2 + rng() % 4;
        const int items = 2 + rng() % 10;
        const int k = 2 + rng() % 4;
        std::vector<std::vector<double>> m(items, std::vector<double>(k, 0.0));
        for (auto& row : m) {
            for (int r = 0; r < raters; ++r) row[rng() % k] += 1.0;
        }
        std::vector<double> totals(k, 0.0);
        for (const auto& row : m)
            for (int j = 0; j < k; ++j) totals[j] += row[j];
        if (std::count_if(totals.begin(), totals.end(), [](double v) { return v > 0; }) < 2) continue;
        EXPECT_NEAR(fleiss_kappa(m, raters), fleiss_oracle(m, raters), 1e-9);
    }
}

TEST(Fleiss, Errors) {
    EXPECT_THROW(fleiss_kappa({{2, 0}}, 2), DegenerateInput);
    EXPECT_THROW(fleiss_kappa({{2}, {2}}, 2), DegenerateInput);
    EXPECT_THROW(fleiss_kappa({{1, 0}, {1, 0}}, 1), DegenerateInput);
    EXPECT_THROW(fleiss_kappa({{2, 0}, {1, 0}}, 2), DegenerateInput);
}

TEST(Fleiss, KappaMatrixKeepsFullyRatedArticles) {
    const std::vector<PreferenceBallot> b = {ballot("a", "x", {1}), ballot("a", "y", {1, 2}),
                                             ballot("b", "x", {2}), ballot("b", "y", {2}),
                                             ballot("c", "x", {3})};
    const auto k = kappa_matrix(b, 3);
    EXPECT_EQ(k.raters, 2);
    EXPECT_EQ(k.articles, (std::vector<std::string>{"a", "b"}));
    EXPECT_EQ(k.counts[0], (std::vector<double>{1.5, 0.5, 0.0}));
    EXPECT_EQ(k.counts[1], (std::vector<double>{0.0, 2.0, 0.0}));
}

TEST(Pearson, HandExample) {
    const std::vector<double> x = {1, 2, 3}, y = {1, 2, 2};
    EXPECT_NEAR(pearson(x, y), std::sqrt(3.0) / 2.0, 1e-12);
}

TEST(Pearson, AffineInvarianceAndOracle) {
    std::mt19937 rng(3);
    std::normal_distribution<double> g;
    for (int round = 0; round < 200; ++round) {
        const std::size_t n = 2 + rng() % 20;
        std::vector<double> x(n), y(n);
        for (std::size_t i = 0; i < n; ++i) {
            x[i] = g(rng);
            y[i] = 0.5 * x[i] + g(rng);
        }
        const double r = pearson(x, y);
        EXPECT_NEAR(r, pearson_oracle(x, y), 1e-9);
        EXPECT_LE(std::abs(r), 1.0 + 1e-12);
        const double a = 0.1 + std::abs(g(rng)) * 5, b = g(rng) * 100;
        std::vector<double> ax(n), neg(n);
        for (std::size_t i = 0; i < n; ++i) {
            ax[i] = a * x[i] + b;
            neg[i] = -a * y[i] + b;
        }
        EXPECT_NEAR(pearson(ax, y), r, 1e-9);
        EXPECT_NEAR(pearson(x, neg), -r, 1e-9);
        EXPECT_NEAR(pearson(y, x), r, 1e-12);
    }
}

TEST(Pearson, Degenerate) {
    const std::vector<double> a = {1, 2}, b = {1, 2, 3}, c = {4, 4}, one = {1};
    EXPECT_THROW(pearson(a, b), DegenerateInput);
    EXPECT_THROW(pearson(a, c), DegenerateInput);
    EXPECT_THROW(pearson(one, one), DegenerateInput);
}

TEST(Preferences, SplitCreditAndZeroSeeding) {
    const std::vector<PreferenceBallot> b = {ballot("a", "x", {1, 2}), ballot("a", "y", {2})};
    const auto p = preference_vector(b);
    EXPECT_DOUBLE_EQ(p.at("a#1"), 0.5);
    EXPECT_DOUBLE_EQ(p.at("a#2"), 1.5);
    EXPECT_EQ(p.count("a#3"), 0u);
    const std::vector<std::string> articles = {"a", "b"};
    const auto seeded = preference_vector(b, articles, 3);
    EXPECT_EQ(seeded.size(), 6u);
    EXPECT_DOUBLE_EQ(seeded.at("b#3"), 0.0);
    EXPECT_DOUBLE_EQ(seeded.at("a#2"), 1.5);
}

TEST(MetaEval, JoinsOnSummaryId) {
    const std::map<std::string, double> prefs = {{"a#1", 0}, {"a#2", 2}, {"a#3", 1}, {"b#1", 3}};
    const std::vector<JudgedItem> scores = {
        item("a#1", Dimension::Overall, 3), item("a#2", Dimension::Overall, 5),
        item("a#3", Dimension::Overall, 4), item("b#1", Dimension::Overall, std::nullopt),
        item("zz#1", Dimension::Overall, 1), item("a#1", Dimension::Quality, 2),
        item("a#2", Dimension::Quality, 4)};
    const auto rows = meta_eval(prefs, scores);
    ASSERT_EQ(rows.size(), 2u);
    for (const auto& r : rows) {
        if (r.dimension == Dimension::Overall) {
            EXPECT_EQ(r.n, 3u);
            EXPECT_NEAR(r.correlation, 1.0, 1e-12);
        } else {
            EXPECT_EQ(r.n, 2u);
            EXPECT_NEAR(r.correlation, 1.0, 1e-12);
        }
    }
}

TEST(MetaEval, Errors) {
    const std::map<std::string, double> prefs = {{"a#1", 1}};
    const std::vector<JudgedItem> none = {item("b#1", Dimension::Overall, 3)};
    EXPECT_THROW(meta_eval(prefs, none), DegenerateInput);
    const std::vector<JudgedItem> single = {item("a#1", Dimension::Overall, 3)};
    EXPECT_THROW(meta_eval(prefs, single), DegenerateInput);
}
