#include "codkit/prefstats.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <stdexcept>

#include "codkit/errors.hpp"

namespace codkit {

using nlohmann::json;

namespace {

void check_step(int step, int n_steps) {
    if (step < 1 || step > n_steps)
        throw std::out_of_range("ballot names step " + std::to_string(step) + " outside 1.." +
                                std::to_string(n_steps));
}

}  // namespace

json to_json(const PreferenceBallot& b) {
    return {
        {"article_id", b.article_id},
        {"annotator_id", b.annotator_id},
        {"chosen_steps", std::vector<int>(b.chosen_steps.begin(), b.chosen_steps.end())},
        {"ts", b.ts},
        {"blinding_seed", b.blinding_seed},
    };
}

PreferenceBallot ballot_from_json(const json& j) {
    if (!j.is_object()) throw std::invalid_argument("ballot must be a JSON object");
    for (const char* key : {"article_id", "annotator_id", "chosen_steps"}) {
        if (!j.contains(key)) throw std::invalid_argument(std::string("ballot lacks \"") + key + "\"");
    }
    PreferenceBallot b;
    b.article_id = j["article_id"].is_string() ? j["article_id"].get<std::string>() : j["article_id"].dump();
    b.annotator_id = j["annotator_id"].is_string() ? j["annotator_id"].get<std::string>() : j["annotator_id"].dump();
    for (const auto& s : j["chosen_steps"]) b.chosen_steps.insert(s.get<int>());
    if (b.chosen_steps.empty()) throw std::invalid_argument("ballot has an empty chosen_steps set");
    b.ts = j.value("ts", std::string());
    b.blinding_seed = j.value("blinding_seed", std::uint64_t{0});
    return b;
}

std::vector<PreferenceBallot> load_ballots(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw Error("cannot read ballots: " + path.string());
    std::vector<PreferenceBallot> out;
    std::string line;
    std::size_t line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
        try {
            out.push_back(ballot_from_json(json::parse(line)));
        } catch (const std::exception& e) {
            throw RowError(line_no, e.what());
        }
    }
    return out;
}

VoteShareTable vote_shares(std::span<const PreferenceBallot> ballots, int n_steps) {
    if (ballots.empty()) throw DegenerateInput("vote shares need at least one ballot");
    if (n_steps < 1) throw std::invalid_argument("n_steps must be >= 1");

    const auto n = static_cast<std::size_t>(n_steps);
    std::map<std::string, std::pair<std::size_t, std::vector<double>>> per_annotator;
    std::vector<double> aggregate(n, 0.0);
    for (const auto& b : ballots) {
        if (b.chosen_steps.empty()) throw DegenerateInput("ballot with no chosen step");
        auto& [count, named] = per_annotator[b.annotator_id];
        if (named.empty()) named.assign(n, 0.0);
        ++count;
        const double credit = 1.0 / static_cast<double>(b.chosen_steps.size());
        for (const int s : b.chosen_steps) {
            check_step(s, n_steps);
            named[static_cast<std::size_t>(s - 1)] += 1.0;
            aggregate[static_cast<std::size_t>(s - 1)] += credit;
        }
    }

    VoteShareTable table;
    table.n_steps = n_steps;
    table.total_ballots = ballots.size();
    for (auto& [id, acc] : per_annotator) {
        AnnotatorShares a{id, acc.first, std::move(acc.second)};
        for (auto& v : a.shares) v = 100.0 * v / static_cast<double>(a.ballots);
        table.annotators.push_back(std::move(a));
    }
    for (auto& v : aggregate) v = 100.0 * v / static_cast<double>(ballots.size());
    table.aggregate = std::move(aggregate);
    return table;
}

StepSummary step_summary(std::span<const double> shares) {
    double total = 0.0;
    for (const double s : shares) {
        if (s < 0) throw std::invalid_argument("negative share");
        total += s;
    }
    if (shares.empty() || total <= 0.0) throw DegenerateInput("step summary of all-zero shares");

    StepSummary out;
    const auto modal = std::max_element(shares.begin(), shares.end());
    out.modal = static_cast<int>(modal - shares.begin()) + 1;

    double cumulative = 0.0;
    out.median = static_cast<int>(shares.size());
    for (std::size_t i = 0; i < shares.size(); ++i) {
        cumulative += shares[i];
        if (cumulative >= 50.0 - 1e-9) {
            out.median = static_cast<int>(i) + 1;
            break;
        }
    }
    for (std::size_t i = 0; i < shares.size(); ++i) out.expected += static_cast<double>(i + 1) * shares[i];
    out.expected /= 100.0;
    return out;
}

double fleiss_kappa(const std::vector<std::vector<double>>& counts, double raters) {
    if (counts.size() < 2) throw DegenerateInput("Fleiss' kappa needs at least 2 items");
    if (raters < 2) throw DegenerateInput("Fleiss' kappa needs at least 2 raters per item");
    const std::size_t k = counts.front().size();
    if (k < 2) throw DegenerateInput("Fleiss' kappa needs at least 2 categories");

    const double items = static_cast<double>(counts.size());
    std::vector<double> column(k, 0.0);
    double p_bar = 0.0;
    for (std::size_t i = 0; i < counts.size(); ++i) {
        const auto& row = counts[i];
        if (row.size() != k) throw DegenerateInput("ragged count matrix at row " + std::to_string(i));
        double sum = 0.0;
        double squares = 0.0;
        for (std::size_t j = 0; j < k; ++j) {
            if (row[j] < 0) throw DegenerateInput("negative count at row " + std::to_string(i));
            sum += row[j];
            squares += row[j] * row[j];
            column[j] += row[j];
        }
        if (std::abs(sum - raters) > 1e-9)
            throw DegenerateInput("row " + std::to_string(i) + " sums to " + std::to_string(sum) + ", expected " +
                                  std::to_string(raters));
        p_bar += (squares - raters) / (raters * (raters - 1.0));
    }
    p_bar /= items;

    double p_e = 0.0;
    for (const double c : column) {
        const double p = c / (items * raters);
        p_e += p * p;
    }
    if (std::abs(1.0 - p_e) < 1e-12) return 1.0;
    return (p_bar - p_e) / (1.0 - p_e);
}

KappaInput kappa_matrix(std::span<const PreferenceBallot> ballots, int n_steps) {
    std::map<std::string, std::vector<const PreferenceBallot*>> by_article;
    for (const auto& b : ballots) by_article[b.article_id].push_back(&b);
    std::size_t raters = 0;
    for (const auto& [id, list] : by_article) raters = std::max(raters, list.size());

    KappaInput out;
    out.raters = static_cast<int>(raters);
    for (const auto& [id, list] : by_article) {
        if (list.size() != raters) continue;
        std::vector<double> row(static_cast<std::size_t>(n_steps), 0.0);
        for (const auto* b : list) {
            const double credit = 1.0 / static_cast<double>(b->chosen_steps.size());
            for (const int s : b->chosen_steps) {
                check_step(s, n_steps);
                row[static_cast<std::size_t>(s - 1)] += credit;
            }
        }
        out.counts.push_back(std::move(row));
        out.articles.push_back(id);
    }
    return out;
}

std::map<std::string, double> preference_vector(std::span<const PreferenceBallot> ballots) {
    std::map<std::string, double> out;
    for (const auto& b : ballots) {
        const double credit = 1.0 / static_cast<double>(b.chosen_steps.size());
        for (const int s : b.chosen_steps) out[summary_id(b.article_id, s)] += credit;
    }
    return out;
}

std::map<std::string, double> preference_vector(std::span<const PreferenceBallot> ballots,
                                                std::span<const std::string> articles, int n_steps) {
    std::map<std::string, double> out;
    for (const auto& a : articles) {
        for (int s = 1; s <= n_steps; ++s) out[summary_id(a, s)] = 0.0;
    }
    for (const auto& [id, v] : preference_vector(ballots)) out[id] += v;
    return out;
}

double pearson(std::span<const double> x, std::span<const double> y) {
    if (x.size() != y.size()) throw DegenerateInput("pearson: vectors differ in length");
    if (x.size() < 2) throw DegenerateInput("pearson: need at least 2 points");
    const double n = static_cast<double>(x.size());
    double mx = 0.0;
    double my = 0.0;
    for (std::size_t i = 0; i < x.size(); ++i) {
        mx += x[i];
        my += y[i];
    }
    mx /= n;
    my /= n;
    double sxy = 0.0;
    double sxx = 0.0;
    double syy = 0.0;
    for (std::size_t i = 0; i < x.size(); ++i) {
        const double dx = x[i] - mx;
        const double dy = y[i] - my;
        sxy += dx * dy;
        sxx += dx * dx;
        syy += dy * dy;
    }
    if (sxx == 0.0 || syy == 0.0) throw DegenerateInput("pearson: correlation undefined for a constant vector");
    return sxy / std::sqrt(sxx * syy);
}

std::vector<MetaEvalRow> meta_eval(const std::map<std::string, double>& preferences,
                                   std::span<const JudgedItem> scores) {
    std::map<Dimension, std::pair<std::vector<double>, std::vector<double>>> joined;
    for (const auto& item : scores) {
        if (!item.score) continue;
        const auto it = preferences.find(item.summary_id);
        if (it == preferences.end()) continue;
        auto& [x, y] = joined[item.dimension];
        x.push_back(it->second);
        y.push_back(static_cast<double>(*item.score));
    }
    if (joined.empty()) throw DegenerateInput("meta-evaluation: no summary ids in common");

    std::vector<MetaEvalRow> out;
    for (const auto& [dim, xy] : joined) {
        if (xy.first.size() < 2)
            throw DegenerateInput("meta-evaluation: fewer than 2 joined rows for " +
                                  std::string(dimension_info(dim).name));
        out.push_back({dim, pearson(xy.first, xy.second), xy.first.size()});
    }
    return out;
}

}  // namespace codkit
