#include <algorithm>
#include <fmt/format.h>

#include "codkit/datastore.hpp"
#include "codkit/overlap.hpp"
#include "codkit/util.hpp"

namespace codkit {

using nlohmann::json;

std::string_view to_string(SystemKind kind) {
    switch (kind) {
        case SystemKind::CoD: return "cod";
        case SystemKind::Human: return "human";
        case SystemKind::Vanilla: return "vanilla";
    }
    return "cod";
}

SystemKind system_kind_from_string(std::string_view name) {
    if (name == "cod") return SystemKind::CoD;
    if (name == "human") return SystemKind::Human;
    if (name == "vanilla") return SystemKind::Vanilla;
    throw std::invalid_argument("unknown system '" + std::string(name) + "'");
}

json to_json(const SummaryMetrics& m) {
    json j = {{"summary_id", m.summary_id},
              {"article_id", m.article_id},
              {"system", std::string(to_string(m.system))},
              {"step", m.step}};
    if (!m.ok()) {
        j["error"] = m.error;
        return j;
    }
    j["tokens"] = m.tokens;
    j["entities"] = m.entities;
    j["entity_density"] = m.entity_density;
    j["extractive_density"] = m.extractive_density;
    j["extractive_coverage"] = m.extractive_coverage;
    j["fusion"] = m.fusion;
    if (m.content) {
        j["content_rank"] = m.content->mean_rank;
        j["content_rank_normalized"] = m.content->normalized_rank;
    } else {
        j["content_rank"] = nullptr;
        j["content_rank_normalized"] = nullptr;
    }
    return j;
}

SummaryMetrics metrics_from_json(const json& j) {
    SummaryMetrics m;
    m.summary_id = j.at("summary_id").get<std::string>();
    m.article_id = j.at("article_id").get<std::string>();
    m.system = system_kind_from_string(j.at("system").get<std::string>());
    m.step = j.value("step", 0);
    if (j.contains("error")) {
        m.error = j["error"].get<std::string>();
        return m;
    }
    m.tokens = j.at("tokens").get<std::size_t>();
    m.entities = j.at("entities").get<std::size_t>();
    m.entity_density = j.at("entity_density").get<double>();
    m.extractive_density = j.at("extractive_density").get<double>();
    m.extractive_coverage = j.at("extractive_coverage").get<double>();
    m.fusion = j.at("fusion").get<double>();
    if (j.contains("content_rank") && !j["content_rank"].is_null())
        m.content = ContentRank{j["content_rank"].get<double>(), j.at("content_rank_normalized").get<double>()};
    return m;
}

SummaryMetrics summary_metrics(std::string_view summary_id, std::string_view article_id, SystemKind system, int step,
                               std::string_view article, std::string_view summary, const MetricsConfig& config) {
    SummaryMetrics m;
    m.summary_id = std::string(summary_id);
    m.article_id = std::string(article_id);
    m.system = system;
    m.step = step;
    try {
        const auto& abbrevs = config.extractor.abbreviations;
        const TokenSeq summary_tokens = tokenize(summary, abbrevs);
        if (summary_tokens.empty()) throw DegenerateInput("empty summary");
        const TokenSeq article_tokens = tokenize(article, abbrevs);

        EntitySet entities;
        if (config.sidecar) {
            if (const auto it = config.sidecar->find(m.summary_id); it != config.sidecar->end()) entities = it->second;
            else entities = extract_entities(summary, config.extractor);
        } else {
            entities = extract_entities(summary, config.extractor);
        }
        const DensityRecord density = make_density_record(summary_tokens.size(), entities.size());
        m.tokens = density.token_count;
        m.entities = density.entity_count;
        m.entity_density = density.density;

        const FragmentSet fragments = extractive_fragments(article_tokens, summary_tokens);
        m.extractive_density = extractive_density(fragments, static_cast<long>(summary_tokens.size()));
        m.extractive_coverage = extractive_coverage(fragments, static_cast<long>(summary_tokens.size()));

        AlignOptions align = config.align;
        align.abbreviations = &abbrevs;
        const SentenceSeq source = split_sentences(article, abbrevs);
        const SentenceSeq target = split_sentences(summary, abbrevs);
        const IndirectStats indirect = indirect_stats(source, target, align);
        m.fusion = indirect.fusion;
        m.content = indirect.content;
    } catch (const DegenerateInput& e) {
        m.error = e.what();
    }
    return m;
}

std::vector<SummaryMetrics> compute_metrics(std::span<const ArticleRecord> articles, std::span<const CoDChain> chains,
                                            std::span<const VanillaSummary> vanilla, const MetricsConfig& config) {
    std::map<std::string, const ArticleRecord*> by_id;
    for (const auto& a : articles) by_id[a.article_id] = &a;
    const auto article_of = [&](const std::string& id) -> const ArticleRecord& {
        const auto it = by_id.find(id);
        if (it == by_id.end()) throw Error("summary refers to unknown article '" + id + "'");
        return *it->second;
    };

    struct Job {
        std::string summary_id;
        std::string article_id;
        SystemKind system;
        int step;
        std::string_view summary;
    };
    std::vector<Job> jobs;
    for (const auto& chain : chains) {
        article_of(chain.article_id);
        for (std::size_t s = 0; s < chain.steps.size(); ++s) {
            const int step = static_cast<int>(s) + 1;
            jobs.push_back({summary_id(chain.article_id, step), chain.article_id, SystemKind::CoD, step,
                            chain.steps[s].summary});
        }
    }
    for (const auto& a : articles) {
        if (a.reference_summary)
            jobs.push_back({a.article_id + "#human", a.article_id, SystemKind::Human, 0, *a.reference_summary});
    }
    for (const auto& v : vanilla) {
        article_of(v.article_id);
        jobs.push_back({v.article_id + "#vanilla", v.article_id, SystemKind::Vanilla, 0, v.summary});
    }

    std::vector<SummaryMetrics> out(jobs.size());
    parallel_for(jobs.size(), config.workers, [&](std::size_t i) {
        const Job& job = jobs[i];
        out[i] = summary_metrics(job.summary_id, job.article_id, job.system, job.step,
                                 article_of(job.article_id).text, job.summary, config);
    });
    std::stable_sort(out.begin(), out.end(), [](const SummaryMetrics& a, const SummaryMetrics& b) {
        return std::tie(a.system, a.article_id, a.step) < std::tie(b.system, b.article_id, b.step);
    });
    return out;
}

std::vector<Table1Row> table1_rows(std::span<const SummaryMetrics> metrics) {
    std::map<std::pair<SystemKind, int>, std::vector<const SummaryMetrics*>> groups;
    for (const auto& m : metrics) {
        if (m.ok()) groups[{m.system, m.step}].push_back(&m);
    }
    std::vector<Table1Row> rows;
    for (const auto& [key, list] : groups) {
        Table1Row row{key.first, key.second, 0.0, 0.0, 0.0, list.size()};
        std::vector<DensityRecord> records;
        for (const auto* m : list) {
            row.tokens += static_cast<double>(m->tokens);
            row.entities += static_cast<double>(m->entities);
            records.push_back({m->tokens, m->entities, m->entity_density});
        }
        row.tokens /= static_cast<double>(list.size());
        row.entities /= static_cast<double>(list.size());
        row.density = corpus_density(records);
        rows.push_back(row);
    }
    return rows;
}

std::string table1_csv(std::span<const Table1Row> rows) {
    std::string out = "system,step,tokens,entities,entity_density,n\n";
    for (const auto& r : rows) {
        const std::string step = r.system == SystemKind::CoD ? std::to_string(r.step) : std::string();
        out += fmt::format("{},{},{:.0f},{:.1f},{:.3f},{}\n", to_string(r.system), step, r.tokens, r.entities,
                           r.density, r.n);
    }
    return out;
}

std::string table2_csv(const VoteShareTable& table) {
    std::string out = "step";
    for (const auto& a : table.annotators) out += "," + a.annotator_id;
    out += ",aggregate\n";
    for (int s = 0; s < table.n_steps; ++s) {
        const auto i = static_cast<std::size_t>(s);
        out += std::to_string(s + 1);
        for (const auto& a : table.annotators) out += fmt::format(",{:.1f}", a.shares[i]);
        out += fmt::format(",{:.1f}\n", table.aggregate[i]);
    }
    out += "ballots";
    for (const auto& a : table.annotators) out += fmt::format(",{}", a.ballots);
    out += fmt::format(",{}\n", table.total_ballots);
    return out;
}

std::string table3_csv(const LikertScores& scores) {
    std::string out = "step";
    for (const auto d : kAllDimensions) {
        std::string name(dimension_info(d).name);
        std::transform(name.begin(), name.end(), name.begin(), [](unsigned char c) { return std::tolower(c); });
        out += "," + name;
    }
    out += ",average\n";
    for (const auto& s : scores.steps) {
        out += std::to_string(s.step);
        for (const auto d : kAllDimensions) {
            const auto it = s.means.find(d);
            out += it == s.means.end() ? std::string(",") : fmt::format(",{:.2f}", it->second);
        }
        out += s.average ? fmt::format(",{:.2f}\n", *s.average) : std::string(",\n");
    }
    return out;
}

std::string table5_csv(std::span<const MetaEvalRow> rows) {
    std::string out = "dimension,pearson_r,n\n";
    for (const auto& r : rows) out += fmt::format("{},{:.3f},{}\n", dimension_info(r.dimension).name, r.correlation, r.n);
    return out;
}

std::map<std::string, std::string> series_csvs(std::span<const SummaryMetrics> metrics) {
    struct Acc {
        std::size_t n = 0;
        double density = 0, extractive = 0, fusion = 0;
        std::size_t ranked = 0;
        double rank = 0, normalized = 0;
    };
    std::map<int, Acc> steps;
    for (const auto& m : metrics) {
        if (m.system != SystemKind::CoD || !m.ok()) continue;
        Acc& a = steps[m.step];
        ++a.n;
        a.density += m.entity_density;
        a.extractive += m.extractive_density;
        a.fusion += m.fusion;
        if (m.content) {
            ++a.ranked;
            a.rank += m.content->mean_rank;
            a.normalized += m.content->normalized_rank;
        }
    }
    std::string density = "step,mean,n\n";
    std::string extractive = "step,mean,n\n";
    std::string fusion = "step,mean,n\n";
    std::string rank = "step,mean_rank,normalized_rank,n\n";
    for (const auto& [step, a] : steps) {
        const double n = static_cast<double>(a.n);
        density += fmt::format("{},{:.6f},{}\n", step, a.density / n, a.n);
        extractive += fmt::format("{},{:.6f},{}\n", step, a.extractive / n, a.n);
        fusion += fmt::format("{},{:.6f},{}\n", step, a.fusion / n, a.n);
        if (a.ranked > 0) {
            const double r = static_cast<double>(a.ranked);
            rank += fmt::format("{},{:.6f},{:.6f},{}\n", step, a.rank / r, a.normalized / r, a.ranked);
        } else {
            rank += fmt::format("{},,,0\n", step);
        }
    }
    return {{"series_density.csv", density},
            {"series_extractive_density.csv", extractive},
            {"series_fusion.csv", fusion},
            {"series_content_rank.csv", rank}};
}

std::string format_step_summary(const StepSummary& s) {
    return fmt::format("modal={} median={} expected={:.2f}", s.modal, s.median, s.expected);
}

ReportResult emit_report(RunStore& store, const ReportOptions& options) {
    ReportResult result;
    std::vector<std::string> lines;
    const auto emit = [&](const std::string& name, const std::string& content) {
        store.write_untracked(std::filesystem::path("report") / name, content);
        result.emitted.push_back(name);
    };

    const auto chains = store.has("chains.jsonl") ? store.load_chains() : std::vector<CoDChain>{};
    int n_steps = options.n_steps;
    for (const auto& c : chains) n_steps = std::max(n_steps, static_cast<int>(c.steps.size()));

    // table1.csv and the per-step series.
    std::vector<SummaryMetrics> metrics;
    if (store.has("metrics.jsonl")) {
        metrics = store.load_metrics();
    } else if (!chains.empty()) {
        const auto articles = store.load_articles();
        const auto vanilla = store.has("vanilla.jsonl") ? store.load_vanilla() : std::vector<VanillaSummary>{};
        metrics = compute_metrics(articles, chains, vanilla, options.metrics);
    }
    const auto t1 = table1_rows(metrics);
    if (t1.empty()) {
        result.skipped["table1"] = chains.empty() ? "no chains in run" : "no summary produced valid metrics";
    } else {
        emit("table1.csv", table1_csv(t1));
        for (const auto& [name, csv] : series_csvs(metrics)) emit(name, csv);
        lines.push_back(fmt::format("table1: {} rows over {} summaries", t1.size(), metrics.size()));
    }

    // table2.csv.
    const auto ballots = store.has("ballots.jsonl") ? store.load_ballots() : std::vector<PreferenceBallot>{};
    if (n_steps == 0) {
        for (const auto& b : ballots) n_steps = std::max(n_steps, *b.chosen_steps.rbegin());
    }
    if (n_steps == 0) n_steps = 5;
    if (ballots.empty()) {
        result.skipped["table2"] = "no ballots in run";
    } else {
        const VoteShareTable shares = vote_shares(ballots, n_steps);
        emit("table2.csv", table2_csv(shares));
        lines.push_back(fmt::format("table2: {} ballots from {} annotators", shares.total_ballots,
                                    shares.annotators.size()));
        lines.push_back(format_step_summary(step_summary(shares.aggregate)));
        try {
            const KappaInput k = kappa_matrix(ballots, n_steps);
            lines.push_back(fmt::format("fleiss_kappa={:.3f} items={} raters={}",
                                        fleiss_kappa(k.counts, k.raters), k.counts.size(), k.raters));
        } catch (const DegenerateInput& e) {
            lines.push_back(std::string("fleiss_kappa: not computed (") + e.what() + ")");
        }
    }

    // table3.csv.
    const auto items = store.has("scores.jsonl") ? store.load_scores() : std::vector<JudgedItem>{};
    const LikertScores scores = aggregate_likert(items);
    if (items.empty() || scores.steps.empty()) {
        result.skipped["table3"] = items.empty() ? "no Likert scores in run" : "every Likert item is a gap";
    } else {
        emit("table3.csv", table3_csv(scores));
        lines.push_back(fmt::format("table3: {} judged items, {} gaps", scores.items.size(), scores.gaps));
    }

    if (options.meta_eval) {
        if (ballots.empty() || items.empty()) {
            result.skipped["table5"] = "meta-evaluation needs both ballots and Likert scores";
        } else {
            std::vector<std::string> article_ids;
            for (const auto& c : chains) article_ids.push_back(c.article_id);
            try {
                const auto prefs = preference_vector(ballots, article_ids, n_steps);
                emit("table5.csv", table5_csv(meta_eval(prefs, items)));
            } catch (const DegenerateInput& e) {
                result.skipped["table5"] = e.what();
            }
        }
    }

    for (const auto& [table, reason] : result.skipped) lines.push_back(table + ": skipped (" + reason + ")");
    for (const auto& l : lines) {
        result.summary_text += l;
        result.summary_text += '\n';
    }
    if (!result.emitted.empty()) emit("summary.txt", result.summary_text);
    return result;
}

}  // namespace codkit
