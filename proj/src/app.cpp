#include "codkit/app.hpp"

#include <algorithm>
#include <atomic>
#include <csignal>
#include <iostream>

#include <CLI11.hpp>
#include <fmt/format.h>

#include "codkit/annotation.hpp"
#include "codkit/util.hpp"

#ifndef CODKIT_ASSETS_DIR
#define CODKIT_ASSETS_DIR "assets"
#endif

namespace codkit {

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

std::atomic<bool> g_interrupted{false};

extern "C" void on_signal(int) { g_interrupted.store(true); }

struct Options {
    std::string runs_dir = "runs";
    std::string abbrev_file;
    std::string gazetteer;
    std::string align_scorer = "rouge12-f1";
    std::string llm_url;
    std::string llm_model;
    std::string mock;
    std::size_t workers = 4;

    std::string corpus;
    std::string field_map;
    std::string run;
    int steps = 5;
    std::string cod_template;
    bool with_vanilla = false;
    std::string dims = "all";
    std::string listen = "127.0.0.1:8080";
    std::string annotators;
    std::string ui_dir = std::string(CODKIT_ASSETS_DIR) + "/ui";
    std::string guidelines = std::string(CODKIT_ASSETS_DIR) + "/annotation_guidelines.txt";
    std::uint64_t seed = 0;
    bool meta_eval = false;
    std::string entities_sidecar;
};

MetricsConfig metrics_config(const Options& o) {
    MetricsConfig c;
    if (!o.abbrev_file.empty()) c.extractor.abbreviations = AbbreviationList::from_file(o.abbrev_file);
    if (!o.gazetteer.empty()) c.extractor.gazetteer.merge(Gazetteer::from_file(o.gazetteer));
    c.align.scorer = scorer_by_name(o.align_scorer);
    c.workers = o.workers;
    return c;
}

std::unique_ptr<LlmClient> make_client(const Options& o, const fs::path& raw_dir, std::string_view prefix) {
    ClientConfig config;
    config.raw_log_dir = raw_dir;
    config.raw_log_prefix = std::string(prefix);
    if (!o.mock.empty()) {
        config.model = o.llm_model;
        config.sleep = [](std::chrono::milliseconds) {};
        return make_mock_client(ScriptedTransport::from_file(o.mock), std::move(config));
    }
    ClientConfig env = ClientConfig::from_environment(o.llm_url, o.llm_model);
    env.raw_log_dir = config.raw_log_dir;
    env.raw_log_prefix = config.raw_log_prefix;
    return make_http_client(std::move(env));
}

void print_warnings(RunStore& store, std::ostream& err) {
    for (const auto& w : store.take_warnings()) err << "warning: " << w << "\n";
}

std::map<std::string, std::string> article_texts(RunStore& store) {
    std::map<std::string, std::string> out;
    for (const auto& a : store.load_articles()) out[a.article_id] = a.text;
    return out;
}

int cmd_densify(const Options& o, std::ostream& out, std::ostream& err) {
    PromptSpec spec;
    spec.n_steps = o.steps;
    if (!o.cod_template.empty()) spec.load_template(o.cod_template);
    spec.validate();

    const FieldMap fields = o.field_map.empty() ? FieldMap{} : FieldMap::parse(o.field_map);
    CorpusImport corpus = import_corpus(o.corpus, fields);
    for (const auto& w : corpus.warnings) err << "warning: " << w << "\n";
    if (corpus.records.empty()) {
        err << "error: corpus " << o.corpus << " is empty; nothing to densify\n";
        return kExitFailure;
    }

    json config = {{"command", "densify"},
                   {"corpus", o.corpus},
                   {"corpus_sha256", sha256_file(o.corpus)},
                   {"steps", spec.n_steps},
                   {"entities_min", spec.entities_min},
                   {"entities_max", spec.entities_max},
                   {"template_sha256", sha256_hex(spec.template_text)},
                   {"with_vanilla", o.with_vanilla},
                   {"mock", o.mock},
                   {"llm_url", o.llm_url}};
    if (!RunStore::valid_run_id(o.run)) throw std::invalid_argument("invalid run id '" + o.run + "'");
    const fs::path raw_dir = fs::path(o.runs_dir) / o.run / "raw";
    auto client = make_client(o, raw_dir, "cod");
    RunStore store = RunStore::create(o.runs_dir, o.run, std::move(config));
    store.save_articles(corpus.records);
    store.set_model_id(client->model_id());

    const auto& records = corpus.records;
    std::vector<std::optional<CoDChain>> chains(records.size());
    std::vector<std::string> failures(records.size());
    parallel_for(records.size(), o.workers, [&](std::size_t i) {
        try {
            chains[i] = run_cod(records[i].article_id, records[i].text, spec, *client).chain;
        } catch (const ChainGenerationError& e) {
            failures[i] = e.what();
        } catch (const LlmError& e) {
            failures[i] = e.what();
        }
    });

    std::vector<CoDChain> done;
    for (std::size_t i = 0; i < records.size(); ++i) {
        if (chains[i]) {
            done.push_back(std::move(*chains[i]));
            store.add_prompt_fingerprint(done.back().prompt_fingerprint);
        } else {
            err << "failed: " << records[i].article_id << ": " << failures[i] << "\n";
        }
    }
    store.save_chains(done);

    if (o.with_vanilla) {
        auto vclient = make_client(o, raw_dir, "vanilla");
        std::vector<std::optional<VanillaSummary>> vanilla(records.size());
        std::fill(failures.begin(), failures.end(), std::string());
        parallel_for(records.size(), o.workers, [&](std::size_t i) {
            try {
                vanilla[i] = run_vanilla(records[i].article_id, records[i].text, spec.vanilla_words, *vclient);
            } catch (const LlmError& e) {
                failures[i] = e.what();
            }
        });
        std::vector<VanillaSummary> kept;
        for (std::size_t i = 0; i < records.size(); ++i) {
            if (vanilla[i]) kept.push_back(std::move(*vanilla[i]));
            else err << "failed: vanilla summary for " << records[i].article_id << ": " << failures[i] << "\n";
        }
        store.save_vanilla(kept);
    }

    out << fmt::format("run {}: {} of {} chains persisted\n", store.run_id(), done.size(), records.size());
    if (done.empty()) return kExitFailure;
    return done.size() == records.size() ? kExitOk : kExitPartial;
}

int cmd_analyze(const Options& o, std::ostream& out, std::ostream& err) {
    RunStore store = RunStore::open(o.runs_dir, o.run);
    const auto chains = store.load_chains();
    print_warnings(store, err);
    if (chains.empty()) {
        err << "error: run '" << o.run << "' has no chains to analyze\n";
        return kExitFailure;
    }
    const auto articles = store.load_articles();
    const auto vanilla = store.has("vanilla.jsonl") ? store.load_vanilla() : std::vector<VanillaSummary>{};

    MetricsConfig config = metrics_config(o);
    std::map<std::string, EntitySet> sidecar;
    if (!o.entities_sidecar.empty()) {
        std::map<std::string, std::string> texts;
        for (const auto& c : chains) {
            for (std::size_t s = 0; s < c.steps.size(); ++s)
                texts[summary_id(c.article_id, static_cast<int>(s) + 1)] = c.steps[s].summary;
        }
        sidecar = load_entity_sidecar(o.entities_sidecar, texts);
        config.sidecar = &sidecar;
    }

    const auto metrics = compute_metrics(articles, chains, vanilla, config);
    store.save_metrics(metrics);
    for (const auto& [name, csv] : series_csvs(metrics)) store.write_untracked(fs::path("report") / name, csv);

    std::size_t flagged = 0;
    for (const auto& m : metrics) {
        if (!m.ok()) {
            ++flagged;
            err << "flagged: " << m.summary_id << ": " << m.error << "\n";
        }
    }
    out << table1_csv(table1_rows(metrics));
    out << fmt::format("{} metric rows ({} flagged) written to {}\n", metrics.size(), flagged,
                       (store.dir() / "metrics.jsonl").string());
    return kExitOk;
}

int cmd_judge(const Options& o, std::ostream& out, std::ostream& err) {
    const auto dims = parse_dimension_list(o.dims);
    RunStore store = RunStore::open(o.runs_dir, o.run);
    const auto chains = store.load_chains();
    print_warnings(store, err);
    if (chains.empty()) {
        err << "error: run '" << o.run << "' has no chains to judge\n";
        return kExitFailure;
    }
    auto client = make_client(o, store.raw_dir(), "judge");
    JudgeOptions options;
    options.workers = o.workers;
    const LikertScores scores = judge_corpus(chains, article_texts(store), dims, *client, options);
    store.save_scores(scores.items);

    for (const auto& item : scores.items) {
        if (!item.score) err << "gap: " << item.summary_id << " " << dimension_info(item.dimension).name << ": "
                             << item.error << "\n";
    }
    out << table3_csv(scores);
    if (scores.gaps == scores.items.size()) return kExitFailure;
    return scores.gaps == 0 ? kExitOk : kExitPartial;
}

std::vector<std::string> split_list(const std::string& s) {
    std::vector<std::string> out;
    std::size_t pos = 0;
    while (pos <= s.size()) {
        const auto comma = std::min(s.find(',', pos), s.size());
        std::string item = s.substr(pos, comma - pos);
        item.erase(0, item.find_first_not_of(' '));
        item.erase(item.find_last_not_of(' ') + 1);
        if (!item.empty()) out.push_back(item);
        pos = comma + 1;
    }
    return out;
}

int cmd_annotate(const Options& o, std::ostream& out, std::ostream& err) {
    const auto annotators = split_list(o.annotators);
    if (annotators.empty()) {
        err << "error: --annotators needs at least one id\n";
        return kExitFailure;
    }
    const auto [host, port] = parse_listen_address(o.listen);
    RunStore store = RunStore::open(o.runs_dir, o.run);
    AnnotationService service(store, annotators, o.seed);
    print_warnings(store, err);
    if (service.complete()) {
        out << "all " << service.total_tasks() << " tasks already complete\n";
        return kExitOk;
    }

    std::string guidelines;
    if (fs::is_regular_file(o.guidelines)) guidelines = read_file(o.guidelines);
    AnnotationServer server(service, o.ui_dir, guidelines);
    if (!server.bind(host, port)) {
        err << "error: cannot listen on " << o.listen << "\n";
        return kExitFailure;
    }
    out << fmt::format("serving run {} on http://{}:{}/ ({} of {} ballots recorded)\n", store.run_id(), host,
                       server.port(), service.ballot_count(), service.total_tasks());
    out.flush();

    g_interrupted.store(false);
    auto previous_int = std::signal(SIGINT, on_signal);
    auto previous_term = std::signal(SIGTERM, on_signal);
    server.run(g_interrupted);
    std::signal(SIGINT, previous_int);
    std::signal(SIGTERM, previous_term);

    out << fmt::format("{} of {} ballots recorded{}\n", service.ballot_count(), service.total_tasks(),
                       service.complete() ? "; session complete" : "; interrupted");
    return kExitOk;
}

int cmd_report(const Options& o, std::ostream& out, std::ostream& err) {
    RunStore store = RunStore::open(o.runs_dir, o.run);
    ReportOptions options;
    options.meta_eval = o.meta_eval;
    options.metrics = metrics_config(o);
    const ReportResult result = emit_report(store, options);
    print_warnings(store, err);
    out << result.summary_text;
    if (result.all_skipped()) {
        err << "error: every table was skipped\n";
        return kExitFailure;
    }
    for (const auto& name : result.emitted) out << "wrote " << (store.report_dir() / name).string() << "\n";
    return kExitOk;
}

}  // namespace

int run_cli(int argc, const char* const* argv, std::ostream& out, std::ostream& err) {
    Options o;
    CLI::App app{"Iterative entity-densifying summarization toolkit", "codkit"};
    app.require_subcommand(1);
    app.fallthrough();
    app.add_option("--runs-dir", o.runs_dir, "Directory holding run folders")->capture_default_str();
    app.add_option("--abbrev-file", o.abbrev_file, "Abbreviation list (one per line)")->check(CLI::ExistingFile);
    app.add_option("--gazetteer", o.gazetteer, "Extra gazetteer terms, optional TAB category")->check(CLI::ExistingFile);
    app.add_option("--align-scorer", o.align_scorer, "rouge12-f1 or rouge12-recall")->capture_default_str();
    app.add_option("--llm-url", o.llm_url, "Chat-completion base URL; key from LLM_API_KEY");
    app.add_option("--llm-model", o.llm_model, "Model name sent to the endpoint");
    app.add_option("--mock", o.mock, "Scripted mock fixture instead of a live endpoint")->check(CLI::ExistingFile);
    app.add_option("--workers", o.workers, "Concurrent requests or analysis threads")->capture_default_str()
        ->check(CLI::Range(1, 256));

    auto* densify = app.add_subcommand("densify", "Generate CoD chains for a corpus into a new run");
    densify->add_option("--corpus", o.corpus, "JSONL or CSV corpus")->required()->check(CLI::ExistingFile);
    densify->add_option("--out-run", o.run, "New run id")->required();
    densify->add_option("--steps", o.steps, "Densification steps")->capture_default_str()->check(CLI::Range(1, 26));
    densify->add_option("--field-map", o.field_map, "id=...,text=...,reference=...");
    densify->add_option("--cod-template", o.cod_template, "Prompt template override")->check(CLI::ExistingFile);
    densify->add_flag("--with-vanilla", o.with_vanilla, "Also request a one-shot baseline summary");

    auto* analyze = app.add_subcommand("analyze", "Compute per-summary statistics for a run");
    analyze->add_option("--run", o.run, "Run id")->required();
    analyze->add_option("--entities", o.entities_sidecar, "Entity sidecar JSONL")->check(CLI::ExistingFile);

    auto* judge = app.add_subcommand("judge", "Score summaries on 1-5 Likert dimensions with an LLM");
    judge->add_option("--run", o.run, "Run id")->required();
    judge->add_option("--dims", o.dims, "all or a comma list of dimensions")->capture_default_str();

    auto* annotate = app.add_subcommand("annotate", "Serve the blinded preference study");
    annotate->add_option("--run", o.run, "Run id")->required();
    annotate->add_option("--listen", o.listen, "host:port")->capture_default_str();
    annotate->add_option("--annotators", o.annotators, "Comma-separated annotator ids")->required();
    annotate->add_option("--ui-dir", o.ui_dir, "Static UI directory served at /")->capture_default_str();
    annotate->add_option("--guidelines", o.guidelines, "Guideline text served at /api/guidelines");
    annotate->add_option("--seed", o.seed, "Base blinding seed")->capture_default_str();

    auto* report = app.add_subcommand("report", "Write report tables and series for a run");
    report->add_option("--run", o.run, "Run id")->required();
    report->add_flag("--meta-eval", o.meta_eval, "Also correlate first-place votes with Likert scores");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e, out, err);
        return code == 0 ? kExitOk : kExitFailure;
    }

    try {
        if (*densify) return cmd_densify(o, out, err);
        if (*analyze) return cmd_analyze(o, out, err);
        if (*judge) return cmd_judge(o, out, err);
        if (*annotate) return cmd_annotate(o, out, err);
        if (*report) return cmd_report(o, out, err);
    } catch (const std::exception& e) {
        err << "error: " << e.what() << "\n";
    }
    return kExitFailure;
}

}  // namespace codkit
