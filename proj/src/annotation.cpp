#include "codkit/annotation.hpp"

#include <algorithm>
#include <chrono>
#include <condition_variable>
#include <random>
#include <thread>

#include <httplib.h>

#include "codkit/util.hpp"

namespace codkit {

using nlohmann::json;

std::uint64_t blinding_seed(std::uint64_t base, std::string_view annotator, std::string_view article) {
    const std::string digest =
        sha256_hex(std::to_string(base) + ":" + std::string(annotator) + ":" + std::string(article));
    return std::stoull(digest.substr(0, 16), nullptr, 16);
}

std::vector<int> blinded_order(int n_steps, std::uint64_t seed) {
    std::vector<int> order(static_cast<std::size_t>(std::max(n_steps, 0)));
    for (std::size_t i = 0; i < order.size(); ++i) order[i] = static_cast<int>(i) + 1;
    std::mt19937_64 rng(seed);
    for (std::size_t i = order.size(); i > 1; --i) {
        const std::size_t j = static_cast<std::size_t>(rng() % i);
        std::swap(order[i - 1], order[j]);
    }
    return order;
}

std::string label_for(std::size_t position) {
    if (position >= 26) throw std::out_of_range("more than 26 candidates cannot be labelled");
    return std::string(1, static_cast<char>('A' + position));
}

json public_json(const AnnotationTask& task) {
    json candidates = json::array();
    for (const auto& c : task.candidates) candidates.push_back({{"label", c.label}, {"summary", c.summary}});
    return {{"annotator", task.annotator_id},
            {"article_id", task.article_id},
            {"article", task.article},
            {"candidates", std::move(candidates)},
            {"progress", {{"completed", task.completed}, {"total", task.total}}}};
}

AnnotationService::AnnotationService(RunStore& store, std::vector<std::string> annotators, std::uint64_t base_seed)
    : store_(store), annotators_(std::move(annotators)), base_seed_(base_seed) {
    if (annotators_.empty()) throw std::invalid_argument("annotation needs at least one annotator");
    std::sort(annotators_.begin(), annotators_.end());
    if (std::adjacent_find(annotators_.begin(), annotators_.end()) != annotators_.end())
        throw std::invalid_argument("annotator ids must be distinct");

    chains_ = store_.load_chains();
    if (chains_.empty()) throw DegenerateInput("run '" + store_.run_id() + "' has no chains to annotate");
    for (const auto& a : store_.load_articles()) articles_[a.article_id] = a.text;
    for (const auto& c : chains_) {
        if (!articles_.count(c.article_id)) throw Error("chain refers to unknown article '" + c.article_id + "'");
    }

    if (store_.has("blinding.jsonl")) {
        const std::string content = store_.read_tracked("blinding.jsonl");
        std::size_t pos = 0;
        while (pos < content.size()) {
            const auto nl = std::min(content.find('\n', pos), content.size());
            const std::string_view line(content.data() + pos, nl - pos);
            pos = nl + 1;
            if (line.empty()) continue;
            const json j = json::parse(line);
            mappings_[{j.at("annotator_id").get<std::string>(), j.at("article_id").get<std::string>()}] =
                Mapping{j.at("seed").get<std::uint64_t>(), j.at("order").get<std::vector<int>>()};
        }
    }
    if (store_.has("ballots.jsonl")) ballots_ = store_.load_ballots();
    for (const auto& b : ballots_) done_.insert({b.annotator_id, b.article_id});
}

bool AnnotationService::voted(const std::string& annotator, const std::string& article) const {
    return done_.count({annotator, article}) > 0;
}

void AnnotationService::persist_mappings() {
    std::string content;
    for (const auto& [key, m] : mappings_) {
        content += json{{"annotator_id", key.first}, {"article_id", key.second}, {"seed", m.seed}, {"order", m.steps}}
                       .dump();
        content += '\n';
    }
    store_.write_tracked("blinding.jsonl", content);
}

const AnnotationService::Mapping& AnnotationService::mapping_for(const std::string& annotator,
                                                                 const std::string& article) {
    const auto key = std::make_pair(annotator, article);
    if (const auto it = mappings_.find(key); it != mappings_.end()) return it->second;
    const auto chain = std::find_if(chains_.begin(), chains_.end(),
                                    [&](const CoDChain& c) { return c.article_id == article; });
    const std::uint64_t seed = blinding_seed(base_seed_, annotator, article);
    mappings_[key] = Mapping{seed, blinded_order(static_cast<int>(chain->steps.size()), seed)};
    persist_mappings();
    return mappings_[key];
}

std::optional<AnnotationTask> AnnotationService::next_task(std::string_view annotator_view) {
    const std::string annotator(annotator_view);
    std::lock_guard lock(mutex_);
    if (!std::binary_search(annotators_.begin(), annotators_.end(), annotator))
        throw UnknownAnnotator("unknown annotator '" + annotator + "'");
    std::size_t completed = 0;
    for (const auto& c : chains_) completed += voted(annotator, c.article_id) ? 1 : 0;
    for (const auto& chain : chains_) {
        if (voted(annotator, chain.article_id)) continue;
        const Mapping& m = mapping_for(annotator, chain.article_id);
        AnnotationTask task;
        task.annotator_id = annotator;
        task.article_id = chain.article_id;
        task.article = articles_.at(chain.article_id);
        task.seed = m.seed;
        task.hidden_steps = m.steps;
        task.completed = completed;
        task.total = chains_.size();
        for (std::size_t i = 0; i < m.steps.size(); ++i)
            task.candidates.push_back({label_for(i), chain.steps[static_cast<std::size_t>(m.steps[i] - 1)].summary});
        return task;
    }
    return std::nullopt;
}

VoteResult AnnotationService::vote(std::string_view annotator_view, std::string_view article_view,
                                   const std::vector<std::string>& labels) {
    const std::string annotator(annotator_view);
    const std::string article(article_view);
    std::lock_guard lock(mutex_);
    if (!std::binary_search(annotators_.begin(), annotators_.end(), annotator))
        return {404, "unknown annotator '" + annotator + "'", std::nullopt};
    if (voted(annotator, article)) return {409, "a vote for this article is already recorded", std::nullopt};

    const auto open = std::find_if(chains_.begin(), chains_.end(),
                                   [&](const CoDChain& c) { return !voted(annotator, c.article_id); });
    if (open == chains_.end() || open->article_id != article)
        return {409, "article '" + article + "' is not this annotator's open task", std::nullopt};
    const auto mapping = mappings_.find({annotator, article});
    if (mapping == mappings_.end()) return {409, "task was never served; fetch it first", std::nullopt};
    if (labels.empty()) return {422, "choose at least one candidate", std::nullopt};

    PreferenceBallot ballot;
    ballot.article_id = article;
    ballot.annotator_id = annotator;
    ballot.blinding_seed = mapping->second.seed;
    for (const auto& label : labels) {
        const auto& steps = mapping->second.steps;
        if (label.size() != 1 || label[0] < 'A' || static_cast<std::size_t>(label[0] - 'A') >= steps.size())
            return {422, "unknown label '" + label + "'", std::nullopt};
        ballot.chosen_steps.insert(steps[static_cast<std::size_t>(label[0] - 'A')]);
    }
    ballot.ts = utc_timestamp();

    ballots_.push_back(ballot);
    try {
        store_.save_ballots(ballots_);
    } catch (...) {
        ballots_.pop_back();
        throw;
    }
    done_.insert({annotator, article});
    return {201, "recorded", std::move(ballot)};
}

bool AnnotationService::complete() const {
    std::lock_guard lock(mutex_);
    return done_.size() >= annotators_.size() * chains_.size();
}

std::size_t AnnotationService::ballot_count() const {
    std::lock_guard lock(mutex_);
    return ballots_.size();
}

std::size_t AnnotationService::total_tasks() const {
    std::lock_guard lock(mutex_);
    return annotators_.size() * chains_.size();
}

std::size_t AnnotationService::completed(std::string_view annotator) const {
    std::lock_guard lock(mutex_);
    std::size_t n = 0;
    for (const auto& c : chains_) n += voted(std::string(annotator), c.article_id) ? 1 : 0;
    return n;
}

// HTTP

struct AnnotationServer::Impl {
    explicit Impl(AnnotationService& s) : service(s) {}
    AnnotationService& service;
    httplib::Server server;
    int port = -1;
    std::mutex mutex;
    std::condition_variable changed;
};

namespace {

void send_json(httplib::Response& res, int status, const json& body) {
    res.status = status;
    res.set_content(body.dump(), "application/json; charset=utf-8");
}

void send_error(httplib::Response& res, int status, const std::string& message) {
    send_json(res, status, {{"error", message}});
}

}  // namespace

AnnotationServer::AnnotationServer(AnnotationService& service, std::filesystem::path static_dir,
                                   std::string guidelines)
    : impl_(std::make_unique<Impl>(service)) {
    auto& srv = impl_->server;
    Impl* impl = impl_.get();
    // SO_REUSEADDR only: the default also sets SO_REUSEPORT, which would let
    // a second server share a busy port instead of failing to bind.
    srv.set_socket_options([](socket_t sock) {
        int yes = 1;
        setsockopt(sock, SOL_SOCKET, SO_REUSEADDR, &yes, sizeof(yes));
    });

    srv.Get("/api/task", [impl](const httplib::Request& req, httplib::Response& res) {
        if (!req.has_param("annotator")) return send_error(res, 400, "missing annotator parameter");
        try {
            const auto task = impl->service.next_task(req.get_param_value("annotator"));
            if (!task) {
                res.status = 204;
                return;
            }
            send_json(res, 200, public_json(*task));
        } catch (const UnknownAnnotator& e) {
            send_error(res, 404, e.what());
        }
    });

    srv.Post("/api/vote", [impl](const httplib::Request& req, httplib::Response& res) {
        json body;
        try {
            body = json::parse(req.body);
        } catch (const json::exception&) {
            return send_error(res, 400, "request body is not JSON");
        }
        if (!body.is_object() || !body.contains("annotator") || !body.contains("article_id") ||
            !body["annotator"].is_string() || !body["article_id"].is_string())
            return send_error(res, 400, "expected annotator and article_id strings");
        std::vector<std::string> labels;
        if (!body.contains("chosen_labels") || !body["chosen_labels"].is_array())
            return send_error(res, 422, "chosen_labels must be a list of labels");
        for (const auto& l : body["chosen_labels"]) {
            if (!l.is_string()) return send_error(res, 422, "labels must be strings");
            labels.push_back(l.get<std::string>());
        }
        const auto annotator = body["annotator"].get<std::string>();
        const VoteResult result = impl->service.vote(annotator, body["article_id"].get<std::string>(), labels);
        if (result.status != 201) return send_error(res, result.status, result.message);
        send_json(res, 201, {{"status", "recorded"},
                             {"completed", impl->service.completed(annotator)},
                             {"total", impl->service.total_tasks() / impl->service.annotators().size()}});
        impl->changed.notify_all();
    });

    srv.Get("/api/status", [impl](const httplib::Request&, httplib::Response& res) {
        send_json(res, 200, {{"ballots", impl->service.ballot_count()},
                             {"total", impl->service.total_tasks()},
                             {"done", impl->service.complete()}});
    });

    srv.Get("/api/guidelines", [guidelines](const httplib::Request&, httplib::Response& res) {
        res.set_content(guidelines, "text/plain; charset=utf-8");
    });

    if (!static_dir.empty() && std::filesystem::is_directory(static_dir)) srv.set_mount_point("/", static_dir.string());
}

AnnotationServer::~AnnotationServer() { stop(); }

bool AnnotationServer::bind(const std::string& host, int port) {
    if (port == 0) {
        impl_->port = impl_->server.bind_to_any_port(host);
    } else {
        impl_->port = impl_->server.bind_to_port(host, port) ? port : -1;
    }
    return impl_->port > 0;
}

int AnnotationServer::port() const { return impl_->port; }

void AnnotationServer::run(const std::atomic<bool>& interrupted) {
    std::thread listener([this] { impl_->server.listen_after_bind(); });
    impl_->server.wait_until_ready();
    {
        std::unique_lock lock(impl_->mutex);
        while (!interrupted.load() && !impl_->service.complete())
            impl_->changed.wait_for(lock, std::chrono::milliseconds(200));
    }
    impl_->server.stop();
    listener.join();
}

void AnnotationServer::stop() {
    if (impl_) impl_->server.stop();
}

std::pair<std::string, int> parse_listen_address(std::string_view address) {
    std::string host = "127.0.0.1";
    std::string_view port_part = address;
    if (const auto colon = address.rfind(':'); colon != std::string_view::npos) {
        if (colon > 0) host = std::string(address.substr(0, colon));
        port_part = address.substr(colon + 1);
    }
    int port = 0;
    try {
        std::size_t used = 0;
        port = std::stoi(std::string(port_part), &used);
        if (used != port_part.size()) throw std::invalid_argument("trailing characters");
    } catch (const std::exception&) {
        throw std::invalid_argument("invalid listen address '" + std::string(address) + "'");
    }
    if (port < 0 || port > 65535) throw std::invalid_argument("port out of range in '" + std::string(address) + "'");
    return {host, port};
}

}  // namespace codkit
