#pragma once

#include <atomic>
#include <cstdint>
#include <filesystem>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <set>
#include <string>
#include <string_view>
#include <vector>

#include <nlohmann/json.hpp>

#include "codkit/datastore.hpp"

namespace codkit {

/// Seed for one (annotator, article) pair: the first 8 bytes of
/// SHA-256("<base>:<annotator>:<article>"), big-endian.
std::uint64_t blinding_seed(std::uint64_t base_seed, std::string_view annotator, std::string_view article);

/// Fisher-Yates over steps 1..n driven by mt19937_64(seed). Position i holds
/// the step shown under label 'A'+i.
std::vector<int> blinded_order(int n_steps, std::uint64_t seed);

std::string label_for(std::size_t position);

struct Candidate {
    std::string label;
    std::string summary;
};

struct AnnotationTask {
    std::string annotator_id;
    std::string article_id;
    std::string article;
    std::vector<Candidate> candidates;
    std::uint64_t seed = 0;
    std::vector<int> hidden_steps;  // never leaves the server before a vote
    std::size_t completed = 0;
    std::size_t total = 0;
};

/// The client-visible task body. Omits hidden_steps and the seed.
nlohmann::json public_json(const AnnotationTask& task);

class UnknownAnnotator : public Error {
public:
    using Error::Error;
};

struct VoteResult {
    int status = 201;  // 201, 404, 409 or 422
    std::string message;
    std::optional<PreferenceBallot> ballot;
};

/// Serves every (annotator, article) pair once. Mappings go to
/// blinding.jsonl before a task is returned; ballots are rewritten through
/// the run store after each accepted vote. All public members are
/// thread-safe.
class AnnotationService {
public:
    AnnotationService(RunStore& store, std::vector<std::string> annotators, std::uint64_t base_seed = 0);

    /// Empty when the annotator has no open task. Throws UnknownAnnotator.
    std::optional<AnnotationTask> next_task(std::string_view annotator);
    VoteResult vote(std::string_view annotator, std::string_view article_id, const std::vector<std::string>& labels);

    bool complete() const;
    std::size_t ballot_count() const;
    std::size_t total_tasks() const;
    std::size_t completed(std::string_view annotator) const;
    const std::vector<std::string>& annotators() const { return annotators_; }

private:
    struct Mapping {
        std::uint64_t seed = 0;
        std::vector<int> steps;
    };
    const Mapping& mapping_for(const std::string& annotator, const std::string& article);
    bool voted(const std::string& annotator, const std::string& article) const;
    void persist_mappings();

    RunStore& store_;
    std::vector<std::string> annotators_;
    std::uint64_t base_seed_;
    std::vector<CoDChain> chains_;
    std::map<std::string, std::string> articles_;
    std::map<std::pair<std::string, std::string>, Mapping> mappings_;
    std::vector<PreferenceBallot> ballots_;
    std::set<std::pair<std::string, std::string>> done_;
    mutable std::mutex mutex_;
};

/// HTTP front end: GET /api/task, POST /api/vote, GET /api/status,
/// GET /api/guidelines and static files from `static_dir` at "/".
class AnnotationServer {
public:
    AnnotationServer(AnnotationService& service, std::filesystem::path static_dir, std::string guidelines = {});
    ~AnnotationServer();

    /// Returns false when the address cannot be bound. Port 0 picks a free one.
    bool bind(const std::string& host, int port);
    int port() const;
    /// Blocks until every task is complete or `interrupted` becomes true.
    void run(const std::atomic<bool>& interrupted);
    void stop();

private:
    struct Impl;
    std::unique_ptr<Impl> impl_;
};

/// "host:port" or ":port" or "port".
std::pair<std::string, int> parse_listen_address(std::string_view address);

}  // namespace codkit
