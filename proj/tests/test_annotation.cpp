#include <gtest/gtest.h>

#include <fstream>
#include <functional>
#include <thread>

#include <httplib.h>

#include "codkit/annotation.hpp"
#include "codkit/util.hpp"
#include "support.hpp"

using namespace codkit;
using nlohmann::json;
namespace fs = std::filesystem;

namespace {

const std::vector<std::string> kArticles = {"alpha", "beta", "gamma"};

// Each summary text names its article and a letter code, never its step index.
std::string summary_text(const std::string& article, int step) {
    return article + " candidate " + std::string(1, static_cast<char>('p' + step));
}

int step_of(const std::string& text) { return text.back() - 'p'; }

void seed_run(RunStore& store, int n_steps = 5) {
    std::vector<ArticleRecord> articles;
    std::vector<CoDChain> chains;
    for (const auto& id : kArticles) {
        articles.push_back({id, "Body of " + id + ".", std::nullopt, "t"});
        CoDChain c;
        c.article_id = id;
        for (int s = 1; s <= n_steps; ++s) c.steps.push_back({{}, summary_text(id, s)});
        chains.push_back(c);
    }
    store.save_articles(articles);
    store.save_chains(chains);
}

bool mentions_step_keys(const json& j) {
    if (j.is_object()) {
        for (const auto& [k, v] : j.items()) {
            if (k.find("step") != std::string::npos || k == "seed" || k == "order") return true;
            if (mentions_step_keys(v)) return true;
        }
    }
    if (j.is_array()) {
        for (const auto& v : j) {
            if (mentions_step_keys(v)) return true;
        }
    }
    return false;
}

}  // namespace

TEST(Blinding, SeedDerivation) {
    EXPECT_EQ(blinding_seed(0, "u", "a"), blinding_seed(0, "u", "a"));
    EXPECT_NE(blinding_seed(0, "u", "a"), blinding_seed(1, "u", "a"));
    EXPECT_NE(blinding_seed(0, "u", "a"), blinding_seed(0, "v", "a"));
    // First 16 hex digits of sha256("0:u:a").
    EXPECT_EQ(blinding_seed(0, "u", "a"), std::stoull(sha256_hex("0:u:a").substr(0, 16), nullptr, 16));
}

TEST(Blinding, OrderIsPermutationAndDeterministic) {
    std::map<std::vector<int>, int> seen;
    for (std::uint64_t seed = 0; seed < 2000; ++seed) {
        auto order = blinded_order(5, seed);
        EXPECT_EQ(order, blinded_order(5, seed));
        ++seen[order];
        std::sort(order.begin(), order.end());
        EXPECT_EQ(order, (std::vector<int>{1, 2, 3, 4, 5}));
    }
    EXPECT_EQ(seen.size(), 120u);
    EXPECT_TRUE(blinded_order(0, 1).empty());
    EXPECT_EQ(blinded_order(1, 9), (std::vector<int>{1}));
}

TEST(Blinding, Labels) {
    EXPECT_EQ(label_for(0), "A");
    EXPECT_EQ(label_for(25), "Z");
    EXPECT_THROW(label_for(26), std::out_of_range);
}

TEST(Service, TwoAnnotatorsThreeArticlesEndToEnd) {
    tsupport::TempDir dir;
    auto store = RunStore::create(dir.path(), "r");
    seed_run(store);
    AnnotationService service(store, {"bob", "amy"}, 7);
    EXPECT_EQ(service.annotators(), (std::vector<std::string>{"amy", "bob"}));
    EXPECT_EQ(service.total_tasks(), 6u);

    std::vector<PreferenceBallot> expected;
    int round = 0;
    while (!service.complete()) {
        for (const auto& annotator : service.annotators()) {
            auto task = service.next_task(annotator);
            if (!task) continue;
            const json pub = public_json(*task);
            EXPECT_FALSE(mentions_step_keys(pub)) << pub.dump();
            EXPECT_EQ(pub["candidates"].size(), 5u);
            EXPECT_EQ(pub["progress"]["total"], 3);
            // Pick label B, plus A on every other round to exercise ties.
            std::vector<std::string> labels = {"B"};
            std::set<int> steps = {step_of(pub["candidates"][1]["summary"].get<std::string>())};
            if (round++ % 2 == 0) {
                labels.push_back("A");
                steps.insert(step_of(pub["candidates"][0]["summary"].get<std::string>()));
            }
            const auto r = service.vote(annotator, task->article_id, labels);
            ASSERT_EQ(r.status, 201) << r.message;
            EXPECT_EQ(r.ballot->chosen_steps, steps);
            EXPECT_EQ(r.ballot->blinding_seed, blinding_seed(7, annotator, task->article_id));
            expected.push_back(*r.ballot);
        }
    }
    EXPECT_FALSE(service.next_task("amy"));
    EXPECT_EQ(service.ballot_count(), 6u);
    const auto stored = store.load_ballots();
    EXPECT_EQ(stored, expected);
    const auto shares = vote_shares(stored, 5);
    EXPECT_EQ(shares.total_ballots, 6u);
    EXPECT_EQ(shares.annotators.size(), 2u);
}

TEST(Service, MappingPersistedBeforeServing) {
    tsupport::TempDir dir;
    auto store = RunStore::create(dir.path(), "r");
    seed_run(store);
    AnnotationService service(store, {"amy"});
    EXPECT_FALSE(store.has("blinding.jsonl"));
    const auto task = service.next_task("amy");
    ASSERT_TRUE(task);
    ASSERT_TRUE(store.has("blinding.jsonl"));
    const json row = json::parse(store.read_tracked("blinding.jsonl"));
    EXPECT_EQ(row["order"].get<std::vector<int>>(), task->hidden_steps);
    EXPECT_EQ(row["seed"].get<std::uint64_t>(), task->seed);
    for (std::size_t i = 0; i < task->candidates.size(); ++i)
        EXPECT_EQ(step_of(task->candidates[i].summary), task->hidden_steps[i]);
    // Serving the same task again reuses the mapping.
    EXPECT_EQ(service.next_task("amy")->hidden_steps, task->hidden_steps);
}

TEST(Service, VoteErrors) {
    tsupport::TempDir dir;
    auto store = RunStore::create(dir.path(), "r");
    seed_run(store);
    AnnotationService service(store, {"amy", "bob"});
    EXPECT_THROW(service.next_task("eve"), UnknownAnnotator);
    EXPECT_EQ(service.vote("eve", "alpha", {"A"}).status, 404);
    EXPECT_EQ(service.vote("amy", "alpha", {"A"}).status, 409);  // never served
    const auto task = service.next_task("amy");
    EXPECT_EQ(task->article_id, "alpha");
    EXPECT_EQ(service.vote("amy", "beta", {"A"}).status, 409);  // not the open task
    EXPECT_EQ(service.vote("amy", "alpha", {}).status, 422);
    EXPECT_EQ(service.vote("amy", "alpha", {"F"}).status, 422);
    EXPECT_EQ(service.vote("amy", "alpha", {"AB"}).status, 422);
    EXPECT_EQ(service.vote("amy", "alpha", {"C"}).status, 201);
    EXPECT_EQ(service.vote("amy", "alpha", {"C"}).status, 409);  // duplicate
    EXPECT_EQ(service.ballot_count(), 1u);
    EXPECT_EQ(service.completed("amy"), 1u);
    EXPECT_EQ(service.completed("bob"), 0u);
}

TEST(Service, ConstructorErrors) {
    tsupport::TempDir dir;
    auto store = RunStore::create(dir.path(), "r");
    EXPECT_THROW(AnnotationService(store, {"amy"}), DegenerateInput);
    seed_run(store);
    EXPECT_THROW(AnnotationService(store, {}), std::invalid_argument);
    EXPECT_THROW(AnnotationService(store, {"amy", "amy"}), std::invalid_argument);
}

TEST(Service, ResumesAfterRestart) {
    tsupport::TempDir dir;
    std::vector<int> order;
    {
        auto store = RunStore::create(dir.path(), "r");
        seed_run(store);
        AnnotationService service(store, {"amy"});
        service.next_task("amy");
        ASSERT_EQ(service.vote("amy", "alpha", {"A"}).status, 201);
        order = service.next_task("amy")->hidden_steps;
    }
    auto store = RunStore::open(dir.path(), "r");
    AnnotationService service(store, {"amy"}, 99);  // a new base seed must not reshuffle served tasks
    EXPECT_EQ(service.ballot_count(), 1u);
    const auto task = service.next_task("amy");
    EXPECT_EQ(task->article_id, "beta");
    EXPECT_EQ(task->hidden_steps, order);
    EXPECT_EQ(task->completed, 1u);
    EXPECT_EQ(service.vote("amy", "alpha", {"A"}).status, 409);
}

TEST(ListenAddress, Parsing) {
    EXPECT_EQ(parse_listen_address("0.0.0.0:8080"), std::make_pair(std::string("0.0.0.0"), 8080));
    EXPECT_EQ(parse_listen_address(":9000"), std::make_pair(std::string("127.0.0.1"), 9000));
    EXPECT_EQ(parse_listen_address("7000"), std::make_pair(std::string("127.0.0.1"), 7000));
    EXPECT_THROW(parse_listen_address("host:port"), std::invalid_argument);
    EXPECT_THROW(parse_listen_address("h:70000"), std::invalid_argument);
}

TEST(Server, HttpSessionCompletesAndStops) {
    tsupport::TempDir dir;
    auto store = RunStore::create(dir.path(), "r");
    seed_run(store);
    fs::create_directories(dir / "ui");
    std::ofstream(dir / "ui" / "index.html") << "<html>ui</html>";
    AnnotationService service(store, {"amy", "bob"});
    AnnotationServer server(service, dir / "ui", "Pick the best summary.");
    ASSERT_TRUE(server.bind("127.0.0.1", 0));
    std::atomic<bool> interrupted{false};
    std::thread runner([&] { server.run(interrupted); });

    httplib::Client client("127.0.0.1", server.port());
    client.set_connection_timeout(5);
    auto index = client.Get("/index.html");
    ASSERT_TRUE(index);
    EXPECT_EQ(index->body, "<html>ui</html>");
    EXPECT_EQ(client.Get("/api/guidelines")->body, "Pick the best summary.");
    EXPECT_EQ(client.Get("/api/task")->status, 400);
    EXPECT_EQ(client.Get("/api/task?annotator=eve")->status, 404);
    EXPECT_EQ(client.Post("/api/vote", "nope", "application/json")->status, 400);
    EXPECT_EQ(client.Post("/api/vote", R"({"annotator":"amy","article_id":"alpha","chosen_labels":"A"})",
                          "application/json")
                  ->status,
              422);

    for (const std::string annotator : {"amy", "bob"}) {
        for (std::size_t i = 0; i < kArticles.size(); ++i) {
            auto res = client.Get(("/api/task?annotator=" + annotator).c_str());
            ASSERT_TRUE(res);
            ASSERT_EQ(res->status, 200);
            EXPECT_EQ(res->body.find("step"), std::string::npos);
            EXPECT_EQ(res->body.find("seed"), std::string::npos);
            const json task = json::parse(res->body);
            const json vote = {{"annotator", annotator}, {"article_id", task["article_id"]}, {"chosen_labels", {"A"}}};
            auto v = client.Post("/api/vote", vote.dump(), "application/json");
            ASSERT_TRUE(v);
            ASSERT_EQ(v->status, 201) << v->body;
            EXPECT_EQ(json::parse(v->body)["completed"], i + 1);
            if (annotator == "amy" && i == 0) {
                EXPECT_EQ(client.Post("/api/vote", vote.dump(), "application/json")->status, 409);
                const json status = json::parse(client.Get("/api/status")->body);
                EXPECT_EQ(status["ballots"], 1);
                EXPECT_EQ(status["done"], false);
            }
        }
        if (annotator == "amy") EXPECT_EQ(client.Get("/api/task?annotator=amy")->status, 204);
    }
    runner.join();  // returns once every task is complete
    EXPECT_TRUE(service.complete());
    EXPECT_EQ(store.load_ballots().size(), 6u);
}

TEST(Server, InterruptStopsRun) {
    tsupport::TempDir dir;
    auto store = RunStore::create(dir.path(), "r");
    seed_run(store);
    AnnotationService service(store, {"amy"});
    AnnotationServer server(service, {});
    ASSERT_TRUE(server.bind("127.0.0.1", 0));
    std::atomic<bool> interrupted{false};
    std::thread runner([&] { server.run(interrupted); });
    std::this_thread::sleep_for(std::chrono::milliseconds(100));
    interrupted = true;
    runner.join();
    EXPECT_FALSE(service.complete());
}

TEST(Server, BusyPortFailsToBind) {
    tsupport::TempDir dir;
    auto store = RunStore::create(dir.path(), "r");
    seed_run(store);
    AnnotationService service(store, {"amy"});
    AnnotationServer first(service, {});
    ASSERT_TRUE(first.bind("127.0.0.1", 0));
    AnnotationServer second(service, {});
    EXPECT_FALSE(second.bind("127.0.0.1", first.port()));
}
