#include <gtest/gtest.h>

#include <filesystem>
#include <thread>

#include <httplib.h>

#include "musrec/service/ingest.hpp"
#include "musrec/service/service.hpp"
#include "musrec/service/simulate.hpp"
#include "musrec/service/store.hpp"
#include "musrec/synthetic.hpp"
#include "support.hpp"

using namespace musrec;
using namespace musrec::service;

namespace {

const synthetic::Base& base() {
  static const auto b = synthetic::generate({});
  return b;
}

ServiceConfig offline_config() {
  ServiceConfig config;
  config.mock_llm = true;
  config.env = [](const std::string&) -> std::optional<std::string> { return std::nullopt; };
  config.retry = {3, std::chrono::milliseconds(1), nullptr};
  return config;
}

std::shared_ptr<DocumentStore> ingested_store(std::shared_ptr<DocumentStore> store = std::make_shared<MemoryDocumentStore>()) {
  ingest(*store, base().tracks, base().histories, {});
  return store;
}

Response call(Service& s, const std::string& method, const std::string& path, const json& body = nullptr) {
  return in_process(s)(method, path, body);
}

void expect_blind(const json& payload) {
  const auto text = payload.dump();
  for (const char* word : {"traditional", "llama", "gemini", "mock", "model_label", "model"}) {
    EXPECT_EQ(text.find(word), std::string::npos) << word << " leaked in " << text.substr(0, 200);
  }
}

}  // namespace

TEST(Store, KeyEncodingRoundTrips) {
  for (const char* key : {"user01", "a/b c", "%41", "ünï", ".."}) {
    EXPECT_EQ(service::detail::decode_key(service::detail::encode_key(key)), key);
    EXPECT_EQ(service::detail::encode_key(key).find('/'), std::string::npos);
  }
}

TEST(Store, FileStoreRoundTripsEveryKind) {
  const auto dir = support::temp_dir("store");
  {
    FileDocumentStore store(dir);
    store.put(DocKind::Catalog, "active", json::array({{{"a", 1}}}));
    store.put(DocKind::History, "u/1", json::array());
    store.put(DocKind::Session, "s1", json{{"x", "y"}});
    store.put(DocKind::Meta, "ingest", json{{"seed", 3}});
    store.append_lines(DocKind::Sheet, {json{{"n", 1}}, json{{"n", 2}}});
    store.append_lines(DocKind::Sheet, {json{{"n", 3}}});
  }
  FileDocumentStore again(dir);
  EXPECT_EQ(again.get(DocKind::Catalog, "active"), json::array({{{"a", 1}}}));
  EXPECT_EQ(again.get(DocKind::History, "u/1"), json::array());
  EXPECT_EQ(again.get(DocKind::Session, "s1"), (json{{"x", "y"}}));
  EXPECT_EQ(again.get(DocKind::Meta, "ingest"), (json{{"seed", 3}}));
  EXPECT_FALSE(again.get(DocKind::Session, "nope"));
  EXPECT_EQ(again.keys(DocKind::History), (std::vector<std::string>{"u/1"}));
  auto lines = again.lines(DocKind::Sheet);
  ASSERT_EQ(lines.size(), 3u);
  EXPECT_EQ(lines[2]["n"], 3);
  EXPECT_TRUE(std::filesystem::exists(dir / "sheets.jsonl"));
  for (const auto& e : std::filesystem::recursive_directory_iterator(dir)) {
    EXPECT_EQ(e.path().string().find(".tmp-"), std::string::npos) << e.path();
  }
  std::filesystem::remove_all(dir);
}

TEST(Ingest, ReferenceScaleShapes) {
  auto store = std::make_shared<MemoryDocumentStore>();
  auto summary = ingest(*store, base().tracks, base().histories, {});
  EXPECT_EQ(summary.genres.size(), 20u);
  EXPECT_EQ(summary.catalog_tracks, 300u);
  EXPECT_EQ(summary.users, base().histories.size());
  Service s(store, offline_config());
  EXPECT_EQ(s.catalog().size(), 300u);
  for (const auto& [user, full] : base().histories) {
    auto h = s.history(user);
    ASSERT_EQ(h.size(), 30u);
    EXPECT_EQ(h, top_played(full, 30));
  }
  const auto catalog = s.catalog();
  for (const auto& t : catalog.tracks()) {
    bool allowed = false;
    for (const auto& g : t.normalized_genres()) {
      allowed = allowed || std::find(summary.genres.begin(), summary.genres.end(), g) != summary.genres.end();
    }
    EXPECT_TRUE(allowed) << t.track_id;
  }
}

TEST(Ingest, StoreRoundTripThroughFiles) {
  const auto dir = support::temp_dir("ingest");
  auto store = std::make_shared<FileDocumentStore>(dir);
  ingest(*store, base().tracks, base().histories, {5, 20, 300, 30});
  auto reopened = std::make_shared<FileDocumentStore>(dir);
  Service s(reopened, offline_config());
  const auto full = Catalog::deduplicated(base().tracks);
  EXPECT_EQ(s.catalog(), sample_catalog(full, top_genres(full, 20), 300, 5));
  for (const auto& [user, h] : base().histories) EXPECT_EQ(s.history(user), top_played(h, 30));
  std::filesystem::remove_all(dir);
}

TEST(Endpoints, CatalogueLimits) {
  Service s(ingested_store(), offline_config());
  EXPECT_EQ(call(s, "GET", "/getAllDataEniac?limit=300").body.size(), 300u);
  EXPECT_EQ(call(s, "GET", "/getAllDataEniac").body.size(), 300u);
  auto five = call(s, "GET", "/getAllDataEniac?limit=5").body;
  ASSERT_EQ(five.size(), 5u);
  EXPECT_EQ(five[4], call(s, "GET", "/getAllDataEniac").body[4]);
  EXPECT_TRUE(call(s, "GET", "/getAllDataEniac?limit=0").body.empty());
  EXPECT_EQ(call(s, "GET", "/getAllDataEniac?limit=-3").status, 422);
  EXPECT_EQ(call(s, "GET", "/getAllDataEniac?limit=abc").status, 422);
  EXPECT_EQ(call(s, "POST", "/getAllDataEniac").status, 405);

  Service empty(std::make_shared<MemoryDocumentStore>(), offline_config());
  EXPECT_EQ(call(empty, "GET", "/getAllDataEniac?limit=300").status, 404);
}

TEST(Endpoints, UserData) {
  auto store = ingested_store();
  store->put(DocKind::History, "quiet", json::array());
  Service s(store, offline_config());
  auto rows = call(s, "GET", "/getUserData/user01");
  ASSERT_EQ(rows.status, 200);
  ASSERT_EQ(rows.body.size(), 30u);
  for (std::size_t i = 1; i < rows.body.size(); ++i) {
    EXPECT_GE(rows.body[i - 1]["play_count"].get<int>(), rows.body[i]["play_count"].get<int>());
  }
  EXPECT_EQ(call(s, "GET", "/getUserData/nobody").status, 404);
  auto quiet = call(s, "GET", "/getUserData/quiet");
  EXPECT_EQ(quiet.status, 200);
  EXPECT_TRUE(quiet.body.empty());
}

TEST(Endpoints, RecommendTraditional) {
  Service s(ingested_store(), offline_config());
  auto res = call(s, "POST", "/recommend", {{"user_id", "user01"}, {"engine", "traditional"}});
  ASSERT_EQ(res.status, 200) << res.body.dump();
  const auto& list = res.body["recommendations"];
  ASSERT_EQ(list.size(), 20u);
  for (const char* field : {"rank", "score", "genre", "song_name", "artist_name"}) {
    EXPECT_TRUE(list[0].contains(field)) << field;
  }
  EXPECT_GE(res.body["inference_seconds"].get<double>(), 0.0);
  EXPECT_LT(res.body["inference_seconds"].get<double>(), 1.0);
  auto k5 = call(s, "POST", "/recommend", {{"user_id", "user01"}, {"engine", "traditional"}, {"k", 5}});
  EXPECT_EQ(k5.body["recommendations"].size(), 5u);
}

TEST(Endpoints, RecommendRepeatable) {
  Service s(ingested_store(), offline_config());
  const auto first = call(s, "POST", "/recommend", {{"user_id", "user03"}, {"engine", "traditional"}}).body["recommendations"];
  for (int i = 0; i < 100; ++i) {
    ASSERT_EQ(call(s, "POST", "/recommend", {{"user_id", "user03"}, {"engine", "traditional"}}).body["recommendations"],
              first);
  }
}

TEST(Endpoints, RecommendMockIsDeterministic) {
  Service s(ingested_store(), offline_config());
  auto a = call(s, "POST", "/recommend", {{"user_id", "user02"}, {"engine", "mock"}});
  auto b = call(s, "POST", "/recommend", {{"user_id", "user02"}, {"engine", "mock"}});
  ASSERT_EQ(a.status, 200) << a.body.dump();
  EXPECT_EQ(a.body["recommendations"].size(), 20u);
  EXPECT_EQ(a.body["recommendations"], b.body["recommendations"]);
  EXPECT_EQ(a.body["details"]["transcript"].size(), 4u);
}

TEST(Endpoints, RecommendErrors) {
  auto config = offline_config();
  config.mock_llm = false;
  Service s(ingested_store(), config);
  auto unconfigured = call(s, "POST", "/recommend", {{"user_id", "user01"}, {"engine", "llama"}});
  EXPECT_EQ(unconfigured.status, 503);
  EXPECT_EQ(unconfigured.body["error"], "configuration_error");
  EXPECT_EQ(call(s, "POST", "/recommend", {{"user_id", "user01"}, {"engine", "gemini"}}).status, 503);
  EXPECT_EQ(call(s, "POST", "/recommend", {{"user_id", "user01"}, {"engine", "oracle"}}).status, 422);
  EXPECT_EQ(call(s, "POST", "/recommend", {{"engine", "traditional"}}).status, 422);
  EXPECT_EQ(call(s, "POST", "/recommend", {{"user_id", "ghost"}, {"engine", "traditional"}}).status, 404);
  EXPECT_EQ(call(s, "POST", "/recommend", {{"user_id", "user01"}, {"engine", "traditional"}, {"k", 0}}).status, 422);
  Request bad{"POST", "/recommend", {}, "{oops"};
  EXPECT_EQ(s.handle(bad).status, 400);
  EXPECT_EQ(call(s, "GET", "/nowhere").status, 404);
}

TEST(Endpoints, EngineFailureCarriesTranscript) {
  auto config = offline_config();
  config.mock_llm = false;
  config.env = [](const std::string& k) -> std::optional<std::string> {
    if (k == "GROQ_API_KEY") return "k";
    if (k == "GROQ_BASE_URL") return "http://127.0.0.1:1";
    if (k == "ENGINE_TIMEOUT_SECONDS") return "2";
    return std::nullopt;
  };
  Service s(ingested_store(), config);
  auto res = call(s, "POST", "/recommend", {{"user_id", "user01"}, {"engine", "llama"}});
  EXPECT_EQ(res.status, 502);
  EXPECT_EQ(res.body["failed_task"], "read_catalogue");
  EXPECT_TRUE(res.body["transcript"].is_array());
}

TEST(Sessions, CreateBlindThreeByTen) {
  Service s(ingested_store(), offline_config());
  auto res = call(s, "POST", "/sessions", {{"user_id", "user01"}, {"seed", 9}});
  ASSERT_EQ(res.status, 201) << res.body.dump();
  const auto& view = res.body;
  ASSERT_EQ(view["arms"].size(), 3u);
  std::set<std::string> labels;
  for (const auto& arm : view["arms"]) {
    EXPECT_EQ(arm["tracks"].size(), kPlaylistSize);
    labels.insert(arm["blind_label"].get<std::string>());
    EXPECT_EQ(arm["responses_count"], 0);
    EXPECT_TRUE(arm["rating"].is_null());
  }
  EXPECT_EQ(labels.size(), 3u);
  EXPECT_EQ(view["state"], "in-progress");
  expect_blind(view);
  expect_blind(call(s, "GET", "/sessions/" + view["session_id"].get<std::string>()).body);
}

TEST(Sessions, SameSeedSameContent) {
  Service s(ingested_store(), offline_config());
  auto a = call(s, "POST", "/sessions", {{"user_id", "user04"}, {"seed", 77}}).body;
  auto b = call(s, "POST", "/sessions", {{"user_id", "user04"}, {"seed", 77}}).body;
  EXPECT_NE(a["session_id"], b["session_id"]);
  a.erase("session_id");
  b.erase("session_id");
  EXPECT_EQ(a, b);
  auto c = call(s, "POST", "/sessions", {{"user_id", "user04"}, {"seed", 78}}).body;
  c.erase("session_id");
  EXPECT_NE(a, c);
}

TEST(Sessions, TopTenOfEachEngineIsKept) {
  Service s(ingested_store(), offline_config());
  auto view = call(s, "POST", "/sessions", {{"user_id", "user05"}, {"seed", 1}}).body;
  const auto id = view["session_id"].get<std::string>();
  auto session = s.load_session(id);
  for (const auto& arm : session.arms) {
    ASSERT_EQ(arm.full_list.size(), 20u);
    for (std::size_t i = 0; i < kPlaylistSize; ++i) EXPECT_EQ(arm.tracks[i].track, arm.full_list[i].track);
  }
  auto trad = call(s, "POST", "/recommend", {{"user_id", "user05"}, {"engine", "traditional"}}).body["recommendations"];
  for (const auto& arm : session.arms) {
    if (arm.model != metrics::ModelLabel::Traditional) continue;
    for (std::size_t i = 0; i < kPlaylistSize; ++i) EXPECT_EQ(arm.tracks[i].track.track_id, trad[i]["track_id"]);
  }
}

TEST(Sessions, ResponsesRatingsAndCompletion) {
  auto store = ingested_store();
  Service s(store, offline_config());
  auto view = call(s, "POST", "/sessions", {{"user_id", "user01"}, {"seed", 2}}).body;
  const auto id = view["session_id"].get<std::string>();
  const auto path = "/sessions/" + id;
  const auto& arm0 = view["arms"][0];
  const auto label = arm0["blind_label"].get<std::string>();
  const auto t0 = arm0["tracks"][0]["track_id"].get<std::string>();

  EXPECT_EQ(call(s, "POST", path + "/responses", {{"blind_label", label}, {"track_id", t0}, {"like", 1}, {"known", 0}}).status, 200);
  auto again = call(s, "POST", path + "/responses", {{"blind_label", label}, {"track_id", t0}, {"like", 0}, {"known", 1}});
  EXPECT_EQ(again.body["responses_count"], 1);
  expect_blind(again.body);
  auto current = call(s, "GET", path).body;
  EXPECT_EQ(current["arms"][0]["tracks"][0]["response"], (json{{"like", 0}, {"known", 1}}));

  EXPECT_EQ(call(s, "POST", path + "/rating", {{"blind_label", label}, {"rating", 11}}).status, 422);
  EXPECT_EQ(call(s, "POST", path + "/rating", {{"blind_label", label}, {"rating", 7.5}}).status, 422);
  EXPECT_EQ(call(s, "POST", path + "/rating", {{"blind_label", label}, {"rating", -1}}).status, 422);
  EXPECT_EQ(call(s, "POST", path + "/rating", {{"blind_label", "zzzz"}, {"rating", 5}}).status, 404);
  EXPECT_EQ(call(s, "POST", path + "/responses", {{"blind_label", label}, {"track_id", "nope"}, {"like", 1}, {"known", 0}}).status, 404);
  EXPECT_EQ(call(s, "POST", path + "/responses", {{"blind_label", label}, {"track_id", t0}, {"like", 2}, {"known", 0}}).status, 422);
  EXPECT_EQ(call(s, "POST", "/sessions/unknown/rating", {{"blind_label", label}, {"rating", 5}}).status, 404);
  EXPECT_EQ(call(s, "GET", path + "/export").status, 409);

  EXPECT_TRUE(call(s, "GET", "/report").body["empty"].get<bool>());
  for (const auto& arm : view["arms"]) {
    const auto l = arm["blind_label"].get<std::string>();
    for (const auto& t : arm["tracks"]) {
      call(s, "POST", path + "/responses", {{"blind_label", l}, {"track_id", t["track_id"]}, {"like", 1}, {"known", 0}});
    }
    auto ack = call(s, "POST", path + "/rating", {{"blind_label", l}, {"rating", 8}});
    EXPECT_TRUE(ack.body["arm_complete"].get<bool>());
  }
  EXPECT_EQ(call(s, "GET", path).body["state"], "complete");
  EXPECT_EQ(store->lines(DocKind::Sheet).size(), 3u);
  EXPECT_EQ(call(s, "POST", path + "/rating", {{"blind_label", label}, {"rating", 5}}).status, 409);
  auto exported = call(s, "GET", path + "/export");
  ASSERT_EQ(exported.status, 200);
  std::set<std::string> models;
  for (const auto& a : exported.body["arms"]) models.insert(a["model_label"].get<std::string>());
  EXPECT_EQ(models, (std::set<std::string>{"traditional", "llama", "gemini"}));

  auto report = call(s, "GET", "/report").body;
  ASSERT_EQ(report["reports"].size(), 3u);
  for (const auto& r : report["reports"]) {
    EXPECT_TRUE(r["std_degenerate"].get<bool>());
    EXPECT_EQ(r["lr_percent"]["mean"], 100.0);
    EXPECT_EQ(r["rating"]["mean"], 8.0);
  }
}

TEST(Sessions, EngineFailureCreatesNothing) {
  auto store = ingested_store();
  auto config = offline_config();
  config.mock_llm = false;
  Service s(store, config);
  auto res = call(s, "POST", "/sessions", {{"user_id", "user01"}, {"seed", 1}});
  EXPECT_EQ(res.status, 503);
  EXPECT_TRUE(store->keys(DocKind::Session).empty());
}

TEST(Sessions, ShortEngineListIsRejected) {
  auto store = ingested_store();
  Service s(store, offline_config());
  s.set_engine("gemini", [](const EngineContext& ctx) {
    auto list = cbf::recommend(ctx.catalog, ctx.history, {5, 5});
    return EngineRun{list, json::object()};
  });
  EXPECT_EQ(call(s, "POST", "/sessions", {{"user_id", "user01"}, {"seed", 1}}).status, 502);
  EXPECT_TRUE(store->keys(DocKind::Session).empty());
}

TEST(Sessions, ConcurrentResponsesAreSerialized) {
  const auto dir = support::temp_dir("concurrent");
  auto store = ingested_store(std::make_shared<FileDocumentStore>(dir));
  Service s(store, offline_config());
  auto view = call(s, "POST", "/sessions", {{"user_id", "user06"}, {"seed", 4}}).body;
  const auto path = "/sessions/" + view["session_id"].get<std::string>();
  std::vector<std::thread> threads;
  for (const auto& arm : view["arms"]) {
    for (const auto& t : arm["tracks"]) {
      threads.emplace_back([&, label = arm["blind_label"], id = t["track_id"]] {
        auto res = call(s, "POST", path + "/responses", {{"blind_label", label}, {"track_id", id}, {"like", 1}, {"known", 1}});
        EXPECT_EQ(res.status, 200);
      });
    }
  }
  for (auto& t : threads) t.join();
  const auto final_view = call(s, "GET", path).body;
  for (const auto& arm : final_view["arms"]) EXPECT_EQ(arm["responses_count"], 10);
  std::filesystem::remove_all(dir);
}

TEST(Http, ServesOverRealSockets) {
  auto store = ingested_store();
  auto config = offline_config();
  config.tools_over_http = true;
  httplib::Server server;
  const int port = server.bind_to_any_port("127.0.0.1");
  config.base_url = "http://127.0.0.1:" + std::to_string(port);
  Service s(store, config);
  s.mount(server);
  std::thread th([&] { server.listen_after_bind(); });
  server.wait_until_ready();

  httplib::Client client("127.0.0.1", port);
  auto res = client.Get("/getAllDataEniac?limit=300");
  ASSERT_TRUE(res);
  EXPECT_EQ(res->status, 200);
  EXPECT_EQ(json::parse(res->body).size(), 300u);
  EXPECT_EQ(res->get_header_value("Access-Control-Allow-Origin"), "*");
  auto pre = client.Options("/sessions");
  ASSERT_TRUE(pre);
  EXPECT_EQ(pre->status, 204);

  // The agent tools call back into the same server.
  auto rec = client.Post("/recommend", json{{"user_id", "user01"}, {"engine", "mock"}}.dump(), "application/json");
  ASSERT_TRUE(rec);
  ASSERT_EQ(rec->status, 200) << rec->body;
  auto body = json::parse(rec->body);
  EXPECT_EQ(body["details"]["transcript"][1]["tool_url"], config.base_url + "/getUserData/user01");

  auto sim = simulate_session(over_http(config.base_url), "user02", 3);
  EXPECT_EQ(sim.final_view["state"], "complete");
  server.stop();
  th.join();
}
