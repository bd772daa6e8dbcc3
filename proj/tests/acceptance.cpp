// Acceptance gate. Prints one PASS/FAIL line per criterion and exits non-zero
// when any criterion fails.

#include <array>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <functional>
#include <iostream>
#include <map>
#include <set>
#include <sstream>
#include <string>
#include <thread>
#include <vector>

#include <httplib.h>

#include "musrec/agents/mock.hpp"
#include "musrec/agents/pipeline.hpp"
#include "musrec/cbf.hpp"
#include "musrec/metrics.hpp"
#include "musrec/random.hpp"
#include "musrec/service/ingest.hpp"
#include "musrec/service/service.hpp"
#include "musrec/synthetic.hpp"
#include "support.hpp"

using namespace musrec;
using Clock = std::chrono::steady_clock;

namespace {

struct Outcome {
  bool pass = true;
  std::string detail;
};

class Check {
 public:
  void expect(bool ok, const std::string& what) {
    if (!ok && failures_.size() < 5) failures_.push_back(what);
    if (!ok) ++failed_;
  }
  bool ok() const { return failed_ == 0; }
  std::string summary() const {
    std::string s = std::to_string(failed_) + " failures";
    for (const auto& f : failures_) s += "; " + f;
    return s;
  }

 private:
  std::size_t failed_ = 0;
  std::vector<std::string> failures_;
};

int g_failed = 0;

void run(const std::string& id, const std::string& name, double budget_seconds, const std::function<Outcome()>& fn) {
  const auto start = Clock::now();
  Outcome out;
  try {
    out = fn();
  } catch (const std::exception& e) {
    out = {false, std::string("exception: ") + e.what()};
  }
  const double secs = std::chrono::duration<double>(Clock::now() - start).count();
  if (secs >= budget_seconds) {
    out.pass = false;
    out.detail += " over time budget";
  }
  char timing[64];
  std::snprintf(timing, sizeof timing, "%.3fs < %.0fs", secs, budget_seconds);
  std::cout << (out.pass ? "PASS " : "FAIL ") << id << " " << name << " [" << timing << "] " << out.detail << "\n";
  if (!out.pass) ++g_failed;
}

std::string capture(const std::string& cmd) {
  std::string out;
  FILE* pipe = popen(cmd.c_str(), "r");
  if (pipe == nullptr) throw std::runtime_error("cannot run " + cmd);
  std::array<char, 4096> buf{};
  while (std::fgets(buf.data(), buf.size(), pipe) != nullptr) out += buf.data();
  const int status = pclose(pipe);
  if (status != 0) throw std::runtime_error(cmd + " exited with " + std::to_string(status) + ": " + out);
  return out;
}

struct RunningServer {
  httplib::Server server;
  std::thread thread;
  int port = 0;
  std::unique_ptr<service::Service> service;

  RunningServer(std::shared_ptr<service::DocumentStore> store, service::ServiceConfig config) {
    port = server.bind_to_any_port("127.0.0.1");
    config.base_url = "http://127.0.0.1:" + std::to_string(port);
    service = std::make_unique<service::Service>(std::move(store), std::move(config));
    service->mount(server);
    thread = std::thread([this] { server.listen_after_bind(); });
    server.wait_until_ready();
  }
  ~RunningServer() {
    server.stop();
    thread.join();
  }
};

service::ServiceConfig offline() {
  service::ServiceConfig c;
  c.mock_llm = true;
  c.env = [](const std::string&) -> std::optional<std::string> { return std::nullopt; };
  c.retry.log = nullptr;
  return c;
}

// ---------------------------------------------------------------------------

Outcome cosine_oracle() {
  SeededRng rng(20240601);
  Check check;
  auto draw = [&](std::size_t dim) {
    std::vector<double> v(dim, 0.0);
    for (auto& x : v) {
      if (rng.below(100) < 60) continue;  // sparse
      x = static_cast<double>(rng.below(1u << 30)) / static_cast<double>(1u << 20);
    }
    return v;
  };
  for (int i = 0; i < 1000; ++i) {
    const auto dim = 1 + rng.below(50);
    const auto xv = draw(dim), yv = draw(dim);
    const auto x = cbf::GenreVector::from_dense(xv), y = cbf::GenreVector::from_dense(yv);
    const double got = cbf::cosine_similarity(x, y);
    long double dot = 0, nx = 0, ny = 0;
    for (std::size_t k = 0; k < dim; ++k) {
      dot += static_cast<long double>(xv[k]) * yv[k];
      nx += static_cast<long double>(xv[k]) * xv[k];
      ny += static_cast<long double>(yv[k]) * yv[k];
    }
    const double want = (nx == 0 || ny == 0) ? 0.0 : static_cast<double>(dot / (std::sqrt(nx) * std::sqrt(ny)));
    check.expect(std::fabs(got - want) <= 1e-9, "pair " + std::to_string(i));
    if (!x.is_zero()) check.expect(std::fabs(cbf::cosine_similarity(x, x) - 1.0) <= 1e-9, "identity " + std::to_string(i));
    const double c = 0.5 + static_cast<double>(rng.below(1000));
    auto scaled = xv;
    for (auto& v : scaled) v *= c;
    check.expect(std::fabs(cbf::cosine_similarity(cbf::GenreVector::from_dense(scaled), y) - got) <= 1e-9,
                 "scaling " + std::to_string(i));
    // Orthogonal companion: y restricted to indices where x is zero.
    auto ortho = yv;
    for (std::size_t k = 0; k < dim; ++k) {
      if (xv[k] != 0.0) ortho[k] = 0.0;
    }
    check.expect(cbf::cosine_similarity(x, cbf::GenreVector::from_dense(ortho)) <= 1e-9, "orthogonal " + std::to_string(i));
  }
  return {check.ok(), "1000 pairs, tol 1e-9, " + check.summary()};
}

Outcome ranking_oracle() {
  SeededRng rng(777);
  Check check;
  std::size_t ties = 0;
  for (int trial = 0; trial < 200; ++trial) {
    std::vector<Track> tracks;
    std::vector<std::pair<std::string, std::vector<std::string>>> plain;
    const auto n = 1 + rng.below(20);
    const auto vocab = 1 + rng.below(10);
    for (std::size_t i = 0; i < n; ++i) {
      std::vector<std::string> gs;
      for (std::size_t g = 0; g < rng.below(4); ++g) {
        auto label = "genre" + std::to_string(rng.below(vocab));
        if (std::find(gs.begin(), gs.end(), label) == gs.end()) gs.push_back(label);
      }
      // Ids are shuffled relative to catalog order so the tie-break is exercised.
      const auto id = "t" + std::to_string(100 + rng.below(900)) + "_" + std::to_string(i);
      tracks.push_back(support::track(id, gs));
      plain.emplace_back(id, gs);
    }
    std::vector<HistoryEntry> entries;
    std::vector<std::pair<std::vector<std::string>, std::int64_t>> hist;
    const auto h = 1 + rng.below(8);
    for (std::size_t i = 0; i < h; ++i) {
      std::vector<std::string> gs{"genre" + std::to_string(rng.below(vocab + 2))};
      if (rng.below(2) == 0) gs.push_back("genre" + std::to_string(rng.below(vocab + 2)));
      if (gs.size() == 2 && gs[0] == gs[1]) gs.pop_back();
      const auto plays = static_cast<std::int64_t>(rng.below(12));
      entries.push_back(support::entry(support::track("h" + std::to_string(i), gs), plays));
      hist.emplace_back(gs, plays);
    }
    const auto want = support::oracle::rank(plain, hist, n);
    const auto got = cbf::recommend(Catalog(tracks), UserHistory("u", entries), {n, 5});
    check.expect(got.size() == want.size(), "size trial " + std::to_string(trial));
    for (std::size_t i = 0; i < std::min(got.size(), want.size()); ++i) {
      check.expect(got[i].track.track_id == want[i].track_id,
                   "trial " + std::to_string(trial) + " rank " + std::to_string(i + 1));
      check.expect(std::fabs(*got[i].score - want[i].score) <= 1e-9, "score trial " + std::to_string(trial));
      if (i > 0 && std::fabs(want[i].score - want[i - 1].score) <= 1e-12) ++ties;
    }
  }
  return {check.ok(), "200 catalogs, " + std::to_string(ties) + " tied neighbours, " + check.summary()};
}

Outcome metric_enumeration() {
  Check check;
  std::size_t sheets = 0, undefined = 0;
  for (std::size_t n = 1; n <= 6; ++n) {
    for (std::uint32_t mask = 0; mask < (1u << (2 * n)); ++mask) {
      metrics::EvaluationSheet s;
      s.model = metrics::ModelLabel::Traditional;
      std::size_t likes = 0, unknown = 0, liked_unknown = 0;
      for (std::size_t i = 0; i < n; ++i) {
        const bool like = (mask >> i) & 1u;
        const bool known = (mask >> (n + i)) & 1u;
        s.responses.push_back({"t" + std::to_string(i), like, known});
        likes += like;
        unknown += !known;
        liked_unknown += like && !known;
      }
      ++sheets;
      // Compare as rationals: value * denominator must give back the count.
      check.expect(metrics::like_rate(s) * n == static_cast<double>(likes), "LR");
      check.expect(metrics::like_rate(s) == static_cast<double>(likes) / n, "LR exact");
      check.expect(metrics::novelty_rate(s) == static_cast<double>(unknown) / n, "NR exact");
      const auto snr = metrics::successful_novelty_rate(s);
      check.expect(snr.has_value() == (unknown > 0), "SNR definedness");
      if (snr) check.expect(*snr == static_cast<double>(liked_unknown) / unknown, "SNR exact");
      if (!snr) ++undefined;
    }
  }
  return {check.ok(), std::to_string(sheets) + " sheets (N<=6), " + std::to_string(undefined) +
                          " with SNR undefined, " + check.summary()};
}

Outcome pipeline_conformance() {
  auto store = std::make_shared<service::MemoryDocumentStore>();
  const auto base = synthetic::generate({});
  service::ingest(*store, base.tracks, base.histories, {});
  service::Service svc(store, offline());
  const auto catalog = svc.catalog();
  const auto history = svc.history("user01");

  auto script = agents::user_script(catalog, history, 0);
  auto list = agents::extract_first_json_array(script["recommend_songs"]).value();
  list.insert(list.begin() + 5, json{{"genre", "genre 01"}, {"song_name", "Song That Does Not Exist"},
                                     {"artist_name", "Nobody"}, {"liked", false}, {"known", false}});
  script["recommend_songs"] = "Here are the songs:\n```json\n" + list.dump(2) + "\n```";

  agents::PipelineConfig config{"http://127.0.0.1:8080", svc.local_get(), 20, agents::PipelineSpec::defaults()};
  Check check;
  std::string first;
  for (int run = 0; run < 3; ++run) {
    agents::MockBackend backend(script);
    const auto result = agents::run_pipeline("user01", backend, config);
    check.expect(result.transcript.size() == 4, "four tasks");
    for (std::size_t i = 0; i < result.transcript.size(); ++i) {
      check.expect(result.transcript[i].task == agents::kTaskOrder[i], "task order");
    }
    const auto calls = backend.calls();
    for (std::size_t i = 0; i < calls.size(); ++i) check.expect(calls[i].task_name == agents::kTaskOrder[i], "call order");
    check.expect(!result.recommendations.empty() && result.recommendations.size() <= 20, "at most 20");
    for (const auto& r : result.recommendations) {
      const auto* t = catalog.find(r.track.track_id);
      check.expect(t != nullptr && *t == r.track, "resolves to catalog");
      check.expect(r.track.song_name != "Song That Does Not Exist", "planted item kept");
    }
    check.expect(result.dropped_hallucinations.size() == 1 &&
                     result.dropped_hallucinations[0].item["song_name"] == "Song That Does Not Exist" &&
                     result.dropped_hallucinations[0].reason == "off_catalog",
                 "planted item dropped");
    const auto dump = agents::to_json(result, false).dump();
    if (run == 0) first = dump;
    check.expect(dump == first, "bit-deterministic");
  }
  return {check.ok(), "mock backend, 3 runs identical, 1 off-catalogue item dropped, " + check.summary()};
}

struct ReferenceScale {
  std::shared_ptr<service::MemoryDocumentStore> store = std::make_shared<service::MemoryDocumentStore>();
  synthetic::Base base = synthetic::generate({});
  service::IngestSummary summary;
  ReferenceScale() { summary = service::ingest(*store, base.tracks, base.histories, {2024, 20, 300, 30}); }
};

Outcome reference_scale(ReferenceScale& p) {
  Check check;
  const auto full = Catalog::deduplicated(p.base.tracks);
  check.expect(full.size() >= 300, "base larger than the sample");
  check.expect(p.summary.genres.size() == 20, "20 genres");
  // Independent genre count over the base.
  std::map<std::string, std::size_t> counts;
  for (const auto& t : full.tracks()) {
    for (const auto& g : t.genres) ++counts[text::normalize(g)];
  }
  std::vector<std::pair<std::string, std::size_t>> ranked(counts.begin(), counts.end());
  std::sort(ranked.begin(), ranked.end(), [](const auto& a, const auto& b) {
    return a.second != b.second ? a.second > b.second : a.first < b.first;
  });
  for (std::size_t i = 0; i < 20; ++i) check.expect(p.summary.genres[i] == ranked[i].first, "genre " + std::to_string(i));
  check.expect(p.summary.catalog_tracks == 300, "300 sampled");
  for (const auto& [user, h] : p.base.histories) {
    const auto stored = p.store->get(service::DocKind::History, user);
    check.expect(stored && stored->size() == std::min<std::size_t>(30, h.size()), "history truncated for " + user);
  }

  RunningServer server(p.store, offline());
  httplib::Client client("127.0.0.1", server.port);
  auto res = client.Get("/getAllDataEniac?limit=300");
  check.expect(res && res->status == 200, "GET ok");
  std::size_t rows = 0;
  if (res) {
    const auto body = json::parse(res->body);
    rows = body.size();
    std::set<std::string> ids;
    const std::set<std::string> allowed(p.summary.genres.begin(), p.summary.genres.end());
    for (const auto& row : body) {
      ids.insert(row["track_id"].get<std::string>());
      bool ok = false;
      for (const auto& g : row["genres"]) ok = ok || allowed.count(text::normalize(g.get<std::string>())) != 0;
      check.expect(ok, "row outside top-20 genres");
    }
    check.expect(ids.size() == 300, "unique ids");
  }
  check.expect(rows == 300, "300 rows");
  return {check.ok(), std::to_string(full.size()) + "-track base, 20 genres, /getAllDataEniac?limit=300 -> " +
                          std::to_string(rows) + " rows, " + check.summary()};
}

Outcome latency(ReferenceScale& p) {
  RunningServer server(p.store, offline());
  httplib::Client client("127.0.0.1", server.port);
  double worst = 0.0, engine = 0.0;
  Check check;
  for (int i = 0; i < 5; ++i) {
    const auto start = Clock::now();
    auto res = client.Post("/recommend", json{{"user_id", "user01"}, {"engine", "traditional"}}.dump(),
                           "application/json");
    const double secs = std::chrono::duration<double>(Clock::now() - start).count();
    worst = std::max(worst, secs);
    check.expect(res && res->status == 200, "status");
    if (res && res->status == 200) {
      const auto body = json::parse(res->body);
      check.expect(body["recommendations"].size() == 20, "20 tracks");
      engine = std::max(engine, body["inference_seconds"].get<double>());
    }
  }
  check.expect(worst < 1.0, "end-to-end under 1 s");
  char buf[160];
  std::snprintf(buf, sizeof buf, "worst end-to-end %.4fs, engine-only %.4fs over 300 tracks, ", worst, engine);
  return {check.ok(), buf + check.summary()};
}

// Rater policy re-derived from the stored history rows: like when the shown
// genre is in the top-5 genres by summed plays, known when in the history.
Outcome blind_session_flow() {
  const auto dir = support::temp_dir("acceptance");
  const std::string cli = MUSREC_CLI_PATH;
  const std::string d = " --data-dir " + dir.string();
  capture(cli + d + " synth --catalog-out " + (dir / "catalog.json").string() + " --histories-out " +
          (dir / "histories.json").string() + " > /dev/null");
  capture(cli + d + " ingest " + (dir / "catalog.json").string() + " " + (dir / "histories.json").string() +
          " --seed 11 > /dev/null");
  const auto out = json::parse(capture(cli + d + " --mock-llm eval-sim --user user03 --seed 42 2>/dev/null"));
  const auto session_id = out.at("session_id").get<std::string>();
  const auto report = out.at("report");

  service::FileDocumentStore store(dir);
  const auto session = store.get(service::DocKind::Session, session_id).value();
  const auto rows = store.get(service::DocKind::History, "user03").value();

  std::map<std::string, std::int64_t> totals;
  std::set<std::string> history_ids;
  for (const auto& row : rows) {
    history_ids.insert(row["track"]["track_id"].get<std::string>());
    std::set<std::string> seen;
    for (const auto& g : row["track"]["genres"]) {
      auto label = text::normalize(g.get<std::string>());
      if (seen.insert(label).second) totals[label] += row["play_count"].get<std::int64_t>();
    }
  }
  std::vector<std::pair<std::string, std::int64_t>> ranked(totals.begin(), totals.end());
  std::sort(ranked.begin(), ranked.end(), [](const auto& a, const auto& b) {
    return a.second != b.second ? a.second > b.second : a.first < b.first;
  });
  std::set<std::string> profile;
  for (std::size_t i = 0; i < ranked.size() && i < 5; ++i) profile.insert(ranked[i].first);

  struct Expected {
    double lr, nr;
    std::optional<double> snr;
    int rating;
  };
  std::map<std::string, Expected> expected;
  Check check;
  check.expect(session["state"] == "complete", "session complete");
  for (const auto& arm : session["arms"]) {
    check.expect(arm["tracks"].size() == 10, "10 tracks per arm");
    int likes = 0, unknown = 0, liked_unknown = 0;
    for (const auto& r : arm["tracks"]) {
      const bool like = profile.count(text::normalize(r["genre"].get<std::string>())) != 0;
      const bool known = history_ids.count(r["track"]["track_id"].get<std::string>()) != 0;
      likes += like;
      unknown += !known;
      liked_unknown += like && !known;
    }
    Expected e{10.0 * likes, 10.0 * unknown, std::nullopt, likes};
    if (unknown > 0) e.snr = 100.0 * liked_unknown / unknown;
    expected[arm["model_label"].get<std::string>()] = e;
  }
  check.expect(expected.size() == 3, "three models");
  check.expect(!report.at("empty").get<bool>(), "report present");
  std::ostringstream detail;
  for (const auto& r : report.at("reports")) {
    const auto model = r["model"].get<std::string>();
    const auto& e = expected.at(model);
    auto close = [](const json& v, double want) { return std::fabs(v.get<double>() - want) <= 0.005 + 1e-9; };
    check.expect(close(r["lr_percent"]["mean"], e.lr), model + " LR");
    check.expect(close(r["nr_percent"]["mean"], e.nr), model + " NR");
    check.expect(r["snr_percent"].is_null() == !e.snr, model + " SNR definedness");
    if (e.snr && !r["snr_percent"].is_null()) check.expect(close(r["snr_percent"]["mean"], *e.snr), model + " SNR");
    check.expect(close(r["rating"]["mean"], e.rating), model + " rating");
    check.expect(r["std_degenerate"].get<bool>(), model + " degenerate flag");
    char buf[128];
    std::snprintf(buf, sizeof buf, "%s LR %.1f NR %.1f SNR %s; ", model.c_str(), e.lr, e.nr,
                  e.snr ? std::to_string(*e.snr).substr(0, 5).c_str() : "n/a");
    detail << buf;
  }
  check.expect(report.at("reports").size() == 3, "three reports");
  std::filesystem::remove_all(dir);
  return {check.ok(), detail.str() + check.summary()};
}

}  // namespace

int main() {
  run("AC1", "cosine similarity oracle", 5, cosine_oracle);
  run("AC2", "TF-IDF ranking oracle", 30, ranking_oracle);
  run("AC3", "metric enumeration", 10, metric_enumeration);
  run("AC4", "mock pipeline conformance", 5, pipeline_conformance);
  ReferenceScale reference;
  run("AC5", "reference-scale configuration", 30, [&] { return reference_scale(reference); });
  run("AC6", "traditional latency", 5, [&] { return latency(reference); });
  run("AC7", "blind session via simulated rater CLI", 60, blind_session_flow);
  std::cout << (g_failed == 0 ? "ALL ACCEPTANCE CRITERIA PASS" : std::to_string(g_failed) + " CRITERIA FAILED") << "\n";
  return g_failed == 0 ? 0 : 1;
}
