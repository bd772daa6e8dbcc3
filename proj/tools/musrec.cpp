// musrec: operator CLI for ingesting data, running engines, serving the API
// and driving simulated evaluation sessions.

#include <csignal>
#include <cstdlib>
#include <fstream>
#include <iostream>
#include <memory>
#include <string>

#include <CLI11.hpp>
#include <httplib.h>
#include <nlohmann/json.hpp>

#include "musrec/domain.hpp"
#include "musrec/error.hpp"
#include "musrec/service/ingest.hpp"
#include "musrec/service/service.hpp"
#include "musrec/service/simulate.hpp"
#include "musrec/service/store.hpp"
#include "musrec/synthetic.hpp"

namespace {

using musrec::service::json;

std::string env_or(const char* name, std::string fallback) {
  const char* v = std::getenv(name);
  return v != nullptr && *v != '\0' ? std::string(v) : std::move(fallback);
}

bool env_flag(const char* name) {
  const char* v = std::getenv(name);
  return v != nullptr && std::string(v) != "" && std::string(v) != "0";
}

std::map<std::string, musrec::UserHistory> load_histories(const std::string& path) {
  return musrec::histories_from_json(json::parse(musrec::read_file(path)));
}

void write_json(const std::string& path, const json& j) {
  std::ofstream out(path);
  if (!out) throw musrec::Error(musrec::ErrorKind::Configuration, "cannot write " + path);
  out << j.dump(2) << '\n';
}

httplib::Server* g_server = nullptr;

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Music recommendation service and evaluation tools"};
  app.require_subcommand(1);

  std::string data_dir = env_or("DATA_DIR", "./data-store");
  bool mock_llm = env_flag("MUSREC_MOCK_LLM");
  std::string agents_spec;
  app.add_option("--data-dir", data_dir, "Document store directory (env DATA_DIR)");
  app.add_flag("--mock-llm", mock_llm, "Use scripted backends for llama and gemini (env MUSREC_MOCK_LLM)");
  app.add_option("--agents", agents_spec, "Agent/task definitions JSON (defaults to the built-in set)")
      ->check(CLI::ExistingFile);

  auto* synth = app.add_subcommand("synth", "Write a synthetic catalogue and listening log");
  musrec::synthetic::Options synth_opts;
  std::string synth_catalog = "catalog.json", synth_histories = "histories.json";
  synth->add_option("--catalog-out", synth_catalog);
  synth->add_option("--histories-out", synth_histories);
  synth->add_option("--seed", synth_opts.seed);
  synth->add_option("--tracks", synth_opts.tracks);
  synth->add_option("--users", synth_opts.users);

  auto* ingest = app.add_subcommand("ingest", "Load catalogue and histories into the store");
  std::string catalog_path, histories_path;
  musrec::service::IngestOptions ingest_opts;
  ingest->add_option("catalog", catalog_path, "Catalogue (.json or .csv)")->required()->check(CLI::ExistingFile);
  ingest->add_option("histories", histories_path, "History rows (.json)")->required()->check(CLI::ExistingFile);
  ingest->add_option("--seed", ingest_opts.seed, "Sampling seed");
  ingest->add_option("--top-genres", ingest_opts.top_genres, "Genres kept for sampling")->capture_default_str();
  ingest->add_option("--sample", ingest_opts.sample, "Catalogue size")->capture_default_str();
  ingest->add_option("--history-limit", ingest_opts.history_limit, "Most played tracks kept per user")
      ->capture_default_str();

  auto* recommend = app.add_subcommand("recommend", "Run one engine for one user");
  std::string user, engine = "traditional";
  std::size_t k = 20;
  recommend->add_option("--user", user)->required();
  recommend->add_option("--engine", engine)->check(CLI::IsMember({"traditional", "llama", "gemini", "mock"}));
  recommend->add_option("-k", k)->capture_default_str();

  auto* serve = app.add_subcommand("serve", "Serve the HTTP API");
  int port = std::stoi(env_or("PORT", "8080"));
  std::string host = "0.0.0.0";
  serve->add_option("--port", port, "Listen port (env PORT)");
  serve->add_option("--host", host);

  auto* report = app.add_subcommand("report", "Aggregate completed evaluation sheets");
  bool report_json = false;
  report->add_flag("--json", report_json);

  auto* eval_sim = app.add_subcommand("eval-sim", "Complete one blind session with a scripted rater");
  std::string sim_user, sim_url;
  std::uint64_t sim_seed = 0;
  eval_sim->add_option("--user", sim_user)->required();
  eval_sim->add_option("--seed", sim_seed);
  eval_sim->add_option("--url", sim_url, "Talk to a running server instead of the store directly");

  CLI11_PARSE(app, argc, argv);

  try {
    if (synth->parsed()) {
      const auto base = musrec::synthetic::generate(synth_opts);
      json tracks = json::array();
      for (const auto& t : base.tracks) tracks.push_back(t);
      json rows = json::array();
      for (const auto& [_, h] : base.histories) {
        for (const auto& e : h.entries()) rows.push_back(musrec::history_row(h.user_id(), e));
      }
      write_json(synth_catalog, tracks);
      write_json(synth_histories, rows);
      std::cout << "wrote " << base.tracks.size() << " tracks to " << synth_catalog << " and " << rows.size()
                << " history rows to " << synth_histories << '\n';
      return 0;
    }

    auto store = std::make_shared<musrec::service::FileDocumentStore>(data_dir);
    if (ingest->parsed()) {
      const auto summary = musrec::service::ingest(*store, musrec::load_tracks(catalog_path),
                                                   load_histories(histories_path), ingest_opts);
      std::cout << musrec::service::to_json(summary).dump(2) << '\n';
      return 0;
    }

    musrec::service::ServiceConfig config;
    config.mock_llm = mock_llm;
    config.base_url = "http://127.0.0.1:" + std::to_string(port);
    if (!agents_spec.empty()) config.agents_spec_path = agents_spec;
    musrec::service::Service service(store, config);

    if (recommend->parsed()) {
      musrec::service::Request req{"POST", "/recommend", {}, json{{"user_id", user}, {"engine", engine}, {"k", k}}.dump()};
      const auto res = service.handle(req);
      std::cout << res.body.dump(2) << '\n';
      return res.status == 200 ? 0 : 1;
    }
    if (report->parsed()) {
      const auto body = service.report();
      if (report_json) {
        std::cout << body.dump(2) << '\n';
      } else if (body.at("empty").get<bool>()) {
        std::cout << "no completed evaluation sessions\n";
      } else {
        std::cout << body.at("table").get<std::string>();
      }
      return 0;
    }
    if (eval_sim->parsed()) {
      const auto transport =
          sim_url.empty() ? musrec::service::in_process(service) : musrec::service::over_http(sim_url);
      const auto result = musrec::service::simulate_session(transport, sim_user, sim_seed);
      std::cout << json{{"session_id", result.session_id}, {"report", result.report}}.dump(2) << '\n';
      return 0;
    }
    if (serve->parsed()) {
      httplib::Server server;
      service.mount(server);
      g_server = &server;
      std::signal(SIGINT, [](int) { g_server->stop(); });
      std::signal(SIGTERM, [](int) { g_server->stop(); });
      std::cerr << "listening on " << host << ":" << port << " (data in " << data_dir << ")\n";
      if (!server.listen(host, port)) {
        std::cerr << "cannot listen on " << host << ":" << port << '\n';
        return 1;
      }
      return 0;
    }
  } catch (const musrec::Error& e) {
    std::cerr << "error (" << musrec::to_string(e.kind()) << "): " << e.what() << '\n';
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 2;
  }
  return 0;
}
