#pragma once

// REST surface tying the recommenders, blind sessions, and metrics together.
// Requests are routed by Service::handle, which is shared by the HTTP server
// and by in-process callers (agent tools, CLI, tests).

#include <chrono>
#include <cstdint>
#include <functional>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <random>
#include <regex>
#include <string>
#include <utility>
#include <vector>

#include <httplib.h>
#include <nlohmann/json.hpp>

#include "musrec/agents/backend.hpp"
#include "musrec/agents/mock.hpp"
#include "musrec/agents/pipeline.hpp"
#include "musrec/cbf.hpp"
#include "musrec/domain.hpp"
#include "musrec/error.hpp"
#include "musrec/http.hpp"
#include "musrec/metrics.hpp"
#include "musrec/recommendation.hpp"
#include "musrec/service/session.hpp"
#include "musrec/service/store.hpp"

namespace musrec::service {

using json = nlohmann::json;

inline constexpr std::size_t kDefaultCatalogLimit = 300;
inline constexpr const char* kActiveCatalogKey = "active";

struct Request {
  std::string method;
  std::string path;
  std::map<std::string, std::string> query;
  std::string body;
};

struct Response {
  int status = 200;
  json body;
};

struct EngineContext {
  std::string user_id;
  const Catalog& catalog;
  const UserHistory& history;
  std::size_t k;
  http::Get get;
  std::string base_url;
};

struct EngineRun {
  RecommendationList list;
  json details = json::object();
};

using Engine = std::function<EngineRun(const EngineContext&)>;
using BackendFactory = std::function<std::shared_ptr<agents::ChatBackend>(const EngineContext&)>;

struct ServiceConfig {
  std::string base_url = "http://127.0.0.1:8080";
  // Replace the hosted llama/gemini backends with scripted mocks.
  bool mock_llm = false;
  // Agent tools call the service over real HTTP at base_url instead of
  // routing in-process.
  bool tools_over_http = false;
  agents::EnvLookup env = agents::process_env();
  agents::RetryPolicy retry{};
  std::optional<std::string> agents_spec_path;
};

inline int status_for(ErrorKind kind) {
  switch (kind) {
    case ErrorKind::NotFound: return 404;
    case ErrorKind::Parse:
    case ErrorKind::ContractViolation: return 400;
    case ErrorKind::Validation:
    case ErrorKind::EmptyInput:
    case ErrorKind::EmptyVocabulary:
    case ErrorKind::EmptyProfile:
    case ErrorKind::UndefinedMetric: return 422;
    case ErrorKind::Conflict: return 409;
    case ErrorKind::Configuration: return 503;
    case ErrorKind::Tool:
    case ErrorKind::Backend:
    case ErrorKind::Engine: return 502;
  }
  return 500;
}

inline Response error_response(const Error& e) {
  return {status_for(e.kind()), json{{"error", to_string(e.kind())}, {"message", e.what()}}};
}

/// Runs the four-task agent pipeline with a backend made per request.
inline Engine agent_engine(BackendFactory factory, std::shared_ptr<const agents::PipelineSpec> spec) {
  return [factory = std::move(factory), spec = std::move(spec)](const EngineContext& ctx) {
    auto backend = factory(ctx);
    agents::PipelineConfig config{ctx.base_url, ctx.get, ctx.k, *spec};
    auto result = agents::run_pipeline(ctx.user_id, *backend, config);
    auto details = agents::to_json(result, true);
    details.erase("recommendations");
    return EngineRun{std::move(result.recommendations), std::move(details)};
  };
}

class Service {
 public:
  Service(std::shared_ptr<DocumentStore> store, ServiceConfig config = {})
      : store_(std::move(store)), config_(std::move(config)) {
    auto spec = std::make_shared<const agents::PipelineSpec>(
        config_.agents_spec_path ? agents::PipelineSpec::load(*config_.agents_spec_path)
                                 : agents::PipelineSpec::defaults());
    engines_["traditional"] = [](const EngineContext& ctx) {
      return EngineRun{cbf::recommend(ctx.catalog, ctx.history, {ctx.k, 5}), json::object()};
    };
    engines_["mock"] = agent_engine(
        [](const EngineContext& ctx) { return agents::scripted_backend(ctx.catalog, ctx.history, 0, ctx.k); }, spec);
    auto hosted = [this](agents::BackendId id, std::uint64_t variant) -> BackendFactory {
      if (config_.mock_llm) {
        return [variant](const EngineContext& ctx) {
          return agents::scripted_backend(ctx.catalog, ctx.history, variant, ctx.k);
        };
      }
      return [this, id](const EngineContext&) { return agents::backend_from_env(id, config_.env, config_.retry); };
    };
    engines_["llama"] = agent_engine(hosted(agents::BackendId::Llama, 1), spec);
    engines_["gemini"] = agent_engine(hosted(agents::BackendId::Gemini, 2), spec);
  }

  Service(const Service&) = delete;
  Service& operator=(const Service&) = delete;

  void set_engine(const std::string& name, Engine engine) { engines_[name] = std::move(engine); }

  DocumentStore& store() { return *store_; }
  const ServiceConfig& config() const { return config_; }

  Response handle(const Request& req) {
    try {
      return route(req);
    } catch (const agents::PipelineError& e) {
      return {status_for(ErrorKind::Engine),
              json{{"error", to_string(ErrorKind::Engine)},
                   {"message", e.what()},
                   {"failed_task", e.failed_task()},
                   {"transcript", agents::to_json(e.transcript(), true)}}};
    } catch (const Error& e) {
      return error_response(e);
    } catch (const json::exception& e) {
      return {400, json{{"error", "parse_error"}, {"message", e.what()}}};
    } catch (const std::exception& e) {
      return {500, json{{"error", "internal"}, {"message", e.what()}}};
    }
  }

  /// HTTP GET routed straight into handle(); used by agent tools when the
  /// service calls itself.
  http::Get local_get() {
    return [this](const std::string& url) {
      Request req;
      req.method = "GET";
      std::string target = url;
      if (auto scheme = target.find("://"); scheme != std::string::npos) {
        auto slash = target.find('/', scheme + 3);
        target = slash == std::string::npos ? "/" : target.substr(slash);
      }
      auto q = target.find('?');
      req.path = httplib::detail::decode_url(target.substr(0, q), false);
      if (q != std::string::npos) {
        httplib::Params params;
        httplib::detail::parse_query_text(target.substr(q + 1), params);
        for (const auto& [k, v] : params) req.query.emplace(k, v);
      }
      auto res = handle(req);
      return http::Response{res.status, res.body.dump(), {}};
    };
  }

  void mount(httplib::Server& server) {
    auto bridge = [this](const httplib::Request& hreq, httplib::Response& hres) {
      Request req{hreq.method, hreq.path, {}, hreq.body};
      for (const auto& [k, v] : hreq.params) req.query.emplace(k, v);
      auto res = handle(req);
      hres.status = res.status;
      hres.set_header("Access-Control-Allow-Origin", "*");
      hres.set_content(res.body.dump(), "application/json");
    };
    server.Get(".*", bridge);
    server.Post(".*", bridge);
    server.Options(".*", [](const httplib::Request&, httplib::Response& hres) {
      hres.set_header("Access-Control-Allow-Origin", "*");
      hres.set_header("Access-Control-Allow-Methods", "GET, POST, OPTIONS");
      hres.set_header("Access-Control-Allow-Headers", "Content-Type");
      hres.status = 204;
    });
  }

  // -------------------------------------------------------------------------
  // Typed operations

  Catalog catalog() const {
    auto doc = store_->get(DocKind::Catalog, kActiveCatalogKey);
    if (!doc) throw Error(ErrorKind::NotFound, "no catalog has been ingested");
    return Catalog(tracks_from_json(*doc));
  }

  UserHistory history(const std::string& user_id) const {
    auto doc = store_->get(DocKind::History, user_id);
    if (!doc) throw Error(ErrorKind::NotFound, "unknown user " + user_id);
    return history_from_rows(user_id, *doc);
  }

  json catalog_rows(std::size_t limit) const {
    auto doc = store_->get(DocKind::Catalog, kActiveCatalogKey);
    if (!doc) throw Error(ErrorKind::NotFound, "no catalog has been ingested");
    if (doc->size() > limit) doc->erase(doc->begin() + static_cast<std::ptrdiff_t>(limit), doc->end());
    return *doc;
  }

  struct Timed {
    EngineRun run;
    double seconds = 0.0;
  };

  /// Wall-clock covers the engine call only.
  Timed run_engine(const std::string& engine, const std::string& user_id, std::size_t k) {
    auto it = engines_.find(engine);
    if (it == engines_.end()) throw Error(ErrorKind::Validation, "unknown engine " + engine);
    const auto cat = catalog();
    const auto hist = history(user_id);
    EngineContext ctx{user_id, cat, hist, k, config_.tools_over_http ? http::default_get() : local_get(),
                      config_.base_url};
    const auto start = std::chrono::steady_clock::now();
    auto run = it->second(ctx);
    const std::chrono::duration<double> elapsed = std::chrono::steady_clock::now() - start;
    return {std::move(run), elapsed.count()};
  }

  BlindSession create_blind_session(const std::string& user_id, std::uint64_t seed) {
    std::vector<EngineOutput> outputs;
    for (auto model : metrics::kAllModels) {
      auto timed = run_engine(std::string(metrics::to_string(model)), user_id, 20);
      outputs.push_back({model, std::move(timed.run.list), timed.seconds});
    }
    auto session = create_session(new_session_id(), user_id, seed, std::move(outputs));
    store_->put(DocKind::Session, session.session_id, to_json(session));
    return session;
  }

  BlindSession load_session(const std::string& id) const {
    auto doc = store_->get(DocKind::Session, id);
    if (!doc) throw Error(ErrorKind::NotFound, "unknown session " + id);
    return session_from_json(*doc);
  }

  std::vector<metrics::EvaluationSheet> sheets() const {
    std::vector<metrics::EvaluationSheet> out;
    for (const auto& line : store_->lines(DocKind::Sheet)) out.push_back(metrics::sheet_from_json(line));
    return out;
  }

  json report() const {
    const auto all = sheets();
    if (all.empty()) return json{{"empty", true}, {"reports", json::array()}};
    const auto reports = metrics::aggregate_all(all);
    json arr = json::array();
    for (const auto& r : reports) arr.push_back(metrics::to_json(r));
    return json{{"empty", false}, {"reports", arr}, {"table", metrics::format_table(reports)}};
  }

 private:
  template <typename Fn>
  json mutate_session(const std::string& id, Fn&& fn) {
    std::shared_ptr<std::mutex> lock_ptr;
    {
      std::lock_guard guard(session_locks_mutex_);
      auto& slot = session_locks_[id];
      if (!slot) slot = std::make_shared<std::mutex>();
      lock_ptr = slot;
    }
    std::lock_guard session_guard(*lock_ptr);
    auto session = load_session(id);
    auto sheets = fn(session);
    if (!sheets.empty()) {
      std::vector<json> lines;
      for (const auto& s : sheets) lines.push_back(metrics::to_json(s));
      store_->append_lines(DocKind::Sheet, lines);
    }
    store_->put(DocKind::Session, id, to_json(session));
    return client_view(session);
  }

  static std::string new_session_id() {
    static std::mutex m;
    static std::mt19937_64 rng{std::random_device{}()};
    std::lock_guard lock(m);
    return text::to_hex(rng(), 16);
  }

  static json parse_body(const Request& req) {
    if (req.body.empty()) return json::object();
    auto j = json::parse(req.body, nullptr, false);
    if (j.is_discarded() || !j.is_object()) throw Error(ErrorKind::Parse, "request body must be a JSON object");
    return j;
  }

  static std::string required_string(const json& body, const char* field) {
    auto it = body.find(field);
    if (it == body.end() || !it->is_string() || it->get<std::string>().empty()) {
      throw Error(ErrorKind::Validation, std::string(field) + " is required");
    }
    return it->get<std::string>();
  }

  Response route(const Request& req) {
    static const std::regex user_re(R"(^/getUserData/([^/]+)$)");
    static const std::regex session_re(R"(^/sessions/([^/]+)$)");
    static const std::regex export_re(R"(^/sessions/([^/]+)/export$)");
    static const std::regex responses_re(R"(^/sessions/([^/]+)/responses$)");
    static const std::regex rating_re(R"(^/sessions/([^/]+)/rating$)");
    std::smatch m;
    const bool get = req.method == "GET";
    const bool post = req.method == "POST";
    auto wrong_method = [] { return Response{405, json{{"error", "method_not_allowed"}}}; };

    if (req.path == "/getAllDataEniac") {
      if (!get) return wrong_method();
      std::size_t limit = kDefaultCatalogLimit;
      if (auto it = req.query.find("limit"); it != req.query.end()) {
        try {
          std::size_t used = 0;
          const long long v = std::stoll(it->second, &used);
          if (used != it->second.size() || v < 0) throw std::invalid_argument("limit");
          limit = static_cast<std::size_t>(v);
        } catch (const std::exception&) {
          throw Error(ErrorKind::Validation, "limit must be a non-negative integer");
        }
      }
      return {200, catalog_rows(limit)};
    }
    if (std::regex_match(req.path, m, user_re)) {
      if (!get) return wrong_method();
      return {200, history_to_json(history(m[1].str()))};
    }
    if (req.path == "/recommend") {
      if (!post) return wrong_method();
      const auto body = parse_body(req);
      const auto user = required_string(body, "user_id");
      const auto engine = required_string(body, "engine");
      std::size_t k = 20;
      if (auto it = body.find("k"); it != body.end()) {
        if (!it->is_number_integer() || it->get<long long>() < 1) {
          throw Error(ErrorKind::Validation, "k must be a positive integer");
        }
        k = it->get<std::size_t>();
      }
      auto timed = run_engine(engine, user, k);
      json out{{"user_id", user},
               {"engine", engine},
               {"inference_seconds", timed.seconds},
               {"recommendations", musrec::to_json(timed.run.list)}};
      if (!timed.run.details.empty()) out["details"] = timed.run.details;
      return {200, out};
    }
    if (req.path == "/sessions") {
      if (!post) return wrong_method();
      const auto body = parse_body(req);
      const auto user = required_string(body, "user_id");
      std::uint64_t seed = 0;
      if (auto it = body.find("seed"); it != body.end()) {
        if (!it->is_number_integer()) throw Error(ErrorKind::Validation, "seed must be an integer");
        seed = it->get<std::uint64_t>();
      }
      return {201, client_view(create_blind_session(user, seed))};
    }
    if (std::regex_match(req.path, m, export_re)) {
      if (!get) return wrong_method();
      auto session = load_session(m[1].str());
      if (session.state != SessionState::Complete) {
        throw Error(ErrorKind::Conflict, "session " + session.session_id + " is still in progress");
      }
      return {200, to_json(session)};
    }
    if (std::regex_match(req.path, m, session_re)) {
      if (!get) return wrong_method();
      return {200, client_view(load_session(m[1].str()))};
    }
    if (std::regex_match(req.path, m, responses_re)) {
      if (!post) return wrong_method();
      const auto body = parse_body(req);
      const auto label = required_string(body, "blind_label");
      const auto track = required_string(body, "track_id");
      if (!body.contains("like") || !body.contains("known")) throw Error(ErrorKind::Validation, "like and known are required");
      const bool like = metrics::parse_binary(body["like"], "like");
      const bool known = metrics::parse_binary(body["known"], "known");
      auto view = mutate_session(m[1].str(), [&](BlindSession& s) { return record_response(s, label, track, like, known); });
      return {200, ack(view, label)};
    }
    if (std::regex_match(req.path, m, rating_re)) {
      if (!post) return wrong_method();
      const auto body = parse_body(req);
      const auto label = required_string(body, "blind_label");
      if (!body.contains("rating")) throw Error(ErrorKind::Validation, "rating is required");
      const int rating = metrics::parse_rating(body["rating"]);
      auto view = mutate_session(m[1].str(), [&](BlindSession& s) { return record_rating(s, label, rating); });
      return {200, ack(view, label)};
    }
    if (req.path == "/report") {
      if (!get) return wrong_method();
      return {200, report()};
    }
    if (req.path == "/health") return {200, json{{"status", "ok"}}};
    return {404, json{{"error", "not_found"}, {"message", "no route for " + req.path}}};
  }

  static json ack(const json& view, const std::string& label) {
    json out{{"ok", true}, {"session_state", view["state"]}};
    for (const auto& a : view["arms"]) {
      if (a["blind_label"] == label) {
        out["arm_complete"] = a["complete"];
        out["responses_count"] = a["responses_count"];
      }
    }
    return out;
  }

  std::shared_ptr<DocumentStore> store_;
  ServiceConfig config_;
  std::map<std::string, Engine> engines_;
  std::mutex session_locks_mutex_;
  std::map<std::string, std::shared_ptr<std::mutex>> session_locks_;
};

}  // namespace musrec::service
