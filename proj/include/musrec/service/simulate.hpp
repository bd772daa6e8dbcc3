#pragma once

// Scripted rater that walks a blind session end to end through the public
// API. Policy: like a track when its displayed genre is one of the user's
// top-5 profile genres, mark it known when it appears in the user's history,
// and rate each playlist by its number of likes (round(10 * LR) for 10 tracks).

#include <cmath>
#include <cstdint>
#include <functional>
#include <set>
#include <string>
#include <vector>

#include <httplib.h>
#include <nlohmann/json.hpp>

#include "musrec/cbf.hpp"
#include "musrec/domain.hpp"
#include "musrec/error.hpp"
#include "musrec/service/service.hpp"

namespace musrec::service {

/// method, path, body -> (status, body)
using Transport = std::function<Response(const std::string&, const std::string&, const json&)>;

inline Transport in_process(Service& service) {
  return [&service](const std::string& method, const std::string& path, const json& body) {
    Request req;
    req.method = method;
    auto q = path.find('?');
    req.path = path.substr(0, q);
    if (q != std::string::npos) {
      httplib::Params params;
      httplib::detail::parse_query_text(path.substr(q + 1), params);
      for (const auto& [k, v] : params) req.query.emplace(k, v);
    }
    if (!body.is_null()) req.body = body.dump();
    return service.handle(req);
  };
}

inline Transport over_http(const std::string& base_url, int timeout_seconds = 120) {
  return [base_url, timeout_seconds](const std::string& method, const std::string& path, const json& body) {
    httplib::Client client(base_url);
    client.set_read_timeout(timeout_seconds, 0);
    auto res = method == "POST" ? client.Post(path, body.is_null() ? "" : body.dump(), "application/json")
                                : client.Get(path);
    if (!res) throw Error(ErrorKind::Tool, "no response from " + base_url + path);
    auto parsed = json::parse(res->body, nullptr, false);
    return Response{res->status, parsed.is_discarded() ? json(res->body) : parsed};
  };
}

struct RaterPolicy {
  std::set<std::string> profile_genres;
  std::set<std::string> history_ids;

  static RaterPolicy for_history(const UserHistory& history) {
    RaterPolicy p;
    for (const auto& g : cbf::genre_profile(history, 5).genres) p.profile_genres.insert(g.genre);
    for (const auto& e : history.entries()) p.history_ids.insert(e.track.track_id);
    return p;
  }

  bool like(const json& track) const {
    return profile_genres.count(normalize_genre(track.at("genre").get<std::string>())) != 0;
  }
  bool known(const json& track) const { return history_ids.count(track.at("track_id").get<std::string>()) != 0; }

  static int rating(std::size_t likes, std::size_t total) {
    return static_cast<int>(std::lround(10.0 * static_cast<double>(likes) / static_cast<double>(total)));
  }
};

struct SimulationResult {
  std::string session_id;
  json initial_view;
  json final_view;
  json report;
  std::vector<json> client_payloads;  // everything received before completion
};

inline json expect_ok(const Response& res, const std::string& what) {
  if (res.status < 200 || res.status >= 300) {
    const std::string msg = res.body.is_object() ? res.body.value("message", res.body.dump()) : res.body.dump();
    throw Error(ErrorKind::Engine, what + " failed with status " + std::to_string(res.status) + ": " + msg);
  }
  return res.body;
}

inline SimulationResult simulate_session(const Transport& call, const std::string& user_id, std::uint64_t seed) {
  SimulationResult out;
  const auto rows = expect_ok(call("GET", "/getUserData/" + user_id, nullptr), "GET /getUserData");
  const auto policy = RaterPolicy::for_history(history_from_rows(user_id, rows));

  out.initial_view = expect_ok(call("POST", "/sessions", json{{"user_id", user_id}, {"seed", seed}}), "POST /sessions");
  out.session_id = out.initial_view.at("session_id").get<std::string>();
  out.client_payloads.push_back(out.initial_view);
  const std::string base = "/sessions/" + out.session_id;

  for (const auto& arm : out.initial_view.at("arms")) {
    const auto label = arm.at("blind_label").get<std::string>();
    std::size_t likes = 0;
    for (const auto& t : arm.at("tracks")) {
      const bool like = policy.like(t);
      likes += like ? 1 : 0;
      out.client_payloads.push_back(expect_ok(
          call("POST", base + "/responses",
               json{{"blind_label", label}, {"track_id", t.at("track_id")}, {"like", like ? 1 : 0},
                    {"known", policy.known(t) ? 1 : 0}}),
          "POST responses"));
    }
    const int rating = RaterPolicy::rating(likes, arm.at("tracks").size());
    out.client_payloads.push_back(
        expect_ok(call("POST", base + "/rating", json{{"blind_label", label}, {"rating", rating}}), "POST rating"));
  }
  out.final_view = expect_ok(call("GET", base, nullptr), "GET session");
  out.report = expect_ok(call("GET", "/report", nullptr), "GET /report");
  return out;
}

}  // namespace musrec::service
