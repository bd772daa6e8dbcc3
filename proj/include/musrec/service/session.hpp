#pragma once

// Blind evaluation sessions: three playlist arms (one per model) shown under
// opaque labels in a seeded order. Raters answer like/known per track and
// rate each arm; a finished session yields one EvaluationSheet per arm.

#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "musrec/domain.hpp"
#include "musrec/error.hpp"
#include "musrec/metrics.hpp"
#include "musrec/random.hpp"
#include "musrec/recommendation.hpp"
#include "musrec/text.hpp"

namespace musrec::service {

using metrics::ModelLabel;

inline constexpr std::size_t kPlaylistSize = 10;

struct Arm {
  std::string blind_label;
  ModelLabel model = ModelLabel::Traditional;
  RecommendationList tracks;     // the evaluated top 10
  RecommendationList full_list;  // everything the engine returned
  double inference_seconds = 0.0;
  std::map<std::string, metrics::TrackResponse> responses;  // by track_id
  std::optional<int> rating;

  bool complete() const { return responses.size() == tracks.size() && rating.has_value(); }

  bool has_track(const std::string& track_id) const {
    for (const auto& r : tracks) {
      if (r.track.track_id == track_id) return true;
    }
    return false;
  }
};

enum class SessionState { InProgress, Complete };

struct BlindSession {
  std::string session_id;
  std::string user_id;
  std::uint64_t seed = 0;
  std::vector<Arm> arms;                       // in model order
  std::vector<std::size_t> presentation_order;  // indices into arms
  SessionState state = SessionState::InProgress;

  Arm& arm(const std::string& blind_label) {
    for (auto& a : arms) {
      if (a.blind_label == blind_label) return a;
    }
    throw Error(ErrorKind::NotFound, "session " + session_id + " has no arm " + blind_label);
  }
};

struct EngineOutput {
  ModelLabel model;
  RecommendationList list;
  double inference_seconds = 0.0;
};

/// Labels and presentation order depend only on the seed. Every list must
/// hold at least kPlaylistSize tracks; the evaluated playlist is its top 10.
inline BlindSession create_session(std::string session_id, std::string user_id, std::uint64_t seed,
                                   std::vector<EngineOutput> outputs) {
  if (outputs.size() != 3) throw Error(ErrorKind::ContractViolation, "a session needs exactly three arms");
  BlindSession s;
  s.session_id = std::move(session_id);
  s.user_id = std::move(user_id);
  s.seed = seed;
  SeededRng rng(seed);
  for (auto& out : outputs) {
    if (out.list.size() < kPlaylistSize) {
      throw Error(ErrorKind::Engine, std::string(metrics::to_string(out.model)) + " returned only " +
                                         std::to_string(out.list.size()) + " tracks; a playlist needs " +
                                         std::to_string(kPlaylistSize));
    }
    Arm arm;
    arm.model = out.model;
    do {
      arm.blind_label = text::to_hex(rng.next(), 8);
    } while ([&] {
      for (const auto& a : s.arms) {
        if (a.blind_label == arm.blind_label) return true;
      }
      return false;
    }());
    arm.full_list = std::move(out.list);
    arm.tracks.assign(arm.full_list.begin(), arm.full_list.begin() + kPlaylistSize);
    arm.inference_seconds = out.inference_seconds;
    s.arms.push_back(std::move(arm));
  }
  s.presentation_order = {0, 1, 2};
  rng.shuffle(s.presentation_order);
  return s;
}

/// Idempotent: answering the same track again overwrites the earlier answer.
/// Returns the sheets materialized when this call completes the session.
inline std::vector<metrics::EvaluationSheet> materialize_if_complete(BlindSession& s);

inline std::vector<metrics::EvaluationSheet> record_response(BlindSession& s, const std::string& blind_label,
                                                             const std::string& track_id, bool like, bool known) {
  if (s.state == SessionState::Complete) throw Error(ErrorKind::Conflict, "session " + s.session_id + " is complete");
  auto& arm = s.arm(blind_label);
  if (!arm.has_track(track_id)) {
    throw Error(ErrorKind::NotFound, "track " + track_id + " is not in arm " + blind_label);
  }
  arm.responses[track_id] = {track_id, like, known};
  return materialize_if_complete(s);
}

inline std::vector<metrics::EvaluationSheet> record_rating(BlindSession& s, const std::string& blind_label, int rating) {
  if (s.state == SessionState::Complete) throw Error(ErrorKind::Conflict, "session " + s.session_id + " is complete");
  if (rating < 0 || rating > 10) {
    throw Error(ErrorKind::Validation, "rating must be in [0, 10], got " + std::to_string(rating));
  }
  s.arm(blind_label).rating = rating;
  return materialize_if_complete(s);
}

inline std::vector<metrics::EvaluationSheet> materialize_if_complete(BlindSession& s) {
  for (const auto& a : s.arms) {
    if (!a.complete()) return {};
  }
  s.state = SessionState::Complete;
  std::vector<metrics::EvaluationSheet> sheets;
  for (const auto& a : s.arms) {
    metrics::EvaluationSheet sheet;
    sheet.user_id = s.user_id;
    sheet.model = a.model;
    for (const auto& r : a.tracks) sheet.responses.push_back(a.responses.at(r.track.track_id));
    sheet.rating = *a.rating;
    sheet.inference_seconds = a.inference_seconds;
    sheets.push_back(std::move(sheet));
  }
  return sheets;
}

// ---------------------------------------------------------------------------
// Serialization

namespace detail {

// Server-side records embed whole tracks so sessions survive re-ingestion.
inline json list_record(const RecommendationList& list) {
  json arr = json::array();
  for (const auto& r : list) {
    json j{{"rank", r.rank}, {"genre", r.genre}, {"track", r.track}};
    if (r.score) j["score"] = *r.score;
    arr.push_back(std::move(j));
  }
  return arr;
}

inline RecommendationList list_from_record(const json& arr) {
  RecommendationList out;
  for (const auto& j : arr) {
    Recommendation r;
    r.rank = j.at("rank").get<std::size_t>();
    r.genre = j.at("genre").get<std::string>();
    r.track = j.at("track").get<Track>();
    if (auto it = j.find("score"); it != j.end()) r.score = it->get<double>();
    out.push_back(std::move(r));
  }
  return out;
}

}  // namespace detail

// client_view is the only form sent to raters before the session completes
// and never names a model.

inline json client_view(const BlindSession& s) {
  json arms = json::array();
  for (auto idx : s.presentation_order) {
    const auto& a = s.arms[idx];
    json tracks = json::array();
    for (const auto& r : a.tracks) {
      json t{{"track_id", r.track.track_id},
             {"song_name", r.track.song_name},
             {"artist_name", r.track.primary_artist()},
             {"genre", r.genre}};
      if (auto it = a.responses.find(r.track.track_id); it != a.responses.end()) {
        t["response"] = {{"like", it->second.like ? 1 : 0}, {"known", it->second.known ? 1 : 0}};
      }
      tracks.push_back(std::move(t));
    }
    arms.push_back({{"blind_label", a.blind_label},
                    {"tracks", tracks},
                    {"responses_count", a.responses.size()},
                    {"rating", a.rating ? json(*a.rating) : json(nullptr)},
                    {"complete", a.complete()}});
  }
  return json{{"session_id", s.session_id},
              {"user_id", s.user_id},
              {"state", s.state == SessionState::Complete ? "complete" : "in-progress"},
              {"arms", arms}};
}

inline json to_json(const BlindSession& s) {
  json arms = json::array();
  for (const auto& a : s.arms) {
    json responses = json::array();
    for (const auto& [_, r] : a.responses) responses.push_back(metrics::to_json(r));
    arms.push_back({{"blind_label", a.blind_label},
                    {"model_label", metrics::to_string(a.model)},
                    {"tracks", detail::list_record(a.tracks)},
                    {"full_list", detail::list_record(a.full_list)},
                    {"inference_seconds", a.inference_seconds},
                    {"responses", responses},
                    {"rating", a.rating ? json(*a.rating) : json(nullptr)}});
  }
  return json{{"session_id", s.session_id},
              {"user_id", s.user_id},
              {"seed", s.seed},
              {"arms", arms},
              {"presentation_order", s.presentation_order},
              {"state", s.state == SessionState::Complete ? "complete" : "in-progress"}};
}

inline BlindSession session_from_json(const json& j) {
  try {
    BlindSession s;
    s.session_id = j.at("session_id").get<std::string>();
    s.user_id = j.at("user_id").get<std::string>();
    s.seed = j.at("seed").get<std::uint64_t>();
    for (const auto& a : j.at("arms")) {
      Arm arm;
      arm.blind_label = a.at("blind_label").get<std::string>();
      arm.model = metrics::parse_model_label(a.at("model_label").get<std::string>());
      arm.tracks = detail::list_from_record(a.at("tracks"));
      arm.full_list = detail::list_from_record(a.at("full_list"));
      arm.inference_seconds = a.at("inference_seconds").get<double>();
      for (const auto& r : a.at("responses")) {
        const auto id = r.at("track_id").get<std::string>();
        arm.responses[id] = {id, metrics::parse_binary(r.at("like"), "like"),
                             metrics::parse_binary(r.at("known"), "known")};
      }
      if (!a.at("rating").is_null()) arm.rating = a.at("rating").get<int>();
      s.arms.push_back(std::move(arm));
    }
    s.presentation_order = j.at("presentation_order").get<std::vector<std::size_t>>();
    s.state = j.at("state").get<std::string>() == "complete" ? SessionState::Complete : SessionState::InProgress;
    return s;
  } catch (const json::exception& e) {
    throw Error(ErrorKind::Parse, std::string("bad session record: ") + e.what());
  }
}

}  // namespace musrec::service
