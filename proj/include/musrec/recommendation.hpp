#pragma once

#include <cstddef>
#include <optional>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "musrec/domain.hpp"

namespace musrec {

/// One entry of a ranked list produced by either engine. `score` is set by
/// the content-based ranker only; agent output carries no numeric score.
struct Recommendation {
  std::size_t rank = 0;
  Track track;
  std::string genre;
  std::optional<double> score;

  friend bool operator==(const Recommendation&, const Recommendation&) = default;
};

using RecommendationList = std::vector<Recommendation>;

inline json to_json(const Recommendation& r) {
  json j{{"rank", r.rank},
         {"track_id", r.track.track_id},
         {"genre", r.genre},
         {"song_name", r.track.song_name},
         {"artist_name", r.track.primary_artist()}};
  if (r.score) j["score"] = *r.score;
  return j;
}

inline json to_json(const RecommendationList& list) {
  json arr = json::array();
  for (const auto& r : list) arr.push_back(to_json(r));
  return arr;
}

/// Rebuilds a list from its JSON form, resolving tracks through the catalog.
inline RecommendationList recommendations_from_json(const json& arr, const Catalog& catalog) {
  RecommendationList out;
  for (const auto& j : arr) {
    Recommendation r;
    r.rank = j.at("rank").get<std::size_t>();
    const auto* t = catalog.find(j.at("track_id").get<std::string>());
    if (t == nullptr) {
      throw Error(ErrorKind::NotFound, "recommended track not in catalog: " + j.at("track_id").get<std::string>());
    }
    r.track = *t;
    r.genre = j.value("genre", "");
    if (auto it = j.find("score"); it != j.end() && it->is_number()) r.score = it->get<double>();
    out.push_back(std::move(r));
  }
  return out;
}

}  // namespace musrec
