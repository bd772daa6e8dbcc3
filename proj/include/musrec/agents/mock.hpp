#pragma once

// Deterministic stand-in for a hosted model, used by the `mock` engine and by
// offline evaluation runs. The script is derived from the user's data so the
// pipeline produces a plausible, repeatable list without network access.

#include <cstdint>
#include <map>
#include <memory>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "musrec/agents/backend.hpp"
#include "musrec/agents/specs.hpp"
#include "musrec/cbf.hpp"
#include "musrec/domain.hpp"
#include "musrec/random.hpp"
#include "musrec/text.hpp"

namespace musrec::agents {

/// Script: profile genres for the inference task; for the recommendation
/// task, k tracks sharing a profile genre (seeded shuffle by `variant` and
/// user) followed by the rest of the catalogue if needed.
inline std::map<std::string, std::string> user_script(const Catalog& catalog, const UserHistory& history,
                                                      std::uint64_t variant, std::size_t k = 20) {
  std::vector<std::string> genres;
  try {
    for (const auto& g : cbf::genre_profile(history, 5).genres) genres.push_back(g.genre);
  } catch (const Error&) {
    // no genres: recommend from the whole catalogue
  }
  std::vector<const Track*> matching, rest;
  for (const auto& t : catalog.tracks()) {
    bool shares = false;
    for (const auto& g : t.normalized_genres()) {
      for (const auto& p : genres) shares = shares || g == p;
    }
    (shares ? matching : rest).push_back(&t);
  }
  SeededRng rng(variant ^ text::fnv1a64(history.user_id()));
  rng.shuffle(matching);
  rng.shuffle(rest);
  matching.insert(matching.end(), rest.begin(), rest.end());

  json picks = json::array();
  for (std::size_t i = 0; i < matching.size() && i < k; ++i) {
    const auto& t = *matching[i];
    picks.push_back({{"genre", t.genres.empty() ? "" : t.genres.front()},
                     {"song_name", t.song_name},
                     {"artist_name", t.primary_artist()},
                     {"liked", false},
                     {"known", false}});
  }
  return {
      {std::string(kReadCatalogue), "Song catalogue with " + std::to_string(catalog.size()) + " tracks."},
      {std::string(kReadHistory), "Listening history with " + std::to_string(history.size()) + " entries."},
      {std::string(kInferGenres), json(genres).dump()},
      {std::string(kRecommendSongs), "```json\n" + picks.dump(2) + "\n```"},
  };
}

inline std::shared_ptr<MockBackend> scripted_backend(const Catalog& catalog, const UserHistory& history,
                                                     std::uint64_t variant, std::size_t k = 20) {
  return std::make_shared<MockBackend>(user_script(catalog, history, variant, k));
}

}  // namespace musrec::agents
