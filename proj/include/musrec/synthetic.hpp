#pragma once

// Seeded synthetic catalogues and listening logs for demos and tests. Genre
// popularity is skewed so that "most common genres" is a meaningful cut.

#include <chrono>
#include <cstdint>
#include <map>
#include <string>
#include <vector>

#include "musrec/domain.hpp"
#include "musrec/random.hpp"

namespace musrec::synthetic {

struct Options {
  std::uint64_t seed = 7;
  std::size_t tracks = 2000;
  std::size_t genres = 40;
  std::size_t artists = 400;
  std::size_t users = 12;
  std::size_t history_size = 60;
};

struct Base {
  std::vector<Track> tracks;
  std::map<std::string, UserHistory> histories;
};

namespace detail {

inline std::string padded(std::size_t v, int width) {
  std::string s = std::to_string(v);
  return std::string(s.size() < static_cast<std::size_t>(width) ? width - s.size() : 0, '0') + s;
}

// Index skewed toward 0: the smaller of two uniform draws.
inline std::size_t skewed(SeededRng& rng, std::size_t n) {
  const auto a = rng.below(n);
  const auto b = rng.below(n);
  return a < b ? a : b;
}

}  // namespace detail

inline Base generate(const Options& opts = {}) {
  SeededRng rng(opts.seed);
  Base base;
  base.tracks.reserve(opts.tracks);
  for (std::size_t i = 0; i < opts.tracks; ++i) {
    const auto artist = rng.below(opts.artists);
    std::vector<std::string> genres;
    const auto n_genres = 1 + rng.below(3);
    for (std::size_t g = 0; g < n_genres; ++g) {
      genres.push_back("genre " + detail::padded(detail::skewed(rng, opts.genres), 2));
    }
    std::vector<std::string> artists{"Artist " + detail::padded(artist, 3)};
    if (rng.below(6) == 0) artists.push_back("Artist " + detail::padded(rng.below(opts.artists), 3));
    base.tracks.push_back(Track::create("s" + detail::padded(i, 5), "Song " + detail::padded(i, 5),
                                        std::move(artists), std::move(genres)));
  }

  const Timestamp epoch = std::chrono::sys_days{std::chrono::year{2023} / 1 / 1};
  for (std::size_t u = 0; u < opts.users; ++u) {
    const std::string user = "user" + detail::padded(u, 2);
    // Each user leans toward a few genres.
    std::vector<std::size_t> taste;
    for (int i = 0; i < 3; ++i) taste.push_back(detail::skewed(rng, opts.genres));
    std::vector<HistoryEntry> entries;
    std::map<std::string, bool> seen;
    std::size_t guard = 0;
    while (entries.size() < opts.history_size && guard++ < opts.history_size * 50) {
      const auto& t = base.tracks[rng.below(base.tracks.size())];
      bool fits = rng.below(4) == 0;
      for (auto g : taste) fits = fits || t.genres.front() == "genre " + detail::padded(g, 2);
      if (!fits || seen[t.track_id]) continue;
      seen[t.track_id] = true;
      HistoryEntry e;
      e.track = t;
      e.play_count = static_cast<std::int64_t>(1 + rng.below(40));
      if (rng.below(10) != 0) e.last_played = epoch + std::chrono::seconds(rng.below(390u * 24 * 3600));
      entries.push_back(std::move(e));
    }
    base.histories.emplace(user, UserHistory(user, std::move(entries)));
  }
  return base;
}

}  // namespace musrec::synthetic
