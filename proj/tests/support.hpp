#pragma once

#include <chrono>
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <map>
#include <random>
#include <string>
#include <utility>
#include <vector>

#include "musrec/domain.hpp"

namespace support {

inline musrec::Track track(const std::string& id, const std::vector<std::string>& genres,
                           const std::string& artist = "Artist") {
  return musrec::Track::create(id, "Song " + id, {artist + " " + id}, genres);
}

inline musrec::HistoryEntry entry(const musrec::Track& t, std::int64_t plays,
                                  std::optional<std::int64_t> epoch_seconds = std::nullopt) {
  musrec::HistoryEntry e;
  e.track = t;
  e.play_count = plays;
  if (epoch_seconds) e.last_played = musrec::Timestamp{std::chrono::seconds{*epoch_seconds}};
  return e;
}

inline std::filesystem::path temp_dir(const std::string& tag) {
  static std::mt19937_64 rng{std::random_device{}()};
  auto dir = std::filesystem::temp_directory_path() / ("musrec-" + tag + "-" + std::to_string(rng()));
  std::filesystem::create_directories(dir);
  return dir;
}

// Brute-force reference for the content-based ranker, written against the
// formulas rather than the library: dense vectors, smoothed idf, plain cosine.
namespace oracle {

inline double cosine(const std::vector<double>& x, const std::vector<double>& y) {
  long double dot = 0, nx = 0, ny = 0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    dot += static_cast<long double>(x[i]) * y[i];
    nx += static_cast<long double>(x[i]) * x[i];
    ny += static_cast<long double>(y[i]) * y[i];
  }
  if (nx == 0 || ny == 0) return 0.0;
  return static_cast<double>(dot / (std::sqrt(nx) * std::sqrt(ny)));
}

struct Ranked {
  std::string track_id;
  double score;
};

// Each input track is (id, genres); genres are already lower-case labels.
// The history is (genres, play_count) per entry.
inline std::vector<Ranked> rank(const std::vector<std::pair<std::string, std::vector<std::string>>>& catalog,
                                const std::vector<std::pair<std::vector<std::string>, std::int64_t>>& history,
                                std::size_t k, std::size_t profile_size = 5) {
  std::vector<std::string> terms;
  for (const auto& [_, gs] : catalog) {
    for (const auto& g : gs) {
      bool seen = false;
      for (const auto& t : terms) seen = seen || t == g;
      if (!seen) terms.push_back(g);
    }
  }
  const auto n = static_cast<double>(catalog.size());
  std::vector<double> idf;
  for (const auto& term : terms) {
    double df = 0;
    for (const auto& [_, gs] : catalog) {
      bool has = false;
      for (const auto& g : gs) has = has || g == term;
      df += has ? 1 : 0;
    }
    idf.push_back(std::log((1.0 + n) / (1.0 + df)) + 1.0);
  }

  // Profile: summed plays per genre, top profile_size, ties by label.
  std::vector<std::pair<std::string, std::int64_t>> totals;
  for (const auto& [gs, plays] : history) {
    for (const auto& g : gs) {
      bool found = false;
      for (auto& t : totals) {
        if (t.first == g) {
          t.second += plays;
          found = true;
        }
      }
      if (!found) totals.emplace_back(g, plays);
    }
  }
  for (std::size_t i = 0; i < totals.size(); ++i) {
    for (std::size_t j = i + 1; j < totals.size(); ++j) {
      const bool swap = totals[j].second > totals[i].second ||
                        (totals[j].second == totals[i].second && totals[j].first < totals[i].first);
      if (swap) std::swap(totals[i], totals[j]);
    }
  }
  if (totals.size() > profile_size) totals.resize(profile_size);

  std::vector<double> query(terms.size(), 0.0);
  for (const auto& [g, w] : totals) {
    for (std::size_t i = 0; i < terms.size(); ++i) {
      if (terms[i] == g) query[i] += static_cast<double>(w < 1 ? 1 : w) * idf[i];
    }
  }

  std::vector<Ranked> out;
  for (const auto& [id, gs] : catalog) {
    std::vector<double> v(terms.size(), 0.0);
    for (const auto& g : gs) {
      for (std::size_t i = 0; i < terms.size(); ++i) {
        if (terms[i] == g) v[i] += idf[i];
      }
    }
    out.push_back({id, cosine(query, v)});
  }
  // Insertion sort: score desc, id asc; scores within 1e-12 count as equal.
  for (std::size_t i = 1; i < out.size(); ++i) {
    for (std::size_t j = i; j > 0; --j) {
      const auto& a = out[j - 1];
      const auto& b = out[j];
      const bool tie = std::fabs(a.score - b.score) <= 1e-12;
      const bool before = tie ? b.track_id < a.track_id : b.score > a.score;
      if (!before) break;
      std::swap(out[j - 1], out[j]);
    }
  }
  if (out.size() > k) out.resize(k);
  return out;
}

}  // namespace oracle

}  // namespace support
