#pragma once

// Offline preparation of the active data set: deduplicate the catalogue, keep
// tracks from its most common genres, sample a fixed-size catalogue, and keep
// each user's most played tracks.

#include <cstdint>
#include <map>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "musrec/domain.hpp"
#include "musrec/service/service.hpp"
#include "musrec/service/store.hpp"

namespace musrec::service {

struct IngestOptions {
  std::uint64_t seed = 0;
  std::size_t top_genres = 20;
  std::size_t sample = 300;
  std::size_t history_limit = 30;
};

struct IngestSummary {
  std::size_t input_tracks = 0;
  std::size_t unique_tracks = 0;
  std::size_t catalog_tracks = 0;
  std::size_t users = 0;
  std::vector<std::string> genres;
};

inline json to_json(const IngestSummary& s) {
  return json{{"input_tracks", s.input_tracks},
              {"unique_tracks", s.unique_tracks},
              {"catalog_tracks", s.catalog_tracks},
              {"users", s.users},
              {"genres", s.genres}};
}

inline IngestSummary ingest(DocumentStore& store, const std::vector<Track>& tracks,
                            const std::map<std::string, UserHistory>& histories, const IngestOptions& opts = {}) {
  IngestSummary summary;
  summary.input_tracks = tracks.size();
  const auto full = Catalog::deduplicated(tracks);
  summary.unique_tracks = full.size();
  summary.genres = top_genres(full, opts.top_genres);
  const auto sampled = sample_catalog(full, summary.genres, opts.sample, opts.seed);
  summary.catalog_tracks = sampled.size();

  store.put(DocKind::Catalog, kActiveCatalogKey, catalog_to_json(sampled));
  for (const auto& [user, history] : histories) {
    store.put(DocKind::History, user, history_to_json(top_played(history, opts.history_limit)));
  }
  summary.users = histories.size();
  store.put(DocKind::Meta, "ingest",
            json{{"seed", opts.seed},
                 {"top_genres", opts.top_genres},
                 {"sample", opts.sample},
                 {"history_limit", opts.history_limit},
                 {"summary", to_json(summary)}});
  return summary;
}

}  // namespace musrec::service
