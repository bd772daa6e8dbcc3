#pragma once

// Content-based recommender: TF-IDF vectors over genre labels and cosine
// similarity between a user's genre profile and every catalog track.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <map>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "musrec/domain.hpp"
#include "musrec/error.hpp"
#include "musrec/recommendation.hpp"

namespace musrec::cbf {

class Vocabulary {
 public:
  Vocabulary() = default;

  Vocabulary(std::vector<std::string> terms, std::vector<std::size_t> document_frequency,
             std::size_t n_documents)
      : terms_(std::move(terms)), df_(std::move(document_frequency)), n_documents_(n_documents) {
    if (terms_.size() != df_.size()) {
      throw Error(ErrorKind::ContractViolation, "vocabulary: terms/df size mismatch");
    }
    if (!std::is_sorted(terms_.begin(), terms_.end()) ||
        std::adjacent_find(terms_.begin(), terms_.end()) != terms_.end()) {
      throw Error(ErrorKind::ContractViolation, "vocabulary: terms must be sorted and unique");
    }
    for (auto df : df_) {
      if (df < 1 || df > n_documents_) {
        throw Error(ErrorKind::ContractViolation, "vocabulary: document frequency out of range");
      }
    }
  }

  const std::vector<std::string>& terms() const { return terms_; }
  const std::vector<std::size_t>& document_frequency() const { return df_; }
  std::size_t n_documents() const { return n_documents_; }
  std::size_t size() const { return terms_.size(); }
  bool empty() const { return terms_.empty(); }

  std::optional<std::size_t> index_of(const std::string& normalized_term) const {
    auto it = std::lower_bound(terms_.begin(), terms_.end(), normalized_term);
    if (it == terms_.end() || *it != normalized_term) return std::nullopt;
    return static_cast<std::size_t>(it - terms_.begin());
  }

  /// Smoothed inverse document frequency: ln((1 + n) / (1 + df)) + 1.
  double idf(std::size_t index) const {
    const auto n = static_cast<double>(n_documents_);
    const auto df = static_cast<double>(df_.at(index));
    return std::log((1.0 + n) / (1.0 + df)) + 1.0;
  }

 private:
  std::vector<std::string> terms_;
  std::vector<std::size_t> df_;
  std::size_t n_documents_ = 0;
};

/// Sparse non-negative vector over a vocabulary. Entries are kept sorted by
/// index with no explicit zeros.
class GenreVector {
 public:
  using Entry = std::pair<std::size_t, double>;

  GenreVector() = default;

  GenreVector(std::size_t dimension, std::vector<Entry> entries, bool normalized = false)
      : dimension_(dimension), normalized_(normalized) {
    std::sort(entries.begin(), entries.end());
    for (std::size_t i = 0; i < entries.size(); ++i) {
      const auto [index, weight] = entries[i];
      if (index >= dimension) throw Error(ErrorKind::ContractViolation, "genre vector: index out of bounds");
      if (!(weight >= 0.0) || !std::isfinite(weight)) {
        throw Error(ErrorKind::ContractViolation, "genre vector: weights must be finite and non-negative");
      }
      if (i > 0 && entries[i - 1].first == index) {
        throw Error(ErrorKind::ContractViolation, "genre vector: duplicate index");
      }
      if (weight > 0.0) entries_.emplace_back(index, weight);
    }
  }

  static GenreVector from_dense(std::span<const double> dense) {
    std::vector<Entry> entries;
    for (std::size_t i = 0; i < dense.size(); ++i) {
      if (dense[i] != 0.0) entries.emplace_back(i, dense[i]);
    }
    return GenreVector(dense.size(), std::move(entries));
  }

  std::size_t dimension() const { return dimension_; }
  const std::vector<Entry>& entries() const { return entries_; }
  bool is_normalized() const { return normalized_; }
  bool is_zero() const { return entries_.empty(); }

  double weight(std::size_t index) const {
    auto it = std::lower_bound(entries_.begin(), entries_.end(), Entry{index, 0.0},
                               [](const Entry& a, const Entry& b) { return a.first < b.first; });
    return (it != entries_.end() && it->first == index) ? it->second : 0.0;
  }

  double norm() const {
    double sum = 0.0;
    for (const auto& e : entries_) sum += e.second * e.second;
    return std::sqrt(sum);
  }

  GenreVector normalized() const {
    const double n = norm();
    if (n == 0.0) return GenreVector(dimension_, {}, true);
    std::vector<Entry> scaled = entries_;
    for (auto& e : scaled) e.second /= n;
    return GenreVector(dimension_, std::move(scaled), true);
  }

 private:
  std::size_t dimension_ = 0;
  std::vector<Entry> entries_;
  bool normalized_ = false;
};

struct WeightedGenre {
  std::string genre;
  std::int64_t weight = 0;

  friend bool operator==(const WeightedGenre&, const WeightedGenre&) = default;
};

/// Up to k genres the user listens to most, heaviest first.
struct GenreProfile {
  std::vector<WeightedGenre> genres;
};

struct RecommendOptions {
  std::size_t k = 20;
  std::size_t profile_size = 5;
};

inline Vocabulary build_vocabulary(const Catalog& catalog) {
  if (catalog.empty()) throw Error(ErrorKind::EmptyInput, "build_vocabulary: empty catalog");
  std::map<std::string, std::size_t> df;
  for (const auto& t : catalog.tracks()) {
    for (const auto& g : t.normalized_genres()) ++df[g];
  }
  if (df.empty()) throw Error(ErrorKind::EmptyVocabulary, "build_vocabulary: catalog has no genres");
  std::vector<std::string> terms;
  std::vector<std::size_t> counts;
  for (const auto& [term, count] : df) {
    terms.push_back(term);
    counts.push_back(count);
  }
  return Vocabulary(std::move(terms), std::move(counts), catalog.size());
}

/// TF-IDF over a term-count map (keys are normalized labels). Out-of-vocabulary
/// terms are ignored. The result is L2-normalized unless it is all-zero.
inline GenreVector tfidf_from_counts(const std::map<std::string, std::int64_t>& counts,
                                     const Vocabulary& vocab) {
  if (vocab.empty()) throw Error(ErrorKind::ContractViolation, "tfidf: empty vocabulary");
  std::vector<GenreVector::Entry> entries;
  for (const auto& [term, tf] : counts) {
    if (tf <= 0) continue;
    if (auto idx = vocab.index_of(term)) {
      entries.emplace_back(*idx, static_cast<double>(tf) * vocab.idf(*idx));
    }
  }
  return GenreVector(vocab.size(), std::move(entries)).normalized();
}

inline GenreVector tfidf_vector(const std::vector<std::string>& genres, const Vocabulary& vocab) {
  std::map<std::string, std::int64_t> counts;
  for (const auto& g : genres) {
    auto norm = normalize_genre(g);
    if (!norm.empty()) ++counts[norm];
  }
  return tfidf_from_counts(counts, vocab);
}

/// sum(x_i * y_i) / (|x| |y|); zero when either vector has zero norm.
inline double cosine_similarity(const GenreVector& x, const GenreVector& y) {
  if (x.dimension() != y.dimension()) {
    throw Error(ErrorKind::ContractViolation, "cosine_similarity: dimension mismatch (" +
                                                  std::to_string(x.dimension()) + " vs " +
                                                  std::to_string(y.dimension()) + ")");
  }
  const double nx = x.norm();
  const double ny = y.norm();
  if (nx == 0.0 || ny == 0.0) return 0.0;
  double dot = 0.0;
  auto a = x.entries().begin();
  auto b = y.entries().begin();
  while (a != x.entries().end() && b != y.entries().end()) {
    if (a->first < b->first) {
      ++a;
    } else if (b->first < a->first) {
      ++b;
    } else {
      dot += a->second * b->second;
      ++a;
      ++b;
    }
  }
  return std::clamp(dot / (nx * ny), 0.0, 1.0);
}

/// Top-k genres by the summed play count of history entries carrying them.
/// Weights are clamped to at least 1 so zero-count histories still profile.
inline GenreProfile genre_profile(const UserHistory& history, std::size_t k = 5) {
  std::map<std::string, std::int64_t> totals;
  for (const auto& e : history.entries()) {
    for (const auto& g : e.track.normalized_genres()) totals[g] += e.play_count;
  }
  if (totals.empty()) {
    throw Error(ErrorKind::EmptyProfile, "user " + history.user_id() + " has no genres in history");
  }
  std::vector<std::pair<std::string, std::int64_t>> ranked(totals.begin(), totals.end());
  std::stable_sort(ranked.begin(), ranked.end(),
                   [](const auto& a, const auto& b) { return a.second > b.second; });
  GenreProfile profile;
  for (std::size_t i = 0; i < ranked.size() && i < k; ++i) {
    profile.genres.push_back({ranked[i].first, std::max<std::int64_t>(1, ranked[i].second)});
  }
  return profile;
}

/// Pseudo-document for the profile: each genre repeated `weight` times.
inline GenreVector profile_vector(const GenreProfile& profile, const Vocabulary& vocab) {
  std::map<std::string, std::int64_t> counts;
  for (const auto& g : profile.genres) counts[g.genre] += g.weight;
  return tfidf_from_counts(counts, vocab);
}

namespace detail {

// Track label of the shared term contributing most to the dot product.
inline std::string dominant_shared_genre(const Track& track, const GenreVector& query,
                                         const GenreVector& track_vec, const Vocabulary& vocab) {
  double best = 0.0;
  std::string best_term;
  for (const auto& [index, weight] : track_vec.entries()) {
    const double contribution = weight * query.weight(index);
    if (contribution > best) {
      best = contribution;
      best_term = vocab.terms()[index];
    }
  }
  if (best_term.empty()) return {};
  for (const auto& g : track.genres) {
    if (normalize_genre(g) == best_term) return g;
  }
  return best_term;
}

}  // namespace detail

/// Scores every catalog track against the user's genre profile and returns
/// the top k by (score desc, track_id asc). Tracks already in the history
/// stay eligible.
inline RecommendationList recommend(const Catalog& catalog, const UserHistory& history,
                                    const RecommendOptions& options = {}) {
  if (catalog.empty()) throw Error(ErrorKind::EmptyInput, "recommend: empty catalog");
  const auto profile = genre_profile(history, options.profile_size);
  const auto& tracks = catalog.tracks();
  const bool genreless = std::all_of(tracks.begin(), tracks.end(),
                                     [](const Track& t) { return t.normalized_genres().empty(); });
  if (genreless) {
    // Every track vector is zero, so every score is 0 and only the tie-break remains.
    std::vector<const Track*> order;
    for (const auto& t : tracks) order.push_back(&t);
    std::sort(order.begin(), order.end(), [](const Track* a, const Track* b) { return a->track_id < b->track_id; });
    RecommendationList out;
    for (std::size_t i = 0; i < std::min(options.k, order.size()); ++i) out.push_back({i + 1, *order[i], {}, 0.0});
    return out;
  }
  const auto vocab = build_vocabulary(catalog);
  const auto query = profile_vector(profile, vocab);

  // Scores are ranked at 1e-12 resolution so that equal scores reached
  // through different summation orders still tie and fall to track_id.
  struct Scored {
    const Track* track;
    double score;
    std::int64_t key;
    GenreVector vec;
  };
  std::vector<Scored> scored;
  scored.reserve(catalog.size());
  for (const auto& t : catalog.tracks()) {
    auto vec = tfidf_vector(t.genres, vocab);
    const double s = cosine_similarity(query, vec);
    scored.push_back({&t, s, std::llround(s * 1e12), std::move(vec)});
  }
  const auto keep = std::min(options.k, scored.size());
  auto by_rank = [](const Scored& a, const Scored& b) {
    if (a.key != b.key) return a.key > b.key;
    return a.track->track_id < b.track->track_id;
  };
  std::partial_sort(scored.begin(), scored.begin() + static_cast<std::ptrdiff_t>(keep), scored.end(),
                    by_rank);

  RecommendationList out;
  out.reserve(keep);
  for (std::size_t i = 0; i < keep; ++i) {
    const auto& s = scored[i];
    out.push_back({i + 1, *s.track, detail::dominant_shared_genre(*s.track, query, s.vec, vocab), s.score});
  }
  return out;
}

}  // namespace musrec::cbf
