#pragma once

// Catalog and listening-history types, plus the sampling and truncation steps
// that turn a raw collected base into model inputs.

#include <algorithm>
#include <chrono>
#include <cstdint>
#include <cstdio>
#include <fstream>
#include <map>
#include <optional>
#include <set>
#include <sstream>
#include <string>
#include <string_view>
#include <unordered_map>
#include <unordered_set>
#include <utility>
#include <vector>

#include <nlohmann/json.hpp>

#include "musrec/error.hpp"
#include "musrec/random.hpp"
#include "musrec/text.hpp"

namespace musrec {

using json = nlohmann::json;
using Timestamp = std::chrono::sys_seconds;

/// Genre labels are atomic: "Funk Metal" is one token, never two.
inline std::string normalize_genre(std::string_view label) { return text::normalize(label); }

struct Track {
  std::string track_id;
  std::string song_name;
  std::vector<std::string> artist_names;
  std::vector<std::string> genres;

  /// Trims every field, drops empty genres and genres that duplicate an
  /// earlier one after normalization. Throws Validation on empty names.
  static Track create(std::string track_id, std::string_view song_name,
                      const std::vector<std::string>& artist_names,
                      const std::vector<std::string>& genres) {
    Track t;
    t.track_id = std::move(track_id);
    if (t.track_id.empty()) throw Error(ErrorKind::Validation, "track_id must be non-empty");
    t.song_name = std::string(text::trim(song_name));
    if (t.song_name.empty()) {
      throw Error(ErrorKind::Validation, "track " + t.track_id + ": song_name is empty");
    }
    if (artist_names.empty()) {
      throw Error(ErrorKind::Validation, "track " + t.track_id + ": no artists");
    }
    for (const auto& a : artist_names) {
      auto trimmed = std::string(text::trim(a));
      if (trimmed.empty()) {
        throw Error(ErrorKind::Validation, "track " + t.track_id + ": empty artist name");
      }
      t.artist_names.push_back(std::move(trimmed));
    }
    std::set<std::string> seen;
    for (const auto& g : genres) {
      auto norm = normalize_genre(g);
      if (norm.empty() || !seen.insert(norm).second) continue;
      t.genres.push_back(text::collapse_whitespace(g));
    }
    return t;
  }

  const std::string& primary_artist() const { return artist_names.front(); }

  std::vector<std::string> normalized_genres() const {
    std::vector<std::string> out;
    out.reserve(genres.size());
    for (const auto& g : genres) out.push_back(normalize_genre(g));
    return out;
  }

  friend bool operator==(const Track&, const Track&) = default;
};

// Identity key used for catalog de-duplication and for matching free-text
// model output back onto catalog entries.
inline std::string song_artist_key(std::string_view song, std::string_view artist) {
  return text::normalize(song) + '\x1f' + text::normalize(artist);
}

struct HistoryEntry {
  Track track;
  std::int64_t play_count = 0;
  std::optional<Timestamp> last_played;

  friend bool operator==(const HistoryEntry&, const HistoryEntry&) = default;
};

class Catalog {
 public:
  Catalog() = default;

  /// Throws Validation if track ids or (song, primary artist) pairs repeat.
  explicit Catalog(std::vector<Track> tracks) : tracks_(std::move(tracks)) {
    std::unordered_set<std::string> keys;
    for (std::size_t i = 0; i < tracks_.size(); ++i) {
      const auto& t = tracks_[i];
      if (!by_id_.emplace(t.track_id, i).second) {
        throw Error(ErrorKind::Validation, "duplicate track_id " + t.track_id);
      }
      if (!keys.insert(song_artist_key(t.song_name, t.primary_artist())).second) {
        throw Error(ErrorKind::Validation,
                    "duplicate song/artist pair: " + t.song_name + " / " + t.primary_artist());
      }
    }
  }

  /// Keeps the first occurrence of each track id and each song/artist pair.
  static Catalog deduplicated(const std::vector<Track>& tracks) {
    std::unordered_set<std::string> ids;
    std::unordered_set<std::string> keys;
    std::vector<Track> kept;
    for (const auto& t : tracks) {
      if (ids.count(t.track_id) != 0) continue;
      if (!keys.insert(song_artist_key(t.song_name, t.primary_artist())).second) continue;
      ids.insert(t.track_id);
      kept.push_back(t);
    }
    return Catalog(std::move(kept));
  }

  const std::vector<Track>& tracks() const { return tracks_; }
  std::size_t size() const { return tracks_.size(); }
  bool empty() const { return tracks_.empty(); }

  const Track* find(const std::string& track_id) const {
    auto it = by_id_.find(track_id);
    return it == by_id_.end() ? nullptr : &tracks_[it->second];
  }

  friend bool operator==(const Catalog& a, const Catalog& b) { return a.tracks_ == b.tracks_; }

 private:
  std::vector<Track> tracks_;
  std::unordered_map<std::string, std::size_t> by_id_;
};

// Ordering used for "most played": play count desc, then most recent first
// (entries without a timestamp count as oldest), then track id asc.
inline bool history_order(const HistoryEntry& a, const HistoryEntry& b) {
  if (a.play_count != b.play_count) return a.play_count > b.play_count;
  if (a.last_played != b.last_played) {
    if (!a.last_played) return false;
    if (!b.last_played) return true;
    return *a.last_played > *b.last_played;
  }
  return a.track.track_id < b.track.track_id;
}

class UserHistory {
 public:
  UserHistory() = default;

  UserHistory(std::string user_id, std::vector<HistoryEntry> entries)
      : user_id_(std::move(user_id)), entries_(std::move(entries)) {
    for (const auto& e : entries_) {
      if (e.play_count < 0) {
        throw Error(ErrorKind::Validation, "negative play_count for track " + e.track.track_id);
      }
    }
    std::sort(entries_.begin(), entries_.end(), history_order);
  }

  const std::string& user_id() const { return user_id_; }
  const std::vector<HistoryEntry>& entries() const { return entries_; }
  std::size_t size() const { return entries_.size(); }
  bool empty() const { return entries_.empty(); }

  friend bool operator==(const UserHistory&, const UserHistory&) = default;

 private:
  std::string user_id_;
  std::vector<HistoryEntry> entries_;
};

/// The k most frequent normalized genres by number of tracks carrying them;
/// ties go to the lexicographically smaller label.
inline std::vector<std::string> top_genres(const Catalog& catalog, std::size_t k) {
  if (catalog.empty()) throw Error(ErrorKind::EmptyInput, "top_genres: empty catalog");
  std::map<std::string, std::size_t> counts;
  for (const auto& t : catalog.tracks()) {
    for (const auto& g : t.normalized_genres()) ++counts[g];
  }
  std::vector<std::pair<std::string, std::size_t>> ranked(counts.begin(), counts.end());
  std::stable_sort(ranked.begin(), ranked.end(),
                   [](const auto& a, const auto& b) { return a.second > b.second; });
  std::vector<std::string> out;
  for (std::size_t i = 0; i < ranked.size() && i < k; ++i) out.push_back(ranked[i].first);
  return out;
}

/// Uniform sample without replacement of min(n, |eligible|) tracks that carry
/// at least one allowed genre. Output keeps catalog order.
inline Catalog sample_catalog(const Catalog& catalog, const std::vector<std::string>& allowed_genres,
                              std::size_t n, std::uint64_t seed) {
  if (n == 0) throw Error(ErrorKind::ContractViolation, "sample_catalog: n must be >= 1");
  std::set<std::string> allowed;
  for (const auto& g : allowed_genres) allowed.insert(normalize_genre(g));

  std::vector<std::size_t> eligible;
  const auto& tracks = catalog.tracks();
  for (std::size_t i = 0; i < tracks.size(); ++i) {
    for (const auto& g : tracks[i].normalized_genres()) {
      if (allowed.count(g) != 0) {
        eligible.push_back(i);
        break;
      }
    }
  }
  if (eligible.empty()) throw Error(ErrorKind::EmptyInput, "sample_catalog: no eligible tracks");

  SeededRng rng(seed);
  auto picks = rng.choose(eligible.size(), n);
  std::sort(picks.begin(), picks.end());
  std::vector<Track> out;
  out.reserve(picks.size());
  for (auto p : picks) out.push_back(tracks[eligible[p]]);
  return Catalog(std::move(out));
}

inline UserHistory top_played(const UserHistory& history, std::size_t n) {
  const auto& e = history.entries();
  std::vector<HistoryEntry> head(e.begin(), e.begin() + static_cast<std::ptrdiff_t>(std::min(n, e.size())));
  return UserHistory(history.user_id(), std::move(head));
}

// ---------------------------------------------------------------------------
// Timestamps (RFC 3339)

inline std::optional<Timestamp> parse_rfc3339(std::string_view s) {
  auto digits = [&](std::size_t pos, std::size_t len, int& out) {
    if (pos + len > s.size()) return false;
    int v = 0;
    for (std::size_t i = pos; i < pos + len; ++i) {
      if (s[i] < '0' || s[i] > '9') return false;
      v = v * 10 + (s[i] - '0');
    }
    out = v;
    return true;
  };
  int year, month, day, hour, minute, second;
  if (!digits(0, 4, year) || s.size() < 19 || s[4] != '-' || !digits(5, 2, month) || s[7] != '-' ||
      !digits(8, 2, day) || (s[10] != 'T' && s[10] != 't' && s[10] != ' ') || !digits(11, 2, hour) ||
      s[13] != ':' || !digits(14, 2, minute) || s[16] != ':' || !digits(17, 2, second)) {
    return std::nullopt;
  }
  std::size_t pos = 19;
  if (pos < s.size() && s[pos] == '.') {
    ++pos;
    while (pos < s.size() && s[pos] >= '0' && s[pos] <= '9') ++pos;
  }
  int offset_minutes = 0;
  if (pos < s.size() && (s[pos] == 'Z' || s[pos] == 'z')) {
    ++pos;
  } else if (pos < s.size() && (s[pos] == '+' || s[pos] == '-')) {
    int oh, om;
    if (!digits(pos + 1, 2, oh) || pos + 3 >= s.size() || s[pos + 3] != ':' || !digits(pos + 4, 2, om)) {
      return std::nullopt;
    }
    offset_minutes = (oh * 60 + om) * (s[pos] == '-' ? -1 : 1);
    pos += 6;
  } else {
    return std::nullopt;
  }
  if (pos != s.size()) return std::nullopt;

  using namespace std::chrono;
  const year_month_day ymd{std::chrono::year{year}, std::chrono::month{static_cast<unsigned>(month)},
                           std::chrono::day{static_cast<unsigned>(day)}};
  if (!ymd.ok() || hour > 23 || minute > 59 || second > 60) return std::nullopt;
  return sys_days{ymd} + hours{hour} + minutes{minute} + seconds{second} - minutes{offset_minutes};
}

inline std::string format_rfc3339(Timestamp ts) {
  using namespace std::chrono;
  const auto day_point = floor<days>(ts);
  const year_month_day ymd{day_point};
  const hh_mm_ss hms{ts - day_point};
  char buf[64];
  std::snprintf(buf, sizeof buf, "%04d-%02u-%02uT%02ld:%02ld:%02ldZ", static_cast<int>(ymd.year()),
                static_cast<unsigned>(ymd.month()), static_cast<unsigned>(ymd.day()),
                static_cast<long>(hms.hours().count()), static_cast<long>(hms.minutes().count()),
                static_cast<long>(hms.seconds().count()));
  return buf;
}

// ---------------------------------------------------------------------------
// JSON ingestion

inline void to_json(json& j, const Track& t) {
  j = json{{"track_id", t.track_id},
           {"song_name", t.song_name},
           {"artist_names", t.artist_names},
           {"genres", t.genres}};
}

inline void from_json(const json& j, Track& t) {
  if (!j.is_object()) throw Error(ErrorKind::Parse, "catalog row must be an object");
  try {
    t = Track::create(j.at("track_id").get<std::string>(), j.at("song_name").get<std::string>(),
                      j.at("artist_names").get<std::vector<std::string>>(),
                      j.value("genres", std::vector<std::string>{}));
  } catch (const json::exception& e) {
    throw Error(ErrorKind::Parse, std::string("bad catalog row: ") + e.what());
  }
}

inline json history_row(const std::string& user_id, const HistoryEntry& e) {
  return json{{"user_id", user_id},
              {"track", e.track},
              {"play_count", e.play_count},
              {"last_played", e.last_played ? json(format_rfc3339(*e.last_played)) : json(nullptr)}};
}

inline HistoryEntry history_entry_from_json(const json& j) {
  if (!j.is_object()) throw Error(ErrorKind::Parse, "history row must be an object");
  HistoryEntry e;
  try {
    e.track = j.at("track").get<Track>();
    const auto& pc = j.at("play_count");
    if (!pc.is_number_integer()) throw Error(ErrorKind::Parse, "play_count must be an integer");
    e.play_count = pc.get<std::int64_t>();
    if (e.play_count < 0) throw Error(ErrorKind::Validation, "play_count must be >= 0");
    if (auto it = j.find("last_played"); it != j.end() && !it->is_null()) {
      auto ts = parse_rfc3339(it->get<std::string>());
      if (!ts) throw Error(ErrorKind::Parse, "last_played is not RFC 3339: " + it->get<std::string>());
      e.last_played = *ts;
    }
  } catch (const json::exception& ex) {
    throw Error(ErrorKind::Parse, std::string("bad history row: ") + ex.what());
  }
  return e;
}

inline json catalog_to_json(const Catalog& c) {
  json arr = json::array();
  for (const auto& t : c.tracks()) arr.push_back(t);
  return arr;
}

inline json history_to_json(const UserHistory& h) {
  json arr = json::array();
  for (const auto& e : h.entries()) arr.push_back(history_row(h.user_id(), e));
  return arr;
}

inline std::vector<Track> tracks_from_json(const json& arr) {
  if (!arr.is_array()) throw Error(ErrorKind::Parse, "catalog file must hold a JSON array");
  std::vector<Track> out;
  out.reserve(arr.size());
  for (const auto& row : arr) out.push_back(row.get<Track>());
  return out;
}

/// Groups history rows by user. Repeated rows for the same (user, track) are
/// playback-log occurrences: their counts add up and the latest time wins.
inline std::map<std::string, UserHistory> histories_from_json(const json& arr) {
  if (!arr.is_array()) throw Error(ErrorKind::Parse, "history file must hold a JSON array");
  std::map<std::string, std::vector<HistoryEntry>> grouped;
  std::map<std::string, std::map<std::string, std::size_t>> slot;
  for (const auto& row : arr) {
    auto entry = history_entry_from_json(row);
    std::string user;
    try {
      user = row.at("user_id").get<std::string>();
    } catch (const json::exception& ex) {
      throw Error(ErrorKind::Parse, std::string("history row without user_id: ") + ex.what());
    }
    auto& entries = grouped[user];
    auto& positions = slot[user];
    auto [it, inserted] = positions.emplace(entry.track.track_id, entries.size());
    if (inserted) {
      entries.push_back(std::move(entry));
      continue;
    }
    auto& existing = entries[it->second];
    existing.play_count += entry.play_count;
    if (entry.last_played && (!existing.last_played || *entry.last_played > *existing.last_played)) {
      existing.last_played = entry.last_played;
    }
  }
  std::map<std::string, UserHistory> out;
  for (auto& [user, entries] : grouped) out.emplace(user, UserHistory(user, std::move(entries)));
  return out;
}

/// History rows for one user, e.g. the payload served for that user.
inline UserHistory history_from_rows(const std::string& user_id, const json& arr) {
  if (!arr.is_array()) throw Error(ErrorKind::Parse, "history payload must be a JSON array");
  std::vector<HistoryEntry> entries;
  for (const auto& row : arr) entries.push_back(history_entry_from_json(row));
  return UserHistory(user_id, std::move(entries));
}

// ---------------------------------------------------------------------------
// CSV ingestion: song_name, artists (';'-joined), genres (';'-joined)

namespace detail {

inline std::vector<std::vector<std::string>> parse_csv(std::string_view data) {
  std::vector<std::vector<std::string>> rows;
  std::vector<std::string> row;
  std::string field;
  bool quoted = false;
  bool row_has_content = false;
  for (std::size_t i = 0; i < data.size(); ++i) {
    const char c = data[i];
    if (quoted) {
      if (c == '"') {
        if (i + 1 < data.size() && data[i + 1] == '"') {
          field.push_back('"');
          ++i;
        } else {
          quoted = false;
        }
      } else {
        field.push_back(c);
      }
      continue;
    }
    if (c == '"') {
      quoted = true;
      row_has_content = true;
    } else if (c == ',') {
      row.push_back(std::move(field));
      field.clear();
      row_has_content = true;
    } else if (c == '\n' || c == '\r') {
      if (c == '\r' && i + 1 < data.size() && data[i + 1] == '\n') ++i;
      if (row_has_content || !field.empty()) {
        row.push_back(std::move(field));
        rows.push_back(std::move(row));
      }
      row.clear();
      field.clear();
      row_has_content = false;
    } else {
      field.push_back(c);
      row_has_content = true;
    }
  }
  if (quoted) throw Error(ErrorKind::Parse, "unterminated quoted CSV field");
  if (row_has_content || !field.empty()) {
    row.push_back(std::move(field));
    rows.push_back(std::move(row));
  }
  return rows;
}

inline std::vector<std::string> split_list(std::string_view s) {
  std::vector<std::string> out;
  std::size_t start = 0;
  while (start <= s.size()) {
    auto end = s.find(';', start);
    if (end == std::string_view::npos) end = s.size();
    auto item = text::trim(s.substr(start, end - start));
    if (!item.empty()) out.emplace_back(item);
    start = end + 1;
  }
  return out;
}

}  // namespace detail

/// Track ids for CSV rows are derived from the normalized song/artist key so
/// re-ingesting the same file yields the same ids.
inline std::string derived_track_id(std::string_view song, std::string_view primary_artist) {
  return "t" + text::to_hex(text::fnv1a64(song_artist_key(song, primary_artist)));
}

inline std::vector<Track> tracks_from_csv(std::string_view data) {
  auto rows = detail::parse_csv(data);
  std::vector<Track> out;
  for (std::size_t i = 0; i < rows.size(); ++i) {
    const auto& r = rows[i];
    if (i == 0 && !r.empty() && text::normalize(r[0]) == "song_name") continue;
    if (r.size() < 2) {
      throw Error(ErrorKind::Parse, "CSV row " + std::to_string(i + 1) + ": expected at least 2 columns");
    }
    auto artists = detail::split_list(r[1]);
    if (artists.empty()) {
      throw Error(ErrorKind::Validation, "CSV row " + std::to_string(i + 1) + ": no artists");
    }
    auto genres = r.size() > 2 ? detail::split_list(r[2]) : std::vector<std::string>{};
    out.push_back(Track::create(derived_track_id(r[0], artists.front()), r[0], artists, genres));
  }
  return out;
}

inline std::string read_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(ErrorKind::NotFound, "cannot open " + path);
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

/// Loads catalog rows from a .json or .csv file (chosen by extension).
inline std::vector<Track> load_tracks(const std::string& path) {
  auto data = read_file(path);
  if (path.size() >= 4 && text::case_fold(path.substr(path.size() - 4)) == ".csv") {
    return tracks_from_csv(data);
  }
  try {
    return tracks_from_json(json::parse(data));
  } catch (const json::parse_error& e) {
    throw Error(ErrorKind::Parse, path + ": " + e.what());
  }
}

}  // namespace musrec
