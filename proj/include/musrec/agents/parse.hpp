#pragma once

// Turning free-form model output into structured results.

#include <cstddef>
#include <optional>
#include <set>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

#include <nlohmann/json.hpp>

#include "musrec/domain.hpp"
#include "musrec/error.hpp"
#include "musrec/recommendation.hpp"
#include "musrec/text.hpp"

namespace musrec::agents {

using json = nlohmann::json;

namespace detail {

// Index one past the bracket closing the one at `open`, skipping string
// literals; npos if unbalanced.
inline std::size_t matching_close(std::string_view s, std::size_t open) {
  int depth = 0;
  bool in_string = false;
  for (std::size_t i = open; i < s.size(); ++i) {
    const char c = s[i];
    if (in_string) {
      if (c == '\\') {
        ++i;
      } else if (c == '"') {
        in_string = false;
      }
      continue;
    }
    if (c == '"') {
      in_string = true;
    } else if (c == '[' || c == '{') {
      ++depth;
    } else if (c == ']' || c == '}') {
      if (--depth == 0) return i + 1;
    }
  }
  return std::string_view::npos;
}

}  // namespace detail

/// First substring that parses as a JSON array. Surrounding prose and
/// markdown fences are skipped.
inline std::optional<json> extract_first_json_array(std::string_view s) {
  for (auto open = s.find('['); open != std::string_view::npos; open = s.find('[', open + 1)) {
    const auto close = detail::matching_close(s, open);
    if (close == std::string_view::npos) continue;
    auto parsed = json::parse(s.substr(open, close - open), nullptr, false);
    if (!parsed.is_discarded() && parsed.is_array()) return parsed;
  }
  return std::nullopt;
}

/// Bool, 0/1, or "true"/"false"/"yes"/"no" (any case).
inline std::optional<bool> coerce_bool(const json& j) {
  if (j.is_boolean()) return j.get<bool>();
  if (j.is_number_integer()) {
    const auto v = j.get<long long>();
    if (v == 0 || v == 1) return v == 1;
  }
  if (j.is_string()) {
    const auto v = text::normalize(j.get<std::string>());
    if (v == "true" || v == "yes" || v == "1") return true;
    if (v == "false" || v == "no" || v == "0") return false;
  }
  return std::nullopt;
}

struct DroppedItem {
  json item;
  std::string reason;  // "invalid", "off_catalog" or "duplicate"

  friend bool operator==(const DroppedItem&, const DroppedItem&) = default;
};

struct ParsedRecommendations {
  RecommendationList recommendations;
  std::vector<DroppedItem> dropped;
};

/// Looks tracks up by normalized (song, artist). Every credited artist is a
/// key, as is the full credit joined with ", " or " & ".
class CatalogMatcher {
 public:
  explicit CatalogMatcher(const Catalog& catalog) {
    for (const auto& t : catalog.tracks()) {
      for (const auto& a : t.artist_names) index_.emplace(song_artist_key(t.song_name, a), &t);
      std::string comma, amp;
      for (std::size_t i = 0; i < t.artist_names.size(); ++i) {
        comma += (i ? ", " : "") + t.artist_names[i];
        amp += (i ? " & " : "") + t.artist_names[i];
      }
      index_.emplace(song_artist_key(t.song_name, comma), &t);
      index_.emplace(song_artist_key(t.song_name, amp), &t);
    }
  }

  const Track* match(std::string_view song, std::string_view artist) const {
    auto it = index_.find(song_artist_key(song, artist));
    return it == index_.end() ? nullptr : it->second;
  }

 private:
  std::unordered_map<std::string, const Track*> index_;
};

/// Validates the model's JSON list and keeps items that resolve to catalog
/// tracks, first occurrence wins, at most k. The model's liked/known values
/// are checked for shape only; raters supply the real ones.
inline ParsedRecommendations parse_recommendations(std::string_view model_text, const Catalog& catalog,
                                                   std::size_t k = 20) {
  auto array = extract_first_json_array(model_text);
  if (!array) {
    throw Error(ErrorKind::Parse, "no JSON array in model output: " + std::string(model_text.substr(0, 2000)));
  }
  const CatalogMatcher matcher(catalog);
  ParsedRecommendations out;
  std::set<std::string> seen;
  for (const auto& item : *array) {
    auto str_field = [&](const char* name) -> std::optional<std::string> {
      if (!item.is_object()) return std::nullopt;
      auto it = item.find(name);
      if (it == item.end() || !it->is_string()) return std::nullopt;
      return it->get<std::string>();
    };
    const auto genre = str_field("genre");
    const auto song = str_field("song_name");
    const auto artist = str_field("artist_name");
    const bool flags_ok = item.is_object() && item.contains("liked") && item.contains("known") &&
                          coerce_bool(item["liked"]) && coerce_bool(item["known"]);
    if (!genre || !song || !artist || !flags_ok) {
      out.dropped.push_back({item, "invalid"});
      continue;
    }
    const Track* track = matcher.match(*song, *artist);
    if (track == nullptr) {
      out.dropped.push_back({item, "off_catalog"});
      continue;
    }
    if (!seen.insert(track->track_id).second) {
      out.dropped.push_back({item, "duplicate"});
      continue;
    }
    if (out.recommendations.size() >= k) continue;
    // Keep the model's genre only when the track actually carries it.
    std::string label = track->genres.empty() ? std::string{} : track->genres.front();
    for (const auto& g : track->genres) {
      if (normalize_genre(g) == normalize_genre(*genre)) label = g;
    }
    out.recommendations.push_back({out.recommendations.size() + 1, *track, label, std::nullopt});
  }
  return out;
}

/// Up to k distinct normalized genre labels from the genre-inference output.
/// Prefers a JSON array (of strings, or of objects with "genre"); otherwise
/// reads list lines ("1. Pop", "- Rock") or a comma-separated line.
inline std::vector<std::string> parse_genres(std::string_view model_text, std::size_t k = 5) {
  std::vector<std::string> raw;
  if (auto array = extract_first_json_array(model_text)) {
    for (const auto& item : *array) {
      if (item.is_string()) raw.push_back(item.get<std::string>());
      if (item.is_object() && item.contains("genre") && item["genre"].is_string()) {
        raw.push_back(item["genre"].get<std::string>());
      }
    }
  }
  if (raw.empty()) {
    std::vector<std::string> lines;
    std::size_t start = 0;
    while (start <= model_text.size()) {
      auto end = model_text.find('\n', start);
      if (end == std::string_view::npos) end = model_text.size();
      lines.emplace_back(text::trim(model_text.substr(start, end - start)));
      start = end + 1;
    }
    auto strip_marker = [](std::string_view line) -> std::optional<std::string_view> {
      if (!line.empty() && (line[0] == '-' || line[0] == '*')) return text::trim(line.substr(1));
      std::size_t i = 0;
      while (i < line.size() && line[i] >= '0' && line[i] <= '9') ++i;
      if (i > 0 && i < line.size() && (line[i] == '.' || line[i] == ')')) return text::trim(line.substr(i + 1));
      return std::nullopt;
    };
    for (const auto& line : lines) {
      if (auto item = strip_marker(line)) raw.emplace_back(*item);
    }
    if (raw.empty()) {
      for (const auto& line : lines) {
        if (line.find(',') == std::string::npos) continue;
        std::string_view rest = line;
        if (auto colon = rest.find(':'); colon != std::string_view::npos) rest = rest.substr(colon + 1);
        std::size_t s = 0;
        while (s <= rest.size()) {
          auto e = rest.find(',', s);
          if (e == std::string_view::npos) e = rest.size();
          auto piece = text::trim(rest.substr(s, e - s));
          if (piece.substr(0, 4) == "and ") piece = text::trim(piece.substr(4));
          raw.emplace_back(piece);
          s = e + 1;
        }
        break;
      }
    }
  }
  std::vector<std::string> out;
  std::set<std::string> seen;
  for (auto& r : raw) {
    std::string_view v = text::trim(r);
    while (!v.empty() && (v.back() == '.' || v.back() == '"' || v.back() == '*')) v.remove_suffix(1);
    while (!v.empty() && (v.front() == '"' || v.front() == '*')) v.remove_prefix(1);
    auto g = normalize_genre(v);
    if (g.empty() || g.size() > 60 || !seen.insert(g).second) continue;
    out.push_back(std::move(g));
    if (out.size() == k) break;
  }
  return out;
}

}  // namespace musrec::agents
