#pragma once

// Playlist evaluation metrics: like rate, novelty rate, successful novelty
// rate, and per-model aggregation of rater sheets.

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <optional>
#include <sstream>
#include <string>
#include <string_view>
#include <vector>

#include <nlohmann/json.hpp>

#include "musrec/error.hpp"

namespace musrec::metrics {

using json = nlohmann::json;

enum class ModelLabel { Traditional, Llama, Gemini };

inline constexpr ModelLabel kAllModels[] = {ModelLabel::Traditional, ModelLabel::Llama, ModelLabel::Gemini};

inline std::string_view to_string(ModelLabel m) {
  switch (m) {
    case ModelLabel::Traditional: return "traditional";
    case ModelLabel::Llama: return "llama";
    case ModelLabel::Gemini: return "gemini";
  }
  return "";
}

inline ModelLabel parse_model_label(std::string_view s) {
  for (auto m : kAllModels) {
    if (to_string(m) == s) return m;
  }
  throw Error(ErrorKind::Validation, "unknown model label: " + std::string(s));
}

struct TrackResponse {
  std::string track_id;
  bool like = false;
  bool known = false;

  friend bool operator==(const TrackResponse&, const TrackResponse&) = default;
};

struct EvaluationSheet {
  std::string user_id;
  ModelLabel model = ModelLabel::Traditional;
  std::vector<TrackResponse> responses;
  int rating = 0;
  double inference_seconds = 0.0;

  friend bool operator==(const EvaluationSheet&, const EvaluationSheet&) = default;
};

namespace detail {

inline void require_responses(const EvaluationSheet& sheet, const char* metric) {
  if (sheet.responses.empty()) {
    throw Error(ErrorKind::UndefinedMetric, std::string(metric) + ": sheet has no responses");
  }
}

}  // namespace detail

/// LR = (1/N) * #{i : like_i = 1}
inline double like_rate(const EvaluationSheet& sheet) {
  detail::require_responses(sheet, "like_rate");
  std::size_t liked = 0;
  for (const auto& r : sheet.responses) liked += r.like ? 1 : 0;
  return static_cast<double>(liked) / static_cast<double>(sheet.responses.size());
}

/// NR = (1/N) * #{i : known_i = 0}
inline double novelty_rate(const EvaluationSheet& sheet) {
  detail::require_responses(sheet, "novelty_rate");
  std::size_t unknown = 0;
  for (const auto& r : sheet.responses) unknown += r.known ? 0 : 1;
  return static_cast<double>(unknown) / static_cast<double>(sheet.responses.size());
}

/// SNR = #{known_i = 0 and like_i = 1} / #{known_i = 0}. Undefined (nullopt)
/// when the playlist holds no unknown track.
inline std::optional<double> successful_novelty_rate(const EvaluationSheet& sheet) {
  detail::require_responses(sheet, "successful_novelty_rate");
  std::size_t unknown = 0;
  std::size_t unknown_liked = 0;
  for (const auto& r : sheet.responses) {
    if (r.known) continue;
    ++unknown;
    unknown_liked += r.like ? 1 : 0;
  }
  if (unknown == 0) return std::nullopt;
  return static_cast<double>(unknown_liked) / static_cast<double>(unknown);
}

struct Stat {
  double mean = 0.0;
  double stddev = 0.0;  // sample (n - 1); 0 when n < 2
  std::size_t n = 0;

  bool degenerate() const { return n < 2; }
};

inline Stat summarize(const std::vector<double>& values) {
  Stat s;
  s.n = values.size();
  if (values.empty()) return s;
  double sum = 0.0;
  for (double v : values) sum += v;
  s.mean = sum / static_cast<double>(values.size());
  if (values.size() >= 2) {
    double ss = 0.0;
    for (double v : values) ss += (v - s.mean) * (v - s.mean);
    s.stddev = std::sqrt(ss / static_cast<double>(values.size() - 1));
  }
  return s;
}

/// LR/NR/SNR are kept as percentages. SNR is summarized only over sheets
/// where it is defined, and is absent when no sheet defines it.
struct ModelReport {
  ModelLabel model = ModelLabel::Traditional;
  Stat like_rate;
  Stat novelty_rate;
  std::optional<Stat> successful_novelty_rate;
  Stat rating;
  Stat inference_seconds;
  std::size_t n_sheets = 0;
  std::size_t n_sheets_with_novelty = 0;

  bool std_degenerate() const { return n_sheets < 2; }
};

inline ModelReport aggregate(const std::vector<EvaluationSheet>& sheets, ModelLabel model) {
  std::vector<double> lr, nr, snr, rating, seconds;
  for (const auto& s : sheets) {
    if (s.model != model) continue;
    lr.push_back(100.0 * like_rate(s));
    nr.push_back(100.0 * novelty_rate(s));
    if (auto v = successful_novelty_rate(s)) snr.push_back(100.0 * *v);
    rating.push_back(static_cast<double>(s.rating));
    seconds.push_back(s.inference_seconds);
  }
  if (lr.empty()) {
    throw Error(ErrorKind::EmptyInput, "aggregate: no sheets for model " + std::string(to_string(model)));
  }
  ModelReport r;
  r.model = model;
  r.like_rate = summarize(lr);
  r.novelty_rate = summarize(nr);
  if (!snr.empty()) r.successful_novelty_rate = summarize(snr);
  r.rating = summarize(rating);
  r.inference_seconds = summarize(seconds);
  r.n_sheets = lr.size();
  r.n_sheets_with_novelty = snr.size();
  return r;
}

/// One report per model that has at least one sheet, in fixed model order.
inline std::vector<ModelReport> aggregate_all(const std::vector<EvaluationSheet>& sheets) {
  std::vector<ModelReport> out;
  for (auto m : kAllModels) {
    bool any = false;
    for (const auto& s : sheets) any = any || s.model == m;
    if (any) out.push_back(aggregate(sheets, m));
  }
  return out;
}

// ---------------------------------------------------------------------------
// Serialization

inline double round2(double v) { return std::round(v * 100.0) / 100.0; }

inline std::string fixed2(double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.2f", v);
  return buf;
}

inline json to_json(const TrackResponse& r) {
  return json{{"track_id", r.track_id}, {"like", r.like ? 1 : 0}, {"known", r.known ? 1 : 0}};
}

inline json to_json(const EvaluationSheet& s) {
  json responses = json::array();
  for (const auto& r : s.responses) responses.push_back(to_json(r));
  return json{{"user_id", s.user_id},
              {"model_label", to_string(s.model)},
              {"responses", responses},
              {"rating", s.rating},
              {"inference_seconds", s.inference_seconds}};
}

/// Accepts 0/1 or true/false. Anything else is rejected.
inline bool parse_binary(const json& j, const char* field) {
  if (j.is_boolean()) return j.get<bool>();
  if (j.is_number_integer()) {
    const auto v = j.get<long long>();
    if (v == 0 || v == 1) return v == 1;
  }
  throw Error(ErrorKind::Validation, std::string(field) + " must be 0 or 1");
}

/// Ratings are whole numbers in [0, 10].
inline int parse_rating(const json& j) {
  if (!j.is_number_integer()) throw Error(ErrorKind::Validation, "rating must be an integer in [0, 10]");
  const auto v = j.get<long long>();
  if (v < 0 || v > 10) throw Error(ErrorKind::Validation, "rating must be in [0, 10], got " + std::to_string(v));
  return static_cast<int>(v);
}

inline EvaluationSheet sheet_from_json(const json& j) {
  try {
    EvaluationSheet s;
    s.user_id = j.at("user_id").get<std::string>();
    s.model = parse_model_label(j.at("model_label").get<std::string>());
    for (const auto& r : j.at("responses")) {
      s.responses.push_back({r.at("track_id").get<std::string>(), parse_binary(r.at("like"), "like"),
                             parse_binary(r.at("known"), "known")});
    }
    if (s.responses.empty()) throw Error(ErrorKind::Validation, "sheet must have at least one response");
    s.rating = parse_rating(j.at("rating"));
    s.inference_seconds = j.value("inference_seconds", 0.0);
    if (s.inference_seconds < 0.0) throw Error(ErrorKind::Validation, "inference_seconds must be >= 0");
    return s;
  } catch (const json::exception& e) {
    throw Error(ErrorKind::Parse, std::string("bad evaluation sheet: ") + e.what());
  }
}

inline std::string sheets_to_jsonl(const std::vector<EvaluationSheet>& sheets) {
  std::string out;
  for (const auto& s : sheets) {
    out += to_json(s).dump();
    out += '\n';
  }
  return out;
}

inline std::vector<EvaluationSheet> sheets_from_jsonl(std::string_view data) {
  std::vector<EvaluationSheet> out;
  std::size_t start = 0;
  std::size_t line_no = 0;
  while (start < data.size()) {
    auto end = data.find('\n', start);
    if (end == std::string_view::npos) end = data.size();
    auto line = data.substr(start, end - start);
    ++line_no;
    start = end + 1;
    if (line.find_first_not_of(" \t\r") == std::string_view::npos) continue;
    try {
      out.push_back(sheet_from_json(json::parse(line)));
    } catch (const json::parse_error& e) {
      throw Error(ErrorKind::Parse, "sheets line " + std::to_string(line_no) + ": " + e.what());
    }
  }
  return out;
}

namespace detail {

inline json stat_json(const Stat& s) { return json{{"mean", round2(s.mean)}, {"std", round2(s.stddev)}}; }

inline std::string stat_cell(const Stat& s) { return fixed2(s.mean) + " ± " + fixed2(s.stddev); }

}  // namespace detail

inline json to_json(const ModelReport& r) {
  return json{{"model", to_string(r.model)},
              {"lr_percent", detail::stat_json(r.like_rate)},
              {"nr_percent", detail::stat_json(r.novelty_rate)},
              {"snr_percent", r.successful_novelty_rate ? detail::stat_json(*r.successful_novelty_rate)
                                                        : json(nullptr)},
              {"rating", detail::stat_json(r.rating)},
              {"inference_seconds", detail::stat_json(r.inference_seconds)},
              {"n_sheets", r.n_sheets},
              {"n_sheets_with_novelty", r.n_sheets_with_novelty},
              {"std_degenerate", r.std_degenerate()}};
}

/// Aligned text table: Model, LR, NR, SNR, Rating, inference time.
inline std::string format_table(const std::vector<ModelReport>& reports) {
  const std::vector<std::string> header{"Model", "LR (%)", "NR (%)", "SNR (%)", "Rating (0-10)",
                                        "Inference time (s)"};
  std::vector<std::vector<std::string>> rows{header};
  for (const auto& r : reports) {
    rows.push_back({std::string(to_string(r.model)), detail::stat_cell(r.like_rate),
                    detail::stat_cell(r.novelty_rate),
                    r.successful_novelty_rate ? detail::stat_cell(*r.successful_novelty_rate) : "n/a",
                    detail::stat_cell(r.rating), detail::stat_cell(r.inference_seconds)});
  }
  // "±" is two bytes but one column.
  auto width = [](const std::string& s) {
    std::size_t w = 0;
    for (unsigned char c : s) w += (c & 0xC0) != 0x80 ? 1 : 0;
    return w;
  };
  std::vector<std::size_t> widths(header.size(), 0);
  for (const auto& row : rows) {
    for (std::size_t i = 0; i < row.size(); ++i) widths[i] = std::max(widths[i], width(row[i]));
  }
  std::ostringstream out;
  for (const auto& row : rows) {
    for (std::size_t i = 0; i < row.size(); ++i) {
      out << row[i];
      if (i + 1 < row.size()) out << std::string(widths[i] - width(row[i]) + 2, ' ');
    }
    out << '\n';
  }
  return out.str();
}

}  // namespace musrec::metrics
