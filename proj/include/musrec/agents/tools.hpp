#pragma once

#include <cstddef>
#include <optional>
#include <string>

#include <nlohmann/json.hpp>

#include "musrec/agents/specs.hpp"
#include "musrec/error.hpp"
#include "musrec/http.hpp"

namespace musrec::agents {

/// GETs a JSON array. Unreachable hosts and non-2xx statuses raise Tool
/// errors (404 raises NotFound); a body that is not a JSON array raises Parse.
inline json fetch_json_list(const std::string& url, const http::Get& get, std::optional<std::size_t> limit = {}) {
  const auto res = get(url);
  if (res.status == 0) throw Error(ErrorKind::Tool, "GET " + url + " failed: " + res.error);
  if (res.status == 404) throw Error(ErrorKind::NotFound, "GET " + url + ": not found");
  if (!res.ok()) throw Error(ErrorKind::Tool, "GET " + url + " returned HTTP " + std::to_string(res.status));
  json body;
  try {
    body = json::parse(res.body);
  } catch (const json::parse_error& e) {
    throw Error(ErrorKind::Parse, "GET " + url + ": malformed JSON: " + e.what());
  }
  if (!body.is_array()) throw Error(ErrorKind::Parse, "GET " + url + ": expected a JSON array");
  if (limit && body.size() > *limit) body.erase(body.begin() + static_cast<std::ptrdiff_t>(*limit), body.end());
  return body;
}

inline json tool_get_catalogue(const std::string& url, const http::Get& get) { return fetch_json_list(url, get); }

inline constexpr std::size_t kHistoryToolLimit = 30;

inline json tool_get_user_history(const std::string& url, const http::Get& get,
                                  std::size_t limit = kHistoryToolLimit) {
  return fetch_json_list(url, get, limit);
}

/// Substitutes {user_id} in the tool's endpoint and prefixes the base URL.
inline std::string resolve_endpoint(const ToolSpec& tool, const std::string& base_url, const std::string& user_id) {
  std::string path = tool.endpoint_template;
  const std::string placeholder = "{user_id}";
  for (auto pos = path.find(placeholder); pos != std::string::npos; pos = path.find(placeholder)) {
    path.replace(pos, placeholder.size(), user_id);
  }
  auto base = base_url;
  while (!base.empty() && base.back() == '/') base.pop_back();
  return base + path;
}

}  // namespace musrec::agents
