#pragma once

// Minimal HTTP client surface shared by the agent tools and chat backends.
// Callers take an HttpGet/HttpPost function so tests can route requests
// in-process instead of over a socket.

#include <chrono>
#include <functional>
#include <map>
#include <string>
#include <utility>

#include <httplib.h>

#include "musrec/error.hpp"

namespace musrec::http {

struct Response {
  int status = 0;  // 0: no response (connection failure or timeout)
  std::string body;
  std::string error;

  bool ok() const { return status >= 200 && status < 300; }
};

using Headers = std::multimap<std::string, std::string>;
using Get = std::function<Response(const std::string& url)>;
using Post = std::function<Response(const std::string& url, const Headers& headers, const std::string& body)>;

struct Url {
  std::string origin;  // scheme://host[:port]
  std::string target;  // path[?query]
};

inline Url split_url(const std::string& url) {
  const auto scheme_end = url.find("://");
  if (scheme_end == std::string::npos) {
    throw Error(ErrorKind::Configuration, "URL without scheme: " + url);
  }
  const auto path_start = url.find('/', scheme_end + 3);
  if (path_start == std::string::npos) return {url, "/"};
  return {url.substr(0, path_start), url.substr(path_start)};
}

inline httplib::Client make_client(const std::string& origin, std::chrono::seconds timeout) {
  httplib::Client client(origin);
  client.set_connection_timeout(std::chrono::seconds(10));
  client.set_read_timeout(timeout);
  client.set_write_timeout(timeout);
  return client;
}

inline Response from_result(const httplib::Result& res) {
  if (!res) return {0, {}, httplib::to_string(res.error())};
  return {res->status, res->body, {}};
}

inline Get default_get(std::chrono::seconds timeout = std::chrono::seconds(60)) {
  return [timeout](const std::string& url) {
    const auto parts = split_url(url);
    auto client = make_client(parts.origin, timeout);
    return from_result(client.Get(parts.target));
  };
}

inline Post default_post(std::chrono::seconds timeout = std::chrono::seconds(120)) {
  return [timeout](const std::string& url, const Headers& headers, const std::string& body) {
    const auto parts = split_url(url);
    auto client = make_client(parts.origin, timeout);
    httplib::Headers h(headers.begin(), headers.end());
    return from_result(client.Post(parts.target, h, body, "application/json"));
  };
}

}  // namespace musrec::http
