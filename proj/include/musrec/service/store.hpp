#pragma once

// Document persistence behind a small interface. FileDocumentStore keeps one
// JSON file per record under DATA_DIR/<kind>/ and an append log per kind for
// line-oriented records; every write replaces the whole file atomically.

#include <algorithm>
#include <filesystem>
#include <fstream>
#include <map>
#include <mutex>
#include <optional>
#include <random>
#include <sstream>
#include <string>
#include <string_view>
#include <vector>

#include <nlohmann/json.hpp>

#include "musrec/domain.hpp"
#include "musrec/error.hpp"
#include "musrec/text.hpp"

namespace musrec::service {

using json = nlohmann::json;

enum class DocKind { Catalog, History, Sheet, Session, Meta };

inline std::string_view to_string(DocKind k) {
  switch (k) {
    case DocKind::Catalog: return "catalog";
    case DocKind::History: return "history";
    case DocKind::Sheet: return "sheet";
    case DocKind::Session: return "session";
    case DocKind::Meta: return "meta";
  }
  return "";
}

class DocumentStore {
 public:
  virtual ~DocumentStore() = default;

  virtual std::optional<json> get(DocKind kind, const std::string& key) const = 0;
  virtual void put(DocKind kind, const std::string& key, const json& doc) = 0;
  virtual std::vector<std::string> keys(DocKind kind) const = 0;

  virtual void append_lines(DocKind kind, const std::vector<json>& docs) = 0;
  virtual std::vector<json> lines(DocKind kind) const = 0;
};

class MemoryDocumentStore final : public DocumentStore {
 public:
  std::optional<json> get(DocKind kind, const std::string& key) const override {
    std::lock_guard lock(mutex_);
    auto it = docs_.find({kind, key});
    if (it == docs_.end()) return std::nullopt;
    return std::optional<json>(std::in_place, it->second);
  }

  void put(DocKind kind, const std::string& key, const json& doc) override {
    std::lock_guard lock(mutex_);
    docs_[{kind, key}] = doc;
  }

  std::vector<std::string> keys(DocKind kind) const override {
    std::lock_guard lock(mutex_);
    std::vector<std::string> out;
    for (const auto& [k, _] : docs_) {
      if (k.first == kind) out.push_back(k.second);
    }
    return out;
  }

  void append_lines(DocKind kind, const std::vector<json>& docs) override {
    std::lock_guard lock(mutex_);
    auto& log = logs_[kind];
    log.insert(log.end(), docs.begin(), docs.end());
  }

  std::vector<json> lines(DocKind kind) const override {
    std::lock_guard lock(mutex_);
    auto it = logs_.find(kind);
    return it == logs_.end() ? std::vector<json>{} : it->second;
  }

 private:
  mutable std::mutex mutex_;
  std::map<std::pair<DocKind, std::string>, json> docs_;
  std::map<DocKind, std::vector<json>> logs_;
};

namespace detail {

// Filesystem-safe, reversible key encoding: [A-Za-z0-9_-] pass through, all
// other bytes become %XX.
inline std::string encode_key(std::string_view key) {
  static constexpr char kHex[] = "0123456789ABCDEF";
  std::string out;
  for (unsigned char c : key) {
    if ((c >= 'a' && c <= 'z') || (c >= 'A' && c <= 'Z') || (c >= '0' && c <= '9') || c == '_' || c == '-') {
      out.push_back(static_cast<char>(c));
    } else {
      out.push_back('%');
      out.push_back(kHex[c >> 4]);
      out.push_back(kHex[c & 0xF]);
    }
  }
  return out;
}

inline std::string decode_key(std::string_view enc) {
  std::string out;
  for (std::size_t i = 0; i < enc.size(); ++i) {
    if (enc[i] == '%' && i + 2 < enc.size()) {
      out.push_back(static_cast<char>(std::stoi(std::string(enc.substr(i + 1, 2)), nullptr, 16)));
      i += 2;
    } else {
      out.push_back(enc[i]);
    }
  }
  return out;
}

}  // namespace detail

class FileDocumentStore final : public DocumentStore {
 public:
  explicit FileDocumentStore(std::filesystem::path root) : root_(std::move(root)) {
    std::filesystem::create_directories(root_);
  }

  const std::filesystem::path& root() const { return root_; }

  std::optional<json> get(DocKind kind, const std::string& key) const override {
    std::lock_guard lock(mutex_);
    const auto path = doc_path(kind, key);
    if (!std::filesystem::exists(path)) return std::nullopt;
    return std::optional<json>(std::in_place, parse(path));
  }

  void put(DocKind kind, const std::string& key, const json& doc) override {
    std::lock_guard lock(mutex_);
    write_atomic(doc_path(kind, key), doc.dump(2) + "\n");
  }

  std::vector<std::string> keys(DocKind kind) const override {
    std::lock_guard lock(mutex_);
    std::vector<std::string> out;
    const auto dir = root_ / std::string(to_string(kind));
    if (!std::filesystem::exists(dir)) return out;
    for (const auto& entry : std::filesystem::directory_iterator(dir)) {
      if (entry.path().extension() == ".json") out.push_back(detail::decode_key(entry.path().stem().string()));
    }
    std::sort(out.begin(), out.end());
    return out;
  }

  void append_lines(DocKind kind, const std::vector<json>& docs) override {
    std::lock_guard lock(mutex_);
    const auto path = log_path(kind);
    std::string contents = std::filesystem::exists(path) ? read_file(path.string()) : std::string{};
    if (!contents.empty() && contents.back() != '\n') contents.push_back('\n');
    for (const auto& d : docs) contents += d.dump() + "\n";
    write_atomic(path, contents);
  }

  std::vector<json> lines(DocKind kind) const override {
    std::lock_guard lock(mutex_);
    const auto path = log_path(kind);
    std::vector<json> out;
    if (!std::filesystem::exists(path)) return out;
    std::istringstream in(read_file(path.string()));
    std::string line;
    while (std::getline(in, line)) {
      if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
      try {
        out.push_back(json::parse(line));
      } catch (const json::parse_error& e) {
        throw Error(ErrorKind::Parse, path.string() + ": " + e.what());
      }
    }
    return out;
  }

  std::filesystem::path log_path(DocKind kind) const { return root_ / (std::string(to_string(kind)) + "s.jsonl"); }

 private:
  std::filesystem::path doc_path(DocKind kind, const std::string& key) const {
    return root_ / std::string(to_string(kind)) / (detail::encode_key(key) + ".json");
  }

  static json parse(const std::filesystem::path& path) {
    try {
      return json::parse(read_file(path.string()));
    } catch (const json::parse_error& e) {
      throw Error(ErrorKind::Parse, path.string() + ": " + e.what());
    }
  }

  static void write_atomic(const std::filesystem::path& path, const std::string& contents) {
    std::filesystem::create_directories(path.parent_path());
    thread_local std::mt19937_64 rng{std::random_device{}()};
    auto tmp = path;
    tmp += ".tmp-" + text::to_hex(rng(), 8);
    {
      std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
      if (!out) throw Error(ErrorKind::Conflict, "cannot write " + tmp.string());
      out << contents;
      out.flush();
      if (!out) throw Error(ErrorKind::Conflict, "short write to " + tmp.string());
    }
    std::filesystem::rename(tmp, path);
  }

  std::filesystem::path root_;
  mutable std::mutex mutex_;
};

}  // namespace musrec::service
