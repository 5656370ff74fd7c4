#pragma once

#include <charconv>
#include <cstdint>
#include <filesystem>
#include <map>
#include <set>
#include <string>
#include <string_view>
#include <vector>

#include "emoscore/dataio.hpp"
#include "emoscore/error.hpp"

namespace emoscore {

// Line-oriented `key = value` configuration. '#' starts a comment, keys are
// dotted identifiers, and only `run` may repeat. Typed getters mark keys as
// consumed; finish() rejects anything left over so typos fail loudly.
class KvConfig {
 public:
  static KvConfig parse_text(const std::string& text, const std::string& source_name) {
    KvConfig cfg;
    cfg.source_ = source_name;
    std::size_t line_no = 0;
    std::size_t start = 0;
    for (std::size_t i = 0; i <= text.size(); ++i) {
      if (i != text.size() && text[i] != '\n') continue;
      std::string line = text.substr(start, i - start);
      start = i + 1;
      ++line_no;
      if (!line.empty() && line.back() == '\r') line.pop_back();
      const std::string trimmed = trim(line);
      if (trimmed.empty() || trimmed[0] == '#') continue;
      const std::size_t eq = trimmed.find('=');
      if (eq == std::string::npos) {
        throw ConfigError(source_name + ":" + std::to_string(line_no) +
                          ": expected 'key = value'");
      }
      const std::string key = trim(trimmed.substr(0, eq));
      const std::string value = trim(trimmed.substr(eq + 1));
      if (key.empty() || key.find_first_not_of(
                             "abcdefghijklmnopqrstuvwxyzABCDEFGHIJKLMNOPQRSTUVWXYZ0123456789_.") !=
                             std::string::npos) {
        throw ConfigError(source_name + ":" + std::to_string(line_no) + ": bad key '" + key + "'");
      }
      if (value.empty()) {
        throw ConfigError(source_name + ":" + std::to_string(line_no) + ": empty value for '" +
                          key + "'");
      }
      cfg.values_[key].push_back(value);
    }
    return cfg;
  }

  static KvConfig parse_file(const std::filesystem::path& path) {
    return parse_text(detail::read_file_bytes(path), path.string());
  }

  bool has(const std::string& key) const { return values_.count(key) > 0; }

  std::string require_string(const std::string& key) {
    const std::string* v = single(key);
    if (v == nullptr) throw ConfigError(source_ + ": missing required key '" + key + "'");
    return *v;
  }

  std::string get_string(const std::string& key, const std::string& fallback) {
    const std::string* v = single(key);
    return v == nullptr ? fallback : *v;
  }

  long long require_int(const std::string& key) { return to_int(key, require_string(key)); }
  long long get_int(const std::string& key, long long fallback) {
    const std::string* v = single(key);
    return v == nullptr ? fallback : to_int(key, *v);
  }

  double require_double(const std::string& key) { return to_double(key, require_string(key)); }
  double get_double(const std::string& key, double fallback) {
    const std::string* v = single(key);
    return v == nullptr ? fallback : to_double(key, *v);
  }

  std::uint64_t get_u64(const std::string& key, std::uint64_t fallback) {
    const std::string* v = single(key);
    if (v == nullptr) return fallback;
    std::uint64_t out = 0;
    const auto [ptr, ec] = std::from_chars(v->data(), v->data() + v->size(), out);
    if (ec != std::errc() || ptr != v->data() + v->size()) {
      throw ConfigError(source_ + ": key '" + key + "': cannot parse unsigned integer '" + *v +
                        "'");
    }
    return out;
  }

  bool get_bool(const std::string& key, bool fallback) {
    const std::string* v = single(key);
    if (v == nullptr) return fallback;
    if (*v == "true" || *v == "1" || *v == "yes") return true;
    if (*v == "false" || *v == "0" || *v == "no") return false;
    throw ConfigError(source_ + ": key '" + key + "': cannot parse boolean '" + *v + "'");
  }

  std::vector<std::string> get_all(const std::string& key) {
    consumed_.insert(key);
    const auto it = values_.find(key);
    return it == values_.end() ? std::vector<std::string>{} : it->second;
  }

  // Unknown keys are configuration bugs, not extensions.
  void finish() const {
    for (const auto& [key, _] : values_) {
      if (!consumed_.count(key)) {
        throw ConfigError(source_ + ": unknown key '" + key + "'");
      }
    }
  }

  const std::string& source() const { return source_; }

  static std::vector<std::string> split_whitespace(const std::string& text) {
    std::vector<std::string> out;
    std::size_t i = 0;
    while (i < text.size()) {
      while (i < text.size() && (text[i] == ' ' || text[i] == '\t')) ++i;
      std::size_t j = i;
      while (j < text.size() && text[j] != ' ' && text[j] != '\t') ++j;
      if (j > i) out.push_back(text.substr(i, j - i));
      i = j;
    }
    return out;
  }

 private:
  static std::string trim(const std::string& s) {
    std::size_t b = s.find_first_not_of(" \t");
    std::size_t e = s.find_last_not_of(" \t");
    return b == std::string::npos ? std::string() : s.substr(b, e - b + 1);
  }

  const std::string* single(const std::string& key) {
    consumed_.insert(key);
    const auto it = values_.find(key);
    if (it == values_.end()) return nullptr;
    if (it->second.size() != 1) {
      throw ConfigError(source_ + ": key '" + key + "' given " +
                        std::to_string(it->second.size()) + " times, expected once");
    }
    return &it->second.front();
  }

  long long to_int(const std::string& key, const std::string& v) const {
    long long out = 0;
    const auto [ptr, ec] = std::from_chars(v.data(), v.data() + v.size(), out);
    if (ec != std::errc() || ptr != v.data() + v.size()) {
      throw ConfigError(source_ + ": key '" + key + "': cannot parse integer '" + v + "'");
    }
    return out;
  }

  double to_double(const std::string& key, const std::string& v) const {
    double out = 0.0;
    const auto [ptr, ec] = std::from_chars(v.data(), v.data() + v.size(), out);
    if (ec != std::errc() || ptr != v.data() + v.size()) {
      throw ConfigError(source_ + ": key '" + key + "': cannot parse number '" + v + "'");
    }
    return out;
  }

  std::string source_;
  std::map<std::string, std::vector<std::string>> values_;
  std::set<std::string> consumed_;
};

}  // namespace emoscore
