#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include "bci/error.hpp"

namespace bci {

// Flat key = value text document. '#' starts a comment, blank lines are
// ignored, keys carry their units in the name (window_s, erd_band_lo_hz).
class Config {
 public:
  Config() = default;
  static Config parse(const std::string& text);
  static Config load(const std::string& path);

  bool has(const std::string& key) const;
  std::string get_string(const std::string& key) const;
  std::string get_string(const std::string& key, const std::string& fallback) const;
  double get_double(const std::string& key) const;
  double get_double(const std::string& key, double fallback) const;
  int get_int(const std::string& key) const;
  int get_int(const std::string& key, int fallback) const;
  std::uint64_t get_uint64(const std::string& key) const;
  std::uint64_t get_uint64(const std::string& key, std::uint64_t fallback) const;
  bool get_bool(const std::string& key) const;
  bool get_bool(const std::string& key, bool fallback) const;
  // comma-separated doubles
  std::vector<double> get_doubles(const std::string& key) const;
  std::vector<std::string> get_strings(const std::string& key) const;

  void set(const std::string& key, const std::string& value);

  // Schema check: every present key must be in `allowed`.
  void assert_only(const std::set<std::string>& allowed) const;

  // Canonical text form (sorted keys), used for hashing and manifests.
  std::string canonical_text() const;
  const std::map<std::string, std::string>& entries() const { return values_; }

 private:
  std::map<std::string, std::string> values_;
};

// FNV-1a 64-bit over raw bytes; stable across runs and platforms.
std::uint64_t fnv1a64(const void* data, std::size_t size);
std::uint64_t fnv1a64(const std::string& s);

}  // namespace bci
