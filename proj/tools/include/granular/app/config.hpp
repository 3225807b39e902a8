#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <stdexcept>
#include <string>
#include <vector>

#include "granular/model.hpp"

namespace granular::app {

// Bad flags, unknown keys, malformed values, or invalid parameters. Maps to
// exit status 1.
class ValidationError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Flat "section.key" -> value store seeded with documented defaults.
//
// Precedence, lowest first: defaults, the --config file, --set overrides,
// then the dedicated --seed / --threads / --out-dir flags.
class RunConfig {
 public:
  RunConfig();

  // INI file with [section] headers and key = value lines.
  void load_file(const std::filesystem::path& path);
  // "section.key=value".
  void apply_override(const std::string& assignment);
  void set(const std::string& key, const std::string& value);

  const std::string& get(const std::string& key) const;
  std::string get_string(const std::string& key) const { return get(key); }
  double get_double(const std::string& key) const;
  std::int64_t get_int(const std::string& key) const;
  std::uint64_t get_uint(const std::string& key) const;
  bool get_bool(const std::string& key) const;
  std::vector<double> get_double_list(const std::string& key) const;
  std::vector<std::size_t> get_index_list(const std::string& key) const;

  std::uint64_t seed() const { return get_uint("run.seed"); }
  unsigned threads() const;
  std::filesystem::path out_dir() const { return get("run.out_dir"); }

  ModelParams model() const;

  const std::map<std::string, std::string>& values() const { return values_; }

  // FNV-1a 64 over "key=value\n" lines in key order, excluding keys that
  // cannot change results (run.threads, run.out_dir).
  std::uint64_t hash() const;
  std::string hash_hex() const;

 private:
  std::map<std::string, std::string> values_;
};

struct KeyDoc {
  const char* key;
  const char* default_value;
  const char* description;
};

// Every recognized key with its default, in documentation order.
const std::vector<KeyDoc>& documented_keys();

}  // namespace granular::app
