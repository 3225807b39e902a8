#pragma once

#include <filesystem>
#include <string>
#include <vector>

#include <json.hpp>

#include "granular/app/config.hpp"
#include "granular/csv.hpp"

namespace granular::app {

inline constexpr const char* kArtifactVersion = GRANULAR_VERSION;

// In-memory CSV table; numbers are stored already formatted.
struct Table {
  std::vector<std::string> header;
  std::vector<std::vector<std::string>> rows;

  template <class... Cells>
  void add(const Cells&... cells) {
    rows.push_back({cell(cells)...});
  }

 private:
  static std::string cell(const std::string& s) { return s; }
  static std::string cell(const char* s) { return s; }
  static std::string cell(double v) { return csv::format_double(v); }
  template <class T>
    requires std::is_integral_v<T>
  static std::string cell(T v) {
    return std::to_string(v);
  }
};

// Writes outputs under one directory. Each CSV gets a `<name>.meta.json`
// sidecar; JSON outputs embed the same block under "metadata". Nothing
// time-dependent is recorded, so reruns are byte-identical.
class OutputDir {
 public:
  OutputDir(std::filesystem::path dir, const RunConfig& config, std::string command);

  void write_csv(const std::string& name, const Table& table,
                 const nlohmann::json& extra = nlohmann::json::object());
  void write_json(const std::string& name, nlohmann::json body);

  nlohmann::json metadata(const std::string& file) const;
  const std::filesystem::path& dir() const { return dir_; }
  const std::vector<std::string>& written() const { return written_; }

 private:
  void write_text(const std::string& name, const std::string& text);

  std::filesystem::path dir_;
  const RunConfig& config_;
  std::string command_;
  std::vector<std::string> written_;
};

// JSON number that maps NaN and infinities to null.
nlohmann::json number(double v);

}  // namespace granular::app
