#include "granular/app/output.hpp"

#include <cmath>
#include <fstream>
#include <sstream>

#include "granular/errors.hpp"

namespace granular::app {

nlohmann::json number(double v) {
  if (!std::isfinite(v)) return nullptr;
  return v;
}

OutputDir::OutputDir(std::filesystem::path dir, const RunConfig& config, std::string command)
    : dir_(std::move(dir)), config_(config), command_(std::move(command)) {
  std::error_code ec;
  std::filesystem::create_directories(dir_, ec);
  if (ec) throw std::runtime_error("cannot create output directory " + dir_.string() + ": " + ec.message());
}

nlohmann::json OutputDir::metadata(const std::string& file) const {
  nlohmann::json config = nlohmann::json::object();
  for (const auto& [k, v] : config_.values()) config[k] = v;
  return {{"artifact", "granular"},
          {"version", kArtifactVersion},
          {"command", command_},
          {"file", file},
          {"seed", config_.seed()},
          {"config_hash", config_.hash_hex()},
          {"config", config}};
}

void OutputDir::write_text(const std::string& name, const std::string& text) {
  const auto path = dir_ / name;
  std::ofstream out(path, std::ios::binary);
  out << text;
  out.close();
  if (!out) throw std::runtime_error("cannot write " + path.string());
  written_.push_back(name);
}

void OutputDir::write_csv(const std::string& name, const Table& table,
                          const nlohmann::json& extra) {
  std::ostringstream body;
  csv::Writer writer(body);
  writer.row_strings(table.header);
  for (const auto& r : table.rows) {
    if (r.size() != table.header.size())
      throw ContractError("table " + name + ": row width differs from header");
    writer.row_strings(r);
  }
  write_text(name, body.str());
  auto meta = metadata(name);
  meta["rows"] = table.rows.size();
  meta["columns"] = table.header;
  if (!extra.empty()) meta["details"] = extra;
  write_text(name + ".meta.json", meta.dump(2) + "\n");
}

void OutputDir::write_json(const std::string& name, nlohmann::json body) {
  body["metadata"] = metadata(name);
  write_text(name, body.dump(2) + "\n");
}

}  // namespace granular::app
