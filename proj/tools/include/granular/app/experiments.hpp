#pragma once

#include <cstdint>
#include <string>
#include <utility>
#include <vector>

#include <json.hpp>

#include "granular/app/output.hpp"

namespace granular::app {

enum class Relation { Within, Below, Above, InRange };

// One tolerance check. criterion is the acceptance criterion it backs, or 0.
struct Check {
  int criterion = 0;
  std::string name;
  double value = 0.0;
  Relation relation = Relation::Within;
  double a = 0.0;  // target, bound, or lower end
  double b = 0.0;  // tolerance or upper end
  bool pass = false;
};

Check within(int criterion, std::string name, double value, double target, double tol);
Check below(int criterion, std::string name, double value, double bound);
Check above(int criterion, std::string name, double value, double bound);
Check in_range(int criterion, std::string name, double value, double lo, double hi);

// "PASS  hill_size_top1pct = 1.183 (target 1.2 +- 0.15)".
std::string format_check(const Check& c);

struct ExperimentOptions {
  std::uint64_t seed = 20240501;
  unsigned threads = 0;
  double scale = 1.0;  // multiplies sample sizes; 1 is the documented size
};

struct ExperimentResult {
  std::string id;
  std::vector<std::pair<std::string, Table>> tables;
  nlohmann::json summary = nlohmann::json::object();
  std::vector<Check> checks;

  bool pass() const;
};

struct ExperimentInfo {
  std::string id;
  std::string description;
};

const std::vector<ExperimentInfo>& experiment_catalog();
const ExperimentInfo* find_experiment(const std::string& id);

// Runs a catalog entry; throws ContractError for unknown ids.
ExperimentResult run_experiment(const std::string& id, const ExperimentOptions& options);

nlohmann::json verdict_json(const ExperimentResult& result);

}  // namespace granular::app
