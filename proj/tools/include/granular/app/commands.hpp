#pragma once

#include <ostream>
#include <string>

#include "granular/app/config.hpp"

namespace granular::app {

// Exit statuses shared by every verb.
inline constexpr int kExitOk = 0;
inline constexpr int kExitValidation = 1;
inline constexpr int kExitRuntime = 2;
inline constexpr int kExitStrictFail = 3;

// Each command validates its whole configuration before doing any work and
// returns an exit status; failures raise ValidationError or a runtime error.
int cmd_simulate(const RunConfig& config, std::ostream& log);
int cmd_analyze(const RunConfig& config, std::ostream& log);
int cmd_fit(const RunConfig& config, bool strict, std::ostream& log);
int cmd_ingest(const RunConfig& config, std::ostream& log);
int cmd_reproduce(const std::string& experiment_id, const RunConfig& config, bool strict,
                  std::ostream& log);

}  // namespace granular::app
