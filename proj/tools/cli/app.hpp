#pragma once

#include <iosfwd>
#include <string>
#include <vector>

#include "pfcvm/pfcvm.hpp"

namespace pfcvm::cli {

inline constexpr int kExitOk = 0;
inline constexpr int kExitUsage = 1;
inline constexpr int kExitModel = 2;

/// Runs one CLI invocation. `args` excludes the program name.
int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

/// "rbf", "linear" or "poly:P".
void parse_kernel(const std::string& text, TrainConfig& config);

json config_to_json(const TrainConfig& config);

}  // namespace pfcvm::cli
