#pragma once

#include <map>
#include <optional>
#include <string>
#include <vector>

#include "adbatch/config.hpp"

namespace adbatch::cli {

// Declared keys per section; anything else is a hard error.
const std::map<std::string, std::vector<std::string>>& config_schema();

struct RunArgs {
  std::string config_path;
  std::vector<std::string> overrides;  // key=value or section.key=value
  std::optional<std::uint64_t> seed;
  std::optional<std::string> out_dir;
  bool force = false;
  int threads = 0;  // 0: hardware concurrency
};

int cmd_run(const RunArgs& args);
int cmd_report(const std::string& run_dir);
int cmd_calibrate_overhead(const std::string& problem_name, int threads = 0);

}  // namespace adbatch::cli
