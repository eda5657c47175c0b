#pragma once

#include <string>
#include <vector>

#include "slnl/config.hpp"
#include "slnl/train.hpp"

namespace slnl {

struct CheckResult {
  std::string name;
  double tolerance = 0.0;
  double observed = 0.0;
  bool pass = false;
};

struct AblationRow {
  std::string label;
  double accuracy = 0.0;
  double extra = 0.0;  // plan-specific column (e.g. margin fraction)
};

/// Structured text report: `key = value` lines plus TSV sections for
/// per-epoch metrics, checks and ablation tables. Round-trips losslessly
/// through write/parse.
struct RunReport {
  std::string command;
  std::uint64_t seed = 0;
  ConfigMap config;
  std::vector<EpochMetrics> metrics;
  std::vector<CheckResult> checks;
  std::vector<AblationRow> table;
  std::string table_extra_name;  // header of the extra ablation column
  ConfigMap final_values;
  double wall_seconds = 0.0;

  bool all_checks_pass() const;
};

std::string write_report(const RunReport& report);
void save_report(const std::string& path, const RunReport& report);
RunReport parse_report(const std::string& text);
RunReport load_report(const std::string& path);

}  // namespace slnl
