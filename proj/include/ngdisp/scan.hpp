#pragma once

#include <cstdint>
#include <functional>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include "ngdisp/config.hpp"

namespace ngdisp {

/// Command-line overrides applied on top of a ScanConfig.
struct ScanOptions {
  std::optional<std::string> out_dir;
  std::optional<std::uint64_t> dense_cap;
  std::optional<int> jobs;
  /// Restricts the enabled groups (intersection with the config's).
  std::optional<std::set<std::string>> groups;
  std::optional<std::string> cache_dir;
  bool fail_fast = false;
  /// Label recorded in the manifest.
  std::string command = "scan";
};

struct ScanResult {
  int exit_code = 0;
  std::size_t checks = 0;
  std::size_t failures = 0;
  std::size_t task_errors = 0;
  std::size_t skipped = 0;
  std::string out_dir;
};

/// Runs every enabled group over the configured grid and writes the CSVs,
/// manifest.json and failures.csv into the output directory.
ScanResult run_scan(ScanConfig config, const ScanOptions& opts);

/// Reads manifest.json (and failures.csv) from a previous run and renders a
/// short text summary.
std::string render_report(const std::string& out_dir);

/// Runs `fn(i)` for i in [0, n) on up to `jobs` threads; fn returns false on
/// failure. With fail_fast, tasks not yet started after a failure are skipped.
void run_pool(std::size_t n, int jobs, const std::function<bool(std::size_t)>& fn, bool fail_fast);

}  // namespace ngdisp
