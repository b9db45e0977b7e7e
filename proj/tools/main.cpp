#include <cstdlib>
#include <iostream>
#include <set>
#include <string>

#include "CLI11.hpp"

#include "ngdisp/config.hpp"
#include "ngdisp/eigensolver.hpp"
#include "ngdisp/scan.hpp"

namespace {

constexpr const char* kCacheEnv = "NGDISP_CACHE_DIR";

struct Common {
  std::string config;
  std::string out;
  std::uint64_t dense_cap = 0;
  int jobs = 0;
  bool fail_fast = false;
};

void add_common(CLI::App* sub, Common& c, bool needs_config) {
  auto* opt = sub->add_option("--config", c.config, "INI configuration file");
  if (needs_config) opt->required();
  sub->add_option("--out", c.out, "output directory (overrides [run] output_dir)");
  sub->add_option("--dense-cap", c.dense_cap, "largest dimension handled by the dense oracle");
  sub->add_option("--jobs", c.jobs, "worker threads")->check(CLI::PositiveNumber);
  sub->add_flag("--fail-fast", c.fail_fast, "stop scheduling after the first failing task");
}

ngdisp::ScanOptions to_options(const Common& c, const std::string& command) {
  ngdisp::ScanOptions o;
  o.command = command;
  if (!c.out.empty()) o.out_dir = c.out;
  if (c.dense_cap > 0) o.dense_cap = c.dense_cap;
  if (c.jobs > 0) o.jobs = c.jobs;
  o.fail_fast = c.fail_fast;
  if (const char* env = std::getenv(kCacheEnv); env != nullptr && *env != '\0') o.cache_dir = env;
  return o;
}

int run(const Common& c, const std::string& command, std::optional<std::set<std::string>> groups) {
  const auto config = ngdisp::load_config(c.config);
  auto opts = to_options(c, command);
  opts.groups = std::move(groups);
  const auto r = ngdisp::run_scan(config, opts);
  std::cout << command << ": " << (r.exit_code == 0 ? "PASS" : "FAIL") << "  checks=" << r.checks
            << " failures=" << r.failures << " task_errors=" << r.task_errors << " skipped=" << r.skipped
            << "  -> " << r.out_dir << "\n";
  return r.exit_code;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Nambu-Goldstone dispersion checks for the Heisenberg antiferromagnet"};
  app.require_subcommand(1);
  Common common;
  std::string cache_dir;

  auto* scan = app.add_subcommand("scan", "run every check group enabled in the config");
  add_common(scan, common, true);
  const std::vector<std::pair<std::string, std::string>> groups = {
      {"bounds", "inequality suite only"},
      {"dispersion", "wavepacket excitation energies"},
      {"qmode", "excitation energies around Q"},
      {"locality", "quasi-locality and B-continuity on tiny lattices"}};
  std::vector<CLI::App*> group_cmds;
  for (const auto& [name, help] : groups) {
    auto* sub = app.add_subcommand(name, help);
    add_common(sub, common, true);
    group_cmds.push_back(sub);
  }
  auto* verify = app.add_subcommand("verify-cache", "recheck cached ground states, evicting stale ones");
  verify->add_option("--config", common.config, "INI configuration file (for [run] cache_dir)");
  verify->add_option("--cache", cache_dir, "cache directory");
  auto* report = app.add_subcommand("report", "re-render the summary of a finished run");
  report->add_option("--config", common.config, "INI configuration file (for [run] output_dir)");
  report->add_option("--out", common.out, "output directory of the run");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    return app.exit(e) == 0 ? 0 : 2;
  }

  try {
    if (scan->parsed()) return run(common, "scan", std::nullopt);
    for (auto* sub : group_cmds)
      if (sub->parsed()) return run(common, sub->get_name(), std::set<std::string>{sub->get_name()});
    if (verify->parsed()) {
      if (cache_dir.empty())
        if (const char* env = std::getenv(kCacheEnv); env != nullptr && *env != '\0') cache_dir = env;
      if (cache_dir.empty() && !common.config.empty()) cache_dir = ngdisp::load_config(common.config).cache_dir;
      if (cache_dir.empty()) {
        std::cerr << "verify-cache: no cache directory (use --cache, --config or " << kCacheEnv << ")\n";
        return 2;
      }
      const auto entries = ngdisp::verify_cache(cache_dir);
      std::size_t bad = 0;
      for (const auto& e : entries) {
        bad += e.valid ? 0 : 1;
        std::cout << (e.valid ? "valid   " : (e.evicted ? "evicted " : "invalid ")) << e.path.string()
                  << "  residual=" << e.residual << (e.message.empty() ? "" : "  " + e.message) << "\n";
      }
      std::cout << "verify-cache: " << entries.size() << " entries, " << bad << " not valid\n";
      return 0;
    }
    if (report->parsed()) {
      std::string out = common.out;
      if (out.empty() && !common.config.empty()) out = ngdisp::load_config(common.config).output_dir;
      if (out.empty()) out = "out";
      std::cout << ngdisp::render_report(out);
      return 0;
    }
  } catch (const ngdisp::ConfigError& e) {
    std::cerr << "config error: " << e.what() << "\n";
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  }
  return 2;
}
