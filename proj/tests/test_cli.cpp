#include <sys/wait.h>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>

#include "doctest.h"
#include "json.hpp"

namespace fs = std::filesystem;

namespace {

struct Run {
  int status;
  std::string output;
};

Run run(const std::string& args, const fs::path& log) {
  const std::string cmd = std::string(NGDISP_CLI_PATH) + " " + args + " > " + log.string() + " 2>&1";
  const int raw = std::system(cmd.c_str());
  std::ifstream in(log);
  std::stringstream ss;
  ss << in.rdbuf();
  return {WIFEXITED(raw) ? WEXITSTATUS(raw) : -1, ss.str()};
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

struct Workspace {
  fs::path dir;
  Workspace() : dir(fs::temp_directory_path() / "ngdisp_cli_test") {
    fs::remove_all(dir);
    fs::create_directories(dir);
  }
  ~Workspace() { fs::remove_all(dir); }
  fs::path config(const std::string& name, const std::string& extra) const {
    const auto p = dir / name;
    std::ofstream(p) << "[lattice]\nextents = 2x2\n[field]\nB = 0.2, 0.1\n[wavepacket]\np = pi/2\n"
                     << "[run]\ncache_dir = " << (dir / "cache").string() << "\n"
                     << extra;
    return p;
  }
};

}  // namespace

TEST_CASE("bounds-only run on the 2x2 torus") {
  Workspace ws;
  const auto cfg = ws.config("b.ini", "checks = bounds\n");
  const auto out = ws.dir / "out";
  const auto r = run("bounds --config " + cfg.string() + " --out " + out.string(), ws.dir / "log");
  CAPTURE(r.output);
  CHECK(r.status == 0);
  const auto manifest = nlohmann::json::parse(slurp(out / "manifest.json"));
  CHECK(manifest["pass"].get<bool>());
  CHECK(manifest["summary"]["failures"].get<int>() == 0);
  CHECK(manifest["summary"]["checks"].get<int>() > 0);
  const auto bounds = slurp(out / "bounds.csv");
  // 4 grid momenta x 2 modes x 2 fields, each with a sum rule row
  std::size_t rows = 0, sum_rules = 0;
  std::istringstream lines(bounds);
  std::string line;
  std::getline(lines, line);
  while (std::getline(lines, line)) {
    ++rows;
    if (line.find(",sum_rule,") != std::string::npos) ++sum_rules;
    CHECK(line.find(manifest["config_hash"].get<std::string>()) == 0);
  }
  CHECK(sum_rules == 16);
  CHECK(rows > sum_rules);
  CHECK(!fs::exists(out / "dispersion.csv"));

  const auto rep = run("report --out " + out.string(), ws.dir / "log2");
  CHECK(rep.status == 0);
  CHECK(rep.output.find("PASS") != std::string::npos);

  const auto vc = run("verify-cache --cache " + (ws.dir / "cache").string(), ws.dir / "log3");
  CHECK(vc.status == 0);
  CHECK(vc.output.find("valid") != std::string::npos);
}

TEST_CASE("corrupted bound makes the run fail and is named in the failure index") {
  Workspace ws;
  const auto cfg = ws.config("c.ini", "checks = bounds\n[debug]\ncorrupt_entry = irb.2\n");
  const auto out = ws.dir / "out";
  const auto r = run("scan --config " + cfg.string() + " --out " + out.string(), ws.dir / "log");
  CHECK(r.status != 0);
  const auto failures = slurp(out / "failures.csv");
  CHECK(failures.find(",irb.2,") != std::string::npos);
  CHECK(failures.find("corrupted by debug hook") != std::string::npos);
  CHECK(!nlohmann::json::parse(slurp(out / "manifest.json"))["pass"].get<bool>());
}

TEST_CASE("configuration errors exit with status 2 and an addressed message") {
  Workspace ws;
  const auto bad = ws.config("u.ini", "checks = bounds\nfoo = 1\n");
  const auto r = run("scan --config " + bad.string(), ws.dir / "log");
  CHECK(r.status == 2);
  CHECK(r.output.find("unknown key [run] foo") != std::string::npos);
  const auto empty = ws.config("e.ini", "checks =\n");
  const auto r2 = run("scan --config " + empty.string(), ws.dir / "log2");
  CHECK(r2.status == 2);
  CHECK(r2.output.find("[run] checks") != std::string::npos);
  CHECK(run("frobnicate", ws.dir / "log3").status == 2);
}

TEST_CASE("cache root can be overridden from the environment") {
  Workspace ws;
  const auto cfg = ws.config("b.ini", "checks = bounds\n");
  const auto env_cache = ws.dir / "envcache";
  const auto r = run("bounds --config " + cfg.string() + " --out " + (ws.dir / "o").string(), ws.dir / "log");
  REQUIRE(r.status == 0);
  const std::string cmd = "NGDISP_CACHE_DIR=" + env_cache.string() + " " + NGDISP_CLI_PATH + " bounds --config " +
                          cfg.string() + " --out " + (ws.dir / "o2").string() + " > /dev/null 2>&1";
  CHECK(std::system(cmd.c_str()) == 0);
  CHECK(fs::exists(env_cache));
  CHECK(!fs::is_empty(env_cache));
}
