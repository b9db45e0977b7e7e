#include <atomic>
#include <cmath>
#include <numbers>
#include <string>

#include "doctest.h"
#include "ngdisp/config.hpp"
#include "ngdisp/scan.hpp"

using namespace ngdisp;

namespace {

const std::string kBase = R"(
[lattice]
extents = 2x2, 2x4
spin = 1/2
[field]
B = 0.2, 0.1
[wavepacket]
p = pi/2
)";

/// Sections may appear once; a [run] section is added unless the extra text has one.
std::string with(const std::string& extra) {
  const bool has_run = extra.find("[run]") != std::string::npos;
  return kBase + extra + (has_run ? "" : "[run]\nchecks = bounds\n");
}

std::string error_of(const std::string& text) {
  try {
    parse_config_text(text);
  } catch (const ConfigError& e) {
    return e.what();
  }
  return {};
}

}  // namespace

TEST_CASE("real number expressions") {
  CHECK(parse_real("0.5") == 0.5);
  CHECK(parse_real("pi") == std::numbers::pi);
  CHECK(parse_real("pi/2") == std::numbers::pi / 2);
  CHECK(parse_real("3*pi/4") == doctest::Approx(3 * std::numbers::pi / 4).epsilon(1e-15));
  CHECK(parse_real("-1e-3") == -1e-3);
  CHECK(parse_real("-pi") == -std::numbers::pi);
  CHECK_THROWS_AS(parse_real("two"), ConfigError);
  CHECK_THROWS_AS(parse_real(""), ConfigError);
  CHECK_THROWS_AS(parse_real("1/0"), ConfigError);
}

TEST_CASE("minimal config and defaults") {
  const auto c = parse_config_text(with(""));
  CHECK(c.lattices == std::vector<std::vector<int>>{{2, 2}, {2, 4}});
  CHECK(c.B == std::vector<double>{0.2, 0.1});
  CHECK(c.kappa == std::numbers::pi);
  CHECK(!c.epsilon.has_value());
  CHECK(c.enabled("bounds"));
  CHECK(!c.enabled("locality"));
  CHECK(c.hash().size() == 16);
}

TEST_CASE("invariants are enforced") {
  CHECK(error_of(with("[filter]\nepsilon = 0.1\n")).empty());
  CHECK(error_of(R"([lattice]
extents = 2x2
[field]
B = 0.1, 0.2
[wavepacket]
p = pi/2
[run]
checks = bounds
)").find("descending") != std::string::npos);
  CHECK(error_of(R"([lattice]
extents = 2x2
[field]
B = 0.1, 0
[wavepacket]
p = pi/2
[run]
checks = bounds
)").find("positive") != std::string::npos);
  CHECK(error_of(R"([lattice]
extents = 2x2
[field]
B = 0.1
[wavepacket]
p = pi/2
kappa = 1.0
[run]
checks = bounds
)").find("kappa") != std::string::npos);
  CHECK(error_of(R"([lattice]
extents = 3x2
[field]
B = 0.1
[wavepacket]
p = pi/2
[run]
checks = bounds
)").find("[lattice] extents") != std::string::npos);
  CHECK(error_of(with("[filter]\nepsilon = 2\ngamma = 3\ndelta_gamma = 0.5\n")).find("[filter]") !=
        std::string::npos);
}

TEST_CASE("empty check groups are rejected") {
  const auto msg = error_of(R"([lattice]
extents = 2x2
[field]
B = 0.1
[wavepacket]
p = pi/2
[run]
checks =
)");
  CHECK(msg.find("[run] checks") != std::string::npos);
  CHECK(error_of(with("[run]\nchecks = bounds, spectra\n")).find("spectra") != std::string::npos);
}

TEST_CASE("unknown keys and sections name the culprit") {
  CHECK(error_of(with("[tolerances]\nlanczso = 1e-10\n")) == "unknown key [tolerances] lanczso");
  CHECK(error_of(with("[extras]\nx = 1\n")) == "unknown section [extras]");
  CHECK(error_of("[lattice\nextents = 2x2\n").find("config line 1") != std::string::npos);
  CHECK(error_of(R"([lattice]
extents = 2x2
[field]
B = 0.1, abc
[wavepacket]
p = pi/2
[run]
checks = bounds
)").find("[field] B") != std::string::npos);
}

TEST_CASE("canonical form ignores run plumbing") {
  const auto a = parse_config_text(with(""));
  const auto b = parse_config_text(with("[run]\nchecks = bounds\noutput_dir = elsewhere\njobs = 4\ncache_dir = /tmp/x\n"));
  CHECK(a.hash() == b.hash());
  const auto c = parse_config_text(with("[filter]\ngamma = 9\n"));
  CHECK(a.hash() != c.hash());
  CHECK(a.canonical().find("gamma") != std::string::npos);
}

TEST_CASE("worker pool runs every task and honours fail-fast") {
  std::vector<int> hit(50, 0);
  run_pool(hit.size(), 4, [&](std::size_t i) { hit[i] += 1; return true; }, false);
  for (int h : hit) CHECK(h == 1);
  std::atomic<int> ran{0};
  run_pool(50, 1, [&](std::size_t i) { ++ran; return i != 3; }, true);
  CHECK(ran.load() == 4);
}
