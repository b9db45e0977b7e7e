#pragma once

#include <cstdint>
#include <optional>
#include <set>
#include <stdexcept>
#include <string>
#include <vector>

#include "ngdisp/lattice.hpp"

namespace ngdisp {

/// Raised for malformed or inconsistent configuration; the message names the
/// line or the section.key at fault.
class ConfigError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// "0.5", "pi", "pi/2", "3*pi/4", "-1e-3"
double parse_real(const std::string& text);

enum class BackendChoice { automatic, dense, chebyshev };

struct ScanConfig {
  std::vector<std::vector<int>> lattices;
  SpinMagnitude spin{1};
  /// strictly positive, descending
  std::vector<double> B;
  std::vector<double> p;
  double kappa = 0.0;

  /// nullopt means "auto" (choose_epsilon)
  std::optional<double> epsilon;
  double gamma = 10.0;
  double delta_gamma = 2.0;
  BackendChoice backend = BackendChoice::automatic;
  std::vector<double> vmin_ladder = {0.5, 0.25, 0.1, 0.05, 0.025};

  double bounds_gamma = 3.0;
  double bounds_delta_gamma = 0.5;

  double lanczos_tol = 1e-10;
  double solve_tol = 1e-10;
  double chebyshev_tol = 1e-10;
  int chebyshev_max_degree = 40000;

  int locality_site = 0;
  int locality_axis = 2;
  std::vector<double> locality_times = {0.25, 0.5, 1.0};
  std::vector<double> continuity_ladder = {0.2, 0.1, 0.05};
  double continuity_factor = 4.0;
  double locality_epsilon = 0.25;
  double locality_gamma = 3.0;
  double locality_delta_gamma = 0.5;
  int locality_m_max = 4;
  std::uint64_t locality_max_dim = 256;
  double locality_B = 0.1;

  std::uint64_t dense_cap = 4096;
  std::string cache_dir = "cache";
  std::string output_dir = "out";
  std::set<std::string> checks;
  int jobs = 1;
  std::uint64_t seed = 20240611;

  /// test hook: every entry with this name gets its lhs inflated
  std::string corrupt_entry;

  bool enabled(const std::string& group) const { return checks.count(group) != 0; }
  /// Throws ConfigError on violated invariants.
  void validate() const;
  /// Canonical key = value listing of everything that affects results.
  std::string canonical() const;
  /// 16 hex digits over canonical().
  std::string hash() const;
};

ScanConfig parse_config_text(const std::string& text);
ScanConfig load_config(const std::string& path);

inline const std::vector<std::string> kCheckGroups = {"bounds", "dispersion", "qmode", "locality"};

}  // namespace ngdisp
