#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <stdexcept>
#include <string>

#include <Eigen/Dense>

#include "ngdisp/lattice.hpp"
#include "ngdisp/sparse_operator.hpp"

namespace ngdisp {

struct LanczosOptions {
  /// Absolute residual target for ||H phi - E0 phi||.
  double tol = 1e-10;
  int max_matvecs = 20000;
  /// Largest basis kept before a thick restart.
  int krylov_dim = 80;
  /// Ritz pairs retained across a restart.
  int keep = 6;
  std::uint64_t seed = 20240611;
  /// Gap estimates below this at B = 0 are reported as a degenerate ground state.
  double degeneracy_threshold = 1e-8;
};

struct GroundState {
  double E0 = 0.0;
  Vector phi0;
  /// Lowest Ritz value on the complement of phi0 minus E0; advisory only.
  double gap = 0.0;
  bool gap_is_estimate = true;
  double B = 0.0;
  double residual = 0.0;
  int matvecs = 0;
  bool degenerate_warning = false;
  std::string lattice_id;
};

class ConvergenceError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Thick-restart Lanczos with full reorthogonalization.
GroundState ground_state(const SparseOperator& H, const LanczosOptions& opts = {});
GroundState ground_state(const SparseOperator& H, const Lattice& lattice, double B,
                         const LanczosOptions& opts = {});

/// Extremal Ritz estimates (lowest, highest) with their residual norms.
struct ExtremalEstimate {
  double lowest = 0.0;
  double highest = 0.0;
  double lowest_residual = 0.0;
  double highest_residual = 0.0;
};
ExtremalEstimate extremal_eigenvalues(const SparseOperator& H, int steps = 60,
                                      std::uint64_t seed = 7);

struct SpectralDecomposition {
  Eigen::VectorXd values;
  DenseMatrix vectors;
  Eigen::Index dim() const { return values.size(); }
};

class DenseCapError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

inline constexpr std::uint64_t kDefaultDenseCap = 4096;

/// Full eigensystem with ascending eigenvalues. Real operators go through the
/// real symmetric solver.
SpectralDecomposition dense_spectrum(const SparseOperator& H, std::uint64_t dense_cap = kDefaultDenseCap);
SpectralDecomposition dense_spectrum(const DenseMatrix& H, std::uint64_t dense_cap = kDefaultDenseCap);

/// Ground state read off a dense decomposition, in GroundState form.
GroundState ground_state_from_spectrum(const SpectralDecomposition& spec, const SparseOperator& H,
                                       double B = 0.0);

struct SolveOptions {
  /// Relative residual target against ||(1 - P0) rhs||.
  double tol = 1e-10;
  int max_iterations = 5000;
};

class SolverBreakdown : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

struct SolveResult {
  Vector x;
  double relative_residual = 0.0;
  int iterations = 0;
};

/// Solves (H - E0) x = (1 - P0) rhs with x orthogonal to phi0, by conjugate
/// gradients on the deflated operator. Throws SolverBreakdown instead of
/// returning an unconverged answer.
SolveResult deflated_solve(const SparseOperator& H, const GroundState& gs, const Vector& rhs,
                           const SolveOptions& opts = {});

/// On-disk ground state:
///   magic "NGGS", u32 version, u64 lattice hash, u32 ndim, ndim x i32 extents,
///   i32 two_s, f64 B, f64 tol, f64 E0, f64 gap, u64 dim, dim x (f64 re, f64 im).
inline constexpr std::uint32_t kGroundStateFormatVersion = 1;

struct CachedGroundState {
  LatticeSpec spec;
  double B = 0.0;
  double tol = 0.0;
  GroundState gs;
};

void save_ground_state(const std::filesystem::path& path, const LatticeSpec& spec, double tol,
                       const GroundState& gs);
CachedGroundState load_ground_state(const std::filesystem::path& path);

/// Directory of cached ground states keyed by (lattice hash, B, tol).
class GroundStateCache {
 public:
  explicit GroundStateCache(std::filesystem::path dir);

  const std::filesystem::path& dir() const { return dir_; }
  std::filesystem::path path_for(const LatticeSpec& spec, double B, double tol) const;

  /// Returns a cached state whose residual is re-verified against H, or
  /// computes, stores and returns a fresh one. Access is serialized per key.
  GroundState get_or_compute(const Lattice& lattice, const SparseOperator& H, double B,
                             const LanczosOptions& opts);

 private:
  std::mutex& key_mutex(const std::string& key);

  std::filesystem::path dir_;
  std::mutex map_mutex_;
  std::map<std::string, std::unique_ptr<std::mutex>> key_mutexes_;
};

struct CacheEntryReport {
  std::filesystem::path path;
  bool valid = false;
  bool evicted = false;
  double residual = 0.0;
  std::string message;
};

/// Recomputes residuals of every cached state; invalid entries are deleted.
std::vector<CacheEntryReport> verify_cache(const std::filesystem::path& dir);

}  // namespace ngdisp
