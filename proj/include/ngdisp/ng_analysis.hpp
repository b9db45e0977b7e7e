#pragma once

#include <cmath>
#include <limits>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <string>
#include <vector>

#include "ngdisp/eigensolver.hpp"
#include "ngdisp/filters.hpp"
#include "ngdisp/lattice.hpp"
#include "ngdisp/spin_model.hpp"

namespace ngdisp {

/// Tolerances for the two classes of comparison.
inline constexpr double kAlgebraicTol = 1e-10;
inline constexpr double kResolventTol = 1e-8;

enum class BoundKind { upper, equality };

/// One inequality (lhs <= rhs) or identity (lhs == rhs) with its margin.
struct BoundEntry {
  std::string name;
  double lhs = 0.0;
  double rhs = 0.0;
  /// rhs - lhs
  double margin = 0.0;
  double tolerance = 0.0;
  BoundKind kind = BoundKind::upper;
  bool pass = false;
  /// Solver failure: never counted as a pass.
  bool inconclusive = false;
  std::string note;
};

BoundEntry upper_bound_entry(std::string name, double lhs, double rhs, double tol, std::string note = {});
BoundEntry equality_entry(std::string name, double lhs, double rhs, double tol, std::string note = {});
BoundEntry inconclusive_entry(std::string name, double rhs, std::string note);

/// p: the wavepacket built from Ŝ_k^(2); q: from Ŝ_{k+Q}^(2).
enum class Mode { p, q };
const char* mode_name(Mode m);

struct BoundReport {
  std::string lattice_id;
  double B = 0.0;
  Mode mode = Mode::p;
  Momentum k;
  std::vector<double> k_values;
  std::vector<BoundEntry> entries;
  bool all_pass() const;
};

enum class Backend { chebyshev, dense };
const char* backend_name(Backend b);

struct FilteredMoments {
  double num = 0.0;
  double den = 0.0;
  /// Largest imaginary part seen in either moment.
  double imag = 0.0;
  Backend backend = Backend::dense;
  int degree = 0;
};

struct SystemOptions {
  LanczosOptions lanczos;
  SolveOptions solve;
  ChebyshevOptions chebyshev;
  std::uint64_t dense_cap = kDefaultDenseCap;
  /// Build the dense oracle whenever the dimension is within the cap.
  bool use_dense = true;
  GroundStateCache* cache = nullptr;
  /// Columns per Chebyshev block.
  int block_size = 8;
};

/// Hamiltonian, ground state and (for small dimensions) the dense oracle for
/// one (lattice, B) pair. Immutable after construction apart from internal
/// memoization, which is thread-safe.
class System {
 public:
  System(const Lattice& lattice, double B, SystemOptions opts = {});

  const Lattice& lattice() const { return lattice_; }
  double B() const { return B_; }
  double S() const { return lattice_.spin(); }
  const SparseOperator& H() const { return H_; }
  const GroundState& gs() const { return gs_; }
  const SystemOptions& options() const { return opts_; }
  bool has_dense() const { return dense_ != nullptr; }
  const SpectralDecomposition& dense() const;
  double m_B() const { return m_B_; }
  double m_B_imag() const { return m_B_imag_; }
  const SpectralInterval& interval() const;

  /// Ŝ_k^(axis) phi0, memoized.
  const Vector& spin_state(const Momentum& k, SpinAxis axis) const;
  /// Eigenbasis coefficients V† Ŝ_k^(axis) phi0 (dense oracle only), memoized.
  const Vector& spectral_coefficients(const Momentum& k, SpinAxis axis) const;
  /// E_n - E0 for the dense eigenvalues.
  Eigen::VectorXd excitation_energies() const;

  /// 4S^2 ℰ_q + B S
  double double_commutator_bound(const Momentum& q) const;
  /// Filtered moments for each q, memoized per (filter, backend, q); missing
  /// Chebyshev entries are computed in blocks.
  std::vector<FilteredMoments> moments(const EnergyFilter& g, const std::vector<Momentum>& qs,
                                       Backend backend) const;
  double dispersion(const Momentum& q) const;

 private:
  Lattice lattice_;
  double B_;
  SystemOptions opts_;
  SparseOperator H_;
  GroundState gs_;
  std::unique_ptr<SpectralDecomposition> dense_;
  double m_B_ = 0.0;
  double m_B_imag_ = 0.0;
  mutable std::once_flag interval_once_;
  mutable SpectralInterval interval_;
  mutable std::mutex memo_mutex_;
  mutable std::map<std::pair<std::vector<int>, int>, std::unique_ptr<Vector>> states_;
  mutable std::map<std::pair<std::vector<int>, int>, std::unique_ptr<Vector>> coeffs_;
  mutable std::map<std::string, FilteredMoments> moments_;
};

/// (1/N) sum_x σ(x) <phi0, S_x^(1) phi0>; `imag` receives the imaginary part.
double staggered_magnetization(const Lattice& lattice, const GroundState& gs, double* imag = nullptr);

/// Momentum of the filtered operator: k (p-mode) or k + Q (q-mode).
Momentum filtered_momentum(const Lattice& lattice, const Momentum& k, Mode mode);

/// -i <[Ŝ^(2)_{-q}, Ŝ^(3)_{q+Q}]> against m_B, q = filtered_momentum(k, mode).
BoundEntry sum_rule_check(const System& sys, const Momentum& k, Mode mode = Mode::p);

/// <[Ŝ_{-q}, [H, Ŝ_q]]> <= 4S^2 ℰ_q + BS for axis 2 or 3.
BoundEntry double_commutator(const System& sys, const Momentum& q, SpinAxis axis);

/// <Ŝ_{-q} (1-P0)/(H-E0) Ŝ_q> <= 1/(2 ℰ_{q+Q}). Adds an "irb.oracle"
/// comparison against the dense spectral sum when the oracle exists.
std::vector<BoundEntry> irb_susceptibility(const System& sys, const Momentum& q, SpinAxis axis);

/// w = ĝ(H-E0) Ŝ_q^(2) phi0; num = <w, (H-E0) w>, den = <w, w>, per momentum.
std::vector<FilteredMoments> filtered_moments(const System& sys, const EnergyFilter& g,
                                              const std::vector<Momentum>& qs, Backend backend);

struct EpsilonChoice {
  double v_min = 0.0;
  double epsilon = 0.0;
  /// min over the annulus of m_B sqrt(ℰ_{k+Q} ℰ_k) / (2|p|)
  double v_star = 0.0;
  double factor = 0.0;
};

inline const std::vector<double> kDefaultVminLadder = {0.5, 0.25, 0.1, 0.05, 0.025};

/// Largest ladder entry (as a multiple of v_star) keeping m_B/2 - v|p|/sqrt(ℰ_{k+Q} ℰ_k) > 0
/// on every grid momentum of the annulus. Throws std::domain_error when none works.
EpsilonChoice choose_epsilon(double m_B, double p, const Lattice& lattice,
                             const std::vector<double>& ladder = kDefaultVminLadder);

/// D(k, B) for the filtered momentum q (generic form covering both modes).
double denominator_bound_value(const System& sys, const Momentum& q, double v_min, double p,
                               const FilterSpec& filter);

/// D <= den_k, plus (dense oracle only) every intermediate inequality of the
/// low/high energy window split.
std::vector<BoundEntry> denominator_lower_bound(const System& sys, const Momentum& k, Mode mode,
                                                const FilterSpec& filter, double v_min, double p,
                                                double den_k);

struct KTerm {
  Momentum k;
  std::vector<double> k_values;
  double fhat = 0.0;
  double E_k = 0.0;
  double E_kQ = 0.0;
  double num_k = 0.0;
  double den_k = 0.0;
  double D_k = std::numeric_limits<double>::quiet_NaN();
};

struct DispersionRecord {
  std::string lattice_id;
  double B = 0.0;
  double p = 0.0;
  double kappa = 0.0;
  Mode mode = Mode::p;
  FilterSpec filter;
  Backend backend = Backend::dense;
  int chebyshev_degree = 0;
  double numerator = 0.0;
  double denominator = 0.0;
  double delta_e = std::numeric_limits<double>::quiet_NaN();
  double numerator_bound = 0.0;
  double epsilon = 0.0;
  double v_min = 0.0;
  double v_star = 0.0;
  double c0 = std::numeric_limits<double>::quiet_NaN();
  double v_max = std::numeric_limits<double>::quiet_NaN();
  double m_B = 0.0;
  double m_s_estimate = std::numeric_limits<double>::quiet_NaN();
  /// Largest |cross-momentum matrix element|; NaN when not measured.
  double max_cross_term = std::numeric_limits<double>::quiet_NaN();
  std::vector<KTerm> terms;
  std::vector<BoundEntry> checks;
  bool all_pass() const;
};

/// Full wavepacket pipeline for one mode.
DispersionRecord excitation_energy(const System& sys, const WavepacketSpec& wavepacket, const FilterSpec& filter,
                                   const EpsilonChoice& eps, Mode mode, Backend backend);

DispersionRecord q_mode_analysis(const System& sys, const WavepacketSpec& wavepacket, const FilterSpec& filter,
                                 const EpsilonChoice& eps, Backend backend);

struct BoundsSuiteOptions {
  /// gamma and delta_gamma of the window chain; epsilon comes from choose_epsilon at p = |k|.
  double gamma = 3.0;
  double delta_gamma = 0.5;
  std::vector<double> vmin_ladder = kDefaultVminLadder;
  /// Dense moments whenever the oracle exists.
  bool prefer_dense = true;
};

/// Every BoundReport for every grid k, p-mode and q-mode, in grid order.
std::vector<BoundReport> run_bounds_suite(const System& sys, const BoundsSuiteOptions& opts = {});

struct MsEstimate {
  double intercept = 0.0;
  std::vector<double> coefficients;
  std::vector<double> residuals;
  double rms_residual = 0.0;
  int degree = 1;
  std::string label = "estimate - finite-size, not the double limit";
};

/// Least-squares polynomial in B; the B = 0 intercept is the estimate.
MsEstimate extrapolate_ms(const std::vector<double>& B, const std::vector<double>& m, int degree = 1);

}  // namespace ngdisp
