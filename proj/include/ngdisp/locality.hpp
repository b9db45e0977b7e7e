#pragma once

#include <vector>

#include "ngdisp/eigensolver.hpp"
#include "ngdisp/filters.hpp"
#include "ngdisp/lattice.hpp"
#include "ngdisp/spin_model.hpp"

namespace ngdisp {

using DenseOperator = DenseMatrix;

/// Eigensystem of H_{0,B} on a tiny torus; everything in this module is
/// realized spectrally on top of it.
struct DenseEvolution {
  Lattice lattice;
  double B = 0.0;
  SpectralDecomposition spec;
};

DenseEvolution make_dense_evolution(const Lattice& lattice, double B, std::uint64_t dense_cap = kDefaultDenseCap);

DenseOperator site_operator(const Lattice& lattice, int site, SpinAxis axis);
/// sum_x σ(x) S_x^(1)
DenseOperator staggered_operator(const Lattice& lattice);

/// Largest singular value, from the Hermitian dilation [[0, A], [A†, 0]].
double op_norm(const DenseOperator& a);

/// e^{iHt} a e^{-iHt}
DenseOperator heisenberg_evolve(const SpectralDecomposition& spec, const DenseOperator& a, double t);

/// Eigenbasis elements <v_m, a v_n> scaled by ĝ(E_m - E_n).
DenseOperator tau_g_star(const SpectralDecomposition& spec, const EnergyFilter& g, const DenseOperator& a);

/// ||τ*g(a) phi0 - ĝ(H - E0) a phi0|| with phi0 the lowest eigenvector.
double tau_identity_error(const SpectralDecomposition& spec, const EnergyFilter& g, const DenseOperator& a);

/// X_m(x) = {y : |x - y| <= m}, minimum-image distance, sorted.
std::vector<int> ball(const Lattice& lattice, int x, double m);

/// Normalized partial trace over the complement of X, tensored with the identity there.
DenseOperator local_approximation(const Lattice& lattice, const DenseOperator& b, const std::vector<int>& X);

struct DecaySample {
  double t = 0.0;
  /// distance, m or B depending on the profile
  double x = 0.0;
  double norm = 0.0;
  double envelope = 0.0;
};

/// norm <= amplitude * exp(velocity t - rate x), least squares on log norms
/// above the floor, amplitude then raised until the envelope dominates.
struct DecayFit {
  std::vector<DecaySample> samples;
  double amplitude = 0.0;
  double rate = 0.0;
  double velocity = 0.0;
  /// rms of the log residuals before the shift
  double residual = 0.0;
  int used = 0;
  bool rate_positive = false;
  bool degenerate = false;
  bool dominates = false;
};

inline constexpr double kNormFloor = 1e-12;

DecayFit fit_decay(std::vector<DecaySample> samples, bool fit_time);

struct DeltaDecomposition {
  std::vector<DenseOperator> deltas;
  std::vector<double> norms;
  std::vector<std::size_t> ball_sizes;
  /// ||τ*g(a) - sum_{m <= M} Δ_m|| for each M
  std::vector<double> remainders;
  double reconstruction_error = 0.0;
  DecayFit fit;
};

DeltaDecomposition delta_decomposition(const DenseEvolution& ev, const DenseOperator& a_x, int x,
                                       const EnergyFilter& g, int m_max);

struct LrProfile {
  std::vector<double> times;
  /// distinct distances, ascending
  std::vector<double> distances;
  /// [t][distance group] largest commutator norm
  std::vector<std::vector<double>> max_norms;
  /// [t][m] ||Π_{X_m}(τ_t(a_x)) - τ_t(a_x)||
  std::vector<std::vector<double>> pi_errors;
  DecayFit fit;
  /// Nonincreasing across shells (ties allowed) and farthest below nearest.
  bool decreasing_at(std::size_t t_index) const;
  bool pi_monotone_at(std::size_t t_index) const;
};

LrProfile lr_commutator_profile(const DenseEvolution& ev, int x, SpinAxis a_axis, SpinAxis b_axis,
                                const std::vector<double>& t_grid);

struct ContinuityProfile {
  std::vector<double> B;
  /// ||τ*g,B(a) - τ*g,0(a)|| / B
  std::vector<double> r;
  double ratio = 0.0;
  double factor = 4.0;
  /// max r, the fitted continuity constant
  double constant = 0.0;
  bool pass = false;
};

ContinuityProfile b_continuity(const Lattice& lattice, const DenseOperator& a_x, const EnergyFilter& g,
                               const std::vector<double>& ladder, double factor = 4.0,
                               std::uint64_t dense_cap = kDefaultDenseCap);

}  // namespace ngdisp
