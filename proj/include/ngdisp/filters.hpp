#pragma once

#include <functional>
#include <string>
#include <vector>

#include "ngdisp/eigensolver.hpp"
#include "ngdisp/lattice.hpp"
#include "ngdisp/sparse_operator.hpp"

namespace ngdisp {

/// 0 for s <= 0, 1 for s >= 1, psi(s)/(psi(s)+psi(1-s)) with psi(s) = exp(-1/s) between.
double smoothstep(double s);

struct FilterSpec {
  double epsilon = 0.0;
  double gamma = 0.0;
  double delta_gamma = 0.0;

  /// Throws std::invalid_argument unless 0 < eps, Dgamma > 0 and 2 eps < gamma - Dgamma.
  void validate() const;
  std::string str() const;
};

/// ĝ(E) = σ((E-ε)/ε)·σ((γ-E)/Δγ): zero outside (ε, γ), one on [2ε, γ-Δγ].
class EnergyFilter {
 public:
  explicit EnergyFilter(FilterSpec spec);
  double operator()(double E) const;
  const FilterSpec& spec() const { return spec_; }

 private:
  FilterSpec spec_;
};

EnergyFilter build_g(const FilterSpec& spec);

struct WavepacketSpec {
  double p = 0.0;
  double kappa = 0.0;
  void validate() const;
};

/// One on the closed annulus |p|/2 <= |k| <= |p|, falling smoothly to zero over
/// a width |p|/8 outside it: σ((|k| - |p|/2)/w + 1)·σ((|p| - |k|)/w + 1), w = |p|/8.
double annulus_profile(double k_magnitude, double p);

/// f̂ on the momentum grid, in grid order. Throws if no grid point gets weight.
std::vector<double> build_f(const WavepacketSpec& spec, const Lattice& lattice);

/// Grid momenta where f̂ > 0.
std::vector<Momentum> annulus_momenta(const Lattice& lattice, double p);

using SpectralFunction = std::function<double(double)>;

struct SpectralInterval {
  double lo = 0.0;
  double hi = 0.0;
};

/// Lanczos extremal Ritz values widened by their residuals and then by
/// `inflate` times the width on each side.
SpectralInterval estimate_spectral_interval(const SparseOperator& H, double inflate = 0.05,
                                            int steps = 80);

struct ChebyshevOptions {
  /// Uniform truncation error target for the expansion of fn.
  double tol = 1e-10;
  int max_degree = 40000;
};

class ToleranceUnreachable : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Chebyshev series of fn(E - E0) on [lo, hi].
struct ChebyshevExpansion {
  SpectralInterval interval;
  double shift = 0.0;
  std::vector<double> coeffs;
  /// Sum of |c_j| beyond the retained degree (uniform error bound).
  double tail = 0.0;
  int degree() const { return static_cast<int>(coeffs.size()) - 1; }
  double evaluate(double E) const;
};

ChebyshevExpansion chebyshev_expand(const SpectralFunction& fn, const SpectralInterval& interval,
                                    double shift, const ChebyshevOptions& opts);

/// w ≈ fn(H - E0) v for each column of v.
Block apply_expansion(const SparseOperator& H, const ChebyshevExpansion& expansion, const Block& v);

/// Chebyshev path with the given spectral interval.
Vector apply_filter(const SparseOperator& H, const GroundState& gs, const SpectralFunction& fn,
                    const Vector& v, const SpectralInterval& interval, const ChebyshevOptions& opts);

/// Exact path through a dense eigensystem: V fn(D - E0) V† v.
Vector apply_filter_dense(const SpectralDecomposition& spec, double E0, const SpectralFunction& fn,
                          const Vector& v);

/// Sampled (argument, value) table for plotting.
std::vector<std::pair<double, double>> sample_function(const SpectralFunction& fn, double lo, double hi,
                                                       int count);

}  // namespace ngdisp
