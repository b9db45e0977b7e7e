#include "ngdisp/filters.hpp"

#include <cmath>
#include <mutex>
#include <numbers>
#include <sstream>
#include <stdexcept>

#include <fftw3.h>

namespace ngdisp {

double smoothstep(double s) {
  if (s <= 0.0) return 0.0;
  if (s >= 1.0) return 1.0;
  const double a = std::exp(-1.0 / s);
  const double b = std::exp(-1.0 / (1.0 - s));
  return a / (a + b);
}

void FilterSpec::validate() const {
  if (!(epsilon > 0.0)) throw std::invalid_argument("filter epsilon must be positive");
  if (!(delta_gamma > 0.0)) throw std::invalid_argument("filter delta_gamma must be positive");
  if (!(2.0 * epsilon < gamma - delta_gamma))
    throw std::invalid_argument("filter needs 2*epsilon < gamma - delta_gamma (got " + str() + ")");
}

std::string FilterSpec::str() const {
  std::ostringstream os;
  os.precision(17);
  os << "epsilon=" << epsilon << " gamma=" << gamma << " delta_gamma=" << delta_gamma;
  return os.str();
}

EnergyFilter::EnergyFilter(FilterSpec spec) : spec_(spec) { spec_.validate(); }

double EnergyFilter::operator()(double E) const {
  const double lower = smoothstep((E - spec_.epsilon) / spec_.epsilon);
  if (lower == 0.0) return 0.0;
  return lower * smoothstep((spec_.gamma - E) / spec_.delta_gamma);
}

EnergyFilter build_g(const FilterSpec& spec) { return EnergyFilter(spec); }

void WavepacketSpec::validate() const {
  if (!(p > 0.0)) throw std::invalid_argument("wavepacket |p| must be positive");
  if (!(p < kappa)) throw std::invalid_argument("wavepacket needs |p| < kappa");
}

double annulus_profile(double k_magnitude, double p) {
  const double w = p / 8.0;
  return smoothstep((k_magnitude - 0.5 * p) / w + 1.0) * smoothstep((p - k_magnitude) / w + 1.0);
}

std::vector<double> build_f(const WavepacketSpec& spec, const Lattice& lattice) {
  spec.validate();
  std::vector<double> f;
  f.reserve(lattice.momentum_grid().size());
  bool any = false;
  for (const auto& k : lattice.momentum_grid()) {
    const double v = annulus_profile(lattice.magnitude(k), spec.p);
    any = any || v > 0.0;
    f.push_back(v);
  }
  if (!any) throw std::invalid_argument("wavepacket annulus holds no grid momentum on " + lattice.spec().id());
  return f;
}

std::vector<Momentum> annulus_momenta(const Lattice& lattice, double p) {
  std::vector<Momentum> out;
  for (const auto& k : lattice.momentum_grid())
    if (annulus_profile(lattice.magnitude(k), p) > 0.0) out.push_back(k);
  return out;
}

SpectralInterval estimate_spectral_interval(const SparseOperator& H, double inflate, int steps) {
  const auto e = extremal_eigenvalues(H, steps);
  double lo = e.lowest - e.lowest_residual;
  double hi = e.highest + e.highest_residual;
  const double width = std::max(hi - lo, 1e-12);
  lo -= inflate * width;
  hi += inflate * width;
  return {lo, hi};
}

double ChebyshevExpansion::evaluate(double E) const {
  const double c = 0.5 * (interval.hi + interval.lo);
  const double h = 0.5 * (interval.hi - interval.lo);
  const double t = (E - c) / h;
  double b1 = 0.0, b2 = 0.0;
  for (int j = degree(); j >= 1; --j) {
    const double b0 = coeffs[j] + 2.0 * t * b1 - b2;
    b2 = b1;
    b1 = b0;
  }
  return 0.5 * coeffs[0] + t * b1 - b2;
}

namespace {

std::mutex& fftw_planner_mutex() {
  static std::mutex m;
  return m;
}

// c_j = (2/M) sum_l f(cos θ_l) cos(j θ_l), θ_l = π(l + 1/2)/M, via an FFTW DCT-II.
std::vector<double> chebyshev_coefficients(const SpectralFunction& fn, double c, double h, double shift,
                                           int M) {
  std::vector<double> samples(static_cast<std::size_t>(M)), out(static_cast<std::size_t>(M));
  for (int l = 0; l < M; ++l) {
    const double theta = std::numbers::pi * (l + 0.5) / M;
    samples[static_cast<std::size_t>(l)] = fn(c + h * std::cos(theta) - shift);
  }
  fftw_plan plan;
  {
    std::lock_guard lock(fftw_planner_mutex());
    plan = fftw_plan_r2r_1d(M, samples.data(), out.data(), FFTW_REDFT10, FFTW_ESTIMATE);
  }
  fftw_execute(plan);
  {
    std::lock_guard lock(fftw_planner_mutex());
    fftw_destroy_plan(plan);
  }
  for (auto& v : out) v /= M;
  return out;
}

}  // namespace

ChebyshevExpansion chebyshev_expand(const SpectralFunction& fn, const SpectralInterval& interval,
                                    double shift, const ChebyshevOptions& opts) {
  if (!(interval.hi > interval.lo)) throw std::invalid_argument("empty spectral interval");
  const double c = 0.5 * (interval.hi + interval.lo);
  const double h = 0.5 * (interval.hi - interval.lo);
  int M = 64;
  while (M < 4 * std::max(opts.max_degree, 16)) M *= 2;
  const auto all = chebyshev_coefficients(fn, c, h, shift, M);
  // tail[j] = sum_{i >= j} |c_i|, computed from the back
  // only the lower half is trusted; the rest is dominated by aliasing and rounding
  const std::size_t trusted = all.size() / 2;
  std::vector<double> tail(trusted + 1, 0.0);
  for (std::size_t j = trusted; j-- > 0;) tail[j] = tail[j + 1] + std::abs(all[j]);
  int degree = -1;
  for (int n = 0; n <= opts.max_degree; ++n) {
    if (tail[static_cast<std::size_t>(n) + 1] <= opts.tol) {
      degree = n;
      break;
    }
  }
  if (degree < 0) {
    std::ostringstream os;
    os << "Chebyshev tolerance " << opts.tol << " unreachable at degree " << opts.max_degree
       << " (tail " << tail[static_cast<std::size_t>(opts.max_degree) + 1] << ")";
    throw ToleranceUnreachable(os.str());
  }
  ChebyshevExpansion e;
  e.interval = interval;
  e.shift = shift;
  e.coeffs.assign(all.begin(), all.begin() + degree + 1);
  e.tail = tail[static_cast<std::size_t>(degree) + 1];
  return e;
}

Block apply_expansion(const SparseOperator& H, const ChebyshevExpansion& expansion, const Block& v) {
  const double c = 0.5 * (expansion.interval.hi + expansion.interval.lo);
  const double h = 0.5 * (expansion.interval.hi - expansion.interval.lo);
  const auto& coeffs = expansion.coeffs;
  Block w = (0.5 * coeffs[0]) * v;
  if (expansion.degree() == 0) return w;
  // t_{j+1} = 2 X t_j - t_{j-1} with X = (H - c)/h
  Block t_prev = v;
  Block t_cur, t_next, hv;
  H.apply_block(v, hv);
  t_cur = (hv - c * v) / h;
  w += coeffs[1] * t_cur;
  for (int j = 2; j <= expansion.degree(); ++j) {
    H.apply_block(t_cur, hv);
    t_next = (2.0 / h) * (hv - c * t_cur) - t_prev;
    w += coeffs[static_cast<std::size_t>(j)] * t_next;
    std::swap(t_prev, t_cur);
    std::swap(t_cur, t_next);
  }
  return w;
}

Vector apply_filter(const SparseOperator& H, const GroundState& gs, const SpectralFunction& fn,
                    const Vector& v, const SpectralInterval& interval, const ChebyshevOptions& opts) {
  const auto e = chebyshev_expand(fn, interval, gs.E0, opts);
  Block b(v.size(), 1);
  b.col(0) = v;
  const Block w = apply_expansion(H, e, b);
  return w.col(0);
}

Vector apply_filter_dense(const SpectralDecomposition& spec, double E0, const SpectralFunction& fn,
                          const Vector& v) {
  Vector coeff = spec.vectors.adjoint() * v;
  for (Eigen::Index n = 0; n < coeff.size(); ++n) coeff[n] *= fn(spec.values[n] - E0);
  return spec.vectors * coeff;
}

std::vector<std::pair<double, double>> sample_function(const SpectralFunction& fn, double lo, double hi,
                                                       int count) {
  std::vector<std::pair<double, double>> out;
  out.reserve(static_cast<std::size_t>(count));
  for (int i = 0; i < count; ++i) {
    const double x = count > 1 ? lo + (hi - lo) * i / (count - 1) : lo;
    out.emplace_back(x, fn(x));
  }
  return out;
}

}  // namespace ngdisp
