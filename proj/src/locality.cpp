#include "ngdisp/locality.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

#include <Eigen/Eigenvalues>

namespace ngdisp {

namespace {

void check_cap(std::uint64_t dim, std::uint64_t cap) {
  if (dim > cap)
    throw DenseCapError("dimension " + std::to_string(dim) + " exceeds dense cap " + std::to_string(cap));
}

DenseOperator to_eigenbasis(const SpectralDecomposition& spec, const DenseOperator& a) {
  return spec.vectors.adjoint() * a * spec.vectors;
}

DenseOperator from_eigenbasis(const SpectralDecomposition& spec, const DenseOperator& a) {
  return spec.vectors * a * spec.vectors.adjoint();
}

// groups distances equal up to rounding
bool same_distance(double a, double b) { return std::abs(a - b) <= 1e-9; }

}  // namespace

DenseEvolution make_dense_evolution(const Lattice& lattice, double B, std::uint64_t dense_cap) {
  check_cap(lattice.hilbert_dim(), dense_cap);
  return DenseEvolution{lattice, B, dense_spectrum(build_hamiltonian(lattice, B), dense_cap)};
}

DenseOperator site_operator(const Lattice& lattice, int site, SpinAxis axis) {
  return site_spin(lattice, site, axis).to_dense();
}

DenseOperator staggered_operator(const Lattice& lattice) { return staggered_field_operator(lattice).to_dense(); }

double op_norm(const DenseOperator& a) {
  if (a.size() == 0) return 0.0;
  if (a.rows() == a.cols() && a == a.adjoint()) {
    Eigen::SelfAdjointEigenSolver<DenseOperator> es(a, Eigen::EigenvaluesOnly);
    return es.eigenvalues().cwiseAbs().maxCoeff();
  }
  const Eigen::Index r = a.rows(), c = a.cols();
  DenseOperator dil = DenseOperator::Zero(r + c, r + c);
  dil.topRightCorner(r, c) = a;
  dil.bottomLeftCorner(c, r) = a.adjoint();
  Eigen::SelfAdjointEigenSolver<DenseOperator> es(dil, Eigen::EigenvaluesOnly);
  return es.eigenvalues().cwiseAbs().maxCoeff();
}

DenseOperator heisenberg_evolve(const SpectralDecomposition& spec, const DenseOperator& a, double t) {
  if (t == 0.0) return a;
  DenseOperator e = to_eigenbasis(spec, a);
  const Eigen::Index n = e.rows();
  for (Eigen::Index j = 0; j < n; ++j)
    for (Eigen::Index i = 0; i < n; ++i)
      e(i, j) *= std::polar(1.0, (spec.values[i] - spec.values[j]) * t);
  return from_eigenbasis(spec, e);
}

DenseOperator tau_g_star(const SpectralDecomposition& spec, const EnergyFilter& g, const DenseOperator& a) {
  DenseOperator e = to_eigenbasis(spec, a);
  const Eigen::Index n = e.rows();
  for (Eigen::Index j = 0; j < n; ++j)
    for (Eigen::Index i = 0; i < n; ++i) e(i, j) *= g(spec.values[i] - spec.values[j]);
  return from_eigenbasis(spec, e);
}

double tau_identity_error(const SpectralDecomposition& spec, const EnergyFilter& g, const DenseOperator& a) {
  const Vector phi = spec.vectors.col(0);
  const Vector lhs = tau_g_star(spec, g, a) * phi;
  const Vector rhs = apply_filter_dense(spec, spec.values[0], [&g](double E) { return g(E); }, a * phi);
  return (lhs - rhs).norm();
}

std::vector<int> ball(const Lattice& lattice, int x, double m) {
  std::vector<int> out;
  for (int y = 0; y < static_cast<int>(lattice.num_sites()); ++y)
    if (lattice.distance(x, y) <= m + 1e-9) out.push_back(y);
  return out;
}

DenseOperator local_approximation(const Lattice& lattice, const DenseOperator& b, const std::vector<int>& X) {
  const SpinBasis basis(lattice);
  const auto dim = static_cast<Eigen::Index>(basis.dim());
  if (b.rows() != dim || b.cols() != dim) throw std::invalid_argument("operator size does not match the lattice");
  const int n = static_cast<int>(lattice.num_sites());
  const int ld = lattice.local_dim();
  std::vector<bool> inside(static_cast<std::size_t>(n), false);
  for (int x : X) {
    if (x < 0 || x >= n) throw std::out_of_range("site outside the lattice");
    inside[static_cast<std::size_t>(x)] = true;
  }
  // split every basis index into (inside digits, outside digits)
  std::vector<Eigen::Index> in_idx(static_cast<std::size_t>(dim)), out_idx(static_cast<std::size_t>(dim));
  Eigen::Index in_dim = 1, out_dim = 1;
  for (int s = 0; s < n; ++s) (inside[static_cast<std::size_t>(s)] ? in_dim : out_dim) *= ld;
  for (Eigen::Index st = 0; st < dim; ++st) {
    Eigen::Index ii = 0, oi = 0, iw = 1, ow = 1;
    for (int s = 0; s < n; ++s) {
      const int d = basis.digit(static_cast<std::uint64_t>(st), s);
      if (inside[static_cast<std::size_t>(s)]) {
        ii += d * iw;
        iw *= ld;
      } else {
        oi += d * ow;
        ow *= ld;
      }
    }
    in_idx[static_cast<std::size_t>(st)] = ii;
    out_idx[static_cast<std::size_t>(st)] = oi;
  }
  // full[e][i] = basis index with outside part e and inside part i
  std::vector<Eigen::Index> full(static_cast<std::size_t>(dim));
  for (Eigen::Index st = 0; st < dim; ++st)
    full[static_cast<std::size_t>(out_idx[static_cast<std::size_t>(st)] * in_dim +
                                  in_idx[static_cast<std::size_t>(st)])] = st;
  auto at = [&](Eigen::Index e, Eigen::Index i) { return full[static_cast<std::size_t>(e * in_dim + i)]; };

  DenseOperator reduced = DenseOperator::Zero(in_dim, in_dim);
  for (Eigen::Index e = 0; e < out_dim; ++e)
    for (Eigen::Index j = 0; j < in_dim; ++j)
      for (Eigen::Index i = 0; i < in_dim; ++i) reduced(i, j) += b(at(e, i), at(e, j));
  reduced /= static_cast<double>(out_dim);

  DenseOperator out = DenseOperator::Zero(dim, dim);
  for (Eigen::Index e = 0; e < out_dim; ++e)
    for (Eigen::Index j = 0; j < in_dim; ++j)
      for (Eigen::Index i = 0; i < in_dim; ++i) out(at(e, i), at(e, j)) = reduced(i, j);
  return out;
}

DecayFit fit_decay(std::vector<DecaySample> samples, bool fit_time) {
  DecayFit fit;
  std::vector<std::size_t> keep;
  for (std::size_t i = 0; i < samples.size(); ++i)
    if (samples[i].norm > kNormFloor) keep.push_back(i);
  fit.used = static_cast<int>(keep.size());
  const int params = fit_time ? 3 : 2;
  if (static_cast<int>(keep.size()) < params) {
    fit.degenerate = true;
    fit.samples = std::move(samples);
    return fit;
  }
  Eigen::MatrixXd A(static_cast<Eigen::Index>(keep.size()), params);
  Eigen::VectorXd y(static_cast<Eigen::Index>(keep.size()));
  for (std::size_t r = 0; r < keep.size(); ++r) {
    const auto& s = samples[keep[r]];
    const auto row = static_cast<Eigen::Index>(r);
    A(row, 0) = 1.0;
    A(row, 1) = -s.x;
    if (fit_time) A(row, 2) = s.t;
    y[row] = std::log(s.norm);
  }
  const Eigen::VectorXd c = A.colPivHouseholderQr().solve(y);
  const Eigen::VectorXd res = y - A * c;
  fit.residual = std::sqrt(res.squaredNorm() / static_cast<double>(keep.size()));
  fit.rate = c[1];
  fit.velocity = fit_time ? c[2] : 0.0;
  fit.rate_positive = fit.rate > 0.0;
  // raise the amplitude until every sample (including those at the floor) is dominated
  double log_amp = c[0];
  for (const auto& s : samples) {
    if (s.norm <= 0.0) continue;
    const double need = std::log(s.norm) + fit.rate * s.x - fit.velocity * s.t;
    log_amp = std::max(log_amp, need);
  }
  fit.amplitude = std::exp(log_amp) * (1.0 + 1e-12);
  fit.dominates = true;
  for (auto& s : samples) {
    s.envelope = fit.amplitude * std::exp(fit.velocity * s.t - fit.rate * s.x);
    fit.dominates = fit.dominates && s.norm <= s.envelope;
  }
  fit.samples = std::move(samples);
  return fit;
}

DeltaDecomposition delta_decomposition(const DenseEvolution& ev, const DenseOperator& a_x, int x,
                                       const EnergyFilter& g, int m_max) {
  if (m_max < 0) throw std::invalid_argument("m_max must be nonnegative");
  const DenseOperator tau = tau_g_star(ev.spec, g, a_x);
  DeltaDecomposition out;
  DenseOperator previous = DenseOperator::Zero(tau.rows(), tau.cols());
  DenseOperator sum = previous;
  std::vector<DecaySample> samples;
  for (int m = 0; m <= m_max; ++m) {
    const auto X = ball(ev.lattice, x, m);
    const DenseOperator pi = X.size() == ev.lattice.num_sites() ? tau : local_approximation(ev.lattice, tau, X);
    DenseOperator delta = pi - previous;
    sum += delta;
    out.norms.push_back(op_norm(delta));
    out.ball_sizes.push_back(X.size());
    out.remainders.push_back(op_norm(tau - sum));
    samples.push_back({0.0, static_cast<double>(m), out.norms.back(), 0.0});
    out.deltas.push_back(std::move(delta));
    previous = pi;
  }
  out.reconstruction_error = out.remainders.back();
  out.fit = fit_decay(std::move(samples), false);
  return out;
}

bool LrProfile::decreasing_at(std::size_t t_index) const {
  const auto& row = max_norms.at(t_index);
  // shells related by a lattice symmetry tie exactly, so only ties (relative 1e-10) are allowed
  for (std::size_t i = 1; i < row.size(); ++i)
    if (row[i] > row[i - 1] * (1.0 + 1e-10)) return false;
  return row.size() < 2 || row.back() < row.front();
}

bool LrProfile::pi_monotone_at(std::size_t t_index) const {
  const auto& row = pi_errors.at(t_index);
  for (std::size_t i = 1; i < row.size(); ++i)
    if (row[i] > row[i - 1] + 1e-12) return false;
  return true;
}

LrProfile lr_commutator_profile(const DenseEvolution& ev, int x, SpinAxis a_axis, SpinAxis b_axis,
                                const std::vector<double>& t_grid) {
  const Lattice& lat = ev.lattice;
  const int n = static_cast<int>(lat.num_sites());
  LrProfile prof;
  prof.times = t_grid;
  for (int y = 0; y < n; ++y) {
    const double d = lat.distance(x, y);
    if (std::none_of(prof.distances.begin(), prof.distances.end(), [&](double v) { return same_distance(v, d); }))
      prof.distances.push_back(d);
  }
  std::sort(prof.distances.begin(), prof.distances.end());
  const double diameter = prof.distances.back();
  const DenseOperator a = site_operator(lat, x, a_axis);
  std::vector<DenseOperator> bs;
  for (int y = 0; y < n; ++y) bs.push_back(site_operator(lat, y, b_axis));

  std::vector<DecaySample> samples;
  for (double t : t_grid) {
    const DenseOperator at = heisenberg_evolve(ev.spec, a, t);
    std::vector<double> row(prof.distances.size(), 0.0);
    for (int y = 0; y < n; ++y) {
      const double d = lat.distance(x, y);
      const double norm = op_norm(at * bs[static_cast<std::size_t>(y)] - bs[static_cast<std::size_t>(y)] * at);
      const auto g = static_cast<std::size_t>(
          std::find_if(prof.distances.begin(), prof.distances.end(), [&](double v) { return same_distance(v, d); }) -
          prof.distances.begin());
      row[g] = std::max(row[g], norm);
      samples.push_back({t, d, norm, 0.0});
    }
    prof.max_norms.push_back(std::move(row));
    std::vector<double> pi_row;
    for (int m = 0; m <= static_cast<int>(std::ceil(diameter)); ++m)
      pi_row.push_back(op_norm(local_approximation(lat, at, ball(lat, x, m)) - at));
    prof.pi_errors.push_back(std::move(pi_row));
  }
  prof.fit = fit_decay(std::move(samples), true);
  return prof;
}

ContinuityProfile b_continuity(const Lattice& lattice, const DenseOperator& a_x, const EnergyFilter& g,
                               const std::vector<double>& ladder, double factor, std::uint64_t dense_cap) {
  ContinuityProfile prof;
  prof.factor = factor;
  const auto ev0 = make_dense_evolution(lattice, 0.0, dense_cap);
  const DenseOperator tau0 = tau_g_star(ev0.spec, g, a_x);
  for (double B : ladder) {
    if (!(B > 0.0)) continue;
    const auto ev = make_dense_evolution(lattice, B, dense_cap);
    prof.B.push_back(B);
    prof.r.push_back(op_norm(tau_g_star(ev.spec, g, a_x) - tau0) / B);
  }
  if (prof.r.empty()) throw std::invalid_argument("B ladder has no positive entry");
  const auto [lo, hi] = std::minmax_element(prof.r.begin(), prof.r.end());
  prof.constant = *hi;
  prof.ratio = *lo > 0.0 ? *hi / *lo : (*hi > 0.0 ? std::numeric_limits<double>::infinity() : 1.0);
  prof.pass = prof.ratio <= factor;
  return prof;
}

}  // namespace ngdisp
