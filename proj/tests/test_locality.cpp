#include <cmath>
#include <random>

#include "doctest.h"
#include "ngdisp/locality.hpp"
#include "support.hpp"

using namespace ngdisp;
using testsupport::golden;
using testsupport::lattice;
using testsupport::max_abs;

namespace {

DenseMatrix random_operator(Eigen::Index dim, unsigned seed) {
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> nd;
  DenseMatrix m(dim, dim);
  for (Eigen::Index i = 0; i < dim; ++i)
    for (Eigen::Index j = 0; j < dim; ++j) m(i, j) = cplx(nd(rng), nd(rng));
  return m;
}

const FilterSpec kFilter{0.25, 3.0, 0.5};

}  // namespace

TEST_CASE("operator norm") {
  const DenseMatrix a = random_operator(12, 3);
  CHECK(op_norm(a) == doctest::Approx(oracle::op_norm(a)).epsilon(1e-12));
  const DenseMatrix h = a + a.adjoint();
  CHECK(op_norm(h) == doctest::Approx(oracle::op_norm(h)).epsilon(1e-12));
}

TEST_CASE("Heisenberg evolution") {
  const auto ev = make_dense_evolution(lattice({2, 2}), 0.1);
  const DenseMatrix a = site_operator(ev.lattice, 1, SpinAxis::two);
  CHECK(max_abs(heisenberg_evolve(ev.spec, a, 0.0) - a) <= 1e-13);
  const DenseMatrix H = build_hamiltonian(ev.lattice, 0.1).to_dense();
  for (double t : {0.3, 1.7, -2.0}) {
    CHECK(max_abs(heisenberg_evolve(ev.spec, H, t) - H) <= 1e-12);
    CHECK(std::abs(op_norm(heisenberg_evolve(ev.spec, a, t)) - op_norm(a)) <= 1e-10);
  }
  // against a direct matrix exponential
  const auto e = oracle::diagonalize(H);
  const double t = 0.7;
  Eigen::VectorXcd ph(e.values.size());
  for (Eigen::Index i = 0; i < ph.size(); ++i) ph(i) = std::polar(1.0, e.values(i) * t);
  const DenseMatrix U = e.vectors * ph.asDiagonal() * e.vectors.adjoint();
  CHECK(max_abs(heisenberg_evolve(ev.spec, a, t) - U * a * U.adjoint()) <= 1e-12);
  CHECK_THROWS_AS(make_dense_evolution(lattice({2, 4}), 0.1, 64), DenseCapError);
}

TEST_CASE("spectral filtered evolution") {
  const auto ev = make_dense_evolution(lattice({2, 2}), 0.1);
  const auto g = build_g(kFilter);
  const auto dim = ev.spec.dim();
  CHECK(max_abs(tau_g_star(ev.spec, g, DenseMatrix::Identity(dim, dim))) <= 1e-13);
  for (auto [m, n] : {std::pair{5, 0}, std::pair{0, 5}, std::pair{9, 2}}) {
    const DenseMatrix r = ev.spec.vectors.col(m) * ev.spec.vectors.col(n).adjoint();
    const double w = g(ev.spec.values(m) - ev.spec.values(n));
    CHECK(max_abs(tau_g_star(ev.spec, g, r) - w * r) <= 1e-13);
  }
  for (int x = 0; x < 4; ++x)
    for (auto axis : {SpinAxis::one, SpinAxis::two, SpinAxis::three})
      CHECK(tau_identity_error(ev.spec, g, site_operator(ev.lattice, x, axis)) <= 1e-10);
}

TEST_CASE("balls use the minimum-image distance") {
  const auto lat = lattice({2, 4});
  CHECK(ball(lat, 0, 0) == std::vector<int>{0});
  CHECK(ball(lat, 0, 1).size() == 4);
  CHECK(ball(lat, 0, 10).size() == 8);
  for (int m = 0; m < 4; ++m)
    for (int y : ball(lat, 3, m)) CHECK(lat.distance(3, y) <= m + 1e-12);
}

TEST_CASE("partial-trace local approximation") {
  const auto lat = lattice({2, 2});
  const auto dim = static_cast<Eigen::Index>(lat.hilbert_dim());
  const DenseMatrix b = random_operator(dim, 17);
  CHECK(max_abs(local_approximation(lat, b, {0, 1, 2, 3}) - b) <= 1e-12);
  CHECK(max_abs(local_approximation(lat, b, {}) - (b.trace() / double(dim)) * DenseMatrix::Identity(dim, dim)) <=
        1e-12);
  const DenseMatrix loc = site_operator(lat, 0, SpinAxis::one) * site_operator(lat, 2, SpinAxis::three);
  CHECK(max_abs(local_approximation(lat, loc, {0, 2}) - loc) <= 1e-12);
  CHECK(max_abs(local_approximation(lat, loc, {0, 1, 2}) - loc) <= 1e-12);
  for (std::vector<int> X : {std::vector<int>{0}, std::vector<int>{1, 3}, std::vector<int>{0, 1, 2}}) {
    const DenseMatrix p = local_approximation(lat, b, X);
    CHECK(max_abs(local_approximation(lat, p, X) - p) <= 1e-12);
    CHECK(op_norm(p) <= op_norm(b) + 1e-12);
  }
  // against the oracle: partial trace over sites 1 and 3, written out with Kronecker factors
  DenseMatrix ref = DenseMatrix::Zero(dim, dim);
  const DenseMatrix ops[4] = {DenseMatrix::Identity(2, 2), 2.0 * oracle::spin_ops(1).x, 2.0 * oracle::spin_ops(1).y,
                              2.0 * oracle::spin_ops(1).z};
  // expand in Pauli strings; keep those acting trivially outside X = {0, 2}
  for (int a0 = 0; a0 < 4; ++a0)
    for (int a1 = 0; a1 < 4; ++a1)
      for (int a2 = 0; a2 < 4; ++a2)
        for (int a3 = 0; a3 < 4; ++a3) {
          const DenseMatrix P = oracle::kron(oracle::kron(ops[a3], ops[a2]), oracle::kron(ops[a1], ops[a0]));
          const cplx coef = (P.adjoint() * b).trace() / double(dim);
          if (a1 == 0 && a3 == 0) ref += coef * P;
        }
  CHECK(max_abs(local_approximation(lat, b, {0, 2}) - ref) <= 1e-12);
}

TEST_CASE("delta decomposition") {
  for (auto ext : {std::vector<int>{2, 2}, std::vector<int>{2, 4}}) {
    const auto ev = make_dense_evolution(lattice(ext), 0.1);
    const auto g = build_g(kFilter);
    const DenseMatrix a = site_operator(ev.lattice, 0, SpinAxis::two);
    const auto dec = delta_decomposition(ev, a, 0, g, 5);
    CHECK(dec.reconstruction_error <= 1e-10);
    REQUIRE(dec.deltas.size() == 6);
    const DenseMatrix tau = tau_g_star(ev.spec, g, a);
    DenseMatrix sum = DenseMatrix::Zero(tau.rows(), tau.cols());
    for (std::size_t m = 0; m < dec.deltas.size(); ++m) {
      sum += dec.deltas[m];
      CHECK(dec.remainders[m] == doctest::Approx(op_norm(tau - sum)).epsilon(1e-9));
      double tail = 0.0;
      for (std::size_t n = m + 1; n < dec.norms.size(); ++n) tail += dec.norms[n];
      CHECK(dec.remainders[m] <= tail + 1e-10);
    }
    // beyond the diameter the balls saturate
    CHECK(dec.norms.back() <= 1e-14);
    CHECK(dec.ball_sizes.back() == ev.lattice.num_sites());
  }
}

TEST_CASE("Lieb-Robinson commutator profile") {
  const auto ev = make_dense_evolution(lattice({2, 4}), 0.1);
  const auto prof = lr_commutator_profile(ev, 0, SpinAxis::two, SpinAxis::two, {0.0, 0.25, 0.5, 1.0});
  REQUIRE(prof.max_norms.size() == 4);
  // t = 0: only the same site fails to commute, and there [S2, S2] = 0 too
  for (double v : prof.max_norms[0]) CHECK(v <= 1e-13);
  const auto cross = lr_commutator_profile(ev, 0, SpinAxis::one, SpinAxis::two, {0.0});
  CHECK(cross.distances.front() == 0.0);
  CHECK(cross.max_norms[0][0] == doctest::Approx(0.5).epsilon(1e-12));
  for (std::size_t j = 1; j < cross.distances.size(); ++j) CHECK(cross.max_norms[0][j] <= 1e-13);
  for (std::size_t t = 1; t < prof.times.size(); ++t) {
    CAPTURE(prof.times[t]);
    CHECK(prof.decreasing_at(t));
    CHECK(prof.pi_monotone_at(t));
  }
  CHECK(prof.fit.dominates);
  for (const auto& s : prof.fit.samples)
    if (s.norm > kNormFloor) CHECK(s.envelope >= s.norm * (1 - 1e-12));
}

TEST_CASE("decay fit") {
  std::vector<DecaySample> s;
  for (int x = 0; x < 5; ++x) s.push_back({0.0, double(x), 2.0 * std::exp(-0.7 * x), 0.0});
  const auto f = fit_decay(s, false);
  CHECK(f.rate == doctest::Approx(0.7).epsilon(1e-10));
  CHECK(f.amplitude == doctest::Approx(2.0).epsilon(1e-10));
  CHECK(f.rate_positive);
  CHECK(f.dominates);
  std::vector<DecaySample> floor = {{0, 1, 0.0, 0}, {0, 2, 1e-15, 0}};
  CHECK(fit_decay(floor, false).degenerate);
}

TEST_CASE("continuity in the field") {
  const auto& gold = golden();
  const auto lat = lattice({2, 2});
  const auto g = build_g(kFilter);
  const auto prof = b_continuity(lat, site_operator(lat, 0, SpinAxis::two), g, {0.2, 0.1, 0.05});
  REQUIRE(prof.r.size() == 3);
  for (int i = 0; i < 3; ++i) CHECK(std::abs(prof.r[i] - gold["torus2x2_continuity_r"][i].get<double>()) <= 1e-10);
  CHECK(prof.ratio <= 4.0);
  CHECK(prof.pass);
  const auto dim = static_cast<Eigen::Index>(lat.hilbert_dim());
  const auto id = b_continuity(lat, DenseMatrix::Identity(dim, dim), g, {0.2, 0.1});
  for (double r : id.r) CHECK(r <= 1e-13);
}
