// Regenerates tests/golden.json from the Kronecker oracle alone:
//   ./build/tests/golden_gen > tests/golden.json

#include <cstdio>
#include <iostream>

#include "json.hpp"
#include "oracle.hpp"

using namespace oracle;

namespace {

struct Ground {
  double E0;
  Vec phi;
  Eig eig;
};

Ground ground(const Torus& t, double B) {
  auto e = diagonalize(heisenberg(t, B));
  return {e.values(0), e.vectors.col(0), e};
}

double m_B(const Torus& t, const Vec& phi) { return expect(staggered(t), phi) / t.sites(); }

Mat tau_g(const Eig& e, const Mat& a, double eps, double gamma, double dg) {
  Mat c = e.vectors.adjoint() * a * e.vectors;
  for (Eigen::Index m = 0; m < c.rows(); ++m)
    for (Eigen::Index n = 0; n < c.cols(); ++n) c(m, n) *= ghat(e.values(m) - e.values(n), eps, gamma, dg);
  return e.vectors * c * e.vectors.adjoint();
}

}  // namespace

int main() {
  nlohmann::ordered_json j;

  j["two_site_E0"] = diagonalize(heisenberg({{2}, 1}, 0)).values(0);
  j["ring4_E0"] = diagonalize(heisenberg({{4}, 1}, 0)).values(0);
  j["torus2x2_B0_E0_dedup"] = diagonalize(heisenberg({{2, 2}, 1}, 0, true)).values(0);
  j["torus2x2_B0_E0_doubled"] = diagonalize(heisenberg({{2, 2}, 1}, 0, false)).values(0);

  const Torus t22{{2, 2}, 1};
  const auto g = ground(t22, 0.1);
  j["torus2x2_B0.1_E0"] = g.E0;
  j["torus2x2_B0.1_mB"] = m_B(t22, g.phi);
  for (double B : {1.0, 4.0, 16.0}) j["torus2x2_mB_large"].push_back(m_B(t22, ground(t22, B).phi));

  {
    const Mat H = heisenberg(t22, 0.1);
    const Mat Sk = fourier(t22, {1, 1}, 2), Smk = fourier(t22, {-1, -1}, 2);
    const Mat dc = Smk * (H * Sk - Sk * H) - (H * Sk - Sk * H) * Smk;
    j["torus2x2_B0.1_dc_axis2_Q"] = expect(dc, g.phi);
  }
  {
    const Vec v = fourier(t22, {1, 0}, 2) * g.phi;
    const Vec c = g.eig.vectors.adjoint() * v;
    double irb = 0, num = 0, den = 0;
    for (Eigen::Index n = 1; n < c.size(); ++n) {
      const double E = g.eig.values(n) - g.E0;
      irb += std::norm(c(n)) / E;
      const double w = ghat(E, 0.2, 3.0, 0.5);
      num += w * w * E * std::norm(c(n));
      den += w * w * std::norm(c(n));
    }
    j["torus2x2_B0.1_irb_axis2_pi0"] = irb;
    j["torus2x2_B0.1_moments_pi0"] = {num, den};
  }
  {
    const Torus t24{{2, 4}, 1};
    const auto g24 = ground(t24, 0.1);
    j["torus2x4_B0.1_E0"] = g24.E0;
    j["torus2x4_B0.1_mB"] = m_B(t24, g24.phi);
  }
  {
    const Mat a = site_spin(t22, 0, 2);
    const auto e0 = diagonalize(heisenberg(t22, 0));
    const Mat base = tau_g(e0, a, 0.25, 3.0, 0.5);
    for (double B : {0.2, 0.1, 0.05}) {
      const auto eB = diagonalize(heisenberg(t22, B));
      j["torus2x2_continuity_r"].push_back(op_norm(tau_g(eB, a, 0.25, 3.0, 0.5) - base) / B);
    }
  }
  std::cout << j.dump(2) << "\n";
}
