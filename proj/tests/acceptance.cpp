// Acceptance criteria: one PASS/FAIL line per criterion.
// Usage: acceptance [criterion numbers...]   (default: all)

#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <functional>
#include <map>
#include <memory>
#include <numbers>
#include <random>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include "json.hpp"
#include "ngdisp/config.hpp"
#include "ngdisp/filters.hpp"
#include "ngdisp/locality.hpp"
#include "ngdisp/ng_analysis.hpp"
#include "ngdisp/scan.hpp"
#include "ngdisp/spin_model.hpp"

using namespace ngdisp;
namespace fs = std::filesystem;

namespace {

constexpr double pi = std::numbers::pi;

Lattice make_lattice(std::vector<int> extents, int two_s = 1) {
  return Lattice(LatticeSpec{std::move(extents), SpinMagnitude(two_s)});
}

bool same_index(const Momentum& a, const Momentum& b) { return a.index == b.index; }

struct Outcome {
  bool pass = true;
  std::string detail;
};

/// Collects the first few violations and the worst value of each named quantity.
class Tally {
 public:
  void require(bool ok, const std::string& what) {
    if (ok) return;
    pass_ = false;
    if (failures_.size() < 5) failures_.push_back(what);
    ++count_;
  }
  void worst(const std::string& name, double v) {
    auto it = worst_.find(name);
    if (it == worst_.end() || v > it->second) worst_[name] = v;
  }
  Outcome outcome(const std::string& extra = {}) const {
    std::ostringstream os;
    for (const auto& [name, v] : worst_) os << name << "=" << v << " ";
    os << extra;
    if (!pass_) {
      os << " | " << count_ << " violation(s):";
      for (const auto& f : failures_) os << " [" << f << "]";
    }
    return {pass_, os.str()};
  }

 private:
  bool pass_ = true;
  std::size_t count_ = 0;
  std::vector<std::string> failures_;
  std::map<std::string, double> worst_;
};

std::string str(double v) {
  std::ostringstream os;
  os.precision(10);
  os << v;
  return os.str();
}

std::string where(const std::string& lat, double B, const std::string& name, const std::vector<double>& k) {
  std::ostringstream os;
  os << lat << " B=" << B << " " << name << " k=(";
  for (std::size_t i = 0; i < k.size(); ++i) os << (i ? "," : "") << k[i];
  os << ")";
  return os.str();
}

// 1. exact finite-volume inequality suite on 2x2 and 2x4

Outcome criterion_bounds() {
  Tally tally;
  std::map<std::string, std::size_t> seen;
  for (auto ext : {std::vector<int>{2, 2}, std::vector<int>{2, 4}}) {
    const auto lat = make_lattice(ext);
    for (double B : {0.4, 0.2, 0.1, 0.05}) {
      const System sys(lat, B);
      for (const auto& rep : run_bounds_suite(sys)) {
        for (const auto& e : rep.entries) {
          const std::string at = where(lat.spec().id(), B, e.name, rep.k_values) + " " + mode_name(rep.mode);
          tally.require(!e.inconclusive, at + " inconclusive: " + e.note);
          const std::string& n = e.name;
          if (n.rfind("irb", 0) == 0 && n.find("oracle") == std::string::npos) {
            tally.require(e.margin >= -1e-8, at + " margin " + str(e.margin));
            tally.worst("irb_violation", -e.margin);
            ++seen["irb"];
          } else if (n.rfind("double_commutator", 0) == 0) {
            tally.require(e.lhs <= e.rhs + 1e-10, at + " lhs-rhs " + str(e.lhs - e.rhs));
            tally.worst("dc_excess", e.lhs - e.rhs);
            ++seen["dc"];
          } else if (n == "sum_rule") {
            tally.require(std::abs(e.lhs - e.rhs) <= 1e-10, at + " diff " + str(e.lhs - e.rhs));
            tally.worst("sum_rule_diff", std::abs(e.lhs - e.rhs));
            ++seen["sum_rule"];
          } else if (n.rfind("window", 0) == 0 || n == "msexpcommu1b") {
            tally.require(e.margin >= -1e-8, at + " margin " + str(e.margin));
            tally.worst("window_violation", -e.margin);
            ++seen["window"];
          } else if (n == "denominator_lower_bound") {
            tally.require(e.lhs <= e.rhs + 1e-8, at + " D-den " + str(e.lhs - e.rhs));
            tally.worst("D_excess", e.lhs - e.rhs);
            ++seen["denominator"];
          } else {
            tally.require(e.pass, at + " failed");
          }
        }
      }
    }
  }
  for (const char* group : {"irb", "dc", "sum_rule", "window", "denominator"})
    tally.require(seen[group] > 0, std::string("no ") + group + " entries");
  std::ostringstream os;
  for (const auto& [g, n] : seen) os << g << ":" << n << " ";
  return tally.outcome(os.str());
}

// 2. sparse path against the dense oracle

Outcome criterion_oracle() {
  Tally tally;
  struct Case {
    std::vector<int> ext;
    int two_s;
  };
  const std::vector<Case> cases = {{{2, 2}, 1}, {{2, 4}, 1}, {{8}, 1}, {{4}, 1}, {{2, 2}, 2}};
  const std::vector<FilterSpec> filters = {{0.2, 3.0, 0.5}, {0.13, 10.0, 2.0}};
  std::size_t compared = 0;
  for (const auto& c : cases) {
    const auto lat = make_lattice(c.ext, c.two_s);
    for (double B : {0.2, 0.05}) {
      const System sys(lat, B);
      const std::string id = lat.spec().id() + " B=" + str(B);
      const double dE = std::abs(sys.gs().E0 - sys.dense().values(0));
      tally.require(dE <= 1e-8, id + " E0 diff " + str(dE));
      tally.worst("E0_diff", dE);
      for (const auto& q : lat.momentum_grid()) {
        if (same_index(q, lat.q_vector())) continue;
        for (SpinAxis axis : {SpinAxis::two, SpinAxis::three})
          for (const auto& e : irb_susceptibility(sys, q, axis))
            if (e.name == "irb.oracle") {
              const double d = std::abs(e.lhs - e.rhs);
              tally.require(d <= 1e-8, where(id, B, "irb", lat.values(q)) + " diff " + str(d));
              tally.worst("resolvent_diff", d);
              ++compared;
            }
      }
      std::vector<Momentum> qs = lat.momentum_grid();
      for (const auto& k : lat.momentum_grid()) qs.push_back(filtered_momentum(lat, k, Mode::q));
      for (const auto& f : filters) {
        const EnergyFilter g(f);
        const auto cheb = sys.moments(g, qs, Backend::chebyshev);
        const auto dense = sys.moments(g, qs, Backend::dense);
        for (std::size_t i = 0; i < qs.size(); ++i) {
          const double d = std::max(std::abs(cheb[i].num - dense[i].num), std::abs(cheb[i].den - dense[i].den));
          tally.require(d <= 1e-8, where(id, B, "moments " + f.str(), lat.values(qs[i])) + " diff " + str(d));
          tally.worst("moment_diff", d);
          ++compared;
        }
      }
    }
  }
  return tally.outcome("comparisons=" + std::to_string(compared));
}

// 3 and 4 share the 4x4 system

struct FourByFour {
  std::unique_ptr<System> sys;
  EpsilonChoice eps;
  FilterSpec filter;
  WavepacketSpec wavepacket{pi / 2, pi};
  DispersionRecord p_mode;
  DispersionRecord q_mode;
};

FourByFour& four_by_four() {
  static FourByFour f = [] {
    FourByFour r;
    static GroundStateCache cache(fs::path("acceptance_cache"));
    SystemOptions o;
    o.use_dense = false;
    o.cache = &cache;
    r.sys = std::make_unique<System>(make_lattice({4, 4}), 0.1, o);
    r.eps = choose_epsilon(r.sys->m_B(), r.wavepacket.p, r.sys->lattice());
    r.filter = FilterSpec{r.eps.epsilon, 10.0, 2.0};
    r.p_mode = excitation_energy(*r.sys, r.wavepacket, r.filter, r.eps, Mode::p, Backend::chebyshev);
    r.q_mode = q_mode_analysis(*r.sys, r.wavepacket, r.filter, r.eps, Backend::chebyshev);
    return r;
  }();
  return f;
}

Outcome criterion_sandwich() {
  Tally tally;
  auto& f = four_by_four();
  const auto& r = f.p_mode;
  tally.require(r.backend == Backend::chebyshev, "4x4 did not use the Chebyshev backend");
  tally.require(r.delta_e >= f.filter.epsilon, "dE " + str(r.delta_e) + " < eps " + str(f.filter.epsilon));
  tally.require(r.delta_e <= f.filter.gamma, "dE " + str(r.delta_e) + " > gamma");
  tally.require(r.delta_e >= f.eps.v_min * f.wavepacket.p, "dE below v_min|p|");
  for (const auto& e : r.checks) tally.require(e.pass && !e.inconclusive, "4x4 record check " + e.name);

  const System small(make_lattice({2, 4}), 0.1);
  const auto eps2 = choose_epsilon(small.m_B(), f.wavepacket.p, small.lattice());
  const auto rec2 = excitation_energy(small, f.wavepacket, FilterSpec{eps2.epsilon, 10.0, 2.0}, eps2, Mode::p,
                                      Backend::dense);
  tally.require(std::isfinite(rec2.max_cross_term) && rec2.max_cross_term <= 1e-10,
                "2x4 cross term " + str(rec2.max_cross_term));
  tally.worst("cross_term_2x4", rec2.max_cross_term);
  return tally.outcome("dE=" + str(r.delta_e) + " eps=" + str(f.filter.epsilon) + " v_min|p|=" +
                       str(f.eps.v_min * f.wavepacket.p) + " gamma=" + str(f.filter.gamma) +
                       " degree=" + std::to_string(r.chebyshev_degree));
}

Outcome criterion_trend() {
  Tally tally;
  auto& f = four_by_four();
  const double dp = f.p_mode.delta_e, dq = f.q_mode.delta_e;
  tally.require(dp - dq > 1e-6, "dE_p " + str(dp) + " not above dE_q " + str(dq));

  const System& sys = *f.sys;
  const auto& lat = sys.lattice();
  std::vector<Momentum> qs;
  for (const auto& k : lat.momentum_grid()) qs.push_back(filtered_momentum(lat, k, Mode::q));
  const auto m = sys.moments(EnergyFilter(f.filter), qs, Backend::chebyshev);
  // ℰ_k level -> (smallest, largest) den_k on that level
  std::map<double, std::pair<double, double>> levels;
  for (std::size_t i = 0; i < qs.size(); ++i) {
    const double level = std::round(sys.dispersion(lat.momentum_grid()[i]) * 1e9) / 1e9;
    auto it = levels.find(level);
    if (it == levels.end())
      levels[level] = {m[i].den, m[i].den};
    else
      it->second = {std::min(it->second.first, m[i].den), std::max(it->second.second, m[i].den)};
  }
  std::ostringstream os;
  for (auto it = levels.begin(); it != levels.end(); ++it) {
    os << "den(" << it->first << ")=[" << it->second.first << "," << it->second.second << "] ";
    if (std::next(it) == levels.end()) break;
    const double drop = it->second.first - std::next(it)->second.second;
    tally.require(drop > 1e-6, "den_k does not drop from E=" + str(it->first) + " to E=" +
                                   str(std::next(it)->first) + " (" + str(drop) + ")");
  }
  return tally.outcome("dE_p=" + str(dp) + " dE_q=" + str(dq) + " " + os.str());
}

// 5. filter conformance

double window_weight(const SpectralDecomposition& spec, double E0, const Vector& v,
                     const std::function<bool(double)>& in) {
  const Vector c = spec.vectors.adjoint() * v;
  double sum = 0;
  for (Eigen::Index n = 0; n < c.size(); ++n)
    if (in(spec.values(n) - E0)) sum += std::norm(c(n));
  return sum;
}

Outcome criterion_filters() {
  Tally tally;
  const std::vector<FilterSpec> specs = {{0.2, 3.0, 0.5}, {0.25, 3.0, 0.5}, {0.13, 10.0, 2.0}, {0.01, 0.5, 0.1}};
  for (const auto& s : specs) {
    const auto g = build_g(s);
    const int n = 10000;
    for (int i = 0; i < n; ++i) {
      const double E = -0.1 * s.gamma + 1.2 * s.gamma * i / (n - 1);
      const double v = g(E);
      const std::string at = s.str() + " E=" + str(E);
      tally.require(v >= 0.0 && v <= 1.0, at + " out of [0,1]: " + str(v));
      if (E >= 2 * s.epsilon && E <= s.gamma - s.delta_gamma) {
        tally.require(std::abs(v - 1.0) <= 1e-15, at + " plateau " + str(v));
        tally.worst("plateau_dev", std::abs(v - 1.0));
      }
      if (E <= s.epsilon || E >= s.gamma) {
        tally.require(std::abs(v) <= 1e-15, at + " outside " + str(v));
        tally.worst("outside_dev", std::abs(v));
      }
    }
  }

  const FilterSpec spec{0.2, 3.0, 0.5};
  const auto g = build_g(spec);
  std::size_t vectors = 0;
  for (auto ext : {std::vector<int>{2, 2}, std::vector<int>{2, 4}, std::vector<int>{4}}) {
    for (double B : {0.2, 0.05}) {
      const System sys(make_lattice(ext), B);
      std::mt19937_64 rng(7 * ext.size() + ext.back());
      std::normal_distribution<double> nd;
      for (int r = 0; r < 20; ++r) {
        Vector v(sys.H().dim());
        for (auto& x : v) x = cplx(nd(rng), nd(rng));
        const Vector gv = apply_filter(sys.H(), sys.gs(), g, v, sys.interval(), {});
        const double filtered = gv.squaredNorm();
        const double E0 = sys.gs().E0;
        const double window =
            window_weight(sys.dense(), E0, v, [&](double E) { return E > spec.epsilon && E < spec.gamma; });
        const double plateau = window_weight(
            sys.dense(), E0, v, [&](double E) { return E >= 2 * spec.epsilon && E <= spec.gamma - spec.delta_gamma; });
        const std::string at = sys.lattice().spec().id() + " B=" + str(B) + " r=" + std::to_string(r);
        tally.require(filtered <= window + 1e-8, at + " window " + str(filtered - window));
        tally.require(plateau <= filtered + 1e-8, at + " plateau capture " + str(plateau - filtered));
        tally.worst("window_excess", filtered - window);
        tally.worst("plateau_excess", plateau - filtered);
        ++vectors;
      }
    }
  }
  return tally.outcome("random_vectors=" + std::to_string(vectors));
}

// 6. locality suite

Outcome criterion_locality() {
  Tally tally;
  const ScanConfig c;  // locality defaults
  const EnergyFilter g(FilterSpec{c.locality_epsilon, c.locality_gamma, c.locality_delta_gamma});
  const auto lat = make_lattice({2, 4});
  const int x = 0;
  const auto ev = make_dense_evolution(lat, c.locality_B);
  const DenseOperator a = site_operator(lat, x, SpinAxis::two);

  const double tau_err = tau_identity_error(ev.spec, g, a);
  tally.require(tau_err <= 1e-10, "tau identity " + str(tau_err));
  tally.worst("tau_identity", tau_err);

  const DenseOperator tau = tau_g_star(ev.spec, g, a);
  for (double radius : {0.0, 1.0, 2.0}) {
    const auto X = ball(lat, x, radius);
    const DenseOperator p = local_approximation(lat, tau, X);
    const double idem = op_norm(local_approximation(lat, p, X) - p);
    const double excess = op_norm(p) - op_norm(tau);
    tally.require(idem <= 1e-12, "idempotence m=" + str(radius) + " " + str(idem));
    tally.require(excess <= 1e-12, "contraction m=" + str(radius) + " " + str(excess));
    tally.worst("pi_idempotence", idem);
    tally.worst("pi_contraction_excess", excess);
  }

  const auto dd = delta_decomposition(ev, a, x, g, c.locality_m_max);
  tally.require(dd.ball_sizes.back() == lat.num_sites(), "balls do not cover the torus");
  tally.require(dd.reconstruction_error <= 1e-10, "reconstruction " + str(dd.reconstruction_error));
  tally.worst("delta_reconstruction", dd.reconstruction_error);

  const auto lr = lr_commutator_profile(ev, x, SpinAxis::two, SpinAxis::two, {0.25, 0.5, 1.0});
  for (std::size_t i = 0; i < lr.times.size(); ++i)
    tally.require(lr.decreasing_at(i), "LR norms not decreasing at t=" + str(lr.times[i]));

  const auto cont = b_continuity(make_lattice({2, 2}), site_operator(make_lattice({2, 2}), x, SpinAxis::two), g,
                                 {0.2, 0.1, 0.05}, 4.0);
  tally.require(cont.ratio <= 4.0, "continuity ratio " + str(cont.ratio));
  return tally.outcome("continuity_ratio=" + str(cont.ratio));
}

// 7. physics sanity

double golden_ring4() {
  std::ifstream in(NGDISP_GOLDEN_PATH);
  return nlohmann::json::parse(in).at("ring4_E0").get<double>();
}

Outcome criterion_physics() {
  Tally tally;
  const std::vector<double> fields = {0.0, 0.025, 0.05, 0.075, 0.1, 0.125, 0.15, 0.2, 0.25, 0.3, 0.35, 0.4};
  for (auto ext : {std::vector<int>{2, 2}, std::vector<int>{2, 4}, std::vector<int>{4}}) {
    const auto lat = make_lattice(ext);
    std::vector<double> E, m;
    for (double B : fields) {
      const auto H = build_hamiltonian(lat, B);
      const auto gs = ground_state(H, lat, B);
      E.push_back(gs.E0);
      m.push_back(staggered_magnetization(lat, gs));
    }
    const std::string id = lat.spec().id();
    tally.require(std::abs(m[0]) <= 1e-10, id + " m_B(0) = " + str(m[0]));
    tally.worst("m_B_at_zero", std::abs(m[0]));
    for (std::size_t i = 1; i < m.size(); ++i)
      tally.require(m[i] >= m[i - 1], id + " m_B decreases at B=" + str(fields[i]));
    // second differences on the uniform part of the ladder (step 0.025 and 0.05)
    for (std::size_t i = 1; i + 1 < fields.size(); ++i) {
      const double h1 = fields[i] - fields[i - 1], h2 = fields[i + 1] - fields[i];
      if (std::abs(h1 - h2) > 1e-12) continue;
      const double d2 = E[i - 1] - 2 * E[i] + E[i + 1];
      tally.require(d2 <= 1e-10, id + " E0 not concave at B=" + str(fields[i]) + " d2=" + str(d2));
      tally.worst("E0_second_difference", d2);
    }
  }
  const auto ring = make_lattice({4});
  const double ring_E0 = ground_state(build_hamiltonian(ring, 0.0)).E0;
  const double oracle = golden_ring4();
  tally.require(std::abs(ring_E0 - oracle) <= 1e-10, "ring E0 " + str(ring_E0) + " vs " + str(oracle));
  tally.worst("ring4_E0_diff", std::abs(ring_E0 - oracle));
  return tally.outcome();
}

// 8. determinism of repeated scans

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

Outcome criterion_determinism() {
  Tally tally;
  const fs::path root = fs::temp_directory_path() / "ngdisp_acceptance_determinism";
  fs::remove_all(root);
  fs::create_directories(root);
  const std::string text =
      "[lattice]\nextents = 2x2, 2x4\n[field]\nB = 0.2, 0.1\n[wavepacket]\np = pi/2\n"
      "[run]\nchecks = bounds, dispersion, qmode, locality\n";
  std::vector<fs::path> outs;
  for (int run = 0; run < 2; ++run) {
    ScanOptions o;
    o.out_dir = (root / ("run" + std::to_string(run))).string();
    o.cache_dir = (root / "cache").string();  // the second run reads the first run's cache
    run_scan(parse_config_text(text), o);
    outs.push_back(*o.out_dir);
  }
  std::set<std::string> names;
  for (const auto& out : outs)
    for (const auto& e : fs::directory_iterator(out))
      if (e.path().extension() == ".csv") names.insert(e.path().filename().string());
  tally.require(names.size() > 3, "too few CSV files: " + std::to_string(names.size()));
  for (const auto& n : names) {
    const bool both = fs::exists(outs[0] / n) && fs::exists(outs[1] / n);
    tally.require(both, n + " missing from one run");
    if (both) tally.require(slurp(outs[0] / n) == slurp(outs[1] / n), n + " differs");
  }
  fs::remove_all(root);
  return tally.outcome("csv_files=" + std::to_string(names.size()));
}

struct Criterion {
  int id;
  const char* name;
  double budget_s;  // runtime limit, 0 for none
  std::function<Outcome()> run;
};

}  // namespace

int main(int argc, char** argv) {
  const std::vector<Criterion> all = {
      {1, "finite-volume inequality suite", 120, criterion_bounds},
      {2, "oracle equivalence", 300, criterion_oracle},
      {3, "excitation-energy sandwich (4x4)", 1800, criterion_sandwich},
      {4, "dispersion trend (4x4)", 0, criterion_trend},
      {5, "filter conformance", 0, criterion_filters},
      {6, "locality suite", 600, criterion_locality},
      {7, "physics sanity", 0, criterion_physics},
      {8, "determinism", 0, criterion_determinism},
  };
  std::set<int> wanted;
  for (int i = 1; i < argc; ++i) wanted.insert(std::stoi(argv[i]));

  int failed = 0;
  for (const auto& c : all) {
    if (!wanted.empty() && !wanted.count(c.id)) continue;
    const auto t0 = std::chrono::steady_clock::now();
    Outcome o;
    try {
      o = c.run();
    } catch (const std::exception& e) {
      o = {false, std::string("exception: ") + e.what()};
    }
    const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    if (c.budget_s > 0 && secs > c.budget_s) {
      o.pass = false;
      o.detail += " | over the " + str(c.budget_s) + " s budget";
    }
    if (!o.pass) ++failed;
    std::printf("criterion %d %-36s %s  (%.1f s) %s\n", c.id, c.name, o.pass ? "PASS" : "FAIL", secs,
                o.detail.c_str());
    std::fflush(stdout);
  }
  return failed == 0 ? 0 : 1;
}
