#include "ngdisp/scan.hpp"

#include <algorithm>
#include <atomic>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <ctime>
#include <filesystem>
#include <fstream>
#include <map>
#include <mutex>
#include <sstream>
#include <thread>

#include "json.hpp"

#include "ngdisp/locality.hpp"
#include "ngdisp/ng_analysis.hpp"

namespace ngdisp {

namespace fs = std::filesystem;
using json = nlohmann::json;

namespace {

constexpr const char* kVersion = "0.1.0";

std::string num(double v) {
  if (std::isnan(v)) return "nan";
  if (std::isinf(v)) return v > 0 ? "inf" : "-inf";
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

std::string csv_escape(const std::string& s) {
  if (s.find_first_of(",\"\n") == std::string::npos) return s;
  std::string out = "\"";
  for (char c : s) out += c == '"' ? std::string("\"\"") : std::string(1, c);
  return out + "\"";
}

std::string index_str(const Momentum& k) {
  std::string s;
  for (std::size_t i = 0; i < k.index.size(); ++i) s += (i ? ";" : "") + std::to_string(k.index[i]);
  return s;
}

std::string values_str(const std::vector<double>& v) {
  std::string s;
  for (std::size_t i = 0; i < v.size(); ++i) s += (i ? ";" : "") + num(v[i]);
  return s;
}

class Table {
 public:
  explicit Table(std::vector<std::string> header) : header_(std::move(header)) {}
  void add(std::vector<std::string> row) { rows_.push_back(std::move(row)); }
  std::size_t size() const { return rows_.size(); }
  void write(const fs::path& path) const {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw std::runtime_error("cannot write " + path.string());
    auto line = [&out](const std::vector<std::string>& cells) {
      for (std::size_t i = 0; i < cells.size(); ++i) out << (i ? "," : "") << csv_escape(cells[i]);
      out << "\n";
    };
    line(header_);
    for (const auto& r : rows_) line(r);
  }

 private:
  std::vector<std::string> header_;
  std::vector<std::vector<std::string>> rows_;
};

void corrupt_if_named(BoundEntry& e, const std::string& name) {
  if (name.empty() || e.name != name) return;
  e.lhs += 1.0 + std::abs(e.lhs);
  e.margin = e.rhs - e.lhs;
  e.pass = e.kind == BoundKind::upper ? e.margin >= -e.tolerance : std::abs(e.margin) <= e.tolerance;
  e.note += e.note.empty() ? "corrupted by debug hook" : "; corrupted by debug hook";
}

BoundEntry flag_entry(std::string name, bool ok, double lhs, double rhs, std::string note = {}) {
  BoundEntry e;
  e.name = std::move(name);
  e.lhs = lhs;
  e.rhs = rhs;
  e.margin = rhs - lhs;
  e.pass = ok;
  e.note = std::move(note);
  return e;
}

struct TrendRow {
  double p = 0.0;
  Momentum k;
  std::vector<double> k_values;
  double E_k = 0.0;
  double E_kQ = 0.0;
  double den = 0.0;
};

struct TrendCheck {
  std::string name;
  double p = 0.0;
  double lhs = 0.0;
  double rhs = 0.0;
  bool pass = false;
  std::string note;
};

struct SystemTask {
  std::vector<int> extents;
  double B = 0.0;
};

struct SystemResult {
  bool ran = false;
  std::string error;
  std::string lattice;
  double B = 0.0;
  double E0 = 0.0, gap = 0.0, m_B = 0.0, m_B_imag = 0.0, residual = 0.0;
  bool gap_is_estimate = true;
  bool dense = false;
  int matvecs = 0;
  std::vector<BoundReport> bounds;
  std::vector<DispersionRecord> records;
  std::vector<std::pair<std::string, BoundEntry>> extra;
  std::vector<TrendRow> qtrend;
  std::vector<TrendCheck> trends;
  std::vector<std::string> skipped;
};

struct LocalityResult {
  bool ran = false;
  std::string error;
  std::string lattice;
  std::vector<BoundEntry> checks;
  LrProfile lr;
  std::vector<double> delta_norms, delta_remainders;
  std::vector<std::size_t> ball_sizes;
  DecayFit delta_fit;
  std::optional<ContinuityProfile> continuity;
};

SystemOptions system_options(const ScanConfig& c, GroundStateCache* cache) {
  SystemOptions o;
  o.lanczos.tol = c.lanczos_tol;
  o.lanczos.seed = c.seed;
  o.solve.tol = c.solve_tol;
  o.chebyshev.tol = c.chebyshev_tol;
  o.chebyshev.max_degree = c.chebyshev_max_degree;
  o.dense_cap = c.dense_cap;
  o.cache = cache;
  return o;
}

bool all_ok(const SystemResult& r) {
  if (!r.error.empty()) return false;
  for (const auto& b : r.bounds)
    if (!b.all_pass()) return false;
  for (const auto& d : r.records)
    if (!d.all_pass()) return false;
  for (const auto& [k, e] : r.extra)
    if (!e.pass) return false;
  return true;
}

void run_system_task(const ScanConfig& c, const SystemTask& task, GroundStateCache* cache, SystemResult& out) {
  out.ran = true;
  const Lattice lat(LatticeSpec{task.extents, c.spin});
  out.lattice = lat.spec().id();
  out.B = task.B;
  const System sys(lat, task.B, system_options(c, cache));
  out.E0 = sys.gs().E0;
  out.gap = sys.gs().gap;
  out.gap_is_estimate = sys.gs().gap_is_estimate;
  out.m_B = sys.m_B();
  out.m_B_imag = sys.m_B_imag();
  out.residual = sys.gs().residual;
  out.matvecs = sys.gs().matvecs;
  out.dense = sys.has_dense();

  if (c.enabled("bounds")) {
    BoundsSuiteOptions bo;
    bo.gamma = c.bounds_gamma;
    bo.delta_gamma = c.bounds_delta_gamma;
    bo.vmin_ladder = c.vmin_ladder;
    out.bounds = run_bounds_suite(sys, bo);
    for (auto& rep : out.bounds)
      for (auto& e : rep.entries) corrupt_if_named(e, c.corrupt_entry);
  }

  const bool disp = c.enabled("dispersion"), qmode = c.enabled("qmode");
  if (!disp && !qmode) return;
  Backend backend = Backend::chebyshev;
  if (c.backend == BackendChoice::dense || (c.backend == BackendChoice::automatic && sys.has_dense()))
    backend = Backend::dense;
  if (backend == Backend::dense && !sys.has_dense()) {
    out.skipped.push_back(out.lattice + " dense backend requested above the dense cap");
    return;
  }
  for (double p : c.p) {
    const std::string tag = out.lattice + " B=" + num(task.B) + " p=" + num(p);
    EpsilonChoice eps;
    try {
      build_f(WavepacketSpec{p, c.kappa}, lat);
      if (c.epsilon) {
        eps.epsilon = *c.epsilon;
        eps.v_min = *c.epsilon / p;
        eps.factor = std::numeric_limits<double>::quiet_NaN();
        try {
          eps.v_star = choose_epsilon(sys.m_B(), p, lat, {1.0}).v_star;
        } catch (const std::domain_error&) {
          eps.v_star = std::numeric_limits<double>::quiet_NaN();
        }
      } else {
        eps = choose_epsilon(sys.m_B(), p, lat, c.vmin_ladder);
      }
    } catch (const std::exception& e) {
      out.skipped.push_back(tag + ": " + e.what());
      continue;
    }
    const FilterSpec filter{eps.epsilon, c.gamma, c.delta_gamma};
    std::map<Mode, double> delta_e;
    for (Mode mode : {Mode::p, Mode::q}) {
      if ((mode == Mode::p && !disp) || (mode == Mode::q && !qmode)) continue;
      try {
        auto rec = excitation_energy(sys, WavepacketSpec{p, c.kappa}, filter, eps, mode, backend);
        if (sys.has_dense()) {
          const Backend other = backend == Backend::dense ? Backend::chebyshev : Backend::dense;
          const auto alt = excitation_energy(sys, WavepacketSpec{p, c.kappa}, filter, eps, mode, other);
          rec.checks.push_back(equality_entry("oracle.numerator", alt.numerator, rec.numerator, kResolventTol));
          rec.checks.push_back(
              equality_entry("oracle.denominator", alt.denominator, rec.denominator, kResolventTol));
          rec.checks.push_back(equality_entry("oracle.delta_e", alt.delta_e, rec.delta_e, kResolventTol));
        }
        for (auto& e : rec.checks) corrupt_if_named(e, c.corrupt_entry);
        delta_e[mode] = rec.delta_e;
        out.records.push_back(std::move(rec));
      } catch (const std::exception& e) {
        BoundEntry bad = inconclusive_entry(std::string("delta_e.") + mode_name(mode), 0.0, e.what());
        out.extra.emplace_back(tag, bad);
      }
    }
    if (delta_e.count(Mode::p) && delta_e.count(Mode::q)) {
      const double dp = delta_e[Mode::p], dq = delta_e[Mode::q];
      out.trends.push_back({"delta_e.p_above_q", p, dq, dp, dp - dq > 1e-6, "strict, tolerance 1e-6"});
    }
    if (qmode) {
      const auto& grid = lat.momentum_grid();
      std::vector<Momentum> qs;
      for (const auto& k : grid) qs.push_back(filtered_momentum(lat, k, Mode::q));
      const auto m = sys.moments(EnergyFilter(filter), qs, backend);
      std::map<double, std::pair<double, double>> levels;  // ℰ_k -> (min den, max den)
      for (std::size_t i = 0; i < grid.size(); ++i) {
        TrendRow row{p, grid[i], lat.values(grid[i]), sys.dispersion(grid[i]),
                     sys.dispersion(lat.add(grid[i], lat.q_vector())), m[i].den};
        const double level = std::round(row.E_k * 1e9) / 1e9;
        auto it = levels.find(level);
        if (it == levels.end())
          levels[level] = {row.den, row.den};
        else
          it->second = {std::min(it->second.first, row.den), std::max(it->second.second, row.den)};
        out.qtrend.push_back(std::move(row));
      }
      // den_k must drop strictly as ℰ_k grows
      bool ok = true;
      double worst = std::numeric_limits<double>::infinity();
      for (auto it = levels.begin(); std::next(it) != levels.end(); ++it) {
        const double gap = it->second.first - std::next(it)->second.second;
        worst = std::min(worst, gap);
        ok = ok && gap > 1e-6;
      }
      out.trends.push_back({"qmode.den_grows_as_E_shrinks", p, -worst, 0.0, ok,
                            "smallest drop between adjacent ℰ_k levels, tolerance 1e-6"});
    }
  }
}

void run_locality_task(const ScanConfig& c, const std::vector<int>& extents, LocalityResult& out) {
  out.ran = true;
  const Lattice lat(LatticeSpec{extents, c.spin});
  out.lattice = lat.spec().id();
  const int x = c.locality_site;
  if (x < 0 || x >= static_cast<int>(lat.num_sites())) throw std::out_of_range("[locality] site outside lattice");
  const auto axis = static_cast<SpinAxis>(c.locality_axis);
  const EnergyFilter g(FilterSpec{c.locality_epsilon, c.locality_gamma, c.locality_delta_gamma});
  const auto ev = make_dense_evolution(lat, c.locality_B, c.dense_cap);
  const DenseOperator a = site_operator(lat, x, axis);
  auto& ck = out.checks;

  ck.push_back(upper_bound_entry("tau_identity", tau_identity_error(ev.spec, g, a), 0.0, kAlgebraicTol));

  const DenseOperator tau = tau_g_star(ev.spec, g, a);
  const auto X1 = ball(lat, x, 1.0);
  const DenseOperator pi = local_approximation(lat, tau, X1);
  ck.push_back(upper_bound_entry("pi.idempotent", op_norm(local_approximation(lat, pi, X1) - pi), 0.0, 1e-12));
  ck.push_back(upper_bound_entry("pi.contraction", op_norm(pi), op_norm(tau), 1e-12));
  ck.push_back(upper_bound_entry("pi.fixes_local", op_norm(local_approximation(lat, a, X1) - a), 0.0, 1e-12));

  const auto dd = delta_decomposition(ev, a, x, g, c.locality_m_max);
  out.delta_norms = dd.norms;
  out.delta_remainders = dd.remainders;
  out.ball_sizes = dd.ball_sizes;
  out.delta_fit = dd.fit;
  if (dd.ball_sizes.back() == lat.num_sites())
    ck.push_back(upper_bound_entry("delta.reconstruction", dd.reconstruction_error, 0.0, kAlgebraicTol));
  for (std::size_t M = 0; M < dd.norms.size(); ++M) {
    double tail = 0.0;
    for (std::size_t m = M + 1; m < dd.norms.size(); ++m) tail += dd.norms[m];
    if (dd.ball_sizes.back() == lat.num_sites())
      ck.push_back(upper_bound_entry("delta.telescoping", dd.remainders[M], tail, kAlgebraicTol,
                                     "M=" + std::to_string(M)));
  }

  out.lr = lr_commutator_profile(ev, x, axis, axis, c.locality_times);
  for (std::size_t i = 0; i < out.lr.times.size(); ++i) {
    const double t = out.lr.times[i];
    const auto& row = out.lr.max_norms[i];
    if (t != 0.0)
      ck.push_back(flag_entry("lr.decreasing", out.lr.decreasing_at(i), row.back(), row.front(), "t=" + num(t)));
    const auto& pe = out.lr.pi_errors[i];
    ck.push_back(flag_entry("pi.monotone", out.lr.pi_monotone_at(i), pe.back(), pe.front(), "t=" + num(t)));
    const double norm_t = op_norm(heisenberg_evolve(ev.spec, a, t));
    ck.push_back(equality_entry("evolution.unitary", norm_t, op_norm(a), kAlgebraicTol, "t=" + num(t)));
  }
  ck.push_back(flag_entry("lr.envelope", out.lr.fit.dominates && !out.lr.fit.degenerate, out.lr.fit.rate, 0.0,
                          "fitted rate and envelope dominance"));

  if (!c.continuity_ladder.empty()) {
    out.continuity = b_continuity(lat, a, g, c.continuity_ladder, c.continuity_factor, c.dense_cap);
    ck.push_back(upper_bound_entry("continuity.ratio", out.continuity->ratio, c.continuity_factor, 0.0));
  }
  for (auto& e : ck) corrupt_if_named(e, c.corrupt_entry);
}

std::string timestamp() {
  const auto now = std::chrono::system_clock::to_time_t(std::chrono::system_clock::now());
  std::tm tm{};
  gmtime_r(&now, &tm);
  char buf[32];
  std::strftime(buf, sizeof buf, "%Y-%m-%dT%H:%M:%SZ", &tm);
  return buf;
}

json fit_json(const DecayFit& f) {
  return {{"amplitude", f.amplitude}, {"rate", f.rate},         {"velocity", f.velocity},
          {"residual", f.residual},   {"used", f.used},         {"rate_positive", f.rate_positive},
          {"degenerate", f.degenerate}, {"dominates", f.dominates}};
}

}  // namespace

void run_pool(std::size_t n, int jobs, const std::function<bool(std::size_t)>& fn, bool fail_fast) {
  std::atomic<std::size_t> next{0};
  std::atomic<bool> stop{false};
  auto worker = [&] {
    for (;;) {
      if (stop.load()) return;
      const std::size_t i = next.fetch_add(1);
      if (i >= n) return;
      if (!fn(i) && fail_fast) stop.store(true);
    }
  };
  const auto threads = static_cast<std::size_t>(std::max(1, jobs));
  if (threads == 1 || n <= 1) {
    worker();
    return;
  }
  std::vector<std::thread> pool;
  for (std::size_t t = 0; t < std::min(threads, n); ++t) pool.emplace_back(worker);
  for (auto& t : pool) t.join();
}

ScanResult run_scan(ScanConfig c, const ScanOptions& opts) {
  if (opts.out_dir) c.output_dir = *opts.out_dir;
  if (opts.dense_cap) c.dense_cap = *opts.dense_cap;
  if (opts.jobs) c.jobs = *opts.jobs;
  if (opts.cache_dir) c.cache_dir = *opts.cache_dir;
  if (opts.groups) {
    std::set<std::string> keep;
    for (const auto& g : *opts.groups)
      if (c.checks.count(g)) keep.insert(g);
    c.checks = keep;
  }
  c.validate();
  const std::string hash = c.hash();
  const fs::path out_dir(c.output_dir);
  fs::create_directories(out_dir);
  std::unique_ptr<GroundStateCache> cache;
  if (!c.cache_dir.empty()) cache = std::make_unique<GroundStateCache>(c.cache_dir);

  std::vector<SystemTask> sys_tasks;
  if (c.enabled("bounds") || c.enabled("dispersion") || c.enabled("qmode"))
    for (const auto& ext : c.lattices)
      for (double B : c.B) sys_tasks.push_back({ext, B});
  std::vector<std::vector<int>> loc_tasks;
  if (c.enabled("locality"))
    for (const auto& ext : c.lattices)
      if (LatticeSpec{ext, c.spin}.hilbert_dim() <= std::min(c.locality_max_dim, c.dense_cap))
        loc_tasks.push_back(ext);

  std::vector<SystemResult> sys_results(sys_tasks.size());
  std::vector<LocalityResult> loc_results(loc_tasks.size());
  run_pool(
      sys_tasks.size() + loc_tasks.size(), c.jobs,
      [&](std::size_t i) {
        if (i < sys_tasks.size()) {
          auto& r = sys_results[i];
          try {
            run_system_task(c, sys_tasks[i], cache.get(), r);
          } catch (const std::exception& e) {
            r.ran = true;
            r.error = e.what();
          }
          return all_ok(r);
        }
        auto& r = loc_results[i - sys_tasks.size()];
        try {
          run_locality_task(c, loc_tasks[i - sys_tasks.size()], r);
        } catch (const std::exception& e) {
          r.ran = true;
          r.error = e.what();
        }
        return r.error.empty() &&
               std::all_of(r.checks.begin(), r.checks.end(), [](const BoundEntry& e) { return e.pass; });
      },
      opts.fail_fast);

  // ladder-level quantities per lattice
  std::map<std::string, std::vector<const SystemResult*>> by_lattice;
  std::vector<std::string> lattice_order;
  for (const auto& r : sys_results) {
    if (!r.ran || !r.error.empty()) continue;
    if (!by_lattice.count(r.lattice)) lattice_order.push_back(r.lattice);
    by_lattice[r.lattice].push_back(&r);
  }
  std::map<std::string, MsEstimate> ms;
  std::vector<std::pair<std::string, BoundEntry>> ladder_checks;
  for (const auto& id : lattice_order) {
    auto rs = by_lattice[id];
    std::sort(rs.begin(), rs.end(), [](auto* a, auto* b) { return a->B > b->B; });
    for (std::size_t i = 1; i < rs.size(); ++i)
      ladder_checks.emplace_back(id, upper_bound_entry("m_B.nondecreasing", rs[i]->m_B, rs[i - 1]->m_B,
                                                       kAlgebraicTol,
                                                       "B=" + num(rs[i]->B) + " vs " + num(rs[i - 1]->B)));
    for (std::size_t i = 2; i < rs.size(); ++i) {
      const double s_hi = (rs[i - 2]->E0 - rs[i - 1]->E0) / (rs[i - 2]->B - rs[i - 1]->B);
      const double s_lo = (rs[i - 1]->E0 - rs[i]->E0) / (rs[i - 1]->B - rs[i]->B);
      ladder_checks.emplace_back(
          id, upper_bound_entry("E0.concave", s_hi, s_lo, kAlgebraicTol, "B=" + num(rs[i - 1]->B)));
    }
    if (rs.size() >= 3) {
      std::vector<double> Bs, ms_vals;
      for (auto* r : rs) {
        Bs.push_back(r->B);
        ms_vals.push_back(r->m_B);
      }
      ms[id] = extrapolate_ms(Bs, ms_vals, 1);
    }
  }
  for (auto& [id, e] : ladder_checks) corrupt_if_named(e, c.corrupt_entry);

  Table gs_table({"config_hash", "lattice", "B", "E0", "gap", "gap_is_estimate", "m_B", "m_B_imag", "residual",
                  "dense_oracle"});
  Table bounds_table({"config_hash", "lattice", "B", "mode", "k_index", "k_values", "name", "lhs", "rhs", "margin",
                      "tolerance", "kind", "pass", "inconclusive", "note"});
  Table disp_table({"config_hash", "lattice", "B", "mode", "p", "kappa", "epsilon", "gamma", "delta_gamma",
                    "v_min", "v_star", "backend", "chebyshev_degree", "numerator", "denominator", "delta_e",
                    "numerator_bound", "c0", "v_max", "m_B", "m_s_estimate", "max_cross_term", "pass", "scope"});
  Table terms_table({"config_hash", "lattice", "B", "mode", "p", "k_index", "k_values", "fhat", "E_k", "E_kQ",
                     "num_k", "den_k", "D_k"});
  Table dchecks_table({"config_hash", "lattice", "B", "mode", "p", "name", "lhs", "rhs", "margin", "tolerance",
                       "pass", "note"});
  Table plot_table({"config_hash", "lattice", "B", "mode", "p", "delta_e", "epsilon", "gamma"});
  Table trend_rows({"config_hash", "lattice", "B", "p", "k_index", "k_values", "E_k", "E_kQ", "qmode_den_k"});
  Table trend_checks({"config_hash", "lattice", "B", "p", "name", "lhs", "rhs", "pass", "scope", "note"});
  Table ladder_table({"config_hash", "lattice", "name", "lhs", "rhs", "margin", "tolerance", "pass", "note"});
  Table lr_table({"config_hash", "lattice", "t", "distance", "norm", "envelope"});
  Table delta_table({"config_hash", "lattice", "m", "ball_size", "norm", "remainder", "envelope"});
  Table cont_table({"config_hash", "lattice", "B", "r"});
  Table lchecks_table({"config_hash", "lattice", "name", "lhs", "rhs", "margin", "tolerance", "pass", "note"});
  Table failures({"file", "config_hash", "lattice", "B", "key", "name", "lhs", "rhs", "margin", "note"});

  ScanResult result;
  result.out_dir = out_dir.string();
  std::vector<std::string> skipped;
  std::size_t not_run = 0;
  auto count = [&](const BoundEntry& e, const std::string& file, const std::string& lattice,
                   const std::string& B, const std::string& key) {
    ++result.checks;
    if (e.pass) return;
    ++result.failures;
    failures.add({file, hash, lattice, B, key, e.name, num(e.lhs), num(e.rhs), num(e.margin), e.note});
  };

  json lattices_json = json::array();
  json c0_json = json::array();
  json trends_json = json::array();
  for (std::size_t i = 0; i < sys_results.size(); ++i) {
    const auto& r = sys_results[i];
    const std::string B = num(sys_tasks[i].B);
    std::string lat_id = LatticeSpec{sys_tasks[i].extents, c.spin}.id();
    if (!r.ran) {
      ++not_run;
      continue;
    }
    if (!r.error.empty()) {
      ++result.task_errors;
      failures.add({"-", hash, lat_id, B, "task", "task.error", "nan", "nan", "nan", r.error});
      continue;
    }
    gs_table.add({hash, r.lattice, B, num(r.E0), num(r.gap), r.gap_is_estimate ? "1" : "0", num(r.m_B),
                  num(r.m_B_imag), num(r.residual), r.dense ? "1" : "0"});
    lattices_json.push_back({{"lattice", r.lattice}, {"B", sys_tasks[i].B}, {"E0", r.E0}, {"m_B", r.m_B},
                             {"gap", r.gap}, {"residual", r.residual},
                             {"matvecs", r.matvecs}});
    for (const auto& rep : r.bounds) {
      for (const auto& e : rep.entries) {
        bounds_table.add({hash, r.lattice, B, mode_name(rep.mode), index_str(rep.k), values_str(rep.k_values),
                          e.name, num(e.lhs), num(e.rhs), num(e.margin), num(e.tolerance),
                          e.kind == BoundKind::upper ? "upper" : "equality", e.pass ? "1" : "0",
                          e.inconclusive ? "1" : "0", e.note});
        count(e, "bounds.csv", r.lattice, B, std::string(mode_name(rep.mode)) + ":" + index_str(rep.k));
      }
    }
    for (auto rec : r.records) {
      if (ms.count(r.lattice)) rec.m_s_estimate = ms[r.lattice].intercept;
      const std::string mode = mode_name(rec.mode);
      disp_table.add({hash, r.lattice, B, mode, num(rec.p), num(rec.kappa), num(rec.epsilon),
                      num(rec.filter.gamma), num(rec.filter.delta_gamma), num(rec.v_min), num(rec.v_star),
                      backend_name(rec.backend), std::to_string(rec.chebyshev_degree), num(rec.numerator),
                      num(rec.denominator), num(rec.delta_e), num(rec.numerator_bound), num(rec.c0),
                      num(rec.v_max), num(rec.m_B), num(rec.m_s_estimate), num(rec.max_cross_term),
                      rec.all_pass() ? "1" : "0", "finite-volume"});
      plot_table.add({hash, r.lattice, B, mode, num(rec.p), num(rec.delta_e), num(rec.epsilon),
                      num(rec.filter.gamma)});
      for (const auto& t : rec.terms)
        terms_table.add({hash, r.lattice, B, mode, num(rec.p), index_str(t.k), values_str(t.k_values),
                         num(t.fhat), num(t.E_k), num(t.E_kQ), num(t.num_k), num(t.den_k), num(t.D_k)});
      for (const auto& e : rec.checks) {
        dchecks_table.add({hash, r.lattice, B, mode, num(rec.p), e.name, num(e.lhs), num(e.rhs), num(e.margin),
                           num(e.tolerance), e.pass ? "1" : "0", e.note});
        count(e, "dispersion_checks.csv", r.lattice, B, mode + ":p=" + num(rec.p));
      }
      c0_json.push_back({{"lattice", r.lattice}, {"B", sys_tasks[i].B}, {"mode", mode}, {"p", rec.p},
                         {"c0", std::isnan(rec.c0) ? json(nullptr) : json(rec.c0)},
                         {"v_max", std::isnan(rec.v_max) ? json(nullptr) : json(rec.v_max)},
                         {"note", std::isnan(rec.v_max) ? "c0 <= 0 at this size: v_max undefined" : ""}});
    }
    for (const auto& [key, e] : r.extra) {
      dchecks_table.add({hash, r.lattice, B, "-", "nan", e.name, num(e.lhs), num(e.rhs), num(e.margin),
                         num(e.tolerance), e.pass ? "1" : "0", key + ": " + e.note});
      count(e, "dispersion_checks.csv", r.lattice, B, key);
    }
    for (const auto& t : r.qtrend)
      trend_rows.add({hash, r.lattice, B, num(t.p), index_str(t.k), values_str(t.k_values), num(t.E_k),
                      num(t.E_kQ), num(t.den)});
    for (const auto& t : r.trends) {
      trend_checks.add({hash, r.lattice, B, num(t.p), t.name, num(t.lhs), num(t.rhs), t.pass ? "1" : "0",
                        "finite-size trend", t.note});
      trends_json.push_back({{"lattice", r.lattice}, {"B", sys_tasks[i].B}, {"p", t.p}, {"name", t.name},
                             {"pass", t.pass}});
    }
    for (const auto& s : r.skipped) skipped.push_back(s);
  }
  for (const auto& [id, e] : ladder_checks) {
    ladder_table.add({hash, id, e.name, num(e.lhs), num(e.rhs), num(e.margin), num(e.tolerance),
                      e.pass ? "1" : "0", e.note});
    count(e, "ladder_checks.csv", id, "-", "ladder");
  }

  json locality_json = json::array();
  for (std::size_t i = 0; i < loc_results.size(); ++i) {
    const auto& r = loc_results[i];
    const std::string lat_id = LatticeSpec{loc_tasks[i], c.spin}.id();
    if (!r.ran) {
      ++not_run;
      continue;
    }
    if (!r.error.empty()) {
      ++result.task_errors;
      failures.add({"-", hash, lat_id, "-", "locality", "task.error", "nan", "nan", "nan", r.error});
      continue;
    }
    for (const auto& s : r.lr.fit.samples)
      lr_table.add({hash, lat_id, num(s.t), num(s.x), num(s.norm), num(s.envelope)});
    for (std::size_t m = 0; m < r.delta_norms.size(); ++m)
      delta_table.add({hash, lat_id, std::to_string(m), std::to_string(r.ball_sizes[m]), num(r.delta_norms[m]),
                       num(r.delta_remainders[m]), num(r.delta_fit.samples[m].envelope)});
    if (r.continuity)
      for (std::size_t j = 0; j < r.continuity->B.size(); ++j)
        cont_table.add({hash, lat_id, num(r.continuity->B[j]), num(r.continuity->r[j])});
    for (const auto& e : r.checks) {
      lchecks_table.add({hash, lat_id, e.name, num(e.lhs), num(e.rhs), num(e.margin), num(e.tolerance),
                         e.pass ? "1" : "0", e.note});
      count(e, "locality_checks.csv", lat_id, num(c.locality_B), "locality");
    }
    json lj = {{"lattice", lat_id},
               {"B", c.locality_B},
               {"lieb_robinson_fit", fit_json(r.lr.fit)},
               {"delta_fit", fit_json(r.delta_fit)},
               {"note", "fitted constants are descriptive; no reference values exist"}};
    if (r.continuity)
      lj["continuity"] = {{"ratio", r.continuity->ratio},
                          {"constant", r.continuity->constant},
                          {"factor", r.continuity->factor}};
    locality_json.push_back(lj);
  }

  gs_table.write(out_dir / "ground_states.csv");
  if (c.enabled("bounds")) bounds_table.write(out_dir / "bounds.csv");
  if (c.enabled("dispersion") || c.enabled("qmode")) {
    disp_table.write(out_dir / "dispersion.csv");
    terms_table.write(out_dir / "dispersion_terms.csv");
    dchecks_table.write(out_dir / "dispersion_checks.csv");
    plot_table.write(out_dir / "plot_dispersion.csv");
    trend_checks.write(out_dir / "trends.csv");
  }
  if (c.enabled("qmode")) trend_rows.write(out_dir / "qmode_trend.csv");
  ladder_table.write(out_dir / "ladder_checks.csv");
  if (c.enabled("locality")) {
    lr_table.write(out_dir / "locality_lr.csv");
    delta_table.write(out_dir / "locality_delta.csv");
    cont_table.write(out_dir / "locality_continuity.csv");
    lchecks_table.write(out_dir / "locality_checks.csv");
    std::ofstream(out_dir / "locality_fits.json") << locality_json.dump(2) << "\n";
  }
  failures.write(out_dir / "failures.csv");

  result.skipped = skipped.size();
  const bool pass = result.failures == 0 && result.task_errors == 0 && not_run == 0;
  result.exit_code = pass ? 0 : 1;

  json ms_json = json::array();
  for (const auto& [id, est] : ms)
    ms_json.push_back({{"lattice", id},
                       {"intercept", est.intercept},
                       {"coefficients", est.coefficients},
                       {"residuals", est.residuals},
                       {"rms_residual", est.rms_residual},
                       {"label", est.label}});
  json manifest = {
      {"tool", "ngdisp"},
      {"version", kVersion},
      {"command", opts.command},
      {"generated_at", timestamp()},
      {"config_hash", hash},
      {"config", c.canonical()},
      {"groups", std::vector<std::string>(c.checks.begin(), c.checks.end())},
      {"pass", pass},
      {"summary",
       {{"checks", result.checks},
        {"failures", result.failures},
        {"task_errors", result.task_errors},
        {"tasks_not_run", not_run},
        {"skipped", skipped.size()}}},
      {"skipped", skipped},
      {"systems", lattices_json},
      {"c0_estimates", c0_json},
      {"ms_estimates", ms_json},
      {"trends", trends_json},
      {"locality", locality_json},
      {"scope",
       {{"exact_finite_volume", "bounds.csv, dispersion_checks.csv, ladder_checks.csv, locality_checks.csv"},
        {"trend_only", "trends.csv, m_s estimates, fitted decay constants"}}},
  };
  std::ofstream(out_dir / "manifest.json") << manifest.dump(2) << "\n";
  return result;
}

std::string render_report(const std::string& out_dir) {
  const fs::path dir(out_dir);
  std::ifstream in(dir / "manifest.json");
  if (!in) throw std::runtime_error("no manifest.json in " + out_dir);
  const json m = json::parse(in);
  std::ostringstream os;
  const auto& s = m.at("summary");
  os << "ngdisp " << m.value("version", "?") << "  command=" << m.value("command", "?")
     << "  config=" << m.value("config_hash", "?") << "\n";
  os << "overall: " << (m.value("pass", false) ? "PASS" : "FAIL") << "  checks=" << s.value("checks", 0)
     << " failures=" << s.value("failures", 0) << " task_errors=" << s.value("task_errors", 0)
     << " skipped=" << s.value("skipped", 0) << "\n";
  for (const auto& sys : m.value("systems", json::array()))
    os << "  " << sys.value("lattice", "") << " B=" << sys.value("B", 0.0) << " E0=" << sys.value("E0", 0.0)
       << " m_B=" << sys.value("m_B", 0.0) << "\n";
  for (const auto& c0 : m.value("c0_estimates", json::array())) {
    os << "  c0 " << c0.value("lattice", "") << " B=" << c0.value("B", 0.0) << " mode=" << c0.value("mode", "")
       << " c0=" << (c0["c0"].is_null() ? "n/a" : c0["c0"].dump())
       << " v_max=" << (c0["v_max"].is_null() ? "n/a" : c0["v_max"].dump()) << "\n";
  }
  for (const auto& t : m.value("trends", json::array()))
    os << "  trend " << t.value("name", "") << " " << t.value("lattice", "") << " B=" << t.value("B", 0.0)
       << " : " << (t.value("pass", false) ? "holds" : "does not hold") << "\n";
  std::ifstream f(dir / "failures.csv");
  std::string line;
  bool header = true;
  while (std::getline(f, line)) {
    if (header) {
      header = false;
      continue;
    }
    os << "  failed: " << line << "\n";
  }
  return os.str();
}

}  // namespace ngdisp
