#include "ngdisp/ng_analysis.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <iomanip>
#include <sstream>
#include <stdexcept>

namespace ngdisp {

namespace {

constexpr cplx kI(0.0, 1.0);

std::string momentum_key(const Momentum& k) {
  std::string s;
  for (int i : k.index) s += std::to_string(i) + ",";
  return s;
}

std::string filter_key(const FilterSpec& f, Backend b) {
  std::ostringstream os;
  os << std::hex << std::bit_cast<std::uint64_t>(f.epsilon) << ":" << std::bit_cast<std::uint64_t>(f.gamma)
     << ":" << std::bit_cast<std::uint64_t>(f.delta_gamma) << ":" << static_cast<int>(b) << ":";
  return os.str();
}

}  // namespace

BoundEntry upper_bound_entry(std::string name, double lhs, double rhs, double tol, std::string note) {
  BoundEntry e;
  e.name = std::move(name);
  e.lhs = lhs;
  e.rhs = rhs;
  e.margin = rhs - lhs;
  e.tolerance = tol;
  e.kind = BoundKind::upper;
  e.pass = e.margin >= -tol;
  e.note = std::move(note);
  return e;
}

BoundEntry equality_entry(std::string name, double lhs, double rhs, double tol, std::string note) {
  BoundEntry e;
  e.name = std::move(name);
  e.lhs = lhs;
  e.rhs = rhs;
  e.margin = rhs - lhs;
  e.tolerance = tol;
  e.kind = BoundKind::equality;
  e.pass = std::abs(e.margin) <= tol;
  e.note = std::move(note);
  return e;
}

BoundEntry inconclusive_entry(std::string name, double rhs, std::string note) {
  BoundEntry e;
  e.name = std::move(name);
  e.lhs = std::numeric_limits<double>::quiet_NaN();
  e.rhs = rhs;
  e.margin = std::numeric_limits<double>::quiet_NaN();
  e.pass = false;
  e.inconclusive = true;
  e.note = "inconclusive: " + std::move(note);
  return e;
}

const char* mode_name(Mode m) { return m == Mode::p ? "p" : "q"; }
const char* backend_name(Backend b) { return b == Backend::dense ? "dense" : "chebyshev"; }

bool BoundReport::all_pass() const {
  return std::all_of(entries.begin(), entries.end(), [](const BoundEntry& e) { return e.pass; });
}

bool DispersionRecord::all_pass() const {
  return std::all_of(checks.begin(), checks.end(), [](const BoundEntry& e) { return e.pass; });
}

System::System(const Lattice& lattice, double B, SystemOptions opts)
    : lattice_(lattice), B_(B), opts_(std::move(opts)) {
  H_ = build_hamiltonian(lattice_, B_);
  if (opts_.use_dense && H_.dim() <= opts_.dense_cap)
    dense_ = std::make_unique<SpectralDecomposition>(dense_spectrum(H_, opts_.dense_cap));
  if (opts_.cache != nullptr)
    gs_ = opts_.cache->get_or_compute(lattice_, H_, B_, opts_.lanczos);
  else
    gs_ = ground_state(H_, lattice_, B_, opts_.lanczos);
  gs_.lattice_id = lattice_.spec().id();
  m_B_ = staggered_magnetization(lattice_, gs_, &m_B_imag_);
}

const SpectralDecomposition& System::dense() const {
  if (!dense_) throw DenseCapError("no dense oracle for " + lattice_.spec().id());
  return *dense_;
}

const SpectralInterval& System::interval() const {
  std::call_once(interval_once_, [this] {
    auto iv = estimate_spectral_interval(H_, 0.05, 80);
    const double width = iv.hi - iv.lo;
    iv.lo = std::min(iv.lo, gs_.E0 - 0.05 * width);
    interval_ = iv;
  });
  return interval_;
}

const Vector& System::spin_state(const Momentum& k, SpinAxis axis) const {
  const auto key = std::make_pair(k.index, static_cast<int>(axis));
  {
    std::lock_guard lock(memo_mutex_);
    auto it = states_.find(key);
    if (it != states_.end()) return *it->second;
  }
  auto v = std::make_unique<Vector>(apply_fourier_spin(lattice_, k, axis, gs_.phi0));
  std::lock_guard lock(memo_mutex_);
  auto [it, inserted] = states_.try_emplace(key, std::move(v));
  return *it->second;
}

const Vector& System::spectral_coefficients(const Momentum& k, SpinAxis axis) const {
  const auto key = std::make_pair(k.index, static_cast<int>(axis));
  {
    std::lock_guard lock(memo_mutex_);
    auto it = coeffs_.find(key);
    if (it != coeffs_.end()) return *it->second;
  }
  auto c = std::make_unique<Vector>(dense().vectors.adjoint() * spin_state(k, axis));
  std::lock_guard lock(memo_mutex_);
  auto [it, inserted] = coeffs_.try_emplace(key, std::move(c));
  return *it->second;
}

Eigen::VectorXd System::excitation_energies() const {
  return dense().values.array() - gs_.E0;
}

double System::dispersion(const Momentum& q) const {
  return dispersion_symbol(lattice_.values(q), lattice_.dimension());
}

double System::double_commutator_bound(const Momentum& q) const {
  const double S = lattice_.spin();
  return 4.0 * S * S * dispersion(q) + B_ * S;
}

std::vector<FilteredMoments> System::moments(const EnergyFilter& g, const std::vector<Momentum>& qs,
                                             Backend backend) const {
  const std::string prefix = filter_key(g.spec(), backend);
  std::vector<FilteredMoments> out(qs.size());
  std::vector<std::size_t> missing;
  {
    std::lock_guard lock(memo_mutex_);
    for (std::size_t i = 0; i < qs.size(); ++i) {
      auto it = moments_.find(prefix + momentum_key(qs[i]));
      if (it != moments_.end())
        out[i] = it->second;
      else
        missing.push_back(i);
    }
  }
  // duplicates within one request are computed once
  std::vector<std::size_t> unique;
  for (std::size_t i : missing) {
    bool dup = false;
    for (std::size_t u : unique) dup = dup || qs[u] == qs[i];
    if (!dup) unique.push_back(i);
  }
  std::map<std::string, FilteredMoments> fresh;

  if (backend == Backend::dense && !unique.empty()) {
    const Eigen::VectorXd w = excitation_energies();
    for (std::size_t i : unique) {
      const Vector& a = spectral_coefficients(qs[i], SpinAxis::two);
      FilteredMoments m;
      m.backend = Backend::dense;
      for (Eigen::Index n = 0; n < a.size(); ++n) {
        const double gv = g(w[n]);
        const double weight = gv * gv * std::norm(a[n]);
        m.den += weight;
        m.num += weight * w[n];
      }
      fresh[momentum_key(qs[i])] = m;
    }
  } else if (!unique.empty()) {
    const auto expansion =
        chebyshev_expand([&g](double E) { return g(E); }, interval(), gs_.E0, opts_.chebyshev);
    const std::size_t bs = static_cast<std::size_t>(std::max(1, opts_.block_size));
    for (std::size_t start = 0; start < unique.size(); start += bs) {
      const std::size_t count = std::min(bs, unique.size() - start);
      Block v(static_cast<Eigen::Index>(H_.dim()), static_cast<Eigen::Index>(count));
      for (std::size_t c = 0; c < count; ++c)
        v.col(static_cast<Eigen::Index>(c)) = spin_state(qs[unique[start + c]], SpinAxis::two);
      const Block w = apply_expansion(H_, expansion, v);
      Block hw;
      H_.apply_block(w, hw);
      for (std::size_t c = 0; c < count; ++c) {
        const auto col = static_cast<Eigen::Index>(c);
        const cplx den = w.col(col).dot(w.col(col));
        const cplx num = w.col(col).dot(hw.col(col)) - gs_.E0 * den;
        FilteredMoments m;
        m.backend = Backend::chebyshev;
        m.degree = expansion.degree();
        m.den = den.real();
        m.num = num.real();
        m.imag = std::max(std::abs(den.imag()), std::abs(num.imag()));
        fresh[momentum_key(qs[unique[start + c]])] = m;
      }
    }
  }

  std::lock_guard lock(memo_mutex_);
  for (const auto& [key, m] : fresh) moments_[prefix + key] = m;
  for (std::size_t i : missing) out[i] = moments_.at(prefix + momentum_key(qs[i]));
  return out;
}

double staggered_magnetization(const Lattice& lattice, const GroundState& gs, double* imag) {
  const Vector v = apply_fourier_spin(lattice, lattice.q_vector(), SpinAxis::one, gs.phi0);
  const cplx m = gs.phi0.dot(v) / std::sqrt(static_cast<double>(lattice.num_sites()));
  if (imag != nullptr) *imag = m.imag();
  return m.real();
}

Momentum filtered_momentum(const Lattice& lattice, const Momentum& k, Mode mode) {
  return mode == Mode::p ? k : lattice.add(k, lattice.q_vector());
}

BoundEntry sum_rule_check(const System& sys, const Momentum& k, Mode mode) {
  const Lattice& lat = sys.lattice();
  const Momentum q = filtered_momentum(lat, k, mode);
  const Momentum qc = lat.add(q, lat.q_vector());
  const Vector& a = sys.spin_state(q, SpinAxis::two);
  const Vector& c = sys.spin_state(qc, SpinAxis::three);
  const Vector& a_neg = sys.spin_state(lat.negate(q), SpinAxis::two);
  const Vector& c_neg = sys.spin_state(lat.negate(qc), SpinAxis::three);
  const cplx value = -kI * (a.dot(c) - c_neg.dot(a_neg));
  std::string note;
  BoundEntry e = equality_entry("sum_rule", value.real(), sys.m_B(), kAlgebraicTol);
  if (std::abs(value.imag()) > 1e-12) {
    std::ostringstream os;
    os << "imaginary part " << value.imag();
    e.note = os.str();
    e.pass = false;
  }
  return e;
}

BoundEntry double_commutator(const System& sys, const Momentum& q, SpinAxis axis) {
  if (axis == SpinAxis::one) throw std::invalid_argument("double_commutator needs axis 2 or 3");
  const Lattice& lat = sys.lattice();
  const Vector& phi = sys.gs().phi0;
  const Vector& u = sys.spin_state(q, axis);
  const Vector& u_adj = sys.spin_state(lat.negate(q), axis);
  const Vector h = sys.H() * phi;
  const Vector a_h = apply_fourier_spin(lat, q, axis, h);
  const Vector adj_h = apply_fourier_spin(lat, lat.negate(q), axis, h);
  // <[A†,[H,A]]> = <Au,HAu> - <Au, A H phi> - <A† H phi, A† phi> + <A† phi, H A† phi>
  const cplx lhs = u.dot(sys.H() * u) - u.dot(a_h) - adj_h.dot(u_adj) + u_adj.dot(sys.H() * u_adj);
  BoundEntry e = upper_bound_entry("double_commutator", lhs.real(), sys.double_commutator_bound(q),
                                   kAlgebraicTol);
  if (std::abs(lhs.imag()) > 1e-12) {
    std::ostringstream os;
    os << "imaginary part " << lhs.imag();
    e.note = os.str();
    e.pass = false;
  }
  return e;
}

std::vector<BoundEntry> irb_susceptibility(const System& sys, const Momentum& q, SpinAxis axis) {
  if (axis == SpinAxis::one) throw std::invalid_argument("irb_susceptibility needs axis 2 or 3");
  const Lattice& lat = sys.lattice();
  const Momentum qq = lat.add(q, lat.q_vector());
  const double eq = sys.dispersion(qq);
  if (eq == 0.0) throw std::invalid_argument("infrared bound is infinite at k = Q");
  const double rhs = 1.0 / (2.0 * eq);
  std::vector<BoundEntry> out;
  const Vector& v = sys.spin_state(q, axis);
  double lhs = 0.0;
  try {
    const auto sol = deflated_solve(sys.H(), sys.gs(), v, sys.options().solve);
    lhs = v.dot(sol.x).real();
  } catch (const SolverBreakdown& err) {
    out.push_back(inconclusive_entry("irb", rhs, err.what()));
    return out;
  }
  out.push_back(upper_bound_entry("irb", lhs, rhs, kResolventTol,
                                  sys.B() > 0.0 ? std::string{} : std::string{"B = 0"}));
  out.push_back(upper_bound_entry("irb.nonnegative", -lhs, 0.0, kResolventTol));
  if (sys.has_dense()) {
    const Vector& a = sys.spectral_coefficients(q, axis);
    const Eigen::VectorXd w = sys.excitation_energies();
    double oracle = 0.0;
    for (Eigen::Index n = 1; n < a.size(); ++n) oracle += std::norm(a[n]) / w[n];
    out.push_back(equality_entry("irb.oracle", lhs, oracle, kResolventTol));
  }
  return out;
}

std::vector<FilteredMoments> filtered_moments(const System& sys, const EnergyFilter& g,
                                              const std::vector<Momentum>& qs, Backend backend) {
  return sys.moments(g, qs, backend);
}

EpsilonChoice choose_epsilon(double m_B, double p, const Lattice& lattice, const std::vector<double>& ladder) {
  if (!(m_B > 0.0)) throw std::domain_error("choose_epsilon needs m_B > 0");
  if (!(p > 0.0)) throw std::domain_error("choose_epsilon needs |p| > 0");
  const auto ann = annulus_momenta(lattice, p);
  if (ann.empty()) throw std::domain_error("annulus holds no grid momentum");
  const int d = lattice.dimension();
  const Momentum Q = lattice.q_vector();
  std::vector<double> roots;
  for (const auto& k : ann) {
    const double ek = dispersion_symbol(lattice.values(k), d);
    const double ekq = dispersion_symbol(lattice.values(lattice.add(k, Q)), d);
    if (!(ek > 0.0 && ekq > 0.0)) throw std::domain_error("annulus touches a momentum with vanishing dispersion");
    roots.push_back(std::sqrt(ek * ekq));
  }
  const double v_star = m_B * *std::min_element(roots.begin(), roots.end()) / (2.0 * p);
  std::vector<double> sorted = ladder;
  std::sort(sorted.begin(), sorted.end(), std::greater<>());
  for (double f : sorted) {
    if (!(f > 0.0)) continue;
    const double v = f * v_star;
    const bool ok = std::all_of(roots.begin(), roots.end(),
                                [&](double r) { return m_B / 2.0 - v * p / r > 0.0; });
    if (ok) return EpsilonChoice{v, v * p, v_star, f};
  }
  throw std::domain_error("no v_min on the ladder keeps the bracket positive");
}

double denominator_bound_value(const System& sys, const Momentum& q, double v_min, double p,
                               const FilterSpec& filter) {
  const Lattice& lat = sys.lattice();
  const double S = sys.S();
  const double eq = sys.dispersion(q);
  const double eqq = sys.dispersion(lat.add(q, lat.q_vector()));
  const double bracket = sys.m_B() / 2.0 - v_min * p / std::sqrt(eqq * eq);
  return std::sqrt(2.0 * eq / (4.0 * S * S * eqq + sys.B() * S)) * bracket * bracket -
         sys.double_commutator_bound(q) / (filter.gamma - filter.delta_gamma);
}

std::vector<BoundEntry> denominator_lower_bound(const System& sys, const Momentum& k, Mode mode,
                                                const FilterSpec& filter, double v_min, double p,
                                                double den_k) {
  const Lattice& lat = sys.lattice();
  const Momentum q = filtered_momentum(lat, k, mode);
  const Momentum qc = lat.add(q, lat.q_vector());
  const double eq = sys.dispersion(q);
  const double eqq = sys.dispersion(qc);
  if (!(eq > 0.0 && eqq > 0.0)) throw std::invalid_argument("window chain needs ℰ_k > 0 and ℰ_{k+Q} > 0");
  const double eps = filter.epsilon;
  const double gap_top = filter.gamma - filter.delta_gamma;
  const double dc_a = sys.double_commutator_bound(q);
  const double dc_c = sys.double_commutator_bound(qc);
  const double small_rhs = eps / std::sqrt(eq * eqq);
  const double quarter = std::pow(dc_c / (2.0 * eq), 0.25);
  const double large_rhs = quarter * std::sqrt(den_k + dc_a / gap_top);

  std::vector<BoundEntry> out;
  const double D = denominator_bound_value(sys, q, v_min, p, filter);
  out.push_back(upper_bound_entry("denominator_lower_bound", D, den_k, kResolventTol,
                                  D <= 0.0 ? "bound not binding" : ""));
  out.push_back(upper_bound_entry("sum_rule_half", sys.m_B() / 2.0 - small_rhs, large_rhs, kResolventTol));

  // commutator split through 1 - P0 (sparse-capable)
  const Vector& phi = sys.gs().phi0;
  const Vector& a = sys.spin_state(q, SpinAxis::two);
  const Vector& c = sys.spin_state(qc, SpinAxis::three);
  const Vector& a_neg = sys.spin_state(lat.negate(q), SpinAxis::two);
  const Vector& c_neg = sys.spin_state(lat.negate(qc), SpinAxis::three);
  const cplx t1 = a.dot(c) - a.dot(phi) * phi.dot(c);
  const cplx t2 = c_neg.dot(a_neg) - c_neg.dot(phi) * phi.dot(a_neg);
  out.push_back(equality_entry("msexpcommu", (-kI * (t1 - t2)).real(), sys.m_B(), kAlgebraicTol));

  if (!sys.has_dense()) return out;

  const Vector& al = sys.spectral_coefficients(q, SpinAxis::two);
  const Vector& be = sys.spectral_coefficients(qc, SpinAxis::three);
  const Eigen::VectorXd w = sys.excitation_energies();
  const EnergyFilter g(filter);
  cplx s_small = 0.0, s_large = 0.0;
  double pa_small = 0.0, pb_small = 0.0, pa_large = 0.0, pb_large = 0.0;
  double chi_a = 0.0, chi_b = 0.0, h_a = 0.0, h_b = 0.0, tail_a = 0.0, den_dense = 0.0;
  for (Eigen::Index n = 1; n < al.size(); ++n) {
    const double na = std::norm(al[n]);
    const double nb = std::norm(be[n]);
    const cplx ab = std::conj(al[n]) * be[n];
    chi_a += na / w[n];
    chi_b += nb / w[n];
    h_a += na * w[n];
    h_b += nb * w[n];
    const double gv = g(w[n]);
    den_dense += gv * gv * na;
    if (w[n] <= 2.0 * eps) {
      s_small += ab;
      pa_small += na;
      pb_small += nb;
    } else {
      s_large += ab;
      pa_large += na;
      pb_large += nb;
    }
    if (w[n] >= gap_top) tail_a += na;
  }
  const double tol = kResolventTol;
  const double small_schwarz = std::sqrt(pa_small) * std::sqrt(pb_small);
  const double small_resolvent = 2.0 * eps * std::sqrt(chi_a) * std::sqrt(chi_b);
  out.push_back(upper_bound_entry("window_small.schwarz", std::abs(s_small), small_schwarz, tol));
  out.push_back(upper_bound_entry("window_small.resolvent", small_schwarz, small_resolvent, tol));
  out.push_back(upper_bound_entry("window_small.irb", small_resolvent, small_rhs, tol));
  out.push_back(upper_bound_entry("window_small", std::abs(s_small), small_rhs, tol));

  const double large_schwarz = std::sqrt(pa_large) * std::sqrt(pb_large);
  const double resolvent_mid = std::sqrt(h_b * chi_b);
  const double resolvent_rhs = std::sqrt(dc_c / (2.0 * eq));
  out.push_back(upper_bound_entry("window_large.schwarz", std::abs(s_large), large_schwarz, tol));
  out.push_back(upper_bound_entry("window_large.filter", pa_large, den_dense + tail_a, tol));
  out.push_back(upper_bound_entry("window_large.tail", tail_a, h_a / gap_top, tol));
  out.push_back(upper_bound_entry("window_large.energy", h_a, dc_a, tol));
  out.push_back(upper_bound_entry("window_large.resolvent", pb_large, resolvent_mid, tol));
  out.push_back(upper_bound_entry("window_large.resolvent_bound", resolvent_mid, resolvent_rhs, tol));
  out.push_back(upper_bound_entry("window_large", std::abs(s_large), large_rhs, tol));
  out.push_back(upper_bound_entry("msexpcommu1b", std::abs(s_small + s_large), small_rhs + large_rhs, tol));
  return out;
}

DispersionRecord excitation_energy(const System& sys, const WavepacketSpec& wavepacket, const FilterSpec& filter,
                                   const EpsilonChoice& eps, Mode mode, Backend backend) {
  const Lattice& lat = sys.lattice();
  const EnergyFilter g(filter);
  const auto fhat = build_f(wavepacket, lat);
  const auto& grid = lat.momentum_grid();
  const double N = static_cast<double>(lat.num_sites());
  const double S = sys.S();

  std::vector<Momentum> support_q;
  std::vector<std::size_t> support_idx;
  for (std::size_t i = 0; i < grid.size(); ++i) {
    if (fhat[i] != 0.0) {
      support_idx.push_back(i);
      support_q.push_back(filtered_momentum(lat, grid[i], mode));
    }
  }
  const auto moments = sys.moments(g, support_q, backend);

  DispersionRecord r;
  r.lattice_id = lat.spec().id();
  r.B = sys.B();
  r.p = wavepacket.p;
  r.kappa = wavepacket.kappa;
  r.mode = mode;
  r.filter = filter;
  r.backend = backend;
  r.epsilon = eps.epsilon;
  r.v_min = eps.v_min;
  r.v_star = eps.v_star;
  r.m_B = sys.m_B();

  double max_imag = 0.0;
  double worst_low = -std::numeric_limits<double>::infinity();
  double worst_high = -std::numeric_limits<double>::infinity();
  double c0 = std::numeric_limits<double>::infinity();
  std::size_t s = 0;
  for (std::size_t i = 0; i < grid.size(); ++i) {
    KTerm t;
    t.k = grid[i];
    t.k_values = lat.values(grid[i]);
    t.fhat = fhat[i];
    const Momentum q = filtered_momentum(lat, grid[i], mode);
    t.E_k = sys.dispersion(grid[i]);
    t.E_kQ = sys.dispersion(lat.add(grid[i], lat.q_vector()));
    if (s < support_idx.size() && support_idx[s] == i) {
      const auto& m = moments[s];
      t.num_k = m.num;
      t.den_k = m.den;
      r.chebyshev_degree = std::max(r.chebyshev_degree, m.degree);
      max_imag = std::max(max_imag, m.imag);
      const double w2 = t.fhat * t.fhat;
      r.numerator += w2 * t.num_k;
      r.denominator += w2 * t.den_k;
      r.numerator_bound += w2 * sys.double_commutator_bound(q);
      worst_low = std::max(worst_low, filter.epsilon * t.den_k - t.num_k);
      worst_high = std::max(worst_high, t.num_k - filter.gamma * t.den_k);
      if (t.E_k > 0.0 && t.E_kQ > 0.0) {
        t.D_k = denominator_bound_value(sys, q, eps.v_min, wavepacket.p, filter);
        c0 = std::min(c0, t.D_k / wavepacket.p);
      }
      ++s;
    }
    r.terms.push_back(std::move(t));
  }
  r.numerator /= N;
  r.denominator /= N;
  r.numerator_bound /= N;
  if (!(r.denominator > 1e-300)) {
    std::ostringstream os;
    os << "filter window empty for this wavepacket; den_k:";
    for (const auto& t : r.terms)
      if (t.fhat != 0.0) os << " [" << momentum_key(t.k) << "]=" << t.den_k;
    throw std::runtime_error(os.str());
  }
  r.delta_e = r.numerator / r.denominator;
  if (std::isfinite(c0)) {
    r.c0 = c0;
    if (c0 > 0.0) r.v_max = 2.0 * S * S / c0;
  }

  const double tol = kResolventTol;
  r.checks.push_back(upper_bound_entry("delta_e.lower", filter.epsilon, r.delta_e, tol));
  r.checks.push_back(upper_bound_entry("delta_e.vmin", eps.v_min * wavepacket.p, r.delta_e, tol));
  r.checks.push_back(upper_bound_entry("delta_e.upper", r.delta_e, filter.gamma, tol));
  r.checks.push_back(upper_bound_entry("numerator_bound", r.numerator, r.numerator_bound, tol));
  r.checks.push_back(upper_bound_entry("denominator.nonnegative", -r.denominator, 0.0, tol));
  r.checks.push_back(upper_bound_entry("num_k.window_low", worst_low, 0.0, tol));
  r.checks.push_back(upper_bound_entry("num_k.window_high", worst_high, 0.0, tol));
  r.checks.push_back(upper_bound_entry("moments.imag", max_imag, 0.0, 1e-12));

  if (sys.has_dense()) {
    const Eigen::VectorXd w = sys.excitation_energies();
    double cross = 0.0;
    for (std::size_t i = 0; i < support_q.size(); ++i) {
      for (std::size_t j = 0; j < support_q.size(); ++j) {
        if (i == j) continue;
        const Vector& ai = sys.spectral_coefficients(support_q[i], SpinAxis::two);
        const Vector& aj = sys.spectral_coefficients(support_q[j], SpinAxis::two);
        cplx overlap = 0.0, energy = 0.0;
        for (Eigen::Index n = 0; n < ai.size(); ++n) {
          const double gv = g(w[n]);
          const cplx term = std::conj(aj[n]) * ai[n] * gv * gv;
          overlap += term;
          energy += term * w[n];
        }
        cross = std::max({cross, std::abs(overlap), std::abs(energy)});
      }
    }
    r.max_cross_term = cross;
    r.checks.push_back(upper_bound_entry("cross_momentum", cross, 0.0, kAlgebraicTol));
  }
  return r;
}

DispersionRecord q_mode_analysis(const System& sys, const WavepacketSpec& wavepacket, const FilterSpec& filter,
                                 const EpsilonChoice& eps, Backend backend) {
  return excitation_energy(sys, wavepacket, filter, eps, Mode::q, backend);
}

std::vector<BoundReport> run_bounds_suite(const System& sys, const BoundsSuiteOptions& opts) {
  const Lattice& lat = sys.lattice();
  const Momentum Q = lat.q_vector();
  const Backend backend = sys.has_dense() && opts.prefer_dense ? Backend::dense : Backend::chebyshev;
  std::vector<BoundReport> out;
  for (const auto& k : lat.momentum_grid()) {
    for (Mode mode : {Mode::p, Mode::q}) {
      BoundReport rep;
      rep.lattice_id = lat.spec().id();
      rep.B = sys.B();
      rep.mode = mode;
      rep.k = k;
      rep.k_values = lat.values(k);
      rep.entries.push_back(sum_rule_check(sys, k, mode));
      if (mode == Mode::p) {
        rep.entries.push_back(upper_bound_entry("m_B.imag", std::abs(sys.m_B_imag()), 0.0, 1e-12));
        for (SpinAxis axis : {SpinAxis::two, SpinAxis::three}) {
          auto dc = double_commutator(sys, k, axis);
          dc.name += axis == SpinAxis::two ? ".2" : ".3";
          rep.entries.push_back(dc);
          if (k == Q) continue;
          for (auto e : irb_susceptibility(sys, k, axis)) {
            e.name += axis == SpinAxis::two ? ".2" : ".3";
            rep.entries.push_back(e);
          }
        }
      }
      const Momentum q = filtered_momentum(lat, k, mode);
      const double eq = sys.dispersion(q);
      const double eqq = sys.dispersion(lat.add(q, Q));
      if (eq > 0.0 && eqq > 0.0) {
        const double p = lat.magnitude(k);
        try {
          const auto eps = choose_epsilon(sys.m_B(), p, lat, opts.vmin_ladder);
          const FilterSpec filter{eps.epsilon, opts.gamma, opts.delta_gamma};
          const auto m = sys.moments(EnergyFilter(filter), {q}, backend);
          for (auto& e : denominator_lower_bound(sys, k, mode, filter, eps.v_min, p, m[0].den))
            rep.entries.push_back(std::move(e));
        } catch (const std::domain_error& err) {
          rep.entries.push_back(inconclusive_entry("denominator_lower_bound", 0.0, err.what()));
        }
      }
      out.push_back(std::move(rep));
    }
  }
  return out;
}

MsEstimate extrapolate_ms(const std::vector<double>& B, const std::vector<double>& m, int degree) {
  if (B.size() != m.size()) throw std::invalid_argument("B and m_B ladders differ in length");
  if (B.size() < 3) throw std::invalid_argument("extrapolation needs at least 3 ladder points");
  MsEstimate est;
  est.degree = std::max(0, std::min(degree, static_cast<int>(B.size()) - 1));
  const auto n = static_cast<Eigen::Index>(B.size());
  Eigen::MatrixXd A(n, est.degree + 1);
  Eigen::VectorXd y(n);
  for (Eigen::Index i = 0; i < n; ++i) {
    double pw = 1.0;
    for (int j = 0; j <= est.degree; ++j) {
      A(i, j) = pw;
      pw *= B[static_cast<std::size_t>(i)];
    }
    y[i] = m[static_cast<std::size_t>(i)];
  }
  const Eigen::VectorXd c = A.colPivHouseholderQr().solve(y);
  const Eigen::VectorXd res = y - A * c;
  est.coefficients.assign(c.data(), c.data() + c.size());
  est.residuals.assign(res.data(), res.data() + res.size());
  est.intercept = c[0];
  est.rms_residual = std::sqrt(res.squaredNorm() / static_cast<double>(n));
  return est;
}

}  // namespace ngdisp
