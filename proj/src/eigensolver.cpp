#include "ngdisp/eigensolver.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <cstring>
#include <fstream>
#include <iomanip>
#include <random>
#include <sstream>
#include <vector>

#include "ngdisp/binary_io.hpp"
#include "ngdisp/spin_model.hpp"

namespace ngdisp {

namespace {

Vector random_start(std::uint64_t dim, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  Vector v(static_cast<Eigen::Index>(dim));
  // raw 53-bit draws keep the start vector identical across standard libraries
  for (Eigen::Index i = 0; i < v.size(); ++i) {
    const double re = static_cast<double>(rng() >> 11) * 0x1.0p-53 - 0.5;
    v[i] = cplx(re, 0.0);
  }
  v.normalize();
  return v;
}

// Two passes of classical Gram-Schmidt; returns the accumulated coefficients.
Eigen::VectorXcd orthogonalize(const std::vector<Vector>& basis, Vector& w) {
  Eigen::VectorXcd h = Eigen::VectorXcd::Zero(static_cast<Eigen::Index>(basis.size()));
  for (int pass = 0; pass < 2; ++pass) {
    for (std::size_t i = 0; i < basis.size(); ++i) {
      const cplx c = basis[i].dot(w);
      w -= c * basis[i];
      h[static_cast<Eigen::Index>(i)] += c;
    }
  }
  return h;
}

void fix_phase(Vector& v) {
  Eigen::Index best = 0;
  double best_abs = -1.0;
  for (Eigen::Index i = 0; i < v.size(); ++i) {
    const double a = std::abs(v[i]);
    if (a > best_abs * (1.0 + 1e-12)) {
      best_abs = a;
      best = i;
    }
  }
  if (best_abs > 0.0) v *= std::conj(v[best]) / best_abs;
}

// Lowest Ritz pair of H, or of (1 - P)H(1 - P) on the complement of `lock` when given.
GroundState lanczos_lowest(const SparseOperator& H, const LanczosOptions& opts, const Vector* lock) {
  const std::uint64_t n = H.dim();
  const std::uint64_t space = lock ? n - 1 : n;
  auto project = [lock](Vector& v) {
    if (lock) v -= lock->dot(v) * *lock;
  };
  const int kmax = static_cast<int>(std::min<std::uint64_t>(static_cast<std::uint64_t>(opts.krylov_dim), n));
  const int keep = std::max(1, std::min(opts.keep, kmax - 1));

  std::vector<Vector> V;
  V.push_back(random_start(n, opts.seed));
  project(V[0]);
  V[0].normalize();
  Eigen::MatrixXcd T = Eigen::MatrixXcd::Zero(kmax + 1, kmax + 1);
  GroundState gs;
  int matvecs = 0;
  Vector w;
  std::mt19937_64 inject(opts.seed ^ 0x9e3779b97f4a7c15ULL);

  while (matvecs < opts.max_matvecs) {
    const int j = static_cast<int>(V.size()) - 1;
    H.apply(V[j], w);
    ++matvecs;
    project(w);
    const Eigen::VectorXcd h = orthogonalize(V, w);
    for (int i = 0; i < j; ++i) {
      T(i, j) = h[i];
      T(j, i) = std::conj(h[i]);
    }
    T(j, j) = h[j].real();
    double beta = w.norm();
    const int m = j + 1;

    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXcd> es(T.topLeftCorner(m, m));
    const Eigen::VectorXd& theta = es.eigenvalues();
    const Eigen::MatrixXcd& Y = es.eigenvectors();
    const double r0 = beta * std::abs(Y(m - 1, 0));
    const double scale = std::max(1.0, std::abs(theta[0]));
    const bool exhausted = beta <= 1e-13 * scale || static_cast<std::uint64_t>(m) == space;

    if (r0 <= 0.1 * opts.tol || exhausted) {
      Vector phi = Vector::Zero(static_cast<Eigen::Index>(n));
      for (int i = 0; i < m; ++i) phi += Y(i, 0) * V[i];
      phi.normalize();
      Vector hp;
      H.apply(phi, hp);
      ++matvecs;
      project(hp);
      const double e0 = phi.dot(hp).real();
      const double res = (hp - e0 * phi).norm();
      if (res <= opts.tol) {
        fix_phase(phi);
        gs.E0 = e0;
        gs.phi0 = std::move(phi);
        gs.residual = res;
        gs.gap = m > 1 ? theta[1] - theta[0] : 0.0;
        gs.matvecs = matvecs;
        return gs;
      }
      // Ritz estimate was optimistic: restart from the current best vector.
      V.assign(1, phi);
      T.setZero();
      continue;
    }

    if (m == kmax) {
      std::vector<Vector> ritz;
      ritz.reserve(static_cast<std::size_t>(keep) + 1);
      for (int c = 0; c < keep; ++c) {
        Vector x = Vector::Zero(static_cast<Eigen::Index>(n));
        for (int i = 0; i < m; ++i) x += Y(i, c) * V[i];
        ritz.push_back(std::move(x));
      }
      T.setZero();
      for (int c = 0; c < keep; ++c) T(c, c) = theta[c];
      V = std::move(ritz);
      // re-orthonormalize the kept vectors against drift
      for (std::size_t c = 0; c < V.size(); ++c) {
        for (std::size_t i = 0; i < c; ++i) V[c] -= V[i].dot(V[c]) * V[i];
        V[c].normalize();
      }
      orthogonalize(V, w);
      beta = w.norm();
    }
    if (beta <= 1e-13 * scale) {
      // invariant subspace without convergence: continue from a fresh direction
      w = random_start(n, inject());
      project(w);
      orthogonalize(V, w);
      beta = w.norm();
    }
    V.push_back(w / beta);
  }
  throw ConvergenceError("Lanczos did not reach residual " + std::to_string(opts.tol) + " within " +
                         std::to_string(opts.max_matvecs) + " matrix-vector products");
}

}  // namespace

GroundState ground_state(const SparseOperator& H, const LanczosOptions& opts) {
  if (H.dim() == 0) throw std::invalid_argument("empty operator");
  if (!H.hermitian()) throw std::invalid_argument("ground_state needs a Hermitian operator");
  GroundState gs = lanczos_lowest(H, opts, nullptr);
  if (H.dim() < 2) return gs;
  // A single Krylov sequence sees one copy of a degenerate level, so the gap
  // comes from a second run on the complement of phi0.
  // The first start vector has no weight on the partner of phi0 inside a
  // degenerate level, so the second run draws a different one.
  LanczosOptions second = opts;
  second.seed = opts.seed ^ 0x5851f42d4c957f2dULL;
  try {
    const GroundState next = lanczos_lowest(H, second, &gs.phi0);
    gs.gap = std::max(0.0, next.E0 - gs.E0);
    gs.matvecs += next.matvecs;
  } catch (const ConvergenceError&) {
  }
  return gs;
}

GroundState ground_state(const SparseOperator& H, const Lattice& lattice, double B,
                         const LanczosOptions& opts) {
  GroundState gs = ground_state(H, opts);
  gs.B = B;
  gs.lattice_id = lattice.spec().id();
  gs.degenerate_warning = B == 0.0 && gs.gap < opts.degeneracy_threshold;
  return gs;
}

ExtremalEstimate extremal_eigenvalues(const SparseOperator& H, int steps, std::uint64_t seed) {
  const std::uint64_t n = H.dim();
  const int m_max = static_cast<int>(std::min<std::uint64_t>(static_cast<std::uint64_t>(steps), n));
  std::vector<Vector> V;
  V.push_back(random_start(n, seed));
  Eigen::MatrixXcd T = Eigen::MatrixXcd::Zero(m_max, m_max);
  double beta = 0.0;
  Vector w;
  for (int j = 0; j < m_max; ++j) {
    H.apply(V[j], w);
    const Eigen::VectorXcd h = orthogonalize(V, w);
    for (int i = 0; i < j; ++i) {
      T(i, j) = h[i];
      T(j, i) = std::conj(h[i]);
    }
    T(j, j) = h[j].real();
    beta = w.norm();
    if (j + 1 == m_max || beta < 1e-13) {
      T.conservativeResize(j + 1, j + 1);
      break;
    }
    V.push_back(w / beta);
  }
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXcd> es(T);
  const auto m = T.rows();
  ExtremalEstimate e;
  e.lowest = es.eigenvalues()[0];
  e.highest = es.eigenvalues()[m - 1];
  e.lowest_residual = beta * std::abs(es.eigenvectors()(m - 1, 0));
  e.highest_residual = beta * std::abs(es.eigenvectors()(m - 1, m - 1));
  return e;
}

SpectralDecomposition dense_spectrum(const DenseMatrix& H, std::uint64_t dense_cap) {
  if (static_cast<std::uint64_t>(H.rows()) > dense_cap)
    throw DenseCapError("dimension " + std::to_string(H.rows()) + " exceeds the dense cap " +
                        std::to_string(dense_cap));
  SpectralDecomposition out;
  if (H.imag().cwiseAbs().maxCoeff() == 0.0) {
    const Eigen::MatrixXd hr = H.real();
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(hr);
    if (es.info() != Eigen::Success) throw std::runtime_error("dense eigensolver failed");
    out.values = es.eigenvalues();
    out.vectors = es.eigenvectors().cast<cplx>();
  } else {
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXcd> es(H);
    if (es.info() != Eigen::Success) throw std::runtime_error("dense eigensolver failed");
    out.values = es.eigenvalues();
    out.vectors = es.eigenvectors();
  }
  return out;
}

SpectralDecomposition dense_spectrum(const SparseOperator& H, std::uint64_t dense_cap) {
  if (H.dim() > dense_cap)
    throw DenseCapError("dimension " + std::to_string(H.dim()) + " exceeds the dense cap " +
                        std::to_string(dense_cap));
  return dense_spectrum(H.to_dense(), dense_cap);
}

GroundState ground_state_from_spectrum(const SpectralDecomposition& spec, const SparseOperator& H,
                                       double B) {
  GroundState gs;
  gs.E0 = spec.values[0];
  gs.phi0 = spec.vectors.col(0);
  fix_phase(gs.phi0);
  gs.gap = spec.dim() > 1 ? spec.values[1] - spec.values[0] : 0.0;
  gs.gap_is_estimate = false;
  gs.B = B;
  gs.residual = (H * gs.phi0 - gs.E0 * gs.phi0).norm();
  return gs;
}

SolveResult deflated_solve(const SparseOperator& H, const GroundState& gs, const Vector& rhs,
                           const SolveOptions& opts) {
  const Vector& phi = gs.phi0;
  auto project = [&phi](Vector& x) { x -= phi * phi.dot(x); };
  Vector b = rhs;
  project(b);
  SolveResult out;
  const double bnorm = b.norm();
  out.x = Vector::Zero(rhs.size());
  if (bnorm == 0.0) return out;

  Vector tmp;
  auto apply_a = [&](const Vector& x, Vector& y) {
    H.apply(x, y);
    y -= gs.E0 * x;
    project(y);
  };

  Vector& x = out.x;
  Vector r = b;
  Vector p = r;
  Vector ap;
  double rr = r.squaredNorm();
  int it = 0;
  while (it < opts.max_iterations) {
    apply_a(p, ap);
    ++it;
    const double pap = p.dot(ap).real();
    if (!(pap > 0.0))
      throw SolverBreakdown("deflated CG breakdown: nonpositive curvature (gap ~ 0 at this tolerance)");
    const double alpha = rr / pap;
    x += alpha * p;
    r -= alpha * ap;
    const double rr_new = r.squaredNorm();
    if (std::sqrt(rr_new) <= opts.tol * bnorm) {
      // confirm with the true residual; restart the recursion if it drifted
      project(x);
      apply_a(x, tmp);
      const double true_res = (b - tmp).norm() / bnorm;
      if (true_res <= opts.tol) {
        out.relative_residual = true_res;
        out.iterations = it;
        return out;
      }
      r = b - tmp;
      p = r;
      rr = r.squaredNorm();
      continue;
    }
    p = r + (rr_new / rr) * p;
    rr = rr_new;
  }
  throw SolverBreakdown("deflated CG did not converge in " + std::to_string(opts.max_iterations) +
                        " iterations");
}

void save_ground_state(const std::filesystem::path& path, const LatticeSpec& spec, double tol,
                       const GroundState& gs) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot open " + path.string() + " for writing");
  out.write("NGGS", 4);
  write_le<std::uint32_t>(out, kGroundStateFormatVersion);
  write_le<std::uint64_t>(out, spec.hash());
  write_le<std::uint32_t>(out, static_cast<std::uint32_t>(spec.extents.size()));
  for (int e : spec.extents) write_le<std::int32_t>(out, e);
  write_le<std::int32_t>(out, spec.spin.two_s());
  write_le<double>(out, gs.B);
  write_le<double>(out, tol);
  write_le<double>(out, gs.E0);
  write_le<double>(out, gs.gap);
  write_le<std::uint64_t>(out, static_cast<std::uint64_t>(gs.phi0.size()));
  for (Eigen::Index i = 0; i < gs.phi0.size(); ++i) {
    write_le<double>(out, gs.phi0[i].real());
    write_le<double>(out, gs.phi0[i].imag());
  }
  if (!out) throw std::runtime_error("write failed for " + path.string());
}

CachedGroundState load_ground_state(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot open " + path.string());
  char magic[4];
  in.read(magic, 4);
  if (!in || std::memcmp(magic, "NGGS", 4) != 0) throw std::runtime_error("not a ground-state file");
  const auto version = read_le<std::uint32_t>(in);
  if (version != kGroundStateFormatVersion)
    throw std::runtime_error("ground-state file version " + std::to_string(version) + " != " +
                             std::to_string(kGroundStateFormatVersion));
  CachedGroundState c;
  const auto stored_hash = read_le<std::uint64_t>(in);
  const auto ndim = read_le<std::uint32_t>(in);
  if (ndim == 0 || ndim > 16) throw std::runtime_error("corrupt lattice header");
  c.spec.extents.resize(ndim);
  for (auto& e : c.spec.extents) e = read_le<std::int32_t>(in);
  c.spec.spin = SpinMagnitude(read_le<std::int32_t>(in));
  c.spec.validate();
  if (c.spec.hash() != stored_hash) throw std::runtime_error("stale entry: lattice hash mismatch");
  c.B = read_le<double>(in);
  c.tol = read_le<double>(in);
  c.gs.B = c.B;
  c.gs.E0 = read_le<double>(in);
  c.gs.gap = read_le<double>(in);
  const auto dim = read_le<std::uint64_t>(in);
  if (dim != c.spec.hilbert_dim()) throw std::runtime_error("vector length does not match lattice");
  c.gs.phi0.resize(static_cast<Eigen::Index>(dim));
  for (std::uint64_t i = 0; i < dim; ++i) {
    const double re = read_le<double>(in);
    const double im = read_le<double>(in);
    c.gs.phi0[static_cast<Eigen::Index>(i)] = cplx(re, im);
  }
  c.gs.lattice_id = c.spec.id();
  return c;
}

GroundStateCache::GroundStateCache(std::filesystem::path dir) : dir_(std::move(dir)) {
  std::filesystem::create_directories(dir_);
}

std::filesystem::path GroundStateCache::path_for(const LatticeSpec& spec, double B, double tol) const {
  std::uint64_t h = spec.hash();
  for (std::uint64_t v : {std::bit_cast<std::uint64_t>(B), std::bit_cast<std::uint64_t>(tol)}) {
    h ^= v + 0x9e3779b97f4a7c15ULL + (h << 6) + (h >> 2);
  }
  std::string id = spec.id();
  std::replace(id.begin(), id.end(), '/', '-');
  std::ostringstream os;
  os << "gs_" << id << "_" << std::hex << std::setw(16) << std::setfill('0') << h << ".bin";
  return dir_ / os.str();
}

std::mutex& GroundStateCache::key_mutex(const std::string& key) {
  std::lock_guard lock(map_mutex_);
  auto& slot = key_mutexes_[key];
  if (!slot) slot = std::make_unique<std::mutex>();
  return *slot;
}

GroundState GroundStateCache::get_or_compute(const Lattice& lattice, const SparseOperator& H, double B,
                                             const LanczosOptions& opts) {
  const auto path = path_for(lattice.spec(), B, opts.tol);
  std::lock_guard lock(key_mutex(path.string()));
  if (std::filesystem::exists(path)) {
    try {
      auto c = load_ground_state(path);
      if (c.spec.hash() == lattice.spec().hash() && c.B == B && c.tol == opts.tol) {
        const double res = (H * c.gs.phi0 - c.gs.E0 * c.gs.phi0).norm();
        if (res <= 2.0 * opts.tol) {
          c.gs.residual = res;
          c.gs.degenerate_warning = B == 0.0 && c.gs.gap < opts.degeneracy_threshold;
          return c.gs;
        }
      }
    } catch (const std::exception&) {
      // fall through and overwrite the bad entry
    }
  }
  GroundState gs = ground_state(H, lattice, B, opts);
  const auto tmp = path.string() + ".tmp";
  save_ground_state(tmp, lattice.spec(), opts.tol, gs);
  std::filesystem::rename(tmp, path);
  return gs;
}

std::vector<CacheEntryReport> verify_cache(const std::filesystem::path& dir) {
  std::vector<CacheEntryReport> out;
  if (!std::filesystem::is_directory(dir)) return out;
  std::vector<std::filesystem::path> files;
  for (const auto& entry : std::filesystem::directory_iterator(dir))
    if (entry.is_regular_file() && entry.path().extension() == ".bin") files.push_back(entry.path());
  std::sort(files.begin(), files.end());
  for (const auto& path : files) {
    CacheEntryReport rep;
    rep.path = path;
    {
      std::ifstream probe(path, std::ios::binary);
      if (!probe) {
        rep.message = "unreadable";
        out.push_back(rep);
        continue;
      }
    }
    try {
      const auto c = load_ground_state(path);
      const Lattice lattice(c.spec);
      const auto H = build_hamiltonian(lattice, c.B);
      rep.residual = (H * c.gs.phi0 - c.gs.E0 * c.gs.phi0).norm();
      const double norm_err = std::abs(c.gs.phi0.norm() - 1.0);
      rep.valid = rep.residual <= 2.0 * c.tol && norm_err <= 1e-12;
      if (!rep.valid) {
        std::ostringstream os;
        os << "residual " << rep.residual << " exceeds tolerance " << c.tol;
        if (norm_err > 1e-12) os << " (norm off by " << norm_err << ")";
        rep.message = os.str();
      } else {
        rep.message = "ok";
      }
    } catch (const std::exception& e) {
      rep.message = e.what();
    }
    if (!rep.valid) {
      std::error_code ec;
      rep.evicted = std::filesystem::remove(path, ec);
    }
    out.push_back(rep);
  }
  return out;
}

}  // namespace ngdisp
