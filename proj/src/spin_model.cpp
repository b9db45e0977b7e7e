#include "ngdisp/spin_model.hpp"

#include <cmath>
#include <numbers>
#include <stdexcept>

namespace ngdisp {

SpinBasis::SpinBasis(const Lattice& lattice)
    : spin_(lattice.spin()),
      local_(static_cast<std::uint64_t>(lattice.local_dim())),
      dim_(lattice.hilbert_dim()) {
  stride_.resize(lattice.num_sites());
  std::uint64_t s = 1;
  for (std::size_t i = 0; i < lattice.num_sites(); ++i) {
    stride_[i] = s;
    s *= local_;
  }
}

double SpinBasis::raise_amplitude(double m) const {
  const double v = spin_ * (spin_ + 1.0) - m * (m + 1.0);
  return v > 0.0 ? std::sqrt(v) : 0.0;
}

namespace {

// Adds coeff * S_site^(axis) |state> to the triplet list (column = state).
void push_site_spin(const SpinBasis& basis, std::uint64_t state, int site, SpinAxis axis,
                    cplx coeff, std::vector<Triplet>& out) {
  const double m = basis.m(state, site);
  const auto stride = basis.stride(site);
  if (axis == SpinAxis::three) {
    if (m != 0.0) out.push_back({state, state, coeff * m});
    return;
  }
  // S^1 = (S+ + S-)/2, S^2 = (S+ - S-)/(2i)
  const double up = basis.raise_amplitude(m);
  const double down = basis.raise_amplitude(m - 1.0);
  const cplx cu = axis == SpinAxis::one ? cplx(0.5) : cplx(0.0, -0.5);
  const cplx cd = axis == SpinAxis::one ? cplx(0.5) : cplx(0.0, 0.5);
  if (up != 0.0) out.push_back({state - stride, state, coeff * cu * up});
  if (down != 0.0) out.push_back({state + stride, state, coeff * cd * down});
}

template <typename F>
SparseOperator build_from_columns(const Lattice& lattice, bool hermitian, F&& column) {
  const SpinBasis basis(lattice);
  std::vector<Triplet> t;
  for (std::uint64_t s = 0; s < basis.dim(); ++s) column(basis, s, t);
  return SparseOperator(basis.dim(), std::move(t), hermitian);
}

}  // namespace

SparseOperator site_spin(const Lattice& lattice, int site, SpinAxis axis) {
  if (site < 0 || static_cast<std::size_t>(site) >= lattice.num_sites())
    throw std::out_of_range("site index out of range");
  return build_from_columns(lattice, true, [&](const SpinBasis& b, std::uint64_t s, auto& t) {
    push_site_spin(b, s, site, axis, 1.0, t);
  });
}

SparseOperator build_hamiltonian(const Lattice& lattice, double field) {
  if (!(field >= 0.0)) throw std::invalid_argument("field B must be nonnegative");
  const auto& bonds = lattice.bonds();
  const auto& sign = lattice.staggered_signs();
  return build_from_columns(lattice, true, [&](const SpinBasis& b, std::uint64_t s, auto& t) {
    double diag = 0.0;
    for (const auto& [x, y] : bonds) {
      const double mx = b.m(s, x), my = b.m(s, y);
      diag += mx * my;
      // (1/2)(S+_x S-_y + S-_x S+_y)
      const double a1 = b.raise_amplitude(mx) * b.raise_amplitude(my - 1.0);
      if (a1 != 0.0) t.push_back({s - b.stride(x) + b.stride(y), s, 0.5 * a1});
      const double a2 = b.raise_amplitude(mx - 1.0) * b.raise_amplitude(my);
      if (a2 != 0.0) t.push_back({s + b.stride(x) - b.stride(y), s, 0.5 * a2});
    }
    if (diag != 0.0) t.push_back({s, s, diag});
    if (field != 0.0) {
      for (std::size_t x = 0; x < sign.size(); ++x)
        push_site_spin(b, s, static_cast<int>(x), SpinAxis::one, -field * sign[x], t);
    }
  });
}

SparseOperator staggered_field_operator(const Lattice& lattice) {
  const auto& sign = lattice.staggered_signs();
  return build_from_columns(lattice, true, [&](const SpinBasis& b, std::uint64_t s, auto& t) {
    for (std::size_t x = 0; x < sign.size(); ++x)
      push_site_spin(b, s, static_cast<int>(x), SpinAxis::one, static_cast<double>(sign[x]), t);
  });
}

SparseOperator fourier_spin(const Lattice& lattice, const Momentum& k, SpinAxis axis) {
  const std::size_t n = lattice.num_sites();
  std::vector<cplx> phase(n);
  const double norm = 1.0 / std::sqrt(static_cast<double>(n));
  bool real_phases = true;
  for (std::size_t x = 0; x < n; ++x) {
    phase[x] = norm * lattice.phase(k, static_cast<int>(x));
    real_phases = real_phases && phase[x].imag() == 0.0;
  }
  // Hermitian exactly when the phases are real (k = -k on the grid) and the
  // single-site operator is Hermitian.
  return build_from_columns(lattice, real_phases, [&](const SpinBasis& b, std::uint64_t s, auto& t) {
    for (std::size_t x = 0; x < n; ++x) push_site_spin(b, s, static_cast<int>(x), axis, phase[x], t);
  });
}

SparseOperator fourier_spin(const Lattice& lattice, const std::vector<double>& k, SpinAxis axis) {
  return fourier_spin(lattice, lattice.from_values(k), axis);
}

Vector apply_fourier_spin(const Lattice& lattice, const Momentum& k, SpinAxis axis, const Vector& v) {
  const SpinBasis basis(lattice);
  if (static_cast<std::uint64_t>(v.size()) != basis.dim()) throw std::invalid_argument("state size mismatch");
  const std::size_t n = lattice.num_sites();
  const double norm = 1.0 / std::sqrt(static_cast<double>(n));
  std::vector<cplx> phase(n);
  for (std::size_t x = 0; x < n; ++x) phase[x] = norm * lattice.phase(k, static_cast<int>(x));
  Vector out = Vector::Zero(v.size());
  std::vector<Triplet> t;
  for (std::uint64_t s = 0; s < basis.dim(); ++s) {
    const cplx vs = v[static_cast<Eigen::Index>(s)];
    if (vs == cplx(0.0)) continue;
    t.clear();
    for (std::size_t x = 0; x < n; ++x) push_site_spin(basis, s, static_cast<int>(x), axis, phase[x], t);
    for (const auto& e : t) out[static_cast<Eigen::Index>(e.row)] += e.value * vs;
  }
  return out;
}

SparseOperator marshall_transform(const Lattice& lattice) {
  const SpinBasis basis(lattice);
  const auto& sign = lattice.staggered_signs();
  std::vector<cplx> diag(basis.dim());
  for (std::uint64_t s = 0; s < basis.dim(); ++s) {
    // exp(i pi m) on each odd site; the product over sites is real up to a
    // global factor i^{2S * (#odd)}, kept so that U matches the definition.
    double total = 0.0;
    for (std::size_t x = 0; x < sign.size(); ++x)
      if (sign[x] < 0) total += basis.m(s, static_cast<int>(x));
    // total is a multiple of 1/2; reduce exp(i pi total) exactly
    const long long twice = std::llround(2.0 * total);
    const long long r = ((twice % 4) + 4) % 4;
    static constexpr cplx table[4] = {{1.0, 0.0}, {0.0, 1.0}, {-1.0, 0.0}, {0.0, -1.0}};
    diag[s] = table[r];
  }
  return SparseOperator::diagonal(diag, false);
}

SparseOperator transformed_hamiltonian(const Lattice& lattice, double field) {
  if (!(field >= 0.0)) throw std::invalid_argument("field B must be nonnegative");
  const auto& bonds = lattice.bonds();
  const std::size_t n = lattice.num_sites();
  return build_from_columns(lattice, true, [&](const SpinBasis& b, std::uint64_t s, auto& t) {
    double diag = 0.0;
    for (const auto& [x, y] : bonds) {
      const double mx = b.m(s, x), my = b.m(s, y);
      diag += mx * my;
      const double a1 = b.raise_amplitude(mx) * b.raise_amplitude(my - 1.0);
      if (a1 != 0.0) t.push_back({s - b.stride(x) + b.stride(y), s, -0.5 * a1});
      const double a2 = b.raise_amplitude(mx - 1.0) * b.raise_amplitude(my);
      if (a2 != 0.0) t.push_back({s + b.stride(x) - b.stride(y), s, -0.5 * a2});
    }
    if (diag != 0.0) t.push_back({s, s, diag});
    if (field != 0.0) {
      for (std::size_t x = 0; x < n; ++x) {
        const double m = b.m(s, static_cast<int>(x));
        const double up = b.raise_amplitude(m);
        const double down = b.raise_amplitude(m - 1.0);
        if (up != 0.0) t.push_back({s - b.stride(static_cast<int>(x)), s, -0.5 * field * up});
        if (down != 0.0) t.push_back({s + b.stride(static_cast<int>(x)), s, -0.5 * field * down});
      }
    }
  });
}

SparseOperator translation_operator(const Lattice& lattice, int axis) {
  if (axis < 0 || axis >= lattice.dimension()) throw std::out_of_range("translation axis");
  const SpinBasis basis(lattice);
  const std::size_t n = lattice.num_sites();
  std::vector<int> image(n);
  for (std::size_t x = 0; x < n; ++x) {
    auto c = lattice.sites()[x];
    c[axis] += 1;
    image[x] = lattice.site_index(c);
  }
  std::vector<Triplet> t;
  t.reserve(basis.dim());
  for (std::uint64_t s = 0; s < basis.dim(); ++s) {
    std::uint64_t target = 0;
    for (std::size_t x = 0; x < n; ++x)
      target += static_cast<std::uint64_t>(basis.digit(s, static_cast<int>(x))) * basis.stride(image[x]);
    t.push_back({target, s, 1.0});
  }
  return SparseOperator(basis.dim(), std::move(t), false);
}

}  // namespace ngdisp
