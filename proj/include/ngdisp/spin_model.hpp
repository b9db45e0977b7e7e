#pragma once

#include <cstdint>
#include <vector>

#include "ngdisp/lattice.hpp"
#include "ngdisp/sparse_operator.hpp"

namespace ngdisp {

/// Spin component 1, 2 or 3 (x, y, z).
enum class SpinAxis : int { one = 1, two = 2, three = 3 };

/// Product basis: site s holds digit (S - m_s) at weight (2S+1)^s.
class SpinBasis {
 public:
  explicit SpinBasis(const Lattice& lattice);

  std::uint64_t dim() const { return dim_; }
  int digit(std::uint64_t state, int site) const {
    return static_cast<int>((state / stride_[site]) % local_);
  }
  /// S^(3) eigenvalue m at the site.
  double m(std::uint64_t state, int site) const { return spin_ - digit(state, site); }
  std::uint64_t stride(int site) const { return stride_[site]; }
  double spin() const { return spin_; }

  /// <m+1| S^+ |m> for the given m.
  double raise_amplitude(double m) const;

 private:
  double spin_;
  std::uint64_t local_;
  std::uint64_t dim_;
  std::vector<std::uint64_t> stride_;
};

/// Single-site spin component S_x^(axis) embedded in the full space.
SparseOperator site_spin(const Lattice& lattice, int site, SpinAxis axis);

/// Sum over bonds (each counted once) of S_x . S_y minus B times the staggered
/// S^(1) sum. Real in the product basis.
SparseOperator build_hamiltonian(const Lattice& lattice, double field);

/// O = sum_x (-1)^{|x|} S_x^(1).
SparseOperator staggered_field_operator(const Lattice& lattice);

/// (1/sqrt N) sum_x e^{ikx} S_x^(axis).
SparseOperator fourier_spin(const Lattice& lattice, const Momentum& k, SpinAxis axis);
/// Real-valued momentum overload; throws std::invalid_argument off-grid.
SparseOperator fourier_spin(const Lattice& lattice, const std::vector<double>& k, SpinAxis axis);

/// Ŝ_k^(axis) v computed on the fly, without building the operator.
Vector apply_fourier_spin(const Lattice& lattice, const Momentum& k, SpinAxis axis, const Vector& v);

/// Diagonal unitary prod_{x odd} exp(i pi S_x^(3)).
SparseOperator marshall_transform(const Lattice& lattice);

/// The rotated Hamiltonian with -(1/2)(S+S- + S-S+) + S^3 S^3 bonds and a
/// uniform field -(B/2)(S+ + S-), built directly (not by conjugation).
SparseOperator transformed_hamiltonian(const Lattice& lattice, double field);

/// Basis permutation implementing a one-site translation along `axis`.
SparseOperator translation_operator(const Lattice& lattice, int axis);

}  // namespace ngdisp
