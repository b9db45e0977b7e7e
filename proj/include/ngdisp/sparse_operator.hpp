#pragma once

#include <complex>
#include <cstdint>
#include <filesystem>
#include <vector>

#include <Eigen/Dense>

namespace ngdisp {

using cplx = std::complex<double>;
using Vector = Eigen::VectorXcd;
using DenseMatrix = Eigen::MatrixXcd;
/// Several state vectors stored row-major, one vector per column, so a
/// single sweep over the sparse rows updates all of them.
using Block = Eigen::Matrix<cplx, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

struct Triplet {
  std::uint64_t row;
  std::uint64_t col;
  cplx value;
};

/// Compressed-row complex operator on the full spin Hilbert space.
///
/// Matrices whose entries are all real keep a real value array as well, so
/// that matvec on real Hamiltonians does half the arithmetic. Objects are
/// immutable after construction.
class SparseOperator {
 public:
  SparseOperator() = default;
  /// Duplicate (row, col) entries are summed and exact zeros dropped.
  SparseOperator(std::uint64_t dim, std::vector<Triplet> entries, bool hermitian);

  static SparseOperator identity(std::uint64_t dim);
  static SparseOperator diagonal(const std::vector<cplx>& diag, bool hermitian);

  std::uint64_t dim() const { return dim_; }
  std::size_t nonzeros() const { return col_.size(); }
  bool hermitian() const { return hermitian_; }
  bool is_real() const { return real_; }

  /// y = A x
  void apply(const Vector& x, Vector& y) const;
  Vector operator*(const Vector& x) const;
  /// Y = A X for every column of X.
  void apply_block(const Block& x, Block& y) const;

  SparseOperator adjoint() const;
  SparseOperator scaled(cplx s) const;
  /// Keeps the hermiticity flag only if both operands carry it.
  friend SparseOperator operator+(const SparseOperator& a, const SparseOperator& b);
  friend SparseOperator operator-(const SparseOperator& a, const SparseOperator& b);
  /// Sparse-sparse product.
  friend SparseOperator operator*(const SparseOperator& a, const SparseOperator& b);

  std::vector<Triplet> triplets() const;
  DenseMatrix to_dense() const;
  /// Frobenius norm of the entry-wise difference with the adjoint.
  double hermiticity_defect() const;
  double frobenius_norm() const;

 private:
  std::uint64_t dim_ = 0;
  bool hermitian_ = false;
  bool real_ = true;
  std::vector<std::uint64_t> row_ptr_;
  std::vector<std::uint32_t> col_;
  std::vector<cplx> values_;
  std::vector<double> real_values_;
};

/// Little-endian on-disk triplet format:
///   magic "NGOP", u32 version, u64 lattice hash, u64 dim, u8 hermitian,
///   u64 count, then count x (u64 row, u64 col, f64 re, f64 im).
inline constexpr std::uint32_t kOperatorFormatVersion = 1;

void save_operator(const std::filesystem::path& path, const SparseOperator& op,
                   std::uint64_t lattice_hash);
/// Throws std::runtime_error on bad magic, version or lattice-hash mismatch.
SparseOperator load_operator(const std::filesystem::path& path, std::uint64_t expected_lattice_hash);

}  // namespace ngdisp
