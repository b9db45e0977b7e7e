#include "ngdisp/sparse_operator.hpp"

#include <algorithm>
#include <bit>
#include <cstring>
#include <fstream>
#include <stdexcept>

#include "ngdisp/binary_io.hpp"

namespace ngdisp {

SparseOperator::SparseOperator(std::uint64_t dim, std::vector<Triplet> entries, bool hermitian)
    : dim_(dim), hermitian_(hermitian) {
  if (dim > std::uint64_t{0xffffffffU}) throw std::invalid_argument("operator dimension too large");
  std::sort(entries.begin(), entries.end(), [](const Triplet& a, const Triplet& b) {
    return a.row != b.row ? a.row < b.row : a.col < b.col;
  });
  row_ptr_.assign(dim + 1, 0);
  col_.reserve(entries.size());
  values_.reserve(entries.size());
  std::size_t i = 0;
  while (i < entries.size()) {
    const auto r = entries[i].row;
    const auto c = entries[i].col;
    if (r >= dim || c >= dim) throw std::out_of_range("triplet outside operator dimension");
    cplx sum = 0.0;
    while (i < entries.size() && entries[i].row == r && entries[i].col == c) sum += entries[i++].value;
    if (sum == cplx(0.0)) continue;
    col_.push_back(static_cast<std::uint32_t>(c));
    values_.push_back(sum);
    ++row_ptr_[r + 1];
  }
  for (std::uint64_t r = 0; r < dim; ++r) row_ptr_[r + 1] += row_ptr_[r];
  real_ = std::all_of(values_.begin(), values_.end(), [](cplx v) { return v.imag() == 0.0; });
  if (real_) {
    real_values_.resize(values_.size());
    for (std::size_t j = 0; j < values_.size(); ++j) real_values_[j] = values_[j].real();
  }
}

SparseOperator SparseOperator::identity(std::uint64_t dim) {
  return diagonal(std::vector<cplx>(dim, 1.0), true);
}

SparseOperator SparseOperator::diagonal(const std::vector<cplx>& diag, bool hermitian) {
  std::vector<Triplet> t;
  t.reserve(diag.size());
  for (std::uint64_t i = 0; i < diag.size(); ++i) t.push_back({i, i, diag[i]});
  return SparseOperator(diag.size(), std::move(t), hermitian);
}

void SparseOperator::apply(const Vector& x, Vector& y) const {
  if (static_cast<std::uint64_t>(x.size()) != dim_) throw std::invalid_argument("matvec size mismatch");
  y.resize(static_cast<Eigen::Index>(dim_));
  const cplx* xp = x.data();
  cplx* yp = y.data();
  if (real_) {
    for (std::uint64_t r = 0; r < dim_; ++r) {
      double re = 0.0, im = 0.0;
      for (std::uint64_t j = row_ptr_[r]; j < row_ptr_[r + 1]; ++j) {
        const cplx v = xp[col_[j]];
        re += real_values_[j] * v.real();
        im += real_values_[j] * v.imag();
      }
      yp[r] = cplx(re, im);
    }
  } else {
    for (std::uint64_t r = 0; r < dim_; ++r) {
      cplx acc = 0.0;
      for (std::uint64_t j = row_ptr_[r]; j < row_ptr_[r + 1]; ++j) acc += values_[j] * xp[col_[j]];
      yp[r] = acc;
    }
  }
}

void SparseOperator::apply_block(const Block& x, Block& y) const {
  if (static_cast<std::uint64_t>(x.rows()) != dim_) throw std::invalid_argument("matvec size mismatch");
  const Eigen::Index nb = x.cols();
  y.resize(x.rows(), nb);
  y.setZero();
  for (std::uint64_t r = 0; r < dim_; ++r) {
    cplx* yr = y.data() + r * nb;
    for (std::uint64_t j = row_ptr_[r]; j < row_ptr_[r + 1]; ++j) {
      const cplx* xr = x.data() + static_cast<std::uint64_t>(col_[j]) * nb;
      if (real_) {
        const double a = real_values_[j];
        for (Eigen::Index b = 0; b < nb; ++b) yr[b] += a * xr[b];
      } else {
        const cplx a = values_[j];
        for (Eigen::Index b = 0; b < nb; ++b) yr[b] += a * xr[b];
      }
    }
  }
}

Vector SparseOperator::operator*(const Vector& x) const {
  Vector y;
  apply(x, y);
  return y;
}

std::vector<Triplet> SparseOperator::triplets() const {
  std::vector<Triplet> t;
  t.reserve(values_.size());
  for (std::uint64_t r = 0; r < dim_; ++r)
    for (std::uint64_t j = row_ptr_[r]; j < row_ptr_[r + 1]; ++j) t.push_back({r, col_[j], values_[j]});
  return t;
}

SparseOperator SparseOperator::adjoint() const {
  auto t = triplets();
  for (auto& e : t) {
    std::swap(e.row, e.col);
    e.value = std::conj(e.value);
  }
  return SparseOperator(dim_, std::move(t), hermitian_);
}

SparseOperator SparseOperator::scaled(cplx s) const {
  auto t = triplets();
  for (auto& e : t) e.value *= s;
  return SparseOperator(dim_, std::move(t), hermitian_ && s.imag() == 0.0);
}

SparseOperator operator+(const SparseOperator& a, const SparseOperator& b) {
  if (a.dim_ != b.dim_) throw std::invalid_argument("operator dimension mismatch");
  auto t = a.triplets();
  auto tb = b.triplets();
  t.insert(t.end(), tb.begin(), tb.end());
  return SparseOperator(a.dim_, std::move(t), a.hermitian_ && b.hermitian_);
}

SparseOperator operator-(const SparseOperator& a, const SparseOperator& b) {
  return a + b.scaled(-1.0);
}

SparseOperator operator*(const SparseOperator& a, const SparseOperator& b) {
  if (a.dim_ != b.dim_) throw std::invalid_argument("operator dimension mismatch");
  std::vector<Triplet> t;
  for (std::uint64_t r = 0; r < a.dim_; ++r) {
    for (std::uint64_t j = a.row_ptr_[r]; j < a.row_ptr_[r + 1]; ++j) {
      const std::uint64_t mid = a.col_[j];
      for (std::uint64_t l = b.row_ptr_[mid]; l < b.row_ptr_[mid + 1]; ++l)
        t.push_back({r, b.col_[l], a.values_[j] * b.values_[l]});
    }
  }
  return SparseOperator(a.dim_, std::move(t), false);
}

DenseMatrix SparseOperator::to_dense() const {
  DenseMatrix m = DenseMatrix::Zero(static_cast<Eigen::Index>(dim_), static_cast<Eigen::Index>(dim_));
  for (std::uint64_t r = 0; r < dim_; ++r)
    for (std::uint64_t j = row_ptr_[r]; j < row_ptr_[r + 1]; ++j)
      m(static_cast<Eigen::Index>(r), static_cast<Eigen::Index>(col_[j])) += values_[j];
  return m;
}

double SparseOperator::hermiticity_defect() const {
  return (*this - adjoint()).frobenius_norm();
}

double SparseOperator::frobenius_norm() const {
  double s = 0.0;
  for (const auto& v : values_) s += std::norm(v);
  return std::sqrt(s);
}

void save_operator(const std::filesystem::path& path, const SparseOperator& op,
                   std::uint64_t lattice_hash) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot open " + path.string() + " for writing");
  out.write("NGOP", 4);
  write_le<std::uint32_t>(out, kOperatorFormatVersion);
  write_le<std::uint64_t>(out, lattice_hash);
  write_le<std::uint64_t>(out, op.dim());
  write_le<std::uint8_t>(out, op.hermitian() ? 1 : 0);
  const auto t = op.triplets();
  write_le<std::uint64_t>(out, t.size());
  for (const auto& e : t) {
    write_le<std::uint64_t>(out, e.row);
    write_le<std::uint64_t>(out, e.col);
    write_le<double>(out, e.value.real());
    write_le<double>(out, e.value.imag());
  }
  if (!out) throw std::runtime_error("write failed for " + path.string());
}

SparseOperator load_operator(const std::filesystem::path& path, std::uint64_t expected_lattice_hash) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot open " + path.string());
  char magic[4];
  in.read(magic, 4);
  if (!in || std::memcmp(magic, "NGOP", 4) != 0) throw std::runtime_error("not an operator file");
  if (read_le<std::uint32_t>(in) != kOperatorFormatVersion)
    throw std::runtime_error("operator file version mismatch");
  if (read_le<std::uint64_t>(in) != expected_lattice_hash)
    throw std::runtime_error("operator file belongs to a different lattice");
  const auto dim = read_le<std::uint64_t>(in);
  const bool herm = read_le<std::uint8_t>(in) != 0;
  const auto count = read_le<std::uint64_t>(in);
  std::vector<Triplet> t;
  t.reserve(count);
  for (std::uint64_t i = 0; i < count; ++i) {
    Triplet e;
    e.row = read_le<std::uint64_t>(in);
    e.col = read_le<std::uint64_t>(in);
    const double re = read_le<double>(in);
    const double im = read_le<double>(in);
    e.value = {re, im};
    t.push_back(e);
  }
  if (!in) throw std::runtime_error("truncated operator file " + path.string());
  return SparseOperator(dim, std::move(t), herm);
}

}  // namespace ngdisp
