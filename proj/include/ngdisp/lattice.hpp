#pragma once

#include <complex>
#include <cstddef>
#include <cstdint>
#include <string>
#include <utility>
#include <vector>

namespace ngdisp {

/// Spin magnitude stored as 2S so that half-integers stay exact.
class SpinMagnitude {
 public:
  constexpr SpinMagnitude() = default;
  explicit constexpr SpinMagnitude(int two_s) : two_s_(two_s) {}

  static SpinMagnitude parse(const std::string& text);

  constexpr int two_s() const { return two_s_; }
  constexpr int local_dim() const { return two_s_ + 1; }
  constexpr double value() const { return 0.5 * two_s_; }
  std::string str() const;

  friend constexpr bool operator==(SpinMagnitude, SpinMagnitude) = default;

 private:
  int two_s_ = 1;
};

/// Torus geometry and spin content. extents[i] is the number of sites along
/// axis i and must be even so that Q = (pi, ..., pi) is on the momentum grid.
struct LatticeSpec {
  std::vector<int> extents;
  SpinMagnitude spin{1};
  /// Upper limit on (2S+1)^N accepted by validate().
  std::uint64_t max_hilbert_dim = std::uint64_t{1} << 24;

  void validate() const;
  std::size_t num_sites() const;
  std::uint64_t hilbert_dim() const;
  /// "2x4_S1/2"
  std::string id() const;
  /// Stable 64-bit digest of extents and spin (FNV-1a), used for cache keys.
  std::uint64_t hash() const;
};

/// A grid momentum stored by its integer indices n_i, with k_i = 2 pi n_i / extent_i.
struct Momentum {
  std::vector<int> index;
  friend bool operator==(const Momentum&, const Momentum&) = default;
};

class Lattice {
 public:
  explicit Lattice(LatticeSpec spec);

  const LatticeSpec& spec() const { return spec_; }
  int dimension() const { return static_cast<int>(spec_.extents.size()); }
  std::size_t num_sites() const { return sites_.size(); }
  std::uint64_t hilbert_dim() const { return hilbert_dim_; }
  int local_dim() const { return spec_.spin.local_dim(); }
  double spin() const { return spec_.spin.value(); }

  const std::vector<std::vector<int>>& sites() const { return sites_; }
  const std::vector<std::pair<int, int>>& bonds() const { return bonds_; }
  const std::vector<int>& staggered_signs() const { return signs_; }
  const std::vector<Momentum>& momentum_grid() const { return grid_; }
  /// True when some axis had coinciding wrap bonds that were merged.
  bool wrap_bonds_merged() const { return merged_; }

  int site_index(const std::vector<int>& coord) const;

  Momentum zero() const;
  Momentum q_vector() const;
  Momentum add(const Momentum& a, const Momentum& b) const;
  Momentum negate(const Momentum& k) const;
  /// Component values in (-pi, pi].
  std::vector<double> values(const Momentum& k) const;
  double magnitude(const Momentum& k) const;
  /// Maps a real vector onto the grid; throws std::invalid_argument off-grid.
  Momentum from_values(const std::vector<double>& k, double tol = 1e-9) const;
  std::size_t grid_position(const Momentum& k) const;

  /// e^{i k.x}, evaluated from the integer grid so that the phase at -k is
  /// bit-for-bit the conjugate of the phase at k.
  std::complex<double> phase(const Momentum& k, int site) const;

  /// Minimum-image Euclidean distance on the torus.
  double distance(int a, int b) const;

 private:
  LatticeSpec spec_;
  std::uint64_t hilbert_dim_ = 0;
  std::vector<std::vector<int>> sites_;
  std::vector<std::pair<int, int>> bonds_;
  std::vector<int> signs_;
  std::vector<Momentum> grid_;
  bool merged_ = false;
};

/// d - sum_i cos k_i.
double dispersion_symbol(const std::vector<double>& k, int d);

}  // namespace ngdisp
