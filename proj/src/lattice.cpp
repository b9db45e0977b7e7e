#include "ngdisp/lattice.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <numeric>
#include <set>
#include <sstream>
#include <stdexcept>

namespace ngdisp {

SpinMagnitude SpinMagnitude::parse(const std::string& text) {
  auto slash = text.find('/');
  try {
    if (slash == std::string::npos) {
      const int s = std::stoi(text);
      if (s < 1) throw std::invalid_argument("spin must be positive");
      return SpinMagnitude(2 * s);
    }
    const int num = std::stoi(text.substr(0, slash));
    const int den = std::stoi(text.substr(slash + 1));
    if (den != 2 || num < 1) throw std::invalid_argument("spin must be n/2 with n >= 1");
    return SpinMagnitude(num);
  } catch (const std::logic_error&) {
    throw std::invalid_argument("cannot parse spin magnitude '" + text + "'");
  }
}

std::string SpinMagnitude::str() const {
  if (two_s_ % 2 == 0) return std::to_string(two_s_ / 2);
  return std::to_string(two_s_) + "/2";
}

void LatticeSpec::validate() const {
  if (extents.empty()) throw std::invalid_argument("lattice needs at least one axis");
  for (int e : extents) {
    if (e < 2 || e % 2 != 0)
      throw std::invalid_argument("every lattice extent must be an even integer >= 2");
  }
  if (spin.two_s() < 1) throw std::invalid_argument("spin magnitude must be positive");
  // overflow-safe product
  std::uint64_t dim = 1;
  const std::size_t n = num_sites();
  for (std::size_t i = 0; i < n; ++i) {
    if (dim > max_hilbert_dim / static_cast<std::uint64_t>(spin.local_dim()))
      throw std::invalid_argument("Hilbert dimension of " + id() + " exceeds the memory budget");
    dim *= static_cast<std::uint64_t>(spin.local_dim());
  }
}

std::size_t LatticeSpec::num_sites() const {
  std::size_t n = 1;
  for (int e : extents) n *= static_cast<std::size_t>(e);
  return n;
}

std::uint64_t LatticeSpec::hilbert_dim() const {
  std::uint64_t dim = 1;
  for (std::size_t i = 0; i < num_sites(); ++i) dim *= static_cast<std::uint64_t>(spin.local_dim());
  return dim;
}

std::string LatticeSpec::id() const {
  std::ostringstream os;
  for (std::size_t i = 0; i < extents.size(); ++i) os << (i ? "x" : "") << extents[i];
  os << "_S" << spin.str();
  return os.str();
}

std::uint64_t LatticeSpec::hash() const {
  std::uint64_t h = 1469598103934665603ULL;
  auto mix = [&h](std::uint64_t v) {
    for (int b = 0; b < 8; ++b) {
      h ^= (v >> (8 * b)) & 0xffU;
      h *= 1099511628211ULL;
    }
  };
  mix(extents.size());
  for (int e : extents) mix(static_cast<std::uint64_t>(e));
  mix(static_cast<std::uint64_t>(spin.two_s()));
  return h;
}

Lattice::Lattice(LatticeSpec spec) : spec_(std::move(spec)) {
  spec_.validate();
  hilbert_dim_ = spec_.hilbert_dim();
  const int d = dimension();
  const std::size_t n = spec_.num_sites();

  // row-major: the last axis varies fastest
  sites_.reserve(n);
  std::vector<int> coord(d, 0);
  for (std::size_t s = 0; s < n; ++s) {
    sites_.push_back(coord);
    for (int a = d - 1; a >= 0; --a) {
      if (++coord[a] < spec_.extents[a]) break;
      coord[a] = 0;
    }
  }

  signs_.resize(n);
  for (std::size_t s = 0; s < n; ++s) {
    int sum = 0;
    for (int c : sites_[s]) sum += c;
    signs_[s] = (sum % 2 == 0) ? 1 : -1;
  }

  std::set<std::pair<int, int>> seen;
  for (std::size_t s = 0; s < n; ++s) {
    for (int a = 0; a < d; ++a) {
      auto nb = sites_[s];
      nb[a] = (nb[a] + 1) % spec_.extents[a];
      const int t = site_index(nb);
      const std::pair<int, int> key = std::minmax(static_cast<int>(s), t);
      if (seen.insert(key).second) {
        bonds_.push_back(key);
      } else {
        merged_ = true;
      }
    }
  }

  // grid ordered by index tuples, last axis fastest
  std::vector<int> idx(d, 0);
  for (std::size_t s = 0; s < n; ++s) {
    grid_.push_back(Momentum{idx});
    for (int a = d - 1; a >= 0; --a) {
      if (++idx[a] < spec_.extents[a]) break;
      idx[a] = 0;
    }
  }
}

int Lattice::site_index(const std::vector<int>& coord) const {
  int index = 0;
  for (int a = 0; a < dimension(); ++a) {
    const int e = spec_.extents[a];
    const int c = ((coord[a] % e) + e) % e;
    index = index * e + c;
  }
  return index;
}

Momentum Lattice::zero() const { return Momentum{std::vector<int>(dimension(), 0)}; }

Momentum Lattice::q_vector() const {
  Momentum q{std::vector<int>(dimension())};
  for (int a = 0; a < dimension(); ++a) q.index[a] = spec_.extents[a] / 2;
  return q;
}

Momentum Lattice::add(const Momentum& a, const Momentum& b) const {
  Momentum r{std::vector<int>(dimension())};
  for (int i = 0; i < dimension(); ++i) r.index[i] = (a.index[i] + b.index[i]) % spec_.extents[i];
  return r;
}

Momentum Lattice::negate(const Momentum& k) const {
  Momentum r{std::vector<int>(dimension())};
  for (int i = 0; i < dimension(); ++i) {
    const int e = spec_.extents[i];
    r.index[i] = (e - k.index[i] % e) % e;
  }
  return r;
}

std::vector<double> Lattice::values(const Momentum& k) const {
  std::vector<double> v(dimension());
  for (int i = 0; i < dimension(); ++i) {
    const int e = spec_.extents[i];
    int n = ((k.index[i] % e) + e) % e;
    if (2 * n > e) n -= e;
    v[i] = 2.0 * std::numbers::pi * n / e;
  }
  return v;
}

double Lattice::magnitude(const Momentum& k) const {
  double s = 0.0;
  for (double c : values(k)) s += c * c;
  return std::sqrt(s);
}

Momentum Lattice::from_values(const std::vector<double>& k, double tol) const {
  if (static_cast<int>(k.size()) != dimension())
    throw std::invalid_argument("momentum has wrong number of components");
  Momentum m{std::vector<int>(dimension())};
  for (int i = 0; i < dimension(); ++i) {
    const int e = spec_.extents[i];
    const double x = k[i] * e / (2.0 * std::numbers::pi);
    const double r = std::round(x);
    if (std::abs(x - r) > tol) throw std::invalid_argument("momentum is not on the lattice grid");
    m.index[i] = ((static_cast<int>(r) % e) + e) % e;
  }
  return m;
}

std::size_t Lattice::grid_position(const Momentum& k) const {
  std::size_t pos = 0;
  for (int a = 0; a < dimension(); ++a) {
    const int e = spec_.extents[a];
    pos = pos * e + static_cast<std::size_t>(((k.index[a] % e) + e) % e);
  }
  return pos;
}

std::complex<double> Lattice::phase(const Momentum& k, int site) const {
  // sum_i n_i x_i / e_i as an exact rational with common denominator
  long long den = 1;
  for (int e : spec_.extents) den = std::lcm(den, static_cast<long long>(e));
  long long num = 0;
  for (int a = 0; a < dimension(); ++a) {
    num += static_cast<long long>(k.index[a]) * sites_[site][a] * (den / spec_.extents[a]);
  }
  num %= den;
  if (num < 0) num += den;
  const bool upper = 2 * num > den;
  const long long r = upper ? den - num : num;
  const double angle = 2.0 * std::numbers::pi * static_cast<double>(r) / static_cast<double>(den);
  std::complex<double> z;
  if (4 * r == den) {
    z = {0.0, 1.0};
  } else if (2 * r == den) {
    z = {-1.0, 0.0};
  } else if (r == 0) {
    z = {1.0, 0.0};
  } else {
    z = {std::cos(angle), std::sin(angle)};
  }
  return upper ? std::conj(z) : z;
}

double Lattice::distance(int a, int b) const {
  double s = 0.0;
  for (int i = 0; i < dimension(); ++i) {
    const int e = spec_.extents[i];
    int dx = std::abs(sites_[a][i] - sites_[b][i]);
    dx = std::min(dx, e - dx);
    s += static_cast<double>(dx) * dx;
  }
  return std::sqrt(s);
}

double dispersion_symbol(const std::vector<double>& k, int d) {
  if (static_cast<int>(k.size()) != d)
    throw std::invalid_argument("dispersion_symbol: momentum dimension mismatch");
  double s = d;
  for (double c : k) s -= std::cos(c);
  return s;
}

}  // namespace ngdisp
