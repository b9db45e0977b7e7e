#pragma once

#include <fstream>
#include <string>

#include "json.hpp"
#include "ngdisp/lattice.hpp"
#include "ngdisp/sparse_operator.hpp"
#include "oracle.hpp"

namespace testsupport {

inline const nlohmann::json& golden() {
  static const nlohmann::json j = [] {
    std::ifstream in(NGDISP_GOLDEN_PATH);
    return nlohmann::json::parse(in);
  }();
  return j;
}

inline ngdisp::Lattice lattice(std::vector<int> extents, int two_s = 1) {
  return ngdisp::Lattice(ngdisp::LatticeSpec{std::move(extents), ngdisp::SpinMagnitude(two_s)});
}

inline oracle::Torus torus(const ngdisp::Lattice& lat) {
  return {lat.spec().extents, lat.spec().spin.two_s()};
}

inline double max_abs(const Eigen::MatrixXcd& m) { return m.size() == 0 ? 0.0 : m.cwiseAbs().maxCoeff(); }

}  // namespace testsupport
