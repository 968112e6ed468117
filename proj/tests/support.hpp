#pragma once

#include <cmath>
#include <vector>

#include "epdyn/model.hpp"

namespace fixtures {

inline epd::ChainParams dqd(double g1, double g2, double g, double eps = 1.0) {
  return epd::ChainParams::resonant({g1, g2}, g, eps);
}

// Strong-coupling rates with reservoirs at T = (1, 0.1), mu = 0.
inline epd::ChainParams strong(double g) { return dqd(0.5, 0.1, g); }
inline epd::ChainParams weak(double g) { return dqd(1e-2, 1e-3, g); }

inline std::vector<epd::ReservoirSpec> thermal() {
  return {epd::ReservoirSpec::thermal(1.0, 0.0), epd::ReservoirSpec::thermal(0.1, 0.0)};
}

inline std::vector<epd::ReservoirSpec> uniform(double c, std::size_t n = 2) {
  return std::vector<epd::ReservoirSpec>(n, epd::ReservoirSpec::constant(c));
}

inline double max_abs_diff(const std::vector<double>& a, const std::vector<double>& b) {
  double m = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) m = std::max(m, std::abs(a[i] - b[i]));
  return m;
}

}  // namespace fixtures
