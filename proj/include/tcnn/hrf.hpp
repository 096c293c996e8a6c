#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <vector>

#include "tcnn/errors.hpp"

namespace tcnn {

struct HRFKernel {
  std::vector<double> taps;
  double tr_seconds = 2.0;
};

/// Canonical double-gamma response (6 s peak, 16 s undershoot, ratio 1/6).
inline double double_gamma(double t) {
  constexpr double p1 = 6.0, p2 = 16.0, b1 = 1.0, b2 = 1.0, c = 1.0 / 6.0;
  constexpr double a1 = p1 * b1, a2 = p2 * b2;
  if (t <= 0.0) return 0.0;
  return std::pow(t / a1, p1) * std::exp(-(t - a1) / b1) -
         c * std::pow(t / a2, p2) * std::exp(-(t - a2) / b2);
}

/// Samples the double gamma at t = TR*(s+1), s = 0..span-1, peak-normalized.
inline HRFKernel hrf_kernel(double tr_seconds, std::size_t span = 6) {
  constexpr double kPeakSeconds = 6.0;
  if (!(tr_seconds > 0.0) || span < 2 || static_cast<double>(span) * tr_seconds < kPeakSeconds)
    throw ConfigError("hrf_kernel: need tr > 0, span >= 2 and span*tr >= 6 s");
  HRFKernel k;
  k.tr_seconds = tr_seconds;
  k.taps.resize(span);
  for (std::size_t s = 0; s < span; ++s) k.taps[s] = double_gamma(tr_seconds * static_cast<double>(s + 1));
  const double peak = *std::max_element(k.taps.begin(), k.taps.end());
  for (auto& v : k.taps) v /= peak;
  return k;
}

}  // namespace tcnn
