#pragma once

#include <array>
#include <cmath>

#include "headope/rng.hpp"

namespace headope {

// Ratings are drawn as clamp(round(Normal(mean, sigma)), 1, 5). The pmf and
// mean below are exact for that draw, so simulator likelihoods and synthetic
// ground truth share one closed form with the sampler.

inline double normal_cdf(double z) { return 0.5 * std::erfc(-z / std::numbers::sqrt2); }

inline std::array<double, 5> clamped_rating_pmf(double mean, double sigma) {
  std::array<double, 5> pmf{};
  double prev = 0.0;
  for (int k = 1; k <= 5; ++k) {
    const double upper = k == 5 ? 1.0 : normal_cdf((static_cast<double>(k) + 0.5 - mean) / sigma);
    pmf[static_cast<size_t>(k - 1)] = upper - prev;
    prev = upper;
  }
  return pmf;
}

inline double clamped_rating_mean(double mean, double sigma) {
  const auto pmf = clamped_rating_pmf(mean, sigma);
  double m = 0.0;
  for (int k = 1; k <= 5; ++k) m += static_cast<double>(k) * pmf[static_cast<size_t>(k - 1)];
  return m;
}

inline int draw_clamped_rating(Rng& rng, double mean, double sigma) {
  const double v = std::round(rng.normal(mean, sigma));
  return static_cast<int>(std::clamp(v, 1.0, 5.0));
}

}  // namespace headope
