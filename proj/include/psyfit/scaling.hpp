#pragma once

// Best-fit line of score against log10 parameter count, and its permutation test.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <numeric>
#include <random>
#include <span>
#include <vector>

#include "psyfit/error.hpp"
#include "psyfit/hash.hpp"
#include "psyfit/parallel.hpp"

namespace psyfit {

struct ScalingPoint {
  double log10_params = 0.0;
  double r = 0.0;
};

struct LineFit {
  double slope = 0.0;
  double intercept = 0.0;
};

/// Ordinary least-squares line through (log10 params, r).
inline LineFit fit_scaling_line(std::span<const ScalingPoint> points) {
  if (points.size() < 2) throw NumericalError("fit_scaling_line: need at least 2 points");
  double mx = 0.0, my = 0.0;
  for (const auto& p : points) {
    mx += p.log10_params;
    my += p.r;
  }
  mx /= static_cast<double>(points.size());
  my /= static_cast<double>(points.size());
  double sxx = 0.0, sxy = 0.0;
  for (const auto& p : points) {
    sxx += (p.log10_params - mx) * (p.log10_params - mx);
    sxy += (p.log10_params - mx) * (p.r - my);
  }
  if (sxx == 0.0) throw NumericalError("fit_scaling_line: all abscissae are equal");
  const double slope = sxy / sxx;
  return {slope, my - slope * mx};
}

struct PermutationResult {
  double p_positive = 1.0;
  double p_negative = 1.0;
  std::size_t n_permutations = 0;
  std::uint64_t seed = 0;
};

/// Permutes the scores against fixed abscissae `n` times. One-sided p-values use the add-one
/// estimator (1 + #{permuted >= observed}) / (n + 1), so they are never 0.
/// Permutation i draws from its own engine seeded by (seed, i), so results do not depend on
/// the number of workers.
inline PermutationResult permutation_test_slope(std::span<const ScalingPoint> points, std::size_t n,
                                                std::uint64_t seed, std::size_t workers = 1) {
  if (points.size() < 3) throw NumericalError("permutation_test_slope: need at least 3 points");
  if (n < 1) throw NumericalError("permutation_test_slope: need at least 1 permutation");

  const std::size_t m = points.size();
  std::vector<double> dx(m), r(m);
  double mx = 0.0;
  for (const auto& p : points) mx += p.log10_params;
  mx /= static_cast<double>(m);
  for (std::size_t i = 0; i < m; ++i) {
    dx[i] = points[i].log10_params - mx;
    r[i] = points[i].r;
  }
  if (std::all_of(dx.begin(), dx.end(), [](double v) { return v == 0.0; })) {
    throw NumericalError("permutation_test_slope: all abscissae are equal");
  }
  // The slope's denominator is permutation-invariant, so comparing numerators suffices.
  const auto numerator = [&](const std::vector<double>& v) {
    double s = 0.0;
    for (std::size_t i = 0; i < m; ++i) s += dx[i] * v[i];
    return s;
  };
  const double observed = numerator(r);
  double scale = 0.0;
  for (std::size_t i = 0; i < m; ++i) scale += std::abs(dx[i] * r[i]);
  const double tie_tol = 1e-12 * scale;

  constexpr std::size_t kChunk = 64;
  const std::size_t chunks = (n + kChunk - 1) / kChunk;
  const auto counts = parallel_map(chunks, workers, [&](std::size_t c) {
    std::pair<std::size_t, std::size_t> ge_le{0, 0};
    std::vector<double> perm(m);
    for (std::size_t i = c * kChunk; i < std::min(n, (c + 1) * kChunk); ++i) {
      std::mt19937_64 rng(mix64(seed ^ mix64(i + 1)));
      perm = r;
      std::shuffle(perm.begin(), perm.end(), rng);
      const double s = numerator(perm);
      if (s >= observed - tie_tol) ++ge_le.first;
      if (s <= observed + tie_tol) ++ge_le.second;
    }
    return ge_le;
  });
  std::size_t ge = 0, le = 0;
  for (const auto& [g, l] : counts) {
    ge += g;
    le += l;
  }
  const double denom = static_cast<double>(n) + 1.0;
  return {(1.0 + static_cast<double>(ge)) / denom, (1.0 + static_cast<double>(le)) / denom, n, seed};
}

} // namespace psyfit
