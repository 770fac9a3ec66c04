#pragma once

#include <cmath>
#include <span>
#include <vector>

#include <Eigen/Core>

#include "psyfit/error.hpp"

namespace psyfit {

/// Double-gamma hemodynamic response: a gamma density peaking near `peak_delay` minus a
/// gamma density near `undershoot_delay` scaled down by `ratio`. Times are in seconds.
struct HrfKernel {
  double peak_delay = 6.0;
  double undershoot_delay = 16.0;
  double peak_dispersion = 1.0;
  double undershoot_dispersion = 1.0;
  double ratio = 6.0;
  /// Sampling step of the tabulated kernel; 0 evaluates the closed form directly.
  double resolution = 0.1;
  /// Support length; the kernel is 0 outside [0, length].
  double length = 32.0;

  void validate() const {
    if (!(peak_delay > 0 && undershoot_delay > 0 && peak_dispersion > 0 && undershoot_dispersion > 0 && ratio > 0 &&
          resolution >= 0 && length > 0)) {
      throw ConfigError("HRF parameters must be positive (resolution may be 0)");
    }
  }
};

namespace detail {

inline double gamma_density(double t, double shape, double scale) {
  if (t <= 0.0) return 0.0;
  return std::exp((shape - 1.0) * std::log(t) - t / scale - std::lgamma(shape) - shape * std::log(scale));
}

} // namespace detail

inline double hrf_value(const HrfKernel& k, double t) {
  if (t < 0.0 || t > k.length) return 0.0;
  return detail::gamma_density(t, k.peak_delay / k.peak_dispersion, k.peak_dispersion) -
         detail::gamma_density(t, k.undershoot_delay / k.undershoot_dispersion, k.undershoot_dispersion) / k.ratio;
}

/// Kernel tabulated at `resolution` and linearly interpolated between samples.
class SampledHrf {
public:
  explicit SampledHrf(const HrfKernel& k) : kernel_(k) {
    k.validate();
    if (k.resolution > 0.0) {
      const auto n = static_cast<std::size_t>(std::floor(k.length / k.resolution)) + 1;
      table_.resize(n);
      for (std::size_t i = 0; i < n; ++i) table_[i] = hrf_value(k, static_cast<double>(i) * k.resolution);
    }
  }

  [[nodiscard]] double operator()(double t) const {
    if (t < 0.0 || t > kernel_.length) return 0.0;
    if (table_.empty()) return hrf_value(kernel_, t);
    const double pos = t / kernel_.resolution;
    const auto i = static_cast<std::size_t>(pos);
    if (i + 1 >= table_.size()) return table_.back();
    const double frac = pos - static_cast<double>(i);
    return table_[i] + frac * (table_[i + 1] - table_[i]);
  }

  [[nodiscard]] const HrfKernel& kernel() const noexcept { return kernel_; }

private:
  HrfKernel kernel_;
  std::vector<double> table_;
};

/// Scan times start, start + tr, ...
inline std::vector<double> make_scan_grid(std::size_t n_scans, double tr, double start = 0.0) {
  if (!(tr > 0.0)) throw ConfigError("TR must be positive");
  if (n_scans == 0) throw ConfigError("scan grid must not be empty");
  std::vector<double> grid(n_scans);
  for (std::size_t i = 0; i < n_scans; ++i) grid[i] = start + static_cast<double>(i) * tr;
  return grid;
}

/// Convolves event-locked vectors with the HRF and samples at scan times:
/// out(s, j) = sum_e vectors(e, j) * hrf(scan_times[s] - onsets[e]).
inline Eigen::MatrixXd hrf_convolve(const Eigen::MatrixXd& vectors, std::span<const double> onsets,
                                    std::span<const double> scan_times, const SampledHrf& hrf) {
  if (scan_times.empty()) throw ConfigError("scan grid must not be empty");
  if (static_cast<std::size_t>(vectors.rows()) != onsets.size()) {
    throw DataError("hrf_convolve: " + std::to_string(vectors.rows()) + " vectors for " +
                    std::to_string(onsets.size()) + " onsets");
  }
  for (std::size_t i = 1; i < onsets.size(); ++i) {
    if (onsets[i] < onsets[i - 1]) throw DataError("hrf_convolve: onsets must be non-decreasing");
  }
  for (std::size_t i = 1; i < scan_times.size(); ++i) {
    if (!(scan_times[i] > scan_times[i - 1])) throw DataError("hrf_convolve: scan times must be strictly increasing");
  }

  const double support = hrf.kernel().length;
  Eigen::MatrixXd out = Eigen::MatrixXd::Zero(static_cast<Eigen::Index>(scan_times.size()), vectors.cols());
  std::size_t first = 0;  // earliest event still inside the kernel support
  for (std::size_t s = 0; s < scan_times.size(); ++s) {
    const double t = scan_times[s];
    while (first < onsets.size() && onsets[first] < t - support) ++first;
    for (std::size_t e = first; e < onsets.size() && onsets[e] <= t; ++e) {
      const double w = hrf(t - onsets[e]);
      if (w != 0.0) out.row(static_cast<Eigen::Index>(s)) += w * vectors.row(static_cast<Eigen::Index>(e));
    }
  }
  return out;
}

} // namespace psyfit
