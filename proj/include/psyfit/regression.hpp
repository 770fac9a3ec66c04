#pragma once

// Minimum-norm / ridge least squares with an unpenalized intercept, Pearson scoring, and
// by-subject cross-validation.
//
// All solver routes compute the same spectral solution on the centered design Xc = X - mean(X):
//
//   w = sum_i v_i * sigma_i * (u_i' yc) / (sigma_i^2 + lambda)      over retained singular triplets
//
// which for lambda = 0 is the pseudoinverse (minimum Euclidean norm) solution. Singular values
// below rtol * sigma_max are dropped, and so are directions along which the centered target has
// no component above rounding level, so a target orthogonal to the design yields exactly zero
// weights.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <limits>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include <Eigen/Dense>
#include <Eigen/SVD>

#include "psyfit/error.hpp"

namespace psyfit {

enum class Solver { Auto, Svd, Gram };

inline std::string_view to_string(Solver s) {
  switch (s) {
    case Solver::Auto: return "auto";
    case Solver::Svd: return "svd";
    case Solver::Gram: return "gram";
  }
  return "?";
}

inline Solver parse_solver(std::string_view s) {
  if (s == "auto") return Solver::Auto;
  if (s == "svd") return Solver::Svd;
  if (s == "gram") return Solver::Gram;
  throw ConfigError("unknown solver '" + std::string(s) + "' (expected auto, svd or gram)");
}

struct FitOptions {
  double ridge_lambda = 0.0;
  /// Relative singular-value cutoff; defaults to max(N, d) * machine epsilon.
  std::optional<double> rank_rtol;
  Solver solver = Solver::Auto;
  /// Auto mode switches from the SVD to the d x d Gram route above this many design entries.
  std::size_t svd_max_elements = 50'000'000;
};

struct LinearModel {
  Eigen::VectorXd weights;
  double intercept = 0.0;
  double ridge_lambda = 0.0;
  Eigen::Index effective_rank = 0;
  Eigen::Index fit_row_count = 0;
  Solver solver_used = Solver::Svd;
};

namespace detail {

inline double default_rtol(Eigen::Index n, Eigen::Index d) {
  return static_cast<double>(std::max(n, d)) * std::numeric_limits<double>::epsilon();
}

// Target components with |u_i' yc| below this fraction of ||yc|| are rounding noise.
inline double projection_tol(Eigen::Index n, Eigen::Index d) {
  return 8.0 * default_rtol(n, d);
}

inline void check_inputs(const Eigen::MatrixXd& x, const Eigen::VectorXd& y) {
  if (x.rows() == 0) throw NumericalError("fit_linear: zero rows");
  if (x.rows() != y.size()) {
    throw NumericalError("fit_linear: design has " + std::to_string(x.rows()) + " rows but target has " +
                         std::to_string(y.size()));
  }
  if (!x.allFinite() || !y.allFinite()) throw NumericalError("fit_linear: non-finite input");
}

struct SpectralSolution {
  Eigen::VectorXd weights;
  Eigen::Index rank = 0;
};

inline SpectralSolution solve_svd(const Eigen::MatrixXd& xc, const Eigen::VectorXd& yc, double rtol, double lambda) {
  Eigen::BDCSVD<Eigen::MatrixXd> svd(xc, Eigen::ComputeThinU | Eigen::ComputeThinV);
  const auto& s = svd.singularValues();
  SpectralSolution out{Eigen::VectorXd::Zero(xc.cols()), 0};
  if (s.size() == 0 || s(0) <= 0.0) return out;
  const double cutoff = rtol * s(0);
  const double ynorm = yc.norm();
  const double ptol = projection_tol(xc.rows(), xc.cols()) * ynorm;
  for (Eigen::Index i = 0; i < s.size() && s(i) > cutoff; ++i) {
    ++out.rank;
    const double c = svd.matrixU().col(i).dot(yc);
    if (std::abs(c) <= ptol) continue;
    out.weights += svd.matrixV().col(i) * (c * s(i) / (s(i) * s(i) + lambda));
  }
  return out;
}

// Dual form for d > N: eigendecomposition of the N x N kernel Xc Xc'.
inline SpectralSolution solve_gram_dual(const Eigen::MatrixXd& xc, const Eigen::VectorXd& yc, double rtol,
                                        double lambda) {
  const Eigen::MatrixXd k = xc * xc.transpose();
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(k);
  if (eig.info() != Eigen::Success) throw NumericalError("fit_linear: kernel eigendecomposition failed");
  const auto& ev = eig.eigenvalues();  // ascending
  const auto& u = eig.eigenvectors();
  SpectralSolution out{Eigen::VectorXd::Zero(xc.cols()), 0};
  const double top = ev(ev.size() - 1);
  if (!(top > 0.0)) return out;
  const double cutoff = std::max(rtol * rtol, default_rtol(xc.rows(), xc.cols())) * top;
  const double ptol = projection_tol(xc.rows(), xc.cols()) * yc.norm();
  Eigen::VectorXd alpha = Eigen::VectorXd::Zero(xc.rows());
  for (Eigen::Index i = ev.size() - 1; i >= 0 && ev(i) > cutoff; --i) {
    ++out.rank;
    const double c = u.col(i).dot(yc);
    if (std::abs(c) <= ptol) continue;
    alpha += u.col(i) * (c / (ev(i) + lambda));
  }
  out.weights = xc.transpose() * alpha;
  return out;
}

// Primal form for N >> d: eigendecomposition of the d x d covariance Xc' Xc.
inline SpectralSolution solve_gram_primal(const Eigen::MatrixXd& xc, const Eigen::VectorXd& yc, double rtol,
                                          double lambda) {
  Eigen::MatrixXd c = Eigen::MatrixXd::Zero(xc.cols(), xc.cols());
  c.selfadjointView<Eigen::Lower>().rankUpdate(xc.transpose());
  c = c.selfadjointView<Eigen::Lower>();
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(c);
  if (eig.info() != Eigen::Success) throw NumericalError("fit_linear: covariance eigendecomposition failed");
  const auto& ev = eig.eigenvalues();
  const auto& v = eig.eigenvectors();
  SpectralSolution out{Eigen::VectorXd::Zero(xc.cols()), 0};
  const double top = ev(ev.size() - 1);
  if (!(top > 0.0)) return out;
  const double cutoff = std::max(rtol * rtol, default_rtol(xc.rows(), xc.cols())) * top;
  const double ptol = projection_tol(xc.rows(), xc.cols()) * yc.norm();
  const Eigen::VectorXd b = xc.transpose() * yc;
  for (Eigen::Index i = ev.size() - 1; i >= 0 && ev(i) > cutoff; --i) {
    ++out.rank;
    const double proj = v.col(i).dot(b);  // sigma_i * (u_i' yc)
    if (std::abs(proj) <= ptol * std::sqrt(ev(i))) continue;
    out.weights += v.col(i) * (proj / (ev(i) + lambda));
  }
  return out;
}

} // namespace detail

/// Least-squares fit of y on X with an intercept. lambda = 0 gives the minimum-norm solution.
inline LinearModel fit_linear(const Eigen::MatrixXd& x, const Eigen::VectorXd& y, const FitOptions& opts = {}) {
  detail::check_inputs(x, y);
  if (!(opts.ridge_lambda >= 0.0) || !std::isfinite(opts.ridge_lambda)) {
    throw NumericalError("fit_linear: ridge_lambda must be finite and >= 0");
  }
  const Eigen::Index n = x.rows();
  const Eigen::Index d = x.cols();
  const Eigen::RowVectorXd x_mean = x.colwise().mean();
  const double y_mean = y.mean();
  const Eigen::MatrixXd xc = x.rowwise() - x_mean;
  const Eigen::VectorXd yc = y.array() - y_mean;
  const double rtol = opts.rank_rtol.value_or(detail::default_rtol(n, d));

  Solver route = opts.solver;
  if (route == Solver::Auto) {
    const bool too_big = static_cast<std::size_t>(n) * static_cast<std::size_t>(d) > opts.svd_max_elements;
    route = (d > n || too_big) ? Solver::Gram : Solver::Svd;
  }

  detail::SpectralSolution sol;
  if (d == 0) {
    sol.weights.resize(0);
  } else if (route == Solver::Svd) {
    sol = detail::solve_svd(xc, yc, rtol, opts.ridge_lambda);
  } else if (d > n) {
    sol = detail::solve_gram_dual(xc, yc, rtol, opts.ridge_lambda);
  } else {
    sol = detail::solve_gram_primal(xc, yc, rtol, opts.ridge_lambda);
  }

  LinearModel m;
  m.weights = std::move(sol.weights);
  m.intercept = y_mean - x_mean.dot(m.weights);
  m.ridge_lambda = opts.ridge_lambda;
  m.effective_rank = sol.rank;
  m.fit_row_count = n;
  m.solver_used = route;
  if (!m.weights.allFinite() || !std::isfinite(m.intercept)) throw NumericalError("fit_linear: non-finite solution");
  return m;
}

inline Eigen::VectorXd predict(const LinearModel& m, const Eigen::MatrixXd& x) {
  if (x.cols() != m.weights.size()) {
    throw NumericalError("predict: design has " + std::to_string(x.cols()) + " columns, model expects " +
                         std::to_string(m.weights.size()));
  }
  return (x * m.weights).array() + m.intercept;
}

struct ScoreResult {
  std::optional<double> r;  // empty = UNDEFINED
  std::size_t n = 0;
  std::optional<double> normalized_r;

  [[nodiscard]] bool defined() const noexcept { return r.has_value(); }
};

/// Product-moment correlation. UNDEFINED when either series is constant.
inline ScoreResult pearson(const Eigen::Ref<const Eigen::VectorXd>& a, const Eigen::Ref<const Eigen::VectorXd>& b) {
  if (a.size() != b.size()) {
    throw NumericalError("pearson: length mismatch (" + std::to_string(a.size()) + " vs " + std::to_string(b.size()) +
                         ")");
  }
  if (a.size() < 2) throw NumericalError("pearson: need at least 2 points");
  ScoreResult out;
  out.n = static_cast<std::size_t>(a.size());
  const auto constant = [](const auto& v) { return (v.array() == v(0)).all(); };
  if (constant(a) || constant(b)) return out;
  const Eigen::ArrayXd da = a.array() - a.mean();
  const Eigen::ArrayXd db = b.array() - b.mean();
  const double saa = da.square().sum();
  const double sbb = db.square().sum();
  if (saa == 0.0 || sbb == 0.0) return out;
  out.r = std::clamp((da * db).sum() / std::sqrt(saa * sbb), -1.0, 1.0);
  return out;
}

inline double normalize_ceiling(double r, double ceiling) {
  if (!(ceiling > 0.0)) throw ConfigError("ceiling must be positive");
  return r / ceiling;
}

inline ScoreResult with_ceiling(ScoreResult s, std::optional<double> ceiling) {
  if (ceiling && s.r) s.normalized_r = normalize_ceiling(*s.r, *ceiling);
  return s;
}

inline Eigen::MatrixXd select_rows(const Eigen::MatrixXd& m, const std::vector<Eigen::Index>& rows) {
  return m(rows, Eigen::all);
}

inline Eigen::VectorXd select_rows(const Eigen::VectorXd& v, const std::vector<Eigen::Index>& rows) {
  return v(rows);
}

struct CvResult {
  ScoreResult mean;  // r averaged over scored folds; n = total test rows scored
  std::size_t folds_scored = 0;
  std::size_t folds_undefined = 0;
  std::vector<ScoreResult> per_fold;
};

/// Per-subject k-fold CV: for every subject and fold, fit on that subject's other folds and
/// score on the held-out fold. Folds with fewer than 2 test rows, or with a constant prediction
/// or response, are UNDEFINED and left out of the average.
inline CvResult crossval_by_subject(const Eigen::MatrixXd& x, const Eigen::VectorXd& y,
                                    const std::vector<std::string>& subjects, const std::vector<int>& folds,
                                    const FitOptions& opts = {}) {
  const auto n = static_cast<std::size_t>(x.rows());
  if (subjects.size() != n || folds.size() != n || static_cast<std::size_t>(y.size()) != n) {
    throw NumericalError("crossval_by_subject: inconsistent row counts");
  }
  std::map<std::string, std::vector<Eigen::Index>> by_subject;
  for (std::size_t i = 0; i < n; ++i) by_subject[subjects[i]].push_back(static_cast<Eigen::Index>(i));

  CvResult out;
  double sum = 0.0;
  for (const auto& [subject, rows] : by_subject) {
    const int k = 1 + *std::max_element(folds.begin(), folds.end());
    for (int f = 0; f < k; ++f) {
      std::vector<Eigen::Index> train, test;
      for (const auto i : rows) (folds[static_cast<std::size_t>(i)] == f ? test : train).push_back(i);
      if (test.empty()) continue;
      ScoreResult s;
      s.n = test.size();
      if (test.size() >= 2 && !train.empty()) {
        const auto model = fit_linear(select_rows(x, train), select_rows(y, train), opts);
        s = pearson(predict(model, select_rows(x, test)), select_rows(y, test));
      }
      out.per_fold.push_back(s);
      if (s.r) {
        sum += *s.r;
        ++out.folds_scored;
        out.mean.n += s.n;
      } else {
        ++out.folds_undefined;
      }
    }
  }
  if (out.folds_scored > 0) out.mean.r = sum / static_cast<double>(out.folds_scored);
  return out;
}

} // namespace psyfit
