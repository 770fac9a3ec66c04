#pragma once

// Scoring vector bundles against a prepared dataset: raw predictive power of trained and
// untrained bundles, residualized contribution of trained over untrained, and scaling reports.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include <Eigen/Core>

#include "psyfit/bundle.hpp"
#include "psyfit/corpus.hpp"
#include "psyfit/error.hpp"
#include "psyfit/features.hpp"
#include "psyfit/hrf.hpp"
#include "psyfit/parallel.hpp"
#include "psyfit/preprocess.hpp"
#include "psyfit/regression.hpp"
#include "psyfit/scaling.hpp"

namespace psyfit {

/// One partitioned response table. CV datasets with several experiments have one part each.
struct DatasetPart {
  std::string name;
  ResponseTable table;
  PartitionAssignment partition;
  std::vector<WordEvent> events;  // time-series fMRI only
};

struct Dataset {
  std::string id;
  CorpusKind kind = CorpusKind::Generic;
  std::vector<DatasetPart> parts;
  std::optional<double> ceiling;
  HrfKernel hrf;
};

struct ScoringOptions {
  FitOptions fit;
  std::size_t workers = 1;
};

struct VariantScore {
  std::string model_name;
  std::string family;
  std::uint64_t parameter_count = 0;
  std::uint64_t training_steps = 0;
  std::string dataset_id;
  std::optional<double> pearson_r;
  std::optional<double> normalized_r;
  std::size_t n_heldout = 0;

  /// Score used for scaling fits: normalized when a ceiling applies, raw otherwise.
  [[nodiscard]] std::optional<double> reported() const { return normalized_r ? normalized_r : pearson_r; }
};

inline Eigen::VectorXd response_vector(const ResponseTable& table) {
  Eigen::VectorXd y(static_cast<Eigen::Index>(table.size()));
  for (std::size_t i = 0; i < table.size(); ++i) {
    if (!table.rows[i].response) throw DataError("row " + std::to_string(i) + " has no response");
    y(static_cast<Eigen::Index>(i)) = *table.rows[i].response;
  }
  return y;
}

/// Predictor rows for one dataset part: subword-averaged word vectors for reading corpora,
/// sentence-final vectors for per-sentence fMRI, HRF-convolved word vectors for time series.
inline DesignMatrix design_for(const VectorBundle& bundle, const DatasetPart& part, CorpusKind kind,
                               const HrfKernel& hrf) {
  const std::string context = "bundle '" + bundle.meta.model_name + "' on " + part.name;
  const auto words = word_vectors(bundle);
  switch (kind) {
    case CorpusKind::FmriSentence: return build_sentence_design(part.table, sentence_final_vector(words), context);
    case CorpusKind::FmriTimeSeries:
      return build_timeseries_design(part.table, words, part.events, SampledHrf(hrf), context);
    default: return build_word_design(part.table, words, context);
  }
}

namespace detail {

inline std::vector<Eigen::Index> to_index(const std::vector<std::size_t>& rows) {
  return {rows.begin(), rows.end()};
}

inline std::vector<std::string> subjects_of(const ResponseTable& t) {
  std::vector<std::string> s;
  s.reserve(t.size());
  for (const auto& r : t.rows) s.push_back(r.subject_id);
  return s;
}

inline double mean_of(const std::vector<double>& v) {
  double s = 0.0;
  for (double x : v) s += x;
  return s / static_cast<double>(v.size());
}

} // namespace detail

/// Fit on FIT rows, predict HELDOUT rows, correlate.
inline ScoreResult score_split(const Eigen::MatrixXd& x, const Eigen::VectorXd& y, const PartitionAssignment& p,
                               const FitOptions& opts = {}) {
  if (p.mode != PartitionMode::ThreeWay) throw ConfigError("score_split needs a three-way partition");
  const auto fit = detail::to_index(p.rows_with(Split::Fit));
  const auto held = detail::to_index(p.rows_with(Split::Heldout));
  if (fit.empty()) throw DataError("no rows in the fit partition");
  if (held.size() < 2) throw DataError("fewer than 2 rows in the held-out partition");
  const auto model = fit_linear(select_rows(x, fit), select_rows(y, fit), opts);
  return pearson(predict(model, select_rows(x, held)), select_rows(y, held));
}

inline ScoreResult score_part(const Eigen::MatrixXd& x, const Eigen::VectorXd& y, const DatasetPart& part,
                              const FitOptions& opts) {
  if (part.partition.mode == PartitionMode::ThreeWay) return score_split(x, y, part.partition, opts);
  return crossval_by_subject(x, y, detail::subjects_of(part.table), part.partition.folds, opts).mean;
}

/// Averages part scores (experiments of a CV dataset); undefined parts are skipped.
inline ScoreResult combine_parts(const std::vector<ScoreResult>& parts) {
  ScoreResult out;
  std::vector<double> rs;
  for (const auto& s : parts) {
    out.n += s.n;
    if (s.r) rs.push_back(*s.r);
  }
  if (!rs.empty()) out.r = detail::mean_of(rs);
  return out;
}

inline VariantScore make_variant_score(const BundleMeta& meta, const Dataset& ds, const ScoreResult& s,
                                       bool normalize) {
  VariantScore v{meta.model_name, meta.family, meta.parameter_count, meta.training_steps, ds.id, s.r, std::nullopt,
                 s.n};
  if (normalize && ds.ceiling && s.r) v.normalized_r = normalize_ceiling(*s.r, *ds.ceiling);
  return v;
}

inline VariantScore score_bundle(const VectorBundle& bundle, const Dataset& ds, const ScoringOptions& opts = {}) {
  std::vector<ScoreResult> parts;
  for (const auto& part : ds.parts) {
    const auto design = design_for(bundle, part, ds.kind, ds.hrf);
    parts.push_back(score_part(design.values, response_vector(part.table), part, opts.fit));
  }
  return make_variant_score(bundle.meta, ds, combine_parts(parts), true);
}

/// Held-out predictive power of each bundle, in bundle order.
inline std::vector<VariantScore> run_experiment1(const std::vector<VectorBundle>& bundles, const Dataset& ds,
                                                 const ScoringOptions& opts = {}) {
  return parallel_map(bundles.size(), opts.workers, [&](std::size_t i) { return score_bundle(bundles[i], ds, opts); });
}

struct BundlePair {
  VectorBundle untrained;
  VectorBundle trained;
};

inline void check_pair(const BundlePair& p) {
  const auto& u = p.untrained.meta;
  const auto& t = p.trained.meta;
  if (u.d_model != t.d_model || u.parameter_count != t.parameter_count) {
    throw DataError("bundle pair '" + u.model_name + "' / '" + t.model_name +
                    "' differs in architecture (d_model or parameter_count)");
  }
}

struct Experiment2Result {
  std::vector<VariantScore> untrained;
  std::vector<VariantScore> trained;
};

inline Experiment2Result run_experiment2(const std::vector<BundlePair>& pairs, const Dataset& ds,
                                         const ScoringOptions& opts = {}) {
  for (const auto& p : pairs) check_pair(p);
  Experiment2Result out;
  auto scored = parallel_map(pairs.size() * 2, opts.workers, [&](std::size_t i) {
    const auto& p = pairs[i / 2];
    return score_bundle(i % 2 == 0 ? p.untrained : p.trained, ds, opts);
  });
  for (std::size_t i = 0; i < scored.size(); ++i) (i % 2 == 0 ? out.untrained : out.trained).push_back(scored[i]);
  return out;
}

/// Contribution of the trained design beyond the untrained one:
///   U = fit(untrained_fit, y_fit);  r_fit = y_fit - U(untrained_fit)
///   T = fit(trained_fit, r_fit);    r_held = y_held - U(untrained_held)
///   score = pearson(T(trained_held), r_held)
/// UNDEFINED when T's predictions are constant (e.g. the two designs span the same space).
inline ScoreResult residual_contribution(const Eigen::MatrixXd& untrained_x, const Eigen::MatrixXd& trained_x,
                                         const Eigen::VectorXd& y, const std::vector<Eigen::Index>& fit_rows,
                                         const std::vector<Eigen::Index>& held_rows, const FitOptions& opts = {}) {
  if (untrained_x.rows() != trained_x.rows() || untrained_x.rows() != y.size()) {
    throw DataError("residual_contribution: designs are not aligned to the same response rows");
  }
  const Eigen::VectorXd y_fit = select_rows(y, fit_rows);
  const Eigen::MatrixXd u_fit = select_rows(untrained_x, fit_rows);
  const auto untrained_model = fit_linear(u_fit, y_fit, opts);
  const Eigen::VectorXd resid_fit = y_fit - predict(untrained_model, u_fit);
  const auto trained_model = fit_linear(select_rows(trained_x, fit_rows), resid_fit, opts);
  const Eigen::VectorXd resid_held =
      select_rows(y, held_rows) - predict(untrained_model, select_rows(untrained_x, held_rows));
  return pearson(predict(trained_model, select_rows(trained_x, held_rows)), resid_held);
}

inline ScoreResult residual_contribution(const Eigen::MatrixXd& untrained_x, const Eigen::MatrixXd& trained_x,
                                         const Eigen::VectorXd& y, const PartitionAssignment& p,
                                         const FitOptions& opts = {}) {
  if (p.mode != PartitionMode::ThreeWay) throw ConfigError("residual_contribution needs a three-way partition");
  return residual_contribution(untrained_x, trained_x, y, detail::to_index(p.rows_with(Split::Fit)),
                               detail::to_index(p.rows_with(Split::Heldout)), opts);
}

/// CV variant: residualize within every (subject, fold) and average the defined fold scores.
inline ScoreResult residual_contribution_cv(const Eigen::MatrixXd& untrained_x, const Eigen::MatrixXd& trained_x,
                                            const Eigen::VectorXd& y, const std::vector<std::string>& subjects,
                                            const std::vector<int>& folds, const FitOptions& opts = {}) {
  std::map<std::string, std::vector<Eigen::Index>> by_subject;
  for (std::size_t i = 0; i < subjects.size(); ++i) by_subject[subjects[i]].push_back(static_cast<Eigen::Index>(i));
  std::vector<double> rs;
  ScoreResult out;
  for (const auto& [subject, rows] : by_subject) {
    for (int f = 0; f < kCvFolds; ++f) {
      std::vector<Eigen::Index> train, test;
      for (const auto i : rows) (folds[static_cast<std::size_t>(i)] == f ? test : train).push_back(i);
      if (test.size() < 2 || train.empty()) continue;
      const auto s = residual_contribution(untrained_x, trained_x, y, train, test, opts);
      out.n += s.n;
      if (s.r) rs.push_back(*s.r);
    }
  }
  if (!rs.empty()) out.r = detail::mean_of(rs);
  return out;
}

/// Residualized scores of each trained bundle against its untrained counterpart. Scores are raw
/// correlations; no ceiling normalization is applied.
inline std::vector<VariantScore> run_experiment3(const std::vector<BundlePair>& pairs, const Dataset& ds,
                                                 const ScoringOptions& opts = {}) {
  for (const auto& p : pairs) check_pair(p);
  return parallel_map(pairs.size(), opts.workers, [&](std::size_t i) {
    const auto& pair = pairs[i];
    std::vector<ScoreResult> parts;
    for (const auto& part : ds.parts) {
      const auto ux = design_for(pair.untrained, part, ds.kind, ds.hrf);
      const auto tx = design_for(pair.trained, part, ds.kind, ds.hrf);
      const auto y = response_vector(part.table);
      if (part.partition.mode == PartitionMode::ThreeWay) {
        parts.push_back(residual_contribution(ux.values, tx.values, y, part.partition, opts.fit));
      } else {
        parts.push_back(residual_contribution_cv(ux.values, tx.values, y, detail::subjects_of(part.table),
                                                 part.partition.folds, opts.fit));
      }
    }
    return make_variant_score(pair.trained.meta, ds, combine_parts(parts), false);
  });
}

struct ScalingReport {
  std::string label;  // score set, e.g. "trained"
  std::string group;  // family name, or "all" when families are pooled
  std::vector<VariantScore> points;
  std::size_t n_undefined = 0;
  std::optional<LineFit> line;
  std::optional<PermutationResult> permutation;
};

/// Line over (log10 params, reported score) with a two-sided permutation test. Undefined scores
/// are counted and excluded from the fit.
inline ScalingReport scaling_report(std::string label, std::string group, const std::vector<VariantScore>& scores,
                                    std::size_t n_permutations, std::uint64_t seed, std::size_t workers = 1) {
  ScalingReport rep{std::move(label), std::move(group), scores, 0, std::nullopt, std::nullopt};
  std::vector<ScalingPoint> pts;
  for (const auto& s : scores) {
    if (const auto r = s.reported()) {
      pts.push_back({std::log10(static_cast<double>(s.parameter_count)), *r});
    } else {
      ++rep.n_undefined;
    }
  }
  const bool distinct_x = std::any_of(pts.begin(), pts.end(),
                                      [&](const ScalingPoint& p) { return p.log10_params != pts.front().log10_params; });
  if (pts.size() >= 2 && distinct_x) rep.line = fit_scaling_line(pts);
  if (pts.size() >= 3 && distinct_x) rep.permutation = permutation_test_slope(pts, n_permutations, seed, workers);
  return rep;
}

/// One pooled report, or one per family when `per_family` is set.
inline std::vector<ScalingReport> scaling_reports(const std::string& label, const std::vector<VariantScore>& scores,
                                                  bool per_family, std::size_t n_permutations, std::uint64_t seed,
                                                  std::size_t workers = 1) {
  if (!per_family) return {scaling_report(label, "all", scores, n_permutations, seed, workers)};
  std::map<std::string, std::vector<VariantScore>> by_family;
  for (const auto& s : scores) by_family[s.family].push_back(s);
  std::vector<ScalingReport> out;
  for (const auto& [family, group] : by_family) {
    out.push_back(scaling_report(label, family, group, n_permutations, seed, workers));
  }
  return out;
}

} // namespace psyfit
