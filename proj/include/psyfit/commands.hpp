#pragma once

// The batch commands behind the CLI. Each command reads a RunConfig, writes its outputs under
// the output directory next to a copy of the config, and throws psyfit::Error subclasses on
// failure (mapped to exit codes by exit_code()).

#include <cmath>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>
#include <set>
#include <string>
#include <vector>

#include "psyfit/bundle.hpp"
#include "psyfit/config.hpp"
#include "psyfit/corpus.hpp"
#include "psyfit/experiments.hpp"
#include "psyfit/preprocess.hpp"
#include "psyfit/report.hpp"
#include "psyfit/synth.hpp"

namespace psyfit {

enum ExitCode : int { kExitOk = 0, kExitOther = 1, kExitConfig = 2, kExitData = 3, kExitNumerical = 4 };

inline int exit_code(const std::exception& e) {
  if (dynamic_cast<const ConfigError*>(&e)) return kExitConfig;
  if (dynamic_cast<const DataError*>(&e)) return kExitData;
  if (dynamic_cast<const NumericalError*>(&e)) return kExitNumerical;
  return kExitOther;
}

namespace detail {

inline const std::string& require_path(const std::optional<std::string>& p, const char* key, CorpusKind kind) {
  if (!p) {
    throw ConfigError(std::string("[dataset] ") + key + " is required for kind " + std::string(to_string(kind)));
  }
  return *p;
}

/// Consecutive scan times of a document must be whole multiples of TR apart.
inline void check_scan_spacing(const ResponseTable& table, double tr) {
  std::map<std::string, std::set<double>> scans;
  for (const auto& r : table.rows) {
    if (r.onset_time) scans[r.doc_id].insert(*r.onset_time);
  }
  for (const auto& [doc, times] : scans) {
    double prev = *times.begin();
    for (double t : times) {
      const double steps = (t - prev) / tr;
      if (std::abs(steps - std::round(steps)) > 1e-6) {
        throw DataError("document '" + doc + "': scan times " + tsv::format_double(prev) + " and " +
                        tsv::format_double(t) + " are not on the TR grid (tr = " + tsv::format_double(tr) + ")");
      }
      prev = t;
    }
  }
}

inline std::ofstream create(const std::filesystem::path& path) { return open_output(path.string()); }

} // namespace detail

/// Reads, filters and partitions every response file of the configured dataset.
inline Dataset load_dataset(const RunConfig& cfg, FilterAudit* audit = nullptr) {
  const auto& dc = cfg.dataset;
  if (dc.responses.empty()) throw ConfigError("[dataset] responses: no response files listed");
  Dataset ds;
  ds.id = dc.id;
  ds.kind = dc.kind;
  ds.ceiling = dc.ceiling;
  ds.hrf = cfg.hrf;

  std::set<std::string> names;
  for (const auto& path : dc.responses) {
    DatasetPart part;
    part.name = std::filesystem::path(path).stem().string();
    if (!names.insert(part.name).second) {
      throw ConfigError("[dataset] responses: two files share the name '" + part.name + "'");
    }
    auto table = read_response_table(path, dc.kind);
    const bool word_level = dc.kind == CorpusKind::Spr || dc.kind == CorpusKind::EyeTracking;
    if (word_level && dc.derive_boundary_flags) table = derive_boundary_flags(std::move(table));

    switch (dc.kind) {
      case CorpusKind::Spr:
        table = filter_spr(table, read_comprehension(detail::require_path(dc.comprehension, "comprehension", dc.kind)),
                           cfg.preprocess, audit);
        break;
      case CorpusKind::EyeTracking: {
        const auto fixations = read_fixations(detail::require_path(dc.fixations, "fixations", dc.kind));
        table = filter_et(attach_go_past(std::move(table), compute_go_past(fixations)), fixations, cfg.preprocess,
                          audit);
        break;
      }
      case CorpusKind::FmriTimeSeries:
        part.events = read_word_events(detail::require_path(dc.word_events, "word_events", dc.kind));
        detail::check_scan_spacing(table, cfg.tr);
        [[fallthrough]];
      case CorpusKind::FmriSentence:
        if (dc.region_mode == RegionMode::Mean) table = aggregate_regions(table, dc.bold_aggregation);
        break;
      case CorpusKind::Generic: break;
    }
    if (table.empty()) throw DataError(path + ": no rows left after preprocessing");
    part.partition = dc.partition_file ? read_partition_file(*dc.partition_file, table)
                                       : partition(table, dc.partition, cfg.partition_seed());
    part.table = std::move(table);
    ds.parts.push_back(std::move(part));
  }
  return ds;
}

inline std::vector<VectorBundle> load_bundles(const std::vector<std::string>& paths) {
  std::vector<VectorBundle> out;
  out.reserve(paths.size());
  for (const auto& p : paths) out.push_back(read_vector_bundle(p));
  return out;
}

/// Creates the output directory and stores a verbatim copy of the config in it.
inline std::filesystem::path prepare_output(const RunConfig& cfg) {
  const std::filesystem::path dir(cfg.output_dir);
  std::error_code ec;
  std::filesystem::create_directories(dir, ec);
  if (ec) throw ConfigError("cannot create output directory '" + dir.string() + "': " + ec.message());
  if (std::filesystem::exists(cfg.source)) {
    const auto target = dir / "config.ini";
    if (!std::filesystem::exists(target) || !std::filesystem::equivalent(cfg.source, target)) {
      std::filesystem::copy_file(cfg.source, target, std::filesystem::copy_options::overwrite_existing);
    }
  }
  auto info = detail::create(dir / "run_info.txt");
  info << "seed\t" << (cfg.seed ? std::to_string(*cfg.seed) : std::string("unset")) << '\n';
  info << "workers\t" << cfg.workers << '\n';
  return dir;
}

inline void write_audit(std::ostream& out, const FilterAudit& audit) {
  out << "rows_in: " << audit.rows_in << '\n';
  for (const auto& [rule, n] : audit.excluded) out << rule << ": " << n << '\n';
  out << "rows_out: " << audit.rows_out << '\n';
}

/// Writes <part>.responses.tsv, <part>.partition.tsv and audit.txt.
inline Dataset cmd_preprocess(const RunConfig& cfg) {
  const auto dir = prepare_output(cfg);
  FilterAudit audit;
  auto ds = load_dataset(cfg, &audit);
  for (const auto& part : ds.parts) {
    auto responses = detail::create(dir / (part.name + ".responses.tsv"));
    write_response_table(responses, part.table);
    auto labels = detail::create(dir / (part.name + ".partition.tsv"));
    write_partition(labels, part.table, part.partition);
  }
  auto log = detail::create(dir / "audit.txt");
  write_audit(log, audit);
  return ds;
}

inline ScoringOptions scoring_options(const RunConfig& cfg) { return {cfg.fit, cfg.workers}; }

inline std::vector<std::string> all_bundle_paths(const RunConfig& cfg) {
  auto paths = cfg.untrained_bundles;
  paths.insert(paths.end(), cfg.trained_bundles.begin(), cfg.trained_bundles.end());
  if (paths.empty()) throw ConfigError("[models] no bundles listed: set untrained and/or trained");
  return paths;
}

inline std::vector<BundlePair> load_pairs(const RunConfig& cfg) {
  if (cfg.untrained_bundles.empty() || cfg.untrained_bundles.size() != cfg.trained_bundles.size()) {
    throw ConfigError("[models] residualization needs equally many untrained and trained bundles (got " +
                      std::to_string(cfg.untrained_bundles.size()) + " and " +
                      std::to_string(cfg.trained_bundles.size()) + ")");
  }
  std::vector<BundlePair> pairs;
  for (std::size_t i = 0; i < cfg.trained_bundles.size(); ++i) {
    pairs.push_back({read_vector_bundle(cfg.untrained_bundles[i]), read_vector_bundle(cfg.trained_bundles[i])});
  }
  return pairs;
}

/// Scores every listed bundle and writes results.tsv (untrained bundles first).
inline std::vector<VariantScore> cmd_evaluate(const RunConfig& cfg) {
  const auto paths = all_bundle_paths(cfg);
  const auto dir = prepare_output(cfg);
  const auto ds = load_dataset(cfg);
  const auto scores = run_experiment1(load_bundles(paths), ds, scoring_options(cfg));
  auto out = detail::create(dir / "results.tsv");
  write_results(out, scores);
  return scores;
}

/// Residualized scores of trained bundles over their untrained counterparts (paired by position);
/// writes residualized.tsv.
inline std::vector<VariantScore> cmd_residualize(const RunConfig& cfg) {
  const auto pairs = load_pairs(cfg);
  const auto dir = prepare_output(cfg);
  const auto ds = load_dataset(cfg);
  const auto scores = run_experiment3(pairs, ds, scoring_options(cfg));
  auto out = detail::create(dir / "residualized.tsv");
  write_results(out, scores);
  return scores;
}

/// Full scaling analysis: results.tsv, residualized.tsv (when bundles pair up), scaling.tsv, and
/// for every score set and group a plot (scaling_<set>_<group>.svg) with its numbers (.tsv).
inline std::vector<ScalingReport> cmd_scaling(const RunConfig& cfg) {
  const auto paths = all_bundle_paths(cfg);
  const auto dir = prepare_output(cfg);
  const auto ds = load_dataset(cfg);
  const auto opts = scoring_options(cfg);
  const auto bundles = load_bundles(paths);
  const auto scores = run_experiment1(bundles, ds, opts);
  {
    auto out = detail::create(dir / "results.tsv");
    write_results(out, scores);
  }

  const auto n_untrained = static_cast<std::ptrdiff_t>(cfg.untrained_bundles.size());
  std::vector<std::pair<std::string, std::vector<VariantScore>>> sets;
  if (n_untrained > 0) sets.emplace_back("untrained", std::vector(scores.begin(), scores.begin() + n_untrained));
  if (!cfg.trained_bundles.empty()) sets.emplace_back("trained", std::vector(scores.begin() + n_untrained, scores.end()));
  if (!cfg.untrained_bundles.empty() && cfg.untrained_bundles.size() == cfg.trained_bundles.size()) {
    std::vector<BundlePair> pairs;
    for (std::size_t i = 0; i < cfg.trained_bundles.size(); ++i) {
      pairs.push_back({bundles[i], bundles[cfg.untrained_bundles.size() + i]});
    }
    auto residual = run_experiment3(pairs, ds, opts);
    auto out = detail::create(dir / "residualized.tsv");
    write_results(out, residual);
    sets.emplace_back("residualized", std::move(residual));
  }

  std::vector<ScalingReport> reports;
  for (const auto& [label, set] : sets) {
    auto group = scaling_reports(label, set, cfg.per_family, cfg.n_permutations, cfg.permutation_seed(), cfg.workers);
    reports.insert(reports.end(), group.begin(), group.end());
  }
  {
    auto out = detail::create(dir / "scaling.tsv");
    write_scaling_summary(out, reports);
  }
  for (const auto& r : reports) {
    const auto stem = "scaling_" + r.label + "_" + r.group;
    auto svg = detail::create(dir / (stem + ".svg"));
    write_scaling_svg(svg, r);
    auto pts = detail::create(dir / (stem + ".tsv"));
    write_scaling_points(pts, r);
  }
  return reports;
}

/// Writes a synthetic dataset: responses.tsv, one untrained and one trained bundle per width
/// under bundles/, and run.ini, a config that runs the full pipeline on them.
inline void cmd_synth(const RunConfig& cfg) {
  const auto dir = prepare_output(cfg);
  auto spec = cfg.synth.spec;
  spec.seed = cfg.synth_seed();
  const auto corpus = synth::gen_latent_regression(spec);
  write_response_table((dir / "responses.tsv").string(), corpus.table);

  std::filesystem::create_directories(dir / "bundles");
  std::vector<std::string> untrained, trained;
  for (const int width : spec.feature_widths) {
    const auto write = [&](double leak, std::uint64_t steps, std::vector<std::string>& list) {
      synth::BundleOptions opts{steps, spec.max_subwords, "synth"};
      const auto bundle = synth::gen_random_feature_bundle(corpus, width, spec.seed, leak, opts);
      const auto rel = "bundles/" + bundle.meta.model_name + ".vbnd";
      write_vector_bundle((dir / rel).string(), bundle);
      list.push_back(rel);
    };
    write(cfg.synth.untrained_leak, kUntrainedSteps, untrained);
    write(cfg.synth.trained_leak, kFullyTrainedSteps, trained);
  }

  const auto join = [](const std::vector<std::string>& v) {
    std::string s;
    for (const auto& x : v) s += (s.empty() ? "" : ", ") + x;
    return s;
  };
  auto ini = detail::create(dir / "run.ini");
  ini << "[run]\nseed = " << spec.seed << "\nworkers = " << cfg.workers << "\noutput_dir = results\n\n";
  ini << "[dataset]\nid = synth\nkind = generic\nresponses = responses.tsv\npartition = three_way\n\n";
  ini << "[regression]\nridge_lambda = " << tsv::format_double(cfg.fit.ridge_lambda) << "\nsolver = "
      << to_string(cfg.fit.solver) << "\n\n";
  ini << "[models]\nuntrained = " << join(untrained) << "\ntrained = " << join(trained) << "\n\n";
  ini << "[scaling]\nn_permutations = " << cfg.n_permutations << "\nper_family = false\n";
}

} // namespace psyfit
