#pragma once

// Run configuration: one INI-style file with sections. Relative paths resolve against the
// directory of the config file. Every random component needs a seed: a section-specific key
// (dataset.partition_seed, scaling.seed, synth.seed) or the shared [run] seed.

#include <cstdint>
#include <filesystem>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include <boost/property_tree/ini_parser.hpp>
#include <boost/property_tree/ptree.hpp>

#include "psyfit/corpus.hpp"
#include "psyfit/error.hpp"
#include "psyfit/features.hpp"
#include "psyfit/hrf.hpp"
#include "psyfit/preprocess.hpp"
#include "psyfit/regression.hpp"
#include "psyfit/synth.hpp"

namespace psyfit {

enum class RegionMode { Mean, Stack };

struct DatasetConfig {
  std::string id = "dataset";
  CorpusKind kind = CorpusKind::Generic;
  std::vector<std::string> responses;  // one file per part
  std::optional<std::string> comprehension;
  std::optional<std::string> fixations;
  std::optional<std::string> word_events;
  PartitionMode partition = PartitionMode::ThreeWay;
  std::optional<std::string> partition_file;
  std::optional<std::uint64_t> partition_seed;
  std::optional<double> ceiling;
  bool derive_boundary_flags = true;
  RegionMode region_mode = RegionMode::Mean;
  BoldAggregation bold_aggregation = BoldAggregation::Mean;
};

struct SynthConfig {
  synth::SynthSpec spec;
  double untrained_leak = 0.3;
  double trained_leak = 0.6;
  std::optional<std::uint64_t> seed;
};

struct RunConfig {
  std::filesystem::path source;  // the config file itself
  std::optional<std::uint64_t> seed;
  std::size_t workers = 1;
  std::string output_dir = "out";

  DatasetConfig dataset;
  PreprocessConfig preprocess;
  HrfKernel hrf;
  double tr = 2.0;
  FitOptions fit;

  std::vector<std::string> untrained_bundles;
  std::vector<std::string> trained_bundles;

  std::size_t n_permutations = 1000;
  std::optional<std::uint64_t> scaling_seed;
  bool per_family = false;

  SynthConfig synth;

  [[nodiscard]] std::uint64_t require_seed(const std::optional<std::uint64_t>& specific, const char* what) const {
    if (specific) return *specific;
    if (seed) return *seed;
    throw ConfigError(std::string("no seed for ") + what + ": set [run] seed (or a section seed) or pass --seed");
  }

  [[nodiscard]] std::uint64_t partition_seed() const { return require_seed(dataset.partition_seed, "partitioning"); }
  [[nodiscard]] std::uint64_t permutation_seed() const { return require_seed(scaling_seed, "permutation tests"); }
  [[nodiscard]] std::uint64_t synth_seed() const { return require_seed(synth.seed, "synthetic generation"); }
};

namespace detail {

inline std::string trim(std::string s) {
  const auto b = s.find_first_not_of(" \t");
  const auto e = s.find_last_not_of(" \t");
  return b == std::string::npos ? std::string{} : s.substr(b, e - b + 1);
}

inline std::vector<std::string> split_list(const std::string& s) {
  std::vector<std::string> out;
  std::stringstream ss(s);
  std::string item;
  while (std::getline(ss, item, ',')) {
    item = trim(item);
    if (!item.empty()) out.push_back(item);
  }
  return out;
}

class Section {
public:
  Section(const boost::property_tree::ptree& tree, std::string name) : name_(std::move(name)) {
    if (auto child = tree.get_child_optional(name_)) node_ = *child;
  }

  [[nodiscard]] std::optional<std::string> text(const std::string& key) const {
    auto v = node_.get_optional<std::string>(key);
    if (!v) return std::nullopt;
    auto t = trim(*v);
    if (t.empty()) return std::nullopt;
    return t;
  }

  template <typename T>
  [[nodiscard]] std::optional<T> number(const std::string& key) const {
    const auto t = text(key);
    if (!t) return std::nullopt;
    if constexpr (std::is_floating_point_v<T>) {
      if (auto v = tsv::parse_double(*t)) return static_cast<T>(*v);
    } else {
      if (auto v = tsv::parse_int<T>(*t)) return *v;
    }
    throw ConfigError("[" + name_ + "] " + key + ": not a valid number: '" + *t + "'");
  }

  [[nodiscard]] std::optional<bool> flag(const std::string& key) const {
    const auto t = text(key);
    if (!t) return std::nullopt;
    if (*t == "true" || *t == "1" || *t == "yes") return true;
    if (*t == "false" || *t == "0" || *t == "no") return false;
    throw ConfigError("[" + name_ + "] " + key + ": expected true/false, got '" + *t + "'");
  }

  template <typename T>
  void read(const std::string& key, T& dst) const {
    if constexpr (std::is_same_v<T, bool>) {
      if (auto v = flag(key)) dst = *v;
    } else if constexpr (std::is_arithmetic_v<T>) {
      if (auto v = number<T>(key)) dst = *v;
    } else {
      if (auto v = text(key)) dst = *v;
    }
  }

  template <typename T>
  void read(const std::string& key, std::optional<T>& dst) const {
    if constexpr (std::is_arithmetic_v<T>) {
      if (auto v = number<T>(key)) dst = *v;
    } else {
      if (auto v = text(key)) dst = *v;
    }
  }

private:
  std::string name_;
  boost::property_tree::ptree node_;
};

} // namespace detail

inline RunConfig parse_config(std::istream& in, const std::filesystem::path& source = "config.ini") {
  boost::property_tree::ptree tree;
  try {
    boost::property_tree::ini_parser::read_ini(in, tree);
  } catch (const boost::property_tree::ini_parser_error& e) {
    throw ConfigError(source.string() + ": " + e.message() + " (line " + std::to_string(e.line()) + ")");
  }
  const auto base = source.has_parent_path() ? source.parent_path() : std::filesystem::path(".");
  const auto resolve = [&](const std::string& p) {
    const std::filesystem::path path(p);
    return (path.is_absolute() ? path : base / path).lexically_normal().string();
  };
  const auto resolve_opt = [&](std::optional<std::string>& p) {
    if (p) p = resolve(*p);
  };

  RunConfig c;
  c.source = source;
  const detail::Section run(tree, "run");
  run.read("seed", c.seed);
  run.read("workers", c.workers);
  run.read("output_dir", c.output_dir);
  c.output_dir = resolve(c.output_dir);

  const detail::Section ds(tree, "dataset");
  auto& d = c.dataset;
  ds.read("id", d.id);
  if (auto kind = ds.text("kind")) d.kind = parse_corpus_kind(*kind);
  if (auto r = ds.text("responses")) {
    for (const auto& p : detail::split_list(*r)) d.responses.push_back(resolve(p));
  }
  ds.read("comprehension", d.comprehension);
  ds.read("fixations", d.fixations);
  ds.read("word_events", d.word_events);
  resolve_opt(d.comprehension);
  resolve_opt(d.fixations);
  resolve_opt(d.word_events);
  if (auto p = ds.text("partition")) {
    if (*p == "three_way") {
      d.partition = PartitionMode::ThreeWay;
    } else if (*p == "cv5_by_subject") {
      d.partition = PartitionMode::Cv5BySubject;
    } else {
      throw ConfigError("[dataset] partition: expected three_way or cv5_by_subject, got '" + *p + "'");
    }
  }
  ds.read("partition_file", d.partition_file);
  resolve_opt(d.partition_file);
  ds.read("partition_seed", d.partition_seed);
  ds.read("ceiling", d.ceiling);
  if (d.ceiling && !(*d.ceiling > 0.0)) throw ConfigError("[dataset] ceiling must be positive");
  ds.read("derive_boundary_flags", d.derive_boundary_flags);
  if (auto m = ds.text("region_mode")) {
    if (*m == "mean") {
      d.region_mode = RegionMode::Mean;
    } else if (*m == "stack") {
      d.region_mode = RegionMode::Stack;
    } else {
      throw ConfigError("[dataset] region_mode: expected mean or stack");
    }
  }
  if (auto m = ds.text("bold_aggregation")) {
    if (*m == "mean") {
      d.bold_aggregation = BoldAggregation::Mean;
    } else if (*m == "median") {
      d.bold_aggregation = BoldAggregation::Median;
    } else {
      throw ConfigError("[dataset] bold_aggregation: expected mean or median");
    }
  }

  const detail::Section pre(tree, "preprocess");
  auto& pc = c.preprocess;
  if (auto w = pre.text("rt_window_ms")) {
    const auto parts = detail::split_list(*w);
    const auto lo = parts.size() == 2 ? tsv::parse_double(parts[0]) : std::nullopt;
    const auto hi = parts.size() == 2 ? tsv::parse_double(parts[1]) : std::nullopt;
    if (!lo || !hi || *lo > *hi) throw ConfigError("[preprocess] rt_window_ms: expected 'min, max'");
    pc.rt_min_ms = *lo;
    pc.rt_max_ms = *hi;
  }
  pre.read("max_skip_words", pc.max_skip_words);
  pre.read("comprehension_min_correct", pc.comprehension_min_correct);
  pre.read("filter_line_screen", pc.filter_line_screen);
  if (auto m = pre.text("comprehension_mode")) {
    if (*m == "subject_mean") {
      pc.comprehension_mode = ComprehensionMode::SubjectMean;
    } else if (*m == "per_story") {
      pc.comprehension_mode = ComprehensionMode::PerStory;
    } else {
      throw ConfigError("[preprocess] comprehension_mode: expected subject_mean or per_story");
    }
  }

  const detail::Section hrf(tree, "hrf");
  hrf.read("peak_delay", c.hrf.peak_delay);
  hrf.read("undershoot_delay", c.hrf.undershoot_delay);
  hrf.read("peak_dispersion", c.hrf.peak_dispersion);
  hrf.read("undershoot_dispersion", c.hrf.undershoot_dispersion);
  hrf.read("ratio", c.hrf.ratio);
  hrf.read("resolution", c.hrf.resolution);
  hrf.read("length", c.hrf.length);
  hrf.read("tr", c.tr);
  c.hrf.validate();
  if (!(c.tr > 0.0)) throw ConfigError("[hrf] tr must be positive");

  const detail::Section reg(tree, "regression");
  reg.read("ridge_lambda", c.fit.ridge_lambda);
  reg.read("rank_rtol", c.fit.rank_rtol);
  if (auto s = reg.text("solver")) c.fit.solver = parse_solver(*s);
  if (!(c.fit.ridge_lambda >= 0.0)) throw ConfigError("[regression] ridge_lambda must be >= 0");

  const detail::Section models(tree, "models");
  if (auto u = models.text("untrained")) {
    for (const auto& p : detail::split_list(*u)) c.untrained_bundles.push_back(resolve(p));
  }
  if (auto t = models.text("trained")) {
    for (const auto& p : detail::split_list(*t)) c.trained_bundles.push_back(resolve(p));
  }

  const detail::Section sc(tree, "scaling");
  sc.read("n_permutations", c.n_permutations);
  sc.read("seed", c.scaling_seed);
  sc.read("per_family", c.per_family);
  if (c.n_permutations < 1) throw ConfigError("[scaling] n_permutations must be >= 1");

  const detail::Section sy(tree, "synth");
  auto& s = c.synth.spec;
  sy.read("n_subjects", s.n_subjects);
  sy.read("n_docs", s.n_docs);
  sy.read("sentences_per_doc", s.sentences_per_doc);
  sy.read("words_per_sentence", s.words_per_sentence);
  sy.read("latent_dim", s.latent_dim);
  sy.read("noise_sigma", s.noise_sigma);
  sy.read("max_subwords", s.max_subwords);
  if (auto w = sy.text("widths")) {
    s.feature_widths.clear();
    for (const auto& item : detail::split_list(*w)) {
      const auto v = tsv::parse_int<int>(item);
      if (!v) throw ConfigError("[synth] widths: bad width '" + item + "'");
      s.feature_widths.push_back(*v);
    }
  }
  sy.read("untrained_leak", c.synth.untrained_leak);
  sy.read("trained_leak", c.synth.trained_leak);
  sy.read("seed", c.synth.seed);
  return c;
}

inline RunConfig load_config(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open config '" + path.string() + "'");
  return parse_config(in, path);
}

} // namespace psyfit
