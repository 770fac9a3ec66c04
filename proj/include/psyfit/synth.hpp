#pragma once

// Synthetic corpora and feature bundles with known ground truth.
//
// Words carry k-dimensional standard-normal latents L. Responses are y = L w + noise, with w
// drawn N(0, 1/k) so the signal variance is close to 1. A bundle of width d holds features
//
//   F = sqrt(leak) * L P + sqrt(1 - leak) * E,   P ~ N(0, 1/k)^(k x d),  E ~ N(0, 1)^(n x d)
//
// so leak = 0 is pure noise and leak = 1 a noiseless projection of the latents. Each generator
// draws from its own engine seeded from (seed, stream id); outputs depend on nothing else.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <map>
#include <random>
#include <string>
#include <vector>

#include <Eigen/Core>

#include "psyfit/bundle.hpp"
#include "psyfit/corpus.hpp"
#include "psyfit/error.hpp"
#include "psyfit/hash.hpp"

namespace psyfit::synth {

struct SynthSpec {
  int n_subjects = 1;
  int n_docs = 10;
  int sentences_per_doc = 10;
  int words_per_sentence = 10;
  int latent_dim = 4;
  double noise_sigma = 1.0;
  std::vector<int> feature_widths{8, 32, 128, 512};
  std::uint64_t seed = 0;
  /// Each word is split into 1..max_subwords tokens whose mean is the word's feature vector.
  int max_subwords = 1;

  void validate() const {
    if (n_subjects <= 0 || n_docs <= 0 || sentences_per_doc <= 0 || words_per_sentence <= 0 || latent_dim <= 0 ||
        max_subwords <= 0) {
      throw ConfigError("synth: all counts must be positive");
    }
    if (!(noise_sigma >= 0.0)) throw ConfigError("synth: noise_sigma must be >= 0");
    for (int w : feature_widths) {
      if (w <= 0) throw ConfigError("synth: feature widths must be positive");
    }
  }

  [[nodiscard]] std::size_t word_count() const {
    return static_cast<std::size_t>(n_docs) * static_cast<std::size_t>(sentences_per_doc) *
           static_cast<std::size_t>(words_per_sentence);
  }
};

enum Stream : std::uint64_t { kLatents = 1, kWeights = 2, kNoise = 3, kProjection = 4, kFeatureNoise = 5, kSplit = 6 };

inline std::mt19937_64 engine(std::uint64_t seed, std::uint64_t stream, std::uint64_t sub = 0) {
  return std::mt19937_64(mix64(mix64(seed) ^ mix64(stream * 0x100000001b3ULL + sub)));
}

inline Eigen::MatrixXd gaussian_matrix(Eigen::Index rows, Eigen::Index cols, std::mt19937_64& rng, double sd = 1.0) {
  std::normal_distribution<double> n01(0.0, 1.0);
  Eigen::MatrixXd m(rows, cols);
  for (Eigen::Index i = 0; i < rows; ++i) {
    for (Eigen::Index j = 0; j < cols; ++j) m(i, j) = sd * n01(rng);
  }
  return m;
}

struct SynthCorpus {
  ResponseTable table;
  std::vector<WordKey> words;  // row i of `latents`
  Eigen::MatrixXd latents;     // words x latent_dim
  Eigen::VectorXd true_weights;

  /// Signal variance implied by the generating weights.
  [[nodiscard]] double signal_variance() const { return true_weights.squaredNorm(); }
};

/// Latent regression corpus: one generic-kind response per (subject, word).
inline SynthCorpus gen_latent_regression(const SynthSpec& spec) {
  spec.validate();
  SynthCorpus c;
  for (int d = 0; d < spec.n_docs; ++d) {
    for (int s = 0; s < spec.sentences_per_doc; ++s) {
      for (int w = 0; w < spec.words_per_sentence; ++w) {
        c.words.push_back({"doc" + std::to_string(d), static_cast<std::uint32_t>(s), static_cast<std::uint32_t>(w)});
      }
    }
  }
  const auto n = static_cast<Eigen::Index>(c.words.size());
  const Eigen::Index k = spec.latent_dim;
  auto latent_rng = engine(spec.seed, kLatents);
  c.latents = gaussian_matrix(n, k, latent_rng);
  auto weight_rng = engine(spec.seed, kWeights);
  c.true_weights = gaussian_matrix(k, 1, weight_rng, 1.0 / std::sqrt(static_cast<double>(k))).col(0);
  const Eigen::VectorXd signal = c.latents * c.true_weights;

  c.table.kind = CorpusKind::Generic;
  c.table.rows.reserve(static_cast<std::size_t>(spec.n_subjects) * c.words.size());
  std::normal_distribution<double> n01(0.0, 1.0);
  for (int subj = 0; subj < spec.n_subjects; ++subj) {
    auto noise_rng = engine(spec.seed, kNoise, static_cast<std::uint64_t>(subj));
    for (Eigen::Index i = 0; i < n; ++i) {
      const auto& key = c.words[static_cast<std::size_t>(i)];
      ResponseRecord r;
      r.subject_id = "s" + std::to_string(subj);
      r.doc_id = key.doc_id;
      r.sentence_id = key.sentence_id;
      r.word_index = key.word_index;
      r.word_text = "w" + std::to_string(i);
      r.response = signal(i) + spec.noise_sigma * n01(noise_rng);
      c.table.rows.push_back(std::move(r));
    }
  }
  return c;
}

/// Nominal parameter count assigned to a synthetic bundle of width d (12 d^2, one transformer
/// block's worth), so widths map onto a log-parameter axis.
inline std::uint64_t synthetic_parameter_count(int width) {
  return 12ULL * static_cast<std::uint64_t>(width) * static_cast<std::uint64_t>(width);
}

/// Word-level feature matrix F (words x width) for the given seed and leak.
inline Eigen::MatrixXd random_features(const Eigen::MatrixXd& latents, int width, std::uint64_t seed, double leak) {
  if (width < 1) throw ConfigError("synth: width must be >= 1");
  if (!(leak >= 0.0 && leak <= 1.0)) throw ConfigError("synth: signal_leak must be in [0, 1]");
  const Eigen::Index k = latents.cols();
  auto proj_rng = engine(seed, kProjection, static_cast<std::uint64_t>(width));
  const Eigen::MatrixXd p = gaussian_matrix(k, width, proj_rng, 1.0 / std::sqrt(static_cast<double>(k)));
  auto noise_rng = engine(seed, kFeatureNoise, static_cast<std::uint64_t>(width));
  const Eigen::MatrixXd e = gaussian_matrix(latents.rows(), width, noise_rng);
  return std::sqrt(leak) * (latents * p) + std::sqrt(1.0 - leak) * e;
}

struct BundleOptions {
  std::uint64_t training_steps = kUntrainedSteps;
  int max_subwords = 1;
  std::string name_prefix = "synth";
};

/// Packs word-level features into a token bundle. Words are split into 1..max_subwords tokens
/// with zero-mean jitter, so subword averaging recovers the word vector up to float rounding.
inline VectorBundle pack_bundle(const std::vector<WordKey>& words, const Eigen::MatrixXd& features,
                                std::uint64_t seed, const BundleOptions& opts = {}) {
  if (static_cast<std::size_t>(features.rows()) != words.size()) {
    throw DataError("synth: feature rows do not match word count");
  }
  const auto width = static_cast<int>(features.cols());
  VectorBundle b;
  b.meta.model_name = opts.name_prefix + "-d" + std::to_string(width) + "-step" + std::to_string(opts.training_steps);
  b.meta.family = "synth";
  b.meta.parameter_count = synthetic_parameter_count(width);
  b.meta.d_model = static_cast<std::uint32_t>(width);
  b.meta.training_steps = opts.training_steps;
  b.meta.init_seed = static_cast<std::int64_t>(seed & 0x7fffffffffffffffULL);

  auto split_rng = engine(seed, kSplit, static_cast<std::uint64_t>(width));
  std::uniform_int_distribution<int> n_tokens(1, std::max(1, opts.max_subwords));
  std::normal_distribution<double> jitter(0.0, 0.1);
  std::vector<Eigen::RowVectorXd> rows;
  std::map<std::string, std::uint64_t> next_index;
  for (std::size_t w = 0; w < words.size(); ++w) {
    const int m = opts.max_subwords > 1 ? n_tokens(split_rng) : 1;
    Eigen::MatrixXd j(m, width);
    for (int t = 0; t < m; ++t) {
      for (int c = 0; c < width; ++c) j(t, c) = m > 1 ? jitter(split_rng) : 0.0;
    }
    j.rowwise() -= j.colwise().mean();
    for (int t = 0; t < m; ++t) {
      b.tokens.push_back({words[w].doc_id, next_index[words[w].doc_id]++, words[w].sentence_id, words[w].word_index});
      rows.push_back(features.row(static_cast<Eigen::Index>(w)) + j.row(t));
    }
  }
  b.vectors.resize(static_cast<Eigen::Index>(rows.size()), width);
  for (std::size_t i = 0; i < rows.size(); ++i) b.vectors.row(static_cast<Eigen::Index>(i)) = rows[i].cast<float>();
  return b;
}

inline VectorBundle gen_random_feature_bundle(const SynthCorpus& corpus, int width, std::uint64_t seed, double leak,
                                              const BundleOptions& opts = {}) {
  return pack_bundle(corpus.words, random_features(corpus.latents, width, seed, leak), seed, opts);
}

} // namespace psyfit::synth
