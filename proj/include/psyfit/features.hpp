#pragma once

// Turning token vectors into predictor rows aligned with response rows.

#include <algorithm>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <tuple>
#include <utility>
#include <vector>

#include <Eigen/Core>

#include "psyfit/bundle.hpp"
#include "psyfit/corpus.hpp"
#include "psyfit/error.hpp"
#include "psyfit/hrf.hpp"

namespace psyfit {

template <typename Key>
using FeatureMap = std::map<Key, Eigen::VectorXd>;

struct RowKey {
  std::string subject_id;
  std::string doc_id;
  std::uint32_t sentence_id = 0;
  std::uint32_t word_index = 0;
  std::optional<double> onset_time;
  std::string region;

  static RowKey of(const ResponseRecord& r) {
    return {r.subject_id, r.doc_id, r.sentence_id, r.word_index, r.onset_time, r.region};
  }

  friend bool operator==(const RowKey&, const RowKey&) = default;
};

/// Predictor matrix whose rows line up 1:1 with a response table.
struct DesignMatrix {
  Eigen::MatrixXd values;
  std::vector<RowKey> row_keys;

  [[nodiscard]] Eigen::Index rows() const noexcept { return values.rows(); }
  [[nodiscard]] Eigen::Index cols() const noexcept { return values.cols(); }
};

/// Per-word vectors: the mean of each word's subword-token vectors.
inline FeatureMap<WordKey> word_vectors(const VectorBundle& bundle) {
  std::map<WordKey, std::pair<Eigen::VectorXd, int>> acc;
  for (std::size_t i = 0; i < bundle.tokens.size(); ++i) {
    const Eigen::VectorXd v = bundle.vectors.row(static_cast<Eigen::Index>(i)).transpose().cast<double>();
    auto [it, fresh] = acc.try_emplace(bundle.tokens[i].word_key(), v, 1);
    if (!fresh) {
      it->second.first += v;
      ++it->second.second;
    }
  }
  FeatureMap<WordKey> out;
  for (auto& [key, sum_count] : acc) out.emplace_hint(out.end(), key, sum_count.first / sum_count.second);
  return out;
}

/// Vector of the last word of each sentence (subword tokens averaged).
inline FeatureMap<SentenceKey> sentence_final_vector(const FeatureMap<WordKey>& words) {
  FeatureMap<SentenceKey> out;
  // Words are ordered by (doc, sentence, word_index), so the last one seen per sentence wins.
  for (const auto& [key, vec] : words) out.insert_or_assign(SentenceKey{key.doc_id, key.sentence_id}, vec);
  return out;
}

inline FeatureMap<SentenceKey> sentence_final_vector(const VectorBundle& bundle) {
  if (bundle.tokens.empty()) throw DataError("bundle '" + bundle.meta.model_name + "' has no tokens");
  return sentence_final_vector(word_vectors(bundle));
}

enum class BoldAggregation { Mean, Median };

inline double aggregate_bold(std::vector<double> values, BoldAggregation mode = BoldAggregation::Mean) {
  if (values.empty()) throw DataError("aggregate_bold: no region values");
  if (mode == BoldAggregation::Mean) {
    double sum = 0.0;
    for (double v : values) sum += v;
    return sum / static_cast<double>(values.size());
  }
  const auto mid = values.size() / 2;
  std::nth_element(values.begin(), values.begin() + static_cast<std::ptrdiff_t>(mid), values.end());
  const double hi = values[mid];
  if (values.size() % 2 == 1) return hi;
  const double lo = *std::max_element(values.begin(), values.begin() + static_cast<std::ptrdiff_t>(mid));
  return 0.5 * (lo + hi);
}

inline double aggregate_bold(const std::map<std::string, double>& per_region,
                             BoldAggregation mode = BoldAggregation::Mean) {
  std::vector<double> values;
  values.reserve(per_region.size());
  for (const auto& [region, v] : per_region) values.push_back(v);
  return aggregate_bold(std::move(values), mode);
}

/// Collapses the region axis: rows sharing every key except `region` become one row whose
/// response is the aggregate. Output keeps first-occurrence order.
inline ResponseTable aggregate_regions(const ResponseTable& table, BoldAggregation mode = BoldAggregation::Mean) {
  using Key = std::tuple<std::string, std::string, std::uint32_t, std::uint32_t, std::optional<double>>;
  std::map<Key, std::size_t> slot;
  std::vector<std::vector<double>> values;
  ResponseTable out{table.kind, {}};
  for (const auto& r : table.rows) {
    if (!r.response) throw DataError("aggregate_regions: row without response");
    Key k{r.subject_id, r.doc_id, r.sentence_id, r.word_index, r.onset_time};
    auto [it, fresh] = slot.try_emplace(std::move(k), out.rows.size());
    if (fresh) {
      out.rows.push_back(r);
      out.rows.back().region.clear();
      values.emplace_back();
    }
    values[it->second].push_back(*r.response);
  }
  for (std::size_t i = 0; i < out.rows.size(); ++i) out.rows[i].response = aggregate_bold(std::move(values[i]), mode);
  return out;
}

/// Joins feature vectors onto table rows in table order. Every missing key is reported.
template <typename Key, typename KeyOf>
DesignMatrix build_design(const ResponseTable& table, const FeatureMap<Key>& features, KeyOf&& key_of,
                          const std::string& context = "features") {
  std::vector<const Eigen::VectorXd*> found(table.size(), nullptr);
  std::set<std::string> missing;
  std::optional<Eigen::Index> width;
  for (std::size_t i = 0; i < table.size(); ++i) {
    const Key key = key_of(table.rows[i]);
    const auto it = features.find(key);
    if (it == features.end()) {
      missing.insert(to_string(key));
      continue;
    }
    if (width && *width != it->second.size()) throw DataError(context + ": inconsistent feature widths");
    width = it->second.size();
    found[i] = &it->second;
  }
  if (!missing.empty()) {
    std::string msg = context + ": no feature vector for " + std::to_string(missing.size()) + " key(s):";
    for (const auto& m : missing) msg += " " + m;
    throw DataError(msg);
  }
  DesignMatrix d;
  d.values.resize(static_cast<Eigen::Index>(table.size()), width.value_or(0));
  d.row_keys.reserve(table.size());
  for (std::size_t i = 0; i < table.size(); ++i) {
    d.values.row(static_cast<Eigen::Index>(i)) = found[i]->transpose();
    d.row_keys.push_back(RowKey::of(table.rows[i]));
  }
  if (!d.values.allFinite()) throw DataError(context + ": non-finite predictor values");
  return d;
}

inline DesignMatrix build_word_design(const ResponseTable& table, const FeatureMap<WordKey>& words,
                                      const std::string& context = "word features") {
  return build_design(table, words, [](const ResponseRecord& r) { return r.word_key(); }, context);
}

inline DesignMatrix build_sentence_design(const ResponseTable& table, const FeatureMap<SentenceKey>& sentences,
                                          const std::string& context = "sentence features") {
  return build_design(table, sentences, [](const ResponseRecord& r) { return r.sentence_key(); }, context);
}

struct ScanKey {
  std::string doc_id;
  double onset = 0.0;

  friend auto operator<=>(const ScanKey&, const ScanKey&) = default;
};

inline std::string to_string(const ScanKey& k) { return k.doc_id + "@" + tsv::format_double(k.onset); }

/// Time-series design: word vectors placed at their onsets, convolved with the HRF and sampled at
/// each scan time that appears in the table for the same document.
inline DesignMatrix build_timeseries_design(const ResponseTable& table, const FeatureMap<WordKey>& words,
                                            const std::vector<WordEvent>& events, const SampledHrf& hrf,
                                            const std::string& context = "hrf features") {
  std::map<std::string, std::vector<const WordEvent*>> events_by_doc;
  for (const auto& e : events) events_by_doc[e.key.doc_id].push_back(&e);
  std::map<std::string, std::set<double>> scans_by_doc;
  for (const auto& r : table.rows) {
    if (!r.onset_time) throw DataError(context + ": time-series row without onset_time");
    scans_by_doc[r.doc_id].insert(*r.onset_time);
  }

  const Eigen::Index d = words.empty() ? 0 : words.begin()->second.size();
  FeatureMap<ScanKey> scan_features;
  std::set<std::string> missing;
  for (const auto& [doc, scans] : scans_by_doc) {
    auto doc_events = events_by_doc[doc];
    std::stable_sort(doc_events.begin(), doc_events.end(),
                     [](const WordEvent* a, const WordEvent* b) { return a->onset < b->onset; });
    Eigen::MatrixXd vecs(static_cast<Eigen::Index>(doc_events.size()), d);
    std::vector<double> onsets;
    for (std::size_t i = 0; i < doc_events.size(); ++i) {
      const auto it = words.find(doc_events[i]->key);
      if (it == words.end()) {
        missing.insert(to_string(doc_events[i]->key));
        continue;
      }
      vecs.row(static_cast<Eigen::Index>(i)) = it->second.transpose();
      onsets.push_back(doc_events[i]->onset);
    }
    if (!missing.empty()) continue;
    const std::vector<double> grid(scans.begin(), scans.end());
    const Eigen::MatrixXd conv = hrf_convolve(vecs, onsets, grid, hrf);
    for (std::size_t s = 0; s < grid.size(); ++s) {
      scan_features.emplace(ScanKey{doc, grid[s]}, conv.row(static_cast<Eigen::Index>(s)).transpose());
    }
  }
  if (!missing.empty()) {
    std::string msg = context + ": no vector for " + std::to_string(missing.size()) + " timed word(s):";
    for (const auto& m : missing) msg += " " + m;
    throw DataError(msg);
  }
  return build_design(table, scan_features, [](const ResponseRecord& r) { return ScanKey{r.doc_id, *r.onset_time}; },
                      context);
}

} // namespace psyfit
