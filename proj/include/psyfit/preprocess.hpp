#pragma once

// Exclusion rules for reading-time corpora, go-past durations, and deterministic partitioning.

#include <algorithm>
#include <cstdint>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <tuple>
#include <utility>
#include <vector>

#include "psyfit/corpus.hpp"
#include "psyfit/error.hpp"
#include "psyfit/hash.hpp"

namespace psyfit {

enum class ComprehensionMode {
  SubjectMean,  // a subject is dropped when its mean correct answers per story is below the threshold
  PerStory,     // only the subject's rows for a failed story are dropped
};

struct PreprocessConfig {
  double rt_min_ms = 100.0;
  double rt_max_ms = 3000.0;
  int max_skip_words = 4;
  int comprehension_min_correct = 4;
  ComprehensionMode comprehension_mode = ComprehensionMode::SubjectMean;
  /// Drop LINE_BOUNDARY / SCREEN_BOUNDARY rows (corpora with layout annotations such as Dundee).
  bool filter_line_screen = false;
};

/// Per-rule exclusion counts. A row is charged to the first rule that removes it.
struct FilterAudit {
  std::size_t rows_in = 0;
  std::size_t rows_out = 0;
  std::vector<std::pair<std::string, std::size_t>> excluded;

  void add(const std::string& rule, std::size_t n = 1) {
    for (auto& [name, count] : excluded) {
      if (name == rule) {
        count += n;
        return;
      }
    }
    excluded.emplace_back(rule, n);
  }

  [[nodiscard]] std::size_t count(const std::string& rule) const {
    for (const auto& [name, c] : excluded) {
      if (name == rule) return c;
    }
    return 0;
  }
};

namespace detail {

template <typename Pred>
ResponseTable apply_rules(const ResponseTable& table, FilterAudit* audit, Pred&& first_failing_rule) {
  ResponseTable out{table.kind, {}};
  FilterAudit local;
  local.rows_in = table.size();
  for (const auto& row : table.rows) {
    if (const std::optional<std::string> rule = first_failing_rule(row)) {
      local.add(*rule);
    } else {
      out.rows.push_back(row);
    }
  }
  local.rows_out = out.size();
  if (audit) {
    audit->rows_in += local.rows_in;
    audit->rows_out += local.rows_out;
    for (const auto& [rule, n] : local.excluded) audit->add(rule, n);
  }
  return out;
}

} // namespace detail

/// Sets SENTENCE_INITIAL/FINAL and DOC_INITIAL/FINAL from the word keys present in the table.
/// Boundaries come from the union of words over all subjects, so they do not depend on which
/// rows were observed for a particular subject.
inline ResponseTable derive_boundary_flags(ResponseTable table) {
  std::map<SentenceKey, std::pair<std::uint32_t, std::uint32_t>> sentence_span;
  std::map<std::string, std::pair<WordKey, WordKey>> doc_span;
  for (const auto& r : table.rows) {
    const auto sk = r.sentence_key();
    auto [it, fresh] = sentence_span.try_emplace(sk, r.word_index, r.word_index);
    if (!fresh) {
      it->second.first = std::min(it->second.first, r.word_index);
      it->second.second = std::max(it->second.second, r.word_index);
    }
    const auto wk = r.word_key();
    auto [dt, dfresh] = doc_span.try_emplace(r.doc_id, wk, wk);
    if (!dfresh) {
      dt->second.first = std::min(dt->second.first, wk);
      dt->second.second = std::max(dt->second.second, wk);
    }
  }
  for (auto& r : table.rows) {
    const auto& [lo, hi] = sentence_span.at(r.sentence_key());
    if (r.word_index == lo) r.flags.set(Flag::SentenceInitial);
    if (r.word_index == hi) r.flags.set(Flag::SentenceFinal);
    const auto& [first, last] = doc_span.at(r.doc_id);
    const auto wk = r.word_key();
    if (wk == first) r.flags.set(Flag::DocInitial);
    if (wk == last) r.flags.set(Flag::DocFinal);
  }
  return table;
}

/// Self-paced reading exclusions: sentence-initial/final words, subjects failing the
/// comprehension threshold, and reading times outside the closed window [rt_min_ms, rt_max_ms].
inline ResponseTable filter_spr(const ResponseTable& table, const std::vector<ComprehensionScore>& scores,
                                const PreprocessConfig& cfg = {}, FilterAudit* audit = nullptr) {
  if (table.kind != CorpusKind::Spr) throw ConfigError("filter_spr needs an spr table");

  std::map<std::string, std::pair<double, int>> subject_total;  // sum, count
  std::map<std::pair<std::string, std::string>, int> story_score;
  for (const auto& s : scores) {
    auto& [sum, n] = subject_total[s.subject_id];
    sum += s.correct_answers;
    ++n;
    if (!s.doc_id.empty()) story_score[{s.subject_id, s.doc_id}] = s.correct_answers;
  }
  std::set<std::string> missing;
  for (const auto& r : table.rows) {
    if (!subject_total.contains(r.subject_id)) missing.insert(r.subject_id);
  }
  if (!missing.empty()) {
    std::string names;
    for (const auto& m : missing) names += (names.empty() ? "" : ", ") + m;
    throw ConfigError("no comprehension scores for subject(s): " + names);
  }

  const auto passes_comprehension = [&](const ResponseRecord& r) {
    if (cfg.comprehension_mode == ComprehensionMode::PerStory) {
      if (auto it = story_score.find({r.subject_id, r.doc_id}); it != story_score.end()) {
        return it->second >= cfg.comprehension_min_correct;
      }
    }
    const auto& [sum, n] = subject_total.at(r.subject_id);
    return sum / n >= cfg.comprehension_min_correct;
  };

  return detail::apply_rules(table, audit, [&](const ResponseRecord& r) -> std::optional<std::string> {
    if (r.flags.has(Flag::SentenceInitial) || r.flags.has(Flag::SentenceFinal)) return "sentence_boundary";
    if (!passes_comprehension(r)) return "comprehension";
    if (!r.response || *r.response < cfg.rt_min_ms || *r.response > cfg.rt_max_ms) return "rt_window";
    return std::nullopt;
  });
}

/// Go-past measures for one fixated word of one trial.
struct GoPastMeasure {
  std::string subject_id;
  std::string doc_id;
  std::uint32_t word_position = 0;
  double go_past = 0.0;
  double first_fixation = 0.0;
  /// word_position(first fixation) - word_position(preceding fixation); absent for a trial's first fixation.
  std::optional<std::int64_t> entry_delta;
};

/// Go-past duration for every fixated word: the summed durations from the word's first fixation
/// up to (not including) the first later fixation on a word further right.
///
/// Fixations must be ordered by strictly increasing sequence_index within each (subject, doc).
inline std::vector<GoPastMeasure> compute_go_past(const std::vector<FixationRecord>& fixations) {
  std::map<std::pair<std::string, std::string>, std::vector<const FixationRecord*>> trials;
  for (const auto& f : fixations) {
    auto& trial = trials[{f.subject_id, f.doc_id}];
    if (!trial.empty() && trial.back()->sequence_index >= f.sequence_index) {
      throw DataError("fixations for subject '" + f.subject_id + "', doc '" + f.doc_id +
                      "' are not sorted by sequence_index (at " + std::to_string(f.sequence_index) + ")");
    }
    trial.push_back(&f);
  }

  std::vector<GoPastMeasure> out;
  for (const auto& [key, seq] : trials) {
    std::set<std::uint32_t> seen;
    for (std::size_t i = 0; i < seq.size(); ++i) {
      const auto w = seq[i]->word_position;
      if (!seen.insert(w).second) continue;
      GoPastMeasure m{key.first, key.second, w, 0.0, seq[i]->duration, std::nullopt};
      if (i > 0) m.entry_delta = static_cast<std::int64_t>(w) - static_cast<std::int64_t>(seq[i - 1]->word_position);
      for (std::size_t j = i; j < seq.size() && seq[j]->word_position <= w; ++j) m.go_past += seq[j]->duration;
      out.push_back(std::move(m));
    }
  }
  return out;
}

/// Fills eye-tracking responses with go-past durations matched on (subject, doc, word_position).
/// Rows with no matching fixation lose their response and are flagged UNFIXATED.
inline ResponseTable attach_go_past(ResponseTable table, const std::vector<GoPastMeasure>& measures) {
  std::map<std::tuple<std::string, std::string, std::uint32_t>, double> by_word;
  for (const auto& m : measures) by_word.emplace(std::tuple(m.subject_id, m.doc_id, m.word_position), m.go_past);
  for (auto& r : table.rows) {
    if (!r.word_position) {
      throw ConfigError("eye-tracking row " + to_string(r.word_key()) + " has no word_position to link fixations");
    }
    const auto it = by_word.find({r.subject_id, r.doc_id, *r.word_position});
    if (it == by_word.end()) {
      r.response.reset();
      r.flags.set(Flag::Unfixated);
    } else {
      r.response = it->second;
    }
  }
  return table;
}

/// Eye-tracking exclusions: unfixated words, words entered by a forward saccade that skips more
/// than `max_skip_words` words, sentence/document boundary words, and (optionally) line and
/// screen boundary words.
inline ResponseTable filter_et(const ResponseTable& table, const std::vector<FixationRecord>& fixations,
                               const PreprocessConfig& cfg = {}, FilterAudit* audit = nullptr) {
  if (table.kind != CorpusKind::EyeTracking) throw ConfigError("filter_et needs an et table");
  std::map<std::tuple<std::string, std::string, std::uint32_t>, std::optional<std::int64_t>> entry;
  for (const auto& m : compute_go_past(fixations)) {
    entry.emplace(std::tuple(m.subject_id, m.doc_id, m.word_position), m.entry_delta);
  }
  for (const auto& r : table.rows) {
    if (!r.word_position) {
      throw ConfigError("eye-tracking table lacks fixation linkage: row " + to_string(r.word_key()) + " of subject '" +
                        r.subject_id + "' has no word_position");
    }
  }
  // A skip of k words is a position delta of k + 1.
  const std::int64_t max_delta = static_cast<std::int64_t>(cfg.max_skip_words) + 1;

  return detail::apply_rules(table, audit, [&](const ResponseRecord& r) -> std::optional<std::string> {
    const auto it = entry.find({r.subject_id, r.doc_id, *r.word_position});
    if (r.flags.has(Flag::Unfixated) || !r.response || it == entry.end()) return "unfixated";
    if (it->second && *it->second > max_delta) return "saccade_skip";
    if (r.flags.has(Flag::SentenceInitial) || r.flags.has(Flag::SentenceFinal)) return "sentence_boundary";
    if (r.flags.has(Flag::DocInitial) || r.flags.has(Flag::DocFinal)) return "doc_boundary";
    if (cfg.filter_line_screen && (r.flags.has(Flag::LineBoundary) || r.flags.has(Flag::ScreenBoundary))) {
      return "line_screen_boundary";
    }
    return std::nullopt;
  });
}

// ---------------------------------------------------------------------------------------------
// Partitioning

enum class Split : std::uint8_t { Fit, Explore, Heldout };
enum class PartitionMode { ThreeWay, Cv5BySubject };

inline constexpr int kCvFolds = 5;

inline std::string_view to_string(Split s) {
  switch (s) {
    case Split::Fit: return "fit";
    case Split::Explore: return "explore";
    case Split::Heldout: return "heldout";
  }
  return "?";
}

/// One label per table row: a split in three-way mode, a fold index in CV mode.
struct PartitionAssignment {
  PartitionMode mode = PartitionMode::ThreeWay;
  std::vector<Split> labels;
  std::vector<int> folds;

  [[nodiscard]] std::size_t size() const noexcept {
    return mode == PartitionMode::ThreeWay ? labels.size() : folds.size();
  }

  [[nodiscard]] std::vector<std::size_t> rows_with(Split s) const {
    std::vector<std::size_t> out;
    for (std::size_t i = 0; i < labels.size(); ++i) {
      if (labels[i] == s) out.push_back(i);
    }
    return out;
  }

  friend bool operator==(const PartitionAssignment&, const PartitionAssignment&) = default;
};

namespace detail {

inline std::string partition_unit(const ResponseRecord& r) {
  std::string key = r.subject_id;
  key += '\x1f';
  key += r.doc_id;
  key += '\x1f';
  key += std::to_string(r.sentence_id);
  if (r.onset_time) {
    key += '\x1f';
    key += tsv::format_double(*r.onset_time);
  }
  return key;
}

inline std::string item_key(const ResponseRecord& r) {
  return r.doc_id + '\x1f' + std::to_string(r.sentence_id);
}

} // namespace detail

/// Deterministic partition of the table's rows.
///
/// Three-way: each (subject, doc, sentence) unit (plus scan time for time-series rows) hashes
/// to one of four buckets; buckets 0-1 are FIT, 2 EXPLORE, 3 HELDOUT.
/// CV by subject: each subject's items (doc, sentence) are ordered by hash and dealt round-robin
/// into five folds.
inline PartitionAssignment partition(const ResponseTable& table, PartitionMode mode, std::uint64_t seed) {
  if (table.empty()) throw DataError("cannot partition an empty table");
  PartitionAssignment out;
  out.mode = mode;
  if (mode == PartitionMode::ThreeWay) {
    out.labels.reserve(table.size());
    for (const auto& r : table.rows) {
      switch (stable_hash(detail::partition_unit(r), seed) % 4) {
        case 0:
        case 1: out.labels.push_back(Split::Fit); break;
        case 2: out.labels.push_back(Split::Explore); break;
        default: out.labels.push_back(Split::Heldout); break;
      }
    }
    return out;
  }

  std::map<std::string, std::set<std::pair<std::uint64_t, std::string>>> items_by_subject;
  for (const auto& r : table.rows) {
    const auto item = detail::item_key(r);
    items_by_subject[r.subject_id].emplace(stable_hash(item, seed), item);
  }
  std::map<std::pair<std::string, std::string>, int> fold_of;
  for (const auto& [subject, items] : items_by_subject) {
    int rank = 0;
    for (const auto& [h, item] : items) fold_of[{subject, item}] = rank++ % kCvFolds;
  }
  out.folds.reserve(table.size());
  for (const auto& r : table.rows) out.folds.push_back(fold_of.at({r.subject_id, detail::item_key(r)}));
  return out;
}

/// Reads an externally supplied assignment (columns subject_id, doc_id, sentence_id, label) and
/// applies it to the table. Labels are fit/explore/heldout, or fold numbers 0-4 for CV mode.
inline PartitionAssignment read_partition_file(std::istream& in, const ResponseTable& table,
                                               const std::string& source = "<stream>") {
  tsv::Reader reader(in, source);
  const auto c_subject = reader.require("subject_id");
  const auto c_doc = reader.require("doc_id");
  const auto c_sentence = reader.require("sentence_id");
  const auto c_label = reader.require("label");
  std::map<std::tuple<std::string, std::string, std::uint32_t>, std::string> labels;
  std::optional<PartitionMode> mode;
  std::vector<std::string_view> f;
  while (reader.next(f)) {
    if (f.size() != reader.width()) throw DataError(reader.where() + ": wrong field count");
    const auto sentence = tsv::parse_int<std::uint32_t>(f[c_sentence]);
    if (!sentence) throw DataError(reader.where() + ": bad sentence_id");
    const std::string label(f[c_label]);
    const bool is_split = label == "fit" || label == "explore" || label == "heldout";
    const auto fold = tsv::parse_int<int>(label);
    const bool is_fold = fold && *fold >= 0 && *fold < kCvFolds;
    if (!is_split && !is_fold) throw DataError(reader.where() + ": unknown label '" + label + "'");
    const auto row_mode = is_split ? PartitionMode::ThreeWay : PartitionMode::Cv5BySubject;
    if (mode && *mode != row_mode) throw DataError(reader.where() + ": mixes split labels and fold numbers");
    mode = row_mode;
    labels[{std::string(f[c_subject]), std::string(f[c_doc]), *sentence}] = label;
  }
  if (!mode) throw DataError(source + ": partition file has no rows");

  PartitionAssignment out;
  out.mode = *mode;
  for (const auto& r : table.rows) {
    const auto it = labels.find({r.subject_id, r.doc_id, r.sentence_id});
    if (it == labels.end()) {
      throw DataError(source + ": no label for subject '" + r.subject_id + "', sentence " + to_string(r.sentence_key()));
    }
    if (out.mode == PartitionMode::Cv5BySubject) {
      out.folds.push_back(*tsv::parse_int<int>(it->second));
    } else {
      out.labels.push_back(it->second == "fit" ? Split::Fit : it->second == "explore" ? Split::Explore : Split::Heldout);
    }
  }
  return out;
}

inline PartitionAssignment read_partition_file(const std::string& path, const ResponseTable& table) {
  auto in = detail::open_input(path);
  return read_partition_file(in, table, path);
}

inline void write_partition(std::ostream& out, const ResponseTable& table, const PartitionAssignment& p) {
  if (p.size() != table.size()) throw DataError("partition size does not match table");
  out << "subject_id\tdoc_id\tsentence_id\tword_index\tlabel\n";
  for (std::size_t i = 0; i < table.size(); ++i) {
    const auto& r = table.rows[i];
    out << r.subject_id << '\t' << r.doc_id << '\t' << r.sentence_id << '\t' << r.word_index << '\t';
    if (p.mode == PartitionMode::ThreeWay) {
      out << to_string(p.labels[i]);
    } else {
      out << p.folds[i];
    }
    out << '\n';
  }
}

} // namespace psyfit
