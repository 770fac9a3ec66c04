#pragma once

// In-memory response data model and its tab-delimited text formats.
// See docs/formats.md for the column-level schema of every file read here.

#include <algorithm>
#include <array>
#include <compare>
#include <cstdint>
#include <fstream>
#include <map>
#include <optional>
#include <set>
#include <sstream>
#include <string>
#include <string_view>
#include <tuple>
#include <vector>

#include "psyfit/error.hpp"
#include "psyfit/tsv.hpp"

namespace psyfit {

enum class CorpusKind { Spr, EyeTracking, FmriTimeSeries, FmriSentence, Generic };

inline std::string_view to_string(CorpusKind k) {
  switch (k) {
    case CorpusKind::Spr: return "spr";
    case CorpusKind::EyeTracking: return "et";
    case CorpusKind::FmriTimeSeries: return "fmri_timeseries";
    case CorpusKind::FmriSentence: return "fmri_sentence";
    case CorpusKind::Generic: return "generic";
  }
  return "?";
}

inline CorpusKind parse_corpus_kind(std::string_view s) {
  for (auto k : {CorpusKind::Spr, CorpusKind::EyeTracking, CorpusKind::FmriTimeSeries,
                 CorpusKind::FmriSentence, CorpusKind::Generic}) {
    if (s == to_string(k)) return k;
  }
  throw ConfigError("unknown corpus kind '" + std::string(s) +
                    "' (expected spr, et, fmri_timeseries, fmri_sentence or generic)");
}

/// Reading times are in milliseconds and must be positive.
inline bool is_millisecond_kind(CorpusKind k) {
  return k == CorpusKind::Spr || k == CorpusKind::EyeTracking;
}

enum class Flag : std::uint8_t {
  SentenceInitial,
  SentenceFinal,
  DocInitial,
  DocFinal,
  LineBoundary,
  ScreenBoundary,
  Unfixated,
};

inline constexpr std::array<std::pair<Flag, std::string_view>, 7> kFlagColumns{{
    {Flag::SentenceInitial, "sentence_initial"},
    {Flag::SentenceFinal, "sentence_final"},
    {Flag::DocInitial, "doc_initial"},
    {Flag::DocFinal, "doc_final"},
    {Flag::LineBoundary, "line_boundary"},
    {Flag::ScreenBoundary, "screen_boundary"},
    {Flag::Unfixated, "unfixated"},
}};

class FlagSet {
public:
  constexpr FlagSet() = default;
  constexpr FlagSet(std::initializer_list<Flag> flags) {
    for (auto f : flags) set(f);
  }

  [[nodiscard]] constexpr bool has(Flag f) const noexcept { return (bits_ >> static_cast<int>(f)) & 1U; }
  constexpr void set(Flag f) noexcept { bits_ |= static_cast<std::uint8_t>(1U << static_cast<int>(f)); }
  constexpr void clear(Flag f) noexcept { bits_ &= static_cast<std::uint8_t>(~(1U << static_cast<int>(f))); }
  [[nodiscard]] constexpr bool empty() const noexcept { return bits_ == 0; }
  [[nodiscard]] constexpr std::uint8_t bits() const noexcept { return bits_; }

  friend constexpr bool operator==(FlagSet, FlagSet) = default;

private:
  std::uint8_t bits_ = 0;
};

struct WordKey {
  std::string doc_id;
  std::uint32_t sentence_id = 0;
  std::uint32_t word_index = 0;

  friend auto operator<=>(const WordKey&, const WordKey&) = default;
  friend bool operator==(const WordKey&, const WordKey&) = default;
};

struct SentenceKey {
  std::string doc_id;
  std::uint32_t sentence_id = 0;

  friend auto operator<=>(const SentenceKey&, const SentenceKey&) = default;
  friend bool operator==(const SentenceKey&, const SentenceKey&) = default;
};

inline std::string to_string(const WordKey& k) {
  return k.doc_id + "/" + std::to_string(k.sentence_id) + "/" + std::to_string(k.word_index);
}
inline std::string to_string(const SentenceKey& k) {
  return k.doc_id + "/" + std::to_string(k.sentence_id);
}

struct ResponseRecord {
  std::string subject_id;
  std::string doc_id;
  std::uint32_t sentence_id = 0;
  std::uint32_t word_index = 0;
  std::string word_text;
  /// Absent for eye-tracking rows whose go-past duration has not been attached yet.
  std::optional<double> response;
  /// Scan time in seconds; time-series fMRI only.
  std::optional<double> onset_time;
  /// Document-linear word position, used to link eye-tracking rows to fixations.
  std::optional<std::uint32_t> word_position;
  /// fMRI region label (fROI or parcel); empty when the corpus has no region axis.
  std::string region;
  FlagSet flags;

  [[nodiscard]] WordKey word_key() const { return {doc_id, sentence_id, word_index}; }
  [[nodiscard]] SentenceKey sentence_key() const { return {doc_id, sentence_id}; }

  /// Full uniqueness key within a corpus.
  [[nodiscard]] auto identity() const {
    return std::make_tuple(doc_id, sentence_id, word_index, subject_id, onset_time, region);
  }

  friend bool operator==(const ResponseRecord&, const ResponseRecord&) = default;
};

struct ResponseTable {
  CorpusKind kind = CorpusKind::Generic;
  std::vector<ResponseRecord> rows;

  [[nodiscard]] std::size_t size() const noexcept { return rows.size(); }
  [[nodiscard]] bool empty() const noexcept { return rows.empty(); }

  friend bool operator==(const ResponseTable&, const ResponseTable&) = default;
};

/// Subject-level comprehension answers; `doc_id` is empty for a subject aggregate row.
struct ComprehensionScore {
  std::string subject_id;
  std::string doc_id;
  int correct_answers = 0;
};

inline constexpr int kQuestionsPerStory = 6;

struct FixationRecord {
  std::string subject_id;
  std::string doc_id;
  std::uint32_t word_position = 0;
  double duration = 0.0;
  std::int64_t sequence_index = 0;
};

/// A word's onset in a spoken or timed presentation (time-series fMRI).
struct WordEvent {
  WordKey key;
  double onset = 0.0;
};

struct Rejection {
  std::size_t row = 0;
  std::string reason;
};

struct ReadOptions {
  /// Collect malformed rows into the report instead of throwing.
  bool skip_malformed = false;
};

struct ReadReport {
  std::size_t rows_in = 0;
  std::vector<Rejection> rejections;
};

namespace detail {

inline std::ifstream open_input(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError("cannot open '" + path + "' for reading");
  return in;
}

inline std::ofstream open_output(const std::string& path) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw DataError("cannot open '" + path + "' for writing");
  return out;
}

inline std::string join_rejections(const std::string& source, const std::vector<Rejection>& rej) {
  std::ostringstream os;
  os << source << ": " << rej.size() << " malformed row(s)";
  for (const auto& r : rej) os << "\n  row " << r.row << ": " << r.reason;
  return os.str();
}

/// Parses flag column values; only "0" and "1" are accepted.
inline bool parse_flag(std::string_view s, std::string& reason, std::string_view name) {
  if (s == "1") return true;
  if (s == "0" || s.empty()) return false;
  reason = "flag column '" + std::string(name) + "' must be 0 or 1, got '" + std::string(s) + "'";
  return false;
}

} // namespace detail

/// Parses a response table for the given corpus kind.
///
/// Mandatory columns: subject_id, doc_id, response; plus sentence_id and word_index for word-level
/// kinds, onset_time for fmri_timeseries, sentence_id for fmri_sentence. Optional: word_text,
/// word_position, region, and one 0/1 column per flag. Unknown columns are ignored.
inline ResponseTable read_response_table(std::istream& in, CorpusKind kind, const std::string& source = "<stream>",
                                         ReadOptions opts = {}, ReadReport* report = nullptr) {
  tsv::Reader reader(in, source);
  const bool word_level = kind == CorpusKind::Spr || kind == CorpusKind::EyeTracking || kind == CorpusKind::Generic;

  const auto c_subject = reader.require("subject_id");
  const auto c_doc = reader.require("doc_id");
  const auto c_response = reader.require("response");
  const auto c_sentence = (word_level || kind == CorpusKind::FmriSentence) ? std::optional(reader.require("sentence_id"))
                                                                            : reader.column("sentence_id");
  const auto c_word = word_level ? std::optional(reader.require("word_index")) : reader.column("word_index");
  const auto c_onset = kind == CorpusKind::FmriTimeSeries ? std::optional(reader.require("onset_time"))
                                                          : reader.column("onset_time");
  const auto c_text = reader.column("word_text");
  const auto c_position = reader.column("word_position");
  const auto c_region = reader.column("region");
  std::vector<std::pair<Flag, std::size_t>> flag_cols;
  for (const auto& [flag, name] : kFlagColumns) {
    if (auto c = reader.column(name)) flag_cols.emplace_back(flag, *c);
  }

  ResponseTable table{kind, {}};
  ReadReport local;
  std::set<decltype(std::declval<const ResponseRecord&>().identity())> seen_keys;
  std::vector<std::string_view> f;
  while (reader.next(f)) {
    ++local.rows_in;
    std::string reason;
    ResponseRecord rec;
    if (f.size() != reader.width()) {
      reason = "expected " + std::to_string(reader.width()) + " fields, found " + std::to_string(f.size());
    } else {
      rec.subject_id = std::string(f[c_subject]);
      rec.doc_id = std::string(f[c_doc]);
      if (rec.subject_id.empty() || rec.doc_id.empty()) reason = "empty subject_id or doc_id";
      auto read_u32 = [&](std::optional<std::size_t> col, std::string_view name, std::uint32_t& dst) {
        if (!col || !reason.empty()) return;
        if (auto v = tsv::parse_int<std::uint32_t>(f[*col])) {
          dst = *v;
        } else {
          reason = "column '" + std::string(name) + "' is not a non-negative integer: '" + std::string(f[*col]) + "'";
        }
      };
      read_u32(c_sentence, "sentence_id", rec.sentence_id);
      read_u32(c_word, "word_index", rec.word_index);
      if (reason.empty() && c_position && !f[*c_position].empty()) {
        std::uint32_t pos = 0;
        read_u32(c_position, "word_position", pos);
        rec.word_position = pos;
      }
      if (reason.empty()) {
        const auto raw = f[c_response];
        if (raw.empty()) {
          if (kind != CorpusKind::EyeTracking) reason = "empty response";
        } else if (auto v = tsv::parse_double(raw)) {
          if (is_millisecond_kind(kind) && *v <= 0.0) {
            reason = "response must be > 0 ms, got '" + std::string(raw) + "'";
          } else {
            rec.response = *v;
          }
        } else {
          reason = "non-numeric response '" + std::string(raw) + "'";
        }
      }
      if (reason.empty() && c_onset) {
        const auto raw = f[*c_onset];
        if (auto v = tsv::parse_double(raw)) {
          rec.onset_time = *v;
        } else if (!raw.empty() || kind == CorpusKind::FmriTimeSeries) {
          reason = "non-numeric onset_time '" + std::string(raw) + "'";
        }
      }
      if (c_text) rec.word_text = std::string(f[*c_text]);
      if (c_region) rec.region = std::string(f[*c_region]);
      for (const auto& [flag, col] : flag_cols) {
        if (!reason.empty()) break;
        const auto name = kFlagColumns[static_cast<std::size_t>(flag)].second;
        if (detail::parse_flag(f[col], reason, name)) rec.flags.set(flag);
      }
      if (reason.empty() && !seen_keys.insert(rec.identity()).second) {
        reason = "duplicate record key (doc, sentence, word, subject, onset, region)";
      }
    }
    if (!reason.empty()) {
      local.rejections.push_back({reader.row(), std::move(reason)});
      continue;
    }
    table.rows.push_back(std::move(rec));
  }
  if (report) *report = local;
  if (!local.rejections.empty() && !opts.skip_malformed) {
    throw DataError(detail::join_rejections(source, local.rejections));
  }
  return table;
}

inline ResponseTable read_response_table(const std::string& path, CorpusKind kind, ReadOptions opts = {},
                                         ReadReport* report = nullptr) {
  auto in = detail::open_input(path);
  return read_response_table(in, kind, path, opts, report);
}

/// Writes a table in the same text format `read_response_table` accepts. Optional columns are
/// emitted only when some row uses them, so output is a pure function of the table.
inline void write_response_table(std::ostream& out, const ResponseTable& table) {
  const auto any = [&](auto pred) { return std::any_of(table.rows.begin(), table.rows.end(), pred); };
  const bool has_onset = any([](const auto& r) { return r.onset_time.has_value(); });
  const bool has_position = any([](const auto& r) { return r.word_position.has_value(); });
  const bool has_region = any([](const auto& r) { return !r.region.empty(); });

  out << "subject_id\tdoc_id\tsentence_id\tword_index\tword_text\tresponse";
  if (has_onset) out << "\tonset_time";
  if (has_position) out << "\tword_position";
  if (has_region) out << "\tregion";
  for (const auto& [flag, name] : kFlagColumns) out << '\t' << name;
  out << '\n';
  for (const auto& r : table.rows) {
    tsv::check_field(r.subject_id, "subject_id");
    tsv::check_field(r.doc_id, "doc_id");
    tsv::check_field(r.word_text, "word_text");
    tsv::check_field(r.region, "region");
    out << r.subject_id << '\t' << r.doc_id << '\t' << r.sentence_id << '\t' << r.word_index << '\t' << r.word_text
        << '\t' << (r.response ? tsv::format_double(*r.response) : std::string{});
    if (has_onset) out << '\t' << (r.onset_time ? tsv::format_double(*r.onset_time) : std::string{});
    if (has_position) out << '\t' << (r.word_position ? std::to_string(*r.word_position) : std::string{});
    if (has_region) out << '\t' << r.region;
    for (const auto& [flag, name] : kFlagColumns) out << '\t' << (r.flags.has(flag) ? '1' : '0');
    out << '\n';
  }
}

inline void write_response_table(const std::string& path, const ResponseTable& table) {
  auto out = detail::open_output(path);
  write_response_table(out, table);
  if (!out) throw DataError("write failed for '" + path + "'");
}

/// Columns: subject_id, correct; optional doc_id for per-story rows.
inline std::vector<ComprehensionScore> read_comprehension(std::istream& in, const std::string& source = "<stream>") {
  tsv::Reader reader(in, source);
  const auto c_subject = reader.require("subject_id");
  const auto c_correct = reader.require("correct");
  const auto c_doc = reader.column("doc_id");
  std::vector<ComprehensionScore> out;
  std::vector<std::string_view> f;
  while (reader.next(f)) {
    if (f.size() != reader.width()) throw DataError(reader.where() + ": wrong field count");
    const auto correct = tsv::parse_int<int>(f[c_correct]);
    if (!correct || *correct < 0 || *correct > kQuestionsPerStory) {
      throw DataError(reader.where() + ": correct must be an integer in [0, 6], got '" + std::string(f[c_correct]) +
                      "'");
    }
    out.push_back({std::string(f[c_subject]), c_doc ? std::string(f[*c_doc]) : std::string{}, *correct});
  }
  return out;
}

inline std::vector<ComprehensionScore> read_comprehension(const std::string& path) {
  auto in = detail::open_input(path);
  return read_comprehension(in, path);
}

/// Columns: subject_id, doc_id, word_position, duration, sequence_index.
inline std::vector<FixationRecord> read_fixations(std::istream& in, const std::string& source = "<stream>") {
  tsv::Reader reader(in, source);
  const auto c_subject = reader.require("subject_id");
  const auto c_doc = reader.require("doc_id");
  const auto c_pos = reader.require("word_position");
  const auto c_dur = reader.require("duration");
  const auto c_seq = reader.require("sequence_index");
  std::vector<FixationRecord> out;
  std::vector<std::string_view> f;
  while (reader.next(f)) {
    if (f.size() != reader.width()) throw DataError(reader.where() + ": wrong field count");
    const auto pos = tsv::parse_int<std::uint32_t>(f[c_pos]);
    const auto dur = tsv::parse_double(f[c_dur]);
    const auto seq = tsv::parse_int<std::int64_t>(f[c_seq]);
    if (!pos || !dur || !seq || *dur <= 0.0) {
      throw DataError(reader.where() + ": malformed fixation (word_position, duration > 0, sequence_index)");
    }
    out.push_back({std::string(f[c_subject]), std::string(f[c_doc]), *pos, *dur, *seq});
  }
  return out;
}

inline std::vector<FixationRecord> read_fixations(const std::string& path) {
  auto in = detail::open_input(path);
  return read_fixations(in, path);
}

/// Columns: doc_id, sentence_id, word_index, onset_time.
inline std::vector<WordEvent> read_word_events(std::istream& in, const std::string& source = "<stream>") {
  tsv::Reader reader(in, source);
  const auto c_doc = reader.require("doc_id");
  const auto c_sentence = reader.require("sentence_id");
  const auto c_word = reader.require("word_index");
  const auto c_onset = reader.require("onset_time");
  std::vector<WordEvent> out;
  std::vector<std::string_view> f;
  while (reader.next(f)) {
    if (f.size() != reader.width()) throw DataError(reader.where() + ": wrong field count");
    const auto s = tsv::parse_int<std::uint32_t>(f[c_sentence]);
    const auto w = tsv::parse_int<std::uint32_t>(f[c_word]);
    const auto t = tsv::parse_double(f[c_onset]);
    if (!s || !w || !t) throw DataError(reader.where() + ": malformed word event");
    out.push_back({{std::string(f[c_doc]), *s, *w}, *t});
  }
  return out;
}

inline std::vector<WordEvent> read_word_events(const std::string& path) {
  auto in = detail::open_input(path);
  return read_word_events(in, path);
}

inline void write_word_events(std::ostream& out, const std::vector<WordEvent>& events) {
  out << "doc_id\tsentence_id\tword_index\tonset_time\n";
  for (const auto& e : events) {
    tsv::check_field(e.key.doc_id, "doc_id");
    out << e.key.doc_id << '\t' << e.key.sentence_id << '\t' << e.key.word_index << '\t'
        << tsv::format_double(e.onset) << '\n';
  }
}

} // namespace psyfit
