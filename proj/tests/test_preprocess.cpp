#include <algorithm>
#include <random>
#include <set>
#include <sstream>

#include <gtest/gtest.h>

#include "psyfit/preprocess.hpp"
#include "test_util.hpp"

using namespace psyfit;

namespace {

ResponseRecord spr_row(const std::string& subject, std::uint32_t sentence, std::uint32_t word, double rt) {
  ResponseRecord r;
  r.subject_id = subject;
  r.doc_id = "d1";
  r.sentence_id = sentence;
  r.word_index = word;
  r.response = rt;
  return r;
}

std::vector<FixationRecord> trial(const std::vector<std::pair<std::uint32_t, double>>& seq) {
  std::vector<FixationRecord> out;
  for (std::size_t i = 0; i < seq.size(); ++i) out.push_back({"p", "d", seq[i].first, seq[i].second, std::int64_t(i)});
  return out;
}

std::map<std::uint32_t, GoPastMeasure> by_position(const std::vector<GoPastMeasure>& ms) {
  std::map<std::uint32_t, GoPastMeasure> out;
  for (const auto& m : ms) out.emplace(m.word_position, m);
  return out;
}

/// Rows (as word keys) whose `expect` column is 1.
std::set<WordKey> expected_keys(const std::string& file, const ResponseTable& t, const std::string& column) {
  const auto expect = testutil::column(testutil::data(file), column);
  std::set<WordKey> out;
  for (std::size_t i = 0; i < t.size(); ++i) {
    if (expect.at(i) == "1") out.insert(t.rows[i].word_key());
  }
  return out;
}

std::set<WordKey> keys_of(const ResponseTable& t) {
  std::set<WordKey> out;
  for (const auto& r : t.rows) out.insert(r.word_key());
  return out;
}

ResponseTable filter_et_fixture(const std::string& stem, const PreprocessConfig& cfg, FilterAudit* audit = nullptr) {
  const auto table = read_response_table(testutil::data(stem + ".tsv"), CorpusKind::EyeTracking);
  const auto fix = read_fixations(testutil::data(stem + ".fixations.tsv"));
  return filter_et(attach_go_past(table, compute_go_past(fix)), fix, cfg, audit);
}

} // namespace

TEST(FilterSpr, NinetyNineMillisecondsExcludedHundredRetained) {
  ResponseTable t{CorpusKind::Spr, {spr_row("s", 0, 1, 99), spr_row("s", 0, 2, 100), spr_row("s", 0, 3, 3000),
                                    spr_row("s", 0, 4, 3000.5)}};
  FilterAudit audit;
  const auto out = filter_spr(t, {{"s", "", 5}}, {}, &audit);
  ASSERT_EQ(out.size(), 2u);
  EXPECT_EQ(*out.rows[0].response, 100.0);
  EXPECT_EQ(*out.rows[1].response, 3000.0);
  EXPECT_EQ(audit.count("rt_window"), 2u);
}

TEST(FilterSpr, ThreeCorrectAnswersDropsSubject) {
  ResponseTable t{CorpusKind::Spr, {spr_row("weak", 0, 1, 300), spr_row("weak", 0, 2, 310), spr_row("ok", 0, 1, 300)}};
  const auto out = filter_spr(t, {{"weak", "", 3}, {"ok", "", 4}});
  ASSERT_EQ(out.size(), 1u);
  EXPECT_EQ(out.rows[0].subject_id, "ok");
}

TEST(FilterSpr, MissingComprehensionIsConfigError) {
  ResponseTable t{CorpusKind::Spr, {spr_row("s", 0, 1, 300)}};
  EXPECT_THROW(filter_spr(t, {}), ConfigError);
}

TEST(FilterSpr, RtWindowFixture) {
  const auto table = read_response_table(testutil::data("spr_rt_window.tsv"), CorpusKind::Spr);
  ASSERT_EQ(table.size(), 30u);
  FilterAudit audit;
  const auto out = filter_spr(table, read_comprehension(testutil::data("spr_rt_window.comprehension.tsv")), {}, &audit);
  EXPECT_EQ(keys_of(out), expected_keys("spr_rt_window.tsv", table, "expect_keep"));
  EXPECT_EQ(audit.count("rt_window"), 12u);
  EXPECT_EQ(audit.rows_out, 18u);
}

TEST(FilterSpr, ComprehensionFixtureBothModes) {
  const auto table = read_response_table(testutil::data("spr_comprehension.tsv"), CorpusKind::Spr);
  const auto scores = read_comprehension(testutil::data("spr_comprehension.scores.tsv"));
  const auto keep = testutil::column(testutil::data("spr_comprehension.tsv"), "expect_keep");
  const auto keep_story = testutil::column(testutil::data("spr_comprehension.tsv"), "expect_keep_per_story");
  const auto subjects_with = [&](const std::vector<std::string>& flags) {
    std::multiset<std::string> s;
    for (std::size_t i = 0; i < table.size(); ++i) {
      if (flags[i] == "1") s.insert(table.rows[i].subject_id);
    }
    return s;
  };
  const auto subjects_of = [](const ResponseTable& t) {
    std::multiset<std::string> s;
    for (const auto& r : t.rows) s.insert(r.subject_id);
    return s;
  };
  EXPECT_EQ(subjects_of(filter_spr(table, scores)), subjects_with(keep));
  PreprocessConfig per_story;
  per_story.comprehension_mode = ComprehensionMode::PerStory;
  EXPECT_EQ(subjects_of(filter_spr(table, scores, per_story)), subjects_with(keep_story));
}

TEST(FilterSpr, BoundaryRuleIsChargedFirst) {
  ResponseTable t{CorpusKind::Spr, {spr_row("s", 0, 0, 50), spr_row("s", 0, 1, 300), spr_row("s", 0, 2, 300)}};
  t = derive_boundary_flags(t);
  FilterAudit audit;
  const auto out = filter_spr(t, {{"s", "", 6}}, {}, &audit);
  ASSERT_EQ(out.size(), 1u);
  EXPECT_EQ(out.rows[0].word_index, 1u);
  EXPECT_EQ(audit.count("sentence_boundary"), 2u);
  EXPECT_EQ(audit.count("rt_window"), 0u);
}

TEST(FilterSpr, Idempotent) {
  const auto table = read_response_table(testutil::data("spr_rt_window.tsv"), CorpusKind::Spr);
  const auto scores = read_comprehension(testutil::data("spr_rt_window.comprehension.tsv"));
  const auto once = filter_spr(table, scores);
  EXPECT_EQ(filter_spr(once, scores), once);
}

TEST(GoPast, RegressionPathSumsAllFixationsUntilExit) {
  const auto m = by_position(compute_go_past(trial({{3, 200}, {2, 150}, {3, 100}, {4, 180}})));
  EXPECT_DOUBLE_EQ(m.at(3).go_past, 450.0);
  EXPECT_DOUBLE_EQ(m.at(3).first_fixation, 200.0);
}

TEST(GoPast, NoRegression) {
  auto m = by_position(compute_go_past(trial({{1, 250}, {2, 300}})));
  EXPECT_DOUBLE_EQ(m.at(1).go_past, 250.0);
  m = by_position(compute_go_past(trial({{5, 120}, {6, 90}})));
  EXPECT_DOUBLE_EQ(m.at(5).go_past, 120.0);
  EXPECT_DOUBLE_EQ(m.at(6).go_past, 90.0);
}

TEST(GoPast, EntryDeltaOfSkip) {
  const auto m = by_position(compute_go_past(trial({{2, 200}, {8, 200}})));
  EXPECT_FALSE(m.at(2).entry_delta.has_value());
  EXPECT_EQ(*m.at(8).entry_delta, 6);
}

TEST(GoPast, AtLeastFirstFixationProperty) {
  std::mt19937_64 rng(11);
  for (int rep = 0; rep < 100; ++rep) {
    std::vector<std::pair<std::uint32_t, double>> seq;
    const int n = 1 + static_cast<int>(rng() % 30);
    for (int i = 0; i < n; ++i) seq.emplace_back(rng() % 15, 50.0 + static_cast<double>(rng() % 400));
    double total = 0;
    for (const auto& [p, d] : seq) total += d;
    for (const auto& m : compute_go_past(trial(seq))) {
      EXPECT_GE(m.go_past, m.first_fixation);
      EXPECT_LE(m.go_past, total);
    }
  }
}

TEST(GoPast, UnsortedFixationsRejected) {
  std::vector<FixationRecord> f{{"p", "d", 1, 100, 5}, {"p", "d", 2, 100, 4}};
  EXPECT_THROW(compute_go_past(f), DataError);
}

TEST(FilterEt, GoPastFixture) {
  const auto table = read_response_table(testutil::data("et_go_past.tsv"), CorpusKind::EyeTracking);
  const auto expect = testutil::column(testutil::data("et_go_past.tsv"), "expect_go_past");
  FilterAudit audit;
  const auto out = filter_et_fixture("et_go_past", {}, &audit);
  EXPECT_EQ(keys_of(out), expected_keys("et_go_past.tsv", table, "expect_keep"));
  for (const auto& r : out.rows) {
    EXPECT_DOUBLE_EQ(*r.response, std::stod(expect.at(*r.word_position))) << "word " << *r.word_position;
  }
  EXPECT_EQ(audit.count("unfixated"), 1u);
}

TEST(FilterEt, SkipFixture) {
  const auto table = read_response_table(testutil::data("et_skip.tsv"), CorpusKind::EyeTracking);
  FilterAudit audit;
  const auto out = filter_et_fixture("et_skip", {}, &audit);
  EXPECT_EQ(keys_of(out), expected_keys("et_skip.tsv", table, "expect_keep"));
  EXPECT_EQ(audit.count("saccade_skip"), 2u);
  EXPECT_EQ(audit.count("unfixated"), 14u);
}

TEST(FilterEt, SkipThresholdIsConfigurable) {
  PreprocessConfig strict;
  strict.max_skip_words = 3;
  FilterAudit audit;
  filter_et_fixture("et_skip", strict, &audit);
  EXPECT_EQ(audit.count("saccade_skip"), 3u);  // the 4-word skip into w15 now counts too
}

TEST(FilterEt, LineBoundaryFixture) {
  const auto table = read_response_table(testutil::data("et_line_boundary.tsv"), CorpusKind::EyeTracking);
  PreprocessConfig cfg;
  cfg.filter_line_screen = true;
  const auto out = filter_et_fixture("et_line_boundary", cfg);
  EXPECT_EQ(keys_of(out), expected_keys("et_line_boundary.tsv", table, "expect_keep"));
  EXPECT_EQ(filter_et_fixture("et_line_boundary", {}).size(), 30u);
}

TEST(FilterEt, PlainForwardWordRetained) {
  ResponseTable t{CorpusKind::EyeTracking, {}};
  for (std::uint32_t p = 0; p < 5; ++p) {
    ResponseRecord r;
    r.subject_id = "p";
    r.doc_id = "d";
    r.word_index = p;
    r.word_position = p;
    t.rows.push_back(r);
  }
  t = derive_boundary_flags(t);
  const auto fix = trial({{0, 200}, {1, 210}, {2, 220}, {3, 230}, {4, 240}});
  const auto out = filter_et(attach_go_past(t, compute_go_past(fix)), fix);
  ASSERT_EQ(out.size(), 3u);
  EXPECT_EQ(*out.rows[1].response, 220.0);
}

TEST(FilterEt, MissingWordPositionIsConfigError) {
  ResponseTable t{CorpusKind::EyeTracking, {spr_row("p", 0, 0, 200)}};
  EXPECT_THROW(filter_et(t, {}), ConfigError);
}

TEST(BoundaryFlags, SentenceAndDocSpans) {
  ResponseTable t{CorpusKind::Spr, {spr_row("a", 0, 0, 1), spr_row("a", 0, 1, 1), spr_row("b", 0, 2, 1),
                                    spr_row("a", 1, 0, 1), spr_row("a", 1, 1, 1)}};
  t = derive_boundary_flags(t);
  EXPECT_TRUE(t.rows[0].flags.has(Flag::SentenceInitial));
  EXPECT_TRUE(t.rows[0].flags.has(Flag::DocInitial));
  EXPECT_FALSE(t.rows[1].flags.has(Flag::SentenceFinal));  // subject b read a later word
  EXPECT_TRUE(t.rows[2].flags.has(Flag::SentenceFinal));
  EXPECT_TRUE(t.rows[4].flags.has(Flag::DocFinal));
}

namespace {

ResponseTable grid_table(int subjects, int docs, int sentences, int words) {
  ResponseTable t{CorpusKind::Generic, {}};
  for (int s = 0; s < subjects; ++s)
    for (int d = 0; d < docs; ++d)
      for (int k = 0; k < sentences; ++k)
        for (int w = 0; w < words; ++w) {
          ResponseRecord r;
          r.subject_id = "s" + std::to_string(s);
          r.doc_id = "d" + std::to_string(d);
          r.sentence_id = static_cast<std::uint32_t>(k);
          r.word_index = static_cast<std::uint32_t>(w);
          r.response = 1.0;
          t.rows.push_back(r);
        }
  return t;
}

} // namespace

TEST(Partition, ThreeWayDeterministicAndRowOrderInvariant) {
  auto t = grid_table(4, 10, 5, 3);
  const auto a = partition(t, PartitionMode::ThreeWay, 17);
  EXPECT_EQ(a, partition(t, PartitionMode::ThreeWay, 17));
  std::map<std::tuple<std::string, std::string, std::uint32_t, std::uint32_t>, Split> label;
  for (std::size_t i = 0; i < t.size(); ++i) {
    const auto& r = t.rows[i];
    label[{r.subject_id, r.doc_id, r.sentence_id, r.word_index}] = a.labels[i];
  }
  std::mt19937_64 rng(3);
  std::shuffle(t.rows.begin(), t.rows.end(), rng);
  const auto b = partition(t, PartitionMode::ThreeWay, 17);
  for (std::size_t i = 0; i < t.size(); ++i) {
    const auto& r = t.rows[i];
    EXPECT_EQ(b.labels[i], (label[{r.subject_id, r.doc_id, r.sentence_id, r.word_index}]));
  }
  EXPECT_NE(a, partition(grid_table(4, 10, 5, 3), PartitionMode::ThreeWay, 18));
}

TEST(Partition, SentenceIsTheUnit) {
  const auto t = grid_table(3, 20, 4, 6);
  const auto p = partition(t, PartitionMode::ThreeWay, 5);
  for (std::size_t i = 0; i < t.size(); i += 6) {
    for (std::size_t j = 1; j < 6; ++j) EXPECT_EQ(p.labels[i + j], p.labels[i]);
  }
}

TEST(Partition, CvFoldSizesBalancedPerSubject) {
  // 384 sentences per subject split into 5 folds: test folds of 76-77, training sets of 307-308.
  const auto t = grid_table(2, 1, 384, 1);
  const auto p = partition(t, PartitionMode::Cv5BySubject, 9);
  for (const std::string subject : {"s0", "s1"}) {
    std::array<int, kCvFolds> sizes{};
    for (std::size_t i = 0; i < t.size(); ++i) {
      if (t.rows[i].subject_id == subject) ++sizes[static_cast<std::size_t>(p.folds[i])];
    }
    for (int s : sizes) {
      EXPECT_GE(s, 76);
      EXPECT_LE(s, 77);
      EXPECT_GE(384 - s, 307);
      EXPECT_LE(384 - s, 308);
    }
  }
}

TEST(Partition, EmptyTableIsError) {
  EXPECT_THROW(partition(ResponseTable{}, PartitionMode::ThreeWay, 1), DataError);
}

TEST(Partition, FileRoundTrip) {
  const auto t = grid_table(2, 3, 4, 2);
  for (auto mode : {PartitionMode::ThreeWay, PartitionMode::Cv5BySubject}) {
    const auto p = partition(t, mode, 21);
    std::stringstream ss;
    write_partition(ss, t, p);
    const auto back = read_partition_file(ss, t);
    EXPECT_EQ(back, p);
  }
  std::istringstream bad("subject_id\tdoc_id\tsentence_id\tlabel\ns0\td0\t0\ttrain\n");
  EXPECT_THROW(read_partition_file(bad, t), DataError);
}
