#include <sstream>

#include <gtest/gtest.h>

#include "psyfit/corpus.hpp"
#include "test_util.hpp"

using namespace psyfit;

TEST(ResponseTable, ReadsThreeRowSprFixture) {
  const auto t = read_response_table(testutil::data("spr_basic.tsv"), CorpusKind::Spr);
  ASSERT_EQ(t.size(), 3u);
  EXPECT_EQ(t.kind, CorpusKind::Spr);
  EXPECT_EQ(t.rows[1].word_text, "cat");
  EXPECT_DOUBLE_EQ(*t.rows[1].response, 287.5);
  EXPECT_EQ(t.rows[2].word_index, 2u);
  for (const auto& r : t.rows) EXPECT_TRUE(r.flags.empty());
}

TEST(ResponseTable, NonNumericResponseNamesTheRow) {
  try {
    read_response_table(testutil::data("spr_bad_response.tsv"), CorpusKind::Spr);
    FAIL() << "expected DataError";
  } catch (const DataError& e) {
    const std::string msg = e.what();
    EXPECT_NE(msg.find("row 2"), std::string::npos) << msg;
    EXPECT_NE(msg.find("abc"), std::string::npos) << msg;
  }
}

TEST(ResponseTable, SkipMalformedCollectsRejections) {
  ReadReport report;
  const auto t = read_response_table(testutil::data("spr_bad_response.tsv"), CorpusKind::Spr, {true}, &report);
  EXPECT_EQ(t.size(), 2u);
  EXPECT_EQ(report.rows_in, 3u);
  ASSERT_EQ(report.rejections.size(), 1u);
  EXPECT_EQ(report.rejections[0].row, 2u);
}

TEST(ResponseTable, UnfixatedColumnSetsFlag) {
  const auto t = read_response_table(testutil::data("et_unfixated.tsv"), CorpusKind::EyeTracking);
  ASSERT_EQ(t.size(), 3u);
  EXPECT_FALSE(t.rows[0].flags.has(Flag::Unfixated));
  EXPECT_TRUE(t.rows[1].flags.has(Flag::Unfixated));
  EXPECT_FALSE(t.rows[1].response.has_value());
  EXPECT_EQ(*t.rows[2].word_position, 2u);
}

TEST(ResponseTable, MissingMandatoryColumnIsNamed) {
  std::istringstream in("subject_id\tdoc_id\tsentence_id\tresponse\ns1\td\t0\t300\n");
  try {
    read_response_table(in, CorpusKind::Spr);
    FAIL();
  } catch (const DataError& e) {
    EXPECT_NE(std::string(e.what()).find("word_index"), std::string::npos);
  }
}

TEST(ResponseTable, RejectsNonPositiveMillisecondsAndDuplicates) {
  std::istringstream zero("subject_id\tdoc_id\tsentence_id\tword_index\tresponse\ns1\td\t0\t0\t0\n");
  EXPECT_THROW(read_response_table(zero, CorpusKind::Spr), DataError);
  std::istringstream dup("subject_id\tdoc_id\tsentence_id\tword_index\tresponse\ns1\td\t0\t0\t5\ns1\td\t0\t0\t6\n");
  EXPECT_THROW(read_response_table(dup, CorpusKind::Spr), DataError);
  std::istringstream bold("subject_id\tdoc_id\tsentence_id\tword_index\tresponse\ns1\td\t0\t0\t-0.4\n");
  EXPECT_NO_THROW(read_response_table(bold, CorpusKind::FmriSentence));
}

TEST(ResponseTable, EmptyResponseOnlyForEyeTracking) {
  const std::string text = "subject_id\tdoc_id\tsentence_id\tword_index\tresponse\ns1\td\t0\t0\t\n";
  std::istringstream spr(text), et(text);
  EXPECT_THROW(read_response_table(spr, CorpusKind::Spr), DataError);
  EXPECT_EQ(read_response_table(et, CorpusKind::EyeTracking).size(), 1u);
}

TEST(ResponseTable, RepeatedScansNeedDistinctOnsets) {
  std::istringstream ok("subject_id\tdoc_id\tonset_time\tresponse\ns1\td\t0\t0.1\ns1\td\t2\t0.2\n");
  EXPECT_EQ(read_response_table(ok, CorpusKind::FmriTimeSeries).size(), 2u);
  std::istringstream no_onset("subject_id\tdoc_id\tresponse\ns1\td\t0.1\n");
  EXPECT_THROW(read_response_table(no_onset, CorpusKind::FmriTimeSeries), DataError);
}

TEST(ResponseTable, WriteReadRoundTrip) {
  ResponseTable t{CorpusKind::FmriTimeSeries, {}};
  for (int i = 0; i < 5; ++i) {
    ResponseRecord r;
    r.subject_id = "s" + std::to_string(i % 2);
    r.doc_id = "story";
    r.response = 0.1 * i - 0.25;
    r.onset_time = 2.0 * i;
    r.region = i % 2 ? "LPostTemp" : "LIFG";
    if (i == 3) r.flags.set(Flag::DocFinal);
    t.rows.push_back(r);
  }
  std::stringstream ss;
  write_response_table(ss, t);
  const auto back = read_response_table(ss, CorpusKind::FmriTimeSeries);
  EXPECT_EQ(back, t);
}

TEST(ResponseTable, KindNamesRoundTrip) {
  for (auto k : {CorpusKind::Spr, CorpusKind::EyeTracking, CorpusKind::FmriTimeSeries, CorpusKind::FmriSentence,
                 CorpusKind::Generic}) {
    EXPECT_EQ(parse_corpus_kind(to_string(k)), k);
  }
  EXPECT_THROW(parse_corpus_kind("meg"), ConfigError);
}

TEST(Comprehension, RejectsOutOfRangeCounts) {
  std::istringstream bad("subject_id\tcorrect\ns1\t7\n");
  EXPECT_THROW(read_comprehension(bad), DataError);
  std::istringstream ok("subject_id\tcorrect\ns1\t6\n");
  EXPECT_EQ(read_comprehension(ok).at(0).correct_answers, 6);
}

TEST(WordEvents, RoundTrip) {
  std::vector<WordEvent> ev{{{"d", 0, 0}, 0.25}, {{"d", 0, 1}, 0.61}, {{"e", 2, 3}, 10.0}};
  std::stringstream ss;
  write_word_events(ss, ev);
  const auto back = read_word_events(ss);
  ASSERT_EQ(back.size(), ev.size());
  for (std::size_t i = 0; i < ev.size(); ++i) {
    EXPECT_EQ(back[i].key, ev[i].key);
    EXPECT_EQ(back[i].onset, ev[i].onset);
  }
}
