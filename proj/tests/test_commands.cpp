#include <fstream>

#include <gtest/gtest.h>

#include "psyfit/commands.hpp"
#include "test_util.hpp"

using namespace psyfit;
namespace fs = std::filesystem;

namespace {

void write_file(const fs::path& p, const std::string& text) {
  std::ofstream out(p, std::ios::binary);
  out << text;
}

RunConfig config_at(const fs::path& dir, const std::string& text) {
  write_file(dir / "config.ini", text);
  return load_config(dir / "config.ini");
}

std::vector<std::vector<std::string>> read_rows(const fs::path& p) {
  std::ifstream in(p);
  std::vector<std::vector<std::string>> rows;
  std::string line;
  while (std::getline(in, line)) {
    std::vector<std::string> row;
    for (auto f : tsv::split(line)) row.emplace_back(f);
    rows.push_back(row);
  }
  return rows;
}

} // namespace

TEST(CmdPreprocess, AuditCountsAndDeterminism) {
  const auto dir = testutil::scratch("preprocess");
  write_file(dir / "spr.tsv",
             "subject_id\tdoc_id\tsentence_id\tword_index\tword_text\tresponse\n"
             "s1\td\t0\t0\tOnce\t400\ns1\td\t0\t1\tupon\t350\ns1\td\t0\t2\ta\t50\n"
             "s1\td\t0\t3\ttime\t330\ns1\td\t0\t4\tthere\t360\ns1\td\t0\t5\twas\t300\n");
  write_file(dir / "comp.tsv", "subject_id\tcorrect\ns1\t5\n");
  const auto cfg = config_at(dir, "[run]\nseed = 3\noutput_dir = out\n[dataset]\nid = tiny\nkind = spr\n"
                                  "responses = spr.tsv\ncomprehension = comp.tsv\n");
  const auto ds = cmd_preprocess(cfg);
  EXPECT_EQ(ds.parts.at(0).table.size(), 3u);
  const auto audit = testutil::slurp(dir / "out" / "audit.txt");
  EXPECT_NE(audit.find("rt_window: 1\n"), std::string::npos) << audit;
  EXPECT_NE(audit.find("sentence_boundary: 2\n"), std::string::npos) << audit;
  EXPECT_TRUE(fs::exists(dir / "out" / "config.ini"));

  std::map<std::string, std::string> first;
  for (const auto& e : fs::directory_iterator(dir / "out")) first[e.path().filename()] = testutil::slurp(e.path());
  cmd_preprocess(cfg);
  for (const auto& [name, bytes] : first) EXPECT_EQ(testutil::slurp(dir / "out" / name), bytes) << name;
}

TEST(CmdPreprocess, MissingFileNamesPath) {
  const auto dir = testutil::scratch("missing");
  const auto cfg = config_at(dir, "[run]\nseed = 3\n[dataset]\nkind = generic\nresponses = nowhere.tsv\n");
  try {
    cmd_preprocess(cfg);
    FAIL();
  } catch (const DataError& e) {
    EXPECT_NE(std::string(e.what()).find("nowhere.tsv"), std::string::npos);
    EXPECT_EQ(exit_code(e), kExitData);
  }
}

TEST(CmdEvaluate, EmptyBundleListIsUsageError) {
  const auto dir = testutil::scratch("nobundles");
  const auto cfg = config_at(dir, "[run]\nseed = 3\n[dataset]\nkind = generic\nresponses = r.tsv\n");
  try {
    cmd_evaluate(cfg);
    FAIL();
  } catch (const ConfigError& e) {
    EXPECT_EQ(exit_code(e), kExitConfig);
  }
  EXPECT_THROW(cmd_residualize(cfg), ConfigError);
}

TEST(CmdEvaluate, SentenceFmriWithCeilingNormalizes) {
  const auto dir = testutil::scratch("pereira");
  synth::SynthSpec spec;
  spec.seed = 21;
  spec.n_subjects = 2;
  spec.n_docs = 20;
  spec.sentences_per_doc = 12;
  spec.words_per_sentence = 1;
  const auto corpus = synth::gen_latent_regression(spec);
  ResponseTable t{CorpusKind::FmriSentence, {}};
  for (const auto& r : corpus.table.rows) {
    for (const std::string region : {"lang_a", "lang_b"}) {
      auto row = r;
      row.region = region;
      row.response = *r.response + (region == "lang_a" ? 0.05 : -0.05);
      t.rows.push_back(row);
    }
  }
  write_response_table((dir / "exp2.tsv").string(), t);
  write_vector_bundle((dir / "a.vbnd").string(), synth::gen_random_feature_bundle(corpus, 8, 1, 0.7));
  const auto cfg = config_at(dir, "[run]\nseed = 5\n[dataset]\nid = pereira\nkind = fmri_sentence\n"
                                  "responses = exp2.tsv\npartition = cv5_by_subject\nceiling = 0.32\n"
                                  "[models]\ntrained = a.vbnd\n");
  const auto scores = cmd_evaluate(cfg);
  ASSERT_EQ(scores.size(), 1u);
  const auto rows = read_rows(dir / "out" / "results.tsv");
  ASSERT_EQ(rows.size(), 2u);
  EXPECT_EQ(rows[0], (std::vector<std::string>{"dataset", "model", "params", "steps", "r", "normalized_r", "n"}));
  const double r = std::stod(rows[1][4]);
  EXPECT_GT(r, 0.3);
  EXPECT_EQ(*tsv::parse_double(rows[1][5]), *tsv::parse_double(rows[1][4]) / 0.32);
  EXPECT_EQ(rows[1][6], "480");
}

TEST(CmdEvaluate, TimeSeriesDatasetWithTrGrid) {
  const auto dir = testutil::scratch("timeseries");
  std::ofstream ev(dir / "events.tsv");
  ev << "doc_id\tsentence_id\tword_index\tonset_time\n";
  VectorBundle b;
  b.meta = {"ts", "test", 100, 2, 0, std::nullopt};
  b.vectors.resize(40, 2);
  for (std::uint32_t w = 0; w < 40; ++w) {
    ev << "story\t0\t" << w << '\t' << 0.7 * w << '\n';
    b.tokens.push_back({"story", w, 0, w});
    b.vectors(w, 0) = static_cast<float>(w % 3);
    b.vectors(w, 1) = static_cast<float>(w % 5) - 2.0f;
  }
  ev.close();
  write_vector_bundle((dir / "b.vbnd").string(), b);
  std::ofstream bold(dir / "bold.tsv");
  bold << "subject_id\tdoc_id\tonset_time\tresponse\n";
  for (int s = 0; s < 20; ++s) bold << "subj\tstory\t" << 2 * s << '\t' << std::sin(s) << '\n';
  bold.close();
  const std::string base = "[run]\nseed = 5\n[dataset]\nkind = fmri_timeseries\nresponses = bold.tsv\n"
                           "word_events = events.tsv\n[models]\ntrained = b.vbnd\n";
  const auto ds = load_dataset(config_at(dir, base));
  EXPECT_EQ(ds.parts.at(0).table.size(), 20u);
  EXPECT_EQ(cmd_evaluate(config_at(dir, base)).size(), 1u);
  EXPECT_THROW(load_dataset(config_at(dir, base + "[hrf]\ntr = 3\n")), DataError);
}

TEST(CmdSynth, PipelineRunsFromGeneratedConfig) {
  const auto dir = testutil::scratch("synth");
  auto cfg = config_at(dir, "[run]\nseed = 12\noutput_dir = gen\n[synth]\nn_docs = 20\nlatent_dim = 8\n"
                            "widths = 4, 16, 64\nmax_subwords = 2\n[scaling]\nn_permutations = 200\n");
  cmd_synth(cfg);
  EXPECT_TRUE(fs::exists(dir / "gen" / "bundles" / "synth-d16-step0.vbnd"));
  EXPECT_TRUE(fs::exists(dir / "gen" / "bundles" / "synth-d64-step143000.vbnd"));
  const auto run = load_config(dir / "gen" / "run.ini");
  EXPECT_EQ(run.trained_bundles.size(), 3u);
  const auto reports = cmd_scaling(run);
  ASSERT_EQ(reports.size(), 3u);
  EXPECT_EQ(reports[0].label, "untrained");
  EXPECT_EQ(reports[2].label, "residualized");
  for (const auto* name : {"results.tsv", "residualized.tsv", "scaling.tsv", "scaling_trained_all.svg",
                           "scaling_trained_all.tsv", "config.ini"}) {
    EXPECT_TRUE(fs::exists(dir / "gen" / "results" / name)) << name;
  }
  const auto svg = testutil::slurp(dir / "gen" / "results" / "scaling_untrained_all.svg");
  EXPECT_NE(svg.find("slope="), std::string::npos);
  EXPECT_NE(svg.find("p+="), std::string::npos);
}

TEST(Report, UndefinedScoresAreFlagged) {
  VariantScore v;
  v.dataset_id = "d";
  v.model_name = "m";
  v.parameter_count = 10;
  v.n_heldout = 4;
  std::ostringstream out;
  write_results(out, {v});
  EXPECT_EQ(out.str(), "dataset\tmodel\tparams\tsteps\tr\tnormalized_r\tn\nd\tm\t10\t0\tUNDEFINED\tUNDEFINED\t4\n");
}

TEST(ExitCodes, Distinct) {
  EXPECT_EQ(exit_code(ConfigError("x")), kExitConfig);
  EXPECT_EQ(exit_code(DataError("x")), kExitData);
  EXPECT_EQ(exit_code(NumericalError("x")), kExitNumerical);
  EXPECT_EQ(exit_code(std::runtime_error("x")), kExitOther);
}
