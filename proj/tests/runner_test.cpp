#include <sys/wait.h>

#include <cstdlib>
#include <fstream>
#include <sstream>

#include <gtest/gtest.h>

#include "harmclf/config.hpp"
#include "harmclf/delimited.hpp"
#include "harmclf/runner.hpp"
#include "harmclf/synthetic.hpp"
#include "support/oracles.hpp"

using namespace harmclf;
namespace fs = std::filesystem;

namespace {

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::stringstream s;
  s << in.rdbuf();
  return s.str();
}

std::size_t count_lines(const std::string& s) { return static_cast<std::size_t>(std::count(s.begin(), s.end(), '\n')); }

int run_cli(const std::string& args, const fs::path& log) {
  const std::string cmd = std::string(HARMCLF_CLI_PATH) + " " + args + " > " + log.string() + " 2>&1";
  const int status = std::system(cmd.c_str());
  return WIFEXITED(status) ? WEXITSTATUS(status) : -1;
}

class RunnerTest : public ::testing::Test {
 protected:
  static void SetUpTestSuite() {
    dir_ = new oracle::TempDir("runner");
    suite_ = new synthetic::SuiteFiles(synthetic::write_demo_suite(dir_->path() / "suite"));
  }
  static void TearDownTestSuite() {
    delete suite_;
    delete dir_;
  }

  // Config with its output redirected below a fresh directory.
  static ExperimentConfig config(const std::string& stem, const fs::path& out) {
    auto c = load_config(dir_->path() / "suite" / "configs" / (stem + ".conf"), false);
    c.output_dir = out;
    return c;
  }

  static oracle::TempDir* dir_;
  static synthetic::SuiteFiles* suite_;
  std::ostringstream log_;
};

oracle::TempDir* RunnerTest::dir_ = nullptr;
synthetic::SuiteFiles* RunnerTest::suite_ = nullptr;

}  // namespace

TEST_F(RunnerTest, FixtureIsSeparable) {
  synthetic::CorpusSpec spec;
  spec.lexicon_seed = 7;  // abusive lexicon of the default suite
  const auto lex = synthetic::make_lexicon(spec);
  const auto train = load_dataset((dir_->path() / "suite/data/abusive_train.tsv").string(), Format::tsv,
                                  default_label_map(Task::abusive));
  EXPECT_TRUE(synthetic::marker_margin(train, lex).separable());
  EXPECT_EQ(suite_->configs.size(), 8u);
}

TEST_F(RunnerTest, NeuralAbusiveDefaultsOnSeparableFixture) {
  oracle::TempDir out("run");
  const auto c = config("neural_scratch_abusive", out.path());
  EXPECT_EQ(c.train.selection, Selection::best_validation);
  EXPECT_TRUE(c.split_enabled);
  const auto outcome = run_experiment(c, log_);
  EXPECT_GE(outcome.row.f1_positive, 0.95);
  EXPECT_TRUE(fs::exists(out / "model" / "artifact.json"));
  EXPECT_TRUE(fs::exists(out / "model" / "checkpoint" / "manifest.json"));
  const auto report = read_json(out / "eval.json");
  EXPECT_EQ(report.at("selected_epoch").get<int>(), outcome.selected_epoch);
  EXPECT_EQ(report.at("history").size(), 10u);
  EXPECT_EQ(count_lines(slurp(out / "results.jsonl")), 1u);

  // The saved artifact scores the test set exactly as the run did.
  const auto artifact = load_artifact(out / "model");
  const auto test = load_dataset(c.test_path.string(), Format::tsv, c.label_map());
  EXPECT_EQ(evaluate(artifact.scores(test), test.labels(), c.threshold).f1_positive, outcome.row.f1_positive);
}

TEST_F(RunnerTest, RerunIsIdentical) {
  for (const char* stem : {"boosted_xgb_like_threatening", "neural_scratch_threatening"}) {
    oracle::TempDir a("rerun"), b("rerun");
    const auto ra = run_experiment(config(stem, a.path()), log_).row;
    const auto rb = run_experiment(config(stem, b.path()), log_).row;
    EXPECT_EQ(to_json(ra, false), to_json(rb, false)) << stem;
    EXPECT_EQ(slurp(a / "model" / "artifact.json"), slurp(b / "model" / "artifact.json"));
  }
}

TEST_F(RunnerTest, BoostedArtifactRoundTrip) {
  oracle::TempDir out("boost");
  const auto c = config("boosted_lgbm_like_abusive", out.path());
  const auto outcome = run_experiment(c, log_);
  const auto artifact = load_artifact(out / "model");
  const auto test = load_dataset(c.test_path.string(), Format::tsv, c.label_map());
  EXPECT_EQ(evaluate(artifact.scores(test), test.labels(), c.threshold).roc_auc, outcome.row.roc_auc);
}

TEST_F(RunnerTest, CheckpointClassifierWithoutCheckpointWarns) {
  oracle::TempDir out("ckpt");
  const auto row = run_experiment(config("neural_checkpoint_abusive", out.path()), log_).row;
  EXPECT_NE(log_.str().find("warning"), std::string::npos);
  EXPECT_TRUE(row.ok);
}

TEST_F(RunnerTest, MatrixTableShape) {
  oracle::TempDir out("matrix");
  std::vector<ExperimentConfig> configs;
  for (const auto& p : suite_->configs) {
    auto c = load_config(p, false);
    c.output_dir = out / (c.name + "_" + std::string(to_string(c.task)));
    configs.push_back(c);
  }
  const auto table = run_matrix(configs, out.path(), log_);
  EXPECT_FALSE(table.any_failed);
  EXPECT_EQ(count_lines(slurp(out / "leaderboard.jsonl")), configs.size());
  EXPECT_EQ(slurp(out / "leaderboard.txt"), table.text);

  std::vector<std::string> lines;
  std::istringstream text(table.text);
  for (std::string line; std::getline(text, line);) lines.push_back(line);
  ASSERT_EQ(lines.size(), 6u);  // header, rule, 4 classifiers
  EXPECT_EQ(std::count(lines[0].begin(), lines[0].end(), '|'), 6);
  for (const auto& line : lines) EXPECT_EQ(line.size(), lines[0].size());
  EXPECT_NE(lines[0].find("abusive F1"), std::string::npos);
  EXPECT_NE(lines[0].find("threatening ROC-AUC"), std::string::npos);

  // Sorted by first-task F1, best first.
  std::vector<double> first_f1;
  for (std::size_t i = 2; i < lines.size(); ++i) {
    const auto name_end = lines[i].find('|', 1);
    first_f1.push_back(std::stod(lines[i].substr(name_end + 1)));
  }
  EXPECT_TRUE(std::is_sorted(first_f1.rbegin(), first_f1.rend()));
}

TEST_F(RunnerTest, MatrixKeepsGoingPastFailures) {
  oracle::TempDir out("fail");
  auto good = config("boosted_xgb_like_abusive", out / "good");
  auto bad = config("boosted_xgb_like_threatening", out / "bad");
  // A test file whose labels cannot be read fails in the load stage.
  std::ofstream(out / "broken.tsv") << "id\ttext\tlabel\nx\tsome text\tMaybe\n";
  bad.test_path = out / "broken.tsv";
  const auto table = run_matrix({good, bad}, out.path(), log_);
  EXPECT_TRUE(table.any_failed);
  ASSERT_EQ(table.rows.size(), 2u);
  EXPECT_TRUE(table.rows[0].ok);
  EXPECT_FALSE(table.rows[1].ok);
  EXPECT_NE(table.rows[1].error.find("load"), std::string::npos);
  EXPECT_NE(table.text.find("FAILED"), std::string::npos);
  EXPECT_EQ(count_lines(slurp(out / "leaderboard.jsonl")), 2u);
}

TEST_F(RunnerTest, SingleConfigMatrixEqualsExperiment) {
  oracle::TempDir a("single"), b("single");
  const auto direct = run_experiment(config("boosted_xgb_like_abusive", a.path()), log_).row;
  const auto table = run_matrix({config("boosted_xgb_like_abusive", b.path())}, b.path(), log_);
  ASSERT_EQ(table.rows.size(), 1u);
  EXPECT_EQ(to_json(table.rows[0], false), to_json(direct, false));
  EXPECT_EQ(table.text, render_table({direct}));
}

TEST(Submission, WritesIdLabelCsv) {
  oracle::TempDir dir("submit");
  const LabelNames names{"Abusive", "Non-Abusive"};
  emit_submission({"a", "b"}, {1, 0}, dir / "s.csv", names);
  EXPECT_EQ(slurp(dir / "s.csv"), "id,label\na,Abusive\nb,Non-Abusive\n");
}

TEST(Submission, ParsesBack) {
  oracle::TempDir dir("submit");
  const LabelNames names{"Threatening", "Non-Threatening"};
  std::vector<std::string> ids;
  std::vector<int> preds;
  for (int i = 0; i < 50; ++i) {
    ids.push_back(i % 7 == 0 ? "id,with \"quote\" " + std::to_string(i) : "id" + std::to_string(i));
    preds.push_back((i * 37) % 3 == 0 ? 1 : 0);
  }
  emit_submission(ids, preds, dir / "s.csv", names);
  const auto records = delimited::parse(slurp(dir / "s.csv"), Format::csv);
  ASSERT_EQ(records.size(), ids.size() + 1);
  for (std::size_t i = 0; i < ids.size(); ++i) {
    EXPECT_EQ(records[i + 1].fields.at(0), ids[i]);
    EXPECT_EQ(records[i + 1].fields.at(1), preds[i] ? "Threatening" : "Non-Threatening");
  }
}

TEST(Submission, RefusesEmptyOrMisaligned) {
  oracle::TempDir dir("submit");
  EXPECT_THROW(emit_submission({}, {}, dir / "e.csv", LabelNames{"A", "B"}), ShapeError);
  EXPECT_FALSE(fs::exists(dir / "e.csv"));
  EXPECT_THROW(emit_submission({"a"}, {1, 0}, dir / "m.csv", LabelNames{"A", "B"}), ShapeError);
  EXPECT_FALSE(fs::exists(dir / "m.csv"));
}

TEST_F(RunnerTest, CliMissingDataIsExitTwoWithoutArtifacts) {
  oracle::TempDir out("cli");
  std::ofstream(out / "bad.conf") << "task = abusive\nclassifier = boosted_xgb_like\n[data]\n"
                                     "train = missing.tsv\ntest = missing.tsv\n[output]\ndir = result\n";
  EXPECT_EQ(run_cli("train " + (out / "bad.conf").string(), out / "log.txt"), 2);
  EXPECT_NE(slurp(out / "log.txt").find("missing.tsv"), std::string::npos);
  EXPECT_FALSE(fs::exists(out / "result"));
  EXPECT_THROW(load_config(out / "bad.conf", false), ConfigError);
}

TEST_F(RunnerTest, CliEndToEnd) {
  oracle::TempDir out("cli");
  const auto suite = dir_->path() / "suite";
  const auto data = suite / "data";
  ASSERT_EQ(run_cli("stats " + (data / "threatening_train.tsv").string() + " --task threatening", out / "stats"), 0);
  const auto stats = nlohmann::json::parse(slurp(out / "stats"));
  EXPECT_EQ(stats.at("n_positive"), 100);
  EXPECT_EQ(stats.at("n_negative"), 500);

  ASSERT_EQ(run_cli("split " + (data / "abusive_train.tsv").string() + " --out-dir " + out.path().string(),
                    out / "split"),
            0);
  EXPECT_TRUE(fs::exists(out / "abusive_train.train.tsv"));
  EXPECT_TRUE(fs::exists(out / "abusive_train.split.json"));

  // train and matrix on a copy of one config with its output under out/.
  std::ofstream(out / "x.conf") << slurp(suite / "configs" / "boosted_xgb_like_abusive.conf") << "\n[output]\ndir = "
                                << (out / "run").string() << "\n";
  {
    // Data paths in the copied config are relative to the configs directory.
    std::string text = slurp(out / "x.conf");
    for (std::string::size_type p; (p = text.find("../data/")) != std::string::npos;)
      text.replace(p, 8, (data / "").string());
    std::ofstream(out / "x.conf") << text;
  }
  ASSERT_EQ(run_cli("train " + (out / "x.conf").string(), out / "train"), 0);
  const auto row = nlohmann::json::parse(slurp(out / "train"));
  EXPECT_EQ(row.at("status"), "ok");

  ASSERT_EQ(run_cli("evaluate " + (out / "run" / "model").string() + " " + (data / "abusive_test.tsv").string(),
                    out / "eval"),
            0);
  EXPECT_EQ(nlohmann::json::parse(slurp(out / "eval")).at("f1_positive"), row.at("f1_positive"));

  // Submission from a test file without a label column.
  const auto test = load_dataset((data / "abusive_test.tsv").string(), Format::tsv, default_label_map(Task::abusive));
  {
    std::ofstream unlabeled(out / "unlabeled.tsv");
    unlabeled << "id\ttext\n";
    for (const auto& e : test.examples) unlabeled << e.id << '\t' << e.text << '\n';
  }
  ASSERT_EQ(run_cli("submit " + (out / "run" / "model").string() + " " + (out / "unlabeled.tsv").string() +
                        " --out " + (out / "sub.csv").string(),
                    out / "submit"),
            0);
  EXPECT_EQ(count_lines(slurp(out / "sub.csv")), test.size() + 1);

  ASSERT_EQ(run_cli("matrix " + (out / "x.conf").string() + " --out " + (out / "m").string(), out / "matrix"), 0);
  EXPECT_EQ(count_lines(slurp(out / "m" / "leaderboard.jsonl")), 1u);

  EXPECT_EQ(run_cli("train " + (out / "nope.conf").string(), out / "nope"), 2);
  EXPECT_EQ(run_cli("stats " + (out / "nope.tsv").string(), out / "nope"), 3);
}
