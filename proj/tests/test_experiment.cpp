#include <gtest/gtest.h>

#include <sys/wait.h>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>

#include "lrmt/error.hpp"
#include "lrmt/experiment.hpp"
#include "lrmt/toydata.hpp"

using namespace lrmt;
namespace fs = std::filesystem;

namespace {

fs::path temp_dir(const std::string& name) {
  const fs::path d = fs::temp_directory_path() / ("lrmt_exp_" + name);
  fs::remove_all(d);
  fs::create_directories(d);
  return d;
}

const char* kSmallConfig = R"(
[experiment]
name = small
seed = 3
languages = as, kha, lus, mni
eval_languages = kha
regimes = bilingual, multi_to_bi

[data]
root = data
grouping = grouping.txt

[bpe]
vocab_size = 450

[model]
layers_enc = 1
layers_dec = 1
d_model = 16
d_ff = 32
heads = 2
max_positions = 64

[pretrain]
updates = 10
peak_lr = 3e-3
warmup_updates = 5

[finetune]
max_updates = 10
checkpoint_interval = 5
accumulation = 1
peak_lr = 1e-3
warmup_updates = 5
dev_chrf = false
)";

// A config directory with small toy data next to it.
fs::path make_workspace(const std::string& name, const std::string& config = kSmallConfig) {
  const fs::path d = temp_dir(name);
  write_toy_dataset(d / "data", {40, 8, 8, 5});
  std::ofstream(d / "exp.cfg") << config;
  return d;
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

int run_cli(const std::string& args) {
  const std::string cmd = std::string(LRMT_CLI_PATH) + " " + args + " >/dev/null 2>&1";
  const int status = std::system(cmd.c_str());
  return WIFEXITED(status) ? WEXITSTATUS(status) : -1;
}

}  // namespace

TEST(Ini, ParseAndOverride) {
  IniData ini = parse_ini("# c\n[a]\nx = 1\n; note\n[b]\ny=two words\n");
  EXPECT_EQ(ini["a"]["x"], "1");
  EXPECT_EQ(ini["b"]["y"], "two words");
  apply_overrides(ini, {"a.x=5", "c.z=7"});
  EXPECT_EQ(ini["a"]["x"], "5");
  EXPECT_EQ(ini["c"]["z"], "7");
  EXPECT_THROW(apply_overrides(ini, {"novalue"}), Error);
  EXPECT_THROW(parse_ini("key outside section\n"), Error);
}

TEST(Config, ParsesAndHashes) {
  const fs::path ws = make_workspace("parse");
  const auto c = load_experiment_config(ws / "exp.cfg");
  EXPECT_EQ(c.name, "small");
  EXPECT_EQ(c.regimes, (std::vector<Regime>{Regime::bilingual, Regime::multi_to_bi}));
  EXPECT_EQ(c.eval_languages, std::vector<Lang>{Lang::kha});
  EXPECT_EQ(c.groups.size(), 2u);
  EXPECT_NO_THROW(c.validate());
  const auto moved = load_experiment_config(ws / "exp.cfg", {"experiment.output_dir=/tmp/elsewhere"});
  EXPECT_EQ(moved.hash(), c.hash());
  EXPECT_EQ(moved.output_dir, fs::path("/tmp/elsewhere"));
  EXPECT_NE(load_experiment_config(ws / "exp.cfg", {"experiment.seed=4"}).hash(), c.hash());
}

TEST(Config, OutputRootFromEnvironment) {
  const fs::path ws = make_workspace("env");
  ::setenv("LRMT_OUTPUT_ROOT", "/tmp/lrmt_root", 1);
  EXPECT_EQ(load_experiment_config(ws / "exp.cfg").output_dir, fs::path("/tmp/lrmt_root/small"));
  ::unsetenv("LRMT_OUTPUT_ROOT");
  EXPECT_EQ(load_experiment_config(ws / "exp.cfg").output_dir, fs::path("runs/small"));
}

TEST(Config, Errors) {
  const fs::path ws = make_workspace("errors");
  auto code_of = [&](const std::vector<std::string>& over) {
    try {
      load_experiment_config(ws / "exp.cfg", over).validate();
    } catch (const Error& e) {
      return e.code();
    }
    return ErrorCode::IoError;  // sentinel: nothing thrown
  };
  EXPECT_EQ(code_of({"model.unknown_key=1"}), ErrorCode::ConfigError);
  EXPECT_EQ(code_of({"experiment.regimes=zero_shot"}), ErrorCode::ConfigError);
  EXPECT_EQ(code_of({"finetune.freeze=encoder"}), ErrorCode::ConfigError);
  EXPECT_EQ(code_of({"model.heads=3"}), ErrorCode::ConfigError);
  EXPECT_EQ(code_of({"experiment.eval_languages=hi"}), ErrorCode::ConfigError);
  EXPECT_EQ(code_of({"finetune.freeze=encoder", "experiment.allow_novel=true"}), ErrorCode::IoError);
  fs::remove(ws / "data" / "train.en-lus.lus");
  EXPECT_EQ(code_of({}), ErrorCode::DataError);
}

TEST(ExitCodes, Mapping) {
  EXPECT_EQ(exit_code_for(ErrorCode::ConfigError), 2);
  EXPECT_EQ(exit_code_for(ErrorCode::DataError), 3);
  EXPECT_EQ(exit_code_for(ErrorCode::DivergedLoss), 4);
  EXPECT_EQ(exit_code_for(ErrorCode::IncompatibleTokenizers), 2);
  EXPECT_EQ(exit_code_for(ErrorCode::IoError), 3);
  EXPECT_EQ(exit_code_for(ErrorCode::ShapeMismatch), 1);
}

TEST(Pipeline, RunsReusesAndMerges) {
  const fs::path ws = make_workspace("pipeline");
  auto cfg = load_experiment_config(ws / "exp.cfg", {"experiment.output_dir=" + (ws / "out").string()});
  const auto first = run_experiment(cfg);
  EXPECT_FALSE(first.no_op);
  for (const char* f : {"bpe.model", "manifest.json", "scores.tsv", "report.txt", "report.tsv", "pretrain/parent.ckpt",
                        "bilingual/kha/best.ckpt", "bilingual/decode.kha.txt", "multi_to_bi/decode.kha.txt"}) {
    EXPECT_TRUE(fs::exists(ws / "out" / f)) << f;
  }
  EXPECT_EQ(first.scores.size(), 2u);
  const std::string report = slurp(ws / "out" / "report.txt");

  const auto again = run_experiment(cfg);
  EXPECT_TRUE(again.no_op);
  EXPECT_EQ(slurp(ws / "out" / "report.txt"), report);

  const auto loaded = load_experiment_result(ws / "out");
  EXPECT_EQ(loaded.bpe_hash, first.bpe_hash);
  EXPECT_EQ(merge_results({first, loaded}).size(), 2u);
  ExperimentResult alien = loaded;
  alien.bpe_hash = "0";
  EXPECT_THROW(merge_results({first, alien}), Error);
  EXPECT_NE(compare_regimes({first}, Regime::bilingual).find("Δ mean vs Bilingual"), std::string::npos);
}

TEST(Cli, ExitCodes) {
  const fs::path ws = make_workspace("cli");
  EXPECT_EQ(run_cli("--help"), 0);
  EXPECT_EQ(run_cli("run -c " + (ws / "exp.cfg").string() + " --set model.heads=3 -o " + (ws / "o").string()), 2);
  EXPECT_EQ(run_cli("run -c " + (ws / "exp.cfg").string() + " --set finetune.freeze=encoder -o " + (ws / "o").string()),
            2);
  fs::remove(ws / "data" / "dict.en-as.txt");
  EXPECT_EQ(run_cli("run -c " + (ws / "exp.cfg").string() + " -o " + (ws / "o").string()), 3);
  EXPECT_NE(run_cli("no-such-command"), 0);
}

TEST(Cli, ScoreAndBpe) {
  const fs::path ws = make_workspace("cli_score");
  const fs::path hyp = ws / "data" / "test.en-kha.kha";
  const std::string out = (ws / "score.txt").string();
  EXPECT_EQ(run_cli("score --hyp " + hyp.string() + " --ref " + hyp.string() + " -m chrf2 -m bleu > " + out), 0);
  EXPECT_EQ(std::system((std::string(LRMT_CLI_PATH) + " score --hyp " + hyp.string() + " --ref " + hyp.string() +
                         " -m chrf2 > " + out)
                            .c_str()),
            0);
  EXPECT_NE(slurp(out).find("100"), std::string::npos);
  EXPECT_EQ(run_cli("train-bpe -i " + (ws / "data" / "train.en-kha.kha").string() + " -o " +
                    (ws / "b.model").string() + " --vocab-size 400"),
            0);
  EXPECT_TRUE(fs::exists(ws / "b.model"));
}
