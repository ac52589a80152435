#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "lrmt/augment.hpp"
#include "lrmt/corpus.hpp"
#include "lrmt/error.hpp"
#include "lrmt/model_config.hpp"
#include "lrmt/report.hpp"
#include "lrmt/trainer.hpp"

namespace lrmt {

/// `[section]` headers, `key = value` lines, '#' or ';' comments.
using IniData = std::map<std::string, std::map<std::string, std::string>>;

IniData parse_ini(std::string_view text);
/// Applies `section.key=value` overrides; later ones win.
void apply_overrides(IniData& ini, const std::vector<std::string>& overrides);

struct ExperimentConfig {
  std::string name = "experiment";
  std::uint64_t seed = 1;
  std::filesystem::path output_dir;
  std::filesystem::path data_root;
  std::vector<Regime> regimes{kAllRegimes.begin(), kAllRegimes.end()};
  Direction direction = Direction::en_xx;
  // Languages available to mixtures, and those that get report cells.
  std::vector<Lang> languages{kIndicLangs.begin(), kIndicLangs.end()};
  std::vector<Lang> eval_languages{kIndicLangs.begin(), kIndicLangs.end()};
  std::vector<LanguageGroup> groups;
  std::map<Lang, std::filesystem::path> dictionaries;  // en -> xx, for RAS

  int bpe_vocab_size = 1000;
  bool byte_fallback = true;
  ModelConfig model;  // vocab_size is taken from the tokenizer

  bool pretrain = true;
  std::int64_t pretrain_updates = 300;
  LrSchedule pretrain_lr;
  RasConfig ras;

  TrainConfig train;  // fine-tuning recipe shared by all regimes
  int beam = 1;
  double length_penalty = 1.0;
  bool allow_novel = false;

  // Canonical key/value text the hash is computed from.
  std::string canonical;

  std::string hash() const;
  std::filesystem::path corpus_path(Split split, Lang indic, Lang side) const;
  /// Throws ConfigError for bad combinations and DataError for missing files.
  void validate() const;
};

/// Relative data paths resolve against `base_dir`. Without an explicit
/// output_dir the run lands in $LRMT_OUTPUT_ROOT/<name> (default root: runs).
ExperimentConfig parse_experiment_config(const IniData& ini, const std::filesystem::path& base_dir);
ExperimentConfig load_experiment_config(const std::filesystem::path& path,
                                        const std::vector<std::string>& overrides = {});

std::filesystem::path default_output_root();

enum class Stage { bpe, pretrain, finetune, decode, score, report };

std::string_view stage_name(Stage s);
Stage parse_stage(std::string_view name);

struct RunOptions {
  bool force = false;
  Stage until = Stage::report;
  bool verbose = false;
};

struct ExperimentResult {
  std::filesystem::path output_dir;
  std::string bpe_hash;
  ResultTable scores;
  bool no_op = false;  // manifest was up to date
};

/// Runs the pipeline stages in order, reusing artifacts recorded in
/// `<output_dir>/manifest.json` when the config hash matches.
ExperimentResult run_experiment(const ExperimentConfig& cfg, const RunOptions& options = {});

/// Loads the results of a finished run from its output directory.
ExperimentResult load_experiment_result(const std::filesystem::path& output_dir);

/// Merges several runs into one table; all must share one tokenizer.
ResultTable merge_results(const std::vector<ExperimentResult>& runs);
std::string compare_regimes(const std::vector<ExperimentResult>& runs, std::optional<Regime> baseline,
                            const std::vector<Metric>& metrics = {Metric::chrf2});

/// Process exit status for an error: 2 config, 3 data, 4 divergence, 1 other.
int exit_code_for(ErrorCode code);

}  // namespace lrmt
