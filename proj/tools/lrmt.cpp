// lrmt: command-line front end for the low-resource MT lab.

#include <CLI11.hpp>

#include <fstream>
#include <iostream>
#include <sstream>

#include "lrmt/bpe.hpp"
#include "lrmt/checkpoint.hpp"
#include "lrmt/corpus.hpp"
#include "lrmt/experiment.hpp"
#include "lrmt/metrics.hpp"
#include "lrmt/report.hpp"
#include "lrmt/toydata.hpp"
#include "lrmt/trainer.hpp"

namespace fs = std::filesystem;
using namespace lrmt;

namespace {

struct ExperimentArgs {
  std::string config;
  std::vector<std::string> overrides;
  std::string output_dir;
  bool force = false;
  bool allow_novel = false;
  bool verbose = false;
};

void add_experiment_flags(CLI::App* sub, ExperimentArgs& a) {
  sub->add_option("-c,--config", a.config, "Experiment config file")->required()->check(CLI::ExistingFile);
  sub->add_option("--set", a.overrides, "Override a config value: section.key=value");
  sub->add_option("-o,--output-dir", a.output_dir, "Output directory (overrides the config)");
  sub->add_flag("--force", a.force, "Rerun every stage even if the manifest is up to date");
  sub->add_flag("--allow-novel", a.allow_novel, "Permit regime/freeze combinations outside the standard matrix");
  sub->add_flag("-v,--verbose", a.verbose, "Log stage progress to stderr");
}

ExperimentConfig load_config(const ExperimentArgs& a) {
  std::vector<std::string> ov = a.overrides;
  if (!a.output_dir.empty()) ov.push_back("experiment.output_dir=" + a.output_dir);
  if (a.allow_novel) ov.push_back("experiment.allow_novel=true");
  return load_experiment_config(a.config, ov);
}

ExperimentResult run_until(const ExperimentArgs& a, Stage until) {
  RunOptions opt;
  opt.force = a.force;
  opt.until = until;
  opt.verbose = a.verbose;
  return run_experiment(load_config(a), opt);
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  if (!in) throw Error(ErrorCode::IoError, "cannot read " + p.string());
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

void emit(const std::string& text, const std::string& path) {
  if (path.empty()) {
    std::cout << text;
    return;
  }
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw Error(ErrorCode::IoError, "cannot write " + path);
  out << text;
}

std::string join_ids(const std::vector<int>& ids) {
  std::string s;
  for (int id : ids) {
    if (!s.empty()) s += ' ';
    s += std::to_string(id);
  }
  return s;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Low-resource MT lab: tokenizer, training regimes, decoding and evaluation"};
  app.require_subcommand(1);
  app.set_version_flag("--version", LRMT_VERSION);

  // train-bpe
  std::vector<std::string> bpe_inputs;
  std::string bpe_out;
  int bpe_vocab = 8000;
  bool no_byte_fallback = false;
  auto* train_bpe_cmd = app.add_subcommand("train-bpe", "Train a joint BPE model on text files");
  train_bpe_cmd->add_option("-i,--input", bpe_inputs, "Training text files")->required()->check(CLI::ExistingFile);
  train_bpe_cmd->add_option("-o,--output", bpe_out, "Model file to write")->required();
  train_bpe_cmd->add_option("--vocab-size", bpe_vocab, "Target vocabulary size")->capture_default_str();
  train_bpe_cmd->add_flag("--no-byte-fallback", no_byte_fallback, "Map uncovered characters to unk");

  // preprocess
  std::string pp_bpe, pp_src, pp_tgt, pp_src_lang, pp_tgt_lang, pp_out;
  int pp_max_pos = 256;
  auto* preprocess_cmd = app.add_subcommand("preprocess", "Tag and tokenize a parallel corpus into id lines");
  preprocess_cmd->add_option("--bpe", pp_bpe, "BPE model")->required()->check(CLI::ExistingFile);
  preprocess_cmd->add_option("--src", pp_src, "Source text file")->required()->check(CLI::ExistingFile);
  preprocess_cmd->add_option("--tgt", pp_tgt, "Target text file")->required()->check(CLI::ExistingFile);
  preprocess_cmd->add_option("--src-lang", pp_src_lang, "Source language code")->required();
  preprocess_cmd->add_option("--tgt-lang", pp_tgt_lang, "Target language code")->required();
  preprocess_cmd->add_option("--max-positions", pp_max_pos, "Truncation length")->capture_default_str();
  preprocess_cmd->add_option("-o,--output", pp_out, "Output file (default stdout)");

  // experiment stages
  ExperimentArgs pre_args, ft_args, run_args;
  auto* pretrain_cmd = app.add_subcommand("pretrain", "Run the pipeline through alignment-augmented pre-training");
  add_experiment_flags(pretrain_cmd, pre_args);
  auto* finetune_cmd = app.add_subcommand("finetune", "Run the pipeline through fine-tuning of every regime");
  add_experiment_flags(finetune_cmd, ft_args);
  auto* run_cmd = app.add_subcommand("run", "Run the whole pipeline: tokenizer to report");
  add_experiment_flags(run_cmd, run_args);

  // decode
  std::string dec_ckpt, dec_bpe, dec_in, dec_out, dec_tgt_lang;
  int dec_beam = 1;
  double dec_lp = 1.0;
  auto* decode_cmd = app.add_subcommand("decode", "Translate a text file with a checkpoint");
  decode_cmd->add_option("--checkpoint", dec_ckpt, "Checkpoint file")->required()->check(CLI::ExistingFile);
  decode_cmd->add_option("--bpe", dec_bpe, "BPE model of the checkpoint")->required()->check(CLI::ExistingFile);
  decode_cmd->add_option("-i,--input", dec_in, "Source sentences")->required()->check(CLI::ExistingFile);
  decode_cmd->add_option("--tgt-lang", dec_tgt_lang, "Target language code")->required();
  decode_cmd->add_option("-o,--output", dec_out, "Output file (default stdout)");
  decode_cmd->add_option("--beam", dec_beam, "Beam width")->capture_default_str();
  decode_cmd->add_option("--length-penalty", dec_lp, "Length penalty exponent")->capture_default_str();

  // score
  std::string sc_hyp, sc_ref;
  std::vector<std::string> sc_metrics;
  auto* score_cmd = app.add_subcommand("score", "Score hypotheses against references");
  score_cmd->add_option("--hyp", sc_hyp, "Hypothesis file")->required()->check(CLI::ExistingFile);
  score_cmd->add_option("--ref", sc_ref, "Reference file")->required()->check(CLI::ExistingFile);
  score_cmd->add_option("-m,--metric", sc_metrics, "bleu, chrf2, chrf++, ter, ribes (default all)");

  // report
  ExperimentArgs rep_args;
  std::string rep_scores, rep_out, rep_baseline;
  std::vector<std::string> rep_metrics;
  bool rep_tsv = false, rep_comet = false;
  auto* report_cmd = app.add_subcommand("report", "Render result tables from a run or a scores file");
  report_cmd->add_option("-c,--config", rep_args.config, "Experiment config (runs it if needed)");
  report_cmd->add_option("--set", rep_args.overrides, "Override a config value: section.key=value");
  report_cmd->add_option("--output-dir", rep_args.output_dir, "Output directory (overrides the config)");
  report_cmd->add_option("--scores", rep_scores, "scores.tsv written by a run")->check(CLI::ExistingFile);
  report_cmd->add_option("-o,--output", rep_out, "Output file (default stdout)");
  report_cmd->add_option("--baseline", rep_baseline, "Regime key for delta columns");
  report_cmd->add_option("-m,--metric", rep_metrics, "Metrics to tabulate (default all)");
  report_cmd->add_flag("--tsv", rep_tsv, "Machine-readable long format");
  report_cmd->add_flag("--comet", rep_comet, "Add an empty COMET column");
  report_cmd->add_flag("-v,--verbose", rep_args.verbose, "Log stage progress to stderr");

  // compare
  std::vector<std::string> cmp_configs;
  std::vector<std::string> cmp_overrides;
  std::string cmp_baseline = "bilingual", cmp_out;
  std::vector<std::string> cmp_metrics;
  bool cmp_force = false, cmp_verbose = false;
  auto* compare_cmd = app.add_subcommand("compare", "Run several experiments and tabulate them together");
  compare_cmd->add_option("-c,--config", cmp_configs, "Experiment configs")->required()->check(CLI::ExistingFile);
  compare_cmd->add_option("--set", cmp_overrides, "Override applied to every config");
  compare_cmd->add_option("--baseline", cmp_baseline, "Regime key of the delta baseline")->capture_default_str();
  compare_cmd->add_option("-m,--metric", cmp_metrics, "Metrics to tabulate (default chrF2)");
  compare_cmd->add_option("-o,--output", cmp_out, "Output file (default stdout)");
  compare_cmd->add_flag("--force", cmp_force, "Rerun every stage");
  compare_cmd->add_flag("-v,--verbose", cmp_verbose, "Log stage progress to stderr");

  // gen-toy
  std::string toy_out;
  ToyDatasetOptions toy;
  auto* gen_toy_cmd = app.add_subcommand("gen-toy", "Write the synthetic toy corpora and dictionaries");
  gen_toy_cmd->add_option("-o,--output", toy_out, "Directory")->required();
  gen_toy_cmd->add_option("--seed", toy.seed, "Generator seed")->capture_default_str();
  gen_toy_cmd->add_option("--train", toy.train_pairs, "Training pairs per language")->capture_default_str();
  gen_toy_cmd->add_option("--dev", toy.dev_pairs, "Dev pairs per language")->capture_default_str();
  gen_toy_cmd->add_option("--test", toy.test_pairs, "Test pairs per language")->capture_default_str();

  CLI11_PARSE(app, argc, argv);

  auto parse_metrics = [](const std::vector<std::string>& names, std::vector<Metric> fallback) {
    if (names.empty()) return fallback;
    std::vector<Metric> out;
    for (const auto& n : names) out.push_back(parse_metric(n));
    return out;
  };

  try {
    if (*train_bpe_cmd) {
      std::vector<std::string> lines;
      for (const auto& f : bpe_inputs) {
        auto l = read_lines(f);
        lines.insert(lines.end(), l.begin(), l.end());
      }
      const BpeModel m = train_bpe(lines, bpe_vocab, all_lang_tags(), !no_byte_fallback);
      m.save(bpe_out);
      std::cout << "vocab " << m.size() << " merges " << m.merges().size() << " hash " << m.hash() << "\n";
    } else if (*preprocess_cmd) {
      const BpeModel m = BpeModel::load(pp_bpe);
      const Lang sl = parse_lang(pp_src_lang), tl = parse_lang(pp_tgt_lang);
      const auto corpus = load_parallel_corpus(pp_src, pp_tgt, sl, tl, Split::train);
      std::ostringstream out;
      for (const auto& p : corpus.pairs) {
        const Example ex = encode_pair(p, m, pp_max_pos);
        out << join_ids(ex.src) << '\t' << join_ids(ex.tgt_out) << '\n';
      }
      emit(out.str(), pp_out);
    } else if (*pretrain_cmd) {
      run_until(pre_args, Stage::pretrain);
    } else if (*finetune_cmd) {
      run_until(ft_args, Stage::finetune);
    } else if (*run_cmd) {
      const auto res = run_until(run_args, Stage::report);
      std::cout << (res.no_op ? "up to date: " : "finished: ") << (res.output_dir / "report.txt").string() << "\n";
    } else if (*decode_cmd) {
      const Checkpoint ckpt = load_checkpoint(dec_ckpt);
      const BpeModel m = BpeModel::load(dec_bpe);
      if (ckpt.bpe_hash != m.hash()) throw Error(ErrorCode::VocabMismatch, "tokenizer does not match checkpoint");
      const Lang tl = parse_lang(dec_tgt_lang);
      const Lang sl = tl == Lang::en ? Lang::as : Lang::en;  // only the tag depends on the languages
      std::vector<std::vector<int>> sources;
      for (const auto& line : read_lines(dec_in)) {
        sources.push_back(encode_pair({sl, tl, line, ""}, m, ckpt.model_config.max_positions).src);
      }
      std::string text;
      for (const auto& h : translate(ckpt.params, m, sources, dec_beam, dec_lp)) text += h + "\n";
      emit(text, dec_out);
    } else if (*score_cmd) {
      const auto pairs = zip_eval_pairs(read_lines(sc_hyp), read_lines(sc_ref));
      const MetricScores s = score_all(pairs);
      for (Metric m : parse_metrics(sc_metrics, {kAllMetrics.begin(), kAllMetrics.end()})) {
        std::printf("%s\t%.4f\n", std::string(metric_name(m)).c_str(), metric_value(s, m));
      }
    } else if (*report_cmd) {
      ResultTable table;
      if (!rep_scores.empty()) {
        table = scores_from_tsv(slurp(rep_scores));
      } else if (!rep_args.config.empty()) {
        table = run_until(rep_args, Stage::report).scores;
      } else {
        throw Error(ErrorCode::ConfigError, "report needs --config or --scores");
      }
      ReportOptions opt;
      opt.metrics = parse_metrics(rep_metrics, opt.metrics);
      if (!rep_baseline.empty()) opt.baseline = parse_regime(rep_baseline);
      opt.comet_column = rep_comet;
      emit(rep_tsv ? render_report_tsv(table, opt) : render_report(table, opt), rep_out);
    } else if (*compare_cmd) {
      std::vector<ExperimentResult> runs;
      for (const auto& c : cmp_configs) {
        RunOptions opt;
        opt.force = cmp_force;
        opt.verbose = cmp_verbose;
        runs.push_back(run_experiment(load_experiment_config(c, cmp_overrides), opt));
      }
      emit(compare_regimes(runs, parse_regime(cmp_baseline), parse_metrics(cmp_metrics, {Metric::chrf2})), cmp_out);
    } else if (*gen_toy_cmd) {
      write_toy_dataset(toy_out, toy);
    }
  } catch (const Error& e) {
    std::cerr << "error: " << e.what() << "\n";
    return exit_code_for(e.code());
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return 0;
}
