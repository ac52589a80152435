// Acceptance suite: one PASS/FAIL line per criterion, nonzero exit on any failure.

#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <functional>
#include <sstream>
#include <string>
#include <vector>

#include "gradcheck.hpp"
#include "lrmt/augment.hpp"
#include "lrmt/checkpoint.hpp"
#include "lrmt/experiment.hpp"
#include "lrmt/metrics.hpp"
#include "lrmt/optim.hpp"
#include "lrmt/toydata.hpp"
#include "lrmt/trainer.hpp"
#include "oracles.hpp"
#include "toy_fixture.hpp"

using namespace lrmt;
namespace fs = std::filesystem;

namespace {

struct Outcome {
  bool pass = false;
  std::string detail;
};

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point t0) { return std::chrono::duration<double>(Clock::now() - t0).count(); }

std::string fmt(const char* f, double v) {
  char buf[64];
  std::snprintf(buf, sizeof(buf), f, v);
  return buf;
}

fs::path scratch(const std::string& name) {
  const fs::path d = fs::temp_directory_path() / ("lrmt_acceptance_" + name);
  fs::remove_all(d);
  fs::create_directories(d);
  return d;
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

Checkpoint fresh_checkpoint(const ModelConfig& m, const BpeModel& bpe, std::uint64_t seed) {
  Checkpoint c;
  c.model_config = m;
  c.bpe_hash = bpe.hash();
  c.params = init_parameters<float>(m, seed);
  return c;
}

// ---------------------------------------------------------------------------

Outcome freezing_fidelity() {
  const auto t0 = Clock::now();
  const auto s = toy::make_setup(200, 20, 450);
  const auto train = encode_corpus(s.train.at(Lang::kha), s.bpe, 64);
  const auto dev = encode_corpus(s.dev.at(Lang::kha), s.bpe, 64);
  ModelConfig m = toy::small_model(s.bpe, 1, 16, 32);
  const Checkpoint init = fresh_checkpoint(m, s.bpe, 99);
  std::string detail;
  bool ok = true;
  for (FreezeMode mode : {FreezeMode::encoder, FreezeMode::encoder_and_embedding}) {
    TrainConfig cfg = toy::quick_train(1000, 1000);
    cfg.max_tokens_per_batch = 256;
    cfg.freeze.mode = mode;
    const auto r = run_training(train, dev, s.bpe, cfg, m, &init);
    ok = ok && r.updates >= 1000;
    for (ParamGroup g : init.params.groups()) {
      const bool same = r.last.params.group_hash(g) == init.params.group_hash(g);
      if (same != cfg.freeze.frozen(g)) {
        ok = false;
        detail += std::string(freeze_name(mode)) + ":" + std::string(group_name(g)) + " wrong; ";
      }
    }
  }
  const double secs = seconds_since(t0);
  ok = ok && secs < 120.0;
  return {ok, detail + "2 modes x 1000 updates in " + fmt("%.1f", secs) + " s"};
}

Outcome scheduler_exactness() {
  const LrSchedule s;
  const double inc = (s.peak_lr - s.warmup_init_lr) / static_cast<double>(s.warmup_updates);
  bool ok = lr_at(4000, s) == 3e-5;
  ok = ok && std::abs(lr_at(1, s) - 1e-7) <= inc * (1 + 1e-12);
  ok = ok && std::abs(lr_at(2000, s) - 1.505e-5) <= 1e-12;
  bool mono = true;
  for (std::int64_t t = 1; t < 4000; ++t) mono = mono && lr_at(t, s) < lr_at(t + 1, s);
  for (std::int64_t t = 4000; t < 100000; ++t) mono = mono && lr_at(t, s) > lr_at(t + 1, s);
  return {ok && mono, "lr(1)=" + fmt("%.6e", lr_at(1, s)) + " lr(2000)=" + fmt("%.6e", lr_at(2000, s)) +
                          " lr(4000)=" + fmt("%.6e", lr_at(4000, s)) + (mono ? " monotone" : " NOT monotone")};
}

Outcome gradient_correctness() {
  const auto t0 = Clock::now();
  Rng pick(2024);
  double worst = 0.0;
  std::string where;
  int checked = 0;
  const int configs = 6;
  for (int k = 0; k < configs; ++k) {
    ModelConfig c;
    c.layers_enc = 1 + static_cast<int>(pick.below(2));
    c.layers_dec = 1 + static_cast<int>(pick.below(2));
    c.heads = 1 + static_cast<int>(pick.below(2));
    c.d_model = 4 * c.heads * (1 + static_cast<int>(pick.below(2)));
    c.d_ff = 6 + static_cast<int>(pick.below(8));
    c.vocab_size = 12 + static_cast<int>(pick.below(10));
    c.max_positions = 8;
    c.dropout = 0.0;
    c.shared_embeddings = k % 3 != 1;
    c.tie_output = k % 3 == 0;
    auto p = init_parameters<double>(c, 100 + k);
    gradcheck::jitter(p, 200 + k);
    const auto batch = gradcheck::random_batch(c, 3, 300 + k);
    // Every entry of every tensor.
    int per_tensor = 0;
    for (const auto& t : p) per_tensor = std::max(per_tensor, static_cast<int>(t.value.size()) * 2);
    const auto rep = gradcheck::check(p, batch, 0.1, per_tensor, 400 + k);
    checked += rep.checked;
    if (rep.max_rel_err > worst) {
      worst = rep.max_rel_err;
      where = rep.worst;
    }
  }
  const double secs = seconds_since(t0);
  return {worst < 1e-4 && secs < 300.0, std::to_string(configs) + " configs, " + std::to_string(checked) +
                                            " probes, max rel err " + fmt("%.3e", worst) + " at " + where + ", " +
                                            fmt("%.1f", secs) + " s"};
}

Outcome adam_oracle() {
  const AdamHyper hyper{0.9, 0.98, 1e-8, 0.0};
  double worst = 0.0;
  const double weights[] = {0.5, -1.3, 2e-3};
  const double grads[] = {0.3, -2.0, 1e-4};
  for (double w0 : weights) {
    for (double g : grads) {
      Parameters<double> p(ModelConfig{}), gp(ModelConfig{});
      p.add("w", ParamGroup::decoder, Matrix<double>::Constant(1, 1, w0));
      gp.add("w", ParamGroup::decoder, Matrix<double>::Constant(1, 1, g));
      OptState<double> st;
      adam_step(p, gp, st, hyper, 3e-5, FreezeSpec{});
      oracle::ScalarAdam ref{0.9, 0.98, 1e-8, 3e-5};
      worst = std::max(worst, std::abs(p.value(0)(0, 0) - ref.step(w0, g)));
    }
  }
  return {worst <= 1e-12, "max |diff| " + fmt("%.3e", worst)};
}

Outcome metric_oracles() {
  auto rows = oracle::load_golden(LRMT_GOLDEN_PATH);
  rows.pop_back();  // corpus summary
  std::vector<EvalPair> pairs;
  std::vector<std::string> h, r;
  double worst = 0.0;
  for (const auto& row : rows) {
    const std::vector<EvalPair> one{{row.hyp, row.ref}};
    const std::vector<std::string> oh{row.hyp}, orf{row.ref};
    worst = std::max({worst, std::abs(bleu_corpus(one) - oracle::bleu(oh, orf)),
                      std::abs(chrf_corpus(one, ChrfConfig::chrf2()) - oracle::chrf(oh, orf, 6, 0, 2.0)),
                      std::abs(chrf_corpus(one, ChrfConfig::chrf_pp()) - oracle::chrf(oh, orf, 6, 2, 2.0)),
                      std::abs(ter_corpus(one) - oracle::ter(oh, orf)),
                      std::abs(ribes_corpus(one) - oracle::ribes(oh, orf))});
    pairs.push_back({row.hyp, row.ref});
    h.push_back(row.hyp);
    r.push_back(row.ref);
  }
  const MetricScores s = score_all(pairs);
  worst = std::max({worst, std::abs(s.bleu - oracle::bleu(h, r)), std::abs(s.chrf2 - oracle::chrf(h, r, 6, 0, 2.0)),
                    std::abs(s.chrf_pp - oracle::chrf(h, r, 6, 2, 2.0)), std::abs(s.ter - oracle::ter(h, r)),
                    std::abs(s.ribes - oracle::ribes(h, r))});
  std::vector<EvalPair> identity;
  for (const auto& row : rows) {
    if (!oracle::split_ws(row.ref).empty()) identity.push_back({row.ref, row.ref});
  }
  const MetricScores id = score_all(identity);
  const bool id_ok = std::abs(id.bleu - 100) < 1e-9 && std::abs(id.chrf2 - 100) < 1e-9 &&
                     std::abs(id.chrf_pp - 100) < 1e-9 && std::abs(id.ter) < 1e-9 && std::abs(id.ribes - 1) < 1e-9;
  return {worst <= 1e-9 && id_ok && rows.size() == 50,
          std::to_string(rows.size()) + " cases, max |lib - oracle| " + fmt("%.3e", worst) + ", identity " +
              fmt("%.2f", id.bleu) + "/" + fmt("%.2f", id.chrf2) + "/" + fmt("%.2f", id.chrf_pp) + "/" +
              fmt("%.2f", id.ter) + "/" + fmt("%.4f", id.ribes)};
}

Outcome ras_statistics() {
  const ToyWorld w = make_toy_world(20240917);
  RasStats st, zero;
  bool identity = true, counts = true;
  std::uint64_t index = 0;
  for (Lang l : kIndicLangs) {
    const auto c = toy_corpus(w, l, Split::train, 1000, 20240917);
    const auto d = toy_dictionary(w, l);
    const auto out = ras_augment(c.pairs, d, {0.3, 77, false}, index, &st);
    const auto same = ras_augment(c.pairs, d, {0.0, 77, false}, index, &zero);
    for (std::size_t i = 0; i < c.pairs.size(); ++i) {
      identity = identity && same[i] == c.pairs[i];
      counts = counts && oracle::split_ws(out[i].src_text).size() == oracle::split_ws(c.pairs[i].src_text).size() &&
               out[i].tgt_text == c.pairs[i].tgt_text;
    }
    index += c.size();
  }
  const double rate = static_cast<double>(st.replaced) / static_cast<double>(st.covered);
  const bool ok = st.covered >= 10000 && rate >= 0.28 && rate <= 0.32 && identity && counts && zero.replaced == 0;
  return {ok, std::to_string(st.covered) + " covered tokens, rate " + fmt("%.4f", rate) +
                  (identity ? ", p=0 identity" : ", p=0 NOT identity") + (counts ? ", counts kept" : ", counts changed")};
}

Outcome alignment_effect() {
  const auto t0 = Clock::now();
  const std::uint64_t seed = 20240917;
  const auto s = toy::make_setup(500, 10, 1000, seed);
  std::vector<std::pair<std::string, std::string>> pairs;
  for (Lang l : kIndicLangs) {
    for (const auto& [en, form] : s.world.lexicon.at(l)) pairs.emplace_back(en, form);
  }
  ModelConfig m = toy::small_model(s.bpe);
  double cos[2];
  const double ps[2] = {0.0, 0.3};
  for (int k = 0; k < 2; ++k) {
    std::vector<ParallelCorpus> aug;
    std::uint64_t index = 0;
    for (Lang l : kIndicLangs) {
      ParallelCorpus c = s.train.at(l);
      c.pairs = ras_augment(c.pairs, toy_dictionary(s.world, l), {ps[k], 5, false}, index);
      index += c.size();
      aug.push_back(std::move(c));
    }
    const auto enc = encode_examples(build_mixture(aug, MixtureRegime::multilingual(), 3), s.bpe, 64);
    TrainConfig cfg = toy::quick_train(1000, 1000);
    cfg.lr.warmup_updates = 50;
    cfg.seed = 11;
    const auto r = run_training(enc, enc, s.bpe, cfg, m);
    cos[k] = mean_dictionary_cosine(r.last.params, s.bpe, pairs);
  }
  const double secs = seconds_since(t0);
  return {cos[1] > cos[0] && pairs.size() >= 100 && secs < 900.0,
          std::to_string(pairs.size()) + " pairs, cos p=0.3 " + fmt("%.4f", cos[1]) + " vs p=0 " + fmt("%.4f", cos[0]) +
              ", " + fmt("%.1f", secs) + " s"};
}

Outcome memorization() {
  const auto t0 = Clock::now();
  const auto s = toy::make_setup(200, 1, 400, 20240917, {Lang::kha});
  const auto train = encode_corpus(s.train.at(Lang::kha), s.bpe, 64);
  ModelConfig m = toy::small_model(s.bpe, 2, 64, 256);
  m.dropout = 0.0;
  TrainConfig cfg = toy::quick_train(100, 100);
  cfg.label_smoothing = 0.0;
  cfg.lr.peak_lr = 1e-3;
  cfg.lr.warmup_updates = 50;
  cfg.lr.decay = DecayLaw::constant;
  const EncodedSet none{{train.examples.front()}, {train.references.front()}};
  Checkpoint state = fresh_checkpoint(m, s.bpe, 1);
  double ppl = 0.0, chrf = 0.0;
  std::int64_t updates = 0;
  while (updates < 3000) {
    cfg.seed = static_cast<std::uint64_t>(updates) + 1;
    auto r = run_training(train, none, s.bpe, cfg, m, &state);
    state = std::move(r.last);
    updates = state.update;
    const DevResult d = evaluate_dev(state.params, train, s.bpe, 0.0, true);
    ppl = std::exp(d.loss);
    chrf = d.chrf2;
    if (ppl < 1.5 && chrf > 90.0) break;
  }
  const double secs = seconds_since(t0);
  return {ppl < 1.5 && chrf > 90.0 && updates <= 3000 && secs < 900.0,
          "after " + std::to_string(updates) + " updates: train ppl " + fmt("%.3f", ppl) + ", chrF2 " +
              fmt("%.2f", chrf) + ", " + fmt("%.1f", secs) + " s"};
}

Outcome transfer_init() {
  const auto s = toy::make_setup(300, 40, 600);
  std::vector<ParallelCorpus> all;
  for (Lang l : kIndicLangs) all.push_back(s.train.at(l));
  const auto multi_train = encode_examples(build_mixture(all, MixtureRegime::multilingual(), 1), s.bpe, 64);
  const ModelConfig m = toy::small_model(s.bpe);
  const auto multi = run_training(multi_train, multi_train, s.bpe, toy::quick_train(200, 200), m);
  const Checkpoint bi = init_bilingual_from_multilingual(multi.last, s.bpe, Lang::en, Lang::kha);
  const bool exact = bi.params.hash() == multi.last.params.hash() && bi.update == 0 && !bi.opt.initialized();

  const auto train = encode_corpus(s.train.at(Lang::kha), s.bpe, 64);
  const auto dev = encode_corpus(s.dev.at(Lang::kha), s.bpe, 64);
  const double before = evaluate_dev(bi.params, dev, s.bpe, 0.1, false).loss;
  TrainConfig cfg = toy::quick_train(500, 100);
  cfg.lr.peak_lr = 1e-3;
  const auto r = run_training(train, dev, s.bpe, cfg, m, &bi);
  double best = before;
  for (const auto& row : r.log.rows) best = std::min(best, row.dev_loss);
  return {exact && best < before && r.updates <= 500,
          std::string(exact ? "hash equal" : "hash MISMATCH") + ", dev loss " + fmt("%.4f", before) + " -> " +
              fmt("%.4f", best) + " within " + std::to_string(r.updates) + " updates"};
}

Outcome end_to_end_determinism() {
  const auto t0 = Clock::now();
  const fs::path root = scratch("e2e");
  write_toy_dataset(root / "data");
  const fs::path cfg_path = fs::path(LRMT_SOURCE_DIR) / "configs" / "toy-en-kha.cfg";
  std::string reports[2];
  for (int k = 0; k < 2; ++k) {
    const auto cfg = load_experiment_config(
        cfg_path, {"data.root=" + (root / "data").string(), "experiment.eval_languages=as,kha,lus,mni",
                   "experiment.output_dir=" + (root / ("run" + std::to_string(k))).string()});
    cfg.validate();
    run_experiment(cfg);
    reports[k] = slurp(root / ("run" + std::to_string(k)) / "report.txt");
  }
  const bool identical = !reports[0].empty() && reports[0] == reports[1] &&
                         slurp(root / "run0" / "scores.tsv") == slurp(root / "run1" / "scores.tsv");

  // Layout: per metric a caption row, a header row with both direction blocks,
  // then the five setups with their regime rows.
  std::istringstream in(reports[0]);
  std::vector<std::string> lines;
  for (std::string l; std::getline(in, l);) lines.push_back(l);
  const std::vector<std::string> labels{"Bilingual Setup",
                                        "  Bilingual",
                                        "Multilingual Setup",
                                        "  Multilingual",
                                        "Multilingual Model FT on Bilingual Data",
                                        "  Multilingual Model FT on Bilingual Data",
                                        "Layer Freezing",
                                        "  FT with Frozen Encoder",
                                        "  FT with Frozen Embedding & Encoder",
                                        "Language Grouping",
                                        "  FT with Script Similarity"};
  bool layout = lines.size() >= 15 && lines[0] == "BLEU" && lines[1].find("English → Indic") != std::string::npos &&
                lines[1].find("Indic → English") != std::string::npos && lines[2].rfind("Model", 0) == 0;
  if (layout) {
    std::istringstream header(lines[2]);
    std::vector<std::string> cols;
    for (std::string w; header >> w;) {
      if (w != "|") cols.push_back(w);
    }
    layout = cols == std::vector<std::string>{"Model", "as", "kha", "lus", "mni", "as", "kha", "lus", "mni"};
    for (std::size_t i = 0; layout && i < labels.size(); ++i) {
      std::string label = lines[4 + i].substr(0, lines[4 + i].find(" | "));
      while (!label.empty() && label.back() == ' ') label.pop_back();
      layout = label == labels[i];
      // Regime rows carry all four en->xx cells.
      if (layout && label.rfind("  ", 0) == 0) {
        std::istringstream cells(lines[4 + i].substr(lines[4 + i].find(" | ") + 3));
        int numeric = 0;
        for (std::string c; cells >> c;) numeric += std::isdigit(static_cast<unsigned char>(c[0])) ? 1 : 0;
        layout = numeric == 4;
      }
    }
  }
  const double secs = seconds_since(t0);
  return {identical && layout, std::string(identical ? "reports byte-identical" : "reports DIFFER") +
                                   (layout ? ", layout ok" : ", layout WRONG") + ", 2 runs in " + fmt("%.1f", secs) +
                                   " s"};
}

Outcome early_stopping() {
  const auto s = toy::make_setup(40, 40, 450);
  const auto train = encode_corpus(s.train.at(Lang::kha), s.bpe, 64);
  const auto dev = encode_corpus(s.dev.at(Lang::lus), s.bpe, 64);
  ModelConfig m = toy::small_model(s.bpe);
  m.dropout = 0.0;
  TrainConfig cfg = toy::quick_train(5000, 25);
  cfg.patience = 10;
  cfg.output_dir = scratch("early");
  const auto r = run_training(train, dev, s.bpe, cfg, m);

  const auto& rows = r.log.rows;
  std::size_t best = 0;
  int run = 0, longest_before_end = 0;
  bool ok = r.early_stopped && !rows.empty();
  for (std::size_t i = 0; i < rows.size(); ++i) {
    if (i == 0 || rows[i].dev_loss < rows[best].dev_loss) {
      best = i;
      run = 0;
    } else {
      ++run;
      if (i + 1 < rows.size()) longest_before_end = std::max(longest_before_end, run);
    }
    ok = ok && rows[i].update == 25 * static_cast<std::int64_t>(i + 1);
  }
  ok = ok && run == 10 && longest_before_end < 10 && rows.size() == best + 11;
  ok = ok && r.best.update == rows[best].update;
  int files = 0;
  for (std::int64_t u = 25; u <= r.updates; u += 25) {
    files += fs::exists(cfg.output_dir / ("checkpoint_" + std::to_string(u) + ".ckpt")) ? 1 : 0;
  }
  ok = ok && files == static_cast<int>(r.updates / 25) && r.updates % 25 == 0;
  return {ok, "best at update " + std::to_string(r.best.update) + ", stopped at " + std::to_string(r.updates) +
                  " after " + std::to_string(run) + " non-improving evals, " + std::to_string(files) +
                  " checkpoint files"};
}

}  // namespace

int main() {
  const std::vector<std::pair<std::string, std::function<Outcome()>>> criteria{
      {"C1 freezing fidelity", freezing_fidelity},
      {"C2 scheduler exactness", scheduler_exactness},
      {"C3 gradient correctness", gradient_correctness},
      {"C4 adam oracle", adam_oracle},
      {"C5 metric oracles", metric_oracles},
      {"C6 RAS statistics", ras_statistics},
      {"C7 alignment effect", alignment_effect},
      {"C8 memorization", memorization},
      {"C9 transfer init", transfer_init},
      {"C10 end-to-end determinism", end_to_end_determinism},
      {"C11 early stopping and checkpoint cadence", early_stopping},
  };
  int failures = 0;
  for (const auto& [name, fn] : criteria) {
    Outcome o;
    try {
      o = fn();
    } catch (const std::exception& e) {
      o = {false, std::string("exception: ") + e.what()};
    }
    std::printf("%s %s: %s\n", o.pass ? "PASS" : "FAIL", name.c_str(), o.detail.c_str());
    std::fflush(stdout);
    failures += o.pass ? 0 : 1;
  }
  std::printf("%d/%zu criteria passed\n", static_cast<int>(criteria.size()) - failures, criteria.size());
  return failures == 0 ? 0 : 1;
}
