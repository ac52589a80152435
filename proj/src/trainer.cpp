#include "lrmt/trainer.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <numeric>
#include <sstream>

#include "lrmt/error.hpp"
#include "lrmt/metrics.hpp"

namespace lrmt {

std::string_view direction_name(Direction d) { return d == Direction::en_xx ? "en-xx" : "xx-en"; }

Direction parse_direction(std::string_view name) {
  if (name == "en-xx" || name == "en2xx") return Direction::en_xx;
  if (name == "xx-en" || name == "xx2en") return Direction::xx_en;
  throw Error(ErrorCode::InvalidConfig, "unknown direction '" + std::string(name) + "'");
}

std::string_view criterion_name(StopCriterion c) { return c == StopCriterion::dev_loss ? "dev_loss" : "dev_chrf2"; }

StopCriterion parse_criterion(std::string_view name) {
  if (name == "dev_loss") return StopCriterion::dev_loss;
  if (name == "dev_chrf2") return StopCriterion::dev_chrf2;
  throw Error(ErrorCode::InvalidConfig, "unknown early-stopping criterion '" + std::string(name) + "'");
}

void TrainConfig::validate() const {
  auto fail = [](const std::string& m) { throw Error(ErrorCode::InvalidConfig, m); };
  if (max_tokens_per_batch < 1) fail("max_tokens_per_batch must be positive");
  if (accumulation < 1) fail("accumulation must be positive");
  if (max_updates < 1) fail("max_updates must be positive");
  if (checkpoint_interval < 1) fail("checkpoint_interval must be positive");
  if (patience < 1) fail("patience must be at least 1");
  if (sort_window < 1) fail("sort_window must be positive");
  if (!(label_smoothing >= 0.0 && label_smoothing < 1.0)) fail("label_smoothing must lie in [0, 1)");
  lr.validate();
  adam.validate();
}

// ---- Encoding ------------------------------------------------------------------

Example encode_pair(const SentencePair& pair, const BpeModel& bpe, int max_positions) {
  const int tag = bpe.require_special(lang_tag(pair.tgt_lang));
  std::vector<int> body = encode(bpe, pair.src_text);
  const auto src_room = static_cast<std::size_t>(std::max(0, max_positions - 2));
  if (body.size() > src_room) body.resize(src_room);
  std::vector<int> src;
  src.reserve(body.size() + 2);
  src.push_back(tag);
  src.insert(src.end(), body.begin(), body.end());
  src.push_back(BpeModel::kEos);
  std::vector<int> tgt = encode(bpe, pair.tgt_text);
  const auto tgt_room = static_cast<std::size_t>(std::max(0, max_positions - 1));
  if (tgt.size() > tgt_room) tgt.resize(tgt_room);
  return make_example(std::move(src), tgt, BpeModel::kBos, BpeModel::kEos);
}

EncodedSet encode_examples(const std::vector<TaggedExample>& examples, const BpeModel& bpe, int max_positions) {
  EncodedSet out;
  out.examples.reserve(examples.size());
  for (const auto& ex : examples) {
    out.examples.push_back(encode_pair(ex.pair, bpe, max_positions));
    out.references.push_back(ex.pair.tgt_text);
  }
  return out;
}

EncodedSet encode_corpus(const ParallelCorpus& corpus, const BpeModel& bpe, int max_positions) {
  EncodedSet out;
  for (const auto& p : corpus.pairs) {
    out.examples.push_back(encode_pair(p, bpe, max_positions));
    out.references.push_back(p.tgt_text);
  }
  return out;
}

// ---- Batching ------------------------------------------------------------------

namespace {

std::size_t example_len(const Example& ex) { return std::max(ex.src.size(), ex.tgt_out.size()); }

void pack(const std::vector<const Example*>& ordered, int max_tokens, BatchPlan& plan) {
  const auto budget = static_cast<std::size_t>(max_tokens);
  Batch cur;
  std::size_t longest = 0;
  for (const Example* ex : ordered) {
    const std::size_t len = example_len(*ex);
    if (len > budget) {
      ++plan.skipped;
      continue;
    }
    const std::size_t grown = std::max(longest, len);
    if (!cur.empty() && grown * (cur.size() + 1) > budget) {
      plan.batches.push_back(std::move(cur));
      cur = Batch();
      longest = 0;
    }
    cur.examples.push_back(*ex);
    longest = std::max(longest, len);
  }
  if (!cur.empty()) plan.batches.push_back(std::move(cur));
}

}  // namespace

BatchPlan make_batches(const std::vector<Example>& examples, int max_tokens, int window, Rng& rng) {
  std::vector<std::size_t> order(examples.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  rng.shuffle(order);
  const auto w = static_cast<std::size_t>(window);
  for (std::size_t start = 0; start < order.size(); start += w) {
    const auto first = order.begin() + static_cast<std::ptrdiff_t>(start);
    const auto last = order.begin() + static_cast<std::ptrdiff_t>(std::min(order.size(), start + w));
    std::stable_sort(first, last, [&](std::size_t a, std::size_t b) {
      return example_len(examples[a]) < example_len(examples[b]);
    });
  }
  std::vector<const Example*> ordered;
  ordered.reserve(order.size());
  for (auto i : order) ordered.push_back(&examples[i]);
  BatchPlan plan;
  pack(ordered, max_tokens, plan);
  rng.shuffle(plan.batches);
  return plan;
}

BatchPlan make_eval_batches(const std::vector<Example>& examples, int max_tokens) {
  std::vector<const Example*> ordered;
  for (const auto& ex : examples) ordered.push_back(&ex);
  BatchPlan plan;
  pack(ordered, max_tokens, plan);
  return plan;
}

// ---- Log -----------------------------------------------------------------------

std::string TrainLog::to_tsv() const {
  std::ostringstream out;
  out << "update\ttrain_loss\tdev_loss\tdev_chrf2\tlr\twall_clock_s\n";
  char buf[256];
  for (const auto& r : rows) {
    std::snprintf(buf, sizeof(buf), "%lld\t%.6f\t%.6f\t%.4f\t%.6e\t%.2f\n", static_cast<long long>(r.update),
                  r.train_loss, r.dev_loss, r.dev_chrf2, r.lr, r.wall_clock_s);
    out << buf;
  }
  return out.str();
}

void TrainLog::save(const std::filesystem::path& path) const {
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw Error(ErrorCode::IoError, "cannot write " + path.string());
  out << to_tsv();
}

// ---- Evaluation ----------------------------------------------------------------

std::vector<std::string> translate(const Parameters<float>& params, const BpeModel& bpe,
                                   const std::vector<std::vector<int>>& sources, int beam, double length_penalty,
                                   int chunk) {
  std::vector<std::string> out;
  out.reserve(sources.size());
  const int max_pos = params.config().max_positions;
  DecodeOptions opt;
  opt.beam = beam;
  opt.length_penalty = length_penalty;
  opt.num_special = bpe.num_special();
  for (std::size_t start = 0; start < sources.size(); start += static_cast<std::size_t>(chunk)) {
    const std::size_t end = std::min(sources.size(), start + static_cast<std::size_t>(chunk));
    std::vector<std::vector<int>> part(sources.begin() + static_cast<std::ptrdiff_t>(start),
                                       sources.begin() + static_cast<std::ptrdiff_t>(end));
    std::size_t longest = 0;
    for (const auto& s : part) longest = std::max(longest, s.size());
    opt.max_len = std::min(static_cast<int>(2 * longest + 10), max_pos - 1);
    if (beam <= 1) {
      for (const auto& ids : greedy_decode(params, part, opt)) out.push_back(decode_tokens(bpe, ids));
    } else {
      for (const auto& src : part) {
        const auto hyps = beam_decode(params, src, opt);
        out.push_back(hyps.empty() ? std::string() : decode_tokens(bpe, hyps.front().ids));
      }
    }
  }
  return out;
}

DevResult evaluate_dev(const Parameters<float>& params, const EncodedSet& dev, const BpeModel& bpe,
                       double label_smoothing, bool with_chrf, int max_tokens) {
  if (dev.examples.empty()) throw Error(ErrorCode::EmptyCorpus, "empty dev set");
  const BatchPlan plan = make_eval_batches(dev.examples, max_tokens);
  double loss_sum = 0.0;
  std::size_t tokens = 0;
  Rng unused(0);
  for (const auto& b : plan.batches) {
    const auto r = loss_and_grads(params, b, label_smoothing, DropoutMode::off, unused, false);
    loss_sum += r.loss * static_cast<double>(r.tokens);
    tokens += r.tokens;
  }
  DevResult res;
  res.loss = tokens > 0 ? loss_sum / static_cast<double>(tokens) : 0.0;
  if (with_chrf) {
    std::vector<std::vector<int>> sources;
    for (const auto& ex : dev.examples) sources.push_back(ex.src);
    const auto hyps = translate(params, bpe, sources);
    res.chrf2 = chrf_corpus(zip_eval_pairs(hyps, dev.references), ChrfConfig::chrf2());
  }
  return res;
}

DevResult evaluate_dev(const Parameters<float>& params, const ParallelCorpus& dev, const BpeModel& bpe,
                       double label_smoothing, bool with_chrf) {
  return evaluate_dev(params, encode_corpus(dev, bpe, params.config().max_positions), bpe, label_smoothing,
                      with_chrf);
}

// ---- Training ------------------------------------------------------------------

namespace {

std::string checkpoint_name(std::int64_t update) {
  char buf[64];
  std::snprintf(buf, sizeof(buf), "checkpoint_%lld.ckpt", static_cast<long long>(update));
  return buf;
}

}  // namespace

TrainResult run_training(const EncodedSet& train, const EncodedSet& dev, const BpeModel& bpe, const TrainConfig& cfg,
                         const ModelConfig& model_cfg, const Checkpoint* init) {
  cfg.validate();
  model_cfg.validate();
  if (train.examples.empty()) throw Error(ErrorCode::EmptyMixture, "no training examples");
  if (model_cfg.vocab_size != bpe.size()) {
    throw Error(ErrorCode::VocabMismatch, "model vocab_size " + std::to_string(model_cfg.vocab_size) +
                                              " differs from tokenizer size " + std::to_string(bpe.size()));
  }
  const std::string bpe_hash = bpe.hash();

  Parameters<float> params;
  OptState<float> opt;
  std::int64_t update = 0;
  std::map<std::string, std::string> provenance;
  if (init != nullptr) {
    if (init->bpe_hash != bpe_hash) {
      throw Error(ErrorCode::VocabMismatch, "checkpoint tokenizer " + init->bpe_hash + " differs from " + bpe_hash);
    }
    if (!(init->model_config == model_cfg)) {
      throw Error(ErrorCode::ConfigMismatch, "checkpoint model configuration differs from the requested one");
    }
    params = init->params;
    opt = init->opt;
    update = init->update;
    provenance = init->provenance;
    provenance["init"] = init->id();
  } else {
    params = init_parameters<float>(model_cfg, derive_seed(cfg.seed, "init"));
    provenance["init"] = "fresh";
  }
  provenance["direction"] = std::string(direction_name(cfg.direction));
  provenance["freeze"] = std::string(freeze_name(cfg.freeze.mode));
  provenance["seed"] = std::to_string(cfg.seed);
  if (!opt.initialized()) opt = OptState<float>::fresh(params);

  const bool want_chrf = cfg.dev_chrf || cfg.criterion == StopCriterion::dev_chrf2;
  Rng batch_rng(derive_seed(cfg.seed, "batches"));
  Rng dropout_rng(derive_seed(cfg.seed, "dropout"));
  GradAccumulator<float> acc(cfg.accumulation);
  const auto t0 = std::chrono::steady_clock::now();

  TrainResult result;
  std::vector<EvalRecord> history = init != nullptr ? init->history : std::vector<EvalRecord>{};
  std::optional<double> best_value;
  int bad_evals = 0;
  double interval_loss = 0.0;
  double interval_tokens = 0.0;
  const std::int64_t start_update = update;
  const std::int64_t end_update = start_update + cfg.max_updates;

  auto make_ckpt = [&]() {
    Checkpoint c;
    c.model_config = model_cfg;
    c.bpe_hash = bpe_hash;
    c.params = params;
    if (cfg.save_optimizer_state) c.opt = opt;
    c.update = update;
    c.history = history;
    c.provenance = provenance;
    return c;
  };

  // Returns true when training should stop early.
  auto evaluate = [&]() {
    const DevResult d = evaluate_dev(params, dev, bpe, cfg.label_smoothing, want_chrf);
    const double lr = lr_at(std::max<std::int64_t>(update, 1), cfg.lr);
    const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    result.log.rows.push_back({update, interval_tokens > 0 ? interval_loss / interval_tokens : 0.0, d.loss,
                               d.chrf2, lr, secs});
    interval_loss = interval_tokens = 0.0;
    history.push_back({update, d.loss, d.chrf2});

    const double value = cfg.criterion == StopCriterion::dev_loss ? d.loss : -d.chrf2;
    const bool improved = !best_value || value < *best_value;
    Checkpoint c = make_ckpt();
    if (!cfg.output_dir.empty()) {
      const auto path = cfg.output_dir / checkpoint_name(update);
      save_checkpoint(c, path);
      result.checkpoint_files.push_back(path);
    }
    if (improved) {
      best_value = value;
      bad_evals = 0;
      result.best = std::move(c);
    } else {
      ++bad_evals;
    }
    return bad_evals >= cfg.patience;
  };

  bool stop = false;
  std::int64_t last_eval = -1;
  while (!stop && update < end_update) {
    BatchPlan plan = make_batches(train.examples, cfg.max_tokens_per_batch, cfg.sort_window, batch_rng);
    result.skipped_examples = plan.skipped;
    if (plan.batches.empty()) throw Error(ErrorCode::EmptyMixture, "every training example exceeds the token budget");
    for (const auto& batch : plan.batches) {
      auto r = loss_and_grads(params, batch, cfg.label_smoothing, DropoutMode::on, dropout_rng);
      if (!std::isfinite(r.loss)) throw Error(ErrorCode::DivergedLoss, "training loss is not finite");
      interval_loss += r.loss * static_cast<double>(r.tokens);
      interval_tokens += static_cast<double>(r.tokens);
      if (!acc.add(r.grads, static_cast<double>(r.tokens))) continue;

      Parameters<float> g = acc.flush();
      clip_grad_norm(g, cfg.clip_norm, cfg.freeze);
      adam_step(params, g, opt, cfg.adam, lr_at(update + 1, cfg.lr), cfg.freeze);
      ++update;
      if (!params.all_finite()) throw Error(ErrorCode::DivergedLoss, "parameters became non-finite");
      if ((update - start_update) % cfg.checkpoint_interval == 0) {
        last_eval = update;
        if (evaluate()) {
          stop = true;
          result.early_stopped = true;
          break;
        }
      }
      if (update >= end_update) break;
    }
  }
  if (last_eval != update) evaluate();

  result.updates = update - start_update;
  result.last = make_ckpt();
  return result;
}

Checkpoint init_bilingual_from_multilingual(const Checkpoint& multi, const BpeModel& bpe, Lang src, Lang tgt) {
  if (multi.bpe_hash != bpe.hash()) {
    throw Error(ErrorCode::VocabMismatch, "tokenizer does not belong to the multilingual checkpoint");
  }
  bpe.require_special(lang_tag(src));
  bpe.require_special(lang_tag(tgt));
  Checkpoint out;
  out.model_config = multi.model_config;
  out.bpe_hash = multi.bpe_hash;
  out.params = multi.params;
  out.update = 0;
  out.provenance["regime"] = "multi_to_bi";
  out.provenance["parent"] = multi.id();
  out.provenance["pair"] = std::string(lang_code(src)) + "-" + std::string(lang_code(tgt));
  return out;
}

double mean_dictionary_cosine(const Parameters<float>& params, const BpeModel& bpe,
                              const std::vector<std::pair<std::string, std::string>>& pairs) {
  const Matrix<float>& table = params.value(layout_of(params).src_embed);
  auto word_vector = [&](const std::string& w) -> std::optional<Eigen::VectorXd> {
    const std::vector<int> ids = encode(bpe, w);
    if (ids.empty()) return std::nullopt;
    Eigen::VectorXd v = Eigen::VectorXd::Zero(table.rows());
    for (int id : ids) v += table.col(id).cast<double>();
    return v / static_cast<double>(ids.size());
  };
  double sum = 0.0;
  std::size_t n = 0;
  for (const auto& [a, b] : pairs) {
    const auto va = word_vector(a), vb = word_vector(b);
    if (!va || !vb) continue;
    const double denom = va->norm() * vb->norm();
    if (denom == 0.0) continue;
    sum += va->dot(*vb) / denom;
    ++n;
  }
  if (n == 0) throw Error(ErrorCode::EmptyDictionary, "no dictionary pair could be embedded");
  return sum / static_cast<double>(n);
}

}  // namespace lrmt
