#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "lrmt/bpe.hpp"
#include "lrmt/checkpoint.hpp"
#include "lrmt/corpus.hpp"
#include "lrmt/model.hpp"
#include "lrmt/optim.hpp"

namespace lrmt {

enum class Direction { en_xx, xx_en };

std::string_view direction_name(Direction d);
Direction parse_direction(std::string_view name);

enum class StopCriterion { dev_loss, dev_chrf2 };

std::string_view criterion_name(StopCriterion c);
StopCriterion parse_criterion(std::string_view name);

struct TrainConfig {
  RegimeKind regime = RegimeKind::bilingual;
  Direction direction = Direction::en_xx;
  int max_tokens_per_batch = 512;
  int accumulation = 2;
  std::int64_t max_updates = 1000000;
  std::int64_t checkpoint_interval = 2500;
  int patience = 10;
  FreezeSpec freeze;
  LrSchedule lr;
  AdamHyper adam;
  double label_smoothing = 0.1;
  double clip_norm = 0.0;  // 0 disables
  StopCriterion criterion = StopCriterion::dev_loss;
  bool dev_chrf = true;
  int sort_window = 512;
  std::uint64_t seed = 1;
  // Where checkpoint_<update>.ckpt files go; empty keeps everything in memory.
  std::filesystem::path output_dir;
  bool save_optimizer_state = true;

  void validate() const;
};

/// Token-id view of one corpus split, ready for batching and decoding.
struct EncodedSet {
  std::vector<Example> examples;
  std::vector<std::string> references;  // raw target text, for chrF
};

/// Source: [<2tgt>] + bpe(src) + [eos]; target: bpe(tgt). Sequences are
/// truncated to fit max_positions.
Example encode_pair(const SentencePair& pair, const BpeModel& bpe, int max_positions);
EncodedSet encode_examples(const std::vector<TaggedExample>& examples, const BpeModel& bpe, int max_positions);
EncodedSet encode_corpus(const ParallelCorpus& corpus, const BpeModel& bpe, int max_positions);

struct BatchPlan {
  std::vector<Batch> batches;
  std::size_t skipped = 0;  // examples that alone exceed the budget
};

/// Shuffles under `rng`, sorts by length inside windows of `window`
/// examples, packs greedily so rows x max(longest source, longest target)
/// stays within `max_tokens`, then shuffles the batch order.
BatchPlan make_batches(const std::vector<Example>& examples, int max_tokens, int window, Rng& rng);
/// Order-preserving packing (evaluation).
BatchPlan make_eval_batches(const std::vector<Example>& examples, int max_tokens);

struct TrainLogRow {
  std::int64_t update = 0;
  double train_loss = 0.0;
  double dev_loss = 0.0;
  double dev_chrf2 = -1.0;
  double lr = 0.0;
  double wall_clock_s = 0.0;
};

struct TrainLog {
  std::vector<TrainLogRow> rows;

  /// Tab-separated with a header row.
  std::string to_tsv() const;
  void save(const std::filesystem::path& path) const;
};

struct DevResult {
  double loss = 0.0;
  double chrf2 = -1.0;
};

/// Label-smoothed loss with dropout off and, when requested, chrF2 of greedy
/// decodes against the raw references.
DevResult evaluate_dev(const Parameters<float>& params, const EncodedSet& dev, const BpeModel& bpe,
                       double label_smoothing, bool with_chrf, int max_tokens = 2048);
DevResult evaluate_dev(const Parameters<float>& params, const ParallelCorpus& dev, const BpeModel& bpe,
                       double label_smoothing = 0.1, bool with_chrf = true);

/// Greedy (beam 1) or beam decoding of many sources to text.
std::vector<std::string> translate(const Parameters<float>& params, const BpeModel& bpe,
                                   const std::vector<std::vector<int>>& sources, int beam = 1,
                                   double length_penalty = 1.0, int chunk = 32);

struct TrainResult {
  Checkpoint best;
  Checkpoint last;
  TrainLog log;
  std::int64_t updates = 0;
  bool early_stopped = false;
  std::size_t skipped_examples = 0;
  std::vector<std::filesystem::path> checkpoint_files;
};

/// Trains from `init` (or a fresh model from `model_cfg`) until max_updates
/// or until the dev criterion fails to improve `patience` evaluations in a
/// row. Evaluations and checkpoints happen every checkpoint_interval updates.
TrainResult run_training(const EncodedSet& train, const EncodedSet& dev, const BpeModel& bpe, const TrainConfig& cfg,
                         const ModelConfig& model_cfg, const Checkpoint* init = nullptr);

/// Exact copy of the parent's parameters with optimizer state and update
/// counter reset. Both languages' tags must exist in `bpe`.
Checkpoint init_bilingual_from_multilingual(const Checkpoint& multi, const BpeModel& bpe, Lang src, Lang tgt);

/// Mean cosine similarity between the word vectors of each (a, b) pair, a
/// word vector being the mean of its subword rows in the source embedding.
/// Pairs whose words encode to nothing are skipped.
double mean_dictionary_cosine(const Parameters<float>& params, const BpeModel& bpe,
                              const std::vector<std::pair<std::string, std::string>>& pairs);

}  // namespace lrmt
