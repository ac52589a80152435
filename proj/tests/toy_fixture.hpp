#pragma once

// In-memory toy corpora plus a joint tokenizer, shared by trainer tests.

#include <vector>

#include "lrmt/bpe.hpp"
#include "lrmt/corpus.hpp"
#include "lrmt/toydata.hpp"
#include "lrmt/trainer.hpp"

namespace toy {

struct Setup {
  lrmt::ToyWorld world;
  std::map<lrmt::Lang, lrmt::ParallelCorpus> train, dev;
  lrmt::BpeModel bpe;
};

inline Setup make_setup(std::size_t train_pairs, std::size_t dev_pairs, int vocab, std::uint64_t seed = 20240917,
                        std::vector<lrmt::Lang> langs = {lrmt::kIndicLangs.begin(), lrmt::kIndicLangs.end()}) {
  Setup s;
  s.world = lrmt::make_toy_world(seed);
  std::vector<std::string> lines;
  for (lrmt::Lang l : langs) {
    s.train[l] = lrmt::toy_corpus(s.world, l, lrmt::Split::train, train_pairs, seed);
    s.dev[l] = lrmt::toy_corpus(s.world, l, lrmt::Split::valid, dev_pairs, seed);
    for (const auto& p : s.train[l].pairs) {
      lines.push_back(p.src_text);
      lines.push_back(p.tgt_text);
    }
  }
  s.bpe = lrmt::train_bpe(lines, vocab, lrmt::all_lang_tags(), true);
  return s;
}

inline lrmt::ModelConfig small_model(const lrmt::BpeModel& bpe, int layers = 1, int d = 32, int ff = 64) {
  lrmt::ModelConfig c;
  c.layers_enc = layers;
  c.layers_dec = layers;
  c.d_model = d;
  c.d_ff = ff;
  c.heads = 2;
  c.dropout = 0.1;
  c.vocab_size = bpe.size();
  c.max_positions = 64;
  return c;
}

inline lrmt::TrainConfig quick_train(std::int64_t updates, std::int64_t interval) {
  lrmt::TrainConfig t;
  t.max_tokens_per_batch = 512;
  t.accumulation = 1;
  t.max_updates = updates;
  t.checkpoint_interval = interval;
  t.patience = 1000;
  t.lr.warmup_init_lr = 1e-7;
  t.lr.peak_lr = 3e-3;
  t.lr.warmup_updates = 30;
  t.dev_chrf = false;
  return t;
}

}  // namespace toy
