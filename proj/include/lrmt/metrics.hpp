#pragma once

#include <array>
#include <cstdint>
#include <string>
#include <string_view>
#include <vector>

namespace lrmt {

/// One hypothesis against a single reference.
struct EvalPair {
  std::string hypothesis;
  std::string reference;
};

std::vector<EvalPair> zip_eval_pairs(const std::vector<std::string>& hyps, const std::vector<std::string>& refs);

// ---- BLEU ------------------------------------------------------------------

/// mteval-v13a tokenization as done by sacreBLEU's default tokenizer.
std::string tokenize_13a(std::string_view line);

struct BleuStats {
  std::array<std::int64_t, 4> correct{};
  std::array<std::int64_t, 4> total{};
  std::int64_t sys_len = 0;
  std::int64_t ref_len = 0;

  BleuStats& operator+=(const BleuStats& o);
};

BleuStats bleu_sentence_stats(std::string_view hypothesis, std::string_view reference);
/// Corpus BLEU from summed statistics with exponential smoothing: the k-th
/// order with no match gets precision 1 / (2^k * total).
double bleu_from_stats(const BleuStats& stats);
double bleu_corpus(const std::vector<EvalPair>& pairs);

// ---- chrF --------------------------------------------------------------------

struct ChrfConfig {
  int char_order = 6;
  int word_order = 0;
  double beta = 2.0;

  static ChrfConfig chrf2() { return {6, 0, 2.0}; }
  static ChrfConfig chrf_pp() { return {6, 2, 2.0}; }
  void validate() const;
};

/// Flattened [hyp, ref, match] counts per order: characters first, then words.
std::vector<std::int64_t> chrf_sentence_stats(std::string_view hypothesis, std::string_view reference,
                                              const ChrfConfig& cfg);
double chrf_from_stats(const std::vector<std::int64_t>& stats, const ChrfConfig& cfg);
double chrf_corpus(const std::vector<EvalPair>& pairs, const ChrfConfig& cfg = {});

// ---- TER ---------------------------------------------------------------------

struct TerStats {
  std::int64_t edits = 0;
  std::int64_t ref_len = 0;
};

/// Tercom-style edit count on lowercased whitespace tokens: greedy phrase
/// shifts (length <= 10, distance <= 50, at most 1000 candidates examined)
/// followed by a beam-restricted Levenshtein distance.
TerStats ter_sentence_stats(std::string_view hypothesis, std::string_view reference);
/// Same, on already tokenized input.
std::int64_t ter_edits(const std::vector<std::string>& hyp, const std::vector<std::string>& ref);
double ter_corpus(const std::vector<EvalPair>& pairs);

// ---- RIBES -------------------------------------------------------------------

/// Reference position of each alignable hypothesis word, in hypothesis order.
std::vector<int> ribes_word_alignment(const std::vector<std::string>& ref, const std::vector<std::string>& hyp);
/// Fraction of position pairs in ascending order; see ribes_sentence for the
/// single-element convention.
double normalized_kendall_tau(const std::vector<int>& worder);
/// NKT * P^0.25 * BP^0.10 on whitespace tokens.
double ribes_sentence(std::string_view hypothesis, std::string_view reference, double alpha = 0.25,
                      double beta = 0.10);
double ribes_corpus(const std::vector<EvalPair>& pairs);

// ---- Panel -------------------------------------------------------------------

struct MetricScores {
  double bleu = 0.0;
  double chrf2 = 0.0;
  double chrf_pp = 0.0;
  double ter = 0.0;
  double ribes = 0.0;
};

MetricScores score_all(const std::vector<EvalPair>& pairs);

}  // namespace lrmt
