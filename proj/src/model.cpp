#include "lrmt/model.hpp"

#include <algorithm>
#include <cmath>
#include <tuple>

#include "lrmt/error.hpp"

namespace lrmt {

std::string_view group_name(ParamGroup g) {
  switch (g) {
    case ParamGroup::embedding: return "embedding";
    case ParamGroup::encoder: return "encoder";
    case ParamGroup::decoder: return "decoder";
    case ParamGroup::output: return "output";
  }
  return "?";
}

ParamGroup parse_group(std::string_view name) {
  for (auto g : {ParamGroup::embedding, ParamGroup::encoder, ParamGroup::decoder, ParamGroup::output}) {
    if (group_name(g) == name) return g;
  }
  throw Error(ErrorCode::InvalidConfig, "unknown parameter group '" + std::string(name) + "'");
}

void ModelConfig::validate() const {
  auto fail = [](const std::string& msg) { throw Error(ErrorCode::InvalidConfig, msg); };
  if (layers_enc < 1 || layers_dec < 1) fail("layer counts must be positive");
  if (d_model < 1 || d_ff < 1 || heads < 1) fail("d_model, d_ff and heads must be positive");
  if (d_model % heads != 0) {
    fail("d_model " + std::to_string(d_model) + " is not divisible by heads " + std::to_string(heads));
  }
  if (!(dropout >= 0.0 && dropout < 1.0)) fail("dropout must lie in [0, 1)");
  if (vocab_size < 1) fail("vocab_size must be positive");
  if (max_positions < 2) fail("max_positions must be at least 2");
}

Example make_example(std::vector<int> src, const std::vector<int>& tgt, int bos, int eos) {
  Example ex;
  ex.src = std::move(src);
  ex.tgt_in.reserve(tgt.size() + 1);
  ex.tgt_in.push_back(bos);
  ex.tgt_in.insert(ex.tgt_in.end(), tgt.begin(), tgt.end());
  ex.tgt_out = tgt;
  ex.tgt_out.push_back(eos);
  return ex;
}

std::size_t Batch::source_tokens() const {
  std::size_t n = 0;
  for (const auto& ex : examples) n += ex.src.size();
  return n;
}

std::size_t Batch::target_tokens() const {
  std::size_t n = 0;
  for (const auto& ex : examples) n += ex.tgt_out.size();
  return n;
}

std::size_t Batch::padded_tokens() const {
  std::size_t longest = 0;
  for (const auto& ex : examples) longest = std::max({longest, ex.src.size(), ex.tgt_out.size()});
  return longest * examples.size();
}

namespace {

double length_normalized(double logprob, std::size_t len, double alpha) {
  if (alpha == 0.0) return logprob;
  return logprob / std::pow(static_cast<double>(std::max<std::size_t>(len, 1)), alpha);
}

}  // namespace

std::vector<Hypothesis> beam_search(const StepFunction& step, int beam, int max_len, double alpha, int eos) {
  if (beam < 1) throw Error(ErrorCode::InvalidConfig, "beam must be at least 1");
  if (max_len < 1) throw Error(ErrorCode::InvalidConfig, "max_len must be at least 1");

  struct Cand {
    double logprob;
    std::vector<int> ids;
  };
  std::vector<Cand> live{{0.0, {}}};
  std::vector<Hypothesis> finished;
  const auto ub = static_cast<std::size_t>(beam);

  for (int t = 0; t < max_len && !live.empty() && finished.size() < ub; ++t) {
    std::vector<std::vector<int>> prefixes;
    prefixes.reserve(live.size());
    for (const auto& c : live) prefixes.push_back(c.ids);
    const auto logp = step(prefixes);

    std::vector<std::tuple<double, std::size_t, int>> cands;
    for (std::size_t i = 0; i < live.size(); ++i) {
      for (std::size_t v = 0; v < logp[i].size(); ++v) {
        const double lp = logp[i][v];
        if (!std::isfinite(lp)) continue;
        cands.emplace_back(live[i].logprob + lp, i, static_cast<int>(v));
      }
    }
    // Best log-probability first; ties resolved by the resulting id sequence.
    auto better = [&](const auto& a, const auto& b) {
      if (std::get<0>(a) != std::get<0>(b)) return std::get<0>(a) > std::get<0>(b);
      const auto& pa = live[std::get<1>(a)].ids;
      const auto& pb = live[std::get<1>(b)].ids;
      if (pa != pb) return pa < pb;
      return std::get<2>(a) < std::get<2>(b);
    };
    const std::size_t keep = std::min(ub, cands.size());
    std::partial_sort(cands.begin(), cands.begin() + static_cast<std::ptrdiff_t>(keep), cands.end(), better);

    std::vector<Cand> next;
    for (std::size_t k = 0; k < keep; ++k) {
      const auto& [lp, i, v] = cands[k];
      std::vector<int> ids = live[i].ids;
      ids.push_back(v);
      if (v == eos) {
        finished.push_back({ids, lp, length_normalized(lp, ids.size(), alpha)});
      } else {
        next.push_back({lp, std::move(ids)});
      }
    }
    live = std::move(next);
  }
  if (finished.size() < ub) {
    for (auto& c : live) {
      const double s = length_normalized(c.logprob, c.ids.size(), alpha);
      finished.push_back({std::move(c.ids), c.logprob, s});
    }
  }
  std::stable_sort(finished.begin(), finished.end(), [](const Hypothesis& a, const Hypothesis& b) {
    if (a.score != b.score) return a.score > b.score;
    return a.ids < b.ids;
  });
  return finished;
}

}  // namespace lrmt
