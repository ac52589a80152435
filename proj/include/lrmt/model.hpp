#pragma once

#include <algorithm>
#include <cmath>
#include <functional>
#include <limits>
#include <string>
#include <vector>

#include "lrmt/layers.hpp"
#include "lrmt/model_config.hpp"
#include "lrmt/rng.hpp"
#include "lrmt/tensor.hpp"

namespace lrmt {

// ---- Batches -------------------------------------------------------------

/// One training example as token ids. tgt_in is [bos] + y, tgt_out is y + [eos].
struct Example {
  std::vector<int> src;
  std::vector<int> tgt_in;
  std::vector<int> tgt_out;
};

Example make_example(std::vector<int> src, const std::vector<int>& tgt, int bos, int eos);

/// Sequences are kept ragged and packed side by side, so no pad id ever
/// reaches the model; the padded size is still what the token budget counts.
struct Batch {
  std::vector<Example> examples;

  std::size_t size() const { return examples.size(); }
  bool empty() const { return examples.empty(); }
  std::size_t source_tokens() const;
  std::size_t target_tokens() const;
  /// rows x max(longest source, longest target).
  std::size_t padded_tokens() const;
};

enum class DropoutMode { off, on };

// ---- Parameter layout ------------------------------------------------------

struct AttnIdx {
  int wq, bq, wk, bk, wv, bv, wo, bo;
};
struct LnIdx {
  int g, b;
};
struct FfnIdx {
  int w1, b1, w2, b2;
};
struct EncLayerIdx {
  LnIdx ln1;
  AttnIdx attn;
  LnIdx ln2;
  FfnIdx ffn;
};
struct DecLayerIdx {
  LnIdx ln1;
  AttnIdx self_attn;
  LnIdx ln2;
  AttnIdx cross_attn;
  LnIdx ln3;
  FfnIdx ffn;
};

struct Layout {
  int src_embed = -1;
  int tgt_embed = -1;
  int out_proj = -1;  // [d x V]; equals tgt_embed when tied
  int out_bias = -1;
  std::vector<EncLayerIdx> enc;
  LnIdx enc_ln{};
  std::vector<DecLayerIdx> dec;
  LnIdx dec_ln{};
};

namespace detail {

template <typename T>
AttnIdx find_attn(const Parameters<T>& p, const std::string& pre) {
  return {p.index_of(pre + ".wq"), p.index_of(pre + ".bq"), p.index_of(pre + ".wk"), p.index_of(pre + ".bk"),
          p.index_of(pre + ".wv"), p.index_of(pre + ".bv"), p.index_of(pre + ".wo"), p.index_of(pre + ".bo")};
}
template <typename T>
LnIdx find_ln(const Parameters<T>& p, const std::string& pre) {
  return {p.index_of(pre + ".g"), p.index_of(pre + ".b")};
}
template <typename T>
FfnIdx find_ffn(const Parameters<T>& p, const std::string& pre) {
  return {p.index_of(pre + ".w1"), p.index_of(pre + ".b1"), p.index_of(pre + ".w2"), p.index_of(pre + ".b2")};
}

}  // namespace detail

template <typename T>
Layout layout_of(const Parameters<T>& p) {
  const ModelConfig& cfg = p.config();
  Layout l;
  if (cfg.shared_embeddings) {
    l.src_embed = l.tgt_embed = p.index_of("embed.tokens");
  } else {
    l.src_embed = p.index_of("embed.src_tokens");
    l.tgt_embed = p.index_of("embed.tgt_tokens");
  }
  l.out_proj = cfg.tie_output ? l.tgt_embed : p.index_of("out.proj");
  l.out_bias = p.index_of("out.bias");
  for (int i = 0; i < cfg.layers_enc; ++i) {
    const std::string pre = "enc." + std::to_string(i);
    l.enc.push_back({detail::find_ln(p, pre + ".ln1"), detail::find_attn(p, pre + ".attn"),
                     detail::find_ln(p, pre + ".ln2"), detail::find_ffn(p, pre + ".ffn")});
  }
  l.enc_ln = detail::find_ln(p, "enc.ln");
  for (int i = 0; i < cfg.layers_dec; ++i) {
    const std::string pre = "dec." + std::to_string(i);
    l.dec.push_back({detail::find_ln(p, pre + ".ln1"), detail::find_attn(p, pre + ".self_attn"),
                     detail::find_ln(p, pre + ".ln2"), detail::find_attn(p, pre + ".cross_attn"),
                     detail::find_ln(p, pre + ".ln3"), detail::find_ffn(p, pre + ".ffn")});
  }
  l.dec_ln = detail::find_ln(p, "dec.ln");
  return l;
}

// ---- Initialization ----------------------------------------------------------

/// Matrices: Xavier uniform. Embeddings: U(-a, a) with a = sqrt(3 / d_model),
/// so scaled lookups have unit variance. Biases zero, layer-norm gains one.
/// Every tensor draws from its own stream keyed by (seed, tensor index).
template <typename T>
Parameters<T> init_parameters(const ModelConfig& cfg, std::uint64_t seed) {
  cfg.validate();
  Parameters<T> p(cfg);
  const int d = cfg.d_model;
  const int V = cfg.vocab_size;

  auto uniform = [&](int rows, int cols, double a) {
    Rng rng(counter_hash(seed, p.size()));
    Matrix<T> m(rows, cols);
    for (int j = 0; j < cols; ++j) {
      for (int i = 0; i < rows; ++i) m(i, j) = static_cast<T>(rng.uniform(-a, a));
    }
    return m;
  };
  auto xavier = [&](int out, int in) { return uniform(out, in, std::sqrt(6.0 / (in + out))); };
  auto zeros = [](int rows) { return Matrix<T>::Zero(rows, 1).eval(); };
  auto ones = [](int rows) { return Matrix<T>::Ones(rows, 1).eval(); };
  const double embed_a = std::sqrt(3.0 / d);

  auto add_attn = [&](const std::string& pre, ParamGroup g) {
    for (const char* m : {"q", "k", "v", "o"}) {
      p.add(pre + ".w" + m, g, xavier(d, d));
      p.add(pre + ".b" + m, g, zeros(d));
    }
  };
  auto add_ln = [&](const std::string& pre, ParamGroup g) {
    p.add(pre + ".g", g, ones(d));
    p.add(pre + ".b", g, zeros(d));
  };
  auto add_ffn = [&](const std::string& pre, ParamGroup g) {
    p.add(pre + ".w1", g, xavier(cfg.d_ff, d));
    p.add(pre + ".b1", g, zeros(cfg.d_ff));
    p.add(pre + ".w2", g, xavier(d, cfg.d_ff));
    p.add(pre + ".b2", g, zeros(d));
  };

  if (cfg.shared_embeddings) {
    p.add("embed.tokens", ParamGroup::embedding, uniform(d, V, embed_a));
  } else {
    p.add("embed.src_tokens", ParamGroup::embedding, uniform(d, V, embed_a));
    p.add("embed.tgt_tokens", ParamGroup::embedding, uniform(d, V, embed_a));
  }
  for (int i = 0; i < cfg.layers_enc; ++i) {
    const std::string pre = "enc." + std::to_string(i);
    add_ln(pre + ".ln1", ParamGroup::encoder);
    add_attn(pre + ".attn", ParamGroup::encoder);
    add_ln(pre + ".ln2", ParamGroup::encoder);
    add_ffn(pre + ".ffn", ParamGroup::encoder);
  }
  add_ln("enc.ln", ParamGroup::encoder);
  for (int i = 0; i < cfg.layers_dec; ++i) {
    const std::string pre = "dec." + std::to_string(i);
    add_ln(pre + ".ln1", ParamGroup::decoder);
    add_attn(pre + ".self_attn", ParamGroup::decoder);
    add_ln(pre + ".ln2", ParamGroup::decoder);
    add_attn(pre + ".cross_attn", ParamGroup::decoder);
    add_ln(pre + ".ln3", ParamGroup::decoder);
    add_ffn(pre + ".ffn", ParamGroup::decoder);
  }
  add_ln("dec.ln", ParamGroup::decoder);
  if (!cfg.tie_output) p.add("out.proj", ParamGroup::output, uniform(d, V, embed_a));
  p.add("out.bias", ParamGroup::output, zeros(V));
  return p;
}

// ---- Forward / backward ------------------------------------------------------

/// Sinusoidal encodings, one column per position in [0, n).
template <typename T>
Matrix<T> positional_encoding(int d, int n) {
  Matrix<T> pe(d, n);
  for (int pos = 0; pos < n; ++pos) {
    for (int i = 0; i < d; i += 2) {
      const double angle = pos / std::pow(10000.0, static_cast<double>(i) / d);
      pe(i, pos) = static_cast<T>(std::sin(angle));
      if (i + 1 < d) pe(i + 1, pos) = static_cast<T>(std::cos(angle));
    }
  }
  return pe;
}

namespace detail {

struct Packing {
  std::vector<int> ids;
  std::vector<int> pos;
  std::vector<int> offset;
  std::vector<int> length;
  int max_len = 0;
};

inline Packing pack(const std::vector<const std::vector<int>*>& seqs) {
  Packing pk;
  for (const auto* s : seqs) {
    pk.offset.push_back(static_cast<int>(pk.ids.size()));
    pk.length.push_back(static_cast<int>(s->size()));
    pk.max_len = std::max(pk.max_len, static_cast<int>(s->size()));
    for (std::size_t i = 0; i < s->size(); ++i) {
      pk.ids.push_back((*s)[i]);
      pk.pos.push_back(static_cast<int>(i));
    }
  }
  return pk;
}

inline void check_packing(const Packing& pk, const ModelConfig& cfg, const char* what) {
  for (std::size_t i = 0; i < pk.length.size(); ++i) {
    if (pk.length[i] == 0) throw Error(ErrorCode::ShapeMismatch, std::string("empty ") + what + " sequence");
  }
  if (pk.max_len > cfg.max_positions) {
    throw Error(ErrorCode::ShapeMismatch, std::string(what) + " length " + std::to_string(pk.max_len) +
                                              " exceeds max_positions " + std::to_string(cfg.max_positions));
  }
  for (int id : pk.ids) {
    if (id < 0 || id >= cfg.vocab_size) {
      throw Error(ErrorCode::ShapeMismatch, "token id " + std::to_string(id) + " outside vocabulary");
    }
  }
}

template <typename T>
Matrix<T> embed(const Matrix<T>& table, const Packing& pk) {
  const int d = static_cast<int>(table.rows());
  const T scale = std::sqrt(T(d));
  const Matrix<T> pe = positional_encoding<T>(d, pk.max_len);
  Matrix<T> x(d, static_cast<Eigen::Index>(pk.ids.size()));
  for (std::size_t j = 0; j < pk.ids.size(); ++j) {
    x.col(static_cast<Eigen::Index>(j)) = scale * table.col(pk.ids[j]) + pe.col(pk.pos[j]);
  }
  return x;
}

template <typename T>
void embed_backward(Matrix<T>& dtable, const Packing& pk, const Matrix<T>& dx) {
  const T scale = std::sqrt(T(dtable.rows()));
  for (std::size_t j = 0; j < pk.ids.size(); ++j) {
    dtable.col(pk.ids[j]) += scale * dx.col(static_cast<Eigen::Index>(j));
  }
}

template <typename T>
layers::AttentionWeights<T> attn_weights(const Parameters<T>& p, const AttnIdx& a) {
  return {p.value(a.wq), p.value(a.bq), p.value(a.wk), p.value(a.bk),
          p.value(a.wv), p.value(a.bv), p.value(a.wo), p.value(a.bo)};
}
template <typename T>
layers::AttentionGrads<T> attn_grads(Parameters<T>& g, const AttnIdx& a) {
  return {g.value(a.wq), g.value(a.bq), g.value(a.wk), g.value(a.bk),
          g.value(a.wv), g.value(a.bv), g.value(a.wo), g.value(a.bo)};
}

template <typename T>
struct EncLayerCache {
  layers::LayerNormCache<T> ln1, ln2;
  layers::AttentionCache<T> attn;
  layers::FfnCache<T> ffn;
  Matrix<T> mask_attn, mask_ffn;
};

template <typename T>
struct DecLayerCache {
  layers::LayerNormCache<T> ln1, ln2, ln3;
  layers::AttentionCache<T> self_attn, cross_attn;
  layers::FfnCache<T> ffn;
  Matrix<T> mask_self, mask_cross, mask_ffn;
};

template <typename T>
struct EncoderCache {
  Matrix<T> mask_embed;
  std::vector<EncLayerCache<T>> layers;
  layers::LayerNormCache<T> ln;
};

template <typename T>
struct DecoderCache {
  Matrix<T> mask_embed;
  std::vector<DecLayerCache<T>> layers;
  layers::LayerNormCache<T> ln;
};

/// Draws a mask only when training with dropout; otherwise returns empty.
template <typename T>
Matrix<T> maybe_mask(const Matrix<T>& x, double p, Rng* rng) {
  if (rng == nullptr || p <= 0.0) return {};
  return layers::dropout_mask<T>(x.rows(), x.cols(), p, *rng);
}

inline std::vector<layers::Segment> self_segments(const Packing& pk) {
  std::vector<layers::Segment> s;
  for (std::size_t i = 0; i < pk.offset.size(); ++i) {
    s.push_back({pk.offset[i], pk.length[i], pk.offset[i], pk.length[i]});
  }
  return s;
}

inline std::vector<layers::Segment> cross_segments(const Packing& tgt, const Packing& src,
                                                   const std::vector<int>& src_of_tgt) {
  std::vector<layers::Segment> s;
  for (std::size_t i = 0; i < tgt.offset.size(); ++i) {
    const auto k = static_cast<std::size_t>(src_of_tgt[i]);
    s.push_back({tgt.offset[i], tgt.length[i], src.offset[k], src.length[k]});
  }
  return s;
}

/// `rng` non-null enables dropout; `cache` non-null records what backward needs.
template <typename T>
Matrix<T> encoder_forward(const Parameters<T>& p, const Layout& l, const Packing& src, Rng* rng,
                          EncoderCache<T>* cache) {
  const ModelConfig& cfg = p.config();
  const auto segs = self_segments(src);
  Matrix<T> x = embed(p.value(l.src_embed), src);
  Matrix<T> m = maybe_mask(x, cfg.dropout, rng);
  layers::apply_mask(x, m);
  if (cache != nullptr) {
    cache->mask_embed = std::move(m);
    cache->layers.resize(l.enc.size());
  }
  for (std::size_t i = 0; i < l.enc.size(); ++i) {
    const auto& li = l.enc[i];
    EncLayerCache<T>* c = cache != nullptr ? &cache->layers[i] : nullptr;
    Matrix<T> h = layers::layer_norm(x, p.value(li.ln1.g), p.value(li.ln1.b), c ? &c->ln1 : nullptr);
    Matrix<T> a = layers::attention(attn_weights(p, li.attn), cfg.heads, h, h, segs, false, c ? &c->attn : nullptr);
    Matrix<T> ma = maybe_mask(a, cfg.dropout, rng);
    layers::apply_mask(a, ma);
    x += a;
    h = layers::layer_norm(x, p.value(li.ln2.g), p.value(li.ln2.b), c ? &c->ln2 : nullptr);
    Matrix<T> f = layers::ffn(p.value(li.ffn.w1), p.value(li.ffn.b1), p.value(li.ffn.w2), p.value(li.ffn.b2), h,
                              c ? &c->ffn : nullptr);
    Matrix<T> mf = maybe_mask(f, cfg.dropout, rng);
    layers::apply_mask(f, mf);
    x += f;
    if (c != nullptr) {
      c->mask_attn = std::move(ma);
      c->mask_ffn = std::move(mf);
    }
  }
  return layers::layer_norm(x, p.value(l.enc_ln.g), p.value(l.enc_ln.b), cache ? &cache->ln : nullptr);
}

template <typename T>
void encoder_backward(const Parameters<T>& p, Parameters<T>& g, const Layout& l, const Packing& src,
                      const EncoderCache<T>& cache, const Matrix<T>& dout) {
  const ModelConfig& cfg = p.config();
  const auto segs = self_segments(src);
  Matrix<T> dx = layers::layer_norm_backward(dout, p.value(l.enc_ln.g), cache.ln, g.value(l.enc_ln.g),
                                             g.value(l.enc_ln.b));
  for (std::size_t r = l.enc.size(); r-- > 0;) {
    const auto& li = l.enc[r];
    const auto& c = cache.layers[r];
    Matrix<T> df = dx;
    layers::apply_mask(df, c.mask_ffn);
    Matrix<T> dh = layers::ffn_backward(p.value(li.ffn.w1), p.value(li.ffn.w2), c.ffn, df, g.value(li.ffn.w1),
                                        g.value(li.ffn.b1), g.value(li.ffn.w2), g.value(li.ffn.b2));
    dx += layers::layer_norm_backward(dh, p.value(li.ln2.g), c.ln2, g.value(li.ln2.g), g.value(li.ln2.b));
    Matrix<T> da = dx;
    layers::apply_mask(da, c.mask_attn);
    auto [dq, dkv] = layers::attention_backward(attn_weights(p, li.attn), attn_grads(g, li.attn), cfg.heads, segs,
                                                c.attn, da);
    dq += dkv;
    dx += layers::layer_norm_backward(dq, p.value(li.ln1.g), c.ln1, g.value(li.ln1.g), g.value(li.ln1.b));
  }
  layers::apply_mask(dx, cache.mask_embed);
  embed_backward(g.value(l.src_embed), src, dx);
}

template <typename T>
Matrix<T> decoder_forward(const Parameters<T>& p, const Layout& l, const Packing& tgt, const Packing& src,
                          const std::vector<int>& src_of_tgt, const Matrix<T>& memory, Rng* rng,
                          DecoderCache<T>* cache) {
  const ModelConfig& cfg = p.config();
  const auto self_segs = self_segments(tgt);
  const auto cross_segs = cross_segments(tgt, src, src_of_tgt);
  Matrix<T> y = embed(p.value(l.tgt_embed), tgt);
  Matrix<T> m = maybe_mask(y, cfg.dropout, rng);
  layers::apply_mask(y, m);
  if (cache != nullptr) {
    cache->mask_embed = std::move(m);
    cache->layers.resize(l.dec.size());
  }
  for (std::size_t i = 0; i < l.dec.size(); ++i) {
    const auto& li = l.dec[i];
    DecLayerCache<T>* c = cache != nullptr ? &cache->layers[i] : nullptr;
    Matrix<T> h = layers::layer_norm(y, p.value(li.ln1.g), p.value(li.ln1.b), c ? &c->ln1 : nullptr);
    Matrix<T> a = layers::attention(attn_weights(p, li.self_attn), cfg.heads, h, h, self_segs, true,
                                    c ? &c->self_attn : nullptr);
    Matrix<T> ms = maybe_mask(a, cfg.dropout, rng);
    layers::apply_mask(a, ms);
    y += a;
    h = layers::layer_norm(y, p.value(li.ln2.g), p.value(li.ln2.b), c ? &c->ln2 : nullptr);
    a = layers::attention(attn_weights(p, li.cross_attn), cfg.heads, h, memory, cross_segs, false,
                          c ? &c->cross_attn : nullptr);
    Matrix<T> mc = maybe_mask(a, cfg.dropout, rng);
    layers::apply_mask(a, mc);
    y += a;
    h = layers::layer_norm(y, p.value(li.ln3.g), p.value(li.ln3.b), c ? &c->ln3 : nullptr);
    Matrix<T> f = layers::ffn(p.value(li.ffn.w1), p.value(li.ffn.b1), p.value(li.ffn.w2), p.value(li.ffn.b2), h,
                              c ? &c->ffn : nullptr);
    Matrix<T> mf = maybe_mask(f, cfg.dropout, rng);
    layers::apply_mask(f, mf);
    y += f;
    if (c != nullptr) {
      c->mask_self = std::move(ms);
      c->mask_cross = std::move(mc);
      c->mask_ffn = std::move(mf);
    }
  }
  return layers::layer_norm(y, p.value(l.dec_ln.g), p.value(l.dec_ln.b), cache ? &cache->ln : nullptr);
}

/// Returns the gradient with respect to the encoder output.
template <typename T>
Matrix<T> decoder_backward(const Parameters<T>& p, Parameters<T>& g, const Layout& l, const Packing& tgt,
                           const Packing& src, const std::vector<int>& src_of_tgt, const DecoderCache<T>& cache,
                           const Matrix<T>& dout, Eigen::Index memory_cols) {
  const ModelConfig& cfg = p.config();
  const auto self_segs = self_segments(tgt);
  const auto cross_segs = cross_segments(tgt, src, src_of_tgt);
  Matrix<T> dmem = Matrix<T>::Zero(cfg.d_model, memory_cols);
  Matrix<T> dy = layers::layer_norm_backward(dout, p.value(l.dec_ln.g), cache.ln, g.value(l.dec_ln.g),
                                             g.value(l.dec_ln.b));
  for (std::size_t r = l.dec.size(); r-- > 0;) {
    const auto& li = l.dec[r];
    const auto& c = cache.layers[r];
    Matrix<T> df = dy;
    layers::apply_mask(df, c.mask_ffn);
    Matrix<T> dh = layers::ffn_backward(p.value(li.ffn.w1), p.value(li.ffn.w2), c.ffn, df, g.value(li.ffn.w1),
                                        g.value(li.ffn.b1), g.value(li.ffn.w2), g.value(li.ffn.b2));
    dy += layers::layer_norm_backward(dh, p.value(li.ln3.g), c.ln3, g.value(li.ln3.g), g.value(li.ln3.b));

    Matrix<T> dc = dy;
    layers::apply_mask(dc, c.mask_cross);
    auto [dq, dkv] = layers::attention_backward(attn_weights(p, li.cross_attn), attn_grads(g, li.cross_attn),
                                                cfg.heads, cross_segs, c.cross_attn, dc);
    dmem += dkv;
    dy += layers::layer_norm_backward(dq, p.value(li.ln2.g), c.ln2, g.value(li.ln2.g), g.value(li.ln2.b));

    Matrix<T> ds = dy;
    layers::apply_mask(ds, c.mask_self);
    auto [dsq, dskv] = layers::attention_backward(attn_weights(p, li.self_attn), attn_grads(g, li.self_attn),
                                                  cfg.heads, self_segs, c.self_attn, ds);
    dsq += dskv;
    dy += layers::layer_norm_backward(dsq, p.value(li.ln1.g), c.ln1, g.value(li.ln1.g), g.value(li.ln1.b));
  }
  layers::apply_mask(dy, cache.mask_embed);
  embed_backward(g.value(l.tgt_embed), tgt, dy);
  return dmem;
}

template <typename T>
Matrix<T> output_logits(const Parameters<T>& p, const Layout& l, const Matrix<T>& z) {
  Matrix<T> logits = p.value(l.out_proj).transpose() * z;
  logits.colwise() += p.value(l.out_bias).col(0);
  return logits;
}

/// Column-wise log-softmax in place.
template <typename T>
void log_softmax_cols(Matrix<T>& logits) {
  for (Eigen::Index j = 0; j < logits.cols(); ++j) {
    auto col = logits.col(j);
    const T mx = col.maxCoeff();
    const T lse = mx + std::log((col.array() - mx).exp().sum());
    col.array() -= lse;
  }
}

}  // namespace detail

template <typename T>
struct LossResult {
  double loss = 0.0;  // label-smoothed CE per target token
  double nll = 0.0;   // plain NLL per target token
  std::size_t tokens = 0;
  Parameters<T> grads;
};

/// Label-smoothed cross-entropy averaged over target tokens:
///   loss = (1 - eps) * NLL(gold) + eps * mean_v NLL(v).
/// With `want_grads` false only the forward pass runs and `grads` is empty.
template <typename T>
LossResult<T> loss_and_grads(const Parameters<T>& p, const Batch& batch, double eps, DropoutMode dropout, Rng& rng,
                             bool want_grads = true) {
  const ModelConfig& cfg = p.config();
  if (batch.empty()) throw Error(ErrorCode::ShapeMismatch, "empty batch");
  if (!(eps >= 0.0 && eps < 1.0)) throw Error(ErrorCode::InvalidConfig, "label smoothing must lie in [0, 1)");
  const Layout l = layout_of(p);

  std::vector<const std::vector<int>*> srcs, tins;
  std::vector<int> src_of_tgt;
  std::vector<int> gold;
  for (std::size_t i = 0; i < batch.examples.size(); ++i) {
    const auto& ex = batch.examples[i];
    if (ex.tgt_in.size() != ex.tgt_out.size()) {
      throw Error(ErrorCode::ShapeMismatch, "target input and output lengths differ");
    }
    srcs.push_back(&ex.src);
    tins.push_back(&ex.tgt_in);
    src_of_tgt.push_back(static_cast<int>(i));
    gold.insert(gold.end(), ex.tgt_out.begin(), ex.tgt_out.end());
  }
  const detail::Packing src = detail::pack(srcs);
  const detail::Packing tgt = detail::pack(tins);
  detail::check_packing(src, cfg, "source");
  detail::check_packing(tgt, cfg, "target");
  for (int id : gold) {
    if (id < 0 || id >= cfg.vocab_size) throw Error(ErrorCode::ShapeMismatch, "gold id outside vocabulary");
  }

  Rng* drop = dropout == DropoutMode::on ? &rng : nullptr;
  detail::EncoderCache<T> ecache;
  detail::DecoderCache<T> dcache;
  const Matrix<T> memory = detail::encoder_forward(p, l, src, drop, want_grads ? &ecache : nullptr);
  const Matrix<T> z = detail::decoder_forward(p, l, tgt, src, src_of_tgt, memory, drop, want_grads ? &dcache : nullptr);
  Matrix<T> logp = detail::output_logits(p, l, z);
  detail::log_softmax_cols(logp);

  const auto n = static_cast<Eigen::Index>(gold.size());
  const double V = cfg.vocab_size;
  double loss = 0.0, nll = 0.0;
  for (Eigen::Index j = 0; j < n; ++j) {
    const double g = -static_cast<double>(logp(gold[static_cast<std::size_t>(j)], j));
    const double mean_all = -static_cast<double>(logp.col(j).template cast<double>().sum()) / V;
    nll += g;
    loss += (1.0 - eps) * g + eps * mean_all;
  }
  LossResult<T> out;
  out.tokens = static_cast<std::size_t>(n);
  out.loss = loss / static_cast<double>(n);
  out.nll = nll / static_cast<double>(n);
  if (!std::isfinite(out.loss)) throw Error(ErrorCode::NonFiniteLoss, "loss is not finite");
  if (!want_grads) return out;

  // d loss / d logits = softmax - ((1 - eps) onehot + eps / V), scaled by 1/n.
  Matrix<T> dlogits = logp.array().exp();
  dlogits.array() -= T(eps / V);
  for (Eigen::Index j = 0; j < n; ++j) dlogits(gold[static_cast<std::size_t>(j)], j) -= T(1.0 - eps);
  dlogits /= T(static_cast<double>(n));

  out.grads = p.zeros_like();
  Parameters<T>& g = out.grads;
  g.value(l.out_bias).col(0) += dlogits.rowwise().sum();
  g.value(l.out_proj).noalias() += z * dlogits.transpose();
  const Matrix<T> dz = p.value(l.out_proj) * dlogits;
  const Matrix<T> dmem = detail::decoder_backward(p, g, l, tgt, src, src_of_tgt, dcache, dz, memory.cols());
  detail::encoder_backward(p, g, l, src, ecache, dmem);
  return out;
}

// ---- Decoding ------------------------------------------------------------------

struct Hypothesis {
  std::vector<int> ids;  // excludes bos; ends with eos unless cut at max_len
  double logprob = 0.0;
  double score = 0.0;
};

/// Log-probabilities of the next token, one row per prefix.
using StepFunction = std::function<std::vector<std::vector<double>>(const std::vector<std::vector<int>>&)>;

/// Beam search with score = logprob / len^alpha (len counts eos). At each
/// step every live hypothesis is expanded, the `beam` best expansions by
/// log-probability are kept and those ending in eos retire. Search stops when
/// nothing is live or `beam` hypotheses have finished; survivors at max_len
/// are retired as they are. Tokens with -inf log-probability are never chosen.
std::vector<Hypothesis> beam_search(const StepFunction& step, int beam, int max_len, double alpha, int eos);

struct DecodeOptions {
  int beam = 1;
  int max_len = 64;
  double length_penalty = 1.0;
  int bos = 1;
  int eos = 2;
  // Ids below this are never generated, except eos.
  int num_special = 4;
};

/// Encoder output for several sources, packed.
template <typename T>
struct Memory {
  detail::Packing src;
  Matrix<T> states;
};

template <typename T>
Memory<T> encode_sources(const Parameters<T>& p, const std::vector<std::vector<int>>& srcs) {
  std::vector<const std::vector<int>*> ptrs;
  for (const auto& s : srcs) {
    if (s.empty()) throw Error(ErrorCode::EmptySource, "cannot decode an empty source");
    ptrs.push_back(&s);
  }
  Memory<T> m;
  m.src = detail::pack(ptrs);
  detail::check_packing(m.src, p.config(), "source");
  m.states = detail::encoder_forward(p, layout_of(p), m.src, nullptr, static_cast<detail::EncoderCache<T>*>(nullptr));
  return m;
}

/// Next-token log-probabilities for each prefix (bos included); prefix i
/// attends to source `src_index[i]` of the memory. Result is [V x prefixes].
template <typename T>
Matrix<T> next_token_logprobs(const Parameters<T>& p, const Memory<T>& mem,
                              const std::vector<std::vector<int>>& prefixes, const std::vector<int>& src_index) {
  const Layout l = layout_of(p);
  std::vector<const std::vector<int>*> ptrs;
  for (const auto& s : prefixes) ptrs.push_back(&s);
  const detail::Packing tgt = detail::pack(ptrs);
  detail::check_packing(tgt, p.config(), "target");
  const Matrix<T> z = detail::decoder_forward(p, l, tgt, mem.src, src_index, mem.states, nullptr,
                                              static_cast<detail::DecoderCache<T>*>(nullptr));
  Matrix<T> last(z.rows(), static_cast<Eigen::Index>(prefixes.size()));
  for (std::size_t i = 0; i < prefixes.size(); ++i) {
    last.col(static_cast<Eigen::Index>(i)) = z.col(tgt.offset[i] + tgt.length[i] - 1);
  }
  Matrix<T> logp = detail::output_logits(p, l, last);
  detail::log_softmax_cols(logp);
  return logp;
}

namespace detail {

inline int decode_limit(const DecodeOptions& opt, const ModelConfig& cfg) {
  // The bos-prefixed input may not exceed max_positions.
  return std::max(1, std::min(opt.max_len, cfg.max_positions - 1));
}

}  // namespace detail

template <typename T>
std::vector<Hypothesis> beam_decode(const Parameters<T>& p, const std::vector<int>& src, const DecodeOptions& opt) {
  if (src.empty()) throw Error(ErrorCode::EmptySource, "cannot decode an empty source");
  if (opt.beam < 1) throw Error(ErrorCode::InvalidConfig, "beam must be at least 1");
  const Memory<T> mem = encode_sources(p, {src});
  StepFunction step = [&](const std::vector<std::vector<int>>& prefixes) {
    std::vector<std::vector<int>> inputs;
    for (const auto& pre : prefixes) {
      std::vector<int> in{opt.bos};
      in.insert(in.end(), pre.begin(), pre.end());
      inputs.push_back(std::move(in));
    }
    const Matrix<T> logp = next_token_logprobs(p, mem, inputs, std::vector<int>(prefixes.size(), 0));
    std::vector<std::vector<double>> out(prefixes.size());
    for (std::size_t i = 0; i < prefixes.size(); ++i) {
      out[i].resize(static_cast<std::size_t>(logp.rows()));
      for (Eigen::Index v = 0; v < logp.rows(); ++v) {
        const bool banned = v < opt.num_special && v != opt.eos;
        out[i][static_cast<std::size_t>(v)] =
            banned ? -std::numeric_limits<double>::infinity() : static_cast<double>(logp(v, static_cast<Eigen::Index>(i)));
      }
    }
    return out;
  };
  return beam_search(step, opt.beam, detail::decode_limit(opt, p.config()), opt.length_penalty, opt.eos);
}

/// Batched step-wise argmax decoding. Returned ids exclude bos and eos.
template <typename T>
std::vector<std::vector<int>> greedy_decode(const Parameters<T>& p, const std::vector<std::vector<int>>& srcs,
                                            const DecodeOptions& opt) {
  std::vector<std::vector<int>> out(srcs.size());
  if (srcs.empty()) return out;
  const Memory<T> mem = encode_sources(p, srcs);
  const int limit = detail::decode_limit(opt, p.config());
  std::vector<std::vector<int>> prefixes(srcs.size(), std::vector<int>{opt.bos});
  std::vector<int> live(srcs.size());
  for (std::size_t i = 0; i < live.size(); ++i) live[i] = static_cast<int>(i);
  for (int t = 0; t < limit && !live.empty(); ++t) {
    std::vector<std::vector<int>> inputs;
    for (int i : live) inputs.push_back(prefixes[static_cast<std::size_t>(i)]);
    const Matrix<T> logp = next_token_logprobs(p, mem, inputs, live);
    std::vector<int> still;
    for (std::size_t k = 0; k < live.size(); ++k) {
      int best = opt.eos;
      T best_v = -std::numeric_limits<T>::infinity();
      for (Eigen::Index v = 0; v < logp.rows(); ++v) {
        if (v < opt.num_special && v != opt.eos) continue;
        const T lv = logp(v, static_cast<Eigen::Index>(k));
        if (lv > best_v) {
          best_v = lv;
          best = static_cast<int>(v);
        }
      }
      const auto i = static_cast<std::size_t>(live[k]);
      if (best == opt.eos) continue;
      prefixes[i].push_back(best);
      out[i].push_back(best);
      still.push_back(live[k]);
    }
    live = std::move(still);
  }
  return out;
}

}  // namespace lrmt
