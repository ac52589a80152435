#pragma once

#include <cmath>
#include <limits>
#include <vector>

#include "lrmt/rng.hpp"
#include "lrmt/tensor.hpp"

// Building blocks of the transformer with their reverse-mode derivatives.
// Activations are [features x tokens]; a batch is a set of sequences packed
// side by side along the token axis, described by Segment lists.

namespace lrmt::layers {

/// Query columns [q_off, q_off + q_len) attend to key columns
/// [k_off, k_off + k_len).
struct Segment {
  int q_off;
  int q_len;
  int k_off;
  int k_len;
};

inline constexpr double kLayerNormEps = 1e-5;

// ---- LayerNorm over each column ------------------------------------------

template <typename T>
struct LayerNormCache {
  Matrix<T> xhat;
  RowVector<T> rstd;
};

template <typename T>
Matrix<T> layer_norm(const Matrix<T>& x, const Matrix<T>& gain, const Matrix<T>& bias,
                     LayerNormCache<T>* cache) {
  const RowVector<T> mean = x.colwise().mean();
  Matrix<T> xc = x.rowwise() - mean;
  const RowVector<T> var = xc.array().square().colwise().mean();
  const RowVector<T> rstd = (var.array() + T(kLayerNormEps)).rsqrt();
  xc.array().rowwise() *= rstd.array();
  Matrix<T> y = (xc.array().colwise() * gain.col(0).array()).colwise() + bias.col(0).array();
  if (cache != nullptr) {
    cache->xhat = std::move(xc);
    cache->rstd = rstd;
  }
  return y;
}

template <typename T>
Matrix<T> layer_norm_backward(const Matrix<T>& dy, const Matrix<T>& gain, const LayerNormCache<T>& c,
                              Matrix<T>& dgain, Matrix<T>& dbias) {
  dgain.col(0) += (dy.array() * c.xhat.array()).rowwise().sum().matrix();
  dbias.col(0) += dy.rowwise().sum();
  const Matrix<T> dxhat = dy.array().colwise() * gain.col(0).array();
  const RowVector<T> m1 = dxhat.colwise().mean();
  const RowVector<T> m2 = (dxhat.array() * c.xhat.array()).colwise().mean();
  Matrix<T> dx = (dxhat.rowwise() - m1).array() - c.xhat.array().rowwise() * m2.array();
  dx.array().rowwise() *= c.rstd.array();
  return dx;
}

// ---- Affine map y = W x + b -----------------------------------------------

template <typename T>
Matrix<T> linear(const Matrix<T>& w, const Matrix<T>& b, const Matrix<T>& x) {
  Matrix<T> y = w * x;
  y.colwise() += b.col(0);
  return y;
}

/// Accumulates dW, db and returns dx.
template <typename T>
Matrix<T> linear_backward(const Matrix<T>& w, const Matrix<T>& x, const Matrix<T>& dy, Matrix<T>& dw,
                          Matrix<T>& db) {
  dw.noalias() += dy * x.transpose();
  db.col(0) += dy.rowwise().sum();
  return w.transpose() * dy;
}

// ---- GELU (tanh approximation) --------------------------------------------

template <typename T>
T gelu(T x) {
  const T c = T(0.7978845608028654);  // sqrt(2/pi)
  return T(0.5) * x * (T(1) + std::tanh(c * (x + T(0.044715) * x * x * x)));
}

template <typename T>
T gelu_grad(T x) {
  const T c = T(0.7978845608028654);
  const T t = std::tanh(c * (x + T(0.044715) * x * x * x));
  return T(0.5) * (T(1) + t) + T(0.5) * x * (T(1) - t * t) * c * (T(1) + T(3 * 0.044715) * x * x);
}

// ---- Position-wise feed-forward --------------------------------------------

template <typename T>
struct FfnCache {
  Matrix<T> x;
  Matrix<T> h;  // pre-activation
  Matrix<T> a;  // post-activation
};

template <typename T>
Matrix<T> ffn(const Matrix<T>& w1, const Matrix<T>& b1, const Matrix<T>& w2, const Matrix<T>& b2,
              const Matrix<T>& x, FfnCache<T>* cache) {
  Matrix<T> h = linear(w1, b1, x);
  Matrix<T> a = h.unaryExpr([](T v) { return gelu(v); });
  Matrix<T> y = linear(w2, b2, a);
  if (cache != nullptr) {
    cache->x = x;
    cache->h = std::move(h);
    cache->a = std::move(a);
  }
  return y;
}

template <typename T>
Matrix<T> ffn_backward(const Matrix<T>& w1, const Matrix<T>& w2, const FfnCache<T>& c, const Matrix<T>& dy,
                       Matrix<T>& dw1, Matrix<T>& db1, Matrix<T>& dw2, Matrix<T>& db2) {
  const Matrix<T> da = linear_backward(w2, c.a, dy, dw2, db2);
  const Matrix<T> dh = da.array() * c.h.unaryExpr([](T v) { return gelu_grad(v); }).array();
  return linear_backward(w1, c.x, dh, dw1, db1);
}

// ---- Multi-head attention --------------------------------------------------

template <typename T>
struct AttentionWeights {
  const Matrix<T>& wq;
  const Matrix<T>& bq;
  const Matrix<T>& wk;
  const Matrix<T>& bk;
  const Matrix<T>& wv;
  const Matrix<T>& bv;
  const Matrix<T>& wo;
  const Matrix<T>& bo;
};

template <typename T>
struct AttentionGrads {
  Matrix<T>& wq;
  Matrix<T>& bq;
  Matrix<T>& wk;
  Matrix<T>& bk;
  Matrix<T>& wv;
  Matrix<T>& bv;
  Matrix<T>& wo;
  Matrix<T>& bo;
};

template <typename T>
struct AttentionCache {
  Matrix<T> xq;
  Matrix<T> xkv;
  Matrix<T> q;
  Matrix<T> k;
  Matrix<T> v;
  Matrix<T> o;
  std::vector<Matrix<T>> probs;  // one [q_len x k_len] block per (segment, head)
};

/// Row-wise softmax; entries above the diagonal are excluded when `causal`.
template <typename T>
void softmax_rows(Matrix<T>& s, bool causal) {
  for (Eigen::Index i = 0; i < s.rows(); ++i) {
    const Eigen::Index limit = causal ? std::min<Eigen::Index>(i + 1, s.cols()) : s.cols();
    const T mx = s.row(i).head(limit).maxCoeff();
    T sum = T(0);
    for (Eigen::Index j = 0; j < limit; ++j) {
      s(i, j) = std::exp(s(i, j) - mx);
      sum += s(i, j);
    }
    for (Eigen::Index j = 0; j < limit; ++j) s(i, j) /= sum;
    for (Eigen::Index j = limit; j < s.cols(); ++j) s(i, j) = T(0);
  }
}

template <typename T>
Matrix<T> attention(const AttentionWeights<T>& w, int heads, const Matrix<T>& xq, const Matrix<T>& xkv,
                    const std::vector<Segment>& segments, bool causal, AttentionCache<T>* cache) {
  const int d = static_cast<int>(w.wq.rows());
  const int dk = d / heads;
  const T scale = T(1) / std::sqrt(T(dk));
  Matrix<T> q = linear(w.wq, w.bq, xq);
  Matrix<T> k = linear(w.wk, w.bk, xkv);
  Matrix<T> v = linear(w.wv, w.bv, xkv);
  Matrix<T> o(d, xq.cols());
  std::vector<Matrix<T>> probs;
  if (cache != nullptr) probs.reserve(segments.size() * static_cast<std::size_t>(heads));
  for (const auto& seg : segments) {
    for (int h = 0; h < heads; ++h) {
      const auto qh = q.block(h * dk, seg.q_off, dk, seg.q_len);
      const auto kh = k.block(h * dk, seg.k_off, dk, seg.k_len);
      const auto vh = v.block(h * dk, seg.k_off, dk, seg.k_len);
      Matrix<T> p = scale * (qh.transpose() * kh);
      softmax_rows(p, causal);
      o.block(h * dk, seg.q_off, dk, seg.q_len).noalias() = vh * p.transpose();
      if (cache != nullptr) probs.push_back(std::move(p));
    }
  }
  Matrix<T> y = linear(w.wo, w.bo, o);
  if (cache != nullptr) {
    cache->xq = xq;
    cache->xkv = xkv;
    cache->q = std::move(q);
    cache->k = std::move(k);
    cache->v = std::move(v);
    cache->o = std::move(o);
    cache->probs = std::move(probs);
  }
  return y;
}

/// Returns (dxq, dxkv). For self-attention the caller sums the two.
template <typename T>
std::pair<Matrix<T>, Matrix<T>> attention_backward(const AttentionWeights<T>& w, const AttentionGrads<T>& g,
                                                   int heads, const std::vector<Segment>& segments,
                                                   const AttentionCache<T>& c, const Matrix<T>& dy) {
  const int d = static_cast<int>(w.wq.rows());
  const int dk = d / heads;
  const T scale = T(1) / std::sqrt(T(dk));
  const Matrix<T> d_o = linear_backward(w.wo, c.o, dy, g.wo, g.bo);
  Matrix<T> dq = Matrix<T>::Zero(d, c.q.cols());
  Matrix<T> dk_all = Matrix<T>::Zero(d, c.k.cols());
  Matrix<T> dv = Matrix<T>::Zero(d, c.v.cols());
  std::size_t pi = 0;
  for (const auto& seg : segments) {
    for (int h = 0; h < heads; ++h, ++pi) {
      const Matrix<T>& p = c.probs[pi];
      const auto doh = d_o.block(h * dk, seg.q_off, dk, seg.q_len);
      const auto qh = c.q.block(h * dk, seg.q_off, dk, seg.q_len);
      const auto kh = c.k.block(h * dk, seg.k_off, dk, seg.k_len);
      const auto vh = c.v.block(h * dk, seg.k_off, dk, seg.k_len);
      const Matrix<T> dp = doh.transpose() * vh;
      dv.block(h * dk, seg.k_off, dk, seg.k_len).noalias() += doh * p;
      const Eigen::Matrix<T, Eigen::Dynamic, 1> rowdot = (dp.array() * p.array()).rowwise().sum();
      const Matrix<T> ds = p.array() * (dp.colwise() - rowdot).array();
      dq.block(h * dk, seg.q_off, dk, seg.q_len).noalias() += scale * (kh * ds.transpose());
      dk_all.block(h * dk, seg.k_off, dk, seg.k_len).noalias() += scale * (qh * ds);
    }
  }
  Matrix<T> dxq = linear_backward(w.wq, c.xq, dq, g.wq, g.bq);
  Matrix<T> dxkv = linear_backward(w.wk, c.xkv, dk_all, g.wk, g.bk);
  dxkv += linear_backward(w.wv, c.xkv, dv, g.wv, g.bv);
  return {std::move(dxq), std::move(dxkv)};
}

// ---- Inverted dropout --------------------------------------------------------

/// Returns the scaled keep-mask (entries 0 or 1/(1-p)); empty when p == 0.
template <typename T>
Matrix<T> dropout_mask(Eigen::Index rows, Eigen::Index cols, double p, Rng& rng) {
  if (p <= 0.0) return {};
  Matrix<T> m(rows, cols);
  const T keep = T(1.0 / (1.0 - p));
  for (Eigen::Index j = 0; j < cols; ++j) {
    for (Eigen::Index i = 0; i < rows; ++i) m(i, j) = rng.uniform() < p ? T(0) : keep;
  }
  return m;
}

template <typename T>
void apply_mask(Matrix<T>& x, const Matrix<T>& mask) {
  if (mask.size() != 0) x.array() *= mask.array();
}

}  // namespace lrmt::layers
