#pragma once

#include <cmath>
#include <cstdint>
#include <set>
#include <string>
#include <string_view>

#include "lrmt/error.hpp"
#include "lrmt/tensor.hpp"

namespace lrmt {

struct AdamHyper {
  double beta1 = 0.9;
  double beta2 = 0.98;
  double eps = 1e-8;
  double weight_decay = 0.0;  // decoupled

  void validate() const;
};

enum class DecayLaw { inverse_sqrt, constant };

std::string_view decay_name(DecayLaw d);
DecayLaw parse_decay(std::string_view name);

struct LrSchedule {
  double warmup_init_lr = 1e-7;
  double peak_lr = 3e-5;
  std::int64_t warmup_updates = 4000;
  DecayLaw decay = DecayLaw::inverse_sqrt;

  void validate() const;
};

/// Linear warmup from warmup_init_lr to peak_lr, reaching the peak exactly at
/// step == warmup_updates, then peak * sqrt(warmup / step) (or constant).
double lr_at(std::int64_t step, const LrSchedule& sched);

enum class FreezeMode { none, encoder, encoder_and_embedding };

std::string_view freeze_name(FreezeMode m);
FreezeMode parse_freeze(std::string_view name);

struct FreezeSpec {
  FreezeMode mode = FreezeMode::none;

  std::set<ParamGroup> frozen_groups() const;
  bool frozen(ParamGroup g) const;
};

template <typename T>
struct OptState {
  std::int64_t step = 0;
  Parameters<T> m;
  Parameters<T> v;

  static OptState fresh(const Parameters<T>& params) {
    return {0, params.zeros_like(), params.zeros_like()};
  }
  bool initialized() const { return m.size() != 0; }
};

/// Bias-corrected Adam with decoupled weight decay. Tensors in frozen groups
/// are skipped entirely, moments included. The step counter advances once.
template <typename T>
void adam_step(Parameters<T>& params, const Parameters<T>& grads, OptState<T>& state, const AdamHyper& hyper,
               double lr, const FreezeSpec& freeze) {
  hyper.validate();
  if (!(lr > 0.0)) throw Error(ErrorCode::InvalidConfig, "learning rate must be positive");
  if (!state.initialized()) state = OptState<T>::fresh(params);
  if (!params.same_layout(grads) || !params.same_layout(state.m) || !params.same_layout(state.v)) {
    throw Error(ErrorCode::ShapeMismatch, "parameters, gradients and optimizer state disagree in layout");
  }
  for (int i = 0; i < static_cast<int>(params.size()); ++i) {
    if (!freeze.frozen(params[i].group) && !grads.value(i).allFinite()) {
      throw Error(ErrorCode::NonFiniteGradient, "non-finite gradient in " + params[i].name);
    }
  }
  ++state.step;
  const double t = static_cast<double>(state.step);
  const double bc1 = 1.0 - std::pow(hyper.beta1, t);
  const double bc2 = 1.0 - std::pow(hyper.beta2, t);
  const T b1 = T(hyper.beta1), b2 = T(hyper.beta2);
  for (int i = 0; i < static_cast<int>(params.size()); ++i) {
    if (freeze.frozen(params[i].group)) continue;
    auto& w = params.value(i);
    const auto& g = grads.value(i);
    auto& m = state.m.value(i);
    auto& v = state.v.value(i);
    m = b1 * m + (T(1) - b1) * g;
    v = b2 * v + (T(1) - b2) * g.cwiseProduct(g);
    if (hyper.weight_decay != 0.0) w *= T(1.0 - lr * hyper.weight_decay);
    const T step_size = T(lr / bc1);
    const T vscale = T(1.0 / std::sqrt(bc2));
    w.array() -= step_size * m.array() / (v.array().sqrt() * vscale + T(hyper.eps));
  }
}

/// Global L2 norm over the unfrozen gradients.
template <typename T>
double grad_norm(const Parameters<T>& grads, const FreezeSpec& freeze) {
  double s = 0.0;
  for (const auto& t : grads) {
    if (!freeze.frozen(t.group)) s += t.value.template cast<double>().squaredNorm();
  }
  return std::sqrt(s);
}

/// Rescales gradients so their global norm is at most max_norm; returns the
/// norm before clipping. max_norm <= 0 disables clipping.
template <typename T>
double clip_grad_norm(Parameters<T>& grads, double max_norm, const FreezeSpec& freeze) {
  const double n = grad_norm(grads, freeze);
  if (max_norm > 0.0 && n > max_norm) {
    const T s = T(max_norm / n);
    for (auto& t : grads) t.value *= s;
  }
  return n;
}

/// Sums micro-batch gradients weighted by their token counts and signals a
/// flush every `accumulation` micro-steps. The flushed gradient is the
/// token-weighted mean, which equals the plain mean when micro-batches have
/// equal token counts and equals the gradient of the concatenated batch.
template <typename T>
class GradAccumulator {
 public:
  explicit GradAccumulator(int accumulation = 2) : accumulation_(accumulation) {
    if (accumulation < 1) throw Error(ErrorCode::InvalidConfig, "accumulation must be at least 1");
  }

  /// Returns true when this micro-step completes an accumulation window.
  bool add(const Parameters<T>& grads, double weight = 1.0) {
    if (sum_.size() == 0) {
      sum_ = grads.zeros_like();
    } else if (!sum_.same_layout(grads)) {
      throw Error(ErrorCode::ShapeMismatch, "gradient layout changed between micro-steps");
    }
    for (int i = 0; i < static_cast<int>(grads.size()); ++i) sum_.value(i) += T(weight) * grads.value(i);
    weight_ += weight;
    ++micro_step_;
    return micro_step_ % accumulation_ == 0;
  }

  /// The averaged gradient; resets the buffer.
  Parameters<T> flush() {
    Parameters<T> out = std::move(sum_);
    const T s = T(1.0 / weight_);
    for (auto& t : out) t.value *= s;
    sum_ = Parameters<T>();
    weight_ = 0.0;
    return out;
  }

  bool pending() const { return weight_ > 0.0; }
  std::int64_t micro_step() const { return micro_step_; }
  int accumulation() const { return accumulation_; }

 private:
  int accumulation_;
  std::int64_t micro_step_ = 0;
  double weight_ = 0.0;
  Parameters<T> sum_;
};

}  // namespace lrmt
