#include "lrmt/optim.hpp"

namespace lrmt {

void AdamHyper::validate() const {
  if (!(beta1 >= 0.0 && beta1 < 1.0) || !(beta2 >= 0.0 && beta2 < 1.0)) {
    throw Error(ErrorCode::InvalidConfig, "Adam betas must lie in [0, 1)");
  }
  if (!(eps > 0.0)) throw Error(ErrorCode::InvalidConfig, "Adam eps must be positive");
  if (!(weight_decay >= 0.0)) throw Error(ErrorCode::InvalidConfig, "weight decay must be non-negative");
}

std::string_view decay_name(DecayLaw d) {
  return d == DecayLaw::inverse_sqrt ? "inverse_sqrt" : "constant";
}

DecayLaw parse_decay(std::string_view name) {
  if (name == "inverse_sqrt") return DecayLaw::inverse_sqrt;
  if (name == "constant") return DecayLaw::constant;
  throw Error(ErrorCode::InvalidConfig, "unknown lr decay '" + std::string(name) + "'");
}

void LrSchedule::validate() const {
  if (!(warmup_init_lr > 0.0 && warmup_init_lr <= peak_lr)) {
    throw Error(ErrorCode::InvalidConfig, "need 0 < warmup_init_lr <= peak_lr");
  }
  if (warmup_updates < 1) throw Error(ErrorCode::InvalidConfig, "warmup_updates must be at least 1");
}

double lr_at(std::int64_t step, const LrSchedule& s) {
  if (step < 1) step = 1;
  if (step < s.warmup_updates) {
    return s.warmup_init_lr +
           (s.peak_lr - s.warmup_init_lr) * static_cast<double>(step) / static_cast<double>(s.warmup_updates);
  }
  if (step == s.warmup_updates || s.decay == DecayLaw::constant) return s.peak_lr;
  return s.peak_lr * std::sqrt(static_cast<double>(s.warmup_updates) / static_cast<double>(step));
}

std::string_view freeze_name(FreezeMode m) {
  switch (m) {
    case FreezeMode::none: return "none";
    case FreezeMode::encoder: return "encoder";
    case FreezeMode::encoder_and_embedding: return "encoder_and_embedding";
  }
  return "?";
}

FreezeMode parse_freeze(std::string_view name) {
  for (auto m : {FreezeMode::none, FreezeMode::encoder, FreezeMode::encoder_and_embedding}) {
    if (freeze_name(m) == name) return m;
  }
  throw Error(ErrorCode::InvalidConfig, "unknown freeze mode '" + std::string(name) + "'");
}

std::set<ParamGroup> FreezeSpec::frozen_groups() const {
  switch (mode) {
    case FreezeMode::none: return {};
    case FreezeMode::encoder: return {ParamGroup::encoder};
    case FreezeMode::encoder_and_embedding: return {ParamGroup::encoder, ParamGroup::embedding};
  }
  return {};
}

bool FreezeSpec::frozen(ParamGroup g) const {
  switch (mode) {
    case FreezeMode::none: return false;
    case FreezeMode::encoder: return g == ParamGroup::encoder;
    case FreezeMode::encoder_and_embedding: return g == ParamGroup::encoder || g == ParamGroup::embedding;
  }
  return false;
}

}  // namespace lrmt
