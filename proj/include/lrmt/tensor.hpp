#pragma once

#include <Eigen/Dense>

#include <cmath>
#include <set>
#include <string>
#include <unordered_map>
#include <vector>

#include "lrmt/error.hpp"
#include "lrmt/hash.hpp"
#include "lrmt/model_config.hpp"

namespace lrmt {

template <typename T>
using Matrix = Eigen::Matrix<T, Eigen::Dynamic, Eigen::Dynamic>;
template <typename T>
using Vector = Eigen::Matrix<T, Eigen::Dynamic, 1>;
template <typename T>
using RowVector = Eigen::Matrix<T, 1, Eigen::Dynamic>;

template <typename T>
struct Tensor {
  std::string name;
  ParamGroup group;
  Matrix<T> value;
};

/// Flat, ordered store of named tensors. Activations elsewhere are laid out
/// one column per token, so weights are [out x in] and embedding tables are
/// [d_model x vocab].
template <typename T>
class Parameters {
 public:
  using Scalar = T;

  Parameters() = default;
  explicit Parameters(ModelConfig cfg) : config_(std::move(cfg)) {}

  const ModelConfig& config() const { return config_; }

  int add(std::string name, ParamGroup group, Matrix<T> value) {
    const int idx = static_cast<int>(tensors_.size());
    if (!index_.emplace(name, idx).second) {
      throw Error(ErrorCode::InvalidConfig, "duplicate tensor name " + name);
    }
    tensors_.push_back({std::move(name), group, std::move(value)});
    return idx;
  }

  std::size_t size() const { return tensors_.size(); }
  Tensor<T>& operator[](int i) { return tensors_[static_cast<std::size_t>(i)]; }
  const Tensor<T>& operator[](int i) const { return tensors_[static_cast<std::size_t>(i)]; }
  Matrix<T>& value(int i) { return tensors_[static_cast<std::size_t>(i)].value; }
  const Matrix<T>& value(int i) const { return tensors_[static_cast<std::size_t>(i)].value; }

  auto begin() { return tensors_.begin(); }
  auto end() { return tensors_.end(); }
  auto begin() const { return tensors_.begin(); }
  auto end() const { return tensors_.end(); }

  int index_of(const std::string& name) const {
    auto it = index_.find(name);
    if (it == index_.end()) throw Error(ErrorCode::ShapeMismatch, "no tensor named " + name);
    return it->second;
  }
  bool contains(const std::string& name) const { return index_.count(name) != 0; }

  std::size_t num_scalars() const {
    std::size_t n = 0;
    for (const auto& t : tensors_) n += static_cast<std::size_t>(t.value.size());
    return n;
  }

  Parameters zeros_like() const {
    Parameters out(config_);
    for (const auto& t : tensors_) out.add(t.name, t.group, Matrix<T>::Zero(t.value.rows(), t.value.cols()));
    return out;
  }

  void set_zero() {
    for (auto& t : tensors_) t.value.setZero();
  }

  template <typename U>
  Parameters<U> cast() const {
    Parameters<U> out(config_);
    for (const auto& t : tensors_) out.add(t.name, t.group, t.value.template cast<U>());
    return out;
  }

  bool same_layout(const Parameters& other) const {
    if (tensors_.size() != other.tensors_.size()) return false;
    for (std::size_t i = 0; i < tensors_.size(); ++i) {
      const auto& a = tensors_[i];
      const auto& b = other.tensors_[i];
      if (a.name != b.name || a.group != b.group || a.value.rows() != b.value.rows() ||
          a.value.cols() != b.value.cols()) {
        return false;
      }
    }
    return true;
  }

  bool all_finite() const {
    for (const auto& t : tensors_) {
      if (!t.value.allFinite()) return false;
    }
    return true;
  }

  /// Hash over name, shape and raw value bytes of one tensor.
  std::uint64_t tensor_hash(int i) const {
    const auto& t = tensors_[static_cast<std::size_t>(i)];
    Fnv1a h;
    h.update(t.name).update_u64(static_cast<std::uint64_t>(t.value.rows()))
        .update_u64(static_cast<std::uint64_t>(t.value.cols()));
    h.update(t.value.data(), static_cast<std::size_t>(t.value.size()) * sizeof(T));
    return h.digest();
  }

  std::string hash() const {
    Fnv1a h;
    for (int i = 0; i < static_cast<int>(tensors_.size()); ++i) h.update_u64(tensor_hash(i));
    return h.hex();
  }

  std::string group_hash(ParamGroup g) const {
    Fnv1a h;
    for (int i = 0; i < static_cast<int>(tensors_.size()); ++i) {
      if (tensors_[static_cast<std::size_t>(i)].group == g) h.update_u64(tensor_hash(i));
    }
    return h.hex();
  }

  std::set<ParamGroup> groups() const {
    std::set<ParamGroup> out;
    for (const auto& t : tensors_) out.insert(t.group);
    return out;
  }

 private:
  ModelConfig config_;
  std::vector<Tensor<T>> tensors_;
  std::unordered_map<std::string, int> index_;
};

}  // namespace lrmt
