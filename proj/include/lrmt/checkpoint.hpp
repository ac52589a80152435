#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <string>
#include <vector>

#include "lrmt/model_config.hpp"
#include "lrmt/optim.hpp"
#include "lrmt/tensor.hpp"

namespace lrmt {

struct EvalRecord {
  std::int64_t update = 0;
  double dev_loss = 0.0;
  double dev_chrf2 = -1.0;  // negative when not computed

  bool operator==(const EvalRecord&) const = default;
};

/// Training state on disk.
///
/// File layout (little-endian): 8-byte magic "LRMTCKPT", u32 format version,
/// u64 metadata length, UTF-8 JSON metadata, then every parameter tensor as
/// raw float32 in column-major order, in the order listed in the metadata.
/// When the metadata says so, first and second Adam moments follow in the
/// same order.
struct Checkpoint {
  static constexpr std::uint32_t kFormatVersion = 1;

  ModelConfig model_config;
  std::string bpe_hash;
  Parameters<float> params;
  OptState<float> opt;
  std::int64_t update = 0;
  std::vector<EvalRecord> history;
  // Free-form regime record: regime, languages, parent checkpoint id, ...
  std::map<std::string, std::string> provenance;

  /// Content id: hash of parameters and update count.
  std::string id() const;
};

void save_checkpoint(const Checkpoint& ckpt, const std::filesystem::path& path);
Checkpoint load_checkpoint(const std::filesystem::path& path);

}  // namespace lrmt
