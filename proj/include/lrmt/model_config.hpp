#pragma once

#include <string>
#include <string_view>

namespace lrmt {

/// Units of freezing.
enum class ParamGroup { embedding, encoder, decoder, output };

std::string_view group_name(ParamGroup g);
ParamGroup parse_group(std::string_view name);

struct ModelConfig {
  int layers_enc = 2;
  int layers_dec = 2;
  int d_model = 128;
  int d_ff = 512;
  int heads = 4;
  double dropout = 0.3;
  int vocab_size = 8000;
  int max_positions = 256;
  // One embedding table for encoder and decoder inputs.
  bool shared_embeddings = true;
  // Output projection reuses the decoder input embedding.
  bool tie_output = true;

  /// Throws Error(InvalidConfig).
  void validate() const;
  bool operator==(const ModelConfig&) const = default;
};

}  // namespace lrmt
