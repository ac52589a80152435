#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <unordered_map>
#include <utility>
#include <vector>

namespace lrmt {

/// Joint byte-pair-encoding vocabulary.
///
/// Id layout: special tokens first (pad, bos, eos, unk, then any extra
/// specials such as language tags), then the 256 byte-fallback tokens when
/// enabled, then the learned pieces (initial alphabet followed by merge
/// outputs). Specials and byte tokens live in their own id ranges, so plain
/// text never encodes to them.
///
/// Text is NFC-normalized, every U+0020 becomes the word marker U+2581 and a
/// marker is prepended; merges never cross a marker. Decoding reverses this,
/// so the round trip is exact for NFC text.
class BpeModel {
 public:
  static constexpr int kPad = 0;
  static constexpr int kBos = 1;
  static constexpr int kEos = 2;
  static constexpr int kUnk = 3;
  static constexpr std::string_view kMarker = "\xE2\x96\x81";  // U+2581
  static constexpr int kFormatVersion = 1;

  int size() const { return static_cast<int>(tokens_.size()); }
  int num_special() const { return num_special_; }
  bool byte_fallback() const { return byte_fallback_; }
  bool is_special(int id) const { return id >= 0 && id < num_special_; }
  bool is_byte(int id) const {
    return byte_fallback_ && id >= num_special_ && id < num_special_ + 256;
  }
  const std::string& token(int id) const { return tokens_.at(static_cast<std::size_t>(id)); }
  const std::vector<std::string>& special_tokens() const { return specials_; }
  const std::vector<std::pair<std::string, std::string>>& merges() const { return merges_; }

  std::optional<int> special_id(std::string_view tok) const;
  std::optional<int> piece_id(std::string_view piece) const;
  /// Throws Error(MissingLanguageTag) when the special is absent.
  int require_special(std::string_view tok) const;

  std::string serialize() const;
  static BpeModel parse(std::string_view text);
  void save(const std::filesystem::path& path) const;
  static BpeModel load(const std::filesystem::path& path);
  /// FNV-1a of the serialized form; identifies a tokenizer in checkpoints.
  std::string hash() const;

 private:
  friend BpeModel train_bpe(const std::vector<std::string>&, int, const std::vector<std::string>&, bool);
  friend std::vector<int> encode(const BpeModel&, std::string_view);

  void rebuild_indices();
  std::vector<int> encode_segment(const std::vector<std::string>& symbols) const;

  std::vector<std::string> tokens_;
  std::vector<std::string> specials_;
  int num_special_ = 0;
  bool byte_fallback_ = true;
  std::vector<std::pair<std::string, std::string>> merges_;

  std::unordered_map<std::string, int> special_ids_;
  std::unordered_map<std::string, int> piece_ids_;
  // (left id, right id) -> (rank, merged id)
  std::unordered_map<std::uint64_t, std::pair<int, int>> merge_table_;
};

/// Greedy highest-count pair merging until `vocab_size` ids exist or no pair
/// occurs twice. Ties go to the lexicographically smallest (left, right).
/// `extra_special` tokens (language tags) follow pad/bos/eos/unk.
BpeModel train_bpe(const std::vector<std::string>& corpus_lines, int vocab_size,
                   const std::vector<std::string>& extra_special, bool byte_fallback = true);

std::vector<int> encode(const BpeModel& model, std::string_view text);

/// Special tokens are dropped; throws Error(IdOutOfRange) for ids outside the
/// vocabulary.
std::string decode_tokens(const BpeModel& model, std::span<const int> ids);

}  // namespace lrmt
