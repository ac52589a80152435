#include <gtest/gtest.h>

#include <filesystem>

#include "lrmt/bpe.hpp"
#include "lrmt/corpus.hpp"
#include "lrmt/error.hpp"

using namespace lrmt;

namespace {

std::vector<std::string> corpus() {
  return {"low lower lowest", "newer wider newest", "আমি ভাত খাওঁ", "ka jingïaroh u", "low low low newer"};
}

BpeModel model(int vocab = 340, bool byte_fallback = true) {
  return train_bpe(corpus(), vocab, all_lang_tags(), byte_fallback);
}

}  // namespace

TEST(Bpe, IdLayout) {
  const BpeModel m = model();
  EXPECT_EQ(m.token(BpeModel::kPad), "<pad>");
  EXPECT_EQ(m.num_special(), 4 + static_cast<int>(all_lang_tags().size()));
  EXPECT_TRUE(m.is_byte(m.num_special()));
  EXPECT_FALSE(m.is_byte(m.num_special() + 256));
  EXPECT_EQ(m.require_special("<2kha>"), 4 + 2);
  EXPECT_THROW(m.require_special("<2hi>"), Error);
  EXPECT_LE(m.size(), 340);
}

TEST(Bpe, RoundTripTraining) {
  const BpeModel m = model();
  for (const auto& line : corpus()) EXPECT_EQ(decode_tokens(m, encode(m, line)), line);
}

TEST(Bpe, RoundTripUnseenUsesByteFallback) {
  const BpeModel m = model();
  const std::string s = "zyx Ωmega ম";
  const auto ids = encode(m, s);
  EXPECT_EQ(decode_tokens(m, ids), s);
  for (int id : ids) EXPECT_FALSE(m.is_special(id));
}

TEST(Bpe, WithoutFallbackUnseenIsUnk) {
  const BpeModel m = model(100, false);
  const auto ids = encode(m, "Ω");
  EXPECT_NE(std::find(ids.begin(), ids.end(), BpeModel::kUnk), ids.end());
}

TEST(Bpe, MergesApplyAndNeverCrossMarker) {
  const BpeModel m = model();
  ASSERT_FALSE(m.merges().empty());
  const auto ids = encode(m, "low");
  EXPECT_LT(ids.size(), 4u);
  for (const auto& [a, b] : m.merges()) {
    const std::string merged = a + b;
    const auto pos = merged.find(BpeModel::kMarker);
    EXPECT_TRUE(pos == std::string::npos || pos == 0) << merged;
  }
}

TEST(Bpe, FirstMergeIsMostFrequentPair) {
  const BpeModel m = train_bpe({"ab ab ab cd"}, 300, {}, true);
  ASSERT_FALSE(m.merges().empty());
  // (▁, a) and (a, b) both occur three times; the byte-wise smaller pair wins.
  EXPECT_EQ(m.merges().front(), (std::pair<std::string, std::string>{"a", "b"}));
}

TEST(Bpe, SerializationRoundTrip) {
  const BpeModel m = model();
  const BpeModel back = BpeModel::parse(m.serialize());
  EXPECT_EQ(back.hash(), m.hash());
  EXPECT_EQ(encode(back, "lowest newer"), encode(m, "lowest newer"));
  const auto path = std::filesystem::temp_directory_path() / "lrmt_bpe_test.model";
  m.save(path);
  EXPECT_EQ(BpeModel::load(path).hash(), m.hash());
}

TEST(Bpe, Determinism) { EXPECT_EQ(model().hash(), model().hash()); }

TEST(Bpe, Errors) {
  EXPECT_THROW(train_bpe({}, 300, {}, true), Error);
  EXPECT_THROW(train_bpe(corpus(), 5, {}, true), Error);
  const BpeModel m = model();
  const std::vector<int> bad{m.size()};
  EXPECT_THROW(decode_tokens(m, bad), Error);
  EXPECT_THROW(BpeModel::parse("garbage"), Error);
}

TEST(Bpe, NfcNormalization) {
  const BpeModel m = model();
  // "ï" decomposed (i + U+0308) encodes like the precomposed form.
  EXPECT_EQ(encode(m, "ji\xCC\x88"), encode(m, "j\xC3\xAF"));
}

TEST(Bpe, SpecialsDroppedOnDecode) {
  const BpeModel m = model();
  std::vector<int> ids{BpeModel::kBos, m.require_special("<2as>")};
  const auto body = encode(m, "low");
  ids.insert(ids.end(), body.begin(), body.end());
  ids.push_back(BpeModel::kEos);
  EXPECT_EQ(decode_tokens(m, ids), "low");
}
