#include "lrmt/checkpoint.hpp"

#include <bit>
#include <cstring>
#include <fstream>

#include <json.hpp>

#include "lrmt/error.hpp"
#include "lrmt/hash.hpp"

namespace lrmt {

static_assert(std::endian::native == std::endian::little, "checkpoint I/O assumes a little-endian host");

namespace {

constexpr char kMagic[8] = {'L', 'R', 'M', 'T', 'C', 'K', 'P', 'T'};

nlohmann::json config_to_json(const ModelConfig& c) {
  return {{"layers_enc", c.layers_enc}, {"layers_dec", c.layers_dec},
          {"d_model", c.d_model},       {"d_ff", c.d_ff},
          {"heads", c.heads},           {"dropout", c.dropout},
          {"vocab_size", c.vocab_size}, {"max_positions", c.max_positions},
          {"shared_embeddings", c.shared_embeddings}, {"tie_output", c.tie_output}};
}

ModelConfig config_from_json(const nlohmann::json& j) {
  ModelConfig c;
  c.layers_enc = j.at("layers_enc");
  c.layers_dec = j.at("layers_dec");
  c.d_model = j.at("d_model");
  c.d_ff = j.at("d_ff");
  c.heads = j.at("heads");
  c.dropout = j.at("dropout");
  c.vocab_size = j.at("vocab_size");
  c.max_positions = j.at("max_positions");
  c.shared_embeddings = j.at("shared_embeddings");
  c.tie_output = j.at("tie_output");
  return c;
}

void write_tensors(std::ofstream& out, const Parameters<float>& p) {
  for (const auto& t : p) {
    out.write(reinterpret_cast<const char*>(t.value.data()),
              static_cast<std::streamsize>(t.value.size() * sizeof(float)));
  }
}

void read_tensors(std::ifstream& in, Parameters<float>& p, const std::string& path) {
  for (auto& t : p) {
    in.read(reinterpret_cast<char*>(t.value.data()), static_cast<std::streamsize>(t.value.size() * sizeof(float)));
    if (!in) throw Error(ErrorCode::FormatError, path + ": truncated tensor data for " + t.name);
  }
}

}  // namespace

std::string Checkpoint::id() const {
  Fnv1a h;
  h.update(params.hash()).update_u64(static_cast<std::uint64_t>(update));
  return h.hex();
}

void save_checkpoint(const Checkpoint& ckpt, const std::filesystem::path& path) {
  nlohmann::json meta;
  meta["format_version"] = Checkpoint::kFormatVersion;
  meta["model_config"] = config_to_json(ckpt.model_config);
  meta["bpe_hash"] = ckpt.bpe_hash;
  meta["update"] = ckpt.update;
  nlohmann::json tensors = nlohmann::json::array();
  for (const auto& t : ckpt.params) {
    tensors.push_back({{"name", t.name}, {"group", group_name(t.group)}, {"rows", t.value.rows()},
                       {"cols", t.value.cols()}});
  }
  meta["tensors"] = tensors;
  meta["has_optimizer_state"] = ckpt.opt.initialized();
  meta["optimizer_step"] = ckpt.opt.step;
  nlohmann::json hist = nlohmann::json::array();
  for (const auto& r : ckpt.history) hist.push_back({r.update, r.dev_loss, r.dev_chrf2});
  meta["history"] = hist;
  meta["provenance"] = ckpt.provenance;
  const std::string text = meta.dump();

  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  const auto tmp = std::filesystem::path(path.string() + ".tmp");
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw Error(ErrorCode::IoError, "cannot write " + tmp.string());
    out.write(kMagic, sizeof(kMagic));
    const std::uint32_t version = Checkpoint::kFormatVersion;
    out.write(reinterpret_cast<const char*>(&version), sizeof(version));
    const std::uint64_t len = text.size();
    out.write(reinterpret_cast<const char*>(&len), sizeof(len));
    out.write(text.data(), static_cast<std::streamsize>(text.size()));
    write_tensors(out, ckpt.params);
    if (ckpt.opt.initialized()) {
      write_tensors(out, ckpt.opt.m);
      write_tensors(out, ckpt.opt.v);
    }
    if (!out) throw Error(ErrorCode::IoError, "write failed for " + tmp.string());
  }
  std::filesystem::rename(tmp, path);
}

Checkpoint load_checkpoint(const std::filesystem::path& path) {
  const std::string p = path.string();
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(ErrorCode::IoError, "cannot open " + p);
  char magic[8];
  in.read(magic, sizeof(magic));
  if (!in || std::memcmp(magic, kMagic, sizeof(kMagic)) != 0) {
    throw Error(ErrorCode::FormatError, p + ": not a checkpoint file");
  }
  std::uint32_t version = 0;
  std::uint64_t len = 0;
  in.read(reinterpret_cast<char*>(&version), sizeof(version));
  in.read(reinterpret_cast<char*>(&len), sizeof(len));
  if (!in || version != Checkpoint::kFormatVersion) {
    throw Error(ErrorCode::FormatError, p + ": unsupported checkpoint version " + std::to_string(version));
  }
  std::string text(len, '\0');
  in.read(text.data(), static_cast<std::streamsize>(len));
  if (!in) throw Error(ErrorCode::FormatError, p + ": truncated metadata");

  nlohmann::json meta;
  try {
    meta = nlohmann::json::parse(text);
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorCode::FormatError, p + ": bad metadata: " + e.what());
  }

  Checkpoint ckpt;
  try {
    ckpt.model_config = config_from_json(meta.at("model_config"));
    ckpt.bpe_hash = meta.at("bpe_hash");
    ckpt.update = meta.at("update");
    ckpt.params = Parameters<float>(ckpt.model_config);
    for (const auto& t : meta.at("tensors")) {
      ckpt.params.add(t.at("name"), parse_group(t.at("group").get<std::string>()),
                      Matrix<float>::Zero(t.at("rows").get<Eigen::Index>(), t.at("cols").get<Eigen::Index>()));
    }
    for (const auto& r : meta.at("history")) ckpt.history.push_back({r.at(0), r.at(1), r.at(2)});
    ckpt.provenance = meta.at("provenance").get<std::map<std::string, std::string>>();
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorCode::FormatError, p + ": bad metadata: " + e.what());
  }
  read_tensors(in, ckpt.params, p);
  if (meta.value("has_optimizer_state", false)) {
    ckpt.opt = OptState<float>::fresh(ckpt.params);
    ckpt.opt.step = meta.at("optimizer_step");
    read_tensors(in, ckpt.opt.m, p);
    read_tensors(in, ckpt.opt.v, p);
  }
  return ckpt;
}

}  // namespace lrmt
