#include "rxnalign/checkpoint.hpp"

#include <zlib.h>

#include <cstring>
#include <fstream>

#include <json.hpp>

namespace rxnalign {
namespace {

using nlohmann::json;

constexpr char kMagic[4] = {'R', 'X', 'C', 'P'};
constexpr std::uint32_t kVersion = 1;

void put_u32(std::string& out, std::uint32_t v) {
  for (int i = 0; i < 4; ++i) out.push_back(char((v >> (8 * i)) & 0xff));
}

void put_u64(std::string& out, std::uint64_t v) {
  for (int i = 0; i < 8; ++i) out.push_back(char((v >> (8 * i)) & 0xff));
}

std::uint32_t get_u32(const std::string& buf, std::size_t at) {
  std::uint32_t v = 0;
  for (int i = 0; i < 4; ++i) v |= std::uint32_t(std::uint8_t(buf[at + i])) << (8 * i);
  return v;
}

std::uint64_t get_u64(const std::string& buf, std::size_t at) {
  std::uint64_t v = 0;
  for (int i = 0; i < 8; ++i) v |= std::uint64_t(std::uint8_t(buf[at + i])) << (8 * i);
  return v;
}

void put_f64(std::string& out, double d) {
  std::uint64_t bits;
  std::memcpy(&bits, &d, 8);
  put_u64(out, bits);
}

double get_f64(const std::string& buf, std::size_t at) {
  std::uint64_t bits = get_u64(buf, at);
  double d;
  std::memcpy(&d, &bits, 8);
  return d;
}

json spec_to_json(const ModelSpec& s) {
  return json{{"task", task_name(s.task)},
              {"hidden", s.hidden},
              {"heads", s.heads},
              {"encoder_blocks", s.encoder_blocks},
              {"decoder_layers", s.decoder_layers},
              {"max_len", s.max_len},
              {"dropout", s.dropout},
              {"no_fusion", s.no_fusion},
              {"vanilla_cross", s.vanilla_cross},
              {"condition_layers", s.condition_layers}};
}

ModelSpec spec_from_json(const json& j) {
  ModelSpec s;
  s.task = task_from_name(j.at("task").get<std::string>());
  s.hidden = j.at("hidden").get<std::int64_t>();
  s.heads = j.at("heads").get<int>();
  s.encoder_blocks = j.at("encoder_blocks").get<int>();
  s.decoder_layers = j.at("decoder_layers").get<int>();
  s.max_len = j.at("max_len").get<std::int64_t>();
  s.dropout = j.at("dropout").get<double>();
  s.no_fusion = j.at("no_fusion").get<bool>();
  s.vanilla_cross = j.at("vanilla_cross").get<bool>();
  s.condition_layers = j.at("condition_layers").get<int>();
  return s;
}

}  // namespace

void save_checkpoint(const std::string& path, const CheckpointMeta& meta,
                     const nd::ParamMap& params) {
  json manifest;
  manifest["task"] = task_name(meta.task);
  manifest["spec"] = spec_to_json(meta.spec);
  manifest["vocab"] = meta.vocab;
  manifest["target_mean"] = meta.target_mean;
  manifest["target_std"] = meta.target_std;
  json hist = json::array();
  for (const auto& e : meta.history)
    hist.push_back({{"epoch", e.epoch},
                    {"lr", e.lr},
                    {"train_loss", e.train_loss},
                    {"val_loss", e.val_loss}});
  manifest["history"] = hist;
  manifest["extra"] = meta.extra;

  json index = json::array();
  std::uint64_t offset = 0;
  for (const auto& [name, tensor] : params.entries) {
    index.push_back({{"name", name}, {"shape", tensor.shape()}, {"offset", offset}});
    offset += std::uint64_t(tensor.size()) * 8;
  }
  manifest["tensors"] = index;

  std::string payload;
  payload.reserve(offset);
  for (const auto& [name, tensor] : params.entries) {
    (void)name;
    for (double v : tensor.data()) put_f64(payload, v);
  }

  const std::string text = manifest.dump();
  std::string blob;
  blob.append(kMagic, 4);
  put_u32(blob, kVersion);
  put_u64(blob, text.size());
  blob += text;
  blob += payload;
  std::uint32_t crc = crc32(0L, Z_NULL, 0);
  crc = crc32(crc, reinterpret_cast<const Bytef*>(blob.data()), uInt(blob.size()));
  put_u32(blob, crc);

  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw CheckpointError("io", "cannot open checkpoint for writing: " + path);
  out.write(blob.data(), std::streamsize(blob.size()));
  if (!out) throw CheckpointError("io", "short write to checkpoint: " + path);
}

LoadedCheckpoint load_checkpoint(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw CheckpointError("io", "cannot open checkpoint: " + path);
  std::string blob((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  if (blob.size() < 20) throw CheckpointError("format", "checkpoint truncated: " + path);
  if (std::memcmp(blob.data(), kMagic, 4) != 0)
    throw CheckpointError("format", "bad checkpoint magic");

  std::uint32_t crc = crc32(0L, Z_NULL, 0);
  crc = crc32(crc, reinterpret_cast<const Bytef*>(blob.data()), uInt(blob.size() - 4));
  if (crc != get_u32(blob, blob.size() - 4))
    throw CheckpointError("corrupt", "checkpoint crc mismatch");

  const std::uint32_t version = get_u32(blob, 4);
  if (version != kVersion)
    throw CheckpointError("format", "unsupported checkpoint version " + std::to_string(version));
  const std::uint64_t text_len = get_u64(blob, 8);
  if (16 + text_len + 4 > blob.size())
    throw CheckpointError("format", "checkpoint manifest overruns file");

  json manifest;
  try {
    manifest = json::parse(blob.substr(16, text_len));
  } catch (const json::exception& e) {
    throw CheckpointError("format", std::string("bad checkpoint manifest: ") + e.what());
  }

  LoadedCheckpoint out;
  try {
    out.meta.task = task_from_name(manifest.at("task").get<std::string>());
    out.meta.spec = spec_from_json(manifest.at("spec"));
    out.meta.vocab = manifest.at("vocab").get<std::vector<std::string>>();
    out.meta.target_mean = manifest.at("target_mean").get<double>();
    out.meta.target_std = manifest.at("target_std").get<double>();
    for (const auto& e : manifest.at("history")) {
      EpochStats s;
      s.epoch = e.at("epoch").get<int>();
      s.lr = e.at("lr").get<double>();
      s.train_loss = e.at("train_loss").get<double>();
      s.val_loss = e.at("val_loss").get<double>();
      out.meta.history.push_back(s);
    }
    out.meta.extra = manifest.at("extra").get<std::map<std::string, std::string>>();

    const std::size_t base = 16 + text_len;
    for (const auto& entry : manifest.at("tensors")) {
      const std::string name = entry.at("name").get<std::string>();
      const auto shape = entry.at("shape").get<std::vector<std::int64_t>>();
      const std::uint64_t offset = entry.at("offset").get<std::uint64_t>();
      nd::Tensor t = nd::Tensor::zeros(shape, false);
      if (base + offset + std::uint64_t(t.size()) * 8 > blob.size() - 4)
        throw CheckpointError("format", "tensor payload overruns file: " + name);
      auto& values = t.mutable_data();
      for (std::int64_t i = 0; i < t.size(); ++i)
        values[std::size_t(i)] = get_f64(blob, base + offset + std::size_t(i) * 8);
      out.tensors.emplace_back(name, t);
    }
  } catch (const json::exception& e) {
    throw CheckpointError("format", std::string("bad checkpoint manifest: ") + e.what());
  }
  return out;
}

void restore_params(const LoadedCheckpoint& ckpt, nd::ParamMap& params) {
  if (ckpt.tensors.size() != params.entries.size())
    throw CheckpointError("mismatch",
                          "checkpoint holds " + std::to_string(ckpt.tensors.size()) +
                              " tensors but the model has " +
                              std::to_string(params.entries.size()));
  for (const auto& [name, stored] : ckpt.tensors) {
    nd::Tensor* live = params.find(name);
    if (!live) throw CheckpointError("mismatch", "checkpoint tensor missing in model: " + name);
    if (live->shape() != stored.shape())
      throw CheckpointError("mismatch", "shape mismatch for tensor: " + name);
    live->mutable_data() = stored.data();
  }
}

}  // namespace rxnalign
