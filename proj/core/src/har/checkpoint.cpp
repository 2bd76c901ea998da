#include "falldet/har/checkpoint.hpp"

#include <cstring>
#include <fstream>
#include <iterator>
#include <nlohmann/json.hpp>

#include "falldet/error.hpp"
#include "falldet/nn/serialize.hpp"

namespace falldet::har {
namespace {

using json = nlohmann::json;
constexpr char kMagic[] = "FDCKPT1";
constexpr std::size_t kMagicLen = sizeof(kMagic) - 1;

json config_to_json(const ModelConfig& c) {
  return {{"input_time", c.input_time}, {"input_features", c.input_features},
          {"n_classes", c.n_classes},   {"embed_dim", c.embed_dim},
          {"heads", c.heads},           {"n_blocks", c.n_blocks},
          {"conv_kernels", c.conv_kernels}, {"dropout", c.dropout},
          {"rng_seed", c.rng_seed}};
}

ModelConfig config_from_json(const json& j) {
  ModelConfig c;
  c.input_time = j.at("input_time").get<std::size_t>();
  c.input_features = j.at("input_features").get<std::size_t>();
  c.n_classes = j.at("n_classes").get<std::size_t>();
  c.embed_dim = j.at("embed_dim").get<std::size_t>();
  c.heads = j.at("heads").get<std::size_t>();
  c.n_blocks = j.at("n_blocks").get<std::size_t>();
  c.conv_kernels = j.at("conv_kernels").get<std::vector<std::size_t>>();
  c.dropout = j.at("dropout").get<double>();
  c.rng_seed = j.at("rng_seed").get<std::uint64_t>();
  return c;
}

const char* normalization_name(ingest::Normalization n) {
  return n == ingest::Normalization::kNone ? "none" : "zscore-per-feature";
}

}  // namespace

const nn::Tensor* ModelCheckpoint::find(std::string_view name) const {
  for (const auto& [n, t] : parameters) {
    if (n == name) return &t;
  }
  return nullptr;
}

ModelCheckpoint snapshot(const HarModel& model, std::size_t epoch, std::vector<EpochMetrics> metrics) {
  ModelCheckpoint c;
  c.config = model.config();
  c.epoch = epoch;
  c.metrics = std::move(metrics);
  for (const auto& p : model.parameters().items()) c.parameters.emplace_back(p.name, p.var.value());
  return c;
}

void load_weights(HarModel& model, const ModelCheckpoint& ckpt) {
  auto& items = model.parameters().items();
  if (items.size() != ckpt.parameters.size()) {
    throw ConfigError("checkpoint holds " + std::to_string(ckpt.parameters.size()) + " parameters, model has " +
                      std::to_string(items.size()));
  }
  for (std::size_t i = 0; i < items.size(); ++i) {
    const auto& [name, tensor] = ckpt.parameters[i];
    if (items[i].name != name) throw ConfigError("parameter " + std::to_string(i) + " is '" + name + "', expected '" + items[i].name + "'");
    if (items[i].var.shape() != tensor.shape()) {
      throw ConfigError("parameter '" + name + "' has shape " + nn::to_string(tensor.shape()) + ", expected " +
                        nn::to_string(items[i].var.shape()));
    }
    items[i].var.value() = tensor;
  }
}

HarModel restore(const ModelCheckpoint& ckpt) {
  if (ckpt.version != ModelCheckpoint::kVersion) {
    throw ConfigError("unsupported checkpoint version " + std::to_string(ckpt.version));
  }
  HarModel model(ckpt.config);
  load_weights(model, ckpt);
  return model;
}

std::vector<std::uint8_t> serialize_checkpoint(const ModelCheckpoint& ckpt) {
  json meta;
  meta["version"] = ckpt.version;
  meta["config"] = config_to_json(ckpt.config);
  meta["epoch"] = ckpt.epoch;
  json metrics = json::array();
  for (const auto& m : ckpt.metrics) {
    metrics.push_back({{"epoch", m.epoch}, {"train_acc", m.train_acc}, {"test_acc", m.test_acc}, {"avg_loss", m.avg_loss}});
  }
  meta["metrics"] = std::move(metrics);
  meta["class_names"] = ckpt.class_names;
  if (ckpt.normalizer) meta["normalizer"] = {{"mean", ckpt.normalizer->mean}, {"std", ckpt.normalizer->std}};
  if (ckpt.windowing) {
    meta["windowing"] = {{"window_len", ckpt.windowing->window_len},
                         {"stride", ckpt.windowing->stride},
                         {"downsample", ckpt.windowing->downsample},
                         {"normalization", normalization_name(ckpt.windowing->normalization)}};
  }
  json index = json::array();
  for (const auto& [name, t] : ckpt.parameters) index.push_back({{"name", name}, {"shape", t.shape()}});
  meta["parameters"] = std::move(index);

  const std::string text = meta.dump();
  std::vector<std::uint8_t> out(kMagic, kMagic + kMagicLen);
  const std::uint64_t len = text.size();
  for (int i = 0; i < 8; ++i) out.push_back(static_cast<std::uint8_t>((len >> (8 * i)) & 0xff));
  out.insert(out.end(), text.begin(), text.end());
  for (const auto& [name, t] : ckpt.parameters) nn::write_tensor(out, t);
  return out;
}

ModelCheckpoint deserialize_checkpoint(std::span<const std::uint8_t> bytes) {
  if (bytes.size() < kMagicLen + 8 || std::memcmp(bytes.data(), kMagic, kMagicLen) != 0) {
    throw ParseError("not a checkpoint file (bad magic)");
  }
  std::uint64_t len = 0;
  for (int i = 0; i < 8; ++i) len |= static_cast<std::uint64_t>(bytes[kMagicLen + i]) << (8 * i);
  std::size_t offset = kMagicLen + 8;
  if (bytes.size() - offset < len) throw ParseError("checkpoint metadata truncated");

  ModelCheckpoint c;
  try {
    const json meta = json::parse(bytes.begin() + static_cast<std::ptrdiff_t>(offset),
                                  bytes.begin() + static_cast<std::ptrdiff_t>(offset + len));
    c.version = meta.at("version").get<int>();
    if (c.version != ModelCheckpoint::kVersion) {
      throw ConfigError("unsupported checkpoint version " + std::to_string(c.version));
    }
    c.config = config_from_json(meta.at("config"));
    c.epoch = meta.at("epoch").get<std::size_t>();
    for (const auto& m : meta.at("metrics")) {
      c.metrics.push_back({m.at("epoch").get<std::size_t>(), m.at("train_acc").get<double>(),
                           m.at("test_acc").get<double>(), m.at("avg_loss").get<double>()});
    }
    c.class_names = meta.at("class_names").get<std::vector<std::string>>();
    if (meta.contains("normalizer")) {
      ingest::NormStats s;
      s.mean = meta["normalizer"].at("mean").get<std::vector<double>>();
      s.std = meta["normalizer"].at("std").get<std::vector<double>>();
      c.normalizer = std::move(s);
    }
    if (meta.contains("windowing")) {
      const auto& w = meta["windowing"];
      ingest::WindowingConfig cfg;
      cfg.window_len = w.at("window_len").get<std::size_t>();
      cfg.stride = w.at("stride").get<std::size_t>();
      cfg.downsample = w.at("downsample").get<std::size_t>();
      cfg.normalization = w.at("normalization").get<std::string>() == "none" ? ingest::Normalization::kNone
                                                                             : ingest::Normalization::kZScorePerFeature;
      c.windowing = cfg;
    }
    offset += len;
    for (const auto& entry : meta.at("parameters")) {
      auto name = entry.at("name").get<std::string>();
      const auto shape = entry.at("shape").get<nn::Shape>();
      nn::Tensor t = nn::read_tensor(bytes, offset);
      if (t.shape() != shape) throw ParseError("tensor '" + name + "' payload shape disagrees with the index");
      c.parameters.emplace_back(std::move(name), std::move(t));
    }
  } catch (const json::exception& e) {
    throw ParseError(std::string("checkpoint metadata error: ") + e.what());
  }
  if (offset != bytes.size()) throw ParseError("trailing bytes after checkpoint payloads");
  return c;
}

void save_checkpoint(const ModelCheckpoint& ckpt, const std::filesystem::path& file) {
  const auto bytes = serialize_checkpoint(ckpt);
  std::ofstream out(file, std::ios::binary);
  if (!out) throw ParseError("cannot write checkpoint", file.string());
  out.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
}

ModelCheckpoint load_checkpoint(const std::filesystem::path& file) {
  std::ifstream in(file, std::ios::binary);
  if (!in) throw ParseError("cannot open checkpoint", file.string());
  const std::vector<std::uint8_t> bytes((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  try {
    return deserialize_checkpoint(bytes);
  } catch (const ParseError& e) {
    throw ParseError(e.what(), file.string());
  }
}

}  // namespace falldet::har
