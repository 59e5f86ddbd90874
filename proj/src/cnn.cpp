#include "qrs/cnn.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>
#include <fstream>

#include "json.hpp"
#include "qrs/rng.hpp"

namespace qrs {

namespace {

constexpr char kMagic[8] = {'Q', 'R', 'S', 'C', 'N', 'N', '1', '\0'};

void validate_config(const ModelConfig& config) {
  if (config.depth < 2 || config.depth > 64)
    fail(Err::DepthOutOfRange, "depth must be in [2, 64], got " + std::to_string(config.depth));
  if (config.channels < 1) fail(Err::InvalidParams, "channels must be >= 1");
  if (config.kernel_len < 1 || config.kernel_len % 2 == 0)
    fail(Err::InvalidParams, "kernel_len must be odd and positive");
}

ConvLayer make_layer(int out_ch, int in_ch, int kernel_len, Rng& rng) {
  ConvLayer layer;
  layer.out_ch = out_ch;
  layer.in_ch = in_ch;
  layer.kernel_len = kernel_len;
  const double bound = std::sqrt(6.0 / (static_cast<double>(in_ch) * kernel_len));
  layer.weights.resize(static_cast<std::size_t>(out_ch) * in_ch * kernel_len);
  for (auto& w : layer.weights) w = rng.uniform(-bound, bound);
  layer.bias.assign(static_cast<std::size_t>(out_ch), 0.0);
  return layer;
}

void relu_inplace(FeatureMap& map) {
  for (auto& v : map.values) v = v > 0.0 ? v : 0.0;
}

}  // namespace

CnnModel init_model(const ModelConfig& config) {
  validate_config(config);
  Rng rng(config.seed);
  CnnModel model;
  model.config = config;
  model.layers.reserve(static_cast<std::size_t>(config.depth));
  model.layers.push_back(make_layer(config.channels, 1, config.kernel_len, rng));
  for (int l = 1; l < config.depth - 1; ++l)
    model.layers.push_back(make_layer(config.channels, config.channels, config.kernel_len, rng));
  model.layers.push_back(make_layer(2, config.channels, 1, rng));
  return model;
}

FeatureMap conv1d_forward(const FeatureMap& input, const ConvLayer& layer) {
  if (input.channels != layer.in_ch)
    fail(Err::ShapeMismatch, "conv input has " + std::to_string(input.channels) +
                                 " channels, layer expects " + std::to_string(layer.in_ch));
  const int len = input.length;
  const int k = layer.kernel_len;
  const int off = (k - 1) / 2;

  FeatureMap out(layer.out_ch, len);
  for (int o = 0; o < layer.out_ch; ++o) {
    double* dst = &out.at(o, 0);
    std::fill(dst, dst + len, layer.bias[static_cast<std::size_t>(o)]);
    for (int c = 0; c < layer.in_ch; ++c) {
      const double* src = &input.at(c, 0);
      for (int j = 0; j < k; ++j) {
        const double w = layer.weight(o, c, j);
        const int shift = j - off;
        const int t0 = std::max(0, -shift);
        const int t1 = std::min(len, len - shift);
        for (int t = t0; t < t1; ++t) dst[t] += w * src[t + shift];
      }
    }
  }
  return out;
}

FeatureMap forward(const CnnModel& model, std::span<const double> segment, ForwardCache* cache) {
  if (segment.empty()) fail(Err::ShapeMismatch, "forward: empty segment");
  FeatureMap current(1, static_cast<int>(segment.size()));
  std::copy(segment.begin(), segment.end(), current.values.begin());

  if (cache) {
    cache->activations.clear();
    cache->activations.push_back(current);
  }

  const auto depth = static_cast<int>(model.layers.size());
  for (int l = 0; l < depth - 1; ++l) {
    current = conv1d_forward(current, model.layers[static_cast<std::size_t>(l)]);
    relu_inplace(current);
    if (cache) cache->activations.push_back(current);
  }
  return conv1d_forward(current, model.layers.back());
}

LossGrad softmax_cross_entropy(const FeatureMap& logits, const BinaryMask& mask, int valid_len) {
  if (logits.channels != 2) fail(Err::ShapeMismatch, "expected 2 logit planes");
  if (valid_len <= 0) fail(Err::InvalidParams, "valid_len must be positive");
  if (static_cast<int>(mask.size()) < valid_len || logits.length < valid_len)
    fail(Err::ShapeMismatch, "mask shorter than valid_len");

  LossGrad out;
  out.dlogits = FeatureMap(2, logits.length);
  double loss = 0.0;
  const double inv_n = 1.0 / valid_len;
  for (int t = 0; t < valid_len; ++t) {
    const double z0 = logits.at(0, t);
    const double z1 = logits.at(1, t);
    const double m = std::max(z0, z1);
    const double e0 = std::exp(z0 - m);
    const double e1 = std::exp(z1 - m);
    const double z = e0 + e1;
    const int label = mask[static_cast<std::size_t>(t)] ? 1 : 0;
    const double z_label = label == 1 ? z1 : z0;
    loss += -(z_label - m - std::log(z));
    out.dlogits.at(0, t) = (e0 / z - (label == 0 ? 1.0 : 0.0)) * inv_n;
    out.dlogits.at(1, t) = (e1 / z - (label == 1 ? 1.0 : 0.0)) * inv_n;
  }
  out.loss = loss * inv_n;
  return out;
}

Gradients backward(const CnnModel& model, const ForwardCache& cache, const FeatureMap& dlogits) {
  const auto depth = static_cast<int>(model.layers.size());
  if (static_cast<int>(cache.activations.size()) != depth)
    fail(Err::MissingCache, "forward cache missing or from a different model");

  Gradients grads = zero_gradients_like(model);
  FeatureMap grad_out = dlogits;

  for (int l = depth - 1; l >= 0; --l) {
    const ConvLayer& layer = model.layers[static_cast<std::size_t>(l)];
    const FeatureMap& input = cache.activations[static_cast<std::size_t>(l)];
    LayerGrads& lg = grads[static_cast<std::size_t>(l)];
    const int len = input.length;
    const int k = layer.kernel_len;
    const int off = (k - 1) / 2;

    for (int o = 0; o < layer.out_ch; ++o) {
      const double* g = &grad_out.at(o, 0);
      double db = 0.0;
      for (int t = 0; t < len; ++t) db += g[t];
      lg.dbias[static_cast<std::size_t>(o)] += db;
      for (int c = 0; c < layer.in_ch; ++c) {
        const double* src = &input.at(c, 0);
        for (int j = 0; j < k; ++j) {
          const int shift = j - off;
          const int t0 = std::max(0, -shift);
          const int t1 = std::min(len, len - shift);
          double dw = 0.0;
          for (int t = t0; t < t1; ++t) dw += g[t] * src[t + shift];
          lg.dweights[(static_cast<std::size_t>(o) * layer.in_ch + c) * k + j] += dw;
        }
      }
    }

    if (l == 0) break;  // input gradient not needed

    FeatureMap grad_in(layer.in_ch, len);
    for (int o = 0; o < layer.out_ch; ++o) {
      const double* g = &grad_out.at(o, 0);
      for (int c = 0; c < layer.in_ch; ++c) {
        double* dst = &grad_in.at(c, 0);
        for (int j = 0; j < k; ++j) {
          const double w = layer.weight(o, c, j);
          const int shift = j - off;
          // d input[c][t+shift] += w * g[t]  ->  dst[s] += w * g[s - shift]
          const int s0 = std::max(0, shift);
          const int s1 = std::min(len, len + shift);
          for (int s = s0; s < s1; ++s) dst[s] += w * g[s - shift];
        }
      }
    }
    // Gate through the previous layer's ReLU (its output is this layer's input).
    const FeatureMap& gate = cache.activations[static_cast<std::size_t>(l)];
    for (std::size_t i = 0; i < grad_in.values.size(); ++i)
      if (gate.values[i] <= 0.0) grad_in.values[i] = 0.0;
    grad_out = std::move(grad_in);
  }
  return grads;
}

Gradients zero_gradients_like(const CnnModel& model) {
  Gradients grads(model.layers.size());
  for (std::size_t l = 0; l < model.layers.size(); ++l) {
    grads[l].dweights.assign(model.layers[l].weights.size(), 0.0);
    grads[l].dbias.assign(model.layers[l].bias.size(), 0.0);
  }
  return grads;
}

void accumulate_gradients(Gradients& into, const Gradients& from) {
  if (into.size() != from.size()) fail(Err::ShapeMismatch, "gradient layer count mismatch");
  for (std::size_t l = 0; l < into.size(); ++l) {
    for (std::size_t i = 0; i < into[l].dweights.size(); ++i) into[l].dweights[i] += from[l].dweights[i];
    for (std::size_t i = 0; i < into[l].dbias.size(); ++i) into[l].dbias[i] += from[l].dbias[i];
  }
}

void scale_gradients(Gradients& grads, double factor) {
  for (auto& lg : grads) {
    for (auto& v : lg.dweights) v *= factor;
    for (auto& v : lg.dbias) v *= factor;
  }
}

BinaryMask predict_mask(const CnnModel& model, std::span<const double> segment) {
  const FeatureMap logits = forward(model, segment);
  BinaryMask mask(static_cast<std::size_t>(logits.length), 0);
  for (int t = 0; t < logits.length; ++t)
    mask[static_cast<std::size_t>(t)] = logits.at(1, t) > logits.at(0, t) ? 1 : 0;
  return mask;
}

void save_model(const CnnModel& model, const std::string& path) {
  nlohmann::json header;
  header["config"] = {{"depth", model.config.depth},
                      {"channels", model.config.channels},
                      {"kernel_len", model.config.kernel_len},
                      {"fs", model.config.fs},
                      {"seed", model.config.seed}};
  auto& layers = header["layers"] = nlohmann::json::array();
  for (const auto& layer : model.layers)
    layers.push_back({{"out", layer.out_ch}, {"in", layer.in_ch}, {"k", layer.kernel_len}});
  const std::string header_str = header.dump();

  std::ofstream out(path, std::ios::binary);
  if (!out) fail(Err::IoFailure, "cannot write " + path);
  out.write(kMagic, 8);
  const auto header_len = static_cast<std::uint32_t>(header_str.size());
  const char len_bytes[4] = {static_cast<char>(header_len & 0xff), static_cast<char>((header_len >> 8) & 0xff),
                             static_cast<char>((header_len >> 16) & 0xff),
                             static_cast<char>((header_len >> 24) & 0xff)};
  out.write(len_bytes, 4);
  out.write(header_str.data(), static_cast<std::streamsize>(header_str.size()));

  auto write_f32 = [&out](const std::vector<double>& values) {
    for (double v : values) {
      const auto f = static_cast<float>(v);
      std::uint32_t u;
      std::memcpy(&u, &f, 4);
      const char bytes[4] = {static_cast<char>(u & 0xff), static_cast<char>((u >> 8) & 0xff),
                             static_cast<char>((u >> 16) & 0xff), static_cast<char>((u >> 24) & 0xff)};
      out.write(bytes, 4);
    }
  };
  for (const auto& layer : model.layers) {
    write_f32(layer.weights);
    write_f32(layer.bias);
  }
  if (!out) fail(Err::IoFailure, "write failed for " + path);
}

CnnModel load_model(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) fail(Err::IoFailure, "cannot open " + path);
  std::vector<char> bytes((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());

  if (bytes.size() < 12) fail(Err::TruncatedFile, path + ": too short for header");
  if (std::memcmp(bytes.data(), kMagic, 8) != 0) fail(Err::BadMagic, path + ": bad magic");
  const std::uint32_t header_len = static_cast<std::uint8_t>(bytes[8]) |
                                   (static_cast<std::uint32_t>(static_cast<std::uint8_t>(bytes[9])) << 8) |
                                   (static_cast<std::uint32_t>(static_cast<std::uint8_t>(bytes[10])) << 16) |
                                   (static_cast<std::uint32_t>(static_cast<std::uint8_t>(bytes[11])) << 24);
  if (bytes.size() < 12 + static_cast<std::size_t>(header_len))
    fail(Err::TruncatedFile, path + ": truncated header");

  nlohmann::json header;
  try {
    header = nlohmann::json::parse(bytes.begin() + 12, bytes.begin() + 12 + header_len);
  } catch (const nlohmann::json::exception& e) {
    fail(Err::ParseFailure, path + ": header: " + e.what());
  }

  CnnModel model;
  const auto& cfg = header.at("config");
  model.config.depth = cfg.at("depth").get<int>();
  model.config.channels = cfg.at("channels").get<int>();
  model.config.kernel_len = cfg.at("kernel_len").get<int>();
  model.config.fs = cfg.at("fs").get<int>();
  model.config.seed = cfg.at("seed").get<std::uint64_t>();

  const auto& layer_shapes = header.at("layers");
  if (static_cast<int>(layer_shapes.size()) != model.config.depth)
    fail(Err::ShapeMismatch, path + ": header depth " + std::to_string(model.config.depth) + " but " +
                                 std::to_string(layer_shapes.size()) + " layers serialized");

  std::size_t offset = 12 + header_len;
  auto read_f32 = [&](std::vector<double>& values, std::size_t count) {
    values.resize(count);
    if (bytes.size() < offset + 4 * count) fail(Err::TruncatedFile, path + ": truncated weights");
    for (std::size_t i = 0; i < count; ++i) {
      std::uint32_t u = static_cast<std::uint8_t>(bytes[offset]) |
                        (static_cast<std::uint32_t>(static_cast<std::uint8_t>(bytes[offset + 1])) << 8) |
                        (static_cast<std::uint32_t>(static_cast<std::uint8_t>(bytes[offset + 2])) << 16) |
                        (static_cast<std::uint32_t>(static_cast<std::uint8_t>(bytes[offset + 3])) << 24);
      float f;
      std::memcpy(&f, &u, 4);
      if (!std::isfinite(f)) fail(Err::NonFiniteValue, path + ": non-finite weight");
      values[i] = f;
      offset += 4;
    }
  };

  for (const auto& shape : layer_shapes) {
    ConvLayer layer;
    layer.out_ch = shape.at("out").get<int>();
    layer.in_ch = shape.at("in").get<int>();
    layer.kernel_len = shape.at("k").get<int>();
    read_f32(layer.weights, static_cast<std::size_t>(layer.out_ch) * layer.in_ch * layer.kernel_len);
    read_f32(layer.bias, static_cast<std::size_t>(layer.out_ch));
    model.layers.push_back(std::move(layer));
  }
  if (offset != bytes.size()) fail(Err::ShapeMismatch, path + ": trailing bytes after weights");
  return model;
}

std::int64_t count_params(const CnnModel& model) {
  std::int64_t total = 0;
  for (const auto& layer : model.layers)
    total += static_cast<std::int64_t>(layer.out_ch) * layer.in_ch * layer.kernel_len + layer.out_ch;
  return total;
}

std::int64_t count_macs(const CnnModel& model, std::int64_t input_len) {
  std::int64_t total = 0;
  for (const auto& layer : model.layers)
    total += input_len * static_cast<std::int64_t>(layer.out_ch) * layer.in_ch * layer.kernel_len;
  return total;
}

}  // namespace qrs
