#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "qrs/preprocess.hpp"

namespace qrs {

struct ModelConfig {
  int depth = 2;        // total conv layers, 2..64
  int channels = 8;     // feature maps in the hidden layers
  int kernel_len = 5;   // odd; 5 samples ~ 44 ms at 100 Hz
  int fs = 100;         // documentation only
  std::uint64_t seed = 1;
};

// [channels x length] row-major tensor.
struct FeatureMap {
  int channels = 0;
  int length = 0;
  std::vector<double> values;

  FeatureMap() = default;
  FeatureMap(int ch, int len) : channels(ch), length(len), values(static_cast<std::size_t>(ch) * len, 0.0) {}
  double& at(int c, int t) { return values[static_cast<std::size_t>(c) * length + t]; }
  double at(int c, int t) const { return values[static_cast<std::size_t>(c) * length + t]; }
};

struct ConvLayer {
  int out_ch = 0;
  int in_ch = 0;
  int kernel_len = 0;
  std::vector<double> weights;  // [out][in][k]
  std::vector<double> bias;     // [out]

  double weight(int o, int c, int j) const {
    return weights[(static_cast<std::size_t>(o) * in_ch + c) * kernel_len + j];
  }
};

// Convolution-only segmentation stack: layer 1 lifts 1 -> C channels, hidden
// layers keep C -> C, the final 1x1 scoring layer projects C -> 2 logit
// planes. Every layer is same-padded so output length equals input length.
struct CnnModel {
  ModelConfig config;
  std::vector<ConvLayer> layers;
};

struct LayerGrads {
  std::vector<double> dweights;
  std::vector<double> dbias;
};
using Gradients = std::vector<LayerGrads>;

// Post-activation outputs kept by a training-mode forward pass.
// activations[0] is the input map, activations[l] the ReLU output of layer l.
struct ForwardCache {
  std::vector<FeatureMap> activations;
};

struct LossGrad {
  double loss = 0.0;
  FeatureMap dlogits;
};

// He-style uniform init (+-sqrt(6 / (in_ch * kernel_len))), zero biases,
// fully determined by config.seed.
CnnModel init_model(const ModelConfig& config);

// Zero-padded same-length cross-correlation plus bias.
FeatureMap conv1d_forward(const FeatureMap& input, const ConvLayer& layer);

// Full stack: conv+ReLU chain then the linear scoring layer. Pass a cache to
// retain activations for backward().
FeatureMap forward(const CnnModel& model, std::span<const double> segment,
                   ForwardCache* cache = nullptr);

// Per-sample 2-class softmax cross-entropy, averaged over the first valid_len
// samples. dlogits is zero beyond valid_len.
LossGrad softmax_cross_entropy(const FeatureMap& logits, const BinaryMask& mask, int valid_len);

// Weight/bias gradients for every layer, given the cache of the matching
// training-mode forward pass.
Gradients backward(const CnnModel& model, const ForwardCache& cache, const FeatureMap& dlogits);

void accumulate_gradients(Gradients& into, const Gradients& from);
void scale_gradients(Gradients& grads, double factor);
Gradients zero_gradients_like(const CnnModel& model);

// Per-sample argmax over the two logit planes; exact ties resolve to 0.
BinaryMask predict_mask(const CnnModel& model, std::span<const double> segment);

// Binary model file: magic "QRSCNN1\0", length-prefixed JSON header
// (config + per-layer shapes), then little-endian binary32 weights in layer
// order (weights then bias per layer).
void save_model(const CnnModel& model, const std::string& path);
CnnModel load_model(const std::string& path);

std::int64_t count_params(const CnnModel& model);
std::int64_t count_macs(const CnnModel& model, std::int64_t input_len);

}  // namespace qrs
