#include "qrs/training.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <numeric>

#include "qrs/rng.hpp"

namespace qrs {

TrainConfig train_config_from_json(const nlohmann::json& j) {
  TrainConfig c;
  c.max_epochs = j.value("max_epochs", c.max_epochs);
  c.initial_lr = j.value("initial_lr", c.initial_lr);
  c.lr_factor = j.value("lr_factor", c.lr_factor);
  c.lr_patience = j.value("lr_patience", c.lr_patience);
  c.early_stop_patience = j.value("early_stop_patience", c.early_stop_patience);
  c.batch_size = j.value("batch_size", c.batch_size);
  c.k_folds = j.value("k_folds", c.k_folds);
  c.seed = j.value("seed", c.seed);
  c.lr_floor = j.value("lr_floor", c.lr_floor);
  if (c.lr_patience < 1 || c.early_stop_patience < 1)
    fail(Err::InvalidParams, "patience values must be >= 1");
  if (c.lr_factor <= 0 || c.lr_factor >= 1) fail(Err::InvalidParams, "lr_factor must be in (0, 1)");
  return c;
}

nlohmann::json train_config_to_json(const TrainConfig& c) {
  return {{"max_epochs", c.max_epochs},
          {"initial_lr", c.initial_lr},
          {"lr_factor", c.lr_factor},
          {"lr_patience", c.lr_patience},
          {"early_stop_patience", c.early_stop_patience},
          {"batch_size", c.batch_size},
          {"k_folds", c.k_folds},
          {"seed", c.seed},
          {"lr_floor", c.lr_floor}};
}

std::vector<FoldSplit> make_folds(const std::vector<std::string>& subjects, int k,
                                  std::uint64_t seed) {
  if (k < 1) fail(Err::InvalidParams, "k must be >= 1");
  if (static_cast<int>(subjects.size()) < k)
    fail(Err::NotEnoughSubjects, "need at least " + std::to_string(k) + " subjects, got " +
                                     std::to_string(subjects.size()));
  std::vector<std::string> shuffled = subjects;
  Rng rng(seed);
  rng.shuffle(shuffled);

  std::vector<FoldSplit> folds(static_cast<std::size_t>(k));
  for (int f = 0; f < k; ++f) folds[static_cast<std::size_t>(f)].fold_index = f;
  for (std::size_t i = 0; i < shuffled.size(); ++i) {
    const int f = static_cast<int>(i % static_cast<std::size_t>(k));
    for (int g = 0; g < k; ++g) {
      auto& fold = folds[static_cast<std::size_t>(g)];
      (g == f ? fold.val_subjects : fold.train_subjects).push_back(shuffled[i]);
    }
  }
  return folds;
}

AdamState make_adam_state(const CnnModel& model) {
  AdamState state;
  for (const auto& layer : model.layers) {
    state.m.emplace_back(layer.weights.size(), 0.0);
    state.v.emplace_back(layer.weights.size(), 0.0);
    state.m.emplace_back(layer.bias.size(), 0.0);
    state.v.emplace_back(layer.bias.size(), 0.0);
  }
  return state;
}

void adam_update(std::vector<double>& params, const std::vector<double>& grads,
                 std::vector<double>& m, std::vector<double>& v, long long t, double lr,
                 double beta1, double beta2, double eps) {
  if (params.size() != grads.size() || params.size() != m.size() || params.size() != v.size())
    fail(Err::ShapeMismatch, "adam_update: tensor size mismatch");
  const double m_corr = 1.0 - std::pow(beta1, static_cast<double>(t));
  const double v_corr = 1.0 - std::pow(beta2, static_cast<double>(t));
  for (std::size_t i = 0; i < params.size(); ++i) {
    m[i] = beta1 * m[i] + (1.0 - beta1) * grads[i];
    v[i] = beta2 * v[i] + (1.0 - beta2) * grads[i] * grads[i];
    const double m_hat = m[i] / m_corr;
    const double v_hat = v[i] / v_corr;
    params[i] -= lr * m_hat / (std::sqrt(v_hat) + eps);
  }
}

void adam_step(CnnModel& model, const Gradients& grads, AdamState& state, double lr) {
  if (grads.size() != model.layers.size()) fail(Err::ShapeMismatch, "adam_step: layer count mismatch");
  ++state.t;
  for (std::size_t l = 0; l < model.layers.size(); ++l) {
    auto& layer = model.layers[l];
    adam_update(layer.weights, grads[l].dweights, state.m[2 * l], state.v[2 * l], state.t, lr,
                state.beta1, state.beta2, state.eps);
    adam_update(layer.bias, grads[l].dbias, state.m[2 * l + 1], state.v[2 * l + 1], state.t, lr,
                state.beta1, state.beta2, state.eps);
  }
}

double PlateauScheduler::observe(double val_loss) {
  if (val_loss < best_) {
    best_ = val_loss;
    stale_ = 0;
  } else if (++stale_ >= patience_) {
    lr_ = std::max(lr_ * factor_, floor_);
    stale_ = 0;
  }
  return lr_;
}

bool EarlyStopper::observe(double val_loss) {
  if (val_loss < best_) {
    best_ = val_loss;
    stale_ = 0;
    return false;
  }
  return ++stale_ >= patience_;
}

namespace {

double segment_loss(const CnnModel& model, const Segment& seg) {
  const FeatureMap logits = forward(model, seg.signal);
  return softmax_cross_entropy(logits, seg.mask, seg.valid_len).loss;
}

}  // namespace

TrainResult train(CnnModel model, const std::vector<Segment>& train_segments,
                  const std::vector<Segment>& val_segments, const TrainConfig& config) {
  TrainResult result;
  result.model = model;
  if (config.max_epochs <= 0) return result;
  if (train_segments.empty() || val_segments.empty())
    fail(Err::InvalidParams, "train: empty segment set");

  Rng rng(config.seed);
  AdamState adam = make_adam_state(model);
  PlateauScheduler scheduler(config.initial_lr, config.lr_patience, config.lr_factor, config.lr_floor);
  EarlyStopper stopper(config.early_stop_patience);

  std::vector<std::size_t> order(train_segments.size());
  std::iota(order.begin(), order.end(), 0);

  for (int epoch = 1; epoch <= config.max_epochs; ++epoch) {
    const double lr = scheduler.lr();
    rng.shuffle(order);

    double train_loss_sum = 0.0;
    for (std::size_t batch_start = 0; batch_start < order.size();
         batch_start += static_cast<std::size_t>(config.batch_size)) {
      const std::size_t batch_end =
          std::min(order.size(), batch_start + static_cast<std::size_t>(config.batch_size));
      Gradients batch_grads = zero_gradients_like(model);
      for (std::size_t i = batch_start; i < batch_end; ++i) {
        const Segment& seg = train_segments[order[i]];
        ForwardCache cache;
        const FeatureMap logits = forward(model, seg.signal, &cache);
        const LossGrad lg = softmax_cross_entropy(logits, seg.mask, seg.valid_len);
        train_loss_sum += lg.loss;
        accumulate_gradients(batch_grads, backward(model, cache, lg.dlogits));
      }
      scale_gradients(batch_grads, 1.0 / static_cast<double>(batch_end - batch_start));
      adam_step(model, batch_grads, adam, lr);
    }
    const double train_loss = train_loss_sum / static_cast<double>(train_segments.size());

    double val_loss_sum = 0.0;
    for (const auto& seg : val_segments) val_loss_sum += segment_loss(model, seg);
    const double val_loss = val_loss_sum / static_cast<double>(val_segments.size());

    if (!std::isfinite(train_loss) || !std::isfinite(val_loss))
      fail(Err::NonFiniteLoss, "non-finite loss at epoch " + std::to_string(epoch) +
                                   " (train=" + std::to_string(train_loss) +
                                   ", val=" + std::to_string(val_loss) + ")");

    result.history.epochs.push_back({epoch, train_loss, val_loss, lr});
    if (val_loss < result.history.best_val_loss) {
      result.history.best_val_loss = val_loss;
      result.history.best_epoch = epoch;
      result.model = model;
    }

    scheduler.observe(val_loss);
    if (stopper.observe(val_loss)) {
      result.history.stopped_early = true;
      break;
    }
  }
  return result;
}

void write_history_csv(const TrainHistory& history, const std::string& path) {
  std::ofstream out(path);
  if (!out) fail(Err::IoFailure, "cannot write " + path);
  out << "epoch,train_loss,val_loss,lr\n";
  char buf[128];
  for (const auto& e : history.epochs) {
    std::snprintf(buf, sizeof(buf), "%d,%.9g,%.9g,%.9g\n", e.epoch, e.train_loss, e.val_loss, e.lr);
    out << buf;
  }
  if (!out) fail(Err::IoFailure, "write failed for " + path);
}

}  // namespace qrs
