#pragma once

#include <cstdint>
#include <limits>
#include <string>
#include <vector>

#include "json.hpp"
#include "qrs/cnn.hpp"

namespace qrs {

struct TrainConfig {
  int max_epochs = 50;
  double initial_lr = 0.01;
  double lr_factor = 0.1;
  int lr_patience = 5;          // epochs without val-loss decrease before lr drop
  int early_stop_patience = 7;  // epochs without val-loss improvement before stop
  int batch_size = 32;
  int k_folds = 5;
  std::uint64_t seed = 1;
  double lr_floor = 1e-6;
};

TrainConfig train_config_from_json(const nlohmann::json& j);
nlohmann::json train_config_to_json(const TrainConfig& config);

// Subject-wise split: fold i's subjects validate, the rest train. Every
// record of a subject lives entirely on one side.
struct FoldSplit {
  int fold_index = 0;
  std::vector<std::string> train_subjects;
  std::vector<std::string> val_subjects;
};

std::vector<FoldSplit> make_folds(const std::vector<std::string>& subjects, int k,
                                  std::uint64_t seed);

struct AdamState {
  std::vector<std::vector<double>> m;  // first moments, one tensor per parameter tensor
  std::vector<std::vector<double>> v;  // second moments
  long long t = 0;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
};

AdamState make_adam_state(const CnnModel& model);

// Single-tensor Adam update with bias correction; t is the 1-based step.
void adam_update(std::vector<double>& params, const std::vector<double>& grads,
                 std::vector<double>& m, std::vector<double>& v, long long t, double lr,
                 double beta1 = 0.9, double beta2 = 0.999, double eps = 1e-8);

// Whole-model step: advances state.t once and updates every layer tensor.
void adam_step(CnnModel& model, const Gradients& grads, AdamState& state, double lr);

// Drops lr by `factor` after `patience` consecutive epochs without a strictly
// lower validation loss; never below `floor`.
class PlateauScheduler {
 public:
  PlateauScheduler(double initial_lr, int patience, double factor, double floor = 1e-6)
      : lr_(initial_lr), patience_(patience), factor_(factor), floor_(floor) {}

  double observe(double val_loss);
  double lr() const { return lr_; }

 private:
  double lr_;
  int patience_;
  double factor_;
  double floor_;
  double best_ = std::numeric_limits<double>::infinity();
  int stale_ = 0;
};

// Independent best tracker; returns true (stop) on the Nth consecutive epoch
// without strict improvement.
class EarlyStopper {
 public:
  explicit EarlyStopper(int patience) : patience_(patience) {}

  bool observe(double val_loss);

 private:
  int patience_;
  double best_ = std::numeric_limits<double>::infinity();
  int stale_ = 0;
};

struct EpochStats {
  int epoch = 0;  // 1-based
  double train_loss = 0.0;
  double val_loss = 0.0;
  double lr = 0.0;  // rate used during this epoch
};

struct TrainHistory {
  std::vector<EpochStats> epochs;
  bool stopped_early = false;
  int best_epoch = 0;  // 1-based; 0 when no epoch ran
  double best_val_loss = std::numeric_limits<double>::infinity();
};

struct TrainResult {
  CnnModel model;  // snapshot of the lowest-val-loss epoch
  TrainHistory history;
};

// Epoch loop: seeded shuffle, mean-reduced batch gradients, Adam step, then
// validation loss, scheduler update and early-stop check in that order.
TrainResult train(CnnModel model, const std::vector<Segment>& train_segments,
                  const std::vector<Segment>& val_segments, const TrainConfig& config);

void write_history_csv(const TrainHistory& history, const std::string& path);

}  // namespace qrs
