#pragma once

#include <functional>
#include <iosfwd>

#include "slnl/model.hpp"
#include "slnl/synth_data.hpp"

namespace slnl {

struct TrainConfig {
  double lr0 = 1e-3;
  double lr_decay = 0.98;  // multiplied in per epoch
  double weight_decay = 5e-4;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
  std::size_t epochs = 50;
  std::size_t batch_size = 16;
  std::uint64_t seed = 42;

  void validate() const;
  ConfigMap to_config() const;
  static TrainConfig from_config(ConfigReader& reader);
};

struct EpochMetrics {
  std::size_t epoch = 0;  // 1-based
  double lr = 0.0;
  double train_loss = 0.0;
  double train_acc = 0.0;
  double val_loss = 0.0;  // NaN when no validation set was given
  double val_acc = 0.0;
};

struct TrainResult {
  std::vector<EpochMetrics> history;
  double wall_seconds = 0.0;
  bool stopped_early = false;
};

/// Adam with decoupled weight decay over the learnable entries of a store.
class AdamW {
 public:
  AdamW(const ParamStore& store, const TrainConfig& cfg);
  /// grad_scale multiplies the stored gradient sums (1/batch for averaging).
  void step(ParamStore& store, double lr, double grad_scale);

 private:
  TrainConfig cfg_;
  std::vector<Tensor> m_, v_;
  std::size_t t_ = 0;
};

using StopCondition = std::function<bool(const EpochMetrics&)>;

/// Minimizes the three-classifier total loss with Adam and per-epoch
/// exponential learning-rate decay. Fully deterministic given the seeds.
/// Throws on divergence (non-finite loss).
TrainResult train(Model& model, const std::vector<SkeletonSequence>& train_set,
                  const std::vector<SkeletonSequence>* val_set, const TrainConfig& cfg,
                  std::ostream* log = nullptr, const StopCondition& stop = {});

struct EvalResult {
  double accuracy = 0.0;
  double mean_loss = 0.0;
  std::vector<std::size_t> confusion;  // row-major (true, predicted)
  std::size_t classes = 0;
};

std::size_t predict(Model& model, const SkeletonSequence& sample);
EvalResult evaluate(Model& model, const std::vector<SkeletonSequence>& samples);

/// Fraction of samples whose concatenated-feature classifier clears the
/// margin: z_true - max_{c != true} z_c >= m.
double margin_fraction(Model& model, const std::vector<SkeletonSequence>& samples, double m);

}  // namespace slnl
