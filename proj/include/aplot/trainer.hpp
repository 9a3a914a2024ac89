#ifndef APLOT_TRAINER_HPP_
#define APLOT_TRAINER_HPP_

#include <cstdint>
#include <functional>
#include <optional>
#include <random>
#include <string>
#include <vector>

#include "aplot/data.hpp"
#include "aplot/margin.hpp"
#include "aplot/model.hpp"

namespace aplot::trainer {

enum class Optimizer { kSgd, kAdam };

const char* optimizer_name(Optimizer o);
Optimizer parse_optimizer(const std::string& name);

struct TrainConfig {
  std::size_t batch_size = 32;
  double epochs = 1.0;
  std::size_t max_steps = 0;  // > 0 overrides epochs
  double learning_rate = 1e-2;
  double gamma = 0.5;
  double beta = 0.1;
  margin::Strategy margin_strategy = margin::Strategy::kAplot;
  double hard_margin_value = 1.0;
  margin::SimilarityMode similarity_mode = margin::SimilarityMode::kRemapped;
  margin::MassNormalization mass_normalization = margin::MassNormalization::kUnitRows;
  margin::PointNormalization point_normalization = margin::PointNormalization::kMean;
  int sinkhorn_max_iters = 10000;
  double sinkhorn_tolerance = 1e-9;
  std::uint64_t seed = 0;
  std::size_t eval_every_steps = 50;
  Optimizer optimizer = Optimizer::kSgd;
  double adam_beta1 = 0.9;
  double adam_beta2 = 0.999;
  double adam_epsilon = 1e-8;
  model::Architecture architecture = model::Architecture::kLinear;
  std::size_t hidden_dim = 16;
  double init_scale = 0.01;

  void validate() const;
  margin::MarginOptions margin_options() const;
};

/// Seeded epoch-wise sampler: every epoch is a fresh permutation drawn from
/// one stream, consumed in batches of `batch_size`; the short tail batch is
/// kept.
class MinibatchSampler {
 public:
  /// Throws kEmptyDataset when n == 0, kBatchTooLarge when batch_size > n.
  MinibatchSampler(std::size_t n, std::size_t batch_size, std::uint64_t seed);

  std::vector<std::size_t> next();
  std::size_t epoch() const noexcept { return epoch_; }
  std::size_t batches_per_epoch() const noexcept { return (n_ + batch_size_ - 1) / batch_size_; }

 private:
  void reshuffle();

  std::size_t n_;
  std::size_t batch_size_;
  std::mt19937_64 rng_;
  std::vector<std::size_t> order_;
  std::size_t cursor_ = 0;
  std::size_t epoch_ = 0;
};

/// One step of the trace. validation_accuracy is empty on steps without an
/// evaluation.
struct TraceRecord {
  std::size_t step = 0;
  double epoch_fraction = 0.0;
  double train_loss = 0.0;
  double mean_margin = 0.0;
  double margin_stddev = 0.0;
  std::optional<double> validation_accuracy;
  double mean_reward_gap = 0.0;
  double sinkhorn_residual = 0.0;
  int sinkhorn_iterations = 0;
};

struct TrainTrace {
  std::vector<TraceRecord> records;

  /// First step whose validation accuracy reached `threshold`.
  std::optional<std::size_t> steps_to_accuracy(double threshold) const;
  std::string to_csv() const;
};

struct TrainResult {
  model::RewardHead head;
  TrainTrace trace;
  std::optional<double> final_validation_accuracy;
};

/// Called after every evaluation step with the current state.
using CheckpointFn =
    std::function<void(std::size_t step, const model::RewardHead&, const TrainTrace&)>;

/// Mini-batch reward-model training with per-step margins:
///   rewards -> similarities -> cost matrix -> transport plan -> margins
///   -> margin-adjusted ranking loss -> parameter update.
/// Margins are recomputed from the current head at every step and treated
/// as constants in the backward pass.
TrainResult train(const TrainConfig& config, const data::Dataset& train_set,
                  const data::Dataset& validation_set, const CheckpointFn& on_checkpoint = {});

/// The batch a training step sees: borrowed views into `dataset`.
model::Batch make_batch(const data::Dataset& dataset, const std::vector<std::size_t>& indices);

/// Margins for one batch under `config`, given the rewards of the current head.
margin::MarginVector batch_margins(const TrainConfig& config, const model::Batch& batch,
                                   std::span<const double> rewards_chosen,
                                   std::span<const double> rewards_rejected);

}  // namespace aplot::trainer

#endif  // APLOT_TRAINER_HPP_
