#include "aplot/trainer.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "aplot/error.hpp"
#include "aplot/eval.hpp"
#include "aplot/format.hpp"
#include "aplot/rng.hpp"

namespace aplot::trainer {
namespace {

class ParameterUpdater {
 public:
  ParameterUpdater(const TrainConfig& config, std::size_t n_params)
      : config_(config), m_(n_params, 0.0), v_(n_params, 0.0) {}

  void apply(std::span<double> params, std::span<const double> grad) {
    const double lr = config_.learning_rate;
    if (config_.optimizer == Optimizer::kSgd) {
      for (std::size_t k = 0; k < params.size(); ++k) params[k] -= lr * grad[k];
      return;
    }
    ++t_;
    const double b1 = config_.adam_beta1;
    const double b2 = config_.adam_beta2;
    const double c1 = 1.0 - std::pow(b1, static_cast<double>(t_));
    const double c2 = 1.0 - std::pow(b2, static_cast<double>(t_));
    for (std::size_t k = 0; k < params.size(); ++k) {
      m_[k] = b1 * m_[k] + (1.0 - b1) * grad[k];
      v_[k] = b2 * v_[k] + (1.0 - b2) * grad[k] * grad[k];
      params[k] -= lr * (m_[k] / c1) / (std::sqrt(v_[k] / c2) + config_.adam_epsilon);
    }
  }

 private:
  const TrainConfig& config_;
  std::vector<double> m_, v_;
  std::size_t t_ = 0;
};

}  // namespace

const char* optimizer_name(Optimizer o) { return o == Optimizer::kSgd ? "sgd" : "adam"; }

Optimizer parse_optimizer(const std::string& name) {
  if (name == "sgd") return Optimizer::kSgd;
  if (name == "adam") return Optimizer::kAdam;
  throw Error(ErrorCode::kInvalidConfig, "unknown optimizer '" + name + "'");
}

void TrainConfig::validate() const {
  auto fail = [](const std::string& why) { throw Error(ErrorCode::kInvalidConfig, why); };
  if (batch_size < 1) fail("batch_size must be >= 1");
  if (max_steps == 0 && !(epochs > 0.0)) fail("epochs must be > 0");
  if (!(learning_rate > 0.0)) fail("learning_rate must be > 0");
  if (!(gamma >= 0.0 && gamma <= 1.0)) {
    throw Error(ErrorCode::kGammaOutOfRange, "gamma must lie in [0, 1]");
  }
  if (!(beta > 0.0)) fail("beta must be > 0");
  if (!std::isfinite(hard_margin_value)) fail("hard_margin_value must be finite");
  if (sinkhorn_max_iters < 1) fail("sinkhorn_max_iters must be >= 1");
  if (!(sinkhorn_tolerance > 0.0)) fail("sinkhorn_tolerance must be > 0");
  if (eval_every_steps < 1) fail("eval_every_steps must be >= 1");
  if (!(adam_beta1 >= 0.0 && adam_beta1 < 1.0) || !(adam_beta2 >= 0.0 && adam_beta2 < 1.0)) {
    fail("adam betas must lie in [0, 1)");
  }
  if (!(adam_epsilon > 0.0)) fail("adam_epsilon must be > 0");
  if (architecture == model::Architecture::kMlp && hidden_dim < 1) fail("hidden_dim must be >= 1");
  if (!(init_scale >= 0.0)) fail("init_scale must be >= 0");
}

margin::MarginOptions TrainConfig::margin_options() const {
  margin::MarginOptions opt;
  opt.strategy = margin_strategy;
  opt.sinkhorn.beta = beta;
  opt.sinkhorn.max_iters = sinkhorn_max_iters;
  opt.sinkhorn.tolerance = sinkhorn_tolerance;
  opt.hard_value = hard_margin_value;
  opt.mass = mass_normalization;
  opt.point = point_normalization;
  return opt;
}

MinibatchSampler::MinibatchSampler(std::size_t n, std::size_t batch_size, std::uint64_t seed)
    : n_(n), batch_size_(batch_size), rng_(seed) {
  if (n == 0) throw Error(ErrorCode::kEmptyDataset, "cannot sample from an empty dataset");
  if (batch_size == 0 || batch_size > n) {
    throw Error(ErrorCode::kBatchTooLarge, "batch size " + std::to_string(batch_size) +
                                               " for a dataset of " + std::to_string(n));
  }
  order_.resize(n);
  reshuffle();
}

void MinibatchSampler::reshuffle() {
  std::iota(order_.begin(), order_.end(), std::size_t{0});
  std::shuffle(order_.begin(), order_.end(), rng_);
  cursor_ = 0;
}

std::vector<std::size_t> MinibatchSampler::next() {
  if (cursor_ >= n_) {
    reshuffle();
    ++epoch_;
  }
  const std::size_t end = std::min(n_, cursor_ + batch_size_);
  std::vector<std::size_t> batch(order_.begin() + static_cast<std::ptrdiff_t>(cursor_),
                                 order_.begin() + static_cast<std::ptrdiff_t>(end));
  cursor_ = end;
  return batch;
}

std::optional<std::size_t> TrainTrace::steps_to_accuracy(double threshold) const {
  for (const auto& r : records) {
    if (r.validation_accuracy && *r.validation_accuracy >= threshold) return r.step;
  }
  return std::nullopt;
}

std::string TrainTrace::to_csv() const {
  std::string out =
      "step,epoch_fraction,train_loss,mean_margin,margin_stddev,validation_accuracy,"
      "mean_reward_gap,sinkhorn_residual,sinkhorn_iterations\n";
  for (const auto& r : records) {
    out += std::to_string(r.step);
    out += ',' + format_real(r.epoch_fraction);
    out += ',' + format_real(r.train_loss);
    out += ',' + format_real(r.mean_margin);
    out += ',' + format_real(r.margin_stddev);
    out += ',' + (r.validation_accuracy ? format_real(*r.validation_accuracy) : std::string());
    out += ',' + format_real(r.mean_reward_gap);
    out += ',' + format_real(r.sinkhorn_residual);
    out += ',' + std::to_string(r.sinkhorn_iterations);
    out += '\n';
  }
  return out;
}

model::Batch make_batch(const data::Dataset& dataset, const std::vector<std::size_t>& indices) {
  model::Batch batch;
  batch.chosen.reserve(indices.size());
  batch.rejected.reserve(indices.size());
  for (std::size_t i : indices) {
    batch.chosen.emplace_back(dataset.pairs[i].chosen_features);
    batch.rejected.emplace_back(dataset.pairs[i].rejected_features);
  }
  return batch;
}

margin::MarginVector batch_margins(const TrainConfig& config, const model::Batch& batch,
                                   std::span<const double> rewards_chosen,
                                   std::span<const double> rewards_rejected) {
  const std::size_t b = batch.size();
  const auto options = config.margin_options();
  if (config.margin_strategy == margin::Strategy::kNone ||
      config.margin_strategy == margin::Strategy::kHard) {
    // Constant strategies never look at the cost matrix.
    return margin::estimate_margins({Matrix(b, b), config.gamma}, options);
  }
  const Matrix sim = margin::similarity_matrix(batch.chosen, batch.rejected);
  const Matrix diff = margin::reward_difference_matrix(rewards_chosen, rewards_rejected);
  const auto cost = margin::build_cost_matrix(sim, diff, config.gamma, config.similarity_mode);
  return margin::estimate_margins(cost, options);
}

TrainResult train(const TrainConfig& config, const data::Dataset& train_set,
                  const data::Dataset& validation_set, const CheckpointFn& on_checkpoint) {
  config.validate();
  if (train_set.empty()) throw Error(ErrorCode::kEmptyDataset, "training set is empty");
  train_set.check_dimensions();
  validation_set.check_dimensions();
  const std::size_t dim = train_set.dim();
  if (!validation_set.empty() && validation_set.dim() != dim) {
    throw Error(ErrorCode::kDimensionMismatch, "validation and training dimensions differ");
  }

  MinibatchSampler sampler(train_set.size(), config.batch_size,
                           derive_seed(config.seed, stream::kShuffle));
  const std::size_t per_epoch = sampler.batches_per_epoch();
  const std::size_t total_steps = std::max<std::size_t>(
      1, config.max_steps > 0 ? config.max_steps
                              : static_cast<std::size_t>(std::ceil(
                                    config.epochs * static_cast<double>(per_epoch) - 1e-9)));

  TrainResult result;
  result.head = model::RewardHead::random(config.architecture, dim, config.hidden_dim,
                                          config.init_scale,
                                          derive_seed(config.seed, stream::kHeadInit));
  ParameterUpdater updater(config, result.head.num_parameters());

  for (std::size_t step = 1; step <= total_steps; ++step) {
    const model::Batch batch = make_batch(train_set, sampler.next());
    const std::size_t b = batch.size();

    std::vector<double> rw(b), rl(b);
    for (std::size_t i = 0; i < b; ++i) {
      rw[i] = result.head.reward(batch.chosen[i]);
      rl[i] = result.head.reward(batch.rejected[i]);
    }
    const margin::MarginVector mu = batch_margins(config, batch, rw, rl);
    const model::LossGradient lg = model::loss_gradients(result.head, batch, mu.values);
    if (!std::isfinite(lg.report.loss)) {
      throw Error(ErrorCode::kNonFiniteInput, "training loss became non-finite at step " +
                                                  std::to_string(step));
    }

    TraceRecord rec;
    rec.step = step;
    rec.epoch_fraction = static_cast<double>(step) / static_cast<double>(per_epoch);
    rec.train_loss = lg.report.loss;
    const double inv_b = 1.0 / static_cast<double>(b);
    double mean_mu = 0.0, mean_gap = 0.0;
    for (std::size_t i = 0; i < b; ++i) {
      mean_mu += mu.values[i];
      mean_gap += rw[i] - rl[i];
    }
    mean_mu *= inv_b;
    double var_mu = 0.0;
    for (double m : mu.values) var_mu += (m - mean_mu) * (m - mean_mu);
    rec.mean_margin = mean_mu;
    rec.margin_stddev = std::sqrt(var_mu * inv_b);
    rec.mean_reward_gap = mean_gap * inv_b;
    rec.sinkhorn_residual = mu.sinkhorn_residual;
    rec.sinkhorn_iterations = mu.sinkhorn_iterations;

    updater.apply(result.head.parameters(), lg.gradient);

    const bool evaluate = step % config.eval_every_steps == 0 || step == total_steps;
    if (evaluate && !validation_set.empty()) {
      rec.validation_accuracy = eval::pairwise_accuracy(result.head, validation_set);
      result.final_validation_accuracy = rec.validation_accuracy;
    }
    result.trace.records.push_back(rec);
    if (evaluate && on_checkpoint) on_checkpoint(step, result.head, result.trace);
  }
  return result;
}

}  // namespace aplot::trainer
