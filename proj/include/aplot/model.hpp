#ifndef APLOT_MODEL_HPP_
#define APLOT_MODEL_HPP_

#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include <json.hpp>

namespace aplot::model {

enum class Architecture { kLinear, kMlp };

const char* architecture_name(Architecture a);
Architecture parse_architecture(const std::string& name);

/// Scalar scorer r(z) over a feature vector.
///
/// Linear:  r(z) = w.z + b
/// Mlp:     r(z) = v.tanh(W z + c) + b   (one hidden layer of width H)
///
/// Parameters live in one flat vector so optimizers and gradient checks can
/// treat every architecture the same way. Layout:
///   linear: [w (d), b]
///   mlp:    [W (H*d, row-major), c (H), v (H), b]
class RewardHead {
 public:
  RewardHead() = default;
  static RewardHead linear(std::size_t input_dim);
  static RewardHead mlp(std::size_t input_dim, std::size_t hidden_dim);
  /// Gaussian init with standard deviation `scale`, seeded.
  static RewardHead random(Architecture arch, std::size_t input_dim, std::size_t hidden_dim,
                           double scale, std::uint64_t seed);

  Architecture architecture() const noexcept { return arch_; }
  std::size_t input_dim() const noexcept { return input_dim_; }
  std::size_t hidden_dim() const noexcept { return hidden_dim_; }
  std::size_t num_parameters() const noexcept { return params_.size(); }

  std::span<const double> parameters() const noexcept { return params_; }
  std::span<double> parameters() noexcept { return params_; }

  /// Throws kDimensionMismatch if `features` has the wrong length.
  double reward(std::span<const double> features) const;

  /// Adds scale * dr/dtheta at `features` into `grad` and returns r(features).
  double accumulate_gradient(std::span<const double> features, double scale,
                             std::span<double> grad) const;

  nlohmann::json to_json() const;
  static RewardHead from_json(const nlohmann::json& doc);

  friend bool operator==(const RewardHead&, const RewardHead&) = default;

 private:
  RewardHead(Architecture arch, std::size_t input_dim, std::size_t hidden_dim);
  void check_dim(std::span<const double> features) const;

  Architecture arch_ = Architecture::kLinear;
  std::size_t input_dim_ = 0;
  std::size_t hidden_dim_ = 0;
  std::vector<double> params_;
};

/// -ln sigmoid(x), computed without overflow for large |x|.
double neg_log_sigmoid(double x);

struct LossReport {
  double loss = 0.0;
  std::vector<double> per_sample_losses;
  /// 1 - sigmoid(s_i - mu_i): the pull on s_i under gradient descent.
  std::vector<double> per_sample_update_signal;
};

/// Margin-adjusted Bradley-Terry loss, mean_i -ln sigmoid(rw_i - rl_i - mu_i).
LossReport bt_margin_loss(std::span<const double> rewards_chosen,
                          std::span<const double> rewards_rejected,
                          std::span<const double> margins);

/// Plain Bradley-Terry loss, mean_i -ln sigmoid(rw_i - rl_i).
LossReport bt_loss(std::span<const double> rewards_chosen,
                   std::span<const double> rewards_rejected);

/// Borrowed views of feature vectors; the owning dataset must outlive it.
struct Batch {
  std::vector<std::span<const double>> chosen;
  std::vector<std::span<const double>> rejected;
  std::size_t size() const noexcept { return chosen.size(); }
};

struct LossGradient {
  LossReport report;
  std::vector<double> rewards_chosen;
  std::vector<double> rewards_rejected;
  std::vector<double> gradient;  // same layout as RewardHead::parameters()
};

/// Gradient of the batch-mean margin loss w.r.t. every head parameter.
/// Margins are constants here: nothing flows back into them.
LossGradient loss_gradients(const RewardHead& head, const Batch& batch,
                            std::span<const double> margins);

}  // namespace aplot::model

#endif  // APLOT_MODEL_HPP_
