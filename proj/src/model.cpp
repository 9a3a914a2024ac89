#include "aplot/model.hpp"

#include <cmath>
#include <random>

#include "aplot/error.hpp"
#include "aplot/margin.hpp"

namespace aplot::model {
namespace {

void check_finite(std::span<const double> values, const char* what) {
  for (double v : values) {
    if (!std::isfinite(v)) {
      throw Error(ErrorCode::kNonFiniteInput, std::string(what) + " contains a non-finite value");
    }
  }
}

std::vector<double> read_array(const nlohmann::json& doc, const char* key, std::size_t expected) {
  if (!doc.contains(key) || !doc.at(key).is_array()) {
    throw Error(ErrorCode::kParseError, std::string("head JSON missing array '") + key + "'");
  }
  std::vector<double> out;
  for (const auto& v : doc.at(key)) {
    if (!v.is_number()) {
      throw Error(ErrorCode::kParseError, std::string("non-numeric entry in '") + key + "'");
    }
    out.push_back(v.get<double>());
  }
  if (out.size() != expected) {
    throw Error(ErrorCode::kDimensionMismatch,
                std::string("'") + key + "' has " + std::to_string(out.size()) +
                    " entries, expected " + std::to_string(expected));
  }
  check_finite(out, key);
  return out;
}

double read_number(const nlohmann::json& doc, const char* key) {
  if (!doc.contains(key) || !doc.at(key).is_number()) {
    throw Error(ErrorCode::kParseError, std::string("head JSON missing number '") + key + "'");
  }
  return doc.at(key).get<double>();
}

}  // namespace

const char* architecture_name(Architecture a) {
  return a == Architecture::kLinear ? "linear" : "mlp";
}

Architecture parse_architecture(const std::string& name) {
  if (name == "linear") return Architecture::kLinear;
  if (name == "mlp") return Architecture::kMlp;
  throw Error(ErrorCode::kInvalidConfig, "unknown head architecture '" + name + "'");
}

RewardHead::RewardHead(Architecture arch, std::size_t input_dim, std::size_t hidden_dim)
    : arch_(arch), input_dim_(input_dim), hidden_dim_(hidden_dim) {
  if (input_dim == 0) throw Error(ErrorCode::kInvalidConfig, "input_dim must be >= 1");
  if (arch == Architecture::kLinear) {
    hidden_dim_ = 0;
    params_.assign(input_dim + 1, 0.0);
  } else {
    if (hidden_dim == 0) throw Error(ErrorCode::kInvalidConfig, "mlp hidden_dim must be >= 1");
    params_.assign(hidden_dim * input_dim + 2 * hidden_dim + 1, 0.0);
  }
}

RewardHead RewardHead::linear(std::size_t input_dim) {
  return RewardHead(Architecture::kLinear, input_dim, 0);
}

RewardHead RewardHead::mlp(std::size_t input_dim, std::size_t hidden_dim) {
  return RewardHead(Architecture::kMlp, input_dim, hidden_dim);
}

RewardHead RewardHead::random(Architecture arch, std::size_t input_dim, std::size_t hidden_dim,
                              double scale, std::uint64_t seed) {
  RewardHead head(arch, input_dim, hidden_dim);
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> normal(0.0, 1.0);
  for (double& p : head.params_) p = scale * normal(rng);
  return head;
}

void RewardHead::check_dim(std::span<const double> features) const {
  if (features.size() != input_dim_) {
    throw Error(ErrorCode::kDimensionMismatch, "features have dimension " +
                                                   std::to_string(features.size()) +
                                                   ", head expects " + std::to_string(input_dim_));
  }
}

double RewardHead::reward(std::span<const double> features) const {
  check_dim(features);
  const std::size_t d = input_dim_;
  if (arch_ == Architecture::kLinear) {
    double r = params_[d];
    for (std::size_t k = 0; k < d; ++k) r += params_[k] * features[k];
    return r;
  }
  const std::size_t h = hidden_dim_;
  const double* w = params_.data();
  const double* c = w + h * d;
  const double* v = c + h;
  double r = v[h];
  for (std::size_t u = 0; u < h; ++u) {
    double pre = c[u];
    for (std::size_t k = 0; k < d; ++k) pre += w[u * d + k] * features[k];
    r += v[u] * std::tanh(pre);
  }
  return r;
}

double RewardHead::accumulate_gradient(std::span<const double> features, double scale,
                                       std::span<double> grad) const {
  check_dim(features);
  if (grad.size() != params_.size()) {
    throw Error(ErrorCode::kDimensionMismatch, "gradient buffer has the wrong size");
  }
  const std::size_t d = input_dim_;
  if (arch_ == Architecture::kLinear) {
    double r = params_[d];
    for (std::size_t k = 0; k < d; ++k) {
      r += params_[k] * features[k];
      grad[k] += scale * features[k];
    }
    grad[d] += scale;
    return r;
  }
  const std::size_t h = hidden_dim_;
  const double* w = params_.data();
  const double* c = w + h * d;
  const double* v = c + h;
  double* gw = grad.data();
  double* gc = gw + h * d;
  double* gv = gc + h;
  double r = v[h];
  for (std::size_t u = 0; u < h; ++u) {
    double pre = c[u];
    for (std::size_t k = 0; k < d; ++k) pre += w[u * d + k] * features[k];
    const double act = std::tanh(pre);
    r += v[u] * act;
    gv[u] += scale * act;
    const double back = scale * v[u] * (1.0 - act * act);
    gc[u] += back;
    for (std::size_t k = 0; k < d; ++k) gw[u * d + k] += back * features[k];
  }
  gv[h] += scale;
  return r;
}

nlohmann::json RewardHead::to_json() const {
  nlohmann::json doc;
  doc["architecture"] = architecture_name(arch_);
  doc["input_dim"] = input_dim_;
  const std::size_t d = input_dim_;
  if (arch_ == Architecture::kLinear) {
    doc["weights"] = std::vector<double>(params_.begin(), params_.begin() + d);
    doc["bias"] = params_[d];
    return doc;
  }
  const std::size_t h = hidden_dim_;
  auto it = params_.begin();
  doc["hidden_dim"] = h;
  doc["hidden_weights"] = std::vector<double>(it, it + h * d);
  it += h * d;
  doc["hidden_bias"] = std::vector<double>(it, it + h);
  it += h;
  doc["output_weights"] = std::vector<double>(it, it + h);
  doc["output_bias"] = params_.back();
  return doc;
}

RewardHead RewardHead::from_json(const nlohmann::json& doc) {
  if (!doc.is_object() || !doc.contains("architecture") || !doc.at("architecture").is_string()) {
    throw Error(ErrorCode::kParseError, "head JSON needs a string 'architecture'");
  }
  const Architecture arch = parse_architecture(doc.at("architecture").get<std::string>());
  if (!doc.contains("input_dim") || !doc.at("input_dim").is_number_unsigned()) {
    throw Error(ErrorCode::kParseError, "head JSON needs a positive integer 'input_dim'");
  }
  const auto d = doc.at("input_dim").get<std::size_t>();
  if (arch == Architecture::kLinear) {
    RewardHead head = linear(d);
    const auto w = read_array(doc, "weights", d);
    std::copy(w.begin(), w.end(), head.params_.begin());
    head.params_[d] = read_number(doc, "bias");
    check_finite(head.params_, "bias");
    return head;
  }
  if (!doc.contains("hidden_dim") || !doc.at("hidden_dim").is_number_unsigned()) {
    throw Error(ErrorCode::kParseError, "mlp head JSON needs 'hidden_dim'");
  }
  const auto h = doc.at("hidden_dim").get<std::size_t>();
  RewardHead head = mlp(d, h);
  auto out = head.params_.begin();
  for (const auto& [key, n] : {std::pair{"hidden_weights", h * d}, std::pair{"hidden_bias", h},
                               std::pair{"output_weights", h}}) {
    const auto values = read_array(doc, key, n);
    out = std::copy(values.begin(), values.end(), out);
  }
  head.params_.back() = read_number(doc, "output_bias");
  check_finite(head.params_, "output_bias");
  return head;
}

double neg_log_sigmoid(double x) {
  // softplus(-x) = ln(1 + e^{-x})
  if (x < 0.0) return -x + std::log1p(std::exp(x));
  return std::log1p(std::exp(-x));
}

LossReport bt_margin_loss(std::span<const double> rewards_chosen,
                          std::span<const double> rewards_rejected,
                          std::span<const double> margins) {
  const std::size_t b = rewards_chosen.size();
  if (rewards_rejected.size() != b || margins.size() != b) {
    throw Error(ErrorCode::kShapeMismatch, "rewards and margins differ in length");
  }
  check_finite(rewards_chosen, "chosen rewards");
  check_finite(rewards_rejected, "rejected rewards");
  check_finite(margins, "margins");
  LossReport report;
  report.per_sample_losses.resize(b);
  report.per_sample_update_signal.resize(b);
  double total = 0.0;
  for (std::size_t i = 0; i < b; ++i) {
    const double x = (rewards_chosen[i] - rewards_rejected[i]) - margins[i];
    report.per_sample_losses[i] = neg_log_sigmoid(x);
    report.per_sample_update_signal[i] = margin::sigmoid(-x);
    total += report.per_sample_losses[i];
  }
  report.loss = b ? total / static_cast<double>(b) : 0.0;
  return report;
}

LossReport bt_loss(std::span<const double> rewards_chosen,
                   std::span<const double> rewards_rejected) {
  const std::size_t b = rewards_chosen.size();
  if (rewards_rejected.size() != b) {
    throw Error(ErrorCode::kShapeMismatch, "reward vectors differ in length");
  }
  check_finite(rewards_chosen, "chosen rewards");
  check_finite(rewards_rejected, "rejected rewards");
  LossReport report;
  report.per_sample_losses.resize(b);
  report.per_sample_update_signal.resize(b);
  double total = 0.0;
  for (std::size_t i = 0; i < b; ++i) {
    const double s = rewards_chosen[i] - rewards_rejected[i];
    report.per_sample_losses[i] = neg_log_sigmoid(s);
    report.per_sample_update_signal[i] = margin::sigmoid(-s);
    total += report.per_sample_losses[i];
  }
  report.loss = b ? total / static_cast<double>(b) : 0.0;
  return report;
}

LossGradient loss_gradients(const RewardHead& head, const Batch& batch,
                            std::span<const double> margins) {
  const std::size_t b = batch.size();
  if (batch.rejected.size() != b || margins.size() != b) {
    throw Error(ErrorCode::kShapeMismatch, "batch and margins differ in length");
  }
  LossGradient out;
  out.rewards_chosen.resize(b);
  out.rewards_rejected.resize(b);
  for (std::size_t i = 0; i < b; ++i) {
    out.rewards_chosen[i] = head.reward(batch.chosen[i]);
    out.rewards_rejected[i] = head.reward(batch.rejected[i]);
  }
  out.report = bt_margin_loss(out.rewards_chosen, out.rewards_rejected, margins);
  out.gradient.assign(head.num_parameters(), 0.0);
  const double inv_b = 1.0 / static_cast<double>(b);
  for (std::size_t i = 0; i < b; ++i) {
    // dl/ds = sigmoid(s - mu) - 1 = -(update signal)
    const double coef = -out.report.per_sample_update_signal[i] * inv_b;
    head.accumulate_gradient(batch.chosen[i], coef, out.gradient);
    head.accumulate_gradient(batch.rejected[i], -coef, out.gradient);
  }
  return out;
}

}  // namespace aplot::model
