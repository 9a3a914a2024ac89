#include "aplot/margin.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>

#include "aplot/error.hpp"

namespace aplot::margin {

const char* strategy_name(Strategy s) {
  switch (s) {
    case Strategy::kAplot: return "aplot";
    case Strategy::kPoint: return "point";
    case Strategy::kHard: return "hard";
    case Strategy::kNone: return "none";
  }
  return "unknown";
}

Strategy parse_strategy(const std::string& name) {
  std::string lower = name;
  std::transform(lower.begin(), lower.end(), lower.begin(),
                 [](unsigned char c) { return static_cast<char>(std::tolower(c)); });
  if (lower == "aplot") return Strategy::kAplot;
  if (lower == "point" || lower == "pointmargin") return Strategy::kPoint;
  if (lower == "hard" || lower == "hardmargin") return Strategy::kHard;
  if (lower == "none" || lower == "vanilla") return Strategy::kNone;
  throw Error(ErrorCode::kInvalidConfig, "unknown margin strategy '" + name + "'");
}

double sigmoid(double x) {
  if (x >= 0.0) return 1.0 / (1.0 + std::exp(-x));
  const double e = std::exp(x);
  return e / (1.0 + e);
}

double cosine_similarity(std::span<const double> a, std::span<const double> b) {
  if (a.size() != b.size()) {
    throw Error(ErrorCode::kDimensionMismatch, "cosine_similarity on vectors of length " +
                                                   std::to_string(a.size()) + " and " +
                                                   std::to_string(b.size()));
  }
  double dot = 0.0, aa = 0.0, bb = 0.0;
  for (std::size_t k = 0; k < a.size(); ++k) {
    dot += a[k] * b[k];
    aa += a[k] * a[k];
    bb += b[k] * b[k];
  }
  const double na = std::sqrt(aa);
  const double nb = std::sqrt(bb);
  if (!(na >= 1e-12) || !(nb >= 1e-12)) {
    throw Error(ErrorCode::kZeroVector, "cosine similarity of a zero vector");
  }
  return std::clamp(dot / (na * nb), -1.0, 1.0);
}

Matrix similarity_matrix(std::span<const std::span<const double>> chosen,
                         std::span<const std::span<const double>> rejected) {
  if (chosen.size() != rejected.size()) {
    throw Error(ErrorCode::kShapeMismatch, "chosen and rejected batches differ in size");
  }
  Matrix s(chosen.size(), rejected.size());
  for (std::size_t i = 0; i < chosen.size(); ++i) {
    for (std::size_t j = 0; j < rejected.size(); ++j) {
      s(i, j) = cosine_similarity(chosen[i], rejected[j]);
    }
  }
  return s;
}

Matrix reward_difference_matrix(std::span<const double> rewards_chosen,
                                std::span<const double> rewards_rejected) {
  if (rewards_chosen.size() != rewards_rejected.size()) {
    throw Error(ErrorCode::kShapeMismatch, "reward vectors differ in length");
  }
  for (double r : rewards_chosen) {
    if (!std::isfinite(r)) throw Error(ErrorCode::kNonFiniteInput, "chosen reward not finite");
  }
  for (double r : rewards_rejected) {
    if (!std::isfinite(r)) throw Error(ErrorCode::kNonFiniteInput, "rejected reward not finite");
  }
  const std::size_t b = rewards_chosen.size();
  Matrix d(b, b);
  for (std::size_t i = 0; i < b; ++i) {
    for (std::size_t j = 0; j < b; ++j) d(i, j) = rewards_chosen[i] - rewards_rejected[j];
  }
  return d;
}

CostMatrix build_cost_matrix(const Matrix& similarity, const Matrix& reward_diff, double gamma,
                             SimilarityMode mode) {
  if (!(gamma >= 0.0 && gamma <= 1.0)) {
    throw Error(ErrorCode::kGammaOutOfRange, "gamma must lie in [0, 1], got " +
                                                 std::to_string(gamma));
  }
  if (!similarity.same_shape(reward_diff)) {
    throw Error(ErrorCode::kShapeMismatch, "similarity and reward-difference shapes differ");
  }
  CostMatrix cost{Matrix(similarity.rows(), similarity.cols()), gamma};
  for (std::size_t k = 0; k < similarity.size(); ++k) {
    const double s = similarity.data()[k];
    const double s_term = mode == SimilarityMode::kRemapped ? (s + 1.0) / 2.0 : s;
    // 1 - sigmoid(x) == sigmoid(-x), without cancellation for large x.
    const double reward_term = sigmoid(-reward_diff.data()[k]);
    cost.matrix.data()[k] = gamma * s_term + (1.0 - gamma) * reward_term;
  }
  return cost;
}

MarginVector estimate_margins(const CostMatrix& cost, const MarginOptions& options) {
  const Matrix& c = cost.matrix;
  if (c.rows() != c.cols()) {
    throw Error(ErrorCode::kShapeMismatch, "margin estimation needs a square cost matrix");
  }
  const std::size_t b = c.rows();
  MarginVector out;
  out.strategy = options.strategy;
  out.values.assign(b, 0.0);

  switch (options.strategy) {
    case Strategy::kNone:
      break;
    case Strategy::kHard:
      std::fill(out.values.begin(), out.values.end(), options.hard_value);
      break;
    case Strategy::kPoint:
      for (std::size_t i = 0; i < b; ++i) {
        double sum = 0.0;
        for (double v : c.row(i)) sum += v;
        out.values[i] =
            options.point == PointNormalization::kMean ? sum / static_cast<double>(b) : sum;
      }
      break;
    case Strategy::kAplot: {
      if (b == 0) break;
      const auto marginals = options.mass == MassNormalization::kUnitRows
                                 ? ot::Marginals::unit_mass(b)
                                 : ot::Marginals::uniform(b, b);
      const ot::TransportPlan plan = ot::sinkhorn(c, marginals, options.sinkhorn);
      for (std::size_t i = 0; i < b; ++i) {
        double mu = 0.0;
        for (std::size_t j = 0; j < b; ++j) mu += plan.matrix(i, j) * c(i, j);
        out.values[i] = mu;
      }
      out.sinkhorn_residual = std::max(plan.row_residual, plan.col_residual);
      out.sinkhorn_iterations = plan.iterations_used;
      break;
    }
  }
  return out;
}

}  // namespace aplot::margin
