#ifndef APLOT_MARGIN_HPP_
#define APLOT_MARGIN_HPP_

#include <span>
#include <string>
#include <vector>

#include "aplot/matrix.hpp"
#include "aplot/ot.hpp"

namespace aplot::margin {

enum class Strategy { kAplot, kPoint, kHard, kNone };

const char* strategy_name(Strategy s);
/// Accepts "aplot", "point", "hard", "none" (case-insensitive).
Strategy parse_strategy(const std::string& name);

/// How cosine similarity enters the cost matrix.
enum class SimilarityMode {
  kRemapped,  // (S + 1) / 2, keeps every cost entry in [0, 1]
  kRaw,       // cosine as-is, may produce negative costs
};

/// Marginals handed to the OT solve for APLOT.
enum class MassNormalization {
  kUnitRows,     // each row and column carries mass 1 (total B)
  kProbability,  // each carries 1/B (total 1)
};

/// Aggregation for the point-to-point baseline.
enum class PointNormalization { kMean, kSum };

double sigmoid(double x);

/// a.b / (|a| |b|). Throws kZeroVector when either norm is below 1e-12.
double cosine_similarity(std::span<const double> a, std::span<const double> b);

/// S_ij = cos(chosen_i, rejected_j).
Matrix similarity_matrix(std::span<const std::span<const double>> chosen,
                         std::span<const std::span<const double>> rejected);

/// D_ij = chosen_i - rejected_j.
Matrix reward_difference_matrix(std::span<const double> rewards_chosen,
                                std::span<const double> rewards_rejected);

struct CostMatrix {
  Matrix matrix;
  double gamma = 0.5;
};

/// C_ij = gamma * S'_ij + (1 - gamma) * (1 - sigmoid(D_ij)) where S' is the
/// similarity after `mode`.
CostMatrix build_cost_matrix(const Matrix& similarity, const Matrix& reward_diff, double gamma,
                             SimilarityMode mode = SimilarityMode::kRemapped);

struct MarginOptions {
  Strategy strategy = Strategy::kAplot;
  ot::SinkhornConfig sinkhorn;
  double hard_value = 1.0;
  MassNormalization mass = MassNormalization::kUnitRows;
  PointNormalization point = PointNormalization::kMean;
};

struct MarginVector {
  std::vector<double> values;
  Strategy strategy = Strategy::kNone;
  // Filled only for kAplot.
  double sinkhorn_residual = 0.0;
  int sinkhorn_iterations = 0;
};

MarginVector estimate_margins(const CostMatrix& cost, const MarginOptions& options);

}  // namespace aplot::margin

#endif  // APLOT_MARGIN_HPP_
