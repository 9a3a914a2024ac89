#ifndef APLOT_OT_HPP_
#define APLOT_OT_HPP_

#include <vector>

#include "aplot/matrix.hpp"

namespace aplot::ot {

/// Discrete source (rows) and target (columns) weights. Both sides must carry
/// the same total mass.
struct Marginals {
  std::vector<double> row_weights;
  std::vector<double> col_weights;

  static Marginals uniform(std::size_t rows, std::size_t cols, double total_mass = 1.0);
  /// Every row and every column carries weight `mass`; requires rows == cols.
  static Marginals unit_mass(std::size_t n, double mass = 1.0);

  /// Throws kDegenerateMarginals on non-positive weights or unbalanced mass.
  void validate() const;
};

struct SinkhornConfig {
  double beta = 0.1;  // entropy weight
  int max_iters = 10000;
  double tolerance = 1e-9;  // max-norm marginal residual
  double epsilon_floor = 1e-300;  // division guard and lower bound on plan entries
  bool log_domain = true;

  void validate() const;
};

struct TransportPlan {
  Matrix matrix;
  double row_residual = 0.0;
  double col_residual = 0.0;
  int iterations_used = 0;

  bool converged(double tolerance) const {
    return row_residual <= tolerance && col_residual <= tolerance;
  }
};

/// Entropy-regularized OT, min <T,C> - beta*H(T) over the transport polytope.
///
/// Runs Sinkhorn scaling on the dual potentials in the log domain, so small
/// beta does not underflow the Gibbs kernel. Stops once both marginal
/// residuals are within `config.tolerance` or after `config.max_iters`
/// sweeps; in the latter case the residuals are reported and nothing throws.
TransportPlan sinkhorn(const Matrix& cost, const Marginals& marginals,
                       const SinkhornConfig& config);

/// <T,C> - beta*H(T) with H(T) = -sum T ln T and 0 ln 0 = 0.
double ot_objective(const Matrix& plan, const Matrix& cost, double beta);
inline double ot_objective(const TransportPlan& plan, const Matrix& cost, double beta) {
  return ot_objective(plan.matrix, cost, beta);
}

/// Outer product of the marginals, normalized by total mass.
Matrix independent_coupling(const Marginals& marginals);

/// Exhaustive-search oracle for tiny instances (rows*cols <= 9).
///
/// Parameterizes the polytope by its (N-1)(M-1) free cells, scans a dense
/// grid, then refines with a shrinking compass search. Independent of the
/// Sinkhorn path; meant for tests. beta == 0 is accepted.
TransportPlan brute_force_ot(const Matrix& cost, const Marginals& marginals, double beta);

}  // namespace aplot::ot

#endif  // APLOT_OT_HPP_
