#include "aplot/ot.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <string>

#include "aplot/error.hpp"

namespace aplot::ot {
namespace {

double total(const std::vector<double>& w) { return std::accumulate(w.begin(), w.end(), 0.0); }

// log(sum_k exp(x_k)) for x given by a generator over [0, n).
template <typename F>
double log_sum_exp(std::size_t n, F&& x) {
  double max_value = -std::numeric_limits<double>::infinity();
  for (std::size_t k = 0; k < n; ++k) max_value = std::max(max_value, x(k));
  if (!std::isfinite(max_value)) return max_value;
  double sum = 0.0;
  for (std::size_t k = 0; k < n; ++k) sum += std::exp(x(k) - max_value);
  return max_value + std::log(sum);
}

void check_cost(const Matrix& cost, const Marginals& marginals) {
  if (cost.rows() == 0 || cost.cols() == 0) {
    throw Error(ErrorCode::kShapeMismatch, "cost matrix must be at least 1x1");
  }
  if (cost.rows() != marginals.row_weights.size() ||
      cost.cols() != marginals.col_weights.size()) {
    throw Error(ErrorCode::kShapeMismatch,
                "cost is " + std::to_string(cost.rows()) + "x" + std::to_string(cost.cols()) +
                    " but marginals are " + std::to_string(marginals.row_weights.size()) + "x" +
                    std::to_string(marginals.col_weights.size()));
  }
  for (double c : cost.data()) {
    if (!std::isfinite(c)) throw Error(ErrorCode::kNonFiniteCost, "cost entry is not finite");
  }
}

void fill_residuals(TransportPlan& plan, const Marginals& marginals) {
  const Matrix& t = plan.matrix;
  double row_residual = 0.0;
  for (std::size_t i = 0; i < t.rows(); ++i) {
    double s = 0.0;
    for (double v : t.row(i)) s += v;
    row_residual = std::max(row_residual, std::abs(s - marginals.row_weights[i]));
  }
  double col_residual = 0.0;
  for (std::size_t j = 0; j < t.cols(); ++j) {
    double s = 0.0;
    for (std::size_t i = 0; i < t.rows(); ++i) s += t(i, j);
    col_residual = std::max(col_residual, std::abs(s - marginals.col_weights[j]));
  }
  plan.row_residual = row_residual;
  plan.col_residual = col_residual;
}

// Gradient of the entropic dual in units of beta, as squared norm: the
// marginal violations of the plan exp(u_i + v_j - C_ij / beta).
double dual_gradient_norm(const Matrix& scaled, const Marginals& marginals,
                          const std::vector<double>& u, const std::vector<double>& v) {
  std::vector<double> cols(scaled.cols(), 0.0);
  double norm = 0.0;
  for (std::size_t i = 0; i < scaled.rows(); ++i) {
    double r = 0.0;
    for (std::size_t j = 0; j < scaled.cols(); ++j) {
      const double t = std::exp(u[i] + v[j] - scaled(i, j));
      r += t;
      cols[j] += t;
    }
    norm += (r - marginals.row_weights[i]) * (r - marginals.row_weights[i]);
  }
  for (std::size_t j = 0; j < scaled.cols(); ++j) {
    norm += (cols[j] - marginals.col_weights[j]) * (cols[j] - marginals.col_weights[j]);
  }
  return norm;
}

// Solves h x = g in place for symmetric positive definite h (row-major, k x k).
bool cholesky_solve(std::vector<double>& h, std::vector<double>& g, std::size_t k) {
  for (std::size_t c = 0; c < k; ++c) {
    double d = h[c * k + c];
    for (std::size_t p = 0; p < c; ++p) d -= h[c * k + p] * h[c * k + p];
    if (!(d > 0.0)) return false;
    d = std::sqrt(d);
    h[c * k + c] = d;
    for (std::size_t r = c + 1; r < k; ++r) {
      double s = h[r * k + c];
      for (std::size_t p = 0; p < c; ++p) s -= h[r * k + p] * h[c * k + p];
      h[r * k + c] = s / d;
    }
  }
  for (std::size_t r = 0; r < k; ++r) {
    for (std::size_t p = 0; p < r; ++p) g[r] -= h[r * k + p] * g[p];
    g[r] /= h[r * k + r];
  }
  for (std::size_t r = k; r-- > 0;) {
    for (std::size_t p = r + 1; p < k; ++p) g[r] -= h[p * k + r] * g[p];
    g[r] /= h[r * k + r];
  }
  return true;
}

// One damped Newton step on the dual with the last column potential held
// fixed (the dual is invariant under u + t, v - t). Returns false and leaves
// the potentials alone if no decrease was found.
bool newton_step(const Matrix& scaled, const Marginals& marginals, std::vector<double>& u,
                 std::vector<double>& v) {
  const std::size_t n = scaled.rows(), m = scaled.cols();
  if (m < 2) return false;
  const std::size_t k = n + m - 1;
  Matrix plan(n, m);
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = 0; j < m; ++j) plan(i, j) = std::exp(u[i] + v[j] - scaled(i, j));
  }
  std::vector<double> h(k * k, 0.0), step(k, 0.0);
  for (std::size_t i = 0; i < n; ++i) {
    double r = 0.0;
    for (std::size_t j = 0; j < m; ++j) r += plan(i, j);
    h[i * k + i] = r;
    step[i] = -(r - marginals.row_weights[i]);
    for (std::size_t j = 0; j + 1 < m; ++j) {
      h[i * k + n + j] = plan(i, j);
      h[(n + j) * k + i] = plan(i, j);
    }
  }
  for (std::size_t j = 0; j + 1 < m; ++j) {
    double c = 0.0;
    for (std::size_t i = 0; i < n; ++i) c += plan(i, j);
    h[(n + j) * k + n + j] = c;
    step[n + j] = -(c - marginals.col_weights[j]);
  }
  const std::vector<double> neg_grad = step;
  // Near-disconnected plans make h nearly singular; a small ridge keeps the
  // step a descent direction.
  double ridge = 0.0;
  for (std::size_t q = 0; q < k; ++q) ridge = std::max(ridge, h[q * k + q]);
  ridge *= 1e-12;
  std::vector<double> factor = h;
  while (true) {
    for (std::size_t q = 0; q < k; ++q) factor[q * k + q] += ridge;
    if (cholesky_solve(factor, step, k)) break;
    ridge *= 100.0;
    if (ridge > 1e6) return false;
    factor = h;
    step = neg_grad;
  }

  // Backtrack on the gradient norm; the dual value itself is too flat near
  // the optimum to resolve in double precision.
  const double g0 = dual_gradient_norm(scaled, marginals, u, v);
  if (!std::isfinite(g0)) return false;
  std::vector<double> tu(n), tv = v;
  for (double t = 1.0; t > 1e-8; t *= 0.5) {
    for (std::size_t i = 0; i < n; ++i) tu[i] = u[i] + t * step[i];
    for (std::size_t j = 0; j + 1 < m; ++j) tv[j] = v[j] + t * step[n + j];
    const double g = dual_gradient_norm(scaled, marginals, tu, tv);
    if (std::isfinite(g) && g <= (1.0 - 1e-4 * t) * g0) {
      u = tu;
      v = tv;
      return true;
    }
  }
  return false;
}

TransportPlan sinkhorn_log(const Matrix& cost, const Marginals& marginals,
                           const SinkhornConfig& config) {
  const std::size_t n = cost.rows();
  const std::size_t m = cost.cols();

  Matrix scaled(n, m);
  for (std::size_t k = 0; k < cost.size(); ++k) scaled.data()[k] = cost.data()[k] / config.beta;

  std::vector<double> log_a(n), log_b(m);
  for (std::size_t i = 0; i < n; ++i) log_a[i] = std::log(marginals.row_weights[i]);
  for (std::size_t j = 0; j < m; ++j) log_b[j] = std::log(marginals.col_weights[j]);

  // Potentials in units of beta: log T_ij = u_i + v_j - C_ij / beta.
  std::vector<double> u(n, 0.0), v(m, 0.0), row_lse(n);

  auto balance_columns = [&] {
    for (std::size_t j = 0; j < m; ++j) {
      v[j] = log_b[j] - log_sum_exp(n, [&](std::size_t i) { return u[i] - scaled(i, j); });
    }
  };

  int iters = 0;
  double previous_residual = std::numeric_limits<double>::infinity();
  while (true) {
    // Columns are balanced after every v update, so the row residual decides.
    double row_residual = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
      row_lse[i] = log_sum_exp(m, [&](std::size_t j) { return v[j] - scaled(i, j); });
      const double row_sum = std::exp(u[i] + row_lse[i]);
      row_residual = std::max(row_residual, std::abs(row_sum - marginals.row_weights[i]));
    }
    if (row_residual <= config.tolerance || iters >= config.max_iters) break;

    // Near-permutation plans contract by only ~exp(-gap / beta) per sweep.
    // When a sweep stalls, try a guarded Newton step on the dual instead.
    const bool stalled = iters >= 8 && row_residual > 0.5 * previous_residual;
    previous_residual = row_residual;
    if (!(stalled && newton_step(scaled, marginals, u, v))) {
      for (std::size_t i = 0; i < n; ++i) u[i] = log_a[i] - row_lse[i];
    }
    balance_columns();
    ++iters;
  }

  TransportPlan plan;
  plan.matrix = Matrix(n, m);
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = 0; j < m; ++j) {
      plan.matrix(i, j) = std::max(std::exp(u[i] + v[j] - scaled(i, j)), config.epsilon_floor);
    }
  }
  plan.iterations_used = iters;
  fill_residuals(plan, marginals);
  return plan;
}

// Classic Sinkhorn-Knopp scaling on exp(-C/beta). Underflows for small beta.
TransportPlan sinkhorn_scaling(const Matrix& cost, const Marginals& marginals,
                               const SinkhornConfig& config) {
  const std::size_t n = cost.rows();
  const std::size_t m = cost.cols();
  Matrix kernel(n, m);
  for (std::size_t k = 0; k < cost.size(); ++k) {
    kernel.data()[k] = std::exp(-cost.data()[k] / config.beta);
  }
  std::vector<double> a(n, 1.0), b(m, 1.0);

  auto row_residual = [&] {
    double r = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
      double s = 0.0;
      for (std::size_t j = 0; j < m; ++j) s += kernel(i, j) * b[j];
      r = std::max(r, std::abs(a[i] * s - marginals.row_weights[i]));
    }
    return r;
  };

  int iters = 0;
  while (row_residual() > config.tolerance && iters < config.max_iters) {
    for (std::size_t i = 0; i < n; ++i) {
      double s = 0.0;
      for (std::size_t j = 0; j < m; ++j) s += kernel(i, j) * b[j];
      a[i] = marginals.row_weights[i] / std::max(s, config.epsilon_floor);
    }
    for (std::size_t j = 0; j < m; ++j) {
      double s = 0.0;
      for (std::size_t i = 0; i < n; ++i) s += kernel(i, j) * a[i];
      b[j] = marginals.col_weights[j] / std::max(s, config.epsilon_floor);
    }
    ++iters;
  }

  TransportPlan plan;
  plan.matrix = Matrix(n, m);
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = 0; j < m; ++j) plan.matrix(i, j) = a[i] * kernel(i, j) * b[j];
  }
  plan.iterations_used = iters;
  fill_residuals(plan, marginals);
  return plan;
}

}  // namespace

Marginals Marginals::uniform(std::size_t rows, std::size_t cols, double total_mass) {
  return {std::vector<double>(rows, total_mass / static_cast<double>(rows)),
          std::vector<double>(cols, total_mass / static_cast<double>(cols))};
}

Marginals Marginals::unit_mass(std::size_t n, double mass) {
  return {std::vector<double>(n, mass), std::vector<double>(n, mass)};
}

void Marginals::validate() const {
  if (row_weights.empty() || col_weights.empty()) {
    throw Error(ErrorCode::kDegenerateMarginals, "marginals must be non-empty");
  }
  for (const auto* side : {&row_weights, &col_weights}) {
    for (double w : *side) {
      if (!(w > 0.0) || !std::isfinite(w)) {
        throw Error(ErrorCode::kDegenerateMarginals, "weights must be finite and > 0");
      }
    }
  }
  const double row_mass = total(row_weights);
  const double col_mass = total(col_weights);
  if (std::abs(row_mass - col_mass) > 1e-12 * std::max(1.0, row_mass)) {
    throw Error(ErrorCode::kDegenerateMarginals,
                "row mass " + std::to_string(row_mass) + " != column mass " +
                    std::to_string(col_mass));
  }
}

void SinkhornConfig::validate() const {
  if (!(beta > 0.0) || !std::isfinite(beta)) {
    throw Error(ErrorCode::kInvalidConfig, "sinkhorn beta must be > 0");
  }
  if (!(tolerance > 0.0)) throw Error(ErrorCode::kInvalidConfig, "sinkhorn tolerance must be > 0");
  if (max_iters < 1) throw Error(ErrorCode::kInvalidConfig, "sinkhorn max_iters must be >= 1");
  if (!(epsilon_floor > 0.0)) {
    throw Error(ErrorCode::kInvalidConfig, "sinkhorn epsilon_floor must be > 0");
  }
}

TransportPlan sinkhorn(const Matrix& cost, const Marginals& marginals,
                       const SinkhornConfig& config) {
  config.validate();
  marginals.validate();
  check_cost(cost, marginals);
  return config.log_domain ? sinkhorn_log(cost, marginals, config)
                           : sinkhorn_scaling(cost, marginals, config);
}

double ot_objective(const Matrix& plan, const Matrix& cost, double beta) {
  if (!plan.same_shape(cost)) {
    throw Error(ErrorCode::kShapeMismatch, "plan and cost shapes differ");
  }
  double transport = 0.0;
  double neg_entropy = 0.0;  // sum T ln T
  for (std::size_t k = 0; k < plan.size(); ++k) {
    const double t = plan.data()[k];
    transport += t * cost.data()[k];
    if (t > 0.0) neg_entropy += t * std::log(t);
  }
  return transport + beta * neg_entropy;
}

Matrix independent_coupling(const Marginals& marginals) {
  marginals.validate();
  const double mass = total(marginals.row_weights);
  Matrix t(marginals.row_weights.size(), marginals.col_weights.size());
  for (std::size_t i = 0; i < t.rows(); ++i) {
    for (std::size_t j = 0; j < t.cols(); ++j) {
      t(i, j) = marginals.row_weights[i] * marginals.col_weights[j] / mass;
    }
  }
  return t;
}

TransportPlan brute_force_ot(const Matrix& cost, const Marginals& marginals, double beta) {
  marginals.validate();
  check_cost(cost, marginals);
  if (cost.size() > 9) {
    throw Error(ErrorCode::kTooLarge, "brute-force oracle limited to 9 cells, got " +
                                          std::to_string(cost.size()));
  }
  if (beta < 0.0) throw Error(ErrorCode::kInvalidConfig, "beta must be >= 0");

  const std::size_t n = cost.rows();
  const std::size_t m = cost.cols();
  const auto& a = marginals.row_weights;
  const auto& b = marginals.col_weights;
  const std::size_t free_rows = n - 1;
  const std::size_t free_cols = m - 1;
  const std::size_t dims = free_rows * free_cols;

  std::vector<double> upper(dims);
  for (std::size_t i = 0; i < free_rows; ++i) {
    for (std::size_t j = 0; j < free_cols; ++j) upper[i * free_cols + j] = std::min(a[i], b[j]);
  }

  // Completes the plan from the free block; false when any cell goes negative.
  Matrix plan(n, m);
  auto complete = [&](const std::vector<double>& x) {
    for (std::size_t i = 0; i < free_rows; ++i) {
      double used = 0.0;
      for (std::size_t j = 0; j < free_cols; ++j) {
        plan(i, j) = x[i * free_cols + j];
        used += plan(i, j);
      }
      plan(i, m - 1) = a[i] - used;
    }
    double corner_row = a[n - 1];
    for (std::size_t j = 0; j + 1 < m; ++j) {
      double used = 0.0;
      for (std::size_t i = 0; i < free_rows; ++i) used += plan(i, j);
      plan(n - 1, j) = b[j] - used;
      corner_row -= plan(n - 1, j);
    }
    plan(n - 1, m - 1) = corner_row;
    const double slack = -1e-15 * std::max(1.0, total(a));
    for (double& t : plan.data()) {
      if (t < slack) return false;
      if (t < 0.0) t = 0.0;
    }
    return true;
  };
  auto evaluate = [&](const std::vector<double>& x) {
    return complete(x) ? ot_objective(plan, cost, beta) : std::numeric_limits<double>::infinity();
  };

  std::vector<double> best(dims, 0.0);
  double best_value = std::numeric_limits<double>::infinity();

  if (dims == 0) {
    best_value = evaluate(best);
  } else {
    static constexpr std::size_t kPointsPerDim[] = {0, 2001, 201, 41, 17};
    const std::size_t points = kPointsPerDim[dims];
    std::vector<std::size_t> index(dims, 0);
    std::vector<double> x(dims);
    while (true) {
      for (std::size_t d = 0; d < dims; ++d) {
        x[d] = upper[d] * static_cast<double>(index[d]) / static_cast<double>(points - 1);
      }
      const double value = evaluate(x);
      if (value < best_value) {
        best_value = value;
        best = x;
      }
      std::size_t d = 0;
      while (d < dims && ++index[d] == points) index[d++] = 0;
      if (d == dims) break;
    }

    // Compass search over axis and pairwise-diagonal directions.
    std::vector<std::vector<double>> directions;
    for (std::size_t p = 0; p < dims; ++p) {
      for (double sp : {1.0, -1.0}) {
        std::vector<double> dir(dims, 0.0);
        dir[p] = sp;
        directions.push_back(dir);
        for (std::size_t q = p + 1; q < dims; ++q) {
          for (double sq : {1.0, -1.0}) {
            std::vector<double> diag = dir;
            diag[q] = sq;
            directions.push_back(diag);
          }
        }
      }
    }
    double step = *std::max_element(upper.begin(), upper.end()) / static_cast<double>(points - 1);
    const double min_step = 1e-15 * std::max(1.0, total(a));
    std::vector<double> trial(dims);
    // Gains at the rounding level would otherwise keep the step from shrinking.
    for (int sweep = 0; step > min_step && sweep < 100000; ++sweep) {
      bool improved = false;
      for (const auto& dir : directions) {
        for (std::size_t d = 0; d < dims; ++d) trial[d] = best[d] + step * dir[d];
        const double value = evaluate(trial);
        if (value < best_value - 1e-15 * std::max(1.0, std::abs(best_value))) {
          best_value = value;
          best = trial;
          improved = true;
        }
      }
      if (!improved) step *= 0.5;
    }
  }

  complete(best);
  TransportPlan result;
  result.matrix = plan;
  fill_residuals(result, marginals);
  return result;
}

}  // namespace aplot::ot
