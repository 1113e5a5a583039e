#pragma once

#include <Eigen/Dense>
#include <functional>
#include <memory>
#include <string>
#include <vector>

#include "emhe/model.hpp"

namespace emhe {

/// Gauss-Newton model of a residual around a point: r + J·δ.
/// Implementations may exploit structure in J; only these products are needed.
class LinearModel {
 public:
  virtual ~LinearModel() = default;
  virtual const VectorXd& residual() const = 0;
  /// Jᵀr.
  virtual VectorXd gradient() const = 0;
  /// diag(JᵀJ).
  virtual VectorXd jtj_diagonal() const = 0;
  /// Solves (JᵀJ + diag(damping)) δ = −Jᵀr.
  virtual VectorXd solve_damped(const VectorXd& damping) const = 0;
};

class DenseLinearModel final : public LinearModel {
 public:
  DenseLinearModel(VectorXd r, MatrixXd J);
  const VectorXd& residual() const override { return r_; }
  VectorXd gradient() const override { return J_.transpose() * r_; }
  VectorXd jtj_diagonal() const override { return J_.colwise().squaredNorm().transpose(); }
  VectorXd solve_damped(const VectorXd& damping) const override;
  const MatrixXd& jacobian() const { return J_; }

 private:
  VectorXd r_;
  MatrixXd J_;
  MatrixXd JtJ_;
};

struct ResidualProblem {
  using ResidualFn = std::function<VectorXd(const VectorXd&)>;
  using JacobianFn = std::function<MatrixXd(const VectorXd&)>;
  using LinearizeFn = std::function<std::unique_ptr<LinearModel>(const VectorXd&)>;

  ResidualFn residual;
  /// Optional; finite differences are used when empty.
  JacobianFn jacobian;
  /// Optional structured linearization; takes precedence over `jacobian` inside solve.
  LinearizeFn linearize;
  Box bounds;
  Eigen::Index dim_theta = 0;
  Eigen::Index dim_r = 0;

  MatrixXd jacobian_at(const VectorXd& theta) const;
  std::unique_ptr<LinearModel> linearize_at(const VectorXd& theta) const;
};

struct SolveOptions {
  double tol_g = 1e-10;      // absolute projected-gradient tolerance
  double tol_g_rel = 0.0;    // adds tol_g_rel·‖Jᵀr(θ0)‖∞ to tol_g
  double tol_step = 1e-12;   // relative step size that ends the iteration
  int max_iter = 100;        // counts accepted and rejected trials
  double lambda0 = 1e-3;
};

enum class SolveStatus { converged, max_iter, stalled };

std::string to_string(SolveStatus status);

struct SolveReport {
  VectorXd theta_star;
  double cost_star = 0.0;
  SolveStatus status = SolveStatus::stalled;
  int iterations = 0;
  double projected_gradient_norm = 0.0;
  /// Tolerance the convergence test was made against.
  double tol_g_effective = 0.0;
  /// Cost after each accepted step, starting with the initial cost.
  std::vector<double> cost_history;
};

/// ‖θ − Π(θ − g)‖∞.
double projected_gradient_norm(const Box& bounds, const VectorXd& theta, const VectorXd& gradient);

/// Projected Levenberg–Marquardt. Throws InputError if r(Π(θ0)) is not finite.
SolveReport solve(const ResidualProblem& problem, const VectorXd& theta0,
                  const SolveOptions& opts = {});

/// Central differences with per-component step h_rel·(1+|θ_i|).
MatrixXd finite_difference_jacobian(const ResidualProblem::ResidualFn& residual,
                                    const VectorXd& theta, double h_rel = 1e-6);

/// True iff the Jacobian is identical at three random feasible points.
bool is_convex_window(const ResidualProblem& problem, std::uint64_t seed = 7);

}  // namespace emhe
