#include "emhe/solver.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "emhe/errors.hpp"
#include "emhe/random.hpp"

namespace emhe {

namespace {

// Damping used to freeze variables sitting on an active bound.
constexpr double kPinDamping = 1e20;
constexpr double kLambdaMax = 1e16;

bool finite(const VectorXd& v) { return v.allFinite(); }

}  // namespace

std::string to_string(SolveStatus status) {
  switch (status) {
    case SolveStatus::converged: return "converged";
    case SolveStatus::max_iter: return "max_iter";
    case SolveStatus::stalled: return "stalled";
  }
  return "unknown";
}

DenseLinearModel::DenseLinearModel(VectorXd r, MatrixXd J) : r_(std::move(r)), J_(std::move(J)) {
  if (J_.rows() != r_.size()) throw UsageError("DenseLinearModel: residual/Jacobian mismatch");
  JtJ_ = J_.transpose() * J_;
}

VectorXd DenseLinearModel::solve_damped(const VectorXd& damping) const {
  MatrixXd h = JtJ_;
  h.diagonal() += damping;
  const VectorXd rhs = -(J_.transpose() * r_);
  Eigen::LLT<MatrixXd> llt(h);
  if (llt.info() == Eigen::Success) return llt.solve(rhs);
  return h.ldlt().solve(rhs);
}

MatrixXd ResidualProblem::jacobian_at(const VectorXd& theta) const {
  if (jacobian) return jacobian(theta);
  return finite_difference_jacobian(residual, theta);
}

std::unique_ptr<LinearModel> ResidualProblem::linearize_at(const VectorXd& theta) const {
  if (linearize) return linearize(theta);
  return std::make_unique<DenseLinearModel>(residual(theta), jacobian_at(theta));
}

double projected_gradient_norm(const Box& bounds, const VectorXd& theta,
                               const VectorXd& gradient) {
  if (theta.size() == 0) return 0.0;
  return (theta - bounds.project(theta - gradient)).cwiseAbs().maxCoeff();
}

SolveReport solve(const ResidualProblem& problem, const VectorXd& theta0,
                  const SolveOptions& opts) {
  if (!problem.residual) throw UsageError("solve: residual is required");
  if (theta0.size() != problem.dim_theta || problem.bounds.dim() != problem.dim_theta) {
    throw UsageError("solve: theta0/bounds dimension does not match dim_theta");
  }
  const Box& box = problem.bounds;

  SolveReport rep;
  VectorXd theta = box.project(theta0);
  std::unique_ptr<LinearModel> lm = problem.linearize_at(theta);
  if (!finite(lm->residual())) throw InputError("solve: residual is not finite at theta0");
  double cost = lm->residual().squaredNorm();
  rep.cost_history.push_back(cost);

  VectorXd g = lm->gradient();
  rep.tol_g_effective = opts.tol_g + opts.tol_g_rel * (g.size() ? g.cwiseAbs().maxCoeff() : 0.0);
  VectorXd scale = lm->jtj_diagonal();
  double lambda = opts.lambda0;
  const Eigen::Index nt = theta.size();

  while (true) {
    rep.projected_gradient_norm = projected_gradient_norm(box, theta, g);
    if (!(rep.projected_gradient_norm > rep.tol_g_effective)) {
      rep.status = SolveStatus::converged;
      break;
    }
    if (rep.iterations >= opts.max_iter) {
      rep.status = SolveStatus::max_iter;
      break;
    }
    if (lambda > kLambdaMax) {
      rep.status = SolveStatus::stalled;
      break;
    }

    const double smax = scale.size() ? scale.maxCoeff() : 0.0;
    const double floor = std::max(1e-10 * smax, std::numeric_limits<double>::min());
    std::vector<bool> pinned(static_cast<std::size_t>(nt), false);
    VectorXd damping(nt);
    for (Eigen::Index i = 0; i < nt; ++i) {
      const bool at_lower = theta(i) <= box.lower(i) && g(i) > 0.0;
      const bool at_upper = theta(i) >= box.upper(i) && g(i) < 0.0;
      pinned[static_cast<std::size_t>(i)] = at_lower || at_upper;
      damping(i) = pinned[static_cast<std::size_t>(i)] ? kPinDamping
                                                       : lambda * std::max(scale(i), floor);
    }
    VectorXd delta = lm->solve_damped(damping);
    for (Eigen::Index i = 0; i < nt; ++i) {
      if (pinned[static_cast<std::size_t>(i)]) delta(i) = 0.0;
    }
    const VectorXd trial = box.project(theta + delta);
    ++rep.iterations;

    const double step = (trial - theta).cwiseAbs().maxCoeff();
    const double theta_scale = 1.0 + (nt ? theta.cwiseAbs().maxCoeff() : 0.0);
    if (!finite(delta)) {
      lambda *= 2.0;
      continue;
    }
    if (step <= opts.tol_step * theta_scale) {
      // No representable progress left at this damping.
      rep.status = SolveStatus::stalled;
      break;
    }

    const VectorXd r_trial = problem.residual(trial);
    const double cost_trial = finite(r_trial) ? r_trial.squaredNorm()
                                              : std::numeric_limits<double>::infinity();
    if (cost_trial < cost) {
      theta = trial;
      lm = problem.linearize_at(theta);
      cost = lm->residual().squaredNorm();
      if (!std::isfinite(cost)) {
        throw InputError("solve: linearization produced a non-finite residual");
      }
      rep.cost_history.push_back(cost);
      g = lm->gradient();
      scale = scale.cwiseMax(lm->jtj_diagonal());
      lambda /= 3.0;
    } else {
      lambda *= 2.0;
    }
  }

  rep.theta_star = theta;
  rep.cost_star = cost;
  return rep;
}

MatrixXd finite_difference_jacobian(const ResidualProblem::ResidualFn& residual,
                                    const VectorXd& theta, double h_rel) {
  VectorXd probe = theta;
  MatrixXd jac;
  for (Eigen::Index i = 0; i < theta.size(); ++i) {
    const double h = h_rel * (1.0 + std::abs(theta(i)));
    probe(i) = theta(i) + h;
    const VectorXd plus = residual(probe);
    probe(i) = theta(i) - h;
    const VectorXd minus = residual(probe);
    probe(i) = theta(i);
    if (i == 0) jac.resize(plus.size(), theta.size());
    jac.col(i) = (plus - minus) / (2.0 * h);
  }
  if (theta.size() == 0) jac.resize(residual(theta).size(), 0);
  return jac;
}

bool is_convex_window(const ResidualProblem& problem, std::uint64_t seed) {
  const Box sample_box = problem.bounds.clipped(1.0);
  UniformSource rng(seed);
  auto draw = [&]() {
    VectorXd v(problem.dim_theta);
    for (Eigen::Index i = 0; i < v.size(); ++i) {
      v(i) = rng.uniform(sample_box.lower(i), sample_box.upper(i));
    }
    return v;
  };
  const MatrixXd j0 = problem.jacobian_at(draw());
  for (int k = 0; k < 2; ++k) {
    const MatrixXd jk = problem.jacobian_at(draw());
    if (jk.rows() != j0.rows() || jk.cols() != j0.cols()) return false;
    if ((jk - j0).cwiseAbs().maxCoeff() > 1e-12 * (1.0 + j0.cwiseAbs().maxCoeff())) return false;
  }
  return true;
}

}  // namespace emhe
