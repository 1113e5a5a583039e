#include <gtest/gtest.h>

#include <cmath>

#include "emhe/errors.hpp"
#include "emhe/mhe.hpp"
#include "emhe/solver.hpp"
#include "test_support.hpp"

using namespace emhe;
using namespace emhe::testing;

namespace {

ResidualProblem affine_problem(const MatrixXd& J, const VectorXd& b, Box box) {
  ResidualProblem p;
  p.residual = [J, b](const VectorXd& th) -> VectorXd { return J * th - b; };
  p.jacobian = [J](const VectorXd&) -> MatrixXd { return J; };
  p.bounds = std::move(box);
  p.dim_theta = J.cols();
  p.dim_r = J.rows();
  return p;
}

}  // namespace

TEST(Solve, LinearResidual) {
  const auto p = affine_problem(MatrixXd::Identity(1, 1), vec1(3.0), Box::unbounded(1));
  const SolveReport r = solve(p, vec1(0.0));
  EXPECT_NEAR(r.theta_star(0), 3.0, 1e-12);
  EXPECT_NEAR(r.cost_star, 0.0, 1e-20);
  EXPECT_EQ(r.status, SolveStatus::converged);
}

TEST(Solve, ClampedAtActiveBound) {
  const auto p = affine_problem(MatrixXd::Identity(1, 1), vec1(3.0), Box::uniform(1, 0.0, 1.0));
  const SolveReport r = solve(p, vec1(0.5));
  EXPECT_EQ(r.theta_star(0), 1.0);
  EXPECT_EQ(r.status, SolveStatus::converged);
  EXPECT_LE(r.projected_gradient_norm, 1e-10);
}

TEST(Solve, ClosedFormRoot) {
  ResidualProblem p;
  p.residual = [](const VectorXd& th) {
    VectorXd r(2);
    r << th(0) * th(0) - 2.0, th(1);
    return r;
  };
  p.bounds = Box::unbounded(2);
  p.dim_theta = 2;
  p.dim_r = 2;
  VectorXd th0(2);
  th0 << 1, 1;
  const SolveReport r = solve(p, th0);
  EXPECT_NEAR(r.theta_star(0), std::sqrt(2.0), 1e-8);
  EXPECT_NEAR(r.theta_star(1), 0.0, 1e-8);
}

TEST(Solve, RosenbrockWithBox) {
  ResidualProblem p;
  p.residual = [](const VectorXd& th) {
    VectorXd r(2);
    r << 10.0 * (th(1) - th(0) * th(0)), 1.0 - th(0);
    return r;
  };
  p.bounds = Box(VectorXd::Constant(2, -2.0), VectorXd::Constant(2, 0.5));
  p.dim_theta = 2;
  p.dim_r = 2;
  VectorXd th0(2);
  th0 << -1.2, 1.0;
  SolveOptions o;
  o.max_iter = 500;
  const SolveReport r = solve(p, th0, o);
  EXPECT_TRUE(p.bounds.contains(r.theta_star));
  EXPECT_NEAR(r.theta_star(0), 0.5, 1e-6);
  EXPECT_NEAR(r.theta_star(1), 0.25, 1e-6);
}

TEST(Solve, NonFiniteInitialResidualIsInputError) {
  ResidualProblem p;
  p.residual = [](const VectorXd& th) { return VectorXd::Constant(1, std::log(th(0))); };
  p.bounds = Box::unbounded(1);
  p.dim_theta = 1;
  p.dim_r = 1;
  EXPECT_THROW(solve(p, vec1(-1.0)), InputError);
}

TEST(Solve, NonFiniteMidRunKeepsLastGoodIterate) {
  // The full Gauss-Newton step lands at θ < 0 where the residual is NaN.
  ResidualProblem p;
  p.residual = [](const VectorXd& th) {
    const double x = th(0);
    return VectorXd::Constant(1, x < 0.0 ? std::nan("") : x + 1.0);
  };
  p.jacobian = [](const VectorXd&) { return MatrixXd::Constant(1, 1, 1.0); };
  p.bounds = Box::unbounded(1);
  p.dim_theta = 1;
  p.dim_r = 1;
  const SolveReport r = solve(p, vec1(1.0));
  EXPECT_TRUE(std::isfinite(r.cost_star));
  EXPECT_GE(r.theta_star(0), 0.0);
  EXPECT_NE(r.status, SolveStatus::converged);
}

TEST(Solve, MaxIterStatus) {
  ResidualProblem p;
  p.residual = [](const VectorXd& th) {
    VectorXd r(2);
    r << 10.0 * (th(1) - th(0) * th(0)), 1.0 - th(0);
    return r;
  };
  p.bounds = Box::unbounded(2);
  p.dim_theta = 2;
  p.dim_r = 2;
  SolveOptions o;
  o.max_iter = 2;
  VectorXd th0(2);
  th0 << -1.2, 1.0;
  const SolveReport r = solve(p, th0, o);
  EXPECT_EQ(r.status, SolveStatus::max_iter);
  EXPECT_EQ(r.iterations, 2);
}

TEST(SolveProperty, AcceptedCostsNonIncreasingAndFeasible) {
  UniformSource rng(11);
  for (int trial = 0; trial < 30; ++trial) {
    const VectorXd c = random_vector(rng, 3, 2.0);
    ResidualProblem p;
    p.residual = [c](const VectorXd& th) {
      VectorXd r(4);
      r << th(0) * th(1) - c(0), std::sin(th(1)) + th(2) - c(1), th(2) * th(2) - c(2),
          0.1 * th(0);
      return r;
    };
    p.bounds = Box(VectorXd::Constant(3, -1.0), VectorXd::Constant(3, 1.5));
    p.dim_theta = 3;
    p.dim_r = 4;
    const SolveReport r = solve(p, random_vector(rng, 3, 3.0));
    for (std::size_t k = 1; k < r.cost_history.size(); ++k) {
      EXPECT_LE(r.cost_history[k], r.cost_history[k - 1]);
    }
    EXPECT_TRUE(p.bounds.contains(r.theta_star));
    if (r.status == SolveStatus::converged) EXPECT_LE(r.projected_gradient_norm, r.tol_g_effective);
  }
}

TEST(SolveProperty, AffineProblemsReachNormalEquationSolution) {
  UniformSource rng(12);
  for (int trial = 0; trial < 50; ++trial) {
    const MatrixXd J = random_matrix(rng, 8, 4) + 2.0 * MatrixXd::Identity(8, 4);
    const VectorXd b = random_vector(rng, 8, 3.0);
    const auto p = affine_problem(J, b, Box::unbounded(4));
    const VectorXd oracle = (J.transpose() * J).ldlt().solve(J.transpose() * b);
    const SolveReport r = solve(p, VectorXd::Zero(4));
    EXPECT_LE((r.theta_star - oracle).norm(), 1e-8 * (1.0 + oracle.norm()));
  }
}

TEST(SolveProperty, ReSolveFromOptimumIsIdempotent) {
  UniformSource rng(13);
  ResidualProblem p;
  p.residual = [](const VectorXd& th) {
    VectorXd r(3);
    r << th(0) * th(0) + th(1) - 1.0, th(0) - th(1) * th(1), 0.3 * th(0) * th(1);
    return r;
  };
  p.bounds = Box::unbounded(2);
  p.dim_theta = 2;
  p.dim_r = 3;
  const SolveReport a = solve(p, random_vector(rng, 2));
  const SolveReport b = solve(p, a.theta_star);
  SolveOptions o;
  EXPECT_LT(std::abs(a.cost_star - b.cost_star), o.tol_step + 1e-14);
}

TEST(FiniteDifference, LinearAndQuadratic) {
  const auto lin = [](const VectorXd& th) -> VectorXd { return 2.0 * th; };
  // Central differences carry roundoff of order eps·|r|/h.
  EXPECT_NEAR(finite_difference_jacobian(lin, vec1(0.7))(0, 0), 2.0, 1e-9);
  const auto quad = [](const VectorXd& th) -> VectorXd { return th.cwiseProduct(th); };
  EXPECT_NEAR(finite_difference_jacobian(quad, vec1(1.0))(0, 0), 2.0, 1e-6);
}

TEST(ConvexWindow, Detection) {
  const auto p = affine_problem(MatrixXd::Identity(2, 2), VectorXd::Ones(2), Box::unbounded(2));
  EXPECT_TRUE(is_convex_window(p));
  ResidualProblem c;
  c.residual = [](const VectorXd&) { return VectorXd::Constant(2, 4.0); };
  c.bounds = Box::unbounded(3);
  c.dim_theta = 3;
  c.dim_r = 2;
  EXPECT_TRUE(is_convex_window(c));

  const SystemModel chua = make_chua_model();
  MheConfig cfg = config_from_certificates(shipped_certificates("chua"), 150, 0.934, 0.9997, 1e-3);
  WindowData d;
  d.T = 4;
  d.xbar = VectorXd::Zero(3);
  d.pbar = vec1(0.5);
  d.u.assign(4, VectorXd(0));
  d.y.assign(4, vec1(0.3));
  const BuiltWindow bw = build_window(cfg, chua, d);
  EXPECT_FALSE(is_convex_window(bw.problem));

  const SystemModel scalar = make_scalar_affine_model();
  const MheConfig sc = scalar_oracle_config();
  WindowData ds;
  ds.T = 3;
  ds.xbar = vec1(0.0);
  ds.pbar = vec1(0.0);
  ds.u.assign(3, VectorXd(0));
  ds.y.assign(3, vec1(1.0));
  const BuiltWindow bs = build_window(sc, scalar, ds);
  EXPECT_TRUE(is_convex_window(bs.problem));
}
