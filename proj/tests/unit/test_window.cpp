#include <gtest/gtest.h>

#include <cmath>

#include "emhe/errors.hpp"
#include "emhe/mhe.hpp"
#include "test_support.hpp"

using namespace emhe;
using namespace emhe::testing;

namespace {

MheConfig identity_config(const SystemModel& m) {
  MheConfig c;
  c.eta_x = 0.5;
  c.eta_p = 0.4;
  c.lambda_gamma = 1.5;
  c.eta1 = 0.9;
  c.eta2 = 0.8;
  c.W = MatrixXd::Identity(m.n(), m.n());
  c.V = MatrixXd::Identity(m.o(), m.o());
  c.Q = MatrixXd::Identity(m.q(), m.q());
  c.R = MatrixXd::Identity(m.p_out(), m.p_out());
  return c;
}

WindowData window_data(UniformSource& rng, const SystemModel& m, int T, double y_amp) {
  WindowData d;
  d.T = T;
  d.xbar = random_vector(rng, m.n(), 0.5);
  d.pbar = random_vector(rng, m.o(), 0.5);
  for (int k = 0; k < T; ++k) {
    d.u.push_back(VectorXd::Zero(m.m()));
    d.y.push_back(random_vector(rng, m.p_out(), y_amp));
  }
  return d;
}

void expect_structured_matches_dense(const WindowProblem& win, const VectorXd& th,
                                     UniformSource& rng) {
  const MatrixXd J = win.jacobian(th);
  const VectorXd r = win.residual(th);
  const auto lm = win.linearize(th);
  const double scale = 1.0 + r.cwiseAbs().maxCoeff() * (1.0 + J.cwiseAbs().maxCoeff());
  EXPECT_LT((lm->residual() - r).cwiseAbs().maxCoeff(), 1e-14 * scale);
  const VectorXd g = J.transpose() * r;
  EXPECT_LT((lm->gradient() - g).cwiseAbs().maxCoeff(), 1e-10 * (1.0 + g.cwiseAbs().maxCoeff()));
  const VectorXd d = J.colwise().squaredNorm().transpose();
  EXPECT_LT((lm->jtj_diagonal() - d).cwiseAbs().maxCoeff(), 1e-10 * (1.0 + d.maxCoeff()));
  VectorXd damping(th.size());
  for (Eigen::Index i = 0; i < damping.size(); ++i) damping(i) = 1e-3 + rng.unit();
  MatrixXd H = J.transpose() * J;
  H.diagonal() += damping;
  const VectorXd oracle = -H.ldlt().solve(g);
  const VectorXd delta = lm->solve_damped(damping);
  EXPECT_LT((delta - oracle).norm(), 1e-8 * (1.0 + oracle.norm()));
}

}  // namespace

TEST(Gamma, Values) {
  EXPECT_DOUBLE_EQ(gamma(0, 0.3, 0.7, 1.0), 2.0);
  EXPECT_DOUBLE_EQ(gamma(2, 0.5, 0.5, 1.0), 0.5);
  EXPECT_DOUBLE_EQ(gamma(3, 0.5, 0.9, 0.0), 0.125);
}

TEST(Window, SingleStageCostByHand) {
  const SystemModel m = make_chua_model();
  const MheConfig c = identity_config(m);
  UniformSource rng(1);
  WindowData d = window_data(rng, m, 1, 1.0);
  d.xbar << 1.0, 0.2, -0.5;
  const BuiltWindow bw = build_window(c, m, d);
  VectorXd th(3 + 1 + 4);
  th << 1.1, 0.1, -0.4, 0.5, 0.01, -0.02, 0.03, 0.05;
  const VectorXd x = th.head(3), p = th.segment(3, 1), w = th.tail(4);
  const double y_hat = m.output(x, VectorXd(0), w, p)(0);
  const double expected = gamma(1, c.eta_x, c.eta_p, c.lambda_gamma) * (x - d.xbar).squaredNorm() +
                          c.eta1 * (p - d.pbar).squaredNorm() + w.squaredNorm() +
                          std::pow(y_hat - d.y[0](0), 2);
  // The successor of x stays inside X, so the hinge adds nothing.
  ASSERT_TRUE(m.X().contains(m.step(x, VectorXd(0), w, p)));
  EXPECT_NEAR(bw.window->cost(th), expected, 1e-14 * (1.0 + expected));
}

TEST(Window, ExactDataZeroCost) {
  const SystemModel m = make_chua_model();
  const MheConfig c = identity_config(m);
  VectorXd x0(3);
  x0 << 1, 0, -1;
  const VectorXd p = vec1(0.45);
  const std::vector<VectorXd> w(6, VectorXd::Zero(4));
  const Trajectory tr = simulate(m, x0, p, {}, w);
  WindowData d;
  d.T = 6;
  d.xbar = x0;
  d.pbar = p;
  d.u.assign(6, VectorXd(0));
  d.y = tr.y_seq;
  const BuiltWindow bw = build_window(c, m, d);
  VectorXd th = VectorXd::Zero(bw.problem.dim_theta);
  th.head(3) = x0;
  th(3) = 0.45;
  EXPECT_EQ(bw.window->cost(th), 0.0);
  const auto xs = bw.window->rollout(th);
  EXPECT_EQ(xs.back(), tr.x_seq.back());
}

TEST(Window, DoublingROnlyScalesOutputTerms) {
  const SystemModel m = make_chua_model();
  MheConfig c = identity_config(m);
  UniformSource rng(2);
  const WindowData d = window_data(rng, m, 5, 1.0);
  VectorXd th = VectorXd::Zero(3 + 1 + 5 * 4);
  th.head(3) << 0.5, 0.1, 0.2;
  th(3) = 0.4;
  const double base = build_window(c, m, d).window->cost(th);
  MheConfig c0 = c;
  c0.R *= 1e-300;  // output terms vanish
  const double no_output = build_window(c0, m, d).window->cost(th);
  MheConfig c2 = c;
  c2.R *= 2.0;
  const double doubled = build_window(c2, m, d).window->cost(th);
  EXPECT_NEAR(doubled - no_output, 2.0 * (base - no_output), 1e-12 * (1.0 + base));
}

TEST(Window, EmptyWindowIsUsageError) {
  const SystemModel m = make_chua_model();
  const MheConfig c = identity_config(m);
  WindowData d;
  d.T = 0;
  d.xbar = VectorXd::Zero(3);
  d.pbar = vec1(0.5);
  EXPECT_THROW(build_window(c, m, d), UsageError);
}

TEST(Window, HingeRowsOnlyForBoundedStates) {
  const SystemModel chua = make_chua_model();
  const SystemModel scalar = make_scalar_affine_model();
  UniformSource rng(3);
  const WindowData dc = window_data(rng, chua, 4, 1.0);
  const WindowData ds = window_data(rng, scalar, 4, 1.0);
  const BuiltWindow bc = build_window(identity_config(chua), chua, dc);
  const BuiltWindow bs = build_window(identity_config(scalar), scalar, ds);
  EXPECT_EQ(bc.window->rows(), static_cast<std::size_t>(3 + 1 + 4 * (4 + 1) + 4 * 3));
  EXPECT_EQ(bs.window->rows(), static_cast<std::size_t>(1 + 1 + 4 * (1 + 1)));
}

TEST(Window, ChuaJacobianMatchesFiniteDifferences) {
  const SystemModel m = make_chua_model();
  const CertificateSet certs = shipped_certificates("chua");
  const MheConfig c = config_from_certificates(certs, 150, 0.934, 0.9997, 1e-3);
  UniformSource rng(4);
  for (int trial = 0; trial < 5; ++trial) {
    const WindowData d = window_data(rng, m, 8, 1.0);
    const BuiltWindow bw = build_window(c, m, d);
    VectorXd th = random_vector(rng, bw.problem.dim_theta, 0.01);
    th.head(3) << rng.uniform(-0.5, 2.5), rng.uniform(-0.8, 0.8), rng.uniform(-2.5, 2.5);
    th(3) = rng.uniform(0.2, 0.8);
    const MatrixXd J = bw.window->jacobian(th);
    const MatrixXd F = finite_difference_jacobian(bw.problem.residual, th);
    EXPECT_LT((J - F).cwiseAbs().maxCoeff(), 1e-5 * (1.0 + J.cwiseAbs().maxCoeff()));
  }
}

TEST(Window, RiccatiBackendMatchesDenseOnChua) {
  const SystemModel m = make_chua_model();
  const CertificateSet certs = shipped_certificates("chua");
  const MheConfig c = config_from_certificates(certs, 150, 0.934, 0.9997, 1e-3);
  UniformSource rng(5);
  for (int trial = 0; trial < 6; ++trial) {
    const WindowData d = window_data(rng, m, 1 + trial * 3, 1.0);
    const BuiltWindow bw = build_window(c, m, d);
    VectorXd th = random_vector(rng, bw.problem.dim_theta, trial % 2 ? 0.3 : 0.01);
    th.head(3) << rng.uniform(-1, 3), rng.uniform(-1, 1), rng.uniform(-3, 3);
    th(3) = rng.uniform(0.2, 0.8);
    expect_structured_matches_dense(*bw.window, th, rng);
  }
}

TEST(Window, RiccatiBackendMatchesDenseWithActiveHinge) {
  const SystemModel m = make_chua_model();
  const MheConfig c = identity_config(m);
  UniformSource rng(6);
  const WindowData d = window_data(rng, m, 6, 1.0);
  const BuiltWindow bw = build_window(c, m, d);
  VectorXd th = VectorXd::Zero(bw.problem.dim_theta);
  th.head(3) << 2.9, 0.9, 2.9;
  th(3) = 0.2;
  for (int k = 0; k < 6; ++k) th.segment(4 + 4 * k, 4) << 0.5, 0.5, 0.5, 0.0;
  const auto xs = bw.window->rollout(th);
  bool outside = false;
  for (std::size_t k = 1; k < xs.size(); ++k) outside = outside || !m.X().contains(xs[k]);
  ASSERT_TRUE(outside);
  expect_structured_matches_dense(*bw.window, th, rng);
}

TEST(Window, RiccatiBackendMatchesDenseOnRandomAffineModels) {
  UniformSource rng(7);
  for (int trial = 0; trial < 25; ++trial) {
    const auto n = 1 + static_cast<Eigen::Index>(trial % 3);
    const auto o = 1 + static_cast<Eigen::Index>(trial % 2);
    const SystemModel m = random_affine_model(rng, n, o, 1 + trial % 2, 1 + trial % 3);
    const MheConfig c = identity_config(m);
    const WindowData d = window_data(rng, m, 1 + trial % 7, 1.0);
    const BuiltWindow bw = build_window(c, m, d);
    const VectorXd th = random_vector(rng, bw.problem.dim_theta, 1.0);
    expect_structured_matches_dense(*bw.window, th, rng);
  }
}

TEST(Window, BoundsLayout) {
  const SystemModel m = make_chua_model();
  const MheConfig c = identity_config(m);
  UniformSource rng(8);
  const BuiltWindow bw = build_window(c, m, window_data(rng, m, 3, 1.0));
  const Box b = bw.window->bounds();
  EXPECT_EQ(b.lower(0), -1.0);
  EXPECT_EQ(b.upper(2), 3.0);
  EXPECT_EQ(b.lower(3), 0.2);
  EXPECT_EQ(b.upper(3), 0.8);
  EXPECT_TRUE(std::isinf(b.upper(4)));
}
