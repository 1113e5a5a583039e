#include <algorithm>
#include <cmath>
#include <utility>

#include "emhe/errors.hpp"
#include "emhe/linalg.hpp"
#include "emhe/mhe.hpp"

namespace emhe {

namespace {

// Per-stage data of the linearized window in augmented coordinates z = (δx, δp).
struct Stage {
  MatrixXd Abar;  // nz×nz
  MatrixXd Bbar;  // nz×q
  MatrixXd Mz;    // stage rows w.r.t. z_k
  MatrixXd Mv;    // stage rows w.r.t. v_k = δw_k
  VectorXd r;     // stage residual
};

// Node rows: priors at k = 0, hinge penalty at k ≥ 1 (may be empty).
struct Node {
  MatrixXd Hz;
  VectorXd h;
};

class RiccatiLinearModel final : public LinearModel {
 public:
  RiccatiLinearModel(WindowLayout layout, std::vector<Stage> stages, std::vector<Node> nodes,
                     VectorXd residual)
      : lay_(layout), stages_(std::move(stages)), nodes_(std::move(nodes)), r_(std::move(residual)) {}

  const VectorXd& residual() const override { return r_; }

  VectorXd gradient() const override {
    const int T = lay_.T;
    const Eigen::Index nz = lay_.n + lay_.o;
    VectorXd g(lay_.dim());
    VectorXd lam = node_grad(T, VectorXd::Zero(nz));
    for (int k = T - 1; k >= 0; --k) {
      const Stage& s = stages_[static_cast<std::size_t>(k)];
      g.segment(nz + lay_.q * k, lay_.q) = s.Mv.transpose() * s.r + s.Bbar.transpose() * lam;
      lam = node_grad(k, s.Mz.transpose() * s.r + s.Abar.transpose() * lam);
    }
    g.head(nz) = lam;
    return g;
  }

  VectorXd jtj_diagonal() const override {
    const int T = lay_.T;
    const Eigen::Index nz = lay_.n + lay_.o;
    VectorXd d(lay_.dim());
    MatrixXd G = node_gram(T, MatrixXd::Zero(nz, nz));
    for (int k = T - 1; k >= 0; --k) {
      const Stage& s = stages_[static_cast<std::size_t>(k)];
      d.segment(nz + lay_.q * k, lay_.q) =
          s.Mv.colwise().squaredNorm().transpose() +
          (s.Bbar.transpose() * G * s.Bbar).diagonal();
      G = node_gram(k, s.Mz.transpose() * s.Mz + s.Abar.transpose() * G * s.Abar);
    }
    d.head(nz) = G.diagonal();
    return d;
  }

  VectorXd solve_damped(const VectorXd& damping) const override {
    const int T = lay_.T;
    const Eigen::Index nz = lay_.n + lay_.o;
    const Eigen::Index q = lay_.q;
    std::vector<MatrixXd> K(static_cast<std::size_t>(T));
    std::vector<VectorXd> kff(static_cast<std::size_t>(T));
    MatrixXd S = node_gram(T, MatrixXd::Zero(nz, nz));
    VectorXd s = node_grad(T, VectorXd::Zero(nz));
    for (int k = T - 1; k >= 0; --k) {
      const Stage& st = stages_[static_cast<std::size_t>(k)];
      const MatrixXd SB = S * st.Bbar;
      MatrixXd Quu = st.Mv.transpose() * st.Mv + st.Bbar.transpose() * SB;
      Quu.diagonal() += damping.segment(nz + q * k, q);
      const MatrixXd Quz = st.Mv.transpose() * st.Mz + SB.transpose() * st.Abar;
      const MatrixXd Qzz = st.Mz.transpose() * st.Mz + st.Abar.transpose() * S * st.Abar;
      const VectorXd qu = st.Mv.transpose() * st.r + st.Bbar.transpose() * s;
      const VectorXd qz = st.Mz.transpose() * st.r + st.Abar.transpose() * s;
      Eigen::LLT<MatrixXd> llt(Quu);
      MatrixXd Kk;
      VectorXd kk;
      if (llt.info() == Eigen::Success) {
        Kk = -llt.solve(Quz);
        kk = -llt.solve(qu);
      } else {
        const auto ldlt = Quu.ldlt();
        Kk = -ldlt.solve(Quz);
        kk = -ldlt.solve(qu);
      }
      S = node_gram(k, linalg::symmetrize(Qzz + Quz.transpose() * Kk));
      s = node_grad(k, qz + Quz.transpose() * kk);
      K[static_cast<std::size_t>(k)] = std::move(Kk);
      kff[static_cast<std::size_t>(k)] = std::move(kk);
    }
    S.diagonal() += damping.head(nz);
    VectorXd delta(lay_.dim());
    Eigen::LLT<MatrixXd> llt0(S);
    VectorXd z = llt0.info() == Eigen::Success ? VectorXd(-llt0.solve(s))
                                               : VectorXd(-S.ldlt().solve(s));
    delta.head(nz) = z;
    for (int k = 0; k < T; ++k) {
      const Stage& st = stages_[static_cast<std::size_t>(k)];
      const VectorXd v = K[static_cast<std::size_t>(k)] * z + kff[static_cast<std::size_t>(k)];
      delta.segment(nz + q * k, q) = v;
      z = st.Abar * z + st.Bbar * v;
    }
    return delta;
  }

 private:
  VectorXd node_grad(int k, VectorXd acc) const {
    const Node& nd = nodes_[static_cast<std::size_t>(k)];
    if (nd.h.size()) acc += nd.Hz.transpose() * nd.h;
    return acc;
  }
  MatrixXd node_gram(int k, MatrixXd acc) const {
    const Node& nd = nodes_[static_cast<std::size_t>(k)];
    if (nd.h.size()) acc += nd.Hz.transpose() * nd.Hz;
    return acc;
  }

  WindowLayout lay_;
  std::vector<Stage> stages_;
  std::vector<Node> nodes_;
  VectorXd r_;
};

}  // namespace

double gamma(int s, double eta_x, double eta_p, double lambda_gamma) {
  return gamma_fn(s, eta_x, eta_p, lambda_gamma);
}

WindowProblem::WindowProblem(const SystemModel& model, const MheConfig& cfg, WindowData data)
    : model_(model), cfg_(cfg), data_(std::move(data)) {
  const int T = data_.T;
  if (T < 1) throw UsageError("build_window: the window is empty (t = 0)");
  if (data_.u.size() != static_cast<std::size_t>(T) ||
      data_.y.size() != static_cast<std::size_t>(T)) {
    throw UsageError("build_window: u/y buffers must hold exactly T entries");
  }
  if (data_.xbar.size() != model.n() || data_.pbar.size() != model.o()) {
    throw UsageError("build_window: prior dimensions do not match the model");
  }
  layout_ = WindowLayout{model.n(), model.o(), model.q(), T};
  Uw_ = linalg::weight_factor(cfg.W);
  Uq_ = linalg::weight_factor(cfg.Q);
  Ur_ = linalg::weight_factor(cfg.R);
  Uv_ = model.o() > 0 ? linalg::weight_factor(cfg.V) : MatrixXd(0, 0);
  if (Uw_.rows() != model.n() || Uq_.rows() != model.q() || Ur_.rows() != model.p_out() ||
      Uv_.rows() != model.o()) {
    throw UsageError("build_window: weight dimensions do not match the model");
  }
  sx_ = std::sqrt(gamma(T, cfg.eta_x, cfg.eta_p, cfg.lambda_gamma));
  sp_ = std::sqrt(std::pow(cfg.eta1, T));
  stage_scale_.resize(static_cast<std::size_t>(T));
  for (int k = 0; k < T; ++k) {
    stage_scale_[static_cast<std::size_t>(k)] = std::sqrt(std::pow(cfg.eta2, T - 1 - k));
  }
  hinge_ = model.X().lower.array().isFinite().any() || model.X().upper.array().isFinite().any();
  hinge_sqrt_ = std::sqrt(cfg.hinge_weight);
  const Eigen::Index py = model.p_out();
  dim_r_ = model.n() + model.o() + T * (model.q() + py) + (hinge_ ? T * model.n() : 0);
}

std::vector<VectorXd> WindowProblem::rollout(const VectorXd& theta) const {
  std::vector<VectorXd> xs;
  xs.reserve(static_cast<std::size_t>(layout_.T + 1));
  xs.push_back(layout_.x_start(theta));
  const VectorXd p = layout_.p(theta);
  for (int k = 0; k < layout_.T; ++k) {
    xs.push_back(model_.step_unchecked(xs.back(), data_.u[static_cast<std::size_t>(k)],
                                       layout_.w(theta, k), p));
  }
  return xs;
}

VectorXd WindowProblem::residual(const VectorXd& theta) const {
  const Eigen::Index n = layout_.n, o = layout_.o, q = layout_.q, py = model_.p_out();
  const int T = layout_.T;
  VectorXd r(dim_r_);
  const VectorXd p = layout_.p(theta);
  VectorXd x = layout_.x_start(theta);
  r.head(n) = sx_ * (Uw_ * (x - data_.xbar));
  if (o > 0) r.segment(n, o) = sp_ * (Uv_ * (p - data_.pbar));
  Eigen::Index row = n + o;
  const Eigen::Index hinge_base = n + o + T * (q + py);
  for (int k = 0; k < T; ++k) {
    const auto ks = static_cast<std::size_t>(k);
    const double sc = stage_scale_[ks];
    const VectorXd w = layout_.w(theta, k);
    r.segment(row, q) = sc * (Uq_ * w);
    row += q;
    r.segment(row, py) = sc * (Ur_ * (model_.output_unchecked(x, data_.u[ks], w, p) - data_.y[ks]));
    row += py;
    x = model_.step_unchecked(x, data_.u[ks], w, p);
    if (hinge_) {
      const Box& X = model_.X();
      for (Eigen::Index i = 0; i < n; ++i) {
        r(hinge_base + k * n + i) =
            hinge_sqrt_ * (std::max(0.0, x(i) - X.upper(i)) - std::max(0.0, X.lower(i) - x(i)));
      }
    }
  }
  return r;
}

MatrixXd WindowProblem::jacobian(const VectorXd& theta) const {
  const Eigen::Index n = layout_.n, o = layout_.o, q = layout_.q, py = model_.p_out();
  const int T = layout_.T;
  const Eigen::Index dim = layout_.dim();
  MatrixXd J = MatrixXd::Zero(dim_r_, dim);
  const VectorXd p = layout_.p(theta);
  VectorXd x = layout_.x_start(theta);
  MatrixXd Sx = MatrixXd::Zero(n, dim);  // ∂x_k/∂θ
  Sx.leftCols(n).setIdentity();
  J.block(0, 0, n, n) = sx_ * Uw_;
  if (o > 0) J.block(n, n, o, o) = sp_ * Uv_;
  Eigen::Index row = n + o;
  const Eigen::Index hinge_base = n + o + T * (q + py);
  for (int k = 0; k < T; ++k) {
    const auto ks = static_cast<std::size_t>(k);
    const double sc = stage_scale_[ks];
    const VectorXd w = layout_.w(theta, k);
    const Eigen::Index wc = n + o + q * k;
    const Jacobians jac = model_.jacobians_unchecked(x, data_.u[ks], w, p);
    J.block(row, wc, q, q) = sc * Uq_;
    row += q;
    MatrixXd Jy = jac.C * Sx;
    if (o > 0) Jy.middleCols(n, o) += jac.F;
    Jy.middleCols(wc, q) += jac.D;
    J.middleRows(row, py) = sc * (Ur_ * Jy);
    row += py;
    MatrixXd Sn = jac.A * Sx;
    if (o > 0) Sn.middleCols(n, o) += jac.E;
    Sn.middleCols(wc, q) += jac.B;
    Sx = std::move(Sn);
    x = model_.step_unchecked(x, data_.u[ks], w, p);
    if (hinge_) {
      const Box& X = model_.X();
      for (Eigen::Index i = 0; i < n; ++i) {
        if (x(i) > X.upper(i) || x(i) < X.lower(i)) {
          J.row(hinge_base + k * n + i) = hinge_sqrt_ * Sx.row(i);
        }
      }
    }
  }
  return J;
}

std::unique_ptr<LinearModel> WindowProblem::linearize(const VectorXd& theta) const {
  const Eigen::Index n = layout_.n, o = layout_.o, q = layout_.q, py = model_.p_out();
  const Eigen::Index nz = n + o;
  const int T = layout_.T;
  std::vector<Stage> stages(static_cast<std::size_t>(T));
  std::vector<Node> nodes(static_cast<std::size_t>(T + 1));
  VectorXd r(dim_r_);
  const VectorXd p = layout_.p(theta);
  VectorXd x = layout_.x_start(theta);

  Node& n0 = nodes[0];
  n0.Hz = MatrixXd::Zero(nz, nz);
  n0.Hz.topLeftCorner(n, n) = sx_ * Uw_;
  if (o > 0) n0.Hz.bottomRightCorner(o, o) = sp_ * Uv_;
  n0.h.resize(nz);
  n0.h.head(n) = sx_ * (Uw_ * (x - data_.xbar));
  if (o > 0) n0.h.tail(o) = sp_ * (Uv_ * (p - data_.pbar));
  r.head(nz) = n0.h;

  Eigen::Index row = nz;
  const Eigen::Index hinge_base = nz + T * (q + py);
  for (int k = 0; k < T; ++k) {
    const auto ks = static_cast<std::size_t>(k);
    const double sc = stage_scale_[ks];
    const VectorXd w = layout_.w(theta, k);
    const Jacobians jac = model_.jacobians_unchecked(x, data_.u[ks], w, p);
    Stage& st = stages[ks];
    st.Abar = MatrixXd::Identity(nz, nz);
    st.Abar.topLeftCorner(n, n) = jac.A;
    if (o > 0) st.Abar.topRightCorner(n, o) = jac.E;
    st.Bbar = MatrixXd::Zero(nz, q);
    st.Bbar.topRows(n) = jac.B;
    st.Mz = MatrixXd::Zero(q + py, nz);
    st.Mv = MatrixXd::Zero(q + py, q);
    st.Mv.topRows(q) = sc * Uq_;
    st.Mz.bottomLeftCorner(py, n) = sc * (Ur_ * jac.C);
    if (o > 0) st.Mz.bottomRightCorner(py, o) = sc * (Ur_ * jac.F);
    st.Mv.bottomRows(py) = sc * (Ur_ * jac.D);
    st.r.resize(q + py);
    st.r.head(q) = sc * (Uq_ * w);
    st.r.tail(py) = sc * (Ur_ * (model_.output_unchecked(x, data_.u[ks], w, p) - data_.y[ks]));
    r.segment(row, q + py) = st.r;
    row += q + py;
    x = model_.step_unchecked(x, data_.u[ks], w, p);
    if (hinge_) {
      const Box& X = model_.X();
      Node& nd = nodes[ks + 1];
      nd.Hz = MatrixXd::Zero(n, nz);
      nd.h.resize(n);
      for (Eigen::Index i = 0; i < n; ++i) {
        nd.h(i) = hinge_sqrt_ * (std::max(0.0, x(i) - X.upper(i)) - std::max(0.0, X.lower(i) - x(i)));
        if (x(i) > X.upper(i) || x(i) < X.lower(i)) nd.Hz(i, i) = hinge_sqrt_;
      }
      r.segment(hinge_base + k * n, n) = nd.h;
    }
  }
  return std::make_unique<RiccatiLinearModel>(layout_, std::move(stages), std::move(nodes),
                                              std::move(r));
}

Box WindowProblem::bounds() const {
  const Eigen::Index n = layout_.n, o = layout_.o, q = layout_.q;
  const Eigen::Index dim = layout_.dim();
  VectorXd lo(dim), hi(dim);
  lo.head(n) = model_.X().lower;
  hi.head(n) = model_.X().upper;
  lo.segment(n, o) = model_.P().lower;
  hi.segment(n, o) = model_.P().upper;
  for (int k = 0; k < layout_.T; ++k) {
    lo.segment(n + o + q * k, q) = model_.W().lower;
    hi.segment(n + o + q * k, q) = model_.W().upper;
  }
  return Box(lo, hi);
}

ResidualProblem WindowProblem::as_residual_problem(bool structured) const {
  ResidualProblem prob;
  prob.residual = [this](const VectorXd& th) { return residual(th); };
  prob.jacobian = [this](const VectorXd& th) { return jacobian(th); };
  if (structured) prob.linearize = [this](const VectorXd& th) { return linearize(th); };
  prob.bounds = bounds();
  prob.dim_theta = layout_.dim();
  prob.dim_r = dim_r_;
  return prob;
}

BuiltWindow build_window(const MheConfig& cfg, const SystemModel& model, WindowData data) {
  BuiltWindow b;
  b.window = std::make_unique<WindowProblem>(model, cfg, std::move(data));
  b.problem = b.window->as_residual_problem(true);
  return b;
}

}  // namespace emhe
