#include "emhe/model.hpp"

#include <cmath>
#include <limits>
#include <utility>

#include "emhe/errors.hpp"

namespace emhe {

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

void require_dim(const VectorXd& v, Eigen::Index expected, const char* what, const char* arg) {
  if (v.size() != expected) {
    throw UsageError(std::string(what) + ": argument '" + arg + "' has dimension " +
                     std::to_string(v.size()) + ", expected " + std::to_string(expected));
  }
}

void require_shape(const MatrixXd& m, Eigen::Index rows, Eigen::Index cols, const char* name) {
  if (m.rows() != rows || m.cols() != cols) {
    throw UsageError(std::string("jacobian ") + name + " has shape " + std::to_string(m.rows()) +
                     "x" + std::to_string(m.cols()) + ", expected " + std::to_string(rows) + "x" +
                     std::to_string(cols));
  }
}

// Central differences of eval(v) with per-component step h_rel·(1+|v_i|).
template <typename Eval>
MatrixXd central_difference(const Eval& eval, const VectorXd& v, Eigen::Index out_dim,
                            double h_rel) {
  MatrixXd jac(out_dim, v.size());
  VectorXd probe = v;
  for (Eigen::Index i = 0; i < v.size(); ++i) {
    const double h = h_rel * (1.0 + std::abs(v(i)));
    probe(i) = v(i) + h;
    const VectorXd plus = eval(probe);
    probe(i) = v(i) - h;
    const VectorXd minus = eval(probe);
    probe(i) = v(i);
    jac.col(i) = (plus - minus) / (2.0 * h);
  }
  return jac;
}

}  // namespace

Box::Box(VectorXd lo, VectorXd hi) : lower(std::move(lo)), upper(std::move(hi)) {
  if (lower.size() != upper.size()) throw UsageError("Box: lower/upper dimension mismatch");
  for (Eigen::Index i = 0; i < lower.size(); ++i) {
    if (std::isnan(lower(i)) || std::isnan(upper(i)) || lower(i) > upper(i)) {
      throw UsageError("Box: lower bound exceeds upper bound at index " + std::to_string(i));
    }
  }
}

Box Box::unbounded(Eigen::Index dim) {
  return Box(VectorXd::Constant(dim, -kInf), VectorXd::Constant(dim, kInf));
}

Box Box::uniform(Eigen::Index dim, double lo, double hi) {
  return Box(VectorXd::Constant(dim, lo), VectorXd::Constant(dim, hi));
}

bool Box::contains(const VectorXd& v, double tol) const {
  if (v.size() != dim()) return false;
  for (Eigen::Index i = 0; i < v.size(); ++i) {
    if (!(v(i) >= lower(i) - tol && v(i) <= upper(i) + tol)) return false;
  }
  return true;
}

bool Box::is_bounded() const { return lower.allFinite() && upper.allFinite(); }

VectorXd Box::project(const VectorXd& v) const {
  if (v.size() != dim()) throw UsageError("project: dimension mismatch");
  return v.cwiseMax(lower).cwiseMin(upper);
}

Box Box::clipped(double half_width) const {
  VectorXd lo = lower, hi = upper;
  for (Eigen::Index i = 0; i < lo.size(); ++i) {
    if (!std::isfinite(lo(i))) lo(i) = std::isfinite(hi(i)) ? hi(i) - 2.0 * half_width : -half_width;
    if (!std::isfinite(hi(i))) hi(i) = std::isfinite(lower(i)) ? lower(i) + 2.0 * half_width : half_width;
  }
  return Box(lo, hi);
}

VectorXd project(const Box& box, const VectorXd& v) { return box.project(v); }

SystemModel::SystemModel(std::string name, Dimensions dims, Map f, Map h, JacobianMap jac, Box X,
                         Box U, Box W, Box P)
    : name_(std::move(name)),
      dims_(dims),
      f_(std::move(f)),
      h_(std::move(h)),
      jac_(std::move(jac)),
      X_(std::move(X)),
      U_(std::move(U)),
      W_(std::move(W)),
      P_(std::move(P)) {
  if (!f_ || !h_) throw UsageError("SystemModel: f and h are required");
  if (dims_.n <= 0 || dims_.p_out <= 0 || dims_.m < 0 || dims_.q < 0 || dims_.o < 0) {
    throw UsageError("SystemModel: invalid dimensions");
  }
  if (X_.dim() != dims_.n || U_.dim() != dims_.m || W_.dim() != dims_.q || P_.dim() != dims_.o) {
    throw UsageError("SystemModel: box dimensions do not match the model");
  }
}

void SystemModel::check_args(const VectorXd& x, const VectorXd& u, const VectorXd& w,
                             const VectorXd& p, const char* what) const {
  require_dim(x, dims_.n, what, "x");
  require_dim(u, dims_.m, what, "u");
  require_dim(w, dims_.q, what, "w");
  require_dim(p, dims_.o, what, "p");
}

VectorXd SystemModel::step(const VectorXd& x, const VectorXd& u, const VectorXd& w,
                           const VectorXd& p) const {
  check_args(x, u, w, p, "step");
  VectorXd out = f_(x, u, w, p);
  require_dim(out, dims_.n, "step", "f(x,u,w,p)");
  return out;
}

VectorXd SystemModel::output(const VectorXd& x, const VectorXd& u, const VectorXd& w,
                             const VectorXd& p) const {
  check_args(x, u, w, p, "output");
  VectorXd out = h_(x, u, w, p);
  require_dim(out, dims_.p_out, "output", "h(x,u,w,p)");
  return out;
}

Jacobians SystemModel::jacobians(const VectorXd& x, const VectorXd& u, const VectorXd& w,
                                 const VectorXd& p) const {
  check_args(x, u, w, p, "jacobians");
  Jacobians j = jacobians_unchecked(x, u, w, p);
  require_shape(j.A, dims_.n, dims_.n, "A");
  require_shape(j.B, dims_.n, dims_.q, "B");
  require_shape(j.C, dims_.p_out, dims_.n, "C");
  require_shape(j.D, dims_.p_out, dims_.q, "D");
  require_shape(j.E, dims_.n, dims_.o, "E");
  require_shape(j.F, dims_.p_out, dims_.o, "F");
  return j;
}

Jacobians SystemModel::jacobians_unchecked(const VectorXd& x, const VectorXd& u,
                                           const VectorXd& w, const VectorXd& p) const {
  if (jac_) return jac_(x, u, w, p);
  return finite_difference_jacobians(x, u, w, p);
}

Jacobians SystemModel::finite_difference_jacobians(const VectorXd& x, const VectorXd& u,
                                                   const VectorXd& w, const VectorXd& p,
                                                   double h_rel) const {
  check_args(x, u, w, p, "finite_difference_jacobians");
  Jacobians j;
  j.A = central_difference([&](const VectorXd& v) { return f_(v, u, w, p); }, x, dims_.n, h_rel);
  j.B = central_difference([&](const VectorXd& v) { return f_(x, u, v, p); }, w, dims_.n, h_rel);
  j.E = central_difference([&](const VectorXd& v) { return f_(x, u, w, v); }, p, dims_.n, h_rel);
  j.C = central_difference([&](const VectorXd& v) { return h_(v, u, w, p); }, x, dims_.p_out,
                           h_rel);
  j.D = central_difference([&](const VectorXd& v) { return h_(x, u, v, p); }, w, dims_.p_out,
                           h_rel);
  j.F = central_difference([&](const VectorXd& v) { return h_(x, u, w, v); }, p, dims_.p_out,
                           h_rel);
  return j;
}

Trajectory simulate(const SystemModel& model, const VectorXd& x0, const VectorXd& p,
                    const std::vector<VectorXd>& u_seq, const std::vector<VectorXd>& w_seq) {
  const bool no_inputs = u_seq.empty() && model.m() == 0;
  if (!no_inputs && u_seq.size() != w_seq.size()) {
    throw UsageError("simulate: u_seq and w_seq lengths differ");
  }
  if (x0.size() != model.n() || p.size() != model.o()) {
    throw UsageError("simulate: x0 or p has the wrong dimension");
  }
  if (!model.X().contains(x0)) throw UsageError("simulate: x0 outside X");
  if (!model.P().contains(p)) throw UsageError("simulate: p outside P");

  Trajectory traj;
  traj.p = p;
  traj.w_seq = w_seq;
  traj.u_seq = no_inputs ? std::vector<VectorXd>(w_seq.size(), VectorXd(0)) : u_seq;
  traj.x_seq.reserve(w_seq.size() + 1);
  traj.y_seq.reserve(w_seq.size());
  traj.x_seq.push_back(x0);
  for (std::size_t t = 0; t < w_seq.size(); ++t) {
    const VectorXd& x = traj.x_seq.back();
    traj.y_seq.push_back(model.output(x, traj.u_seq[t], w_seq[t], p));
    traj.x_seq.push_back(model.step(x, traj.u_seq[t], w_seq[t], p));
    if (!model.X().contains(traj.x_seq.back())) traj.state_violations.push_back(t + 1);
  }
  return traj;
}

}  // namespace emhe
