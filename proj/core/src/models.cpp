#include "emhe/models.hpp"

#include <utility>

#include "emhe/errors.hpp"

namespace emhe {

double chua_a11(const ChuaParams& c, double x1, double p) {
  return 1.0 - c.t_delta * c.b1 * (c.a1 + 2.0 * c.a2 * x1 + 3.0 * p * x1 * x1);
}

SystemModel make_chua_model(const ChuaParams& c) {
  Dimensions dims{3, 0, 1, 4, 1};
  auto f = [c](const VectorXd& x, const VectorXd&, const VectorXd& w, const VectorXd& p) {
    VectorXd xn(3);
    const double x1 = x(0);
    xn(0) = x1 + c.t_delta * c.b1 * (x(1) - c.a1 * x1 - c.a2 * x1 * x1 - p(0) * x1 * x1 * x1) +
            w(0);
    xn(1) = x(1) + c.t_delta * (x1 - x(1) + x(2)) + w(1);
    xn(2) = x(2) - c.t_delta * c.b2 * x(1) + w(2);
    return xn;
  };
  auto h = [](const VectorXd& x, const VectorXd&, const VectorXd& w, const VectorXd&) {
    VectorXd y(1);
    y(0) = x(0) + w(3);
    return y;
  };
  auto jac = [c](const VectorXd& x, const VectorXd&, const VectorXd&, const VectorXd& p) {
    const double td = c.t_delta;
    const double x1 = x(0);
    Jacobians j;
    j.A.resize(3, 3);
    j.A << chua_a11(c, x1, p(0)), td * c.b1, 0.0,
           td, 1.0 - td, td,
           0.0, -td * c.b2, 1.0;
    j.B = MatrixXd::Zero(3, 4);
    j.B.leftCols(3).setIdentity();
    j.E = MatrixXd::Zero(3, 1);
    j.E(0, 0) = -td * c.b1 * x1 * x1 * x1;
    j.C = MatrixXd::Zero(1, 3);
    j.C(0, 0) = 1.0;
    j.D = MatrixXd::Zero(1, 4);
    j.D(0, 3) = 1.0;
    j.F = MatrixXd::Zero(1, 1);
    return j;
  };
  VectorXd xlo(3), xhi(3);
  xlo << -1.0, -1.0, -3.0;
  xhi << 3.0, 1.0, 3.0;
  return SystemModel("chua", dims, f, h, jac, Box(xlo, xhi), Box::unbounded(0),
                     Box::unbounded(4), Box::uniform(1, 0.2, 0.8));
}

SystemModel make_affine_model(const AffineParams& in, Box X, Box U, Box W, Box P,
                              std::string name) {
  const Eigen::Index n = in.A.rows();
  const Eigen::Index q = in.B.cols();
  const Eigen::Index o = in.E.cols();
  const Eigen::Index py = in.C.rows();
  const Eigen::Index m = U.dim();
  AffineParams a = in;
  if (a.Bu.size() == 0) a.Bu = MatrixXd::Zero(n, m);
  if (a.Du.size() == 0) a.Du = MatrixXd::Zero(py, m);
  if (a.f0.size() == 0) a.f0 = VectorXd::Zero(n);
  if (a.h0.size() == 0) a.h0 = VectorXd::Zero(py);
  if (a.A.cols() != n || a.B.rows() != n || a.E.rows() != n || a.C.cols() != n ||
      a.D.rows() != py || a.D.cols() != q || a.F.rows() != py || a.F.cols() != o ||
      a.Bu.rows() != n || a.Bu.cols() != m || a.Du.rows() != py || a.Du.cols() != m ||
      a.f0.size() != n || a.h0.size() != py) {
    throw UsageError("make_affine_model: inconsistent matrix shapes");
  }
  Dimensions dims{n, m, py, q, o};
  auto f = [a](const VectorXd& x, const VectorXd& u, const VectorXd& w, const VectorXd& p) {
    VectorXd out = a.A * x + a.B * w + a.E * p + a.f0;
    if (u.size() > 0) out += a.Bu * u;
    return out;
  };
  auto h = [a](const VectorXd& x, const VectorXd& u, const VectorXd& w, const VectorXd& p) {
    VectorXd out = a.C * x + a.D * w + a.F * p + a.h0;
    if (u.size() > 0) out += a.Du * u;
    return out;
  };
  Jacobians fixed{a.A, a.B, a.C, a.D, a.E, a.F};
  auto jac = [fixed](const VectorXd&, const VectorXd&, const VectorXd&, const VectorXd&) {
    return fixed;
  };
  return SystemModel(std::move(name), dims, f, h, jac, std::move(X), std::move(U), std::move(W),
                     std::move(P));
}

SystemModel make_scalar_affine_model(double a) {
  AffineParams params;
  params.A = MatrixXd::Constant(1, 1, a);
  params.B = MatrixXd::Ones(1, 1);
  params.E = MatrixXd::Ones(1, 1);
  params.C = MatrixXd::Ones(1, 1);
  params.D = MatrixXd::Zero(1, 1);
  params.F = MatrixXd::Zero(1, 1);
  return make_affine_model(params, Box::unbounded(1), Box::unbounded(0), Box::unbounded(1),
                           Box::unbounded(1), "scalar_affine");
}

SystemModel make_model_by_name(const std::string& name) {
  if (name == "chua") return make_chua_model();
  if (name == "scalar_affine") return make_scalar_affine_model();
  throw UsageError("unknown model '" + name + "' (expected chua or scalar_affine)");
}

}  // namespace emhe
