#pragma once

#include <Eigen/Dense>
#include <cstddef>
#include <functional>
#include <string>
#include <vector>

namespace emhe {

using Eigen::MatrixXd;
using Eigen::VectorXd;

/// Axis-aligned box; entries may be ±infinity.
struct Box {
  VectorXd lower;
  VectorXd upper;

  Box() = default;
  Box(VectorXd lo, VectorXd hi);

  static Box unbounded(Eigen::Index dim);
  static Box uniform(Eigen::Index dim, double lo, double hi);

  Eigen::Index dim() const { return lower.size(); }
  bool contains(const VectorXd& v, double tol = 0.0) const;
  bool is_bounded() const;
  /// Componentwise clamp. Idempotent and non-expansive in every p-norm.
  VectorXd project(const VectorXd& v) const;
  /// Box with every infinite side replaced by ±half_width (finite sides kept).
  Box clipped(double half_width) const;
};

VectorXd project(const Box& box, const VectorXd& v);

/// Point Jacobians of f and h with respect to x, w and p.
///   A = ∂f/∂x (n×n), B = ∂f/∂w (n×q), E = ∂f/∂p (n×o)
///   C = ∂h/∂x (p×n), D = ∂h/∂w (p×q), F = ∂h/∂p (p×o)
struct Jacobians {
  MatrixXd A, B, C, D, E, F;
};

struct Dimensions {
  Eigen::Index n = 0;      // state
  Eigen::Index m = 0;      // known input
  Eigen::Index p_out = 0;  // output
  Eigen::Index q = 0;      // disturbance
  Eigen::Index o = 0;      // parameter
};

class SystemModel {
 public:
  using Map = std::function<VectorXd(const VectorXd& x, const VectorXd& u, const VectorXd& w,
                                     const VectorXd& p)>;
  using JacobianMap = std::function<Jacobians(const VectorXd& x, const VectorXd& u,
                                              const VectorXd& w, const VectorXd& p)>;

  /// `jac` may be empty, in which case central finite differences are used.
  SystemModel(std::string name, Dimensions dims, Map f, Map h, JacobianMap jac, Box X, Box U,
              Box W, Box P);

  const std::string& name() const { return name_; }
  const Dimensions& dims() const { return dims_; }
  Eigen::Index n() const { return dims_.n; }
  Eigen::Index m() const { return dims_.m; }
  Eigen::Index p_out() const { return dims_.p_out; }
  Eigen::Index q() const { return dims_.q; }
  Eigen::Index o() const { return dims_.o; }

  const Box& X() const { return X_; }
  const Box& U() const { return U_; }
  const Box& W() const { return W_; }
  const Box& P() const { return P_; }

  /// f(x,u,w,p). No projection.
  VectorXd step(const VectorXd& x, const VectorXd& u, const VectorXd& w, const VectorXd& p) const;
  /// h(x,u,w,p).
  VectorXd output(const VectorXd& x, const VectorXd& u, const VectorXd& w,
                  const VectorXd& p) const;
  Jacobians jacobians(const VectorXd& x, const VectorXd& u, const VectorXd& w,
                      const VectorXd& p) const;
  /// Central-difference Jacobians regardless of whether analytic ones exist.
  Jacobians finite_difference_jacobians(const VectorXd& x, const VectorXd& u, const VectorXd& w,
                                        const VectorXd& p, double h_rel = 1e-6) const;

  bool has_analytic_jacobians() const { return static_cast<bool>(jac_); }

  /// Unchecked variants for inner loops whose dimensions are already validated.
  VectorXd step_unchecked(const VectorXd& x, const VectorXd& u, const VectorXd& w,
                          const VectorXd& p) const {
    return f_(x, u, w, p);
  }
  VectorXd output_unchecked(const VectorXd& x, const VectorXd& u, const VectorXd& w,
                            const VectorXd& p) const {
    return h_(x, u, w, p);
  }
  Jacobians jacobians_unchecked(const VectorXd& x, const VectorXd& u, const VectorXd& w,
                                const VectorXd& p) const;

 private:
  void check_args(const VectorXd& x, const VectorXd& u, const VectorXd& w, const VectorXd& p,
                  const char* what) const;

  std::string name_;
  Dimensions dims_;
  Map f_;
  Map h_;
  JacobianMap jac_;
  Box X_, U_, W_, P_;
};

/// x over [0,T], u, w and y over [0,T-1].
struct Trajectory {
  std::vector<VectorXd> x_seq;
  std::vector<VectorXd> u_seq;
  std::vector<VectorXd> w_seq;
  VectorXd p;
  std::vector<VectorXd> y_seq;
  /// Indices t at which x_seq[t] lies outside X (diagnostic only).
  std::vector<std::size_t> state_violations;

  std::size_t length() const { return w_seq.size(); }
};

/// Rolls the model forward. An empty u_seq is accepted for models with m = 0.
Trajectory simulate(const SystemModel& model, const VectorXd& x0, const VectorXd& p,
                    const std::vector<VectorXd>& u_seq, const std::vector<VectorXd>& w_seq);

}  // namespace emhe
