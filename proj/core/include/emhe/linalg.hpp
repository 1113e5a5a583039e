#pragma once

#include <Eigen/Dense>

namespace emhe::linalg {

using Eigen::MatrixXd;
using Eigen::VectorXd;

double min_eigenvalue(const MatrixXd& symmetric);
double max_eigenvalue(const MatrixXd& symmetric);

/// Largest λ with det(a − λ·b) = 0, for symmetric a and symmetric positive
/// definite b.
double max_generalized_eigenvalue(const MatrixXd& a, const MatrixXd& b);

/// Upper factor U with UᵀU = weight, so ‖U v‖² = ‖v‖²_weight.
/// Throws UsageError when the weight is not positive definite.
MatrixXd weight_factor(const MatrixXd& weight);

/// Solves ΦᵀPΦ − η·P = −rhs for symmetric P (Kronecker form; meant for small n).
MatrixXd solve_discrete_lyapunov(const MatrixXd& phi, double eta, const MatrixXd& rhs);

double spectral_radius(const MatrixXd& m);
double operator_norm(const MatrixXd& m);

inline MatrixXd symmetrize(const MatrixXd& m) { return 0.5 * (m + m.transpose()); }

bool is_positive_definite(const MatrixXd& symmetric);

/// Coefficients c₀..c_n of det(sI − m) = sⁿ + c₁sⁿ⁻¹ + … + c_n (c₀ = 1).
VectorXd characteristic_polynomial(const MatrixXd& m);

/// Monic polynomial coefficients with the given real roots.
VectorXd polynomial_from_roots(const VectorXd& roots);

}  // namespace emhe::linalg
