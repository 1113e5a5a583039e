#include "emhe/linalg.hpp"

#include <Eigen/Eigenvalues>

#include "emhe/errors.hpp"

namespace emhe::linalg {

namespace {

void require_square(const MatrixXd& m, const char* what) {
  if (m.rows() != m.cols() || m.rows() == 0) {
    throw UsageError(std::string(what) + ": expected a non-empty square matrix");
  }
}

}  // namespace

double min_eigenvalue(const MatrixXd& symmetric) {
  require_square(symmetric, "min_eigenvalue");
  Eigen::SelfAdjointEigenSolver<MatrixXd> es(symmetrize(symmetric), Eigen::EigenvaluesOnly);
  return es.eigenvalues()(0);
}

double max_eigenvalue(const MatrixXd& symmetric) {
  require_square(symmetric, "max_eigenvalue");
  Eigen::SelfAdjointEigenSolver<MatrixXd> es(symmetrize(symmetric), Eigen::EigenvaluesOnly);
  return es.eigenvalues()(es.eigenvalues().size() - 1);
}

double max_generalized_eigenvalue(const MatrixXd& a, const MatrixXd& b) {
  require_square(a, "max_generalized_eigenvalue");
  if (a.rows() != b.rows() || a.cols() != b.cols()) {
    throw UsageError("max_generalized_eigenvalue: shape mismatch");
  }
  if (!is_positive_definite(b)) {
    throw UsageError("max_generalized_eigenvalue: second argument must be positive definite");
  }
  Eigen::GeneralizedSelfAdjointEigenSolver<MatrixXd> es(symmetrize(a), symmetrize(b),
                                                        Eigen::EigenvaluesOnly);
  return es.eigenvalues()(es.eigenvalues().size() - 1);
}

MatrixXd weight_factor(const MatrixXd& weight) {
  require_square(weight, "weight_factor");
  Eigen::LLT<MatrixXd> llt(symmetrize(weight));
  if (llt.info() != Eigen::Success) {
    throw UsageError("weight_factor: weight matrix is not positive definite");
  }
  return llt.matrixU();
}

MatrixXd solve_discrete_lyapunov(const MatrixXd& phi, double eta, const MatrixXd& rhs) {
  require_square(phi, "solve_discrete_lyapunov");
  const Eigen::Index n = phi.rows();
  if (rhs.rows() != n || rhs.cols() != n) {
    throw UsageError("solve_discrete_lyapunov: rhs shape mismatch");
  }
  // vec(ΦᵀPΦ) = (Φᵀ ⊗ Φᵀ) vec(P) for column-major vec.
  const Eigen::Index nn = n * n;
  MatrixXd op = -eta * MatrixXd::Identity(nn, nn);
  for (Eigen::Index i = 0; i < n; ++i) {
    for (Eigen::Index j = 0; j < n; ++j) {
      op.block(i * n, j * n, n, n) += phi(j, i) * phi.transpose();
    }
  }
  const MatrixXd neg_rhs = -rhs;
  const VectorXd vec_rhs = Eigen::Map<const VectorXd>(neg_rhs.data(), nn);
  Eigen::FullPivLU<MatrixXd> lu(op);
  if (!lu.isInvertible()) {
    throw DerivationError("solve_discrete_lyapunov: operator is singular");
  }
  const VectorXd vec_p = lu.solve(vec_rhs);
  return symmetrize(Eigen::Map<const MatrixXd>(vec_p.data(), n, n));
}

double spectral_radius(const MatrixXd& m) {
  require_square(m, "spectral_radius");
  Eigen::EigenSolver<MatrixXd> es(m, false);
  return es.eigenvalues().cwiseAbs().maxCoeff();
}

double operator_norm(const MatrixXd& m) {
  if (m.size() == 0) return 0.0;
  Eigen::JacobiSVD<MatrixXd> svd(m);
  return svd.singularValues()(0);
}

bool is_positive_definite(const MatrixXd& symmetric) {
  if (symmetric.rows() != symmetric.cols() || symmetric.rows() == 0) return false;
  Eigen::LLT<MatrixXd> llt(symmetrize(symmetric));
  return llt.info() == Eigen::Success;
}

VectorXd characteristic_polynomial(const MatrixXd& m) {
  require_square(m, "characteristic_polynomial");
  // Faddeev–LeVerrier.
  const Eigen::Index n = m.rows();
  VectorXd coeffs = VectorXd::Zero(n + 1);
  coeffs(0) = 1.0;
  MatrixXd mk = MatrixXd::Zero(n, n);
  const MatrixXd identity = MatrixXd::Identity(n, n);
  for (Eigen::Index k = 1; k <= n; ++k) {
    mk = m * mk + coeffs(k - 1) * identity;
    coeffs(k) = -(m * mk).trace() / static_cast<double>(k);
  }
  return coeffs;
}

VectorXd polynomial_from_roots(const VectorXd& roots) {
  VectorXd coeffs = VectorXd::Zero(roots.size() + 1);
  coeffs(0) = 1.0;
  for (Eigen::Index i = 0; i < roots.size(); ++i) {
    for (Eigen::Index k = i + 1; k >= 1; --k) coeffs(k) -= roots(i) * coeffs(k - 1);
  }
  return coeffs;
}

}  // namespace emhe::linalg
