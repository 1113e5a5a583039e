#pragma once

#include <Eigen/Dense>
#include <string>
#include <vector>

#include "emhe/model.hpp"

namespace emhe {

/// Output-injection gain L(z) with contraction metric P and rate eta.
///
/// Two parameterizations are supported:
///   constant_phi: L(z) = (Φ − A(z))·C⁺ for a fixed target Φ. Exact when Φ − A(z)
///                 only acts on the row space of C, which makes A + LC ≡ Φ.
///   constant_l:   L(z) ≡ L0.
struct GainCertificate {
  enum class Kind { constant_phi, constant_l };

  Kind kind = Kind::constant_l;
  MatrixXd target_phi;  // constant_phi
  MatrixXd c_pinv;      // constant_phi: Cᵀ(CCᵀ)⁻¹ of the model's (constant) C
  MatrixXd L0;          // constant_l
  MatrixXd P;
  double eta = 0.0;
  double L_bar = 0.0;

  static GainCertificate constant_phi(MatrixXd phi, const MatrixXd& C, MatrixXd P, double eta,
                                      double L_bar);
  static GainCertificate constant_gain(MatrixXd L, MatrixXd P, double eta, double L_bar);

  /// L evaluated from the point Jacobians at z.
  MatrixXd gain(const Jacobians& jac) const;
  /// Φ = A + L·C. For constant_phi this is the stored target, which A + L·C
  /// reproduces up to rounding.
  MatrixXd closed_loop(const Jacobians& jac) const;
};

std::string to_string(GainCertificate::Kind kind);

/// A point (x, u, w, p) of a window or trajectory.
struct ZPoint {
  VectorXd x, u, w, p;
};

/// Φ(z) = A(z) + L(z)C(z).
MatrixXd phi(const SystemModel& model, const GainCertificate& gain, const ZPoint& z);

struct MonitorState {
  MatrixXd Y;  // n×o
  MatrixXd G;  // o×o
  double mu = 0.99;
  int steps = 0;

  static MonitorState reset(Eigen::Index n, Eigen::Index o, double mu);
};

/// G ← μG + ȲᵀȲ with Ȳ = CY + F, then Y ← ΦY + E + LF.
void advance(MonitorState& ms, const SystemModel& model, const GainCertificate& gain,
             const ZPoint& z);
/// Same recursion from precomputed Jacobians.
void advance(MonitorState& ms, const GainCertificate& gain, const Jacobians& jac);

struct GramianResult {
  MatrixXd G;
  double alpha_t = 0.0;
};

/// Resets the monitor, advances through every window point and returns
/// G = Σ_t μ^{T−1−t} Ȳ_tᵀȲ_t together with λ_min(G).
GramianResult gramian_over_window(const std::vector<ZPoint>& window, const SystemModel& model,
                                  const GainCertificate& gain, double mu);
GramianResult gramian_over_window(const std::vector<Jacobians>& window_jacobians,
                                  const GainCertificate& gain, double mu);

/// alpha_t ≥ threshold.
inline bool is_excited(double alpha_t, double threshold) { return alpha_t >= threshold; }

}  // namespace emhe
