#pragma once

#include <Eigen/Dense>
#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "emhe/excitation.hpp"
#include "emhe/model.hpp"
#include "emhe/models.hpp"
#include "emhe/random.hpp"

namespace emhe {

/// Quadratic i-IOSS Lyapunov function U(x,x̃) = ‖x−x̃‖²_{P_U} with its supply rates.
struct IossCertificate {
  MatrixXd P_U;
  MatrixXd S_x, Q_x, R_x;
  double eta_x = 0.0;
};

/// Weights describing excited trajectory pairs.
struct PeCertificate {
  MatrixXd P_p, S_p, Q_p, R_p;
  double eta_p = 0.0;
};

/// Sup-norm bounds of the (mean-value) Jacobians over Z and of the gain.
struct NormBounds {
  double B = 0.0, C = 0.0, D = 0.0, E = 0.0, F = 0.0, L = 0.0;
};

/// Constants chosen during derivation, kept for reproducibility.
struct DerivationRecord {
  double eta = 0.0;        // gain contraction rate
  VectorXd poles;          // eigenvalues placed for the constant-Φ gain (if any)
  double epsilon_x = 0.0;  // Young split for the i-IOSS inequality
  double epsilon_pe = 0.0; // Young split for the excitation inequality
  double gamma = 0.0;      // scaling of the discounted Gramian in S_p
  double alpha = 0.0;      // excitation threshold
  double mu = 0.0;         // Gramian discount (= eta_p)
  double norm_margin = 0.0;
  double w_half_width = 1.0;  // sampling sub-box for unbounded W
  std::size_t n_samples = 0;
  std::uint64_t seed = 0;
};

struct CertificateSet {
  int version = 1;
  std::string model;
  IossCertificate ioss;
  PeCertificate pe;
  GainCertificate gain;
  NormBounds bounds;
  DerivationRecord derivation;
};

struct ValidationResult {
  bool pass = false;
  /// Largest scaled violation found (≤ 0 means the inequality held everywhere).
  double worst_violation = 0.0;
  std::size_t samples = 0;
  ZPoint worst_z;
  ZPoint worst_z_tilde;
};

struct SamplingOptions {
  std::size_t n_samples = 10000;
  std::uint64_t seed = 1;
  /// Unbounded box sides are sampled from [−w, w] (or [b−2w, b] for half-infinite sides).
  double half_width = 1.0;
  double tol = 1e-9;
};

/// Draws z uniformly from Z (state, input, disturbance and parameter boxes with f(z) ∈ X).
ZPoint sample_z(const SystemModel& model, UniformSource& rng, double half_width);

/// Checks U(f(z),f(z̃)) ≤ η_x U(x,x̃) + ‖Δp‖²_{S_x} + ‖Δw‖²_{Q_x} + ‖Δy‖²_{R_x} on random
/// pairs with a shared input. The violation is (LHS−RHS)/max(1,RHS).
ValidationResult validate_ioss(const IossCertificate& cert, const SystemModel& model,
                               const SamplingOptions& opts = {});

/// Checks λ_max(ΦᵀPΦ − ηP)/λ_max(P) ≤ tol and ‖L(z)‖ ≤ L_bar at random points.
ValidationResult validate_gain(const GainCertificate& gain, const SystemModel& model,
                               const SamplingOptions& opts = {});

/// True iff Φ is bit-identical at every sampled point.
bool gain_has_constant_phi(const GainCertificate& gain, const SystemModel& model,
                           const SamplingOptions& opts = {});

/// Sampled sup-norms of B, C, D, E, F and L over Z, inflated by (1 + margin).
NormBounds sample_norm_bounds(const SystemModel& model, const GainCertificate& gain,
                              const SamplingOptions& opts, double margin);

/// Constant-Φ gain for the Chua model. The first column of A is replaced so that
/// Φ has the requested eigenvalues; L(z) = Φ[:,0] − A(z)[:,0]. P solves
/// ΦᵀPΦ − ηP = −I. Throws DerivationError when ρ(Φ)/√η ≥ 1.
GainCertificate synthesize_gain_chua(const SystemModel& model, double eta,
                                     const VectorXd& poles, const ChuaParams& params = {});
/// Default poles {0.8, 0.85, 0.9}.
GainCertificate synthesize_gain_chua(const SystemModel& model, double eta);

/// Constant gain L0 for models with constant Jacobians; P from the Lyapunov relation.
GainCertificate synthesize_constant_gain(const SystemModel& model, const MatrixXd& L0, double eta);

/// i-IOSS certificate from the gain by Young's inequality with split epsilon_x:
/// η_x = (1+ε)η, P_U = P, and S_x, Q_x, R_x scaled identities.
IossCertificate derive_ioss(const GainCertificate& gain, const SystemModel& model,
                            const NormBounds& bounds, double epsilon_x);

/// Excited-pair weights for Gramian discount mu and threshold alpha.
/// γ = (μ − (1+ε)η)λ̲(P)/(3C̄²); S_p = αγI, η_p = μ, P_p = P.
PeCertificate derive_pe_weights(const GainCertificate& gain, const SystemModel& model,
                                const NormBounds& bounds, double alpha, double mu,
                                double epsilon_split, double* gamma_out = nullptr);

struct DeriveOptions {
  double eta = 0.85;
  VectorXd poles;  // Chua only; empty selects the default poles
  MatrixXd L0;     // constant-gain models
  double epsilon_x = 0.08;
  double epsilon_pe = 0.05;
  double alpha = 1e-3;
  double mu = 0.92;
  double norm_margin = 0.02;
  SamplingOptions sampling;
};

/// Shipped settings: the Chua defaults above, or L0 = −0.5, η = 0.25, ε_x = 1,
/// ε_pe = 0.2, μ = 0.6, α = 0.5 for "scalar_affine".
DeriveOptions default_derive_options(const std::string& model);

/// Full derivation pipeline for a shipped model ("chua" or a constant-gain model).
CertificateSet derive_certificate_set(const SystemModel& model, const DeriveOptions& opts);

// ---------------------------------------------------------------------------
// Horizon conditions and error bounds

/// Bounds of the (constant) cost weights: W ⪯ W̄, 2V̲ ⪯ V ⪯ V̄, Q ⪯ Q̄.
struct BoundWeights {
  MatrixXd W_bar;
  MatrixXd V_lower;
  MatrixXd V_upper;
  MatrixXd Q_bar;
};

/// Standard choice for constant weights: W̄ = W, V̲ = V/2, V̄ = V, Q̄ = Q.
BoundWeights bound_weights_for(const MatrixXd& W, const MatrixXd& V, const MatrixXd& Q);

/// η_x^s + λ̄·η_p^s.
double gamma_fn(int s, double eta_x, double eta_p, double lambda_gamma);

/// λ̄(P_p, Ū).
double lambda_gamma(const IossCertificate& ioss, const PeCertificate& pe);

struct HorizonEvaluation {
  int N = 0;
  double gamma_N = 0.0;
  double c1 = 0.0;
  double rho = 0.0;
  double c = 0.0;
  double c2 = 0.0;
  double lhs_excited_prior = 0.0;  // 2λ̄(W̄,U̲)c2γ(N)
  double lhs_excited_decay = 0.0;  // c2 η1^N
  double lhs_bounded = 0.0;        // η1^{−N}c1(N)(η_x^N+γ(N))λ̄(W̄,U̲)
  bool pass = false;
};

HorizonEvaluation evaluate_horizon(const IossCertificate& ioss, const PeCertificate& pe,
                                   const BoundWeights& weights, double eta1, double eta2, int N);

struct MinHorizonResult {
  bool found = false;
  int N_min = 0;
  std::vector<HorizonEvaluation> trace;  // N = 1..N_max (stops at N_min when found)
};

MinHorizonResult min_horizon(const IossCertificate& ioss, const PeCertificate& pe,
                             const BoundWeights& weights, double eta1, double eta2, int N_max);

struct BoundConstants {
  int N = 0;
  double eta1 = 0.0, eta2 = 0.0;
  double eta_x = 0.0, eta_p = 0.0, eta_tilde = 0.0;
  double c1_N = 0.0;
  double c2_cN = 0.0;
  double rho = 0.0;
  double c = 0.0;
  double mu = 0.0;
  double rho_N = 0.0;
  double mu_bar = 0.0;
  double C0 = 0.0, C1 = 0.0, C2 = 0.0;
  MatrixXd Q_bound;
  bool conditions_hold = false;
};

BoundConstants compute_bound_constants(const IossCertificate& ioss, const PeCertificate& pe,
                                       const BoundWeights& weights, double eta1, double eta2,
                                       int N);

struct Partition {
  int l = 0;
  int k = 0;
  int j = 0;
  std::vector<int> i_seq;   // i_1..i_k
  std::vector<int> t_seq;   // t_1 > t_2 > ... > t_k
};

/// flags[τ] is the excitation verdict of the window ending at τ (entries for τ < N are ignored).
Partition partition_timeline(int t, int N, const std::vector<bool>& flags);

/// Inputs of the error bound for a recorded run.
struct BoundRun {
  double ex0_sq = 0.0;            // ‖x̂0 − x0‖²_{W̄}
  double ep0_sq = 0.0;            // ‖p̂0 − p‖²_{V̄}
  std::vector<double> w_sq;       // ‖w_r‖²_{Q_bound}, r = 0..T−1
  std::vector<bool> flags;        // flags[τ], τ = 0..T
};

/// C0 × (right side of the error bound) for t = 0..T.
std::vector<double> theorem_bound(const BoundRun& run, const BoundConstants& constants);

struct RgesConstants {
  double mu_kappa = 0.0;
  double K1 = 0.0, K2 = 0.0;
  double lambda1 = 0.0, lambda2 = 0.0;
};

RgesConstants rges_constants(const BoundConstants& constants, double kappa,
                             const IossCertificate& ioss, const BoundWeights& weights);

}  // namespace emhe
