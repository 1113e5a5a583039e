#pragma once

#include <Eigen/Dense>
#include <deque>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "emhe/certificates.hpp"
#include "emhe/excitation.hpp"
#include "emhe/model.hpp"
#include "emhe/solver.hpp"

namespace emhe {

/// naive: the parameter prior is refreshed at every full window and p̂ = p̂*.
/// excitation_aware: refresh only on excited windows and report the most recent
///   excitation-backed p̂*.
/// gated: refresh only on excited windows but report p̂* (the estimator the
///   error bound is stated for).
enum class Variant { naive, excitation_aware, gated };

std::string to_string(Variant v);
Variant variant_from_string(const std::string& s);

struct MheConfig {
  int N = 150;
  double eta1 = 0.934;
  double eta2 = 0.9997;
  double lambda_gamma = 1.0;  // λ̄(P_p, Ū)
  double eta_x = 0.0;
  double eta_p = 0.0;
  MatrixXd W, V, Q, R;
  Variant variant = Variant::excitation_aware;
  double alpha = 1e-3;
  double mu = 0.99;  // Gramian discount of the monitor
  double hinge_weight = 1e3;
  SolveOptions solver;
};

/// Builds the cost weights from certificates: W = w·P_p, V = v·S_p,
/// Q = q·(Q_x+Q_p), R = r·(R_x+R_p), and copies the decay rates and μ = η_p.
MheConfig config_from_certificates(const CertificateSet& certs, int N, double eta1, double eta2,
                                   double alpha, double w_mult = 2.0, double v_mult = 100.0,
                                   double q_mult = 2.0, double r_mult = 1.0);

/// Human-readable list of violated cost-function conditions (empty when all hold).
std::vector<std::string> check_cost_assumptions(const MheConfig& cfg,
                                                const CertificateSet* certs = nullptr);

/// γ(s) = η_x^s + λ̄·η_p^s.
double gamma(int s, double eta_x, double eta_p, double lambda_gamma);

/// Data of one window: T stages ending at the current time t.
struct WindowData {
  int T = 0;
  VectorXd xbar;  // x̄_{t−T}
  VectorXd pbar;  // p̄_{t−T}
  std::vector<VectorXd> u;  // u_{t−T..t−1}
  std::vector<VectorXd> y;  // y_{t−T..t−1}
};

/// Layout of θ = (x̂_{t−T|t}, p̂_{|t}, ŵ_{t−T|t}, …, ŵ_{t−1|t}).
struct WindowLayout {
  Eigen::Index n = 0, o = 0, q = 0;
  int T = 0;
  Eigen::Index dim() const { return n + o + q * T; }
  VectorXd x_start(const VectorXd& th) const { return th.head(n); }
  VectorXd p(const VectorXd& th) const { return th.segment(n, o); }
  VectorXd w(const VectorXd& th, int k) const { return th.segment(n + o + q * k, q); }
};

/// Window least-squares problem with the residual whose squared norm is the
/// window cost plus the hinge penalty on x̂_{t−T+1..t}.
class WindowProblem {
 public:
  WindowProblem(const SystemModel& model, const MheConfig& cfg, WindowData data);

  const WindowLayout& layout() const { return layout_; }
  const WindowData& data() const { return data_; }
  std::size_t rows() const { return static_cast<std::size_t>(dim_r_); }

  VectorXd residual(const VectorXd& theta) const;
  /// Dense Jacobian assembled from forward sensitivities.
  MatrixXd jacobian(const VectorXd& theta) const;
  /// Structured linearization solved by a backward Riccati sweep.
  std::unique_ptr<LinearModel> linearize(const VectorXd& theta) const;

  /// States x̂_{t−T..t} of the forward rollout.
  std::vector<VectorXd> rollout(const VectorXd& theta) const;
  double cost(const VectorXd& theta) const { return residual(theta).squaredNorm(); }

  /// Box on θ: X on the window start, P on the parameter, W on the disturbances.
  Box bounds() const;

  /// Packages the callbacks; the WindowProblem must outlive the result.
  ResidualProblem as_residual_problem(bool structured = true) const;

 private:
  const SystemModel& model_;
  const MheConfig& cfg_;
  WindowData data_;
  WindowLayout layout_;
  MatrixXd Uw_, Uv_, Uq_, Ur_;
  double sx_ = 0.0, sp_ = 0.0;
  std::vector<double> stage_scale_;
  bool hinge_ = false;
  double hinge_sqrt_ = 0.0;
  Eigen::Index dim_r_ = 0;
};

/// Wraps a WindowProblem for the solver. Throws UsageError for T = 0.
struct BuiltWindow {
  std::unique_ptr<WindowProblem> window;
  ResidualProblem problem;
};
BuiltWindow build_window(const MheConfig& cfg, const SystemModel& model, WindowData data);

struct EstimateRecord {
  int t = 0;
  VectorXd xhat;
  VectorXd phat;
  VectorXd phat_star;  // optimizer output of this window
  VectorXd pbar;       // p̄_t after the update
  double alpha_t = 0.0;
  bool pe = false;     // monitored verdict α_t ≥ α
  bool gate = false;   // flag that drove the prior update
  double cost_star = 0.0;
  std::string status = "prior";  // prior | converged | max_iter | stalled | failed
  int iterations = 0;
  bool solved = false;
  VectorXd window_start_estimate;
  std::vector<VectorXd> what_seq;
  double solve_seconds = 0.0;
};

struct MheState {
  int t = 0;
  std::deque<VectorXd> y_buf;
  std::deque<VectorXd> u_buf;
  std::deque<VectorXd> xhat_hist;  // x̂_{t−N_t..t}
  std::deque<VectorXd> pbar_hist;  // p̄_{t−N_t..t}
  VectorXd phat;                   // p̂_t
  VectorXd phat_held;
  std::vector<bool> gate_flags;    // gate flag of each time 0..t
  std::vector<bool> pe_flags;      // monitored verdict of each time 0..t
  std::optional<VectorXd> last_solution;
};

/// Prior update: trims the histories to N_t entries, appends x̂_t and
/// p̄_t = p̂_t iff t ≥ N and the gate flag is set, else p̄_{t−N_t}.
void update_priors(MheState& state, const EstimateRecord& record, const MheConfig& cfg);

class MovingHorizonEstimator {
 public:
  MovingHorizonEstimator(const SystemModel& model, MheConfig cfg, GainCertificate gain,
                         VectorXd xhat0, VectorXd phat0);

  /// Output at t = 0 (the priors).
  EstimateRecord initial_record() const;
  /// Consumes (u_{t−1}, y_{t−1}) and returns the estimate at t.
  EstimateRecord step(const VectorXd& u_prev, const VectorXd& y_prev);

  const MheState& state() const { return state_; }
  const MheConfig& config() const { return cfg_; }
  const SystemModel& model() const { return model_; }

 private:
  VectorXd warm_start(const WindowLayout& layout) const;
  EstimateRecord fallback(const VectorXd& u_prev);

  const SystemModel& model_;
  MheConfig cfg_;
  GainCertificate gain_;
  MheState state_;
  int last_T_ = 0;
  VectorXd last_u0_;  // first input of the previous window
};

/// sqrt(mean ‖e‖²) over the given samples. Throws UsageError when empty.
double rmse(const std::vector<VectorXd>& errors);

}  // namespace emhe
