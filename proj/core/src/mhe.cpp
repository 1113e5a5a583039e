#include "emhe/mhe.hpp"

#include <chrono>
#include <cmath>
#include <sstream>

#include "emhe/errors.hpp"
#include "emhe/linalg.hpp"

namespace emhe {

std::string to_string(Variant v) {
  switch (v) {
    case Variant::naive: return "naive";
    case Variant::excitation_aware: return "excitation_aware";
    case Variant::gated: return "gated";
  }
  return "unknown";
}

Variant variant_from_string(const std::string& s) {
  if (s == "naive" || s == "mhe1") return Variant::naive;
  if (s == "excitation_aware" || s == "aware" || s == "mhe2") return Variant::excitation_aware;
  if (s == "gated") return Variant::gated;
  throw UsageError("unknown estimator variant '" + s + "'");
}

MheConfig config_from_certificates(const CertificateSet& certs, int N, double eta1, double eta2,
                                   double alpha, double w_mult, double v_mult, double q_mult,
                                   double r_mult) {
  MheConfig cfg;
  cfg.N = N;
  cfg.eta1 = eta1;
  cfg.eta2 = eta2;
  cfg.alpha = alpha;
  cfg.eta_x = certs.ioss.eta_x;
  cfg.eta_p = certs.pe.eta_p;
  cfg.lambda_gamma = lambda_gamma(certs.ioss, certs.pe);
  cfg.W = w_mult * certs.pe.P_p;
  cfg.V = v_mult * certs.pe.S_p;
  cfg.Q = q_mult * (certs.ioss.Q_x + certs.pe.Q_p);
  cfg.R = r_mult * (certs.ioss.R_x + certs.pe.R_p);
  cfg.mu = certs.pe.eta_p;
  return cfg;
}

namespace {

// A ⪰ B up to a relative tolerance.
bool dominates(const MatrixXd& a, const MatrixXd& b) {
  if (a.rows() != b.rows() || a.cols() != b.cols()) return false;
  const double scale = std::max({1.0, a.cwiseAbs().maxCoeff(), b.cwiseAbs().maxCoeff()});
  return linalg::min_eigenvalue(linalg::symmetrize(a - b)) >= -1e-12 * scale;
}

}  // namespace

std::vector<std::string> check_cost_assumptions(const MheConfig& cfg,
                                                const CertificateSet* certs) {
  std::vector<std::string> bad;
  const double eta_max = std::max(cfg.eta_x, cfg.eta_p);
  if (!(cfg.eta1 > eta_max && cfg.eta1 < 1.0)) bad.emplace_back("eta1 must lie in (max(eta_x, eta_p), 1)");
  if (!(cfg.eta2 >= eta_max && cfg.eta2 < 1.0)) bad.emplace_back("eta2 must lie in [max(eta_x, eta_p), 1)");
  if (cfg.N < 1) bad.emplace_back("N must be at least 1");
  if (!(cfg.alpha > 0.0)) bad.emplace_back("alpha must be positive");
  if (!(cfg.mu >= 0.0 && cfg.mu < 1.0)) bad.emplace_back("mu must lie in [0, 1)");
  for (const auto& [name, m] : {std::pair<const char*, const MatrixXd*>{"W", &cfg.W},
                                {"V", &cfg.V}, {"Q", &cfg.Q}, {"R", &cfg.R}}) {
    if (m->size() > 0 && !linalg::is_positive_definite(*m)) {
      bad.push_back(std::string(name) + " must be positive definite");
    }
  }
  if (certs) {
    if (!dominates(cfg.W, 2.0 * certs->ioss.P_U)) bad.emplace_back("W >= 2 P_U violated");
    if (!dominates(cfg.V, 2.0 * certs->pe.S_p)) bad.emplace_back("V >= 2 S_p violated");
    if (!dominates(cfg.Q, 2.0 * (certs->ioss.Q_x + certs->pe.Q_p))) {
      bad.emplace_back("Q >= 2 (Q_x + Q_p) violated");
    }
    if (!dominates(cfg.R, certs->ioss.R_x + certs->pe.R_p)) bad.emplace_back("R >= R_x + R_p violated");
  }
  return bad;
}

void update_priors(MheState& state, const EstimateRecord& record, const MheConfig& cfg) {
  const int t = record.t;
  const auto Nt = static_cast<std::size_t>(std::min(t, cfg.N));
  while (state.xhat_hist.size() > Nt) state.xhat_hist.pop_front();
  while (state.pbar_hist.size() > Nt) state.pbar_hist.pop_front();
  if (state.pbar_hist.empty()) throw UsageError("update_priors: parameter prior history is empty");
  const VectorXd pbar = (t >= cfg.N && record.gate) ? record.phat : state.pbar_hist.front();
  state.xhat_hist.push_back(record.xhat);
  state.pbar_hist.push_back(pbar);
  state.t = t;
  state.phat = record.phat;
  state.gate_flags.resize(static_cast<std::size_t>(t + 1), false);
  state.pe_flags.resize(static_cast<std::size_t>(t + 1), false);
  state.gate_flags[static_cast<std::size_t>(t)] = record.gate;
  state.pe_flags[static_cast<std::size_t>(t)] = record.pe;
}

MovingHorizonEstimator::MovingHorizonEstimator(const SystemModel& model, MheConfig cfg,
                                               GainCertificate gain, VectorXd xhat0,
                                               VectorXd phat0)
    : model_(model), cfg_(std::move(cfg)), gain_(std::move(gain)) {
  if (xhat0.size() != model.n() || phat0.size() != model.o()) {
    throw UsageError("estimator: prior dimensions do not match the model");
  }
  if (!model.X().contains(xhat0)) throw UsageError("estimator: x̂0 lies outside X");
  if (!model.P().contains(phat0)) throw UsageError("estimator: p̂0 lies outside P");
  if (cfg_.N < 1) throw UsageError("estimator: N must be at least 1");
  if (!(cfg_.alpha > 0.0)) throw UsageError("estimator: alpha must be positive");
  if (!(cfg_.mu >= 0.0 && cfg_.mu < 1.0)) throw UsageError("estimator: mu must lie in [0, 1)");
  state_.xhat_hist.push_back(xhat0);
  state_.pbar_hist.push_back(phat0);
  state_.phat = phat0;
  state_.phat_held = phat0;
  state_.gate_flags.push_back(false);
  state_.pe_flags.push_back(false);
}

EstimateRecord MovingHorizonEstimator::initial_record() const {
  EstimateRecord r;
  r.t = 0;
  r.xhat = state_.xhat_hist.front();
  r.phat = state_.pbar_hist.front();
  r.phat_star = r.phat;
  r.pbar = r.phat;
  r.status = "prior";
  return r;
}

VectorXd MovingHorizonEstimator::warm_start(const WindowLayout& lay) const {
  VectorXd th = VectorXd::Zero(lay.dim());
  const auto n = lay.n, o = lay.o, q = lay.q;
  if (!state_.last_solution || last_T_ == 0) {
    th.head(n) = state_.xhat_hist.front();
    th.segment(n, o) = state_.phat;
    return th;
  }
  const VectorXd& prev = *state_.last_solution;
  if (lay.T == last_T_ + 1) {
    th.head(prev.size()) = prev;  // append ŵ = 0
  } else {
    const VectorXd xs = prev.head(n);
    const VectorXd p = prev.segment(n, o);
    const VectorXd w0 = prev.segment(n + o, q);
    th.head(n) = model_.X().project(model_.step_unchecked(xs, last_u0_, w0, p));
    th.segment(n, o) = p;
    th.segment(n + o, q * (lay.T - 1)) = prev.segment(n + o + q, q * (lay.T - 1));
  }
  return th;
}

EstimateRecord MovingHorizonEstimator::fallback(const VectorXd& u_prev) {
  EstimateRecord r;
  r.t = state_.t + 1;
  const VectorXd& xprev = state_.xhat_hist.back();
  r.xhat = model_.X().project(
      model_.step_unchecked(xprev, u_prev, VectorXd::Zero(model_.q()), state_.phat));
  r.phat = state_.phat;
  r.phat_star = state_.phat;
  r.status = "failed";
  r.gate = false;
  r.pe = false;
  return r;
}

EstimateRecord MovingHorizonEstimator::step(const VectorXd& u_prev, const VectorXd& y_prev) {
  if (u_prev.size() != model_.m() || y_prev.size() != model_.p_out()) {
    throw UsageError("estimator step: input/output dimensions do not match the model");
  }
  const auto start = std::chrono::steady_clock::now();
  const int t = state_.t + 1;
  const int T = std::min(t, cfg_.N);
  const auto Ts = static_cast<std::size_t>(T);

  if (!state_.u_buf.empty()) last_u0_ = state_.u_buf.front();
  state_.u_buf.push_back(u_prev);
  state_.y_buf.push_back(y_prev);
  while (state_.u_buf.size() > Ts) state_.u_buf.pop_front();
  while (state_.y_buf.size() > Ts) state_.y_buf.pop_front();
  while (state_.xhat_hist.size() > Ts) state_.xhat_hist.pop_front();
  while (state_.pbar_hist.size() > Ts) state_.pbar_hist.pop_front();

  WindowData data;
  data.T = T;
  data.xbar = state_.xhat_hist.front();
  data.pbar = state_.pbar_hist.front();
  data.u.assign(state_.u_buf.begin(), state_.u_buf.end());
  data.y.assign(state_.y_buf.begin(), state_.y_buf.end());

  EstimateRecord rec;
  bool ok = false;
  try {
    BuiltWindow bw = build_window(cfg_, model_, std::move(data));
    const WindowProblem& win = *bw.window;
    const WindowLayout& lay = win.layout();
    const SolveReport rep = solve(bw.problem, warm_start(lay), cfg_.solver);
    const VectorXd& th = rep.theta_star;
    if (th.allFinite() && std::isfinite(rep.cost_star)) {
      const std::vector<VectorXd> xs = win.rollout(th);
      rec.t = t;
      rec.xhat = model_.X().project(xs.back());
      rec.phat_star = lay.p(th);
      rec.cost_star = rep.cost_star;
      rec.status = to_string(rep.status);
      rec.iterations = rep.iterations;
      rec.solved = true;
      rec.window_start_estimate = lay.x_start(th);
      rec.what_seq.reserve(Ts);
      std::vector<ZPoint> pts;
      pts.reserve(Ts);
      for (int k = 0; k < T; ++k) {
        rec.what_seq.push_back(lay.w(th, k));
        pts.push_back(ZPoint{xs[static_cast<std::size_t>(k)], win.data().u[static_cast<std::size_t>(k)],
                             rec.what_seq.back(), rec.phat_star});
      }
      const GramianResult gr = gramian_over_window(pts, model_, gain_, cfg_.mu);
      rec.alpha_t = gr.alpha_t;
      ok = rec.xhat.allFinite() && std::isfinite(rec.alpha_t);
      state_.last_solution = th;
    }
  } catch (const UsageError&) {
    throw;
  } catch (const std::exception&) {
    ok = false;
  }

  if (ok) {
    rec.pe = is_excited(rec.alpha_t, cfg_.alpha);
    switch (cfg_.variant) {
      case Variant::naive:
        rec.gate = true;
        rec.phat = rec.phat_star;
        break;
      case Variant::gated:
        rec.gate = rec.pe;
        rec.phat = rec.phat_star;
        break;
      case Variant::excitation_aware:
        rec.gate = rec.pe;
        if (rec.pe) state_.phat_held = rec.phat_star;
        rec.phat = state_.phat_held;
        break;
    }
    last_T_ = T;
  } else {
    rec = fallback(u_prev);
    state_.last_solution.reset();
    last_T_ = 0;
  }
  update_priors(state_, rec, cfg_);
  rec.pbar = state_.pbar_hist.back();
  rec.solve_seconds =
      std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  return rec;
}

double rmse(const std::vector<VectorXd>& errors) {
  if (errors.empty()) throw UsageError("rmse: empty error sequence");
  double acc = 0.0;
  for (const auto& e : errors) acc += e.squaredNorm();
  return std::sqrt(acc / static_cast<double>(errors.size()));
}

}  // namespace emhe
