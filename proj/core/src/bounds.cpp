#include <algorithm>
#include <cmath>
#include <limits>

#include "emhe/certificates.hpp"
#include "emhe/errors.hpp"
#include "emhe/linalg.hpp"

namespace emhe {

namespace {

double gen_max(const MatrixXd& a, const MatrixXd& b) {
  return linalg::max_generalized_eigenvalue(a, b);
}

// (1 − a^s)/(1 − a) evaluated stably, including a → 1.
double geometric_sum(double a, int s) {
  if (a == 1.0) return static_cast<double>(s);
  return (1.0 - std::pow(a, s)) / (1.0 - a);
}

struct CommonTerms {
  double lam_gamma, lam_w, lam_sv, lam_vv, lam_vs, lam_ss;
};

CommonTerms common_terms(const IossCertificate& ioss, const PeCertificate& pe,
                         const BoundWeights& w) {
  CommonTerms t;
  t.lam_gamma = gen_max(pe.P_p, ioss.P_U);
  t.lam_w = gen_max(w.W_bar, ioss.P_U);
  t.lam_sv = gen_max(ioss.S_x, w.V_lower);
  t.lam_vv = gen_max(w.V_upper, w.V_lower);
  t.lam_vs = gen_max(w.V_upper, pe.S_p);
  t.lam_ss = gen_max(ioss.S_x, pe.S_p);
  return t;
}

}  // namespace

BoundWeights bound_weights_for(const MatrixXd& W, const MatrixXd& V, const MatrixXd& Q) {
  return BoundWeights{W, 0.5 * V, V, Q};
}

double gamma_fn(int s, double eta_x, double eta_p, double lambda_gamma) {
  if (s < 0) throw UsageError("gamma: s must be nonnegative");
  return std::pow(eta_x, s) + lambda_gamma * std::pow(eta_p, s);
}

double lambda_gamma(const IossCertificate& ioss, const PeCertificate& pe) {
  return gen_max(pe.P_p, ioss.P_U);
}

HorizonEvaluation evaluate_horizon(const IossCertificate& ioss, const PeCertificate& pe,
                                   const BoundWeights& weights, double eta1, double eta2, int N) {
  if (N < 1) throw UsageError("evaluate_horizon: N must be at least 1");
  const CommonTerms t = common_terms(ioss, pe, weights);
  const double ex = ioss.eta_x, ep = pe.eta_p;
  HorizonEvaluation h;
  h.N = N;
  h.gamma_N = gamma_fn(N, ex, ep, t.lam_gamma);
  h.c1 = t.lam_sv * geometric_sum(ex, N) + t.lam_vv;
  // η1^{−N}(η_x^N + γ(N)) written with ratios so large N cannot overflow.
  const double scaled = 2.0 * std::pow(ex / eta1, N) + t.lam_gamma * std::pow(ep / eta1, N);
  h.lhs_bounded = h.c1 * scaled * t.lam_w;
  h.rho = std::max(h.lhs_bounded, std::pow(eta2, N));
  h.c = h.rho < 1.0 ? 2.0 * h.c1 / (1.0 - h.rho) + 1.0 : std::numeric_limits<double>::infinity();
  h.c2 = h.c * t.lam_vs + t.lam_ss * geometric_sum(ex, N);
  h.lhs_excited_prior = 2.0 * t.lam_w * h.c2 * h.gamma_N;
  h.lhs_excited_decay = h.c2 * std::pow(eta1, N);
  h.pass = h.lhs_excited_prior < 1.0 && h.lhs_excited_decay < 1.0 && h.lhs_bounded < 1.0;
  return h;
}

MinHorizonResult min_horizon(const IossCertificate& ioss, const PeCertificate& pe,
                             const BoundWeights& weights, double eta1, double eta2, int N_max) {
  MinHorizonResult res;
  for (int N = 1; N <= N_max; ++N) {
    res.trace.push_back(evaluate_horizon(ioss, pe, weights, eta1, eta2, N));
    if (res.trace.back().pass) {
      res.found = true;
      res.N_min = N;
      break;
    }
  }
  return res;
}

BoundConstants compute_bound_constants(const IossCertificate& ioss, const PeCertificate& pe,
                                       const BoundWeights& weights, double eta1, double eta2,
                                       int N) {
  const HorizonEvaluation h = evaluate_horizon(ioss, pe, weights, eta1, eta2, N);
  const CommonTerms t = common_terms(ioss, pe, weights);
  BoundConstants b;
  b.N = N;
  b.eta1 = eta1;
  b.eta2 = eta2;
  b.eta_x = ioss.eta_x;
  b.eta_p = pe.eta_p;
  b.eta_tilde = std::max(ioss.eta_x, pe.eta_p);
  b.c1_N = h.c1;
  b.c2_cN = h.c2;
  b.rho = h.rho;
  b.c = h.c;
  const double inv = 1.0 / static_cast<double>(N);
  b.mu = std::max(std::pow(2.0 * t.lam_w * h.c2 * h.gamma_N, inv), std::pow(h.c2, inv) * eta1);
  b.rho_N = std::pow(h.rho, inv);
  b.mu_bar = std::max(b.mu, b.rho_N);
  const double eta1_neg_N = std::pow(eta1, -N);
  b.C0 = h.c * t.lam_vv;
  b.C1 = eta1_neg_N * h.c1 * (2.0 + t.lam_gamma);
  b.C2 = (2.0 * h.c1 + 1.0 / t.lam_vv) * eta1_neg_N;
  b.Q_bound = std::max(eta1_neg_N * h.c1, h.c2) * 2.0 * weights.Q_bar;
  b.conditions_hold = h.pass;
  return b;
}

Partition partition_timeline(int t, int N, const std::vector<bool>& flags) {
  if (t < 0 || N < 1) throw UsageError("partition_timeline: need t ≥ 0 and N ≥ 1");
  if (t >= N && flags.size() <= static_cast<std::size_t>(t)) {
    throw UsageError("partition_timeline: flag history is shorter than t+1");
  }
  Partition part;
  part.l = t - (t / N) * N;
  for (int tau = t; tau >= N; tau -= N) {
    if (flags[static_cast<std::size_t>(tau)]) part.t_seq.push_back(tau);
  }
  part.k = static_cast<int>(part.t_seq.size());
  if (part.k == 0) {
    part.j = (t - part.l) / N;
    return part;
  }
  part.j = (t - part.t_seq.front()) / N;
  for (int m = 0; m < part.k; ++m) {
    const int next = (m + 1 < part.k) ? part.t_seq[static_cast<std::size_t>(m + 1)] : part.l;
    part.i_seq.push_back((part.t_seq[static_cast<std::size_t>(m)] - N - next) / N);
  }
  return part;
}

std::vector<double> theorem_bound(const BoundRun& run, const BoundConstants& bc) {
  if (!(bc.rho < 1.0) || !(bc.mu < 1.0)) {
    throw UsageError("theorem_bound: constants require rho < 1 and mu < 1");
  }
  const int T = static_cast<int>(run.w_sq.size());
  if (run.flags.size() < static_cast<std::size_t>(T + 1)) {
    throw UsageError("theorem_bound: flag history must cover t = 0..T");
  }
  const int N = bc.N;
  std::vector<double> out;
  out.reserve(static_cast<std::size_t>(T + 1));
  const auto w = [&](int idx) { return run.w_sq[static_cast<std::size_t>(idx)]; };
  for (int t = 0; t <= T; ++t) {
    const Partition part = partition_timeline(t, N, run.flags);
    const double mu_kN = std::pow(bc.mu, part.k * N);
    double total = mu_kN * (bc.C1 * std::pow(bc.eta_tilde, part.l) * run.ex0_sq +
                            bc.C2 * std::pow(bc.eta1, part.l) * run.ep0_sq);
    double s = 0.0, f = 1.0;
    for (int r = 1; r <= part.l; ++r, f *= bc.eta2) s += f * w(part.l - r);
    total += mu_kN * s;
    s = 0.0;
    f = 1.0;
    for (int r = 1; r <= part.j * N; ++r, f *= bc.rho_N) s += f * w(t - r);
    total += s;
    int offset = t - part.j * N;
    double mu_m = 1.0;
    for (int m = 0; m < part.k; ++m) {
      const int len = (part.i_seq[static_cast<std::size_t>(m)] + 1) * N;
      s = 0.0;
      f = 1.0;
      for (int r = 1; r <= len; ++r, f *= bc.mu_bar) s += f * w(offset - r);
      total += mu_m * s;
      offset -= len;
      mu_m *= std::pow(bc.mu, N);
    }
    out.push_back(bc.C0 * total);
  }
  return out;
}

RgesConstants rges_constants(const BoundConstants& bc, double kappa, const IossCertificate& ioss,
                             const BoundWeights& weights) {
  if (!(bc.mu_bar < 1.0)) throw UsageError("rges_constants: mu_bar must be below 1");
  if (!(kappa >= 0.0)) throw UsageError("rges_constants: kappa must be nonnegative");
  RgesConstants r;
  r.mu_kappa = std::pow(bc.mu_bar, 1.0 / (kappa + 1.0));
  const double lower = std::min(linalg::min_eigenvalue(ioss.P_U),
                                linalg::min_eigenvalue(weights.V_lower));
  const double k3 = bc.C0 / (std::pow(r.mu_kappa, kappa * bc.N) * lower);
  const double k1 = k3 * std::max(bc.C1 * linalg::max_eigenvalue(weights.W_bar),
                                  bc.C2 * linalg::max_eigenvalue(weights.V_upper));
  const double k2 = k3 * linalg::max_eigenvalue(bc.Q_bound);
  r.lambda1 = std::sqrt(r.mu_kappa);
  r.lambda2 = std::sqrt(r.lambda1);
  r.K1 = std::sqrt(2.0 * k1);
  r.K2 = std::sqrt(2.0 * k2 / (1.0 - r.lambda1));
  return r;
}

}  // namespace emhe
