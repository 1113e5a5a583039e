// One PASS/FAIL line per acceptance criterion; exit status 1 if any fails.
#include <algorithm>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <functional>
#include <sstream>
#include <string>
#include <vector>

#include "emhe/certificate_io.hpp"
#include "emhe/certificates.hpp"
#include "emhe/excitation.hpp"
#include "emhe/harness.hpp"
#include "emhe/linalg.hpp"
#include "emhe/models.hpp"
#include "test_support.hpp"

using namespace emhe;
using namespace emhe::testing;

namespace {

struct Outcome {
  bool pass = false;
  std::string detail;
};

std::string fmt(const char* f, double a) {
  char buf[64];
  std::snprintf(buf, sizeof buf, f, a);
  return buf;
}

double median(std::vector<double> v) {
  std::sort(v.begin(), v.end());
  return v[v.size() / 2];
}

Outcome chua_three_seed_study() {
  std::vector<double> ex_naive, ex_aware, ep_naive, ep_aware;
  std::string detail;
  bool failed = false;
  for (const std::uint64_t seed : {1u, 2u, 3u}) {
    RunConfig cfg;
    cfg.seed = seed;
    const RunResult r = run(cfg);
    failed = failed || r.failed;
    for (const VariantRun& vr : r.runs) {
      const bool naive = vr.variant == Variant::naive;
      (naive ? ex_naive : ex_aware).push_back(vr.summary.rmse_x);
      (naive ? ep_naive : ep_aware).push_back(vr.summary.rmse_p);
    }
    detail += " seed" + std::to_string(seed) + "[x " + fmt("%.4f", ex_naive.back()) + "/" +
              fmt("%.4f", ex_aware.back()) + " p " + fmt("%.4f", ep_naive.back()) + "/" +
              fmt("%.4f", ep_aware.back()) + "]";
  }
  const double mxn = median(ex_naive), mxa = median(ex_aware);
  const double mpn = median(ep_naive), mpa = median(ep_aware);
  const double ratio = mpn / mpa;
  const double rel = std::abs(mxn - mxa) / std::max(mxn, mxa);
  const bool in_band = mxn >= 0.08 && mxn <= 0.35 && mxa >= 0.08 && mxa <= 0.35;
  Outcome o;
  o.pass = !failed && in_band && rel <= 0.05 && mpa <= 0.05 && ratio >= 3.0;
  o.detail = "median rmse_x " + fmt("%.4f", mxn) + "/" + fmt("%.4f", mxa) + " (rel " +
             fmt("%.3f", rel) + "), median rmse_p aware " + fmt("%.4f", mpa) + ", ratio " +
             fmt("%.3f", ratio) + ";" + detail;
  return o;
}

Outcome zero_noise() {
  RunConfig cfg;
  cfg.t_sim = 500;
  cfg.amplitudes = {0.0, 0.0, 0.0, 0.0};
  cfg.xhat0 = cfg.x0;
  cfg.phat0 = cfg.p_true;
  const RunResult r = run(cfg);
  double worst_x = 0.0, worst_p = 0.0;
  for (const VariantRun& vr : r.runs) {
    for (std::size_t t = 0; t < vr.records.size(); ++t) {
      worst_x = std::max(worst_x, (vr.records[t].xhat - r.truth.x_seq[t]).norm());
      worst_p = std::max(worst_p, std::abs(vr.records[t].phat(0) - cfg.p_true[0]));
    }
  }
  return {!r.failed && worst_x <= 1e-6 && worst_p <= 1e-6,
          "max ||e_x|| " + fmt("%.3g", worst_x) + ", max ||e_p|| " + fmt("%.3g", worst_p)};
}

Outcome bound_domination() {
  const CertificateSet certs = shipped_certificates("scalar_affine");
  RunConfig base;
  base.model = "scalar_affine";
  base.t_sim = 300;
  base.eta1 = 0.8;
  base.eta2 = 0.8;
  base.v_mult = 2.0;
  base.x0 = {1.0};
  base.xhat0 = {-1.0};
  base.phat0 = {0.0};
  base.p_true = {0.3};
  base.variants = {"gated"};
  const BoundWeights bw = bound_weights_for(base.w_mult * certs.pe.P_p, base.v_mult * certs.pe.S_p,
                                            base.q_mult * (certs.ioss.Q_x + certs.pe.Q_p));
  const MinHorizonResult mh = min_horizon(certs.ioss, certs.pe, bw, base.eta1, base.eta2, 1000);
  if (!mh.found) return {false, "no horizon up to 1000 satisfies the conditions"};
  base.N = mh.N_min;
  bool ok = true;
  std::string detail = "N=" + std::to_string(mh.N_min);
  for (const double amp : {0.0, 1e-3}) {
    RunConfig cfg = base;
    cfg.amplitudes = {amp};
    const RunResult r = run(cfg);
    const BoundReport rep = evaluate_bound(certs, r.mhe, r.truth, r.runs[0].records);
    ok = ok && !r.failed && rep.constants.conditions_hold && rep.dominated &&
         rep.rows.size() == 301u;
    detail += ", amp " + fmt("%g", amp) + ": worst gamma1/bound " + fmt("%.3g", rep.worst_ratio);
  }
  return {ok, detail};
}

bool toy_direct(int N) {
  const double ex = 0.5, ep = 0.5, e1 = 0.8, e2 = 0.8, lam_w = 2.0;
  const double gam = std::pow(ex, N) + std::pow(ep, N);
  const double geo = (1.0 - std::pow(ex, N)) / (1.0 - ex);
  const double c1 = geo + 1.0;
  const double cond3 = std::pow(e1, -N) * c1 * (std::pow(ex, N) + gam) * lam_w;
  const double rho = std::max(cond3, std::pow(e2, N));
  if (rho >= 1.0) return false;
  const double c2 = (2.0 * c1 / (1.0 - rho) + 1.0) + geo;
  return 2.0 * lam_w * c2 * gam < 1.0 && c2 * std::pow(e1, N) < 1.0 && cond3 < 1.0;
}

Outcome min_horizon_oracle() {
  const MatrixXd one = MatrixXd::Identity(1, 1);
  IossCertificate ioss{one, one, one, one, 0.5};
  PeCertificate pe{one, one, one, one, 0.5};
  const BoundWeights w{2.0 * one, one, one, one};
  int brute = 0;
  bool scan_agrees = true;
  for (int N = 1; N <= 200; ++N) {
    const bool direct = toy_direct(N);
    scan_agrees = scan_agrees && evaluate_horizon(ioss, pe, w, 0.8, 0.8, N).pass == direct;
    if (direct && brute == 0) brute = N;
  }
  const MinHorizonResult r = min_horizon(ioss, pe, w, 0.8, 0.8, 200);
  const int pinned = load_json(fixture_path("oracles.json"))["min_horizon_identity_toy"].get<int>();
  return {r.found && r.N_min == brute && brute == pinned && scan_agrees,
          "min_horizon " + std::to_string(r.N_min) + ", brute force " + std::to_string(brute) +
              ", pinned " + std::to_string(pinned)};
}

Outcome partition_identity() {
  UniformSource rng(2024);
  long checked = 0;
  for (const int N : {1, 2, 3, 5, 10}) {
    for (int h = 0; h < 100; ++h) {
      const double density = rng.unit();
      std::vector<bool> flags(201);
      for (auto&& f : flags) f = rng.unit() < density;
      for (int t = 0; t <= 200; ++t) {
        // Oracle: flagged times τ ∈ [N, t] on t's residue class, newest first.
        std::vector<int> excited;
        for (int tau = t; tau >= 0; --tau) {
          if (tau >= N && (t - tau) % N == 0 && flags[static_cast<std::size_t>(tau)]) {
            excited.push_back(tau);
          }
        }
        const Partition p = partition_timeline(t, N, flags);
        int sum = p.l + p.j * N;
        for (const int i : p.i_seq) sum += (i + 1) * N;
        const int newest = excited.empty() ? t % N : excited.front();
        const bool ok = sum == t && p.k == static_cast<int>(excited.size()) && p.t_seq == excited &&
                        p.l == t % N && p.j == (t - (excited.empty() ? p.l : newest)) / N;
        if (!ok) {
          return {false, "mismatch at N=" + std::to_string(N) + " t=" + std::to_string(t)};
        }
        ++checked;
      }
    }
  }
  return {true, std::to_string(checked) + " (t, N, history) cases"};
}

Outcome monitor_oracle() {
  UniformSource rng(77);
  double worst = 0.0;
  for (int trial = 0; trial < 100; ++trial) {
    const auto n = 1 + static_cast<Eigen::Index>(trial % 3);
    const auto o = 1 + static_cast<Eigen::Index>((trial / 3) % 2);
    const auto py = 1 + static_cast<Eigen::Index>((trial / 6) % 2);
    const SystemModel m = random_affine_model(rng, n, o, py, 1);
    const MatrixXd L = random_matrix(rng, n, py, 0.5);
    const GainCertificate g = GainCertificate::constant_gain(L, MatrixXd::Identity(n, n), 0.5, 1.0);
    const double mu = rng.uniform(0.0, 0.99);
    const int T = 1 + trial % 5;
    std::vector<ZPoint> pts;
    for (int k = 0; k < T; ++k) {
      pts.push_back(ZPoint{random_vector(rng, n), VectorXd(0), random_vector(rng, 1),
                            random_vector(rng, o)});
    }
    // Affine model: constant Jacobians, so Y_t = Σ_{s<t} Φ^{t−1−s}(E + LF).
    const Jacobians j = m.jacobians(pts[0].x, pts[0].u, pts[0].w, pts[0].p);
    const MatrixXd Phi = j.A + L * j.C;
    const MatrixXd drive = j.E + L * j.F;
    MatrixXd G = MatrixXd::Zero(o, o);
    for (int t = 0; t < T; ++t) {
      MatrixXd Y = MatrixXd::Zero(n, o);
      for (int s = 0; s < t; ++s) {
        MatrixXd pw = MatrixXd::Identity(n, n);
        for (int e = 0; e < t - 1 - s; ++e) pw = pw * Phi;
        Y += pw * drive;
      }
      const MatrixXd yb = j.C * Y + j.F;
      G += std::pow(mu, T - 1 - t) * yb.transpose() * yb;
    }
    const GramianResult r = gramian_over_window(pts, m, g, mu);
    const double denom = std::max(G.norm(), 1e-300);
    worst = std::max(worst, (r.G - G).norm() / denom);
  }

  const SystemModel chua = make_chua_model();
  const CertificateSet certs = shipped_certificates("chua");
  std::vector<ZPoint> pts;
  for (int k = 0; k < 60; ++k) {
    VectorXd x(3);
    x << 0.0, rng.uniform(-1, 1), rng.uniform(-3, 3);
    pts.push_back(ZPoint{x, VectorXd(0), random_vector(rng, 4, 1e-3), vec1(rng.uniform(0.2, 0.8))});
  }
  const double alpha_zero = gramian_over_window(pts, chua, certs.gain, certs.pe.eta_p).alpha_t;
  return {worst <= 1e-12 && alpha_zero == 0.0,
          "worst rel err " + fmt("%.3g", worst) + ", chua x1=0 alpha_t " + fmt("%.3g", alpha_zero)};
}

Outcome certificate_validation() {
  const SystemModel m = make_chua_model();
  const CertificateSet c = shipped_certificates("chua");
  SamplingOptions o;
  o.n_samples = 10000;
  o.half_width = c.derivation.w_half_width;
  const ValidationResult ioss = validate_ioss(c.ioss, m, o);
  const ValidationResult gain = validate_gain(c.gain, m, o);
  const bool phi_const = gain_has_constant_phi(c.gain, m, o);
  return {ioss.pass && gain.pass && ioss.worst_violation <= 1e-9 && gain.worst_violation <= 1e-9 &&
              ioss.samples == 10000u && phi_const,
          "ioss worst " + fmt("%.3g", ioss.worst_violation) + ", gain worst " +
              fmt("%.3g", gain.worst_violation) + ", constant phi " + (phi_const ? "yes" : "no")};
}

std::string slurp(const std::filesystem::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

Outcome determinism() {
  RunConfig cfg;
  cfg.t_sim = 300;
  const auto root = std::filesystem::temp_directory_path() / "emhe_acceptance_determinism";
  std::filesystem::remove_all(root);
  emit_run(run(cfg), (root / "a").string());
  emit_run(run(cfg), (root / "b").string());
  bool same = true;
  int files = 0;
  for (const std::string v : {"naive", "excitation_aware"}) {
    const std::string name = "trace_" + v + ".csv";
    const std::string a = slurp(root / "a" / name), b = slurp(root / "b" / name);
    same = same && !a.empty() && a == b;
    ++files;
  }
  std::filesystem::remove_all(root);
  return {same, std::to_string(files) + " trace files compared"};
}

}  // namespace

int main() {
  const std::vector<std::pair<std::string, std::function<Outcome()>>> criteria{
      {"chua_three_seed_study", chua_three_seed_study},
      {"zero_noise_exactness", zero_noise},
      {"bound_domination", bound_domination},
      {"min_horizon_oracle", min_horizon_oracle},
      {"partition_identity", partition_identity},
      {"monitor_oracle", monitor_oracle},
      {"certificate_validation", certificate_validation},
      {"determinism", determinism},
  };
  int failures = 0;
  for (const auto& [name, check] : criteria) {
    Outcome o;
    try {
      o = check();
    } catch (const std::exception& e) {
      o = {false, std::string("exception: ") + e.what()};
    }
    if (!o.pass) ++failures;
    std::printf("%s %s: %s\n", o.pass ? "PASS" : "FAIL", name.c_str(), o.detail.c_str());
    std::fflush(stdout);
  }
  return failures == 0 ? 0 : 1;
}
