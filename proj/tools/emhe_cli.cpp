// emhe command line: run, validate-certs, min-horizon, bound, derive-certs.
#include <CLI11.hpp>

#include <cstdio>
#include <fstream>
#include <functional>
#include <iostream>
#include <string>
#include <vector>

#include "emhe/certificate_io.hpp"
#include "emhe/certificates.hpp"
#include "emhe/errors.hpp"
#include "emhe/harness.hpp"
#include "emhe/models.hpp"

namespace {

using namespace emhe;

constexpr int kExitFailed = 1;
constexpr int kExitUsage = 2;
constexpr int kExitInput = 3;

// Every RunConfig field gets a long flag (underscore name plus dash alias).
// Only flags given on the command line override the config document.
struct RunFlags {
  std::string config_path;
  RunConfig values;
  std::vector<std::pair<CLI::Option*, std::function<void(RunConfig&)>>> bound;

  template <class T>
  void add(CLI::App* app, const std::string& name, T RunConfig::*field, const std::string& help) {
    std::string names = "--" + name;
    std::string dashed = name;
    for (char& c : dashed) {
      if (c == '_') c = '-';
    }
    if (dashed != name) names += ",--" + dashed;
    CLI::Option* opt = app->add_option(names, values.*field, help);
    if constexpr (std::is_same_v<T, std::vector<double>> || std::is_same_v<T, std::vector<std::string>>) {
      opt->delimiter(',');
    }
    bound.emplace_back(opt, [this, field](RunConfig& c) { c.*field = values.*field; });
  }

  void attach(CLI::App* app) {
    app->add_option("--config", config_path, "JSON run config");
    add(app, "model", &RunConfig::model, "model name");
    add(app, "t_sim", &RunConfig::t_sim, "number of simulated steps");
    add(app, "N", &RunConfig::N, "horizon length");
    add(app, "eta1", &RunConfig::eta1, "prior discount");
    add(app, "eta2", &RunConfig::eta2, "stage discount");
    add(app, "alpha", &RunConfig::alpha, "excitation threshold");
    add(app, "w_mult", &RunConfig::w_mult, "W = w_mult P_p");
    add(app, "v_mult", &RunConfig::v_mult, "V = v_mult S_p");
    add(app, "q_mult", &RunConfig::q_mult, "Q = q_mult (Q_x+Q_p)");
    add(app, "r_mult", &RunConfig::r_mult, "R = r_mult (R_x+R_p)");
    add(app, "x0", &RunConfig::x0, "true initial state (comma separated)");
    add(app, "xhat0", &RunConfig::xhat0, "initial state estimate");
    add(app, "phat0", &RunConfig::phat0, "initial parameter estimate");
    add(app, "p_true", &RunConfig::p_true, "true parameter");
    add(app, "amplitudes", &RunConfig::amplitudes, "disturbance amplitudes");
    add(app, "seed", &RunConfig::seed, "disturbance seed");
    add(app, "certificates", &RunConfig::certificates, "certificate fixture path");
    add(app, "variants", &RunConfig::variants, "naive,excitation_aware,gated");
    add(app, "max_iter", &RunConfig::max_iter, "solver iteration cap");
    add(app, "tol_g", &RunConfig::tol_g, "absolute gradient tolerance");
    add(app, "tol_g_rel", &RunConfig::tol_g_rel, "relative gradient tolerance");
    add(app, "validate_certificates", &RunConfig::validate_certificates, "validate fixture first");
    add(app, "parallel", &RunConfig::parallel, "one thread per variant");
  }

  RunConfig resolve() const {
    RunConfig c = config_path.empty() ? RunConfig{} : load_run_config(config_path);
    for (const auto& [opt, apply] : bound) {
      if (opt->count() > 0) apply(c);
    }
    return c;
  }
};

void print_summary(const RunResult& res) {
  for (const VariantRun& vr : res.runs) {
    const VariantSummary& s = vr.summary;
    std::printf("%-17s rmse_x=%.6g rmse_p=%.6g tau=%.4gs pe=%.3f longest_non_pe=%d failures=%d%s\n",
                s.variant.c_str(), s.rmse_x, s.rmse_p, s.tau_avrg, s.pe_fraction,
                s.longest_non_pe, s.failures, s.failed ? " FAILED" : "");
  }
  std::vector<VariantSummary> sums;
  for (const VariantRun& vr : res.runs) sums.push_back(vr.summary);
  try {
    const Comparison c = compare_variants(sums);
    std::printf("ratio_p=%.4g rmse_x_rel_diff=%.4g states_agree=%s\n", c.ratio_p,
                c.rmse_x_rel_diff, c.states_agree ? "yes" : "no");
  } catch (const UsageError&) {
  }
}

CertificateSet load_for(const std::string& model, const std::string& path) {
  RunConfig c;
  c.model = model;
  c.certificates = path;
  return load_certificates(certificate_path(c));
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Moving horizon state and parameter estimation with excitation monitoring"};
  app.require_subcommand(1);

  RunFlags run_flags;
  std::string out_dir = "emhe_out";
  CLI::App* run_cmd = app.add_subcommand("run", "simulate and estimate, write traces and summary");
  run_flags.attach(run_cmd);
  run_cmd->add_option("--out", out_dir, "output directory");

  std::string v_model = "chua", v_path;
  std::size_t v_samples = 10000;
  std::uint64_t v_seed = 1;
  double v_tol = 1e-9;
  CLI::App* val_cmd = app.add_subcommand("validate-certs", "sample-check a certificate fixture");
  val_cmd->add_option("--model", v_model, "model name");
  val_cmd->add_option("--certificates", v_path, "fixture path");
  val_cmd->add_option("--samples", v_samples, "number of sampled pairs");
  val_cmd->add_option("--seed", v_seed, "sampling seed");
  val_cmd->add_option("--tol", v_tol, "scaled violation tolerance");

  std::string h_model = "chua", h_path, h_trace;
  double h_eta1 = 0.934, h_eta2 = 0.9997, h_w = 2.0, h_v = 100.0, h_q = 2.0;
  int h_nmax = 1000;
  CLI::App* mh_cmd = app.add_subcommand("min-horizon", "smallest N meeting the contraction conditions");
  mh_cmd->add_option("--model", h_model, "model name");
  mh_cmd->add_option("--certificates", h_path, "fixture path");
  mh_cmd->add_option("--eta1", h_eta1, "prior discount");
  mh_cmd->add_option("--eta2", h_eta2, "stage discount");
  mh_cmd->add_option("--w_mult,--w-mult", h_w, "W = w_mult P_p");
  mh_cmd->add_option("--v_mult,--v-mult", h_v, "V = v_mult S_p");
  mh_cmd->add_option("--q_mult,--q-mult", h_q, "Q = q_mult (Q_x+Q_p)");
  mh_cmd->add_option("--n_max,--n-max", h_nmax, "largest N scanned");
  mh_cmd->add_option("--trace", h_trace, "CSV of the per-N evaluation");

  RunFlags bound_flags;
  std::string b_out;
  bool b_use_min = false;
  CLI::App* b_cmd = app.add_subcommand("bound", "error bound along a run versus the actual error");
  bound_flags.attach(b_cmd);
  b_cmd->add_option("--out", b_out, "CSV of t,variant,gamma1,bound");
  b_cmd->add_flag("--use_min_horizon,--use-min-horizon", b_use_min, "set N to the minimal horizon");

  std::string d_model = "chua", d_out;
  std::size_t d_samples = 10000;
  std::uint64_t d_seed = 1;
  CLI::App* d_cmd = app.add_subcommand("derive-certs", "derive and write a certificate fixture");
  d_cmd->add_option("--model", d_model, "model name");
  d_cmd->add_option("--out", d_out, "fixture path")->required();
  d_cmd->add_option("--samples", d_samples, "samples for the norm bounds");
  d_cmd->add_option("--seed", d_seed, "sampling seed");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    return app.exit(e) == 0 ? 0 : kExitUsage;
  }

  try {
    if (*run_cmd) {
      const RunConfig cfg = run_flags.resolve();
      const RunResult res = run(cfg);
      emit_run(res, out_dir);
      print_summary(res);
      return res.failed ? kExitFailed : 0;
    }
    if (*val_cmd) {
      const SystemModel model = make_model_by_name(v_model);
      const CertificateSet certs = load_for(v_model, v_path);
      SamplingOptions so;
      so.n_samples = v_samples;
      so.seed = v_seed;
      so.tol = v_tol;
      so.half_width = certs.derivation.w_half_width;
      const ValidationResult io = validate_ioss(certs.ioss, model, so);
      const ValidationResult ga = validate_gain(certs.gain, model, so);
      bool ok = io.pass && ga.pass;
      std::printf("ioss  %s worst=%.6g samples=%zu\n", io.pass ? "PASS" : "FAIL",
                  io.worst_violation, io.samples);
      std::printf("gain  %s worst=%.6g samples=%zu\n", ga.pass ? "PASS" : "FAIL",
                  ga.worst_violation, ga.samples);
      if (certs.gain.kind == GainCertificate::Kind::constant_phi) {
        const bool cphi = gain_has_constant_phi(certs.gain, model, so);
        std::printf("phi   %s constant\n", cphi ? "PASS" : "FAIL");
        ok = ok && cphi;
      }
      return ok ? 0 : kExitFailed;
    }
    if (*mh_cmd) {
      const CertificateSet certs = load_for(h_model, h_path);
      const BoundWeights bw = bound_weights_for(h_w * certs.pe.P_p, h_v * certs.pe.S_p,
                                                h_q * (certs.ioss.Q_x + certs.pe.Q_p));
      const MinHorizonResult mh = min_horizon(certs.ioss, certs.pe, bw, h_eta1, h_eta2, h_nmax);
      if (!h_trace.empty()) {
        std::ofstream out(h_trace);
        if (!out) throw IoError("cannot write '" + h_trace + "'");
        out << "N,gamma_N,c1,rho,c,c2,lhs_excited_prior,lhs_excited_decay,lhs_bounded,pass\n";
        char buf[512];
        for (const HorizonEvaluation& e : mh.trace) {
          std::snprintf(buf, sizeof buf, "%d,%.17g,%.17g,%.17g,%.17g,%.17g,%.17g,%.17g,%.17g,%d\n",
                        e.N, e.gamma_N, e.c1, e.rho, e.c, e.c2, e.lhs_excited_prior,
                        e.lhs_excited_decay, e.lhs_bounded, e.pass ? 1 : 0);
          out << buf;
        }
      }
      if (!mh.found) {
        std::printf("no N <= %d satisfies the contraction conditions\n", h_nmax);
        return kExitFailed;
      }
      std::printf("%d\n", mh.N_min);
      return 0;
    }
    if (*b_cmd) {
      RunConfig cfg = bound_flags.resolve();
      const CertificateSet certs = load_certificates(certificate_path(cfg));
      if (b_use_min) {
        const BoundWeights bw = bound_weights_for(cfg.w_mult * certs.pe.P_p,
                                                  cfg.v_mult * certs.pe.S_p,
                                                  cfg.q_mult * (certs.ioss.Q_x + certs.pe.Q_p));
        const MinHorizonResult mh = min_horizon(certs.ioss, certs.pe, bw, cfg.eta1, cfg.eta2, 1000);
        if (!mh.found) throw InputError("no horizon up to 1000 satisfies the contraction conditions");
        cfg.N = mh.N_min;
      }
      const RunResult res = run(cfg);
      bool ok = !res.failed;
      std::string csv = "t,variant,gamma1,bound\n";
      char buf[256];
      for (const VariantRun& vr : res.runs) {
        MheConfig mc = res.mhe;
        mc.variant = vr.variant;
        const BoundReport rep = evaluate_bound(certs, mc, res.truth, vr.records);
        for (const BoundRow& r : rep.rows) {
          std::snprintf(buf, sizeof buf, "%d,%s,%.17g,%.17g\n", r.t, to_string(vr.variant).c_str(),
                        r.gamma1, r.bound);
          csv += buf;
        }
        std::printf("%-17s N=%d dominated=%s worst_ratio=%.6g conditions_hold=%s\n",
                    to_string(vr.variant).c_str(), cfg.N, rep.dominated ? "yes" : "no",
                    rep.worst_ratio, rep.constants.conditions_hold ? "yes" : "no");
        ok = ok && rep.dominated;
      }
      if (!b_out.empty()) {
        std::ofstream out(b_out, std::ios::binary);
        if (!out) throw IoError("cannot write '" + b_out + "'");
        out << csv;
      }
      return ok ? 0 : kExitFailed;
    }
    if (*d_cmd) {
      const SystemModel model = make_model_by_name(d_model);
      DeriveOptions opts = default_derive_options(d_model);
      opts.sampling.n_samples = d_samples;
      opts.sampling.seed = d_seed;
      save_certificates(derive_certificate_set(model, opts), d_out);
      std::printf("wrote %s\n", d_out.c_str());
      return 0;
    }
  } catch (const UsageError& e) {
    std::fprintf(stderr, "usage error: %s\n", e.what());
    return kExitUsage;
  } catch (const std::exception& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return kExitInput;
  }
  return kExitUsage;
}
