#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "emhe/certificates.hpp"
#include "emhe/mhe.hpp"
#include "emhe/model.hpp"

namespace emhe {

/// Experiment description. Defaults reproduce the Chua study.
struct RunConfig {
  std::string model = "chua";
  int t_sim = 5000;
  int N = 150;
  double eta1 = 0.934;
  double eta2 = 0.9997;
  double alpha = 1e-3;
  double w_mult = 2.0;    // W = w_mult·P_p
  double v_mult = 100.0;  // V = v_mult·S_p
  double q_mult = 2.0;    // Q = q_mult·(Q_x+Q_p)
  double r_mult = 1.0;    // R = r_mult·(R_x+R_p)
  std::vector<double> x0{1.0, 0.0, -1.0};
  std::vector<double> xhat0{-1.0, 0.1, 2.0};
  std::vector<double> phat0{0.2};
  std::vector<double> p_true{0.45};
  std::vector<double> amplitudes{1e-3, 1e-3, 1e-3, 0.1};
  std::uint64_t seed = 1;
  std::string certificates;  // empty: <data dir>/certificates/<model>.json
  std::vector<std::string> variants{"naive", "excitation_aware"};
  int max_iter = 50;
  double tol_g = 1e-10;
  double tol_g_rel = 1e-9;
  bool validate_certificates = true;
  bool parallel = true;  // one worker thread per variant
};

/// Unknown keys are rejected. Missing keys keep the values of `base`.
RunConfig parse_run_config(const std::string& json_text, const RunConfig& base = {});
RunConfig load_run_config(const std::string& path, const RunConfig& base = {});
std::string run_config_to_json(const RunConfig& cfg);

/// Independent draws w_t,i ∈ [−a_i, a_i) for t = 0..t_sim−1, time-major.
std::vector<VectorXd> gen_disturbance(std::uint64_t seed, int t_sim,
                                      const std::vector<double>& amplitudes);

struct VariantSummary {
  std::string variant;
  double rmse_x = 0.0;
  double rmse_p = 0.0;
  double tau_avrg = 0.0;     // mean wall time per step [s]
  double pe_fraction = 0.0;  // over t = 1..t_sim
  int longest_non_pe = 0;
  int failures = 0;
  double failure_rate = 0.0;
  bool failed = false;  // failure rate above 10 %
};

struct VariantRun {
  Variant variant = Variant::naive;
  std::vector<EstimateRecord> records;  // t = 0..t_sim
  VariantSummary summary;
};

struct RunResult {
  RunConfig config;
  MheConfig mhe;  // variant field is that of the first run
  Trajectory truth;
  std::vector<VariantRun> runs;
  bool failed = false;
};

/// Resolves the fixture path of a config.
std::string certificate_path(const RunConfig& cfg);

/// Simulates the truth once and runs every requested variant on the same data.
/// Throws InputError when the fixture fails validation or does not match the model.
RunResult run(const RunConfig& cfg);
/// Same with an already loaded certificate set (no fixture validation).
RunResult run(const RunConfig& cfg, const CertificateSet& certs);

VariantSummary summarize(const std::vector<EstimateRecord>& records, const Trajectory& truth,
                         const std::string& variant);

/// Exact header for the three-state, one-parameter case:
/// t,x1,x2,x3,xh1,xh2,xh3,phat,ex_norm,ep_norm,alpha_t,pe,cost,status
std::string trace_header(Eigen::Index n, Eigen::Index o);
std::string format_trace(const std::vector<EstimateRecord>& records, const Trajectory& truth);
/// Throws IoError on an unwritable path.
void emit_trace(const std::vector<EstimateRecord>& records, const Trajectory& truth,
                const std::string& path);
/// t,pbar...,gate per step (the prior actually used by the next windows).
std::string format_prior_trace(const std::vector<EstimateRecord>& records);

std::string summary_to_json(const RunResult& result);

/// Writes trace_<variant>.csv, priors_<variant>.csv and summary.json into dir.
void emit_run(const RunResult& result, const std::string& dir);

struct Comparison {
  double ratio_p = 0.0;            // RMSE_p(naive)/RMSE_p(excitation_aware)
  double rmse_x_rel_diff = 0.0;    // |a−b|/max(a,b)
  bool states_agree = false;       // within 5 %
  double tau_ratio = 0.0;          // τ(naive)/τ(excitation_aware)
};
/// Throws UsageError when either variant is missing.
Comparison compare_variants(const std::vector<VariantSummary>& summaries);

struct BoundRow {
  int t = 0;
  double gamma1 = 0.0;  // ‖x̂−x‖²_{P_U} + ‖p̂−p‖²_V
  double bound = 0.0;   // C0 × right side
};

struct BoundReport {
  BoundConstants constants;
  std::vector<BoundRow> rows;
  bool dominated = false;
  double worst_ratio = 0.0;  // max γ1/bound
};

/// Error bound along a recorded run. The flags are the gate flags of the records.
BoundReport evaluate_bound(const CertificateSet& certs, const MheConfig& mhe,
                           const Trajectory& truth, const std::vector<EstimateRecord>& records);

}  // namespace emhe
