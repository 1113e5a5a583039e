#include "emhe/harness.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <thread>

#include <json.hpp>

#include "emhe/certificate_io.hpp"
#include "emhe/errors.hpp"
#include "emhe/linalg.hpp"
#include "emhe/models.hpp"
#include "emhe/random.hpp"

namespace emhe {

using nlohmann::json;

namespace {

VectorXd to_vec(const std::vector<double>& v) {
  return Eigen::Map<const VectorXd>(v.data(), static_cast<Eigen::Index>(v.size()));
}

template <class T>
void take(const json& j, const char* key, T& out) {
  if (j.contains(key)) out = j.at(key).get<T>();
}

std::string fmt(double v) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

void write_file(const std::string& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot write '" + path + "'");
  out << text;
  if (!out) throw IoError("failed writing '" + path + "'");
}

}  // namespace

RunConfig parse_run_config(const std::string& text, const RunConfig& base) {
  json j;
  try {
    j = json::parse(text);
  } catch (const json::exception& e) {
    throw InputError(std::string("run config is not valid JSON: ") + e.what());
  }
  if (!j.is_object()) throw InputError("run config must be a JSON object");
  static const std::vector<std::string> known{
      "model", "t_sim", "N", "eta1", "eta2", "alpha", "w_mult", "v_mult", "q_mult",
      "r_mult", "x0", "xhat0", "phat0", "p_true", "amplitudes", "seed", "certificates",
      "variants", "max_iter", "tol_g", "tol_g_rel", "validate_certificates", "parallel"};
  for (const auto& [key, value] : j.items()) {
    if (std::find(known.begin(), known.end(), key) == known.end()) {
      throw InputError("run config: unknown key '" + key + "'");
    }
  }
  RunConfig c = base;
  try {
    take(j, "model", c.model);
    take(j, "t_sim", c.t_sim);
    take(j, "N", c.N);
    take(j, "eta1", c.eta1);
    take(j, "eta2", c.eta2);
    take(j, "alpha", c.alpha);
    take(j, "w_mult", c.w_mult);
    take(j, "v_mult", c.v_mult);
    take(j, "q_mult", c.q_mult);
    take(j, "r_mult", c.r_mult);
    take(j, "x0", c.x0);
    take(j, "xhat0", c.xhat0);
    take(j, "phat0", c.phat0);
    take(j, "p_true", c.p_true);
    take(j, "amplitudes", c.amplitudes);
    take(j, "seed", c.seed);
    take(j, "certificates", c.certificates);
    take(j, "variants", c.variants);
    take(j, "max_iter", c.max_iter);
    take(j, "tol_g", c.tol_g);
    take(j, "tol_g_rel", c.tol_g_rel);
    take(j, "validate_certificates", c.validate_certificates);
    take(j, "parallel", c.parallel);
  } catch (const json::exception& e) {
    throw InputError(std::string("run config has a mistyped field: ") + e.what());
  }
  return c;
}

RunConfig load_run_config(const std::string& path, const RunConfig& base) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open run config '" + path + "'");
  std::ostringstream buf;
  buf << in.rdbuf();
  return parse_run_config(buf.str(), base);
}

std::string run_config_to_json(const RunConfig& c) {
  json j{{"model", c.model},       {"t_sim", c.t_sim},
         {"N", c.N},               {"eta1", c.eta1},
         {"eta2", c.eta2},         {"alpha", c.alpha},
         {"w_mult", c.w_mult},     {"v_mult", c.v_mult},
         {"q_mult", c.q_mult},     {"r_mult", c.r_mult},
         {"x0", c.x0},             {"xhat0", c.xhat0},
         {"phat0", c.phat0},       {"p_true", c.p_true},
         {"amplitudes", c.amplitudes}, {"seed", c.seed},
         {"certificates", c.certificates}, {"variants", c.variants},
         {"max_iter", c.max_iter}, {"tol_g", c.tol_g},
         {"tol_g_rel", c.tol_g_rel}, {"validate_certificates", c.validate_certificates},
         {"parallel", c.parallel}};
  return j.dump(2) + "\n";
}

std::vector<VectorXd> gen_disturbance(std::uint64_t seed, int t_sim,
                                      const std::vector<double>& amplitudes) {
  if (t_sim < 0) throw UsageError("gen_disturbance: t_sim must be nonnegative");
  for (double a : amplitudes) {
    if (!(a >= 0.0)) throw UsageError("gen_disturbance: amplitudes must be nonnegative");
  }
  UniformSource rng(seed);
  const auto q = static_cast<Eigen::Index>(amplitudes.size());
  std::vector<VectorXd> w(static_cast<std::size_t>(t_sim), VectorXd(q));
  for (auto& wt : w) {
    for (Eigen::Index i = 0; i < q; ++i) wt(i) = rng.symmetric(amplitudes[static_cast<std::size_t>(i)]);
  }
  return w;
}

std::string certificate_path(const RunConfig& cfg) {
  if (!cfg.certificates.empty()) return cfg.certificates;
  return (std::filesystem::path(default_data_dir()) / "certificates" / (cfg.model + ".json")).string();
}

VariantSummary summarize(const std::vector<EstimateRecord>& records, const Trajectory& truth,
                         const std::string& variant) {
  if (records.size() != truth.x_seq.size()) {
    throw UsageError("summarize: records and truth differ in length");
  }
  VariantSummary s;
  s.variant = variant;
  std::vector<VectorXd> ex, ep;
  ex.reserve(records.size());
  ep.reserve(records.size());
  double tau = 0.0;
  int pe = 0, streak = 0;
  for (std::size_t t = 0; t < records.size(); ++t) {
    const EstimateRecord& r = records[t];
    ex.push_back(r.xhat - truth.x_seq[t]);
    ep.push_back(r.phat - truth.p);
    if (t == 0) continue;
    tau += r.solve_seconds;
    if (r.status == "failed") ++s.failures;
    if (r.pe) {
      ++pe;
      streak = 0;
    } else {
      s.longest_non_pe = std::max(s.longest_non_pe, ++streak);
    }
  }
  s.rmse_x = rmse(ex);
  s.rmse_p = rmse(ep);
  const auto steps = static_cast<double>(records.size() - 1);
  if (steps > 0) {
    s.tau_avrg = tau / steps;
    s.pe_fraction = pe / steps;
    s.failure_rate = s.failures / steps;
  }
  s.failed = s.failure_rate > 0.10;
  return s;
}

RunResult run(const RunConfig& cfg) {
  const CertificateSet certs = load_certificates(certificate_path(cfg));
  if (certs.model != cfg.model) {
    throw InputError("certificate fixture is for model '" + certs.model + "', not '" + cfg.model + "'");
  }
  if (cfg.validate_certificates) {
    const SystemModel model = make_model_by_name(cfg.model);
    SamplingOptions so;
    so.n_samples = 2000;
    so.half_width = certs.derivation.w_half_width;
    const ValidationResult io = validate_ioss(certs.ioss, model, so);
    const ValidationResult ga = validate_gain(certs.gain, model, so);
    if (!io.pass || !ga.pass) {
      throw InputError("certificate fixture failed validation (ioss worst " +
                       fmt(io.worst_violation) + ", gain worst " + fmt(ga.worst_violation) + ")");
    }
  }
  return run(cfg, certs);
}

RunResult run(const RunConfig& cfg, const CertificateSet& certs) {
  if (cfg.t_sim < 0) throw UsageError("run: t_sim must be nonnegative");
  if (cfg.variants.empty()) throw UsageError("run: no variants requested");
  const SystemModel model = make_model_by_name(cfg.model);
  if (static_cast<Eigen::Index>(cfg.amplitudes.size()) != model.q()) {
    throw UsageError("run: amplitudes must have one entry per disturbance component");
  }
  RunResult res;
  res.config = cfg;
  res.mhe = config_from_certificates(certs, cfg.N, cfg.eta1, cfg.eta2, cfg.alpha, cfg.w_mult,
                                     cfg.v_mult, cfg.q_mult, cfg.r_mult);
  res.mhe.solver.max_iter = cfg.max_iter;
  res.mhe.solver.tol_g = cfg.tol_g;
  res.mhe.solver.tol_g_rel = cfg.tol_g_rel;

  const std::vector<VectorXd> w = gen_disturbance(cfg.seed, cfg.t_sim, cfg.amplitudes);
  const std::vector<VectorXd> u(static_cast<std::size_t>(cfg.t_sim), VectorXd(model.m()));
  res.truth = simulate(model, to_vec(cfg.x0), to_vec(cfg.p_true), u, w);

  res.runs.resize(cfg.variants.size());
  for (std::size_t i = 0; i < cfg.variants.size(); ++i) {
    res.runs[i].variant = variant_from_string(cfg.variants[i]);
  }
  res.mhe.variant = res.runs.front().variant;

  const VectorXd xhat0 = to_vec(cfg.xhat0);
  const VectorXd phat0 = to_vec(cfg.phat0);
  // Construct every estimator up front so argument errors surface on this thread.
  std::vector<MovingHorizonEstimator> estimators;
  estimators.reserve(res.runs.size());
  for (const VariantRun& vr : res.runs) {
    MheConfig mc = res.mhe;
    mc.variant = vr.variant;
    estimators.emplace_back(model, mc, certs.gain, xhat0, phat0);
  }

  auto worker = [&](std::size_t i) {
    MovingHorizonEstimator& est = estimators[i];
    std::vector<EstimateRecord>& recs = res.runs[i].records;
    recs.reserve(static_cast<std::size_t>(cfg.t_sim + 1));
    recs.push_back(est.initial_record());
    for (int t = 0; t < cfg.t_sim; ++t) {
      const auto ts = static_cast<std::size_t>(t);
      recs.push_back(est.step(u[ts], res.truth.y_seq[ts]));
    }
  };
  if (cfg.parallel && res.runs.size() > 1) {
    std::vector<std::thread> threads;
    std::vector<std::exception_ptr> errors(res.runs.size());
    for (std::size_t i = 0; i < res.runs.size(); ++i) {
      threads.emplace_back([&, i] {
        try {
          worker(i);
        } catch (...) {
          errors[i] = std::current_exception();
        }
      });
    }
    for (auto& th : threads) th.join();
    for (auto& e : errors) {
      if (e) std::rethrow_exception(e);
    }
  } else {
    for (std::size_t i = 0; i < res.runs.size(); ++i) worker(i);
  }

  for (VariantRun& vr : res.runs) {
    vr.summary = summarize(vr.records, res.truth, to_string(vr.variant));
    res.failed = res.failed || vr.summary.failed;
  }
  return res;
}

std::string trace_header(Eigen::Index n, Eigen::Index o) {
  std::string h = "t";
  for (Eigen::Index i = 1; i <= n; ++i) h += ",x" + std::to_string(i);
  for (Eigen::Index i = 1; i <= n; ++i) h += ",xh" + std::to_string(i);
  if (o == 1) {
    h += ",phat";
  } else {
    for (Eigen::Index i = 1; i <= o; ++i) h += ",phat" + std::to_string(i);
  }
  return h + ",ex_norm,ep_norm,alpha_t,pe,cost,status";
}

std::string format_trace(const std::vector<EstimateRecord>& records, const Trajectory& truth) {
  if (records.size() != truth.x_seq.size()) {
    throw UsageError("format_trace: records and truth differ in length");
  }
  const Eigen::Index n = truth.x_seq.front().size(), o = truth.p.size();
  std::string out = trace_header(n, o) + "\n";
  for (std::size_t t = 0; t < records.size(); ++t) {
    const EstimateRecord& r = records[t];
    const VectorXd& x = truth.x_seq[t];
    std::string line = std::to_string(r.t);
    for (Eigen::Index i = 0; i < n; ++i) line += "," + fmt(x(i));
    for (Eigen::Index i = 0; i < n; ++i) line += "," + fmt(r.xhat(i));
    for (Eigen::Index i = 0; i < o; ++i) line += "," + fmt(r.phat(i));
    line += "," + fmt((r.xhat - x).norm());
    line += "," + fmt((r.phat - truth.p).norm());
    line += "," + fmt(r.alpha_t);
    line += r.pe ? ",1" : ",0";
    line += "," + fmt(r.cost_star);
    line += "," + r.status;
    out += line + "\n";
  }
  return out;
}

void emit_trace(const std::vector<EstimateRecord>& records, const Trajectory& truth,
                const std::string& path) {
  write_file(path, format_trace(records, truth));
}

std::string format_prior_trace(const std::vector<EstimateRecord>& records) {
  std::string out = "t";
  const Eigen::Index o = records.empty() ? 0 : records.front().pbar.size();
  if (o == 1) {
    out += ",pbar";
  } else {
    for (Eigen::Index i = 1; i <= o; ++i) out += ",pbar" + std::to_string(i);
  }
  out += ",gate\n";
  for (const EstimateRecord& r : records) {
    std::string line = std::to_string(r.t);
    for (Eigen::Index i = 0; i < o; ++i) line += "," + fmt(r.pbar(i));
    line += r.gate ? ",1" : ",0";
    out += line + "\n";
  }
  return out;
}

std::string summary_to_json(const RunResult& res) {
  json j;
  j["config"] = json::parse(run_config_to_json(res.config));
  j["failed"] = res.failed;
  json vs = json::array();
  std::vector<VariantSummary> sums;
  for (const VariantRun& vr : res.runs) {
    const VariantSummary& s = vr.summary;
    sums.push_back(s);
    vs.push_back({{"variant", s.variant},
                  {"rmse_x", s.rmse_x},
                  {"rmse_p", s.rmse_p},
                  {"tau_avrg", s.tau_avrg},
                  {"pe_fraction", s.pe_fraction},
                  {"longest_non_pe", s.longest_non_pe},
                  {"failures", s.failures},
                  {"failure_rate", s.failure_rate},
                  {"failed", s.failed}});
  }
  j["variants"] = vs;
  try {
    const Comparison c = compare_variants(sums);
    j["comparison"] = {{"ratio_p", c.ratio_p},
                       {"rmse_x_rel_diff", c.rmse_x_rel_diff},
                       {"states_agree", c.states_agree},
                       {"tau_ratio", c.tau_ratio}};
  } catch (const UsageError&) {
    // only one of the two reference variants was run
  }
  return j.dump(2) + "\n";
}

void emit_run(const RunResult& res, const std::string& dir) {
  std::error_code ec;
  std::filesystem::create_directories(dir, ec);
  if (ec) throw IoError("cannot create output directory '" + dir + "': " + ec.message());
  const std::filesystem::path base(dir);
  for (const VariantRun& vr : res.runs) {
    const std::string name = to_string(vr.variant);
    emit_trace(vr.records, res.truth, (base / ("trace_" + name + ".csv")).string());
    write_file((base / ("priors_" + name + ".csv")).string(), format_prior_trace(vr.records));
  }
  write_file((base / "summary.json").string(), summary_to_json(res));
}

Comparison compare_variants(const std::vector<VariantSummary>& sums) {
  const VariantSummary* a = nullptr;
  const VariantSummary* b = nullptr;
  for (const auto& s : sums) {
    if (s.variant == "naive") a = &s;
    if (s.variant == "excitation_aware") b = &s;
  }
  if (!a) throw UsageError("compare_variants: naive variant missing");
  if (!b) throw UsageError("compare_variants: excitation_aware variant missing");
  Comparison c;
  c.ratio_p = a->rmse_p == b->rmse_p ? 1.0 : a->rmse_p / b->rmse_p;
  const double big = std::max(a->rmse_x, b->rmse_x);
  c.rmse_x_rel_diff = big > 0.0 ? std::abs(a->rmse_x - b->rmse_x) / big : 0.0;
  c.states_agree = c.rmse_x_rel_diff <= 0.05;
  c.tau_ratio = b->tau_avrg > 0.0 ? a->tau_avrg / b->tau_avrg : 0.0;
  return c;
}

BoundReport evaluate_bound(const CertificateSet& certs, const MheConfig& mhe,
                           const Trajectory& truth, const std::vector<EstimateRecord>& records) {
  if (records.size() != truth.x_seq.size() || records.empty()) {
    throw UsageError("evaluate_bound: records and truth differ in length");
  }
  const BoundWeights bw = bound_weights_for(mhe.W, mhe.V, mhe.Q);
  BoundReport rep;
  rep.constants = compute_bound_constants(certs.ioss, certs.pe, bw, mhe.eta1, mhe.eta2, mhe.N);
  BoundRun br;
  const VectorXd ex0 = records.front().xhat - truth.x_seq.front();
  const VectorXd ep0 = records.front().phat - truth.p;
  br.ex0_sq = ex0.dot(bw.W_bar * ex0);
  br.ep0_sq = ep0.dot(bw.V_upper * ep0);
  br.w_sq.reserve(truth.w_seq.size());
  for (const VectorXd& w : truth.w_seq) br.w_sq.push_back(w.dot(rep.constants.Q_bound * w));
  for (const EstimateRecord& r : records) br.flags.push_back(r.gate);
  const std::vector<double> bound = theorem_bound(br, rep.constants);
  rep.dominated = true;
  for (std::size_t t = 0; t < records.size(); ++t) {
    const VectorXd ex = records[t].xhat - truth.x_seq[t];
    const VectorXd ep = records[t].phat - truth.p;
    BoundRow row;
    row.t = records[t].t;
    row.gamma1 = ex.dot(certs.ioss.P_U * ex) + ep.dot(mhe.V * ep);
    row.bound = bound[t];
    if (!(row.gamma1 <= row.bound)) rep.dominated = false;
    if (row.bound > 0.0) rep.worst_ratio = std::max(rep.worst_ratio, row.gamma1 / row.bound);
    else if (row.gamma1 > 0.0) rep.worst_ratio = INFINITY;
    rep.rows.push_back(row);
  }
  return rep;
}

}  // namespace emhe
