#include <benchmark/benchmark.h>

#include "emhe/certificate_io.hpp"
#include "emhe/excitation.hpp"
#include "emhe/mhe.hpp"
#include "emhe/models.hpp"
#include "emhe/random.hpp"

using namespace emhe;

namespace {

struct ChuaWindow {
  SystemModel model = make_chua_model();
  CertificateSet certs = load_certificates(default_data_dir() + "/certificates/chua.json");
  MheConfig cfg;
  WindowData data;
  VectorXd theta;

  explicit ChuaWindow(int T) {
    cfg = config_from_certificates(certs, T, 0.934, 0.9997, 1e-3);
    UniformSource rng(1);
    VectorXd x(3);
    x << 1, 0, -1;
    std::vector<VectorXd> w;
    for (int k = 0; k < T; ++k) {
      VectorXd d(4);
      d << rng.symmetric(1e-3), rng.symmetric(1e-3), rng.symmetric(1e-3), rng.symmetric(0.1);
      w.push_back(d);
    }
    const VectorXd p = VectorXd::Constant(1, 0.45);
    const Trajectory tr = simulate(model, x, p, {}, w);
    data.T = T;
    data.xbar = x;
    data.pbar = VectorXd::Constant(1, 0.4);
    data.u.assign(static_cast<std::size_t>(T), VectorXd(0));
    data.y = tr.y_seq;
    theta = VectorXd::Zero(3 + 1 + 4 * T);
    theta.head(3) = x;
    theta(3) = 0.4;
  }
};

void BM_RiccatiStep(benchmark::State& st) {
  ChuaWindow cw(static_cast<int>(st.range(0)));
  const BuiltWindow bw = build_window(cw.cfg, cw.model, cw.data);
  const VectorXd damping = VectorXd::Constant(cw.theta.size(), 1e-3);
  for (auto _ : st) {
    auto lm = bw.window->linearize(cw.theta);
    benchmark::DoNotOptimize(lm->solve_damped(damping));
  }
}
BENCHMARK(BM_RiccatiStep)->Arg(20)->Arg(150);

void BM_DenseStep(benchmark::State& st) {
  ChuaWindow cw(static_cast<int>(st.range(0)));
  const BuiltWindow bw = build_window(cw.cfg, cw.model, cw.data);
  for (auto _ : st) {
    const MatrixXd J = bw.window->jacobian(cw.theta);
    const VectorXd r = bw.window->residual(cw.theta);
    MatrixXd H = J.transpose() * J;
    H.diagonal().array() += 1e-3;
    benchmark::DoNotOptimize(H.ldlt().solve(-J.transpose() * r));
  }
}
BENCHMARK(BM_DenseStep)->Arg(20)->Arg(150);

void BM_WindowSolve(benchmark::State& st) {
  ChuaWindow cw(static_cast<int>(st.range(0)));
  const BuiltWindow bw = build_window(cw.cfg, cw.model, cw.data);
  for (auto _ : st) benchmark::DoNotOptimize(solve(bw.problem, cw.theta, cw.cfg.solver));
}
BENCHMARK(BM_WindowSolve)->Arg(150)->Unit(benchmark::kMillisecond);

void BM_Monitor(benchmark::State& st) {
  ChuaWindow cw(150);
  std::vector<ZPoint> pts;
  for (int k = 0; k < 150; ++k) {
    VectorXd x(3);
    x << 0.1 * k / 150.0, 0.0, 0.5;
    pts.push_back(ZPoint{x, VectorXd(0), VectorXd::Zero(4), VectorXd::Constant(1, 0.45)});
  }
  for (auto _ : st) {
    benchmark::DoNotOptimize(gramian_over_window(pts, cw.model, cw.certs.gain, cw.certs.pe.eta_p));
  }
}
BENCHMARK(BM_Monitor);

}  // namespace
BENCHMARK_MAIN();
