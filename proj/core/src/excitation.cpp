#include "emhe/excitation.hpp"

#include <Eigen/Eigenvalues>
#include <utility>

#include "emhe/errors.hpp"
#include "emhe/linalg.hpp"

namespace emhe {

GainCertificate GainCertificate::constant_phi(MatrixXd phi, const MatrixXd& C, MatrixXd P,
                                              double eta, double L_bar) {
  GainCertificate g;
  g.kind = Kind::constant_phi;
  if (phi.rows() != phi.cols() || phi.cols() != C.cols()) {
    throw UsageError("GainCertificate: Φ and C have inconsistent shapes");
  }
  const MatrixXd cct = C * C.transpose();
  if (!linalg::is_positive_definite(cct)) {
    throw UsageError("GainCertificate: C must have full row rank");
  }
  g.target_phi = std::move(phi);
  g.c_pinv = C.transpose() * cct.inverse();
  g.P = std::move(P);
  g.eta = eta;
  g.L_bar = L_bar;
  return g;
}

GainCertificate GainCertificate::constant_gain(MatrixXd L, MatrixXd P, double eta, double L_bar) {
  GainCertificate g;
  g.kind = Kind::constant_l;
  g.L0 = std::move(L);
  g.P = std::move(P);
  g.eta = eta;
  g.L_bar = L_bar;
  return g;
}

MatrixXd GainCertificate::gain(const Jacobians& jac) const {
  if (kind == Kind::constant_l) return L0;
  return (target_phi - jac.A) * c_pinv;
}

MatrixXd GainCertificate::closed_loop(const Jacobians& jac) const {
  if (kind == Kind::constant_phi) return target_phi;
  return jac.A + L0 * jac.C;
}

std::string to_string(GainCertificate::Kind kind) {
  return kind == GainCertificate::Kind::constant_phi ? "constant_phi" : "constant_l";
}

MatrixXd phi(const SystemModel& model, const GainCertificate& gain, const ZPoint& z) {
  return gain.closed_loop(model.jacobians(z.x, z.u, z.w, z.p));
}

MonitorState MonitorState::reset(Eigen::Index n, Eigen::Index o, double mu) {
  if (!(mu >= 0.0 && mu < 1.0)) throw UsageError("MonitorState: mu must lie in [0,1)");
  MonitorState ms;
  ms.Y = MatrixXd::Zero(n, o);
  ms.G = MatrixXd::Zero(o, o);
  ms.mu = mu;
  return ms;
}

void advance(MonitorState& ms, const GainCertificate& gain, const Jacobians& jac) {
  const MatrixXd L = gain.gain(jac);
  const MatrixXd ybar = jac.C * ms.Y + jac.F;
  ms.G = ms.mu * ms.G + ybar.transpose() * ybar;
  ms.Y = gain.closed_loop(jac) * ms.Y + jac.E + L * jac.F;
  ++ms.steps;
}

void advance(MonitorState& ms, const SystemModel& model, const GainCertificate& gain,
             const ZPoint& z) {
  advance(ms, gain, model.jacobians(z.x, z.u, z.w, z.p));
}

namespace {

double smallest_eigenvalue(const MatrixXd& G) {
  if (G.size() == 0) return 0.0;
  if (G.rows() == 1) return G(0, 0);
  return linalg::min_eigenvalue(G);
}

}  // namespace

GramianResult gramian_over_window(const std::vector<Jacobians>& window_jacobians,
                                  const GainCertificate& gain, double mu) {
  if (window_jacobians.empty()) throw UsageError("gramian_over_window: empty window");
  const Jacobians& first = window_jacobians.front();
  MonitorState ms = MonitorState::reset(first.A.rows(), first.E.cols(), mu);
  for (const Jacobians& jac : window_jacobians) advance(ms, gain, jac);
  GramianResult out;
  out.G = linalg::symmetrize(ms.G);
  out.alpha_t = smallest_eigenvalue(out.G);
  return out;
}

GramianResult gramian_over_window(const std::vector<ZPoint>& window, const SystemModel& model,
                                  const GainCertificate& gain, double mu) {
  if (window.empty()) throw UsageError("gramian_over_window: empty window");
  std::vector<Jacobians> jacs;
  jacs.reserve(window.size());
  for (const ZPoint& z : window) jacs.push_back(model.jacobians(z.x, z.u, z.w, z.p));
  return gramian_over_window(jacs, gain, mu);
}

}  // namespace emhe
