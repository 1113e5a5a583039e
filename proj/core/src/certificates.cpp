#include "emhe/certificates.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "emhe/errors.hpp"
#include "emhe/linalg.hpp"

namespace emhe {

namespace {

constexpr int kMaxRejections = 1000;

VectorXd draw_in(const Box& box, UniformSource& rng) {
  VectorXd v(box.dim());
  for (Eigen::Index i = 0; i < v.size(); ++i) v(i) = rng.uniform(box.lower(i), box.upper(i));
  return v;
}

double sq_norm(const VectorXd& v, const MatrixXd& W) {
  if (v.size() == 0) return 0.0;
  return v.dot(W * v);
}

double scaled_violation(double lhs, double rhs) { return (lhs - rhs) / std::max(1.0, rhs); }

// Every corner of the compact sampling box of (x, u, w, p); empty when there are too many.
std::vector<ZPoint> box_corners(const SystemModel& model, double half_width) {
  const Box X = model.X().clipped(half_width), U = model.U().clipped(half_width);
  const Box W = model.W().clipped(half_width), P = model.P().clipped(half_width);
  const Eigen::Index dim = X.dim() + U.dim() + W.dim() + P.dim();
  std::vector<ZPoint> corners;
  if (dim > 14) return corners;
  const std::uint64_t count = std::uint64_t{1} << dim;
  corners.reserve(count);
  for (std::uint64_t mask = 0; mask < count; ++mask) {
    Eigen::Index bit = 0;
    auto pick = [&](const Box& b) {
      VectorXd v(b.dim());
      for (Eigen::Index i = 0; i < v.size(); ++i, ++bit) {
        v(i) = ((mask >> bit) & 1u) ? b.upper(i) : b.lower(i);
      }
      return v;
    };
    ZPoint z;
    z.x = pick(X);
    z.u = pick(U);
    z.w = pick(W);
    z.p = pick(P);
    corners.push_back(std::move(z));
  }
  return corners;
}

}  // namespace

ZPoint sample_z(const SystemModel& model, UniformSource& rng, double half_width) {
  const Box X = model.X().clipped(half_width), U = model.U().clipped(half_width);
  const Box W = model.W().clipped(half_width), P = model.P().clipped(half_width);
  ZPoint z;
  for (int attempt = 0; attempt < kMaxRejections; ++attempt) {
    z.x = draw_in(X, rng);
    z.u = draw_in(U, rng);
    z.w = draw_in(W, rng);
    z.p = draw_in(P, rng);
    if (model.X().contains(model.step(z.x, z.u, z.w, z.p))) return z;
  }
  throw InputError("sample_z: could not draw a point with f(z) in X");
}

ValidationResult validate_ioss(const IossCertificate& cert, const SystemModel& model,
                               const SamplingOptions& opts) {
  if (!linalg::is_positive_definite(cert.P_U) || !linalg::is_positive_definite(cert.Q_x) ||
      !linalg::is_positive_definite(cert.R_x) ||
      (model.o() > 0 && !linalg::is_positive_definite(cert.S_x))) {
    throw UsageError("validate_ioss: certificate matrices must be positive definite");
  }
  UniformSource rng(opts.seed);
  ValidationResult res;
  res.worst_violation = -std::numeric_limits<double>::infinity();
  for (std::size_t s = 0; s < opts.n_samples; ++s) {
    ZPoint z = sample_z(model, rng, opts.half_width);
    ZPoint zt = sample_z(model, rng, opts.half_width);
    zt.u = z.u;
    const VectorXd dx_next = model.step(z.x, z.u, z.w, z.p) - model.step(zt.x, zt.u, zt.w, zt.p);
    const VectorXd dy = model.output(z.x, z.u, z.w, z.p) - model.output(zt.x, zt.u, zt.w, zt.p);
    const double lhs = sq_norm(dx_next, cert.P_U);
    const double rhs = cert.eta_x * sq_norm(z.x - zt.x, cert.P_U) +
                       sq_norm(z.p - zt.p, cert.S_x) + sq_norm(z.w - zt.w, cert.Q_x) +
                       sq_norm(dy, cert.R_x);
    const double v = scaled_violation(lhs, rhs);
    if (v > res.worst_violation) {
      res.worst_violation = v;
      res.worst_z = z;
      res.worst_z_tilde = zt;
    }
    ++res.samples;
  }
  if (res.samples == 0) res.worst_violation = 0.0;
  res.pass = res.worst_violation <= opts.tol;
  return res;
}

ValidationResult validate_gain(const GainCertificate& gain, const SystemModel& model,
                               const SamplingOptions& opts) {
  if (!linalg::is_positive_definite(gain.P)) {
    throw UsageError("validate_gain: P must be positive definite");
  }
  // ΦᵀPΦ ⪯ ηP is convex in Φ, so point checks also cover mean-value averages.
  const double p_scale = linalg::max_eigenvalue(gain.P);
  UniformSource rng(opts.seed);
  ValidationResult res;
  res.worst_violation = -std::numeric_limits<double>::infinity();
  auto check = [&](const ZPoint& z) {
    const Jacobians jac = model.jacobians(z.x, z.u, z.w, z.p);
    const MatrixXd Phi = gain.closed_loop(jac);
    const double contraction =
        linalg::max_eigenvalue(Phi.transpose() * gain.P * Phi - gain.eta * gain.P) / p_scale;
    const double gain_excess =
        (linalg::operator_norm(gain.gain(jac)) - gain.L_bar) / std::max(1.0, gain.L_bar);
    const double v = std::max(contraction, gain_excess);
    if (v > res.worst_violation) {
      res.worst_violation = v;
      res.worst_z = z;
    }
    ++res.samples;
  };
  for (std::size_t s = 0; s < opts.n_samples; ++s) check(sample_z(model, rng, opts.half_width));
  for (const ZPoint& z : box_corners(model, opts.half_width)) check(z);
  if (res.samples == 0) res.worst_violation = 0.0;
  res.pass = res.worst_violation <= opts.tol;
  return res;
}

bool gain_has_constant_phi(const GainCertificate& gain, const SystemModel& model,
                           const SamplingOptions& opts) {
  UniformSource rng(opts.seed);
  std::optional<MatrixXd> first;
  for (std::size_t s = 0; s < std::max<std::size_t>(opts.n_samples, 2); ++s) {
    const MatrixXd Phi = phi(model, gain, sample_z(model, rng, opts.half_width));
    if (!first) {
      first = Phi;
    } else if (!(Phi.array() == first->array()).all()) {
      return false;
    }
  }
  return true;
}

NormBounds sample_norm_bounds(const SystemModel& model, const GainCertificate& gain,
                              const SamplingOptions& opts, double margin) {
  NormBounds nb;
  auto update = [&](const ZPoint& z) {
    const Jacobians j = model.jacobians(z.x, z.u, z.w, z.p);
    nb.B = std::max(nb.B, linalg::operator_norm(j.B));
    nb.C = std::max(nb.C, linalg::operator_norm(j.C));
    nb.D = std::max(nb.D, linalg::operator_norm(j.D));
    nb.E = std::max(nb.E, linalg::operator_norm(j.E));
    nb.F = std::max(nb.F, linalg::operator_norm(j.F));
    nb.L = std::max(nb.L, linalg::operator_norm(gain.gain(j)));
  };
  UniformSource rng(opts.seed);
  for (std::size_t s = 0; s < opts.n_samples; ++s) update(sample_z(model, rng, opts.half_width));
  for (const ZPoint& z : box_corners(model, opts.half_width)) update(z);
  const double k = 1.0 + margin;
  nb.B *= k;
  nb.C *= k;
  nb.D *= k;
  nb.E *= k;
  nb.F *= k;
  nb.L *= k;
  return nb;
}

GainCertificate synthesize_gain_chua(const SystemModel& model, double eta, const VectorXd& poles,
                                     const ChuaParams& params) {
  if (model.n() != 3 || model.p_out() != 1 || model.o() != 1) {
    throw UsageError("synthesize_gain_chua: model is not a Chua instance");
  }
  if (!(eta > 0.0 && eta < 1.0)) throw UsageError("synthesize_gain_chua: eta must lie in (0,1)");
  if (poles.size() != 3) throw UsageError("synthesize_gain_chua: three poles are required");

  const VectorXd xc = 0.5 * (model.X().lower + model.X().upper);
  const VectorXd pc = 0.5 * (model.P().lower + model.P().upper);
  const Jacobians ref = model.jacobians(xc, VectorXd(0), VectorXd::Zero(model.q()), pc);

  // The characteristic polynomial is affine in the first column.
  auto phi_with = [&](const VectorXd& col) {
    MatrixXd m = ref.A;
    m.col(0) = col;
    return m;
  };
  const VectorXd base = linalg::characteristic_polynomial(phi_with(VectorXd::Zero(3)));
  MatrixXd M(3, 3);
  for (int i = 0; i < 3; ++i) {
    M.col(i) = (linalg::characteristic_polynomial(phi_with(VectorXd::Unit(3, i))) - base).tail(3);
  }
  const VectorXd target = linalg::polynomial_from_roots(poles);
  Eigen::FullPivLU<MatrixXd> lu(M);
  if (!lu.isInvertible()) throw DerivationError("synthesize_gain_chua: pole placement is singular");
  const VectorXd col = lu.solve(target.tail(3) - base.tail(3));
  const MatrixXd Phi = phi_with(col);

  if (linalg::spectral_radius(Phi) / std::sqrt(eta) >= 1.0) {
    throw DerivationError("synthesize_gain_chua: spectral radius of Φ/√η is not below 1");
  }
  const MatrixXd P = linalg::solve_discrete_lyapunov(Phi, eta, MatrixXd::Identity(3, 3));
  if (!linalg::is_positive_definite(P)) {
    throw DerivationError("synthesize_gain_chua: Lyapunov solution is not positive definite");
  }

  // Range of a11 over X×P: it is linear in p and quadratic in x1.
  std::vector<double> x1_candidates{model.X().lower(0), model.X().upper(0)};
  std::vector<double> p_candidates{model.P().lower(0), model.P().upper(0)};
  for (double p : p_candidates) {
    const double stationary = -params.a2 / (3.0 * p);
    if (stationary > model.X().lower(0) && stationary < model.X().upper(0)) {
      x1_candidates.push_back(stationary);
    }
  }
  double worst = 0.0;
  for (double x1 : x1_candidates) {
    for (double p : p_candidates) {
      worst = std::max(worst, std::abs(col(0) - chua_a11(params, x1, p)));
    }
  }
  const double rest = (col.tail(2) - ref.A.col(0).tail(2)).squaredNorm();
  const double L_bar = std::sqrt(worst * worst + rest);
  return GainCertificate::constant_phi(Phi, ref.C, P, eta, L_bar);
}

GainCertificate synthesize_gain_chua(const SystemModel& model, double eta) {
  VectorXd poles(3);
  poles << 0.8, 0.85, 0.9;
  return synthesize_gain_chua(model, eta, poles);
}

GainCertificate synthesize_constant_gain(const SystemModel& model, const MatrixXd& L0,
                                         double eta) {
  if (L0.rows() != model.n() || L0.cols() != model.p_out()) {
    throw UsageError("synthesize_constant_gain: L0 must be n×p_out");
  }
  if (!(eta > 0.0 && eta < 1.0)) throw UsageError("synthesize_constant_gain: eta must lie in (0,1)");
  const VectorXd x = model.X().clipped(1.0).lower;
  const VectorXd p = model.P().clipped(1.0).lower;
  const Jacobians jac =
      model.jacobians(x, VectorXd::Zero(model.m()), VectorXd::Zero(model.q()), p);
  const MatrixXd Phi = jac.A + L0 * jac.C;
  if (linalg::spectral_radius(Phi) / std::sqrt(eta) >= 1.0) {
    throw DerivationError("synthesize_constant_gain: spectral radius of Φ/√η is not below 1");
  }
  const MatrixXd P =
      linalg::solve_discrete_lyapunov(Phi, eta, MatrixXd::Identity(model.n(), model.n()));
  return GainCertificate::constant_gain(L0, P, eta, linalg::operator_norm(L0));
}

IossCertificate derive_ioss(const GainCertificate& gain, const SystemModel& model,
                            const NormBounds& nb, double epsilon_x) {
  if (!(epsilon_x > 0.0)) throw UsageError("derive_ioss: epsilon_x must be positive");
  IossCertificate c;
  c.P_U = gain.P;
  c.eta_x = (1.0 + epsilon_x) * gain.eta;
  if (c.eta_x >= 1.0) throw DerivationError("derive_ioss: (1+ε)η is not below 1");
  // Δx⁺ = ΦΔx + (B+LD)Δw + (E+LF)Δp − LΔy, then Young's and Jensen's inequalities.
  const double k = 3.0 * (1.0 + epsilon_x) / epsilon_x * linalg::max_eigenvalue(gain.P);
  const auto id = [](Eigen::Index d) { return MatrixXd::Identity(d, d); };
  const double bw = nb.B + nb.L * nb.D;
  const double bp = nb.E + nb.L * nb.F;
  c.Q_x = k * bw * bw * id(model.q());
  c.S_x = k * bp * bp * id(model.o());
  c.R_x = k * nb.L * nb.L * id(model.p_out());
  // Supply weights must be positive definite even when a bound vanishes.
  const double floor = 1e-12 * k;
  c.Q_x.diagonal().array() += floor * (bw == 0.0);
  c.S_x.diagonal().array() += floor * (bp == 0.0);
  c.R_x.diagonal().array() += floor * (nb.L == 0.0);
  return c;
}

PeCertificate derive_pe_weights(const GainCertificate& gain, const SystemModel& model,
                                const NormBounds& nb, double alpha, double mu,
                                double epsilon_split, double* gamma_out) {
  if (!(alpha > 0.0)) throw UsageError("derive_pe_weights: alpha must be positive");
  if (!(epsilon_split > 0.0)) throw UsageError("derive_pe_weights: epsilon must be positive");
  if (!(mu > 0.0 && mu < 1.0)) throw UsageError("derive_pe_weights: mu must lie in (0,1)");
  if (!(nb.C > 0.0)) throw DerivationError("derive_pe_weights: C̄ must be positive");
  const double slack = mu - (1.0 + epsilon_split) * gain.eta;
  if (!(slack > 0.0)) {
    throw DerivationError("derive_pe_weights: mu does not exceed (1+ε)η; no feasible γ");
  }
  const double lam_min = linalg::min_eigenvalue(gain.P);
  const double lam_max = linalg::max_eigenvalue(gain.P);
  const double gamma = slack * lam_min / (3.0 * nb.C * nb.C);
  if (gamma_out) *gamma_out = gamma;

  const double c_eps = 2.0 * (1.0 + epsilon_split) / epsilon_split;
  const double bw = nb.B + nb.L * nb.D;
  const auto id = [](Eigen::Index d) { return MatrixXd::Identity(d, d); };
  PeCertificate pe;
  pe.P_p = gain.P;
  pe.S_p = alpha * gamma * id(model.o());
  pe.eta_p = mu;
  pe.Q_p = (c_eps * lam_max * bw * bw + 3.0 * gamma * nb.D * nb.D) * id(model.q());
  pe.R_p = (c_eps * lam_max * nb.L * nb.L + 3.0 * gamma) * id(model.p_out());
  if (!(pe.Q_p.diagonal().minCoeff() > 0.0)) {
    pe.Q_p.diagonal().array() += 1e-12 * c_eps * lam_max;
  }
  return pe;
}

DeriveOptions default_derive_options(const std::string& model) {
  DeriveOptions o;
  if (model == "chua") return o;
  if (model == "scalar_affine") {
    o.eta = 0.25;
    o.L0 = MatrixXd::Constant(1, 1, -0.5);
    o.epsilon_x = 1.0;
    o.epsilon_pe = 0.2;
    o.mu = 0.6;
    o.alpha = 0.5;
    return o;
  }
  throw UsageError("no derivation defaults for model '" + model + "'");
}

CertificateSet derive_certificate_set(const SystemModel& model, const DeriveOptions& opts) {
  CertificateSet set;
  set.model = model.name();
  if (model.name() == "chua") {
    set.gain = opts.poles.size() ? synthesize_gain_chua(model, opts.eta, opts.poles)
                                 : synthesize_gain_chua(model, opts.eta);
  } else if (opts.L0.size() > 0) {
    set.gain = synthesize_constant_gain(model, opts.L0, opts.eta);
  } else {
    throw UsageError("derive_certificate_set: non-Chua models need a constant gain L0");
  }
  set.bounds = sample_norm_bounds(model, set.gain, opts.sampling, opts.norm_margin);
  set.bounds.L = std::max(set.bounds.L, set.gain.L_bar);
  set.gain.L_bar = set.bounds.L;
  set.ioss = derive_ioss(set.gain, model, set.bounds, opts.epsilon_x);
  double gamma = 0.0;
  set.pe = derive_pe_weights(set.gain, model, set.bounds, opts.alpha, opts.mu, opts.epsilon_pe,
                             &gamma);

  DerivationRecord& d = set.derivation;
  d.eta = opts.eta;
  if (model.name() == "chua") {
    d.poles = linalg::VectorXd(3);
    if (opts.poles.size()) d.poles = opts.poles;
    else d.poles << 0.8, 0.85, 0.9;
  }
  d.epsilon_x = opts.epsilon_x;
  d.epsilon_pe = opts.epsilon_pe;
  d.gamma = gamma;
  d.alpha = opts.alpha;
  d.mu = opts.mu;
  d.norm_margin = opts.norm_margin;
  d.w_half_width = opts.sampling.half_width;
  d.n_samples = opts.sampling.n_samples;
  d.seed = opts.sampling.seed;
  return set;
}

}  // namespace emhe
