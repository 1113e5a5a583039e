#include <gtest/gtest.h>

#include <algorithm>
#include <filesystem>

#include "emhe/certificate_io.hpp"
#include "emhe/certificates.hpp"
#include "emhe/errors.hpp"
#include "emhe/linalg.hpp"
#include "test_support.hpp"

using namespace emhe;
using namespace emhe::testing;

namespace {

// f = 0.5x + w, h = x; no parameter.
SystemModel contraction_toy() {
  AffineParams ap;
  ap.A = MatrixXd::Constant(1, 1, 0.5);
  ap.B = MatrixXd::Identity(1, 1);
  ap.E = MatrixXd::Zero(1, 0);
  ap.C = MatrixXd::Identity(1, 1);
  ap.D = MatrixXd::Zero(1, 1);
  ap.F = MatrixXd::Zero(1, 0);
  return make_affine_model(ap, Box::unbounded(1), Box::unbounded(0), Box::unbounded(1),
                           Box::unbounded(0), "toy");
}

IossCertificate toy_ioss(double eta_x) {
  IossCertificate c;
  c.P_U = MatrixXd::Identity(1, 1);
  c.eta_x = eta_x;
  c.S_x = MatrixXd::Identity(0, 0);
  c.Q_x = MatrixXd::Constant(1, 1, 2.0);
  c.R_x = MatrixXd::Constant(1, 1, 0.1);
  return c;
}

bool same(const MatrixXd& a, const MatrixXd& b) {
  return a.rows() == b.rows() && a.cols() == b.cols() && a == b;
}

}  // namespace

TEST(Ioss, ToyYoungSplitPasses) {
  SamplingOptions o;
  o.n_samples = 5000;
  const ValidationResult r = validate_ioss(toy_ioss(0.5), contraction_toy(), o);
  EXPECT_TRUE(r.pass);
  EXPECT_LE(r.worst_violation, 0.0);
  EXPECT_EQ(r.samples, 5000u);
}

TEST(Ioss, ToyTooSmallRateFails) {
  SamplingOptions o;
  o.n_samples = 5000;
  const ValidationResult r = validate_ioss(toy_ioss(0.2), contraction_toy(), o);
  EXPECT_FALSE(r.pass);
  EXPECT_GT(r.worst_violation, 1e-9);
}

TEST(Certificates, ShippedChuaPassValidation) {
  const SystemModel m = make_chua_model();
  const CertificateSet c = shipped_certificates("chua");
  SamplingOptions o;
  o.half_width = c.derivation.w_half_width;
  EXPECT_TRUE(validate_ioss(c.ioss, m, o).pass);
  EXPECT_TRUE(validate_gain(c.gain, m, o).pass);
  EXPECT_TRUE(gain_has_constant_phi(c.gain, m, o));
}

TEST(Certificates, ShippedFixturesAreReproducible) {
  for (const std::string name : {"chua", "scalar_affine"}) {
    const CertificateSet shipped = shipped_certificates(name);
    const CertificateSet fresh =
        derive_certificate_set(make_model_by_name(name), default_derive_options(name));
    EXPECT_EQ(certificates_to_json(fresh), certificates_to_json(shipped)) << name;
  }
}

TEST(GainSynthesis, ChuaLyapunovAndPoles) {
  const SystemModel m = make_chua_model();
  const GainCertificate g = synthesize_gain_chua(m, 0.85);
  const MatrixXd& phi = g.target_phi;
  const MatrixXd lhs = linalg::symmetrize(phi.transpose() * g.P * phi - 0.85 * g.P);
  EXPECT_LE(linalg::max_eigenvalue(lhs), 1e-10);
  Eigen::EigenSolver<MatrixXd> es(phi);
  std::vector<double> ev;
  for (int i = 0; i < 3; ++i) {
    EXPECT_NEAR(es.eigenvalues()(i).imag(), 0.0, 1e-8);
    ev.push_back(es.eigenvalues()(i).real());
  }
  std::sort(ev.begin(), ev.end());
  EXPECT_NEAR(ev[0], 0.8, 1e-8);
  EXPECT_NEAR(ev[1], 0.85, 1e-8);
  EXPECT_NEAR(ev[2], 0.9, 1e-8);
}

TEST(GainSynthesis, InfeasibleRateThrows) {
  const SystemModel m = make_chua_model();
  VectorXd poles(3);
  poles << 0.8, 0.85, 0.95;
  EXPECT_THROW(synthesize_gain_chua(m, 0.85, poles), DerivationError);
}

TEST(GainSynthesis, GainNormBoundHoldsOnSamples) {
  const SystemModel m = make_chua_model();
  const CertificateSet c = shipped_certificates("chua");
  UniformSource rng(21);
  for (int i = 0; i < 1000; ++i) {
    const ZPoint z = sample_z(m, rng, 1.0);
    const Jacobians j = m.jacobians(z.x, z.u, z.w, z.p);
    EXPECT_LE(linalg::operator_norm(c.gain.gain(j)), c.gain.L_bar);
  }
}

TEST(PeWeights, FeasibilityArithmetic) {
  const SystemModel m = make_scalar_affine_model();
  const GainCertificate g = synthesize_constant_gain(m, MatrixXd::Constant(1, 1, -0.5), 0.5);
  NormBounds b{1.0, 1.0, 0.0, 1.0, 0.0, 0.5};
  double gamma = 0.0;
  const PeCertificate pe = derive_pe_weights(g, m, b, 0.1, 0.99, 0.2, &gamma);
  const double lam_min = linalg::min_eigenvalue(g.P);
  EXPECT_NEAR(gamma * 3.0 * b.C * b.C / lam_min, 0.99 - 0.6, 1e-12);
  EXPECT_EQ(pe.eta_p, 0.99);
  EXPECT_NEAR(pe.S_p(0, 0), 0.1 * gamma, 1e-15);
}

TEST(Fixture, RoundTripIsExact) {
  const CertificateSet c = shipped_certificates("chua");
  const CertificateSet back = certificates_from_json(certificates_to_json(c));
  EXPECT_TRUE(same(back.ioss.P_U, c.ioss.P_U));
  EXPECT_TRUE(same(back.ioss.Q_x, c.ioss.Q_x));
  EXPECT_TRUE(same(back.pe.S_p, c.pe.S_p));
  EXPECT_TRUE(same(back.gain.target_phi, c.gain.target_phi));
  EXPECT_EQ(back.gain.L_bar, c.gain.L_bar);
  EXPECT_EQ(back.ioss.eta_x, c.ioss.eta_x);
  EXPECT_EQ(certificates_to_json(back), certificates_to_json(c));
}

TEST(Fixture, RejectsBadDocuments) {
  EXPECT_THROW(certificates_from_json("not json"), IoError);
  EXPECT_THROW(certificates_from_json("{}"), IoError);
  std::string text = certificates_to_json(shipped_certificates("scalar_affine"));
  const auto pos = text.find("\"version\": 1");
  ASSERT_NE(pos, std::string::npos);
  text.replace(pos, 12, "\"version\": 7");
  EXPECT_THROW(certificates_from_json(text), IoError);
  EXPECT_THROW(load_certificates("/nonexistent/emhe/fixture.json"), IoError);
}

TEST(Fixture, SaveAndLoad) {
  const auto path = std::filesystem::temp_directory_path() / "emhe_fixture_roundtrip.json";
  const CertificateSet c = shipped_certificates("scalar_affine");
  save_certificates(c, path.string());
  EXPECT_EQ(certificates_to_json(load_certificates(path.string())), certificates_to_json(c));
  std::filesystem::remove(path);
}
