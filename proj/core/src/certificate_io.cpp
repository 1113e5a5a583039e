#include "emhe/certificate_io.hpp"

#include <cstdlib>
#include <fstream>
#include <sstream>

#include "emhe/errors.hpp"
#include "json_util.hpp"

namespace emhe {

using nlohmann::json;

namespace {

constexpr const char* kFormatName = "emhe-certificates";

json vector_json(const VectorXd& v) {
  json a = json::array();
  for (Eigen::Index i = 0; i < v.size(); ++i) a.push_back(v(i));
  return a;
}

}  // namespace

std::string certificates_to_json(const CertificateSet& s) {
  json j;
  j["format"] = kFormatName;
  j["version"] = s.version;
  j["model"] = s.model;
  j["ioss"] = {{"P_U", detail::matrix_to_json(s.ioss.P_U)},
               {"S_x", detail::matrix_to_json(s.ioss.S_x)},
               {"Q_x", detail::matrix_to_json(s.ioss.Q_x)},
               {"R_x", detail::matrix_to_json(s.ioss.R_x)},
               {"eta_x", s.ioss.eta_x}};
  j["pe"] = {{"P_p", detail::matrix_to_json(s.pe.P_p)},
             {"S_p", detail::matrix_to_json(s.pe.S_p)},
             {"Q_p", detail::matrix_to_json(s.pe.Q_p)},
             {"R_p", detail::matrix_to_json(s.pe.R_p)},
             {"eta_p", s.pe.eta_p}};
  json g;
  g["kind"] = to_string(s.gain.kind);
  if (s.gain.kind == GainCertificate::Kind::constant_phi) {
    g["Phi"] = detail::matrix_to_json(s.gain.target_phi);
    g["C_pinv"] = detail::matrix_to_json(s.gain.c_pinv);
  } else {
    g["L"] = detail::matrix_to_json(s.gain.L0);
  }
  g["P"] = detail::matrix_to_json(s.gain.P);
  g["eta"] = s.gain.eta;
  g["L_bar"] = s.gain.L_bar;
  j["gain"] = g;
  j["bounds"] = {{"B", s.bounds.B}, {"C", s.bounds.C}, {"D", s.bounds.D},
                 {"E", s.bounds.E}, {"F", s.bounds.F}, {"L", s.bounds.L}};
  const DerivationRecord& d = s.derivation;
  j["derivation"] = {{"eta", d.eta},
                     {"poles", vector_json(d.poles)},
                     {"epsilon_x", d.epsilon_x},
                     {"epsilon_pe", d.epsilon_pe},
                     {"gamma", d.gamma},
                     {"alpha", d.alpha},
                     {"mu", d.mu},
                     {"norm_margin", d.norm_margin},
                     {"w_half_width", d.w_half_width},
                     {"n_samples", d.n_samples},
                     {"seed", d.seed}};
  return j.dump(2) + "\n";
}

CertificateSet certificates_from_json(const std::string& text) {
  json j;
  try {
    j = json::parse(text);
  } catch (const json::exception& e) {
    throw IoError(std::string("certificate fixture is not valid JSON: ") + e.what());
  }
  try {
    if (j.value("format", std::string()) != kFormatName) {
      throw IoError("certificate fixture: missing or unknown 'format' field");
    }
    CertificateSet s;
    s.version = j.at("version").get<int>();
    if (s.version != kCertificateFormatVersion) {
      throw IoError("certificate fixture: unsupported version " + std::to_string(s.version));
    }
    s.model = j.at("model").get<std::string>();
    const json& io = j.at("ioss");
    s.ioss.P_U = detail::matrix_from_json(io.at("P_U"));
    s.ioss.S_x = detail::matrix_from_json(io.at("S_x"));
    s.ioss.Q_x = detail::matrix_from_json(io.at("Q_x"));
    s.ioss.R_x = detail::matrix_from_json(io.at("R_x"));
    s.ioss.eta_x = io.at("eta_x").get<double>();
    const json& pe = j.at("pe");
    s.pe.P_p = detail::matrix_from_json(pe.at("P_p"));
    s.pe.S_p = detail::matrix_from_json(pe.at("S_p"));
    s.pe.Q_p = detail::matrix_from_json(pe.at("Q_p"));
    s.pe.R_p = detail::matrix_from_json(pe.at("R_p"));
    s.pe.eta_p = pe.at("eta_p").get<double>();
    const json& g = j.at("gain");
    const std::string kind = g.at("kind").get<std::string>();
    if (kind == "constant_phi") {
      s.gain.kind = GainCertificate::Kind::constant_phi;
      s.gain.target_phi = detail::matrix_from_json(g.at("Phi"));
      s.gain.c_pinv = detail::matrix_from_json(g.at("C_pinv"));
    } else if (kind == "constant_l") {
      s.gain.kind = GainCertificate::Kind::constant_l;
      s.gain.L0 = detail::matrix_from_json(g.at("L"));
    } else {
      throw IoError("certificate fixture: unknown gain kind '" + kind + "'");
    }
    s.gain.P = detail::matrix_from_json(g.at("P"));
    s.gain.eta = g.at("eta").get<double>();
    s.gain.L_bar = g.at("L_bar").get<double>();
    const json& b = j.at("bounds");
    s.bounds = NormBounds{b.at("B").get<double>(), b.at("C").get<double>(),
                          b.at("D").get<double>(), b.at("E").get<double>(),
                          b.at("F").get<double>(), b.at("L").get<double>()};
    if (j.contains("derivation")) {
      const json& d = j.at("derivation");
      DerivationRecord& r = s.derivation;
      r.eta = d.value("eta", 0.0);
      const std::vector<double> poles = d.value("poles", std::vector<double>{});
      r.poles = Eigen::Map<const VectorXd>(poles.data(), static_cast<Eigen::Index>(poles.size()));
      r.epsilon_x = d.value("epsilon_x", 0.0);
      r.epsilon_pe = d.value("epsilon_pe", 0.0);
      r.gamma = d.value("gamma", 0.0);
      r.alpha = d.value("alpha", 0.0);
      r.mu = d.value("mu", 0.0);
      r.norm_margin = d.value("norm_margin", 0.0);
      r.w_half_width = d.value("w_half_width", 1.0);
      r.n_samples = d.value("n_samples", std::size_t{0});
      r.seed = d.value("seed", std::uint64_t{0});
    }
    return s;
  } catch (const json::exception& e) {
    throw IoError(std::string("certificate fixture is malformed: ") + e.what());
  }
}

CertificateSet load_certificates(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open certificate fixture '" + path + "'");
  std::ostringstream buf;
  buf << in.rdbuf();
  return certificates_from_json(buf.str());
}

void save_certificates(const CertificateSet& set, const std::string& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot write certificate fixture '" + path + "'");
  out << certificates_to_json(set);
  if (!out) throw IoError("failed writing certificate fixture '" + path + "'");
}

std::string default_data_dir() {
  if (const char* env = std::getenv("EMHE_DATA_DIR"); env && *env) return env;
  return EMHE_DEFAULT_DATA_DIR;
}

}  // namespace emhe
