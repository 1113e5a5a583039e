#pragma once

#include <string>

#include "emhe/certificates.hpp"

namespace emhe {

/// Fixture format version written by save_certificates.
inline constexpr int kCertificateFormatVersion = 1;

/// JSON document; matrices are {"rows", "cols", "data"} with data in row-major order.
std::string certificates_to_json(const CertificateSet& set);
CertificateSet certificates_from_json(const std::string& text);

/// Throws IoError on unreadable/unwritable paths, malformed documents or an
/// unsupported version.
CertificateSet load_certificates(const std::string& path);
void save_certificates(const CertificateSet& set, const std::string& path);

/// Directory of the shipped fixtures (EMHE_DATA_DIR overrides the build default).
std::string default_data_dir();

}  // namespace emhe
