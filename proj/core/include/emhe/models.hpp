#pragma once

#include <string>

#include "emhe/model.hpp"

namespace emhe {

/// Euler-discretized modified Chua circuit with additive process noise w1..w3
/// and measurement noise w4. The cubic coefficient a3 is the unknown parameter.
struct ChuaParams {
  double t_delta = 0.01;
  double b1 = 12.8;
  double b2 = 19.1;
  double a1 = 0.6;
  double a2 = -1.1;
  double a3 = 0.45;
};

/// X = [-1,3]×[-1,1]×[-3,3], P = [0.2,0.8], W unbounded, m = 0.
SystemModel make_chua_model(const ChuaParams& params = {});

/// ∂f1/∂x1 of the Chua map, the only state-dependent entry of A.
double chua_a11(const ChuaParams& params, double x1, double p);

/// x⁺ = A x + Bu u + B w + E p, y = C x + Du u + D w + F p.
/// Bu/Du may be empty when m = 0.
struct AffineParams {
  MatrixXd A, Bu, B, E, C, Du, D, F;
  VectorXd f0;  // constant drift, optional
  VectorXd h0;  // constant output offset, optional
};

SystemModel make_affine_model(const AffineParams& params, Box X, Box U, Box W, Box P,
                              std::string name = "affine");

/// Scalar benchmark x⁺ = a·x + p + w, y = x, with everything unbounded.
SystemModel make_scalar_affine_model(double a = 0.5);

/// Builds a shipped model by name ("chua", "scalar_affine").
SystemModel make_model_by_name(const std::string& name);

}  // namespace emhe
