#pragma once
// Model parameters: matrix size N and the two scale exponents. The time
// horizon T = N^(delta-1) and the spectral scale eta = N^(alpha-1) are
// derived, never stored, so they cannot drift out of sync.
#include <cmath>

#include "rpflow/mathx.hpp"

namespace rpflow {

struct ModelParams {
  int N = 1000;
  double delta = 0.5;  // T = N^(delta-1)
  double alpha = 0.3;  // eta = N^(alpha-1)

  double T() const { return std::pow(double(N), delta - 1.0); }
  double eta() const { return std::pow(double(N), alpha - 1.0); }

  void validate() const {
    if (N < 2) throw ConfigError("ModelParams: N must be >= 2");
    if (!(delta > 0.0 && delta < 1.0)) throw ConfigError("ModelParams: delta must lie in (0,1)");
    if (!(alpha > 0.0 && alpha < 1.0)) throw ConfigError("ModelParams: alpha must lie in (0,1)");
  }
};

// Exponents of the localization/flow statistics. Defaults follow the
// delta-centered choices documented in the README; validation enforces the
// ordering kappa > delta > theta required by the localization statements.
struct Exponents {
  double kappa = 0.0;  // support-set half-width N^(kappa-1); 0 = delta+0.2
  double theta = 0.0;  // sup-norm threshold N^(-theta);     0 = delta-0.15
  double gamma = 0.05;
  double ell = 0.25;   // local-resolvent growth threshold N^ell
  double beta = 0.5;   // fluctuation threshold 4/(N eta)^beta

  Exponents resolved(double delta) const {
    Exponents e = *this;
    if (e.kappa == 0.0) e.kappa = delta + 0.2;
    if (e.theta == 0.0) e.theta = delta - 0.15;
    return e;
  }
};

}  // namespace rpflow
