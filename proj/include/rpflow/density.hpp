#pragma once
// Registered potential densities: uniform[a,b], a truncated Gaussian and a
// point mass. All are compactly supported; each exposes exact sampling via
// inverse CDF (fixed draw count per index) and its continuum Stieltjes
// transform for use as an exact reference.
#include <string>

#include "rpflow/mathx.hpp"
#include "rpflow/rng.hpp"

namespace rpflow {

struct DensitySpec {
  enum class Kind { uniform, trunc_gauss, point_mass };
  Kind kind = Kind::uniform;
  double a = -1.0, b = 1.0;      // support endpoints (uniform / trunc_gauss)
  double mu = 0.0, sigma = 1.0;  // trunc_gauss parameters
  double c = 0.0;                // point_mass location

  std::string id() const;          // canonical id string
  Interval support() const;
  double pdf(double x) const;
  double sample(const Stream& s, std::uint64_t i) const;

  // Continuum transform integral of pdf(v)/(v-z); closed form for uniform and
  // point mass, adaptive quadrature (tol 1e-10) for the truncated Gaussian.
  Cplx continuum_stieltjes(Cplx z) const;
  double mean_im_stieltjes(Cplx z) const { return continuum_stieltjes(z).imag(); }
};

// Parse ids like "uniform[-1,1]", "trunc-gauss[0,0.5,-1,1]", "point-mass[0]"
// (also accepts "point-mass-at-0"). Unknown ids raise ConfigError.
DensitySpec parse_density(const std::string& id);

}  // namespace rpflow
