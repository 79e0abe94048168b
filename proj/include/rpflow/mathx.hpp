#pragma once
// Small numeric helpers shared across modules: complex alias, quantiles,
// least-squares line fits, and the normal inverse CDF.
#include <complex>
#include <cstddef>
#include <stdexcept>
#include <vector>

namespace rpflow {

using Cplx = std::complex<double>;

struct Interval {
  double lo = 0.0, hi = 0.0;
  double width() const { return hi - lo; }
  bool contains(double x) const { return lo <= x && x <= hi; }
};

// Point in the open upper half-plane; construction checks im > 0.
struct UpperHalfPoint {
  double re = 0.0, im = 1.0;
  UpperHalfPoint() = default;
  UpperHalfPoint(double r, double i);
  UpperHalfPoint(Cplx z) : UpperHalfPoint(z.real(), z.imag()) {}
  operator Cplx() const { return {re, im}; }
};

struct LineFit {
  double slope = 0.0, intercept = 0.0, stderr_slope = 0.0;
};

// Ordinary least squares y ~ a + b x; needs >= 2 points.
LineFit fit_line(const std::vector<double>& x, const std::vector<double>& y);

// Quantile with linear interpolation between order statistics (copies input).
double quantile(std::vector<double> v, double q);
inline double median(std::vector<double> v) { return quantile(std::move(v), 0.5); }

// Inverse standard normal CDF (Wichura's PPND16); |error| < 1e-15 for
// p in (0,1).
double norminv(double p);

double normal_cdf(double x);

struct ConfigError : std::runtime_error {
  using std::runtime_error::runtime_error;
};
struct NumericalError : std::runtime_error {
  using std::runtime_error::runtime_error;
};
struct IoError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

}  // namespace rpflow
