#include "rpflow/density.hpp"

#include <cmath>
#include <functional>
#include <sstream>

namespace rpflow {

namespace {

// Adaptive Simpson for complex integrands.
Cplx simpson(const std::function<Cplx(double)>& f, double a, double b, Cplx fa, Cplx fb,
             Cplx fm, double tol, int depth) {
  const double m = 0.5 * (a + b);
  const double lm = 0.5 * (a + m), rm = 0.5 * (m + b);
  const Cplx flm = f(lm), frm = f(rm);
  const Cplx whole = (b - a) / 6.0 * (fa + 4.0 * fm + fb);
  const Cplx left = (m - a) / 6.0 * (fa + 4.0 * flm + fm);
  const Cplx right = (b - m) / 6.0 * (fm + 4.0 * frm + fb);
  const Cplx delta = left + right - whole;
  if (depth <= 0 || std::abs(delta) <= 15.0 * tol) return left + right + delta / 15.0;
  return simpson(f, a, m, fa, fm, flm, tol / 2.0, depth - 1) +
         simpson(f, m, b, fm, fb, frm, tol / 2.0, depth - 1);
}

Cplx integrate(const std::function<Cplx(double)>& f, double a, double b, double tol) {
  const Cplx fa = f(a), fb = f(b), fm = f(0.5 * (a + b));
  return simpson(f, a, b, fa, fb, fm, tol, 40);
}

std::vector<double> parse_args(const std::string& id, std::size_t lb) {
  const std::size_t rb = id.find(']', lb);
  if (rb == std::string::npos) throw ConfigError("density: missing ']' in '" + id + "'");
  std::vector<double> out;
  std::string inner = id.substr(lb + 1, rb - lb - 1);
  std::stringstream ss(inner);
  std::string tok;
  while (std::getline(ss, tok, ',')) {
    try {
      out.push_back(std::stod(tok));
    } catch (const std::exception&) {
      throw ConfigError("density: bad number '" + tok + "' in '" + id + "'");
    }
  }
  return out;
}

std::string fmt(double v) {
  std::ostringstream os;
  os << v;
  return os.str();
}

}  // namespace

std::string DensitySpec::id() const {
  switch (kind) {
    case Kind::uniform:
      return "uniform[" + fmt(a) + "," + fmt(b) + "]";
    case Kind::trunc_gauss:
      return "trunc-gauss[" + fmt(mu) + "," + fmt(sigma) + "," + fmt(a) + "," + fmt(b) + "]";
    case Kind::point_mass:
      return "point-mass[" + fmt(c) + "]";
  }
  return "?";
}

Interval DensitySpec::support() const {
  if (kind == Kind::point_mass) return {c, c};
  return {a, b};
}

double DensitySpec::pdf(double x) const {
  switch (kind) {
    case Kind::uniform:
      return (x >= a && x <= b) ? 1.0 / (b - a) : 0.0;
    case Kind::trunc_gauss: {
      if (x < a || x > b) return 0.0;
      const double za = (a - mu) / sigma, zb = (b - mu) / sigma;
      const double mass = normal_cdf(zb) - normal_cdf(za);
      const double u = (x - mu) / sigma;
      return std::exp(-0.5 * u * u) / (sigma * std::sqrt(2.0 * M_PI) * mass);
    }
    case Kind::point_mass:
      return 0.0;  // atomic; pdf undefined, reported as 0
  }
  return 0.0;
}

double DensitySpec::sample(const Stream& s, std::uint64_t i) const {
  switch (kind) {
    case Kind::uniform:
      return a + (b - a) * s.uniform01(i);
    case Kind::trunc_gauss: {
      const double Fa = normal_cdf((a - mu) / sigma), Fb = normal_cdf((b - mu) / sigma);
      const double u = Fa + (Fb - Fa) * s.uniform01(i);
      return mu + sigma * norminv(u);
    }
    case Kind::point_mass:
      return c;
  }
  return 0.0;
}

Cplx DensitySpec::continuum_stieltjes(Cplx z) const {
  switch (kind) {
    case Kind::uniform:
      // (1/(b-a)) log((b-z)/(a-z)), principal branch; Im z > 0 keeps the
      // argument off the cut.
      return std::log((b - z) / (a - z)) / (b - a);
    case Kind::trunc_gauss: {
      auto f = [&](double v) -> Cplx { return pdf(v) / (v - z); };
      return integrate(f, a, b, 1e-10);
    }
    case Kind::point_mass:
      return 1.0 / (c - z);
  }
  return {};
}

DensitySpec parse_density(const std::string& id) {
  DensitySpec d;
  if (id.rfind("uniform[", 0) == 0) {
    auto v = parse_args(id, 7);
    if (v.size() != 2 || !(v[0] < v[1]))
      throw ConfigError("density: uniform expects [a,b] with a < b, got '" + id + "'");
    d.kind = DensitySpec::Kind::uniform;
    d.a = v[0];
    d.b = v[1];
    return d;
  }
  if (id.rfind("trunc-gauss[", 0) == 0) {
    auto v = parse_args(id, 11);
    if (v.size() != 4 || !(v[2] < v[3]) || !(v[1] > 0))
      throw ConfigError("density: trunc-gauss expects [mu,sigma,a,b], sigma > 0, a < b");
    d.kind = DensitySpec::Kind::trunc_gauss;
    d.mu = v[0];
    d.sigma = v[1];
    d.a = v[2];
    d.b = v[3];
    return d;
  }
  if (id.rfind("point-mass[", 0) == 0) {
    auto v = parse_args(id, 10);
    if (v.size() != 1) throw ConfigError("density: point-mass expects [c]");
    d.kind = DensitySpec::Kind::point_mass;
    d.c = v[0];
    return d;
  }
  if (id.rfind("point-mass-at-", 0) == 0) {
    d.kind = DensitySpec::Kind::point_mass;
    try {
      d.c = std::stod(id.substr(14));
    } catch (const std::exception&) {
      throw ConfigError("density: bad point-mass id '" + id + "'");
    }
    return d;
  }
  throw ConfigError("density: unknown id '" + id +
                    "' (expected uniform[a,b], trunc-gauss[mu,sigma,a,b], point-mass[c])");
}

}  // namespace rpflow
