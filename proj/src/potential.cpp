#include "rpflow/potential.hpp"

#include <algorithm>
#include <cmath>

namespace rpflow {

Potential make_potential(Eigen::VectorXd values) {
  Potential p;
  p.values = std::move(values);
  p.provenance = "deterministic-list";
  p.sorted = p.values;
  std::sort(p.sorted.data(), p.sorted.data() + p.sorted.size());
  for (int i = 0; i < p.values.size(); ++i)
    if (!std::isfinite(p.values[i])) throw ConfigError("potential: non-finite entry");
  return p;
}

Potential sample_potential(const ModelParams& params, const DensitySpec& density,
                           std::uint64_t seed) {
  params.validate();
  Stream s(derive(seed, "potential"));
  Eigen::VectorXd v(params.N);
  for (int i = 0; i < params.N; ++i) v[i] = density.sample(s, std::uint64_t(i));
  Potential p = make_potential(std::move(v));
  p.provenance = density.id();
  p.seed = seed;
  return p;
}

Cplx stieltjes_potential(const Potential& V, UpperHalfPoint z) {
  const Cplx zz = z;
  Cplx acc = 0.0;
  const double* v = V.values.data();
  const int n = V.N();
  for (int i = 0; i < n; ++i) acc += 1.0 / (v[i] - zz);
  return acc / double(n);
}

}  // namespace rpflow
