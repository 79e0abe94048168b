#pragma once
// The diagonal potential V: an N-vector, either a deterministic list or
// i.i.d. draws from a registered density. Keeps a sorted copy for windowed
// counts and support-set queries.
#include <Eigen/Dense>
#include <string>

#include "rpflow/density.hpp"
#include "rpflow/params.hpp"

namespace rpflow {

struct Potential {
  Eigen::VectorXd values;
  std::string provenance;      // "deterministic-list" or the density id
  std::uint64_t seed = 0;      // 0 for deterministic lists
  Eigen::VectorXd sorted;      // ascending copy of values

  int N() const { return static_cast<int>(values.size()); }
};

Potential make_potential(Eigen::VectorXd values);
Potential sample_potential(const ModelParams& params, const DensitySpec& density,
                           std::uint64_t seed);

// S_0(z) = (1/N) sum_x 1/(V_x - z), exact finite sum; Im z > 0 required.
Cplx stieltjes_potential(const Potential& V, UpperHalfPoint z);

}  // namespace rpflow
