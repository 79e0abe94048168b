#pragma once
// The matrix Brownian motion Phi_t. A path stores no entries: every Gaussian
// increment over a grid interval, and every Brownian-bridge refinement inside
// an interval, is a pure function of (seed, interval, dyadic node, entry), so
// snapshots are materialized on demand (O(N^2) per live snapshot) and finer
// times can be realized consistently in any request order.
#include <Eigen/Dense>
#include <cstdint>
#include <vector>

#include "rpflow/params.hpp"
#include "rpflow/potential.hpp"
#include "rpflow/rng.hpp"

namespace rpflow {

struct DysonPath {
  ModelParams params;
  std::uint64_t seed = 0;
  std::vector<double> time_grid;  // t_0 = 0 < t_1 < ... < t_M = T (uniform)

  int M() const { return static_cast<int>(time_grid.size()) - 1; }
  double total_time() const { return time_grid.back(); }

  // Increment of B_uv over [t_k, t_{k+1}] for u <= v; variance t_{k+1}-t_k.
  double increment(int k, int u, int v) const;
  // Standard-normal midpoint refinement noise for the dyadic bridge tree of
  // interval k: level >= 1, pos in [0, 2^(level-1)), one value per entry.
  double bridge_noise(int k, int level, std::uint64_t pos, int u, int v) const;
  // Same stream family, indexed per eigenvalue: used by the interpolating
  // trace evaluator's scalar bridges.
  double eigen_bridge_noise(int k, std::uint64_t time_key, int i) const;

  Stream interval_stream(int k) const;
};

struct HamiltonianSnapshot {
  double t = 0.0;
  Eigen::MatrixXd matrix;  // symmetric, stored fully
};

// Uniform grid with M intervals over [0, N^(delta-1)].
DysonPath sample_dyson_path(const ModelParams& params, int grid_size, std::uint64_t seed);

// H_{t_k} = diag(V) + Phi_{t_k}. Cost O(k N^2): sums the increments.
// Ensemble loops should use SymmetricMarch, which draws each increment once.
HamiltonianSnapshot assemble_snapshot(const Potential& V, const DysonPath& path, int k);

// Marching accumulator for B(t_k); advance draws one interval of increments.
class SymmetricMarch {
 public:
  SymmetricMarch(const Potential& V, const DysonPath& path);
  void advance();               // to the next grid node
  int node() const { return k_; }
  const Eigen::MatrixXd& B() const { return B_; }
  // diag(V) + scaled B at the current node.
  HamiltonianSnapshot snapshot() const;
  // diag(V) + scaled (B + bridge) at dyadic time t inside [t_k, t_{k+1}]:
  // t = t_k + (j / 2^level) * dt. Refinement noise comes from the shared
  // dyadic tree, so overlapping requests see one consistent path.
  HamiltonianSnapshot snapshot_refined(int level, std::uint64_t j) const;

 private:
  const Potential* V_;
  const DysonPath* path_;
  Eigen::MatrixXd B_;          // B at node k
  mutable Eigen::MatrixXd next_;  // B at node k+1, realized lazily for bridging
  int k_ = 0;
  void fill_snapshot(const Eigen::MatrixXd& B, double t, Eigen::MatrixXd& out) const;
  friend class ExactEvaluator;
};

}  // namespace rpflow
