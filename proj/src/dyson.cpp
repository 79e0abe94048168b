#include "rpflow/dyson.hpp"

#include <cmath>
#include <cstring>

namespace rpflow {

namespace {

// Canonical index of the upper-triangular entry (u,v), u <= v.
inline std::uint64_t entry_index(int u, int v, int N) {
  const std::uint64_t uu = std::uint64_t(u), nn = std::uint64_t(N);
  return uu * nn - uu * (uu - 1) / 2 + std::uint64_t(v - u);
}

}  // namespace

Stream DysonPath::interval_stream(int k) const {
  return Stream(derive(derive(seed, "dyson"), std::uint64_t(k)));
}

double DysonPath::increment(int k, int u, int v) const {
  if (u > v) std::swap(u, v);
  const double dt = time_grid[k + 1] - time_grid[k];
  return std::sqrt(dt) * interval_stream(k).gaussian(entry_index(u, v, params.N));
}

double DysonPath::bridge_noise(int k, int level, std::uint64_t pos, int u, int v) const {
  if (u > v) std::swap(u, v);
  const std::uint64_t node = (std::uint64_t(level) << 40) | pos;
  Stream s(derive(derive(derive(seed, "refine"), std::uint64_t(k)), node));
  return s.gaussian(entry_index(u, v, params.N));
}

double DysonPath::eigen_bridge_noise(int k, std::uint64_t time_key, int i) const {
  Stream s(derive(derive(derive(seed, "eigbridge"), std::uint64_t(k)), time_key));
  return s.gaussian(std::uint64_t(i));
}

DysonPath sample_dyson_path(const ModelParams& params, int grid_size, std::uint64_t seed) {
  params.validate();
  if (grid_size < 1) throw ConfigError("dyson path: grid_size must be >= 1");
  DysonPath p;
  p.params = params;
  p.seed = seed;
  const double T = params.T();
  p.time_grid.resize(std::size_t(grid_size) + 1);
  for (int k = 0; k <= grid_size; ++k)
    p.time_grid[std::size_t(k)] = T * double(k) / double(grid_size);
  return p;
}

HamiltonianSnapshot assemble_snapshot(const Potential& V, const DysonPath& path, int k) {
  if (k < 0 || k > path.M()) throw ConfigError("assemble_snapshot: grid index out of range");
  if (V.N() != path.params.N) throw ConfigError("assemble_snapshot: V/path size mismatch");
  SymmetricMarch march(V, path);
  for (int j = 0; j < k; ++j) march.advance();
  return march.snapshot();
}

SymmetricMarch::SymmetricMarch(const Potential& V, const DysonPath& path)
    : V_(&V), path_(&path) {
  const int N = path.params.N;
  B_ = Eigen::MatrixXd::Zero(N, N);
  next_.resize(0, 0);
}

void SymmetricMarch::advance() {
  if (k_ >= path_->M()) throw ConfigError("SymmetricMarch: advanced past final node");
  if (next_.size() != 0) {  // right node already realized for bridging
    B_ = std::move(next_);
    next_.resize(0, 0);
    ++k_;
    return;
  }
  const int N = path_->params.N;
  const double dt = path_->time_grid[std::size_t(k_) + 1] - path_->time_grid[std::size_t(k_)];
  const double sq = std::sqrt(dt);
  Stream s = path_->interval_stream(k_);
  for (int u = 0; u < N; ++u) {
    const std::uint64_t base = entry_index(u, u, N);
    for (int v = u; v < N; ++v) {
      const double d = sq * s.gaussian(base + std::uint64_t(v - u));
      B_(v, u) += d;  // lower triangle is authoritative
    }
  }
  ++k_;
  next_.resize(0, 0);
}

void SymmetricMarch::fill_snapshot(const Eigen::MatrixXd& B, double t,
                                   Eigen::MatrixXd& out) const {
  const int N = path_->params.N;
  const double off = std::sqrt(1.0 / double(N));
  const double diag = std::sqrt(2.0 / double(N));
  out.resize(N, N);
  for (int u = 0; u < N; ++u) {
    out(u, u) = V_->values[u] + diag * B(u, u);
    for (int v = u + 1; v < N; ++v) {
      const double x = off * B(v, u);
      out(v, u) = x;
      out(u, v) = x;
    }
  }
  (void)t;
}

HamiltonianSnapshot SymmetricMarch::snapshot() const {
  HamiltonianSnapshot h;
  h.t = path_->time_grid[std::size_t(k_)];
  fill_snapshot(B_, h.t, h.matrix);
  return h;
}

HamiltonianSnapshot SymmetricMarch::snapshot_refined(int level, std::uint64_t j) const {
  if (k_ >= path_->M()) throw ConfigError("snapshot_refined: no interval ahead");
  const int N = path_->params.N;
  const double t0 = path_->time_grid[std::size_t(k_)];
  const double t1 = path_->time_grid[std::size_t(k_) + 1];
  if (next_.size() == 0) {
    // realize B at the right node once per interval
    next_ = B_;
    const double sq = std::sqrt(t1 - t0);
    Stream s = path_->interval_stream(k_);
    for (int u = 0; u < N; ++u) {
      const std::uint64_t base = entry_index(u, u, N);
      for (int v = u; v < N; ++v)
        next_(v, u) += sq * s.gaussian(base + std::uint64_t(v - u));
    }
  }
  const std::uint64_t cells = 1ull << level;
  if (j > cells) throw ConfigError("snapshot_refined: offset out of range");
  HamiltonianSnapshot h;
  h.t = t0 + (t1 - t0) * double(j) / double(cells);
  if (j == 0) {
    fill_snapshot(B_, h.t, h.matrix);
    return h;
  }
  if (j == cells) {
    fill_snapshot(next_, h.t, h.matrix);
    return h;
  }
  // Binary descent of the bridge tree from (t0,B_) and (t1,next_) to the
  // dyadic point j/2^level; midpoint draws are keyed by (level,pos) so any
  // request order realizes the same path.
  Eigen::MatrixXd Ba = B_, Bb = next_;
  std::uint64_t lo = 0, hi = cells;
  int lvl = 1;
  while (hi - lo > 1) {
    const std::uint64_t mid = (lo + hi) / 2;
    const double frac = std::ldexp(double(1), -lvl);  // (hi-lo)/2 in units of cells
    const double half = (t1 - t0) * frac * 0.5;       // length of each half segment
    const std::uint64_t pos = lo >> (level - lvl + 1);
    Eigen::MatrixXd Bm = 0.5 * (Ba + Bb);
    const double sd = std::sqrt(half);  // bridge midpoint variance = segment/4
    for (int u = 0; u < N; ++u)
      for (int v = u; v < N; ++v)
        Bm(v, u) += sd * path_->bridge_noise(k_, lvl, pos, u, v);
    if (j <= mid) {
      Bb = std::move(Bm);
      hi = mid;
    } else {
      Ba = std::move(Bm);
      lo = mid;
    }
    if (j == lo || j == hi) {
      fill_snapshot(j == lo ? Ba : Bb, h.t, h.matrix);
      return h;
    }
    ++lvl;
  }
  throw NumericalError("snapshot_refined: dyadic descent failed to terminate");
}

}  // namespace rpflow
