#pragma once
// Characteristic curves of the trace-transform flow: dxi/dt = -S_t(xi),
// stopped when Im xi reaches eta/2. One FlowLab couples a potential and a
// Dyson path realization with the S-evaluator (exact decompositions at path
// nodes; in between, either eigenvalue-bridge interpolation or fresh
// decompositions on a dyadic lattice), and serves trajectory integration,
// covering grids, flow-event statistics, preimages and subordination checks.
#include <map>
#include <memory>
#include <optional>
#include <vector>

#include "rpflow/spectral.hpp"

namespace rpflow {

struct FlowOptions {
  enum class Evaluator { interp, exact };
  Evaluator evaluator = Evaluator::interp;
  int base_divisions = 256;       // base step = T / base_divisions
  // Step-doubling local error control. Engages with the exact evaluator only:
  // the interpolated field is Brownian-rough in t, so there the doubling
  // estimate measures field noise rather than integrator error.
  bool adaptive = true;
  double step_tol = 1e-8;         // relative local error tolerance
  double stop_tol_factor = 1e-3;  // stopping tolerance = factor * eta
  double audit_fraction = 0.01;   // share of interp evals compared to exact
  int audit_budget = 2;           // cap on audited evals per lab
  int max_dyadic_level = 30;
};

struct TrajectorySample {
  double t = 0.0;
  Cplx xi;
  Cplx S;  // S_t(xi_t)
};

struct CharacteristicTrajectory {
  Cplx z0;
  std::vector<TrajectorySample> samples;  // accepted steps, t ascending
  bool stopped = false;
  double tau_estimate = -1.0;  // crossing time of Im xi = eta/2 when stopped
  // Quadratures along the curve, aligned with samples:
  std::vector<double> drift_integral;      // int_0^t Im S/(Im xi)^2 ds
  std::vector<double> inv_im_sq_integral;  // int_0^t (Im xi)^-2 ds
  std::vector<int> tracked_sites;
  std::vector<std::vector<Cplx>> G_along;  // [sample][site] local resolvents
};

struct GridSpec {
  double r = 0.0;        // mesh radius, min of the three configured scales
  double Upsilon = 0.0;  // sup |S_0| over {Im z > eta} plus 4/sqrt(N eta)
  double spacing = 0.0;  // lattice spacing sqrt(2) * r
  // Virtual square lattice covering {Im z > eta, dist(z, D) <= T/eta}:
  double re_lo = 0.0, re_hi = 0.0, im_lo = 0.0, im_hi = 0.0;
  double cardinality = 0.0;         // total lattice count (held as double)
  double covering_constant = 0.0;   // C with cardinality <= C (eta r)^-2
  std::string covered_region;
  std::vector<Cplx> points;         // materialized points (full or subsample)
  bool subsampled = false;
  std::uint64_t subsample_seed = 0;
};

struct GridOptions {
  double budget = 1e5;          // max points to materialize in full
  int subsample_size = 512;
  enum class Policy { uniform, ladder } policy = Policy::uniform;
  std::uint64_t subsample_seed = 1;
  bool allow_subsample = true;  // false: over-budget grids raise ConfigError
  Interval window{-0.25, 0.25};  // spectral window W the covered region fattens
};

struct FlowEvents {
  double a_s_statistic = 0.0;  // sup over grid points and time of |S_t(xi)-S_0(z)|
  double a_s_threshold = 0.0;  // 4 / (N eta)^beta
  bool a_s_occurred = false;
  double a_g_statistic = 0.0;  // sup over sites/grid/time of Im G ratio
  double a_g_threshold = 0.0;  // N^ell
  bool a_g_occurred = false;
  // diagnostics
  int n_points = 0;
  double max_inv_im_sq_integral = 0.0;  // max over points of int (Im xi)^-2
  int audit_count = 0;
  double audit_max_rel = 0.0;
};

struct PreimageResult {
  Cplx w;
  double residual = 0.0;  // |xi_T(w) - z| under the frozen step pattern
  int newton_iterations = 0;
};

struct SubordinationResult {
  Cplx z, w;
  std::vector<int> sites;
  std::vector<double> rel_errors;  // |G_T(x,z) - G_0(x,w)| / |G_0(x,w)|
};

class SEvaluator;  // internal

// One realization: (V, path) plus evaluator caches. Node eigenvalues are
// cached after first use; bridge refinements accumulate per interval so that
// every query sees a single consistent path. Not thread-safe; parallelize
// across realizations (one lab each), never within one.
class FlowLab {
 public:
  FlowLab(const Potential& V, DysonPath path, FlowOptions opt = {});
  ~FlowLab();

  const Potential& potential() const { return *V_; }
  const DysonPath& path() const { return path_; }
  const FlowOptions& options() const { return opt_; }
  double eta() const { return path_.params.eta(); }
  double total_time() const { return path_.total_time(); }

  // Spectral data of H_T (cached after first call).
  const SpectralData& terminal_spectral();

  SEvaluator& evaluator() { return *eval_; }
  int audit_count() const;
  double audit_max_rel() const;

 private:
  const Potential* V_;
  DysonPath path_;
  FlowOptions opt_;
  std::unique_ptr<SEvaluator> eval_;
  std::optional<SpectralData> terminal_;
};

// Integrate one curve from z0 (Im z0 > eta/2 required). RK4 with step
// h = min(base, eta/(4|S|), time to next node), optional step-doubling,
// stopping located by bisection on the cubic dense-output interpolant.
CharacteristicTrajectory integrate_characteristic(FlowLab& lab, UpperHalfPoint z0,
                                                  const std::vector<int>& track_sites = {});

// Upsilon probe then r = min{Upsilon T eta^2, N^(-2 theta) eta^3,
// N^(-(1+2 gamma)) eta^3}; virtual covering lattice with materialized
// points per GridOptions.
GridSpec build_grid(const ModelParams& params, const Potential& V, double theta,
                    double gamma, const GridOptions& gopt = {});

// Backward integration dzeta/ds = +S_{T-s}(zeta) from z, then Newton
// refinement of forward shots (variational derivative, frozen step pattern).
PreimageResult find_preimage_detailed(FlowLab& lab, UpperHalfPoint z);
UpperHalfPoint find_preimage(FlowLab& lab, UpperHalfPoint z);

// Flow-event statistics over the grid's materialized points. Empty `sites`
// tracks every site for the A_G ratio; G ratios are sampled at t=0, node
// times, every accepted step in the boundary layer Im xi < 4 eta, and tau.
// track_g=false skips the ratio statistic entirely (no eigenvector work).
FlowEvents track_flow_events(FlowLab& lab, const GridSpec& grid, double ell,
                             const std::vector<int>& sites, double beta = 0.5,
                             bool track_g = true);

// Per-site relative errors |G_T(x,z) - G_0(x,w)| / |G_0(x,w)| at
// w = find_preimage(z). Empty `sites` = all sites.
SubordinationResult subordination_check(FlowLab& lab, UpperHalfPoint z,
                                        const std::vector<int>& sites);

}  // namespace rpflow
