#pragma once
// Potential regularity probes: fitted constants for the log-bound on |S_0|
// and the lower bound on Im S_0 over a fattened spectral domain, plus the
// Monte-Carlo concentration experiment for sup |Im S_0 - E Im S_0| over
// D(J, zeta) = { Re z in J, zeta <= Im z <= 1 }.
#include <vector>

#include "rpflow/potential.hpp"

namespace rpflow {

struct RegularityOptions {
  double slack_budget = 0.25;  // row spacing a_j <= slack_budget * y_j^2
  double km_max = 5.0;         // pass thresholds for the boolean verdicts
  double kl_min = 0.25;
  double box_margin = 0.5;     // Re margin beyond the support for the sup probe
};

struct RegularityVerdict {
  double K_m_fit = 0.0;  // smallest K with sup_{Im z >= eta} |S_0| <= K log N
  double K_l_fit = 0.0;  // inf Im S_0 over the eps-fattened domain, Im >= eta
  bool passes_km = false, passes_kl = false;
  double sup_abs_s0 = 0.0;     // probed sup |S_0| including Lipschitz slack
  double bottom_spacing = 0.0; // lattice spacing on the Im = eta row
  double slack_sup = 0.0, slack_inf = 0.0;  // Lipschitz slack applied
};

RegularityVerdict verify_assumption(const Potential& V, const ModelParams& params,
                                    Interval W, double epsilon,
                                    const RegularityOptions& opt = {});

// sup |S_0| over {Im z >= eta} (bottom-row dominated probe), slack included;
// feeds the grid scale Upsilon.
double probe_sup_abs_s0(const Potential& V, double eta, Interval support,
                        const RegularityOptions& opt = {});

// Fitted K in |S_0| <= K (1 + log(1 + eta^-2)) at the probe sup.
double log_bound_fit(const Potential& V, const ModelParams& params,
                     const RegularityOptions& opt = {});

struct ConcentrationEstimate {
  Interval J;
  double zeta = 0.0;
  std::vector<double> mu_grid;
  std::vector<double> tail_prob;  // P(sup |Im S_0 - E Im S_0| > mu) per mu
  int ensemble = 0;
  std::uint64_t seed = 0;
  double lattice_spacing = 0.0;   // mu_min * zeta^2 / 12
  double lattice_rows = 0.0, lattice_cols = 0.0;
  double mean_sup = 0.0;          // ensemble mean of the sup deviation
};

// Ensemble tail probabilities of the sup deviation over a lattice of spacing
// mu_min zeta^2/12 (geometric rows in Im; atoms binned onto the lattice and
// convolved with the Poisson kernel by FFT; the binning displacement stays
// inside the covering slack). E Im S_0 is the exact continuum reference.
ConcentrationEstimate concentration_experiment(const DensitySpec& density,
                                               const ModelParams& params, Interval J,
                                               double zeta, std::vector<double> mu_grid,
                                               int ensemble, std::uint64_t seed);

// Double the lattice resolution of the sup estimator for one sample and
// return (coarse sup, fine sup): the covering-soundness probe.
std::pair<double, double> covering_soundness_probe(const DensitySpec& density,
                                                   const ModelParams& params, Interval J,
                                                   double zeta, double mu,
                                                   std::uint64_t seed);

}  // namespace rpflow
