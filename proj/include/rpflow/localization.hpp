#pragma once
// Eigenfunction localization statistics: the support set X_lambda of sites
// whose potential lies within N^(kappa-1) of an eigenvalue, the mass carried
// outside it, sup-norms and inverse participation ratios.
#include <vector>

#include "rpflow/spectral.hpp"

namespace rpflow {

struct LocalizationReport {
  double lambda = 0.0;
  int x_size = 0;             // |X_lambda|
  double mass_outside = 0.0;  // sum over X_lambda^c of psi^2
  double sup_norm_sq = 0.0;   // max_x psi(x)^2
  double ipr = 0.0;           // sum_x psi(x)^4
  double kappa = 0.0, theta = 0.0, gamma = 0.0;
};

// X_lambda = { x : |lambda - V_x| <= N^(kappa-1) }, by binary search on the
// sorted potential; returned indices refer to the original ordering.
std::vector<int> support_set(const Potential& V, double lambda, double kappa,
                             const ModelParams& params);

// One report per eigenvalue of `spec` inside `window`. `warning` (optional)
// is set when the window is empty of eigenvalues.
std::vector<LocalizationReport> localization_report(const SpectralData& spec,
                                                    const Potential& V, Interval window,
                                                    const Exponents& exponents,
                                                    const ModelParams& params,
                                                    bool* warning = nullptr);

// Shrink a window to its central fraction (bulk filter for aggregates).
Interval central_fraction(Interval w, double fraction);

struct SweepRow {
  int N = 0;
  double delta = 0.0;
  double median_ipr = 0.0, median_sup_norm_sq = 0.0, median_mass_outside = 0.0;
  int n_vectors = 0;
};

struct ScalingTable {
  std::vector<SweepRow> rows;
  LineFit ipr_fit, sup_fit, mass_fit;  // log-log slopes against N
};

// Aggregate per-N medians and fit log-log slopes; needs >= 3 distinct N.
ScalingTable scaling_table(const std::vector<SweepRow>& rows);

}  // namespace rpflow
