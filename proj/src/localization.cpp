#include "rpflow/localization.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

namespace rpflow {

namespace {

// Sort permutation of the potential values (ascending).
std::vector<int> sort_perm(const Eigen::VectorXd& v) {
  std::vector<int> perm(std::size_t(v.size()));
  std::iota(perm.begin(), perm.end(), 0);
  std::sort(perm.begin(), perm.end(), [&](int a, int b) { return v[a] < v[b]; });
  return perm;
}

// Positions [lo, hi) of the permuted values inside [lambda - rad, lambda + rad].
std::pair<int, int> window_range(const Eigen::VectorXd& values,
                                 const std::vector<int>& perm, double lambda,
                                 double rad) {
  auto cmp_lo = [&](int idx, double x) { return values[idx] < x; };
  auto cmp_hi = [&](double x, int idx) { return x < values[idx]; };
  const auto lo = std::lower_bound(perm.begin(), perm.end(), lambda - rad, cmp_lo);
  const auto hi = std::upper_bound(perm.begin(), perm.end(), lambda + rad, cmp_hi);
  return {int(lo - perm.begin()), int(hi - perm.begin())};
}

}  // namespace

std::vector<int> support_set(const Potential& V, double lambda, double kappa,
                             const ModelParams& params) {
  params.validate();
  const double rad = std::pow(double(params.N), kappa - 1.0);
  const std::vector<int> perm = sort_perm(V.values);
  const auto [lo, hi] = window_range(V.values, perm, lambda, rad);
  std::vector<int> out(perm.begin() + lo, perm.begin() + hi);
  std::sort(out.begin(), out.end());
  return out;
}

std::vector<LocalizationReport> localization_report(const SpectralData& spec,
                                                    const Potential& V, Interval window,
                                                    const Exponents& exponents,
                                                    const ModelParams& params,
                                                    bool* warning) {
  params.validate();
  const Exponents e = exponents.resolved(params.delta);
  const double rad = std::pow(double(params.N), e.kappa - 1.0);
  const std::vector<int> perm = sort_perm(V.values);

  std::vector<LocalizationReport> out;
  const int n = int(spec.eigenvalues.size());
  for (int i = 0; i < n; ++i) {
    const double lambda = spec.eigenvalues[i];
    if (!window.contains(lambda)) continue;
    const auto [lo, hi] = window_range(V.values, perm, lambda, rad);
    const auto psi = spec.eigenvectors.col(i);
    double mass_in = 0.0;
    for (int p = lo; p < hi; ++p) {
      const double c = psi[perm[std::size_t(p)]];
      mass_in += c * c;
    }
    LocalizationReport rep;
    rep.lambda = lambda;
    rep.x_size = hi - lo;
    rep.mass_outside = std::max(0.0, 1.0 - mass_in);
    rep.sup_norm_sq = psi.cwiseAbs2().maxCoeff();
    rep.ipr = psi.array().square().square().sum();
    rep.kappa = e.kappa;
    rep.theta = e.theta;
    rep.gamma = e.gamma;
    out.push_back(rep);
  }
  if (warning) *warning = out.empty();
  return out;
}

Interval central_fraction(Interval w, double fraction) {
  if (!(fraction > 0.0 && fraction <= 1.0))
    throw ConfigError("central_fraction: fraction must lie in (0, 1]");
  const double mid = 0.5 * (w.lo + w.hi);
  const double half = 0.5 * w.width() * fraction;
  return {mid - half, mid + half};
}

ScalingTable scaling_table(const std::vector<SweepRow>& rows) {
  ScalingTable table;
  table.rows = rows;
  std::sort(table.rows.begin(), table.rows.end(),
            [](const SweepRow& a, const SweepRow& b) { return a.N < b.N; });
  int distinct = 0;
  for (std::size_t i = 0; i < table.rows.size(); ++i)
    if (i == 0 || table.rows[i].N != table.rows[i - 1].N) ++distinct;
  if (distinct < 3)
    throw ConfigError("scaling_table: need at least 3 distinct matrix sizes");

  auto fit = [&](auto field) -> LineFit {
    std::vector<double> x, y;
    for (const auto& r : table.rows) {
      const double v = field(r);
      if (!(v > 0.0)) return LineFit{std::nan(""), std::nan(""), std::nan("")};
      x.push_back(std::log(double(r.N)));
      y.push_back(std::log(v));
    }
    return fit_line(x, y);
  };
  table.ipr_fit = fit([](const SweepRow& r) { return r.median_ipr; });
  table.sup_fit = fit([](const SweepRow& r) { return r.median_sup_norm_sq; });
  table.mass_fit = fit([](const SweepRow& r) { return r.median_mass_outside; });
  return table;
}

}  // namespace rpflow
