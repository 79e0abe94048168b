#include "rpflow/regularity.hpp"

#include <fftw3.h>

#include <algorithm>
#include <cmath>
#include <functional>
#include <limits>
#include <memory>

namespace rpflow {

namespace {

// ----------------------------------------------------------------------
// Lattice convolver: atoms binned onto a uniform x-grid shared with the
// evaluation columns, convolved with an even kernel by padded real FFTs.
// Because atoms and columns live on one grid, the padded transform is the
// exact linear convolution of the binned measure — nothing is truncated.
// Mutable scratch throughout; use from one thread only.
class LatticeConvolver {
 public:
  LatticeConvolver(double x0, double dx, int n) : x0_(x0), dx_(dx), n_(n) {
    if (!(dx > 0.0) || n < 2) throw ConfigError("lattice convolver: bad grid");
    nfft_ = 1;
    while (nfft_ < 2 * n_) nfft_ <<= 1;
    work_ = fftw_alloc_real(std::size_t(nfft_));
    spec_ = fftw_alloc_complex(std::size_t(nfft_ / 2 + 1));
    atomF_ = fftw_alloc_complex(std::size_t(nfft_ / 2 + 1));
    if (!work_ || !spec_ || !atomF_) throw NumericalError("lattice convolver: alloc failed");
    fwd_ = fftw_plan_dft_r2c_1d(nfft_, work_, spec_, FFTW_ESTIMATE);
    inv_ = fftw_plan_dft_c2r_1d(nfft_, spec_, work_, FFTW_ESTIMATE);
  }
  ~LatticeConvolver() {
    fftw_destroy_plan(fwd_);
    fftw_destroy_plan(inv_);
    fftw_free(work_);
    fftw_free(spec_);
    fftw_free(atomF_);
  }
  LatticeConvolver(const LatticeConvolver&) = delete;
  LatticeConvolver& operator=(const LatticeConvolver&) = delete;

  double x(int m) const { return x0_ + m * dx_; }
  double dx() const { return dx_; }
  int n() const { return n_; }
  // first/last+1 lattice column covering [lo, hi]
  int col_lo(double lo) const {
    return std::clamp(int(std::floor((lo - x0_) / dx_)), 0, n_ - 1);
  }
  int col_hi(double hi) const {
    return std::clamp(int(std::ceil((hi - x0_) / dx_)) + 1, 1, n_);
  }

  void load_atoms(const Eigen::VectorXd& atoms) {
    std::fill(work_, work_ + nfft_, 0.0);
    const double w = 1.0 / double(atoms.size());
    for (Eigen::Index i = 0; i < atoms.size(); ++i) {
      int b = int(std::llround((atoms[i] - x0_) / dx_));
      b = std::clamp(b, 0, n_ - 1);
      work_[b] += w;
    }
    fftw_execute(fwd_);
    std::copy(&spec_[0][0], &spec_[0][0] + 2 * (nfft_ / 2 + 1), &atomF_[0][0]);
  }

  // Real spectrum of the even kernel k(|offset|), reusable across atom loads.
  std::vector<double> kernel_spectrum(const std::function<double(double)>& k) {
    std::fill(work_, work_ + nfft_, 0.0);
    work_[0] = k(0.0);
    for (int j = 1; j < n_; ++j) {
      const double v = k(double(j) * dx_);
      work_[j] += v;
      work_[nfft_ - j] += v;
    }
    fftw_execute(fwd_);
    std::vector<double> out(std::size_t(nfft_ / 2 + 1));
    for (std::size_t j = 0; j < out.size(); ++j) out[j] = spec_[j][0];
    return out;
  }

  // Convolve the loaded atoms with a cached kernel spectrum; writes the n_
  // lattice values into out.
  void row(const std::vector<double>& ks, double* out) {
    const int half = nfft_ / 2 + 1;
    for (int j = 0; j < half; ++j) {
      spec_[j][0] = atomF_[j][0] * ks[std::size_t(j)];
      spec_[j][1] = atomF_[j][1] * ks[std::size_t(j)];
    }
    fftw_execute(inv_);
    const double s = 1.0 / double(nfft_);
    for (int m = 0; m < n_; ++m) out[m] = work_[m] * s;
  }

 private:
  double x0_, dx_;
  int n_, nfft_;
  double* work_;
  fftw_complex* spec_;
  fftw_complex* atomF_;
  fftw_plan fwd_, inv_;
};

std::vector<double> geometric_rows(double lo, double hi, double ratio) {
  std::vector<double> ys;
  for (double y = lo; y < hi * (1.0 - 1e-12); y *= ratio) ys.push_back(y);
  ys.push_back(hi);
  return ys;
}

}  // namespace

// ----------------------------------------------------------------------

double probe_sup_abs_s0(const Potential& V, double eta, Interval support,
                        const RegularityOptions& opt) {
  if (!(eta > 0.0)) throw ConfigError("probe_sup_abs_s0: eta must be positive");
  // Termwise, 1/|u - (x + iy)| decreases in y, so
  //   sup_{Im z >= eta} |S_0(z)| <= sup_x (1/N) sum_i 1/|V_i - (x + i eta)|
  // and the bottom row alone certifies the sup. The x-Lipschitz constant of
  // that row is at most 1/eta^2 per atom, so spacing dx adds slack dx/(2 eta^2).
  const double margin = opt.box_margin;
  const double dx = 0.4 * opt.slack_budget * eta * eta;  // slack = 0.2*budget
  const double lo = std::min(support.lo, V.sorted[0]) - margin;
  const double hi = std::max(support.hi, V.sorted[V.N() - 1]) + margin;
  const int n = int(std::ceil((hi - lo) / dx)) + 1;
  LatticeConvolver conv(lo, dx, n);
  conv.load_atoms(V.values);
  const auto ks =
      conv.kernel_spectrum([eta](double d) { return 1.0 / std::hypot(d, eta); });
  std::vector<double> buf(static_cast<std::size_t>(n));
  conv.row(ks, buf.data());
  const double sup_lattice = *std::max_element(buf.begin(), buf.end());
  const double slack = 0.5 * dx / (eta * eta);
  // beyond the probed box every atom is at least `margin` away
  return std::max(sup_lattice + slack, 1.0 / margin);
}

double log_bound_fit(const Potential& V, const ModelParams& params,
                     const RegularityOptions& opt) {
  const double eta = params.eta();
  const Interval supp{V.sorted[0], V.sorted[V.N() - 1]};
  const double sup = probe_sup_abs_s0(V, eta, supp, opt);
  return sup / (1.0 + std::log(1.0 + 1.0 / (eta * eta)));
}

RegularityVerdict verify_assumption(const Potential& V, const ModelParams& params,
                                    Interval W, double epsilon,
                                    const RegularityOptions& opt) {
  params.validate();
  if (!(epsilon > 0.0)) throw ConfigError("verify_assumption: epsilon must be positive");
  const double eta = params.eta();

  RegularityVerdict verdict;
  const Interval supp{V.sorted[0], V.sorted[V.N() - 1]};
  verdict.sup_abs_s0 = probe_sup_abs_s0(V, eta, supp, opt);
  verdict.slack_sup = 0.2 * opt.slack_budget;
  verdict.K_m_fit = verdict.sup_abs_s0 / (1.0 + std::log(1.0 + 1.0 / (eta * eta)));
  verdict.passes_km = verdict.K_m_fit <= opt.km_max;

  // inf Im S_0 over the epsilon-fattened window rectangle, Im in [eta, 1+eps].
  // Rows are geometric with ratio rho; the termwise sandwich
  //   Im S(x + iy) >= (y_j / y_{j+1}) Im S(x + i y_j),  y in [y_j, y_{j+1}]
  // certifies the strip between rows up to the factor 1/rho (reported as
  // slack, not subtracted: K_l_fit is the plain lattice inf).
  const double rho = 1.05;
  const double dx = 0.4 * opt.slack_budget * eta * eta;
  const double wlo = W.lo - epsilon, whi = W.hi + epsilon;
  const double lo = std::min(supp.lo, wlo) - opt.box_margin;
  const double hi = std::max(supp.hi, whi) + opt.box_margin;
  const int n = int(std::ceil((hi - lo) / dx)) + 1;
  LatticeConvolver conv(lo, dx, n);
  conv.load_atoms(V.values);
  verdict.bottom_spacing = dx;

  const int c0 = conv.col_lo(wlo), c1 = conv.col_hi(whi);
  std::vector<double> buf(static_cast<std::size_t>(n));
  double inf = std::numeric_limits<double>::infinity();
  for (double y : geometric_rows(eta, 1.0 + epsilon, rho)) {
    const auto ks = conv.kernel_spectrum(
        [y](double d) { return y / (d * d + y * y); });
    conv.row(ks, buf.data());
    for (int m = c0; m < c1; ++m) inf = std::min(inf, buf[m]);
  }
  verdict.K_l_fit = inf;
  verdict.slack_inf = inf * (1.0 - 1.0 / rho) + 0.5 * dx / (eta * eta) * 0.65;
  verdict.passes_kl = verdict.K_l_fit >= opt.kl_min;
  return verdict;
}

// ----------------------------------------------------------------------

namespace {

// One realization's sup_{lattice} |Im S_0 - E Im S_0| over D(J, zeta).
double sup_deviation(LatticeConvolver& conv, const Eigen::VectorXd& atoms,
                     const std::vector<std::vector<double>>& kernels,
                     const std::vector<std::vector<double>>& expected, int c0, int c1,
                     std::vector<double>& buf) {
  conv.load_atoms(atoms);
  double sup = 0.0;
  for (std::size_t j = 0; j < kernels.size(); ++j) {
    conv.row(kernels[j], buf.data());
    const std::vector<double>& e = expected[j];
    for (int m = c0; m < c1; ++m) {
      const double dev = std::abs(buf[std::size_t(m)] - e[std::size_t(m - c0)]);
      if (dev > sup) sup = dev;
    }
  }
  return sup;
}

struct ConcentrationLattice {
  std::unique_ptr<LatticeConvolver> conv;
  std::vector<double> rows;
  std::vector<std::vector<double>> kernels;   // per row, cached spectra
  std::vector<std::vector<double>> expected;  // per row, exact E Im S_0
  int c0 = 0, c1 = 0;
};

ConcentrationLattice make_lattice(const DensitySpec& density, Interval J, double zeta,
                                  double spacing, double row_ratio) {
  ConcentrationLattice lat;
  const Interval supp = density.support();
  const double lo = std::min(supp.lo, J.lo) - spacing;
  const double hi = std::max(supp.hi, J.hi) + spacing;
  const int n = int(std::ceil((hi - lo) / spacing)) + 1;
  lat.conv = std::make_unique<LatticeConvolver>(lo, spacing, n);
  lat.rows = geometric_rows(zeta, 1.0, row_ratio);
  lat.c0 = lat.conv->col_lo(J.lo);
  lat.c1 = lat.conv->col_hi(J.hi);
  for (double y : lat.rows) {
    lat.kernels.push_back(lat.conv->kernel_spectrum(
        [y](double d) { return y / (d * d + y * y); }));
    std::vector<double> e(std::size_t(lat.c1 - lat.c0));
    for (int m = lat.c0; m < lat.c1; ++m)
      e[std::size_t(m - lat.c0)] = density.mean_im_stieltjes({lat.conv->x(m), y});
    lat.expected.push_back(std::move(e));
  }
  return lat;
}

}  // namespace

ConcentrationEstimate concentration_experiment(const DensitySpec& density,
                                               const ModelParams& params, Interval J,
                                               double zeta, std::vector<double> mu_grid,
                                               int ensemble, std::uint64_t seed) {
  params.validate();
  if (!(zeta > 0.0 && zeta <= 1.0))
    throw ConfigError("concentration: zeta must lie in (0, 1]");
  if (mu_grid.empty()) throw ConfigError("concentration: empty mu grid");
  std::sort(mu_grid.begin(), mu_grid.end());
  if (!(mu_grid.front() > 0.0))
    throw ConfigError("concentration: thresholds must be positive");
  if (ensemble < 1) throw ConfigError("concentration: ensemble must be >= 1");

  ConcentrationEstimate ce;
  ce.J = J;
  ce.zeta = zeta;
  ce.mu_grid = mu_grid;
  ce.ensemble = ensemble;
  ce.seed = seed;
  ce.lattice_spacing = mu_grid.front() * zeta * zeta / 12.0;

  ConcentrationLattice lat = make_lattice(density, J, zeta, ce.lattice_spacing, 1.25);
  ce.lattice_rows = double(lat.rows.size());
  ce.lattice_cols = double(lat.c1 - lat.c0);

  std::vector<double> buf(static_cast<std::size_t>(lat.conv->n()));
  std::vector<double> sups;
  sups.reserve(std::size_t(ensemble));
  const std::uint64_t family = derive(seed, "concentration");
  for (int r = 0; r < ensemble; ++r) {
    const Potential V = sample_potential(params, density, derive(family, std::uint64_t(r)));
    sups.push_back(
        sup_deviation(*lat.conv, V.values, lat.kernels, lat.expected, lat.c0, lat.c1, buf));
  }
  ce.mean_sup = 0.0;
  for (double s : sups) ce.mean_sup += s;
  ce.mean_sup /= double(ensemble);
  ce.tail_prob.resize(mu_grid.size());
  for (std::size_t q = 0; q < mu_grid.size(); ++q) {
    int count = 0;
    for (double s : sups)
      if (s > mu_grid[q]) ++count;
    ce.tail_prob[q] = double(count) / double(ensemble);
  }
  return ce;
}

std::pair<double, double> covering_soundness_probe(const DensitySpec& density,
                                                   const ModelParams& params, Interval J,
                                                   double zeta, double mu,
                                                   std::uint64_t seed) {
  params.validate();
  if (!(mu > 0.0)) throw ConfigError("covering probe: mu must be positive");
  const double a = mu * zeta * zeta / 12.0;
  const Potential V =
      sample_potential(params, density, derive(derive(seed, "concentration"), 0));

  auto run = [&](double spacing, double ratio) {
    ConcentrationLattice lat = make_lattice(density, J, zeta, spacing, ratio);
    std::vector<double> buf(static_cast<std::size_t>(lat.conv->n()));
    return sup_deviation(*lat.conv, V.values, lat.kernels, lat.expected, lat.c0, lat.c1,
                         buf);
  };
  const double coarse = run(a, 1.25);
  const double fine = run(0.5 * a, std::sqrt(1.25));
  return {coarse, fine};
}

}  // namespace rpflow
