// Experiment drivers: dispatch a validated config onto the simulation stack,
// fan realizations over an index-ordered worker pool, reduce results in
// realization order (so output bytes are schedule-independent) and leave CSV
// tables plus manifest.json behind. Report mode aggregates finished run
// directories into summary tables and SVG figures.
#include "rpflow/experiments.hpp"

#include <algorithm>
#include <array>
#include <atomic>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <limits>
#include <map>
#include <set>
#include <thread>
#include <utility>

#include "json.hpp"
#include "rpflow/csv.hpp"
#include "rpflow/flow.hpp"
#include "rpflow/localization.hpp"
#include "rpflow/regularity.hpp"
#include "rpflow/svg.hpp"

namespace rpflow {

const char* kVersion = "1.0.0";

namespace {

namespace fs = std::filesystem;
using Clock = std::chrono::steady_clock;

// ---- small utilities -------------------------------------------------------

double lap(Clock::time_point& t0) {
  const auto t1 = Clock::now();
  const double s = std::chrono::duration<double>(t1 - t0).count();
  t0 = t1;
  return s;
}

void make_dirs(const std::string& dir) {
  std::error_code ec;
  fs::create_directories(dir, ec);
  if (ec) throw IoError("cannot create directory " + dir + ": " + ec.message());
}

std::string join_path(const std::string& dir, const std::string& name) {
  if (dir.empty()) return name;
  return dir.back() == '/' ? dir + name : dir + "/" + name;
}

void require_valid(const ExperimentConfig& c) {
  const auto errs = validate(c);
  if (errs.empty()) return;
  std::string msg = "config errors:";
  for (const auto& e : errs) msg += "\n  - " + e;
  throw ConfigError(msg);
}

// Index-ordered pool: workers pull the next realization index; results land
// in preallocated slots, so the later reduction is deterministic.
template <typename Fn>
void parallel_for(int threads, int n, Fn&& body) {
  threads = std::max(1, std::min(threads, n));
  if (threads <= 1) {
    for (int i = 0; i < n; ++i) body(i);
    return;
  }
  std::atomic<int> next{0};
  std::vector<std::thread> pool;
  pool.reserve(static_cast<std::size_t>(threads));
  for (int t = 0; t < threads; ++t)
    pool.emplace_back([&] {
      for (int i = next.fetch_add(1); i < n; i = next.fetch_add(1)) body(i);
    });
  for (auto& th : pool) th.join();
}

std::uint64_t run_seed(const ExperimentConfig& c, int index) {
  return realization_seed(c.master_seed, "realization", index);
}

double med_or_nan(std::vector<double> v) {
  if (v.empty()) return std::numeric_limits<double>::quiet_NaN();
  return median(std::move(v));
}

double quant_or_nan(std::vector<double> v, double q) {
  if (v.empty()) return std::numeric_limits<double>::quiet_NaN();
  return quantile(std::move(v), q);
}

std::string fmt(const char* f, double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, f, v);
  return buf;
}

void record_failure(RunOutcome& out, std::ostream& log, int index, const std::string& what) {
  ++out.failed;
  out.manifest.failures.push_back("realization " + std::to_string(index) + ": " + what);
  log << "  realization " << index << " failed: " << what << "\n";
}

// ---- localization / scaling sweep ------------------------------------------

struct LocRow {
  int run_id = 0, N = 0, x_size = 0;
  double delta = 0, kappa = 0, theta = 0, lambda = 0;
  double mass_outside = 0, sup_norm_sq = 0, ipr = 0;
};

struct LocSlot {
  std::vector<LocRow> rows;
  bool window_empty = false;
  std::string error;
};

const std::vector<std::string> kLocalizationCols = {
    "run_id", "N",      "delta",        "kappa",       "theta",
    "lambda", "X_size", "mass_outside", "sup_norm_sq", "ipr"};

// One draw of (V, H_T) and its per-eigenvector report. The path uses a single
// interval: only the endpoint matters here, and Phi_T in one Gaussian
// increment has the same law as any refinement of it.
LocSlot localization_realization(const ExperimentConfig& c, const ModelParams& mp, int run_id) {
  LocSlot out;
  try {
    const std::uint64_t rs = run_seed(c, run_id);
    const Potential V = sample_potential(mp, c.density, derive(rs, "potential"));
    const DysonPath path = sample_dyson_path(mp, 1, derive(rs, "path"));
    const SpectralData spec = eigendecompose(assemble_snapshot(V, path, 1));
    bool warn = false;
    const auto reps = localization_report(spec, V, c.window, c.exponents, mp, &warn);
    out.window_empty = warn;
    out.rows.reserve(reps.size());
    for (const auto& rep : reps) {
      LocRow row;
      row.run_id = run_id;
      row.N = mp.N;
      row.delta = mp.delta;
      row.kappa = rep.kappa;
      row.theta = rep.theta;
      row.lambda = rep.lambda;
      row.x_size = rep.x_size;
      row.mass_outside = rep.mass_outside;
      row.sup_norm_sq = rep.sup_norm_sq;
      row.ipr = rep.ipr;
      out.rows.push_back(row);
    }
  } catch (const std::exception& e) {
    out.error = e.what();
  }
  return out;
}

void write_loc_rows(CsvWriter& csv, const std::vector<LocRow>& rows) {
  for (const auto& r : rows) {
    csv.cell(r.run_id)
        .cell(r.N)
        .cell(r.delta)
        .cell(r.kappa)
        .cell(r.theta)
        .cell(r.lambda)
        .cell(r.x_size)
        .cell(r.mass_outside)
        .cell(r.sup_norm_sq)
        .cell(r.ipr);
    csv.end_row();
  }
}

RunOutcome run_localization(const ExperimentConfig& c, const std::string& dir, int threads,
                            std::ostream& log) {
  RunOutcome out;
  out.manifest.config_hash = c.hash();
  out.manifest.version = kVersion;
  auto t0 = Clock::now();

  const int n = c.ensemble;
  std::vector<LocSlot> slots(static_cast<std::size_t>(n));
  for (int r = 0; r < n; ++r) out.manifest.realization_seeds.push_back(run_seed(c, r));
  parallel_for(threads, n, [&](int r) {
    slots[static_cast<std::size_t>(r)] = localization_realization(c, c.model, r);
  });
  out.manifest.phase_seconds.emplace_back("realizations", lap(t0));

  CsvWriter csv(join_path(dir, "localization.csv"), kLocalizationCols);
  const Interval bulk = central_fraction(c.window, c.bulk_fraction);
  const Exponents ex = c.exponents.resolved(c.model.delta);
  const double sup_thresh = std::pow(double(c.model.N), -ex.theta);
  std::vector<double> mass, sup, ipr;
  int n_vectors = 0, n_bulk = 0, below = 0, empty_windows = 0;
  for (int r = 0; r < n; ++r) {
    const auto& s = slots[static_cast<std::size_t>(r)];
    if (!s.error.empty()) {
      record_failure(out, log, r, s.error);
      continue;
    }
    ++out.completed;
    if (s.window_empty) ++empty_windows;
    write_loc_rows(csv, s.rows);
    n_vectors += static_cast<int>(s.rows.size());
    for (const auto& row : s.rows) {
      if (!bulk.contains(row.lambda)) continue;
      ++n_bulk;
      mass.push_back(row.mass_outside);
      sup.push_back(row.sup_norm_sq);
      ipr.push_back(row.ipr);
      if (row.sup_norm_sq <= sup_thresh) ++below;
    }
  }
  csv.close();
  out.manifest.outputs.push_back("localization.csv");

  CsvWriter sum(join_path(dir, "localization_summary.csv"),
                {"N", "delta", "kappa", "theta", "n_vectors", "n_bulk", "median_mass_outside",
                 "median_sup_norm_sq", "median_ipr", "frac_sup_norm_below", "sup_norm_threshold"});
  sum.cell(c.model.N)
      .cell(c.model.delta)
      .cell(ex.kappa)
      .cell(ex.theta)
      .cell(n_vectors)
      .cell(n_bulk)
      .cell(med_or_nan(mass))
      .cell(med_or_nan(sup))
      .cell(med_or_nan(ipr))
      .cell(n_bulk ? double(below) / n_bulk : std::numeric_limits<double>::quiet_NaN())
      .cell(sup_thresh);
  sum.end_row();
  sum.close();
  out.manifest.outputs.push_back("localization_summary.csv");
  out.manifest.phase_seconds.emplace_back("aggregate", lap(t0));
  if (empty_windows)
    log << "  warning: " << empty_windows << " realization(s) had no eigenvalue in the window\n";
  return out;
}

RunOutcome run_sweep(const ExperimentConfig& c, const std::string& dir, int threads,
                     std::ostream& log) {
  RunOutcome out;
  out.manifest.config_hash = c.hash();
  out.manifest.version = kVersion;
  auto t0 = Clock::now();

  const int n_sizes = static_cast<int>(c.sweep_N.size());
  const int jobs = n_sizes * c.ensemble;
  std::vector<LocSlot> slots(static_cast<std::size_t>(jobs));
  for (int j = 0; j < jobs; ++j) out.manifest.realization_seeds.push_back(run_seed(c, j));
  parallel_for(threads, jobs, [&](int j) {
    ModelParams mp = c.model;
    mp.N = c.sweep_N[static_cast<std::size_t>(j / c.ensemble)];
    slots[static_cast<std::size_t>(j)] = localization_realization(c, mp, j);
  });
  out.manifest.phase_seconds.emplace_back("realizations", lap(t0));

  CsvWriter csv(join_path(dir, "localization.csv"), kLocalizationCols);
  const Interval bulk = central_fraction(c.window, c.bulk_fraction);
  std::vector<SweepRow> rows;
  for (int ni = 0; ni < n_sizes; ++ni) {
    std::vector<double> mass, sup, ipr;
    for (int r = 0; r < c.ensemble; ++r) {
      const int j = ni * c.ensemble + r;
      const auto& s = slots[static_cast<std::size_t>(j)];
      if (!s.error.empty()) {
        record_failure(out, log, j, s.error);
        continue;
      }
      ++out.completed;
      write_loc_rows(csv, s.rows);
      for (const auto& row : s.rows) {
        if (!bulk.contains(row.lambda)) continue;
        mass.push_back(row.mass_outside);
        sup.push_back(row.sup_norm_sq);
        ipr.push_back(row.ipr);
      }
    }
    SweepRow sr;
    sr.N = c.sweep_N[static_cast<std::size_t>(ni)];
    sr.delta = c.model.delta;
    sr.median_ipr = med_or_nan(ipr);
    sr.median_sup_norm_sq = med_or_nan(sup);
    sr.median_mass_outside = med_or_nan(mass);
    sr.n_vectors = static_cast<int>(ipr.size());
    rows.push_back(sr);
  }
  csv.close();
  out.manifest.outputs.push_back("localization.csv");

  const ScalingTable table = scaling_table(rows);
  CsvWriter sum(join_path(dir, "sweep_summary.csv"),
                {"N", "delta", "n_bulk", "median_ipr", "median_sup_norm_sq",
                 "median_mass_outside"});
  for (const auto& sr : table.rows) {
    sum.cell(sr.N)
        .cell(sr.delta)
        .cell(sr.n_vectors)
        .cell(sr.median_ipr)
        .cell(sr.median_sup_norm_sq)
        .cell(sr.median_mass_outside);
    sum.end_row();
  }
  sum.close();
  out.manifest.outputs.push_back("sweep_summary.csv");

  CsvWriter fits(join_path(dir, "sweep_fits.csv"),
                 {"quantity", "slope", "intercept", "stderr_slope"});
  const std::pair<const char*, const LineFit*> named[] = {
      {"ipr", &table.ipr_fit},
      {"sup_norm_sq", &table.sup_fit},
      {"mass_outside", &table.mass_fit}};
  for (const auto& [name, fit] : named) {
    fits.cell(std::string(name)).cell(fit->slope).cell(fit->intercept).cell(fit->stderr_slope);
    fits.end_row();
  }
  fits.close();
  out.manifest.outputs.push_back("sweep_fits.csv");
  out.manifest.phase_seconds.emplace_back("aggregate", lap(t0));
  log << "  sweep fits: ipr slope " << fmt("%.4f", table.ipr_fit.slope) << ", sup slope "
      << fmt("%.4f", table.sup_fit.slope) << ", mass slope "
      << fmt("%.4f", table.mass_fit.slope) << "\n";
  return out;
}

// ---- flow events -------------------------------------------------------------

struct FlowSlot {
  std::string error;
  FlowEvents ev;
  double upsilon = 0, r = 0, spacing = 0, cardinality = 0, covering = 0;
  int n_points = 0, subsampled = 0;
  std::vector<CharacteristicTrajectory> dumps;
};

FlowSlot flow_realization(const ExperimentConfig& c, int run_id) {
  FlowSlot out;
  try {
    const ModelParams mp = c.model;
    const Exponents ex = c.exponents.resolved(mp.delta);
    const std::uint64_t rs = run_seed(c, run_id);
    const Potential V = sample_potential(mp, c.density, derive(rs, "potential"));
    DysonPath path = sample_dyson_path(mp, c.grid_size, derive(rs, "path"));
    FlowLab lab(V, std::move(path), c.flow);
    GridOptions gopt;
    gopt.budget = c.grid_budget;
    gopt.subsample_size = c.subsample_size;
    gopt.policy = c.subsample_policy;
    gopt.subsample_seed = derive(rs, "grid");
    gopt.window = c.window;
    const GridSpec grid = build_grid(mp, lab.potential(), ex.theta, ex.gamma, gopt);
    out.ev = track_flow_events(lab, grid, ex.ell, c.sites, ex.beta, c.track_g);
    out.upsilon = grid.Upsilon;
    out.r = grid.r;
    out.spacing = grid.spacing;
    out.cardinality = grid.cardinality;
    out.covering = grid.covering_constant;
    out.n_points = static_cast<int>(grid.points.size());
    out.subsampled = grid.subsampled ? 1 : 0;
    if (run_id < c.dump_trajectories && !grid.points.empty()) {
      const int take = std::min<int>(8, static_cast<int>(grid.points.size()));
      for (int q = 0; q < take; ++q) {
        const std::size_t idx =
            take == 1 ? 0 : std::size_t(q) * (grid.points.size() - 1) / std::size_t(take - 1);
        out.dumps.push_back(integrate_characteristic(lab, grid.points[idx]));
      }
    }
  } catch (const std::exception& e) {
    out.error = e.what();
  }
  return out;
}

RunOutcome run_flow_events(const ExperimentConfig& c, const std::string& dir, int threads,
                           std::ostream& log) {
  RunOutcome out;
  out.manifest.config_hash = c.hash();
  out.manifest.version = kVersion;
  auto t0 = Clock::now();

  const int n = c.ensemble;
  std::vector<FlowSlot> slots(static_cast<std::size_t>(n));
  for (int r = 0; r < n; ++r) out.manifest.realization_seeds.push_back(run_seed(c, r));
  parallel_for(threads, n, [&](int r) { slots[static_cast<std::size_t>(r)] = flow_realization(c, r); });
  out.manifest.phase_seconds.emplace_back("realizations", lap(t0));

  CsvWriter ev(join_path(dir, "events.csv"),
               {"run_id", "statistic_name", "value", "threshold", "occurred"});
  CsvWriter gs(join_path(dir, "grid_summary.csv"),
               {"run_id", "r", "upsilon", "spacing", "cardinality", "covering_constant",
                "n_points", "subsampled", "max_inv_im_sq_integral", "audit_count",
                "audit_max_rel"});
  std::vector<double> as_vals, ag_vals;
  double as_thresh_min = std::numeric_limits<double>::infinity();
  double ag_thresh_min = std::numeric_limits<double>::infinity();
  int as_hits = 0, ag_hits = 0;
  for (int r = 0; r < n; ++r) {
    const auto& s = slots[static_cast<std::size_t>(r)];
    if (!s.error.empty()) {
      record_failure(out, log, r, s.error);
      continue;
    }
    ++out.completed;
    ev.cell(r)
        .cell(std::string("A_S"))
        .cell(s.ev.a_s_statistic)
        .cell(s.ev.a_s_threshold)
        .cell(static_cast<int>(s.ev.a_s_occurred));
    ev.end_row();
    as_vals.push_back(s.ev.a_s_statistic);
    as_thresh_min = std::min(as_thresh_min, s.ev.a_s_threshold);
    as_hits += s.ev.a_s_occurred ? 1 : 0;
    if (c.track_g) {
      ev.cell(r)
          .cell(std::string("A_G"))
          .cell(s.ev.a_g_statistic)
          .cell(s.ev.a_g_threshold)
          .cell(static_cast<int>(s.ev.a_g_occurred));
      ev.end_row();
      ag_vals.push_back(s.ev.a_g_statistic);
      ag_thresh_min = std::min(ag_thresh_min, s.ev.a_g_threshold);
      ag_hits += s.ev.a_g_occurred ? 1 : 0;
    }
    gs.cell(r)
        .cell(s.r)
        .cell(s.upsilon)
        .cell(s.spacing)
        .cell(s.cardinality)
        .cell(s.covering)
        .cell(s.n_points)
        .cell(s.subsampled)
        .cell(s.ev.max_inv_im_sq_integral)
        .cell(s.ev.audit_count)
        .cell(s.ev.audit_max_rel);
    gs.end_row();
  }
  ev.close();
  gs.close();
  out.manifest.outputs.push_back("events.csv");
  out.manifest.outputs.push_back("grid_summary.csv");

  if (c.dump_trajectories > 0) {
    CsvWriter tr(join_path(dir, "trajectories.csv"),
                 {"run_id", "z0_re", "z0_im", "t", "xi_re", "xi_im", "S_re", "S_im", "stopped"});
    for (int r = 0; r < n; ++r) {
      const auto& s = slots[static_cast<std::size_t>(r)];
      for (const auto& traj : s.dumps) {
        for (const auto& smp : traj.samples) {
          tr.cell(r)
              .cell(traj.z0.real())
              .cell(traj.z0.imag())
              .cell(smp.t)
              .cell(smp.xi.real())
              .cell(smp.xi.imag())
              .cell(smp.S.real())
              .cell(smp.S.imag())
              .cell(static_cast<int>(traj.stopped));
          tr.end_row();
        }
      }
    }
    tr.close();
    out.manifest.outputs.push_back("trajectories.csv");
  }

  CsvWriter sum(join_path(dir, "events_summary.csv"),
                {"statistic_name", "n_runs", "frequency", "mean_value", "max_value",
                 "min_threshold"});
  auto emit_stat = [&sum](const std::string& name, const std::vector<double>& vals, int hits,
                          double thresh) {
    double mean = std::numeric_limits<double>::quiet_NaN();
    double mx = std::numeric_limits<double>::quiet_NaN();
    if (!vals.empty()) {
      mean = 0;
      mx = -std::numeric_limits<double>::infinity();
      for (double v : vals) {
        mean += v;
        mx = std::max(mx, v);
      }
      mean /= double(vals.size());
    }
    sum.cell(name)
        .cell(static_cast<int>(vals.size()))
        .cell(vals.empty() ? std::numeric_limits<double>::quiet_NaN()
                           : double(hits) / double(vals.size()))
        .cell(mean)
        .cell(mx)
        .cell(thresh);
    sum.end_row();
  };
  emit_stat("A_S", as_vals, as_hits, as_thresh_min);
  if (c.track_g) emit_stat("A_G", ag_vals, ag_hits, ag_thresh_min);
  sum.close();
  out.manifest.outputs.push_back("events_summary.csv");
  out.manifest.phase_seconds.emplace_back("aggregate", lap(t0));
  if (!as_vals.empty())
    log << "  A_S: " << as_hits << "/" << as_vals.size() << " threshold crossings, max "
        << fmt("%.4f", *std::max_element(as_vals.begin(), as_vals.end())) << " vs "
        << fmt("%.4f", as_thresh_min) << "\n";
  return out;
}

// ---- subordination -----------------------------------------------------------

// Probe points: three Re positions across the window crossed with Im levels
// {eta, 0.1, 1} (levels below eta dropped, duplicates merged).
std::vector<Cplx> subordination_targets(const ExperimentConfig& c) {
  const double eta = c.model.eta();
  const double w = c.window.width();
  const double res[3] = {c.window.lo + 0.25 * w, c.window.lo + 0.5 * w, c.window.lo + 0.75 * w};
  std::vector<double> ims;
  for (double v : {eta, 0.1, 1.0})
    if (v >= eta && (ims.empty() || v > ims.back() * (1 + 1e-12))) ims.push_back(v);
  std::vector<Cplx> z;
  for (double im : ims)
    for (double re : res) z.emplace_back(re, im);
  return z;
}

struct SubSlot {
  std::string error;
  std::vector<SubordinationResult> checks;
};

SubSlot subordination_realization(const ExperimentConfig& c, const std::vector<Cplx>& zs,
                                  int run_id) {
  SubSlot out;
  try {
    const std::uint64_t rs = run_seed(c, run_id);
    const Potential V = sample_potential(c.model, c.density, derive(rs, "potential"));
    DysonPath path = sample_dyson_path(c.model, c.grid_size, derive(rs, "path"));
    FlowLab lab(V, std::move(path), c.flow);
    out.checks.reserve(zs.size());
    for (const Cplx z : zs) out.checks.push_back(subordination_check(lab, z, c.sites));
  } catch (const std::exception& e) {
    out.error = e.what();
  }
  return out;
}

RunOutcome run_subordination(const ExperimentConfig& c, const std::string& dir, int threads,
                             std::ostream& log) {
  RunOutcome out;
  out.manifest.config_hash = c.hash();
  out.manifest.version = kVersion;
  auto t0 = Clock::now();

  const std::vector<Cplx> zs = subordination_targets(c);
  const int n = c.ensemble;
  std::vector<SubSlot> slots(static_cast<std::size_t>(n));
  for (int r = 0; r < n; ++r) out.manifest.realization_seeds.push_back(run_seed(c, r));
  parallel_for(threads, n, [&](int r) {
    slots[static_cast<std::size_t>(r)] = subordination_realization(c, zs, r);
  });
  out.manifest.phase_seconds.emplace_back("realizations", lap(t0));

  CsvWriter csv(join_path(dir, "subordination.csv"),
                {"run_id", "z_re", "z_im", "w_re", "w_im", "site", "rel_error"});
  std::vector<std::vector<double>> by_z(zs.size());
  for (int r = 0; r < n; ++r) {
    const auto& s = slots[static_cast<std::size_t>(r)];
    if (!s.error.empty()) {
      record_failure(out, log, r, s.error);
      continue;
    }
    ++out.completed;
    for (std::size_t zi = 0; zi < s.checks.size(); ++zi) {
      const auto& chk = s.checks[zi];
      for (std::size_t k = 0; k < chk.sites.size(); ++k) {
        csv.cell(r)
            .cell(chk.z.real())
            .cell(chk.z.imag())
            .cell(chk.w.real())
            .cell(chk.w.imag())
            .cell(chk.sites[k])
            .cell(chk.rel_errors[k]);
        csv.end_row();
        by_z[zi].push_back(chk.rel_errors[k]);
      }
    }
  }
  csv.close();
  out.manifest.outputs.push_back("subordination.csv");

  CsvWriter sum(join_path(dir, "subordination_summary.csv"),
                {"z_re", "z_im", "n_values", "median_rel_error", "p90_rel_error",
                 "max_rel_error"});
  for (std::size_t zi = 0; zi < zs.size(); ++zi) {
    const auto& v = by_z[zi];
    const double mx = v.empty() ? std::numeric_limits<double>::quiet_NaN()
                                : *std::max_element(v.begin(), v.end());
    sum.cell(zs[zi].real())
        .cell(zs[zi].imag())
        .cell(static_cast<int>(v.size()))
        .cell(med_or_nan(v))
        .cell(quant_or_nan(v, 0.9))
        .cell(mx);
    sum.end_row();
  }
  sum.close();
  out.manifest.outputs.push_back("subordination_summary.csv");
  out.manifest.phase_seconds.emplace_back("aggregate", lap(t0));
  return out;
}

// ---- concentration -------------------------------------------------------------

RunOutcome run_concentration(const ExperimentConfig& c, const std::string& dir, int /*threads*/,
                             std::ostream& log) {
  RunOutcome out;
  out.manifest.config_hash = c.hash();
  out.manifest.version = kVersion;
  auto t0 = Clock::now();
  const double zeta = c.zeta == 0.0 ? std::pow(double(c.model.N), -0.5) : c.zeta;
  out.manifest.realization_seeds.push_back(c.master_seed);
  try {
    const ConcentrationEstimate est = concentration_experiment(
        c.density, c.model, c.J, zeta, c.mu_grid, c.ensemble, c.master_seed);
    out.manifest.phase_seconds.emplace_back("experiment", lap(t0));

    CsvWriter csv(join_path(dir, "concentration.csv"),
                  {"density", "N", "zeta", "mu", "tail_prob", "ensemble", "seed"});
    for (std::size_t i = 0; i < est.mu_grid.size(); ++i) {
      csv.cell(c.density.id())
          .cell(c.model.N)
          .cell(est.zeta)
          .cell(est.mu_grid[i])
          .cell(est.tail_prob[i])
          .cell(est.ensemble)
          .cell(est.seed);
      csv.end_row();
    }
    csv.close();
    CsvWriter meta(join_path(dir, "concentration_meta.csv"),
                   {"lattice_spacing", "lattice_rows", "lattice_cols", "mean_sup"});
    meta.cell(est.lattice_spacing)
        .cell(est.lattice_rows)
        .cell(est.lattice_cols)
        .cell(est.mean_sup);
    meta.end_row();
    meta.close();
    out.manifest.outputs.push_back("concentration.csv");
    out.manifest.outputs.push_back("concentration_meta.csv");
    out.manifest.phase_seconds.emplace_back("write", lap(t0));
    out.completed = c.ensemble;
    log << "  concentration: zeta=" << fmt("%.4g", zeta) << " mean sup deviation "
        << fmt("%.4g", est.mean_sup) << "\n";
  } catch (const std::exception& e) {
    out.failed = c.ensemble;
    out.manifest.failures.push_back(std::string("realization 0: ") + e.what());
    log << "  concentration failed: " << e.what() << "\n";
  }
  return out;
}

// ---- regularity ---------------------------------------------------------------

struct RegSlot {
  std::string error;
  RegularityVerdict v;
};

RunOutcome run_regularity(const ExperimentConfig& c, const std::string& dir, int threads,
                          std::ostream& log) {
  RunOutcome out;
  out.manifest.config_hash = c.hash();
  out.manifest.version = kVersion;
  auto t0 = Clock::now();

  const int n = c.ensemble;
  std::vector<RegSlot> slots(static_cast<std::size_t>(n));
  for (int r = 0; r < n; ++r) out.manifest.realization_seeds.push_back(run_seed(c, r));
  parallel_for(threads, n, [&](int r) {
    auto& slot = slots[static_cast<std::size_t>(r)];
    try {
      const Potential V =
          sample_potential(c.model, c.density, derive(run_seed(c, r), "potential"));
      slot.v = verify_assumption(V, c.model, c.window, c.epsilon);
    } catch (const std::exception& e) {
      slot.error = e.what();
    }
  });
  out.manifest.phase_seconds.emplace_back("realizations", lap(t0));

  CsvWriter csv(join_path(dir, "regularity.csv"),
                {"run_id", "N", "K_m_fit", "K_l_fit", "passes_km", "passes_kl", "sup_abs_s0",
                 "bottom_spacing", "slack_sup", "slack_inf"});
  std::vector<double> km, kl;
  int pass_km = 0, pass_kl = 0;
  for (int r = 0; r < n; ++r) {
    const auto& s = slots[static_cast<std::size_t>(r)];
    if (!s.error.empty()) {
      record_failure(out, log, r, s.error);
      continue;
    }
    ++out.completed;
    csv.cell(r)
        .cell(c.model.N)
        .cell(s.v.K_m_fit)
        .cell(s.v.K_l_fit)
        .cell(static_cast<int>(s.v.passes_km))
        .cell(static_cast<int>(s.v.passes_kl))
        .cell(s.v.sup_abs_s0)
        .cell(s.v.bottom_spacing)
        .cell(s.v.slack_sup)
        .cell(s.v.slack_inf);
    csv.end_row();
    km.push_back(s.v.K_m_fit);
    kl.push_back(s.v.K_l_fit);
    pass_km += s.v.passes_km ? 1 : 0;
    pass_kl += s.v.passes_kl ? 1 : 0;
  }
  csv.close();
  out.manifest.outputs.push_back("regularity.csv");

  CsvWriter sum(join_path(dir, "regularity_summary.csv"),
                {"n_runs", "median_K_m_fit", "median_K_l_fit", "max_K_m_fit", "min_K_l_fit",
                 "frac_pass_km", "frac_pass_kl"});
  const double max_km = km.empty() ? std::numeric_limits<double>::quiet_NaN()
                                   : *std::max_element(km.begin(), km.end());
  const double min_kl = kl.empty() ? std::numeric_limits<double>::quiet_NaN()
                                   : *std::min_element(kl.begin(), kl.end());
  const int ok = out.completed;
  sum.cell(ok)
      .cell(med_or_nan(km))
      .cell(med_or_nan(kl))
      .cell(max_km)
      .cell(min_kl)
      .cell(ok ? double(pass_km) / ok : std::numeric_limits<double>::quiet_NaN())
      .cell(ok ? double(pass_kl) / ok : std::numeric_limits<double>::quiet_NaN());
  sum.end_row();
  sum.close();
  out.manifest.outputs.push_back("regularity_summary.csv");
  out.manifest.phase_seconds.emplace_back("aggregate", lap(t0));
  return out;
}

// ---- report helpers -------------------------------------------------------------

struct CsvTable {
  std::vector<std::string> header;
  std::vector<std::vector<std::string>> rows;
};

std::vector<std::string> split_csv_line(const std::string& line, const std::string& path) {
  std::vector<std::string> out;
  std::string cur;
  bool quoted = false;
  for (std::size_t i = 0; i < line.size(); ++i) {
    const char ch = line[i];
    if (quoted) {
      if (ch == '"') {
        if (i + 1 < line.size() && line[i + 1] == '"') {
          cur += '"';
          ++i;
        } else {
          quoted = false;
        }
      } else {
        cur += ch;
      }
    } else if (ch == '"' && cur.empty()) {
      quoted = true;
    } else if (ch == ',') {
      out.push_back(cur);
      cur.clear();
    } else {
      cur += ch;
    }
  }
  if (quoted) throw IoError("unterminated quoted cell in " + path);
  out.push_back(cur);
  return out;
}

CsvTable read_csv(const std::string& path) {
  std::ifstream f(path);
  if (!f) throw IoError("cannot open " + path);
  CsvTable t;
  std::string line;
  if (!std::getline(f, line)) throw IoError("empty csv: " + path);
  if (!line.empty() && line.back() == '\r') line.pop_back();
  t.header = split_csv_line(line, path);
  while (std::getline(f, line)) {
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    auto cells = split_csv_line(line, path);
    if (cells.size() != t.header.size()) throw IoError("ragged csv row in " + path);
    t.rows.push_back(std::move(cells));
  }
  return t;
}

int col(const CsvTable& t, const std::string& name, const std::string& path) {
  for (std::size_t i = 0; i < t.header.size(); ++i)
    if (t.header[i] == name) return static_cast<int>(i);
  throw IoError("column '" + name + "' missing from " + path);
}

double cell_num(const std::string& s) {
  try {
    return std::stod(s);
  } catch (...) {
    return std::numeric_limits<double>::quiet_NaN();
  }
}

struct RunInfo {
  std::string dir;
  std::map<std::string, std::string> raw;
  std::string experiment;
};

double raw_num(const RunInfo& run, const std::string& key, double dflt) {
  const auto it = run.raw.find(key);
  return it == run.raw.end() ? dflt : cell_num(it->second);
}

void report_localization(const std::vector<RunInfo>& runs, const std::string& dir,
                         std::ostream& log) {
  const Interval window{raw_num(runs.front(), "window_lo", -0.25),
                        raw_num(runs.front(), "window_hi", 0.25)};
  const Interval bulk = central_fraction(window, raw_num(runs.front(), "bulk_fraction", 0.8));
  std::map<int, std::array<std::vector<double>, 3>> by_n;  // ipr, sup, mass
  for (const auto& run : runs) {
    const std::string path = join_path(run.dir, "localization.csv");
    const CsvTable t = read_csv(path);
    const int cn = col(t, "N", path), cl = col(t, "lambda", path);
    const int cm = col(t, "mass_outside", path), cs = col(t, "sup_norm_sq", path);
    const int ci = col(t, "ipr", path);
    for (const auto& row : t.rows) {
      if (!bulk.contains(cell_num(row[static_cast<std::size_t>(cl)]))) continue;
      auto& a = by_n[static_cast<int>(cell_num(row[static_cast<std::size_t>(cn)]))];
      a[0].push_back(cell_num(row[static_cast<std::size_t>(ci)]));
      a[1].push_back(cell_num(row[static_cast<std::size_t>(cs)]));
      a[2].push_back(cell_num(row[static_cast<std::size_t>(cm)]));
    }
  }
  std::vector<SweepRow> rows;
  std::vector<double> xs, yi, ys, ym;
  CsvWriter sum(join_path(dir, "scaling_summary.csv"),
                {"N", "median_ipr", "median_sup_norm_sq", "median_mass_outside", "n_bulk"});
  for (auto& [N, a] : by_n) {
    SweepRow r;
    r.N = N;
    r.delta = raw_num(runs.front(), "delta", 0.5);
    r.median_ipr = med_or_nan(a[0]);
    r.median_sup_norm_sq = med_or_nan(a[1]);
    r.median_mass_outside = med_or_nan(a[2]);
    r.n_vectors = static_cast<int>(a[0].size());
    rows.push_back(r);
    sum.cell(N)
        .cell(r.median_ipr)
        .cell(r.median_sup_norm_sq)
        .cell(r.median_mass_outside)
        .cell(r.n_vectors);
    sum.end_row();
    xs.push_back(double(N));
    yi.push_back(r.median_ipr);
    ys.push_back(r.median_sup_norm_sq);
    ym.push_back(r.median_mass_outside);
  }
  sum.close();
  log << "report: wrote " << join_path(dir, "scaling_summary.csv") << "\n";

  LinePlot plot("Eigenvector statistics vs N", "N", "bulk median");
  plot.log_x(true);
  plot.log_y(true);
  plot.add_series("ipr", xs, yi);
  plot.add_series("sup_norm_sq", xs, ys);
  plot.add_series("mass_outside", xs, ym);
  if (rows.size() >= 3) {
    const ScalingTable table = scaling_table(rows);
    CsvWriter fits(join_path(dir, "scaling_fits.csv"),
                   {"quantity", "slope", "intercept", "stderr_slope"});
    const std::pair<const char*, const LineFit*> named[] = {
        {"ipr", &table.ipr_fit},
        {"sup_norm_sq", &table.sup_fit},
        {"mass_outside", &table.mass_fit}};
    for (const auto& [name, fit] : named) {
      fits.cell(std::string(name)).cell(fit->slope).cell(fit->intercept).cell(fit->stderr_slope);
      fits.end_row();
    }
    fits.close();
    plot.add_annotation("ipr slope = " + fmt("%.3f", table.ipr_fit.slope));
    plot.add_annotation("sup slope = " + fmt("%.3f", table.sup_fit.slope));
    plot.add_annotation("mass slope = " + fmt("%.3f", table.mass_fit.slope));
    log << "report: wrote " << join_path(dir, "scaling_fits.csv") << "\n";
  }
  plot.write(join_path(dir, "scaling.svg"));
  log << "report: wrote " << join_path(dir, "scaling.svg") << "\n";
}

void report_events(const std::vector<RunInfo>& runs, const std::string& dir, std::ostream& log) {
  std::map<std::string, std::vector<std::array<double, 3>>> by_stat;  // value, threshold, hit
  for (const auto& run : runs) {
    const std::string path = join_path(run.dir, "events.csv");
    const CsvTable t = read_csv(path);
    const int cs = col(t, "statistic_name", path), cv = col(t, "value", path);
    const int ct = col(t, "threshold", path), co = col(t, "occurred", path);
    for (const auto& row : t.rows)
      by_stat[row[static_cast<std::size_t>(cs)]].push_back(
          {cell_num(row[static_cast<std::size_t>(cv)]),
           cell_num(row[static_cast<std::size_t>(ct)]),
           cell_num(row[static_cast<std::size_t>(co)])});
  }
  CsvWriter sum(join_path(dir, "events_summary.csv"),
                {"statistic_name", "n_runs", "frequency", "mean_value", "max_value",
                 "min_threshold"});
  LinePlot plot("Flow event statistics by run", "run", "statistic");
  for (const auto& [name, recs] : by_stat) {
    double mean = 0, mx = -std::numeric_limits<double>::infinity();
    double tmin = std::numeric_limits<double>::infinity();
    int hits = 0;
    std::vector<double> x, y, yt;
    for (std::size_t i = 0; i < recs.size(); ++i) {
      mean += recs[i][0];
      mx = std::max(mx, recs[i][0]);
      tmin = std::min(tmin, recs[i][1]);
      hits += recs[i][2] > 0.5 ? 1 : 0;
      x.push_back(double(i + 1));
      y.push_back(recs[i][0]);
      yt.push_back(recs[i][1]);
    }
    mean /= double(recs.size());
    sum.cell(name)
        .cell(static_cast<int>(recs.size()))
        .cell(double(hits) / double(recs.size()))
        .cell(mean)
        .cell(mx)
        .cell(tmin);
    sum.end_row();
    plot.add_series(name, x, y);
    plot.add_series(name + " threshold", x, yt);
  }
  sum.close();
  plot.write(join_path(dir, "events.svg"));
  log << "report: wrote " << join_path(dir, "events_summary.csv") << " and events.svg\n";
}

void report_subordination(const std::vector<RunInfo>& runs, const std::string& dir,
                          std::ostream& log) {
  // Key by the exact serialized coordinates so float identity is preserved.
  std::map<std::pair<std::string, std::string>, std::vector<double>> by_z;
  for (const auto& run : runs) {
    const std::string path = join_path(run.dir, "subordination.csv");
    const CsvTable t = read_csv(path);
    const int cr = col(t, "z_re", path), ci = col(t, "z_im", path);
    const int ce = col(t, "rel_error", path);
    for (const auto& row : t.rows)
      by_z[{row[static_cast<std::size_t>(cr)], row[static_cast<std::size_t>(ci)]}].push_back(
          cell_num(row[static_cast<std::size_t>(ce)]));
  }
  CsvWriter sum(join_path(dir, "subordination_summary.csv"),
                {"z_re", "z_im", "n_values", "median_rel_error", "p90_rel_error",
                 "max_rel_error"});
  std::map<std::string, std::vector<std::pair<double, double>>> curves;  // per Re: (im, med)
  for (const auto& [key, v] : by_z) {
    const double mx = *std::max_element(v.begin(), v.end());
    sum.cell(key.first)
        .cell(key.second)
        .cell(static_cast<int>(v.size()))
        .cell(med_or_nan(v))
        .cell(quant_or_nan(v, 0.9))
        .cell(mx);
    sum.end_row();
    curves["Re z = " + key.first].emplace_back(cell_num(key.second), med_or_nan(v));
  }
  sum.close();
  LinePlot plot("Terminal vs initial local resolvents", "Im z", "median relative error");
  plot.log_x(true);
  plot.log_y(true);
  for (auto& [name, pts] : curves) {
    std::sort(pts.begin(), pts.end());
    std::vector<double> x, y;
    for (const auto& [im, med] : pts) {
      x.push_back(im);
      y.push_back(med);
    }
    plot.add_series(name, x, y);
  }
  plot.write(join_path(dir, "subordination.svg"));
  log << "report: wrote " << join_path(dir, "subordination_summary.csv")
      << " and subordination.svg\n";
}

void report_concentration(const std::vector<RunInfo>& runs, const std::string& dir,
                          std::ostream& log) {
  CsvWriter sum(join_path(dir, "concentration_summary.csv"),
                {"density", "N", "zeta", "mu", "tail_prob", "ensemble", "seed"});
  std::map<int, std::vector<std::pair<double, double>>> by_n;
  for (const auto& run : runs) {
    const std::string path = join_path(run.dir, "concentration.csv");
    const CsvTable t = read_csv(path);
    const int cd = col(t, "density", path), cn = col(t, "N", path), cz = col(t, "zeta", path);
    const int cm = col(t, "mu", path), cp = col(t, "tail_prob", path);
    const int ce = col(t, "ensemble", path), cs = col(t, "seed", path);
    for (const auto& row : t.rows) {
      sum.cell(row[static_cast<std::size_t>(cd)])
          .cell(static_cast<int>(cell_num(row[static_cast<std::size_t>(cn)])))
          .cell(cell_num(row[static_cast<std::size_t>(cz)]))
          .cell(cell_num(row[static_cast<std::size_t>(cm)]))
          .cell(cell_num(row[static_cast<std::size_t>(cp)]))
          .cell(static_cast<int>(cell_num(row[static_cast<std::size_t>(ce)])))
          .cell(row[static_cast<std::size_t>(cs)]);
      sum.end_row();
      by_n[static_cast<int>(cell_num(row[static_cast<std::size_t>(cn)]))].emplace_back(
          cell_num(row[static_cast<std::size_t>(cm)]),
          cell_num(row[static_cast<std::size_t>(cp)]));
    }
  }
  sum.close();
  LinePlot plot("Tail probability of the sup deviation", "mu", "P(sup > mu)");
  for (auto& [N, pts] : by_n) {
    std::sort(pts.begin(), pts.end());
    std::vector<double> x, y;
    for (const auto& [mu, p] : pts) {
      x.push_back(mu);
      y.push_back(p);
    }
    plot.add_series("N = " + std::to_string(N), x, y);
  }
  plot.write(join_path(dir, "concentration.svg"));
  log << "report: wrote " << join_path(dir, "concentration_summary.csv")
      << " and concentration.svg\n";
}

void report_regularity(const std::vector<RunInfo>& runs, const std::string& dir,
                       std::ostream& log) {
  std::vector<double> km, kl;
  int pass_km = 0, pass_kl = 0, total = 0;
  for (const auto& run : runs) {
    const std::string path = join_path(run.dir, "regularity.csv");
    const CsvTable t = read_csv(path);
    const int cm = col(t, "K_m_fit", path), cl = col(t, "K_l_fit", path);
    const int pm = col(t, "passes_km", path), pl = col(t, "passes_kl", path);
    for (const auto& row : t.rows) {
      km.push_back(cell_num(row[static_cast<std::size_t>(cm)]));
      kl.push_back(cell_num(row[static_cast<std::size_t>(cl)]));
      pass_km += cell_num(row[static_cast<std::size_t>(pm)]) > 0.5 ? 1 : 0;
      pass_kl += cell_num(row[static_cast<std::size_t>(pl)]) > 0.5 ? 1 : 0;
      ++total;
    }
  }
  CsvWriter sum(join_path(dir, "regularity_summary.csv"),
                {"n_runs", "median_K_m_fit", "median_K_l_fit", "frac_pass_km", "frac_pass_kl"});
  sum.cell(total)
      .cell(med_or_nan(km))
      .cell(med_or_nan(kl))
      .cell(total ? double(pass_km) / total : std::numeric_limits<double>::quiet_NaN())
      .cell(total ? double(pass_kl) / total : std::numeric_limits<double>::quiet_NaN());
  sum.end_row();
  sum.close();
  log << "report: wrote " << join_path(dir, "regularity_summary.csv") << "\n";
}

}  // namespace

// ---- public entry points ---------------------------------------------------

RunOutcome run(const ExperimentConfig& config, const std::string& out_dir, int threads,
               std::ostream& log) {
  require_valid(config);
  make_dirs(out_dir);
  log << "run " << to_string(config.experiment) << ": N=" << config.model.N
      << " delta=" << config.model.delta << " alpha=" << config.model.alpha
      << " ensemble=" << config.ensemble << " threads=" << std::max(1, threads) << "\n";
  RunOutcome out;
  switch (config.experiment) {
    case ExperimentKind::localization:
      out = run_localization(config, out_dir, threads, log);
      break;
    case ExperimentKind::flow_events:
      out = run_flow_events(config, out_dir, threads, log);
      break;
    case ExperimentKind::subordination:
      out = run_subordination(config, out_dir, threads, log);
      break;
    case ExperimentKind::concentration:
      out = run_concentration(config, out_dir, threads, log);
      break;
    case ExperimentKind::regularity:
      out = run_regularity(config, out_dir, threads, log);
      break;
    case ExperimentKind::scaling_sweep:
      out = run_sweep(config, out_dir, threads, log);
      break;
  }
  write_manifest(out.manifest, config, join_path(out_dir, "manifest.json"));
  log << "completed " << out.completed << "/" << (out.completed + out.failed)
      << " realizations; outputs in " << out_dir << "\n";
  return out;
}

void report(const std::vector<std::string>& run_dirs, const std::string& report_dir,
            std::ostream& log) {
  if (run_dirs.empty()) throw ConfigError("report: no run directories given");
  std::vector<RunInfo> runs;
  runs.reserve(run_dirs.size());
  for (const auto& d : run_dirs) {
    const std::string mpath = join_path(d, "manifest.json");
    std::ifstream f(mpath);
    if (!f) throw IoError("cannot open " + mpath);
    nlohmann::json j;
    try {
      f >> j;
    } catch (const std::exception& e) {
      throw IoError("cannot parse " + mpath + ": " + e.what());
    }
    RunInfo info;
    info.dir = d;
    info.experiment = j.value("experiment", std::string());
    if (j.contains("config"))
      for (const auto& item : j.at("config").items())
        info.raw[item.key()] = item.value().get<std::string>();
    runs.push_back(std::move(info));
  }

  // Runs may differ in size, seed, ensemble and output location; any other
  // config difference makes aggregation meaningless, so refuse with the diff.
  static const std::set<std::string> kAllowed = {"N", "master_seed", "ensemble", "output_dir",
                                                 "sweep_N"};
  std::vector<std::string> diffs;
  const auto& base = runs.front().raw;
  for (std::size_t i = 1; i < runs.size(); ++i) {
    std::set<std::string> keys;
    for (const auto& kv : base) keys.insert(kv.first);
    for (const auto& kv : runs[i].raw) keys.insert(kv.first);
    for (const auto& k : keys) {
      if (kAllowed.count(k)) continue;
      const auto a = base.find(k);
      const auto b = runs[i].raw.find(k);
      const std::string va = a == base.end() ? "<unset>" : a->second;
      const std::string vb = b == runs[i].raw.end() ? "<unset>" : b->second;
      if (va != vb) diffs.push_back(runs[i].dir + ": " + k + " = '" + vb + "' vs '" + va + "'");
    }
  }
  if (!diffs.empty()) {
    std::string msg = "report: run configs differ beyond N/master_seed/ensemble/output_dir:";
    for (const auto& d : diffs) msg += "\n  - " + d;
    throw ConfigError(msg);
  }

  make_dirs(report_dir);
  const std::string kind = runs.front().experiment;
  if (kind == "localization" || kind == "scaling_sweep")
    report_localization(runs, report_dir, log);
  else if (kind == "flow_events")
    report_events(runs, report_dir, log);
  else if (kind == "subordination")
    report_subordination(runs, report_dir, log);
  else if (kind == "concentration")
    report_concentration(runs, report_dir, log);
  else if (kind == "regularity")
    report_regularity(runs, report_dir, log);
  else
    throw ConfigError("report: unknown experiment kind '" + kind + "'");
}

RunOutcome sample(const ExperimentConfig& c, const std::string& out_dir, std::ostream& log) {
  require_valid(c);
  make_dirs(out_dir);
  RunOutcome out;
  out.manifest.config_hash = c.hash();
  out.manifest.version = kVersion;
  auto t0 = Clock::now();
  const std::uint64_t rs = run_seed(c, 0);
  out.manifest.realization_seeds.push_back(rs);
  try {
    const Potential V = sample_potential(c.model, c.density, derive(rs, "potential"));
    const DysonPath path = sample_dyson_path(c.model, c.grid_size, derive(rs, "path"));
    const Eigen::VectorXd lam = eigenvalues_only(assemble_snapshot(V, path, path.M()));
    CsvWriter pot(join_path(out_dir, "potential.csv"), {"site", "value"});
    for (int x = 0; x < V.N(); ++x) {
      pot.cell(x).cell(V.values[x]);
      pot.end_row();
    }
    pot.close();
    CsvWriter spec(join_path(out_dir, "spectrum.csv"), {"index", "lambda"});
    const int n = static_cast<int>(lam.size());
    for (int i = 0; i < n; ++i) {
      spec.cell(i).cell(lam[i]);
      spec.end_row();
    }
    spec.close();
    out.manifest.outputs = {"potential.csv", "spectrum.csv"};
    out.completed = 1;
    log << "sample: N=" << c.model.N << " T=" << fmt("%.6g", c.model.T())
        << " -> potential.csv, spectrum.csv\n";
  } catch (const std::exception& e) {
    out.failed = 1;
    out.manifest.failures.push_back(std::string("realization 0: ") + e.what());
    log << "sample failed: " << e.what() << "\n";
  }
  out.manifest.phase_seconds.emplace_back("sample", lap(t0));
  write_manifest(out.manifest, c, join_path(out_dir, "manifest.json"));
  return out;
}

void write_manifest(const RunManifest& m, const ExperimentConfig& c, const std::string& path) {
  nlohmann::json j;
  j["version"] = m.version.empty() ? kVersion : m.version;
  j["config_hash"] = m.config_hash;
  j["experiment"] = to_string(c.experiment);
  j["config"] = c.raw;
  j["realization_seeds"] = m.realization_seeds;
  auto phases = nlohmann::json::array();
  for (const auto& [name, sec] : m.phase_seconds)
    phases.push_back({{"phase", name}, {"seconds", sec}});
  j["phase_seconds"] = phases;
  j["outputs"] = m.outputs;
  j["failures"] = m.failures;

  const std::string tmp = path + ".tmp";
  std::ofstream f(tmp);
  if (!f) throw IoError("cannot open manifest for writing: " + tmp);
  f << j.dump(2) << "\n";
  f.flush();
  if (!f) throw IoError("manifest write failed: " + tmp);
  f.close();
  std::error_code ec;
  fs::rename(tmp, path, ec);
  if (ec) throw IoError("cannot move manifest into place: " + path + ": " + ec.message());
}

}  // namespace rpflow
