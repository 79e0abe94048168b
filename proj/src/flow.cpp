#include "rpflow/flow.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <cstring>
#include <sstream>

#include "rpflow/regularity.hpp"

namespace rpflow {

namespace {

inline std::uint64_t time_key(double t) { return std::bit_cast<std::uint64_t>(t); }

// S and dS/dz from a real spectrum: S = (1/N) sum 1/(lam_i - z).
inline void trace_sums(const double* lam, int n, Cplx z, Cplx* S, Cplx* dS) {
  const double x = z.real(), y = z.imag();
  double sr = 0, si = 0, dr = 0, di = 0;
  for (int i = 0; i < n; ++i) {
    const double a = lam[i] - x;
    const double den = a * a + y * y;
    const double inv = 1.0 / den;
    sr += a * inv;
    si += y * inv;
    if (dS) {
      // (lam - z)^-2 = (a - iy)^-2 ... with a + iy conjugation care:
      // 1/(lam - z) = (a + iy)/den, so (1/(lam-z))^2 = ((a^2-y^2) + 2iay)/den^2
      const double inv2 = inv * inv;
      dr += (a * a - y * y) * inv2;
      di += 2.0 * a * y * inv2;
    }
  }
  const double invn = 1.0 / double(n);
  *S = Cplx(sr * invn, si * invn);
  if (dS) *dS = Cplx(dr * invn, di * invn);
}

}  // namespace

// ======================== S evaluator =====================================
// Exact eigendecompositions at path-grid nodes. Between nodes, either
//  - interp: sorted-eigenvalue linear interpolation plus an independent
//    Brownian bridge of rate 2/N per eigenvalue (the exact variance of the
//    rotated-diagonal increment), pinned to zero at both nodes so S is
//    continuous at the seams and Herglotz everywhere; or
//  - exact: a fresh decomposition of the bridged matrix at dyadic times.
// Either way every query inside one realization sees one consistent path.
class SEvaluator {
 public:
  SEvaluator(const Potential& V, const DysonPath& path, FlowOptions opt)
      : V_(&V), path_(&path), opt_(opt), march_(V, path) {
    const int M = path.M();
    node_lambda_.resize(std::size_t(M) + 1);
    bridges_.resize(std::size_t(M));
    node_lambda_[0] = V.sorted;  // H_0 = diag(V) exactly
    node_realized_ = 0;
    audit_stream_ = Stream(derive(path.seed, "flow-audit"));
  }

  const DysonPath& path() const { return *path_; }
  double grid_time(int k) const { return path_->time_grid[std::size_t(k)]; }
  int interval_of(double t) const {
    const int M = path_->M();
    const double T = path_->total_time();
    if (T <= 0.0) return 0;
    int k = int(std::floor(t / T * double(M)));
    return std::clamp(k, 0, M - 1);
  }
  bool is_node(double t, int* k_out) const {
    const double T = path_->total_time();
    const int M = path_->M();
    const double tol = std::max(T, 1.0) * 1e-14;
    const int k = int(std::llround(t / T * double(M)));
    if (k >= 0 && k <= M && std::abs(t - grid_time(k)) <= tol) {
      if (k_out) *k_out = k;
      return true;
    }
    return false;
  }

  // --- node realization -------------------------------------------------
  // The march may sit behind the realization frontier after a rebuild; those
  // nodes are re-marched (same seeded draws) without re-decomposing.
  void ensure_node(int k) {
    if (node_realized_ >= k) return;
    while (march_.node() < node_realized_) march_.advance();
    while (node_realized_ < k) {
      HamiltonianSnapshot h = march_.snapshot_refined(0, 1);
      node_lambda_[std::size_t(march_.node()) + 1] = eigenvalues_only(h);
      march_.advance();
      node_realized_ = march_.node();
    }
  }

  // Place the march exactly at node k (needed for matrix bridging: vectors,
  // exact-mode spectra, audits). The march only moves forward, so going back
  // means replaying the same seeded draws from scratch.
  void position_march(int k) {
    if (march_.node() > k) march_ = SymmetricMarch(*V_, *path_);
    while (march_.node() < k) march_.advance();
  }

  // Enter interval k for a sweep; with vectors, decompose H_{t_k} fully and
  // keep the site weights P(x,i) = psi_i(x)^2 while the interval is active.
  void enter_interval(int k, bool need_vectors) {
    ensure_node(k + 1);
    if (need_vectors || opt_.evaluator == FlowOptions::Evaluator::exact) {
      position_march(k);
    } else if (march_.node() < k) {
      while (march_.node() < k) march_.advance();  // keeps audits eligible
    }
    if (need_vectors && vec_node_ != k) {
      SpectralData sd = eigendecompose(march_.snapshot());
      weights_ = sd.eigenvectors.cwiseProduct(sd.eigenvectors);
      vec_node_ = k;
    }
    cur_ = k;
  }
  void leave_interval(bool keep_bridges) {
    if (!keep_bridges && cur_ >= 0) bridges_[std::size_t(cur_)].clear();
    if (vec_node_ == cur_) {
      weights_.resize(0, 0);
      vec_node_ = -1;
    }
    cur_ = -1;
  }

  // --- evaluation ---------------------------------------------------------
  Cplx eval(double t, Cplx z, Cplx* dS = nullptr) {
    if (!(z.imag() > 0.0)) throw NumericalError("S evaluation below the real axis");
    Cplx S;
    int node_k = -1;
    if (is_node(t, &node_k)) {
      ensure_node(node_k);
      const auto& lam = node_lambda_[std::size_t(node_k)];
      trace_sums(lam.data(), int(lam.size()), z, &S, dS);
    } else if (opt_.evaluator == FlowOptions::Evaluator::exact) {
      const auto& lam = exact_lambda(t);
      trace_sums(lam.data(), int(lam.size()), z, &S, dS);
    } else {
      const auto& lam = interp_lambda(t);
      trace_sums(lam.data(), int(lam.size()), z, &S, dS);
      maybe_audit(t, z, S);
    }
    if (!(S.imag() > 0.0))
      throw NumericalError("trace transform lost the Herglotz property");
    return S;
  }

  // Effective spectrum at t (interp path), for G statistics.
  const Eigen::VectorXd& lambda_at(double t) {
    int node_k = -1;
    if (is_node(t, &node_k)) {
      ensure_node(node_k);
      return node_lambda_[std::size_t(node_k)];
    }
    if (opt_.evaluator == FlowOptions::Evaluator::exact) return exact_lambda(t);
    return interp_lambda(t);
  }

  bool has_weights() const { return vec_node_ >= 0; }
  // Im G at every site: out_x = sum_i P(x,i) Im(1/(lam_i - xi)).
  void im_g_all(double t, Cplx xi, Eigen::VectorXd& out) {
    if (vec_node_ < 0) throw NumericalError("im_g_all: no site weights active");
    const Eigen::VectorXd& lam = lambda_at(t);
    const int n = int(lam.size());
    imv_.resize(n);
    const double x = xi.real(), y = xi.imag();
    for (int i = 0; i < n; ++i) {
      const double a = lam[i] - x;
      imv_[i] = y / (a * a + y * y);
    }
    out.noalias() = weights_ * imv_;
  }

  // Complex local resolvents at listed sites from the active node weights.
  void g_sites(double t, Cplx xi, const std::vector<int>& sites, std::vector<Cplx>& out) {
    if (vec_node_ < 0) throw NumericalError("g_sites: no site weights active");
    const Eigen::VectorXd& lam = lambda_at(t);
    const int n = int(lam.size());
    out.assign(sites.size(), Cplx(0, 0));
    const double x0 = xi.real(), y0 = xi.imag();
    for (std::size_t s = 0; s < sites.size(); ++s) {
      const int x = sites[s];
      double gr = 0, gi = 0;
      for (int i = 0; i < n; ++i) {
        const double a = lam[i] - x0;
        const double p = weights_(x, i) / (a * a + y0 * y0);
        gr += a * p;
        gi += y0 * p;
      }
      out[s] = Cplx(gr, gi);
    }
  }

  int audit_count() const { return audit_done_; }
  double audit_max_rel() const { return audit_max_rel_; }

 private:
  const Potential* V_;
  const DysonPath* path_;
  FlowOptions opt_;
  SymmetricMarch march_;
  std::vector<Eigen::VectorXd> node_lambda_;
  int node_realized_ = -1;
  std::vector<std::map<double, Eigen::VectorXd>> bridges_;
  int cur_ = -1;
  int vec_node_ = -1;
  Eigen::MatrixXd weights_;
  Eigen::VectorXd imv_, lam_buf_;
  std::map<std::pair<int, std::int64_t>, Eigen::VectorXd> exact_cache_;
  Stream audit_stream_;
  std::uint64_t audit_calls_ = 0;
  int audit_done_ = 0;
  double audit_max_rel_ = 0.0;

  const Eigen::VectorXd& interp_lambda(double t) {
    const int k = interval_of(t);
    ensure_node(k + 1);
    const double a = grid_time(k), b = grid_time(k + 1);
    auto& bridge = bridges_[std::size_t(k)];
    auto it = bridge.find(t);
    if (it == bridge.end()) it = insert_bridge(k, a, b, t, bridge);
    const Eigen::VectorXd& g = it->second;
    const double u = (t - a) / (b - a);
    const auto& l0 = node_lambda_[std::size_t(k)];
    const auto& l1 = node_lambda_[std::size_t(k) + 1];
    lam_buf_ = (1.0 - u) * l0 + u * l1 + g;
    return lam_buf_;
  }

  std::map<double, Eigen::VectorXd>::iterator insert_bridge(
      int k, double a, double b, double t, std::map<double, Eigen::VectorXd>& bridge) {
    // bounding realized times (interval ends carry g = 0)
    double ta = a, tb = b;
    const Eigen::VectorXd *ga = nullptr, *gb = nullptr;
    auto hi = bridge.lower_bound(t);
    if (hi != bridge.end()) {
      tb = hi->first;
      gb = &hi->second;
    }
    if (hi != bridge.begin()) {
      auto lo = std::prev(hi);
      ta = lo->first;
      ga = &lo->second;
    }
    const int n = path_->params.N;
    const double u = (t - ta) / (tb - ta);
    const double var = 2.0 / double(n) * (t - ta) * (tb - t) / (tb - ta);
    const double sd = std::sqrt(std::max(var, 0.0));
    Eigen::VectorXd g(n);
    const std::uint64_t key = time_key(t);
    for (int i = 0; i < n; ++i) {
      const double mean = (ga ? (*ga)[i] : 0.0) * (1.0 - u) + (gb ? (*gb)[i] : 0.0) * u;
      g[i] = mean + sd * path_->eigen_bridge_noise(k, key, i);
    }
    return bridge.emplace(t, std::move(g)).first;
  }

  const Eigen::VectorXd& exact_lambda(double t) {
    const int k = interval_of(t);
    const double a = grid_time(k), b = grid_time(k + 1);
    // snap to the dyadic lattice (level 40) inside the interval
    const double u = (t - a) / (b - a);
    const std::int64_t j = std::llround(std::ldexp(u, 40));
    const auto key = std::make_pair(k, j);
    auto it = exact_cache_.find(key);
    if (it != exact_cache_.end()) return it->second;
    position_march(k);
    // reduce (level 40, j) to lowest terms for the bridge descent
    int level = 40;
    std::int64_t jj = j;
    while (level > 0 && (jj & 1) == 0) {
      jj >>= 1;
      --level;
    }
    HamiltonianSnapshot h = march_.snapshot_refined(level, std::uint64_t(jj));
    it = exact_cache_.emplace(key, eigenvalues_only(h)).first;
    return it->second;
  }

  void maybe_audit(double t, Cplx z, Cplx S_interp) {
    if (opt_.audit_fraction <= 0.0 || audit_done_ >= opt_.audit_budget) return;
    const double u = audit_stream_.uniform01(audit_calls_++);
    if (u >= opt_.audit_fraction) return;
    const int k = interval_of(t);
    if (march_.node() != k) return;  // matrix bridging unavailable here
    const double a = grid_time(k), b = grid_time(k + 1);
    const double uu = (t - a) / (b - a);
    const std::int64_t j = std::llround(std::ldexp(uu, 20));
    if (j <= 0 || j >= (std::int64_t(1) << 20)) return;
    int level = 20;
    std::int64_t jj = j;
    while (level > 0 && (jj & 1) == 0) {
      jj >>= 1;
      --level;
    }
    HamiltonianSnapshot h = march_.snapshot_refined(level, std::uint64_t(jj));
    Eigen::VectorXd lam = eigenvalues_only(h);
    Cplx S_exact;
    trace_sums(lam.data(), int(lam.size()), z, &S_exact, nullptr);
    const double rel = std::abs(S_interp - S_exact) / std::max(std::abs(S_exact), 1e-300);
    ++audit_done_;
    audit_max_rel_ = std::max(audit_max_rel_, rel);
    // Tripwire with a statistical floor. The interpolated field and the
    // bridged reference carry independent pinned bridges, so each eigenvalue
    // differs by sigma_lambda <= sqrt(dt/N); through the Poisson kernel that
    // is a relative trace noise of about 0.5*sqrt(dt/(N^2 y^3 Im S)), which
    // dwarfs 5% at y ~ eta and vanishes at O(1) heights. Anything beyond
    // 4 sigma + 5% is a defect, not bridge noise.
    const double y = z.imag();
    const double nn = double(lam.size());
    const double dens = std::max(S_exact.imag(), 0.05);
    const double sigma = 0.5 * std::sqrt((b - a) / (nn * nn * y * y * y * dens));
    const double tol = 0.05 + 4.0 * sigma;
    if (rel > tol) {
      std::ostringstream os;
      os << "interpolated trace evaluator off by " << rel << " (rel) at t=" << t
         << "; bridged-matrix reference disagrees beyond the tripwire (tol " << tol
         << ")";
      throw NumericalError(os.str());
    }
  }
};

// ======================== FlowLab =========================================

FlowLab::FlowLab(const Potential& V, DysonPath path, FlowOptions opt)
    : V_(&V), path_(std::move(path)), opt_(opt) {
  if (V.N() != path_.params.N) throw ConfigError("FlowLab: V/path size mismatch");
  eval_ = std::make_unique<SEvaluator>(V, path_, opt_);
}

FlowLab::~FlowLab() = default;

const SpectralData& FlowLab::terminal_spectral() {
  if (!terminal_) terminal_ = eigendecompose(assemble_snapshot(*V_, path_, path_.M()));
  return *terminal_;
}

int FlowLab::audit_count() const { return eval_->audit_count(); }
double FlowLab::audit_max_rel() const { return eval_->audit_max_rel(); }

// ======================== integrator core =================================

namespace {

struct QuadState {
  double drift = 0.0;   // int Im S / (Im xi)^2
  double inv2 = 0.0;    // int (Im xi)^-2
};

struct StageData {
  Cplx y_new, S_new, dS_new;  // state, S and S' at the accepted endpoint
  Cplx delta_new;
  QuadState q_new;
};

// One classical RK4 step of dy/dt = sgn * S_eff with S_eff(t) evaluated at
// eval-time map(t). Forward flow: sgn=-1, map = identity. Backward flow:
// sgn=+1, map(s) = T - s. Also advances the variational derivative
// d(delta)/dt = sgn * S'(y) delta and the two quadratures (forward only).
struct Rhs {
  SEvaluator* ev;
  double sgn = -1.0;
  double T = 0.0;
  bool reversed = false;
  bool want_delta = false;

  Cplx S(double t, Cplx y, Cplx* dS) const {
    const double tt = reversed ? (T - t) : t;
    return ev->eval(tt, y, dS);
  }
};

StageData rk4_step(const Rhs& rhs, double t, Cplx y, Cplx S_t, Cplx dS_t, Cplx delta,
                   const QuadState& q, double h) {
  auto quad_add = [](QuadState& acc, Cplx S, Cplx y_, double w) {
    const double iy = y_.imag();
    const double inv2 = 1.0 / (iy * iy);
    acc.drift += w * S.imag() * inv2;
    acc.inv2 += w * inv2;
  };
  const Cplx k1 = rhs.sgn * S_t;
  const Cplx d1 = rhs.want_delta ? rhs.sgn * dS_t * delta : Cplx(0);

  Cplx dS2, dS3, dS4;
  const Cplx y2 = y + 0.5 * h * k1;
  const Cplx S2 = rhs.S(t + 0.5 * h, y2, rhs.want_delta ? &dS2 : nullptr);
  const Cplx k2 = rhs.sgn * S2;
  const Cplx d2 = rhs.want_delta ? rhs.sgn * dS2 * (delta + 0.5 * h * d1) : Cplx(0);

  const Cplx y3 = y + 0.5 * h * k2;
  const Cplx S3 = rhs.S(t + 0.5 * h, y3, rhs.want_delta ? &dS3 : nullptr);
  const Cplx k3 = rhs.sgn * S3;
  const Cplx d3 = rhs.want_delta ? rhs.sgn * dS3 * (delta + 0.5 * h * d2) : Cplx(0);

  const Cplx y4 = y + h * k3;
  const Cplx S4 = rhs.S(t + h, y4, rhs.want_delta ? &dS4 : nullptr);
  const Cplx k4 = rhs.sgn * S4;
  const Cplx d4 = rhs.want_delta ? rhs.sgn * dS4 * (delta + h * d3) : Cplx(0);

  StageData out;
  out.y_new = y + h / 6.0 * (k1 + 2.0 * k2 + 2.0 * k3 + k4);
  out.delta_new = delta + h / 6.0 * (d1 + 2.0 * d2 + 2.0 * d3 + d4);
  out.q_new = q;
  quad_add(out.q_new, S_t, y, h / 6.0);
  quad_add(out.q_new, S2, y2, 2.0 * h / 6.0);
  quad_add(out.q_new, S3, y3, 2.0 * h / 6.0);
  quad_add(out.q_new, S4, y4, h / 6.0);
  out.S_new = rhs.S(t + h, out.y_new, rhs.want_delta ? &out.dS_new : nullptr);
  return out;
}

// Cubic Hermite dense output for the crossing of Im y = target inside one
// accepted step; returns the step-local parameter s* in [0,1] and the state.
struct Crossing {
  double tau;
  Cplx xi_tau;
};

Crossing locate_crossing(double t0, double h, Cplx y0, Cplx f0, Cplx y1, Cplx f1,
                         double target, double tol) {
  // Hermite basis on s in [0,1]; derivatives scaled by h.
  auto hermite = [&](double s) -> Cplx {
    const double s2 = s * s, s3 = s2 * s;
    const double h00 = 2 * s3 - 3 * s2 + 1, h10 = s3 - 2 * s2 + s;
    const double h01 = -2 * s3 + 3 * s2, h11 = s3 - s2;
    return h00 * y0 + (h10 * h) * f0 + h01 * y1 + (h11 * h) * f1;
  };
  double lo = 0.0, hi = 1.0;
  // Im is decreasing: Im(lo) >= target >= Im(hi)
  for (int it = 0; it < 200; ++it) {
    const double mid = 0.5 * (lo + hi);
    const Cplx ym = hermite(mid);
    if (std::abs(ym.imag() - target) <= tol) return {t0 + mid * h, ym};
    if (ym.imag() > target)
      lo = mid;
    else
      hi = mid;
  }
  const double mid = 0.5 * (lo + hi);
  return {t0 + mid * h, hermite(mid)};
}

struct StepPattern {
  std::vector<std::pair<double, double>> steps;  // (t, h) accepted
};

// State of one integrated point.
struct PointState {
  Cplx z0, y;
  double t = 0.0;
  Cplx S, dS;        // at (t, y)
  Cplx delta{1.0, 0.0};
  QuadState q;
  bool stopped = false, done = false;
  double tau = -1.0;
  Cplx xi_tau, S_tau;
};

struct StepControls {
  double base_h;
  double eta;
  double stop_level;   // eta/2 (or <=0: no stopping, preimage legs)
  double stop_tol;
  bool adaptive;
  double step_tol;
  bool dyadic = false;       // force h = interval/2^m (exact evaluator)
  double interval_len = 0.0;
  double t_snap = 0.0;       // times this close to t_end land exactly on it
  const StepPattern* replay = nullptr;  // frozen pattern (Newton shots)
  StepPattern* record = nullptr;
};

// Advance one point by one accepted step toward t_end. Returns false when the
// point finished (stopped or reached t_end exactly).
bool advance_point(const Rhs& rhs, PointState& p, double t_end, const StepControls& c,
                   std::size_t* replay_pos) {
  if (p.done) return false;
  if (t_end - p.t <= c.t_snap) {
    p.t = t_end;
    return false;
  }
  double h;
  if (c.replay) {
    if (*replay_pos >= c.replay->steps.size())
      throw NumericalError("frozen step pattern exhausted before the final time");
    h = c.replay->steps[(*replay_pos)++].second;
  } else {
    h = std::min(c.base_h, t_end - p.t);
    const double cap = c.eta / (4.0 * std::max(std::abs(p.S), 1e-300));
    h = std::min(h, cap);
    if (c.dyadic) {
      // round down to interval_len / 2^m; cells nest, so steps stay dyadic
      double cell = c.interval_len;
      int m = 0;
      while (cell > h * (1.0 + 1e-12) && m < 60) {
        cell *= 0.5;
        ++m;
      }
      h = cell;
    }
    if (!(h > 0.0) || h < c.base_h * 1e-12) {
      std::ostringstream os;
      os << "step underflow at t=" << p.t << " (h=" << h << ", |S|=" << std::abs(p.S)
         << ") from z0=(" << p.z0.real() << "," << p.z0.imag() << ")";
      throw NumericalError(os.str());
    }
    h = std::min(h, t_end - p.t);  // never step past the interval end
  }

  StageData big = rk4_step(rhs, p.t, p.y, p.S, p.dS, p.delta, p.q, h);
  bool halved = false;  // accepted solution is the two-half-step composition
  // Step-doubling error control. Only meaningful with the exact evaluator:
  // the interpolated field is Brownian-rough in t, so the doubling estimate
  // there measures field noise, not integrator error, and never settles.
  if (c.adaptive && c.dyadic && !c.replay) {
    bool accepted = false;
    for (int halvings = 0; halvings < 40 && !accepted; ++halvings) {
      StageData h1 = rk4_step(rhs, p.t, p.y, p.S, p.dS, p.delta, p.q, 0.5 * h);
      StageData h2 = rk4_step(rhs, p.t + 0.5 * h, h1.y_new, h1.S_new, h1.dS_new,
                              h1.delta_new, h1.q_new, 0.5 * h);
      const double err =
          std::abs(big.y_new - h2.y_new) / std::max(std::abs(h2.y_new), 1e-12);
      if (err <= c.step_tol) {
        big = h2;  // keep the finer composition
        halved = true;
        accepted = true;
        break;
      }
      h *= 0.5;
      if (h < c.base_h * 1e-12)
        throw NumericalError("adaptive step underflow: local error will not settle");
      big = rk4_step(rhs, p.t, p.y, p.S, p.dS, p.delta, p.q, h);
    }
    if (!accepted)
      throw NumericalError("adaptive stepping rejected 40 halvings in a row");
  }

  // monotone contraction of Im along forward trajectories
  if (rhs.sgn < 0 && !(big.y_new.imag() < p.y.imag()))
    throw NumericalError("Im xi failed to decrease along a forward characteristic");

  if (c.stop_level > 0.0 && big.y_new.imag() < c.stop_level) {
    const Cplx f0 = rhs.sgn * p.S;
    const Cplx f1 = rhs.sgn * big.S_new;
    const Crossing cr =
        locate_crossing(p.t, h, p.y, f0, big.y_new, f1, c.stop_level, c.stop_tol);
    p.stopped = true;
    p.done = true;
    p.tau = cr.tau;
    p.xi_tau = cr.xi_tau;
    // quadratures: full-step accumulation scaled to the crossing fraction
    const double frac = (cr.tau - p.t) / h;
    p.q.drift += (big.q_new.drift - p.q.drift) * frac;
    p.q.inv2 += (big.q_new.inv2 - p.q.inv2) * frac;
    p.t = cr.tau;
    p.y = cr.xi_tau;
    p.S_tau = rhs.S(cr.tau, cr.xi_tau, nullptr);
    p.S = p.S_tau;
    return false;
  }

  if (c.record) {
    // record the composition actually accepted so replays integrate the
    // identical map (two half entries when the fine solution was kept)
    if (halved) {
      c.record->steps.emplace_back(p.t, 0.5 * h);
      c.record->steps.emplace_back(p.t + 0.5 * h, 0.5 * h);
    } else {
      c.record->steps.emplace_back(p.t, h);
    }
  }
  p.t += h;
  p.y = big.y_new;
  p.S = big.S_new;
  p.delta = big.delta_new;
  p.q = big.q_new;
  if (rhs.want_delta) p.dS = big.dS_new;
  if (t_end - p.t <= c.t_snap) {
    p.t = t_end;
    return false;
  }
  return true;
}

void init_point(const Rhs& rhs, PointState& p, Cplx z0) {
  p.z0 = z0;
  p.y = z0;
  p.t = 0.0;
  Cplx dS;
  p.S = rhs.S(0.0, z0, rhs.want_delta ? &dS : nullptr);
  p.dS = dS;
}

}  // namespace

// ======================== integrate_characteristic ========================

CharacteristicTrajectory integrate_characteristic(FlowLab& lab, UpperHalfPoint z0,
                                                  const std::vector<int>& track_sites) {
  const double eta = lab.eta();
  const double T = lab.total_time();
  if (!(z0.im > eta / 2.0))
    throw ConfigError("integrate_characteristic: need Im z0 > eta/2");

  CharacteristicTrajectory traj;
  traj.z0 = z0;
  traj.tracked_sites = track_sites;

  SEvaluator& ev = lab.evaluator();
  const bool g = !track_sites.empty();
  Rhs rhs{&ev, -1.0, T, false, false};

  if (T <= 0.0) {  // degenerate path: nothing moves
    const Cplx S0 = stieltjes_potential(lab.potential(), z0);
    traj.samples.push_back({0.0, z0, S0});
    traj.drift_integral.push_back(0.0);
    traj.inv_im_sq_integral.push_back(0.0);
    return traj;
  }

  const auto& opt = lab.options();
  StepControls c{};
  c.base_h = T / double(opt.base_divisions);
  c.eta = eta;
  c.stop_level = eta / 2.0;
  c.stop_tol = opt.stop_tol_factor * eta * 0.1;
  c.adaptive = opt.adaptive;
  c.step_tol = opt.step_tol;
  c.dyadic = opt.evaluator == FlowOptions::Evaluator::exact;
  c.t_snap = T * 1e-13;

  const int M = lab.path().M();
  PointState p;

  std::vector<Cplx> grow;
  auto record = [&] {
    traj.samples.push_back({p.t, p.y, p.S});
    traj.drift_integral.push_back(p.q.drift);
    traj.inv_im_sq_integral.push_back(p.q.inv2);
    if (g && ev.has_weights()) {
      ev.g_sites(p.t, p.y, track_sites, grow);
      traj.G_along.push_back(grow);
    }
  };

  for (int k = 0; k < M && !p.done; ++k) {
    ev.enter_interval(k, g);
    const double t_end = ev.grid_time(k + 1);
    if (k == 0) {
      init_point(rhs, p, z0);
      record();
    }
    c.interval_len = t_end - ev.grid_time(k);
    bool more = true;
    while (more) {
      const double t_prev = p.t;
      more = advance_point(rhs, p, t_end, c, nullptr);
      if (p.t != t_prev) record();
    }
    ev.leave_interval(true);
  }
  if (p.stopped) {
    traj.stopped = true;
    traj.tau_estimate = p.tau;
  }
  return traj;
}

// ======================== build_grid ======================================

GridSpec build_grid(const ModelParams& params, const Potential& V, double theta,
                    double gamma, const GridOptions& gopt) {
  params.validate();
  const double eta = params.eta(), T = params.T();
  const double N = double(params.N);

  GridSpec gs;
  const Interval supp{V.sorted[0] - 0.5, V.sorted[V.N() - 1] + 0.5};
  gs.Upsilon = probe_sup_abs_s0(V, eta, supp) + 4.0 / std::sqrt(N * eta);
  const double r1 = gs.Upsilon * T * eta * eta;
  const double r2 = std::pow(N, -2.0 * theta) * eta * eta * eta;
  const double r3 = std::pow(N, -(1.0 + 2.0 * gamma)) * eta * eta * eta;
  gs.r = std::min({r1, r2, r3});
  gs.spacing = std::sqrt(2.0) * gs.r;

  const Interval W = gopt.window;
  const double reach = T / eta;
  gs.re_lo = W.lo - reach;
  gs.re_hi = W.hi + reach;
  gs.im_lo = eta;
  gs.im_hi = 1.0 + reach;
  {
    std::ostringstream os;
    os << "{Im z > " << eta << "} intersected with dist(z, W + i[eta,1]) <= " << reach;
    gs.covered_region = os.str();
  }

  const double nx = std::ceil((gs.re_hi - gs.re_lo) / gs.spacing);
  const double ny = std::ceil((gs.im_hi - gs.im_lo) / gs.spacing);
  gs.cardinality = nx * ny;
  gs.covering_constant = gs.cardinality * (eta * gs.r) * (eta * gs.r);

  auto point_at = [&](double i, double j) -> Cplx {
    return {gs.re_lo + (i + 0.5) * gs.spacing, gs.im_lo + (j + 0.5) * gs.spacing};
  };

  if (gs.cardinality <= gopt.budget) {
    const std::int64_t inx = std::int64_t(nx), iny = std::int64_t(ny);
    gs.points.reserve(std::size_t(inx * iny));
    for (std::int64_t j = 0; j < iny; ++j)
      for (std::int64_t i = 0; i < inx; ++i)
        gs.points.push_back(point_at(double(i), double(j)));
    gs.subsampled = false;
    return gs;
  }
  if (!gopt.allow_subsample) {
    std::ostringstream os;
    os << "grid cardinality " << gs.cardinality << " exceeds budget " << gopt.budget
       << "; raise alpha or shrink the window (or allow subsampling)";
    throw ConfigError(os.str());
  }

  gs.subsampled = true;
  gs.subsample_seed = gopt.subsample_seed;
  Stream s(derive(gopt.subsample_seed, "grid-subsample"));
  if (gopt.policy == GridOptions::Policy::uniform) {
    const int want = gopt.subsample_size;
    gs.points.reserve(std::size_t(want));
    for (int q = 0; q < want; ++q) {
      const double i = std::floor(s.uniform01(2 * std::uint64_t(q)) * nx);
      const double j = std::floor(s.uniform01(2 * std::uint64_t(q) + 1) * ny);
      gs.points.push_back(point_at(std::min(i, nx - 1), std::min(j, ny - 1)));
    }
  } else {
    // ladder: geometric Im levels crossed with window-interior Re values,
    // snapped onto the lattice — samples the boundary layer where the sup
    // statistics live (a uniform draw essentially never lands there).
    const int n_re = 5;
    std::vector<double> res;
    for (int q = 0; q < n_re; ++q)
      res.push_back(W.lo + (q + 0.5) * W.width() / double(n_re));
    for (double level = eta; level <= gs.im_hi; level *= 2.0) {
      double j = std::floor((level - gs.im_lo) / gs.spacing - 0.5);
      j = std::clamp(j, 0.0, ny - 1);
      for (double re : res) {
        double i = std::floor((re - gs.re_lo) / gs.spacing - 0.5);
        i = std::clamp(i, 0.0, nx - 1);
        gs.points.push_back(point_at(i, j));
        if (int(gs.points.size()) >= gopt.subsample_size) break;
      }
      if (int(gs.points.size()) >= gopt.subsample_size) break;
    }
  }
  return gs;
}

// ======================== preimage ========================================

PreimageResult find_preimage_detailed(FlowLab& lab, UpperHalfPoint z) {
  const double T = lab.total_time();
  SEvaluator& ev = lab.evaluator();
  if (T <= 0.0) return {Cplx(z), 0.0, 0};
  const auto& opt = lab.options();
  const double eta = lab.eta();
  const int M = lab.path().M();

  StepControls c{};
  c.base_h = T / double(opt.base_divisions);
  c.eta = eta;
  c.stop_level = -1.0;  // no stopping on either leg
  c.stop_tol = 0.0;
  c.adaptive = opt.adaptive;
  c.step_tol = opt.step_tol;
  c.dyadic = opt.evaluator == FlowOptions::Evaluator::exact;
  c.t_snap = T * 1e-13;

  // Backward leg: dzeta/ds = +S(T - s, zeta), intervals traversed in reverse.
  Rhs back{&ev, +1.0, T, true, false};
  PointState p;
  init_point(back, p, z);
  for (int k = M - 1; k >= 0; --k) {
    ev.enter_interval(k, false);
    const double s_end = T - ev.grid_time(k);
    c.interval_len = s_end - (T - ev.grid_time(k + 1));
    while (advance_point(back, p, s_end, c, nullptr)) {
    }
    ev.leave_interval(true);
  }
  Cplx w = p.y;

  // Forward shots with Newton refinement; the first shot freezes the step
  // pattern so later shots sample the identical realized field.
  Rhs fwd{&ev, -1.0, T, false, true};
  StepPattern pattern;
  PreimageResult out;
  const int max_newton = 12;
  double resid = 0.0;
  for (int it = 0; it < max_newton; ++it) {
    PointState q;
    init_point(fwd, q, w);
    StepControls cc = c;
    StepPattern rec;
    std::size_t pos = 0;
    if (it == 0) {
      cc.record = &rec;
    } else {
      cc.replay = &pattern;
    }
    for (int k = 0; k < M; ++k) {
      ev.enter_interval(k, false);
      const double t_end = ev.grid_time(k + 1);
      cc.interval_len = t_end - ev.grid_time(k);
      while (advance_point(fwd, q, t_end, cc, &pos)) {
      }
      ev.leave_interval(true);
    }
    if (it == 0) pattern = std::move(rec);
    const Cplx F = q.y - Cplx(z);
    resid = std::abs(F);
    out.newton_iterations = it;
    if (resid <= 1e-8) break;
    if (std::abs(q.delta) < 1e-300)
      throw NumericalError("preimage shooting: vanishing variational derivative");
    w -= F / q.delta;
    if (!(w.imag() > 0.0))
      throw NumericalError("preimage shooting left the upper half-plane");
  }
  if (resid > 1e-8) {
    std::ostringstream os;
    os << "preimage shooting failed to converge: residual " << resid << " at z=("
       << z.re << "," << z.im << ")";
    throw NumericalError(os.str());
  }
  out.w = w;
  out.residual = resid;
  return out;
}

UpperHalfPoint find_preimage(FlowLab& lab, UpperHalfPoint z) {
  return UpperHalfPoint(find_preimage_detailed(lab, z).w);
}

// ======================== flow events =====================================

FlowEvents track_flow_events(FlowLab& lab, const GridSpec& grid, double ell,
                             const std::vector<int>& sites, double beta, bool track_g) {
  const double T = lab.total_time();
  const double eta = lab.eta();
  const double N = double(lab.path().params.N);
  SEvaluator& ev = lab.evaluator();
  const auto& opt = lab.options();

  FlowEvents fe;
  fe.a_s_threshold = 4.0 / std::pow(N * eta, beta);
  fe.a_g_threshold = std::pow(N, ell);
  fe.n_points = int(grid.points.size());

  std::vector<int> tracked = sites;  // empty = all sites

  std::vector<PointState> pts(grid.points.size());
  std::vector<Cplx> S0(grid.points.size());
  std::vector<Eigen::VectorXd> img0(grid.points.size());

  Rhs rhs{&ev, -1.0, T, false, false};
  fe.a_g_statistic = track_g ? 1.0 : 0.0;  // the t = 0 ratio is exactly 1

  if (T <= 0.0) {
    fe.a_s_statistic = 0.0;
    fe.a_s_occurred = fe.a_s_statistic > fe.a_s_threshold;
    fe.a_g_occurred = fe.a_g_statistic > fe.a_g_threshold;
    return fe;
  }

  StepControls c{};
  c.base_h = T / double(opt.base_divisions);
  c.eta = eta;
  c.stop_level = eta / 2.0;
  c.stop_tol = opt.stop_tol_factor * eta * 0.1;
  c.adaptive = opt.adaptive;
  c.step_tol = opt.step_tol;
  c.dyadic = opt.evaluator == FlowOptions::Evaluator::exact;
  c.t_snap = T * 1e-13;

  Eigen::VectorXd img;
  auto g_ratio_update = [&](std::size_t pi, const PointState& p) {
    if (!track_g || !ev.has_weights()) return;
    ev.im_g_all(p.t, p.y, img);
    const Eigen::VectorXd& base = img0[pi];
    double best = 0.0;
    if (tracked.empty()) {
      for (int x = 0; x < int(img.size()); ++x) {
        const double ratio = img[x] / base[x];
        if (ratio > best) best = ratio;
      }
    } else {
      for (int x : tracked) {
        const double ratio = img[x] / base[x];
        if (ratio > best) best = ratio;
      }
    }
    fe.a_g_statistic = std::max(fe.a_g_statistic, best);
  };

  const int M = lab.path().M();
  for (int k = 0; k < M; ++k) {
    ev.enter_interval(k, track_g);
    const double t_end = ev.grid_time(k + 1);
    c.interval_len = t_end - ev.grid_time(k);
    for (std::size_t pi = 0; pi < pts.size(); ++pi) {
      PointState& p = pts[pi];
      if (k == 0) {
        const Cplx z0 = grid.points[pi];
        init_point(rhs, p, z0);
        S0[pi] = p.S;  // S_0(z) from the node-0 spectrum = sorted V exactly
        if (track_g) {
          // baseline Im G_0(x, z0) = Im 1/(V_x - z0)
          Eigen::VectorXd& b = img0[pi];
          const auto& V = lab.potential().values;
          b.resize(V.size());
          const double x0 = z0.real(), y0 = z0.imag();
          for (int x = 0; x < int(V.size()); ++x) {
            const double a = V[x] - x0;
            b[x] = y0 / (a * a + y0 * y0);
          }
        }
      }
      if (p.done) continue;
      // node-time G ratios (all points sit exactly on node k when alive)
      g_ratio_update(pi, p);
      bool more = true;
      while (more) {
        more = advance_point(rhs, p, t_end, c, nullptr);
        const double dev = std::abs(p.S - S0[pi]);
        if (dev > fe.a_s_statistic) fe.a_s_statistic = dev;
        if (p.y.imag() < 4.0 * eta || p.done) g_ratio_update(pi, p);
      }
      if (p.done) {
        fe.max_inv_im_sq_integral = std::max(fe.max_inv_im_sq_integral, p.q.inv2);
      }
    }
    ev.leave_interval(false);
  }
  for (auto& p : pts)
    fe.max_inv_im_sq_integral = std::max(fe.max_inv_im_sq_integral, p.q.inv2);

  fe.a_s_occurred = fe.a_s_statistic > fe.a_s_threshold;
  fe.a_g_occurred = fe.a_g_statistic > fe.a_g_threshold;
  fe.audit_count = lab.audit_count();
  fe.audit_max_rel = lab.audit_max_rel();
  return fe;
}

// ======================== subordination ===================================

SubordinationResult subordination_check(FlowLab& lab, UpperHalfPoint z,
                                        const std::vector<int>& sites) {
  SubordinationResult out;
  out.z = z;
  const PreimageResult pre = find_preimage_detailed(lab, z);
  out.w = pre.w;

  const SpectralData& spec = lab.terminal_spectral();
  const auto& V = lab.potential().values;
  std::vector<int> xs = sites;
  if (xs.empty()) {
    xs.resize(std::size_t(V.size()));
    for (int i = 0; i < int(V.size()); ++i) xs[std::size_t(i)] = i;
  }
  out.sites = xs;
  out.rel_errors.reserve(xs.size());
  for (int x : xs) {
    const Cplx gT = local_resolvent(spec, x, z).value;
    const Cplx g0 = 1.0 / (V[x] - out.w);
    out.rel_errors.push_back(std::abs(gT - g0) / std::abs(g0));
  }
  return out;
}

}  // namespace rpflow
