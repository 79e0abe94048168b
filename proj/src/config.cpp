#include "rpflow/config.hpp"

#include <algorithm>
#include <cctype>
#include <cstdio>
#include <fstream>
#include <sstream>

namespace rpflow {

namespace {

std::string trim(const std::string& s) {
  std::size_t b = 0, e = s.size();
  while (b < e && std::isspace(static_cast<unsigned char>(s[b]))) ++b;
  while (e > b && std::isspace(static_cast<unsigned char>(s[e - 1]))) --e;
  return s.substr(b, e - b);
}

std::string fmt_double(double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

std::vector<std::string> split_list(const std::string& s) {
  std::vector<std::string> out;
  std::string cur;
  for (char ch : s) {
    if (ch == ',') {
      out.push_back(trim(cur));
      cur.clear();
    } else {
      cur.push_back(ch);
    }
  }
  const std::string last = trim(cur);
  if (!last.empty() || !out.empty()) out.push_back(last);
  return out;
}

struct Parser {
  std::vector<std::string> errors;

  bool to_double(const std::string& key, const std::string& v, double* out) {
    try {
      std::size_t pos = 0;
      const double d = std::stod(v, &pos);
      if (pos != v.size()) throw std::invalid_argument(v);
      *out = d;
      return true;
    } catch (const std::exception&) {
      errors.push_back(key + ": expected a number, got '" + v + "'");
      return false;
    }
  }
  bool to_int(const std::string& key, const std::string& v, int* out) {
    try {
      std::size_t pos = 0;
      const long d = std::stol(v, &pos);
      if (pos != v.size()) throw std::invalid_argument(v);
      *out = int(d);
      return true;
    } catch (const std::exception&) {
      errors.push_back(key + ": expected an integer, got '" + v + "'");
      return false;
    }
  }
  bool to_u64(const std::string& key, const std::string& v, std::uint64_t* out) {
    try {
      std::size_t pos = 0;
      const unsigned long long d = std::stoull(v, &pos);
      if (pos != v.size()) throw std::invalid_argument(v);
      *out = d;
      return true;
    } catch (const std::exception&) {
      errors.push_back(key + ": expected an unsigned integer, got '" + v + "'");
      return false;
    }
  }
  bool to_bool(const std::string& key, const std::string& v, bool* out) {
    if (v == "true" || v == "1") {
      *out = true;
      return true;
    }
    if (v == "false" || v == "0") {
      *out = false;
      return true;
    }
    errors.push_back(key + ": expected true/false, got '" + v + "'");
    return false;
  }
};

}  // namespace

std::string to_string(ExperimentKind k) {
  switch (k) {
    case ExperimentKind::localization: return "localization";
    case ExperimentKind::flow_events: return "flow_events";
    case ExperimentKind::subordination: return "subordination";
    case ExperimentKind::concentration: return "concentration";
    case ExperimentKind::regularity: return "regularity";
    case ExperimentKind::scaling_sweep: return "scaling_sweep";
  }
  return "unknown";
}

ExperimentConfig parse_config_text(const std::string& text) {
  ExperimentConfig c;
  Parser p;
  std::map<std::string, std::string> seen;

  std::istringstream in(text);
  std::string line;
  int lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    const std::size_t hash = line.find('#');
    if (hash != std::string::npos) line.erase(hash);
    line = trim(line);
    if (line.empty()) continue;
    const std::size_t eq = line.find('=');
    if (eq == std::string::npos) {
      p.errors.push_back("line " + std::to_string(lineno) + ": expected key = value");
      continue;
    }
    const std::string key = trim(line.substr(0, eq));
    const std::string val = trim(line.substr(eq + 1));
    if (key.empty()) {
      p.errors.push_back("line " + std::to_string(lineno) + ": empty key");
      continue;
    }
    if (seen.count(key)) {
      p.errors.push_back(key + ": set more than once");
      continue;
    }
    seen[key] = val;
  }

  for (const auto& [key, val] : seen) {
    if (key == "experiment") {
      std::string v = val;
      std::replace(v.begin(), v.end(), '-', '_');
      if (v == "localization") c.experiment = ExperimentKind::localization;
      else if (v == "flow_events") c.experiment = ExperimentKind::flow_events;
      else if (v == "subordination") c.experiment = ExperimentKind::subordination;
      else if (v == "concentration") c.experiment = ExperimentKind::concentration;
      else if (v == "regularity") c.experiment = ExperimentKind::regularity;
      else if (v == "scaling_sweep") c.experiment = ExperimentKind::scaling_sweep;
      else
        p.errors.push_back(
            "experiment: unknown kind '" + val +
            "' (expected localization, flow_events, subordination, concentration, "
            "regularity or scaling_sweep)");
    } else if (key == "N") {
      p.to_int(key, val, &c.model.N);
    } else if (key == "delta") {
      p.to_double(key, val, &c.model.delta);
    } else if (key == "alpha") {
      p.to_double(key, val, &c.model.alpha);
    } else if (key == "kappa") {
      p.to_double(key, val, &c.exponents.kappa);
    } else if (key == "theta") {
      p.to_double(key, val, &c.exponents.theta);
    } else if (key == "gamma") {
      p.to_double(key, val, &c.exponents.gamma);
    } else if (key == "ell") {
      p.to_double(key, val, &c.exponents.ell);
    } else if (key == "beta") {
      p.to_double(key, val, &c.exponents.beta);
    } else if (key == "window_lo") {
      p.to_double(key, val, &c.window.lo);
    } else if (key == "window_hi") {
      p.to_double(key, val, &c.window.hi);
    } else if (key == "density") {
      try {
        c.density = parse_density(val);
      } catch (const ConfigError& e) {
        p.errors.push_back(e.what());
      }
    } else if (key == "ensemble") {
      p.to_int(key, val, &c.ensemble);
    } else if (key == "master_seed") {
      p.to_u64(key, val, &c.master_seed);
    } else if (key == "grid_budget") {
      p.to_double(key, val, &c.grid_budget);
    } else if (key == "output_dir") {
      c.output_dir = val;
    } else if (key == "grid_size") {
      p.to_int(key, val, &c.grid_size);
    } else if (key == "evaluator") {
      if (val == "interp") c.flow.evaluator = FlowOptions::Evaluator::interp;
      else if (val == "exact") c.flow.evaluator = FlowOptions::Evaluator::exact;
      else p.errors.push_back("evaluator: expected interp or exact, got '" + val + "'");
    } else if (key == "base_divisions") {
      p.to_int(key, val, &c.flow.base_divisions);
    } else if (key == "adaptive") {
      p.to_bool(key, val, &c.flow.adaptive);
    } else if (key == "step_tol") {
      p.to_double(key, val, &c.flow.step_tol);
    } else if (key == "stop_tol_factor") {
      p.to_double(key, val, &c.flow.stop_tol_factor);
    } else if (key == "audit_fraction") {
      p.to_double(key, val, &c.flow.audit_fraction);
    } else if (key == "audit_budget") {
      p.to_int(key, val, &c.flow.audit_budget);
    } else if (key == "subsample_size") {
      p.to_int(key, val, &c.subsample_size);
    } else if (key == "subsample_policy") {
      if (val == "uniform") c.subsample_policy = GridOptions::Policy::uniform;
      else if (val == "ladder") c.subsample_policy = GridOptions::Policy::ladder;
      else
        p.errors.push_back("subsample_policy: expected uniform or ladder, got '" + val +
                           "'");
    } else if (key == "sites") {
      if (val == "all") {
        c.sites.clear();
      } else if (val == "none") {
        c.sites.clear();
        c.track_g = false;
      } else {
        for (const auto& tok : split_list(val)) {
          int site = 0;
          if (p.to_int("sites", tok, &site)) c.sites.push_back(site);
        }
      }
    } else if (key == "track_g") {
      p.to_bool(key, val, &c.track_g);
    } else if (key == "dump_trajectories") {
      p.to_int(key, val, &c.dump_trajectories);
    } else if (key == "sweep_N") {
      for (const auto& tok : split_list(val)) {
        int n = 0;
        if (p.to_int("sweep_N", tok, &n)) c.sweep_N.push_back(n);
      }
    } else if (key == "zeta") {
      p.to_double(key, val, &c.zeta);
    } else if (key == "mu_grid") {
      c.mu_grid.clear();
      for (const auto& tok : split_list(val)) {
        double m = 0;
        if (p.to_double("mu_grid", tok, &m)) c.mu_grid.push_back(m);
      }
    } else if (key == "J_lo") {
      p.to_double(key, val, &c.J.lo);
    } else if (key == "J_hi") {
      p.to_double(key, val, &c.J.hi);
    } else if (key == "epsilon") {
      p.to_double(key, val, &c.epsilon);
    } else if (key == "bulk_fraction") {
      p.to_double(key, val, &c.bulk_fraction);
    } else {
      p.errors.push_back("unknown key '" + key + "'");
    }
  }

  if (!p.errors.empty()) {
    std::string msg = "config errors:";
    for (const auto& e : p.errors) msg += "\n  - " + e;
    throw ConfigError(msg);
  }

  c.exponents = c.exponents.resolved(c.model.delta);

  // canonical view: every field, formatted deterministically
  c.raw.clear();
  c.raw["experiment"] = to_string(c.experiment);
  c.raw["N"] = std::to_string(c.model.N);
  c.raw["delta"] = fmt_double(c.model.delta);
  c.raw["alpha"] = fmt_double(c.model.alpha);
  c.raw["kappa"] = fmt_double(c.exponents.kappa);
  c.raw["theta"] = fmt_double(c.exponents.theta);
  c.raw["gamma"] = fmt_double(c.exponents.gamma);
  c.raw["ell"] = fmt_double(c.exponents.ell);
  c.raw["beta"] = fmt_double(c.exponents.beta);
  c.raw["window_lo"] = fmt_double(c.window.lo);
  c.raw["window_hi"] = fmt_double(c.window.hi);
  c.raw["density"] = c.density.id();
  c.raw["ensemble"] = std::to_string(c.ensemble);
  c.raw["master_seed"] = std::to_string(c.master_seed);
  c.raw["grid_budget"] = fmt_double(c.grid_budget);
  c.raw["grid_size"] = std::to_string(c.grid_size);
  c.raw["evaluator"] =
      c.flow.evaluator == FlowOptions::Evaluator::interp ? "interp" : "exact";
  c.raw["base_divisions"] = std::to_string(c.flow.base_divisions);
  c.raw["adaptive"] = c.flow.adaptive ? "true" : "false";
  c.raw["step_tol"] = fmt_double(c.flow.step_tol);
  c.raw["stop_tol_factor"] = fmt_double(c.flow.stop_tol_factor);
  c.raw["audit_fraction"] = fmt_double(c.flow.audit_fraction);
  c.raw["audit_budget"] = std::to_string(c.flow.audit_budget);
  c.raw["subsample_size"] = std::to_string(c.subsample_size);
  c.raw["subsample_policy"] =
      c.subsample_policy == GridOptions::Policy::uniform ? "uniform" : "ladder";
  {
    std::string s;
    for (int x : c.sites) s += (s.empty() ? "" : ",") + std::to_string(x);
    c.raw["sites"] = s.empty() ? (c.track_g ? "all" : "none") : s;
  }
  c.raw["track_g"] = c.track_g ? "true" : "false";
  c.raw["dump_trajectories"] = std::to_string(c.dump_trajectories);
  {
    std::string s;
    for (int n : c.sweep_N) s += (s.empty() ? "" : ",") + std::to_string(n);
    c.raw["sweep_N"] = s;
  }
  c.raw["zeta"] = fmt_double(c.zeta);
  {
    std::string s;
    for (double m : c.mu_grid) s += (s.empty() ? "" : ",") + fmt_double(m);
    c.raw["mu_grid"] = s;
  }
  c.raw["J_lo"] = fmt_double(c.J.lo);
  c.raw["J_hi"] = fmt_double(c.J.hi);
  c.raw["epsilon"] = fmt_double(c.epsilon);
  c.raw["bulk_fraction"] = fmt_double(c.bulk_fraction);
  return c;
}

ExperimentConfig parse_config_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open config file: " + path);
  std::ostringstream ss;
  ss << in.rdbuf();
  return parse_config_text(ss.str());
}

std::vector<std::string> validate(const ExperimentConfig& c) {
  std::vector<std::string> bad;
  if (c.model.N < 2) bad.push_back("N must be at least 2");
  if (!(c.model.delta > 0.0 && c.model.delta < 1.0))
    bad.push_back("delta must lie in (0, 1)");
  if (!(c.model.alpha > 0.0 && c.model.alpha < 1.0))
    bad.push_back("alpha must lie in (0, 1)");
  const Exponents e = c.exponents.resolved(c.model.delta);
  if (!(e.kappa > 0.0 && e.kappa < 1.0)) bad.push_back("kappa must lie in (0, 1)");
  if (!(e.theta > 0.0 && e.theta < 1.0)) bad.push_back("theta must lie in (0, 1)");
  if (!(e.kappa > c.model.delta && c.model.delta > e.theta))
    bad.push_back("exponent ordering requires kappa > delta > theta");
  if (!(e.gamma > 0.0 && e.gamma < 1.0)) bad.push_back("gamma must lie in (0, 1)");
  if (!(e.ell > 0.0 && e.ell < 1.0)) bad.push_back("ell must lie in (0, 1)");
  if (!(e.beta > 0.0 && e.beta <= 1.0)) bad.push_back("beta must lie in (0, 1]");
  if (!(c.window.lo < c.window.hi)) bad.push_back("window_lo must be below window_hi");
  if (c.ensemble < 1) bad.push_back("ensemble must be at least 1");
  if (!(c.grid_budget >= 1.0)) bad.push_back("grid_budget must be at least 1");
  if (c.grid_size < 1) bad.push_back("grid_size must be at least 1");
  if (c.flow.base_divisions < 1) bad.push_back("base_divisions must be at least 1");
  if (!(c.flow.step_tol > 0.0)) bad.push_back("step_tol must be positive");
  if (!(c.flow.stop_tol_factor > 0.0)) bad.push_back("stop_tol_factor must be positive");
  if (!(c.flow.audit_fraction >= 0.0 && c.flow.audit_fraction <= 1.0))
    bad.push_back("audit_fraction must lie in [0, 1]");
  if (c.flow.audit_budget < 0) bad.push_back("audit_budget must be non-negative");
  if (c.subsample_size < 1) bad.push_back("subsample_size must be at least 1");
  for (int s : c.sites)
    if (s < 0 || s >= c.model.N) {
      bad.push_back("sites entries must lie in [0, N)");
      break;
    }
  if (c.dump_trajectories < 0) bad.push_back("dump_trajectories must be non-negative");
  if (c.experiment == ExperimentKind::scaling_sweep) {
    std::vector<int> ns = c.sweep_N;
    std::sort(ns.begin(), ns.end());
    ns.erase(std::unique(ns.begin(), ns.end()), ns.end());
    if (ns.size() < 3) bad.push_back("scaling_sweep needs at least 3 distinct sweep_N");
    if (!ns.empty() && ns.front() < 2) bad.push_back("sweep_N entries must be at least 2");
  }
  if (!(c.zeta >= 0.0 && c.zeta <= 1.0)) bad.push_back("zeta must lie in [0, 1]");
  if (c.mu_grid.empty()) bad.push_back("mu_grid must not be empty");
  for (double m : c.mu_grid)
    if (!(m > 0.0)) {
      bad.push_back("mu_grid thresholds must be positive");
      break;
    }
  if (!(c.J.lo < c.J.hi)) bad.push_back("J_lo must be below J_hi");
  if (!(c.epsilon > 0.0)) bad.push_back("epsilon must be positive");
  if (!(c.bulk_fraction > 0.0 && c.bulk_fraction <= 1.0))
    bad.push_back("bulk_fraction must lie in (0, 1]");
  return bad;
}

std::string ExperimentConfig::hash() const {
  // FNV-1a over the canonical sorted view, versioned so cached ensembles are
  // invalidated when the format changes.
  std::uint64_t h = 1469598103934665603ull;
  auto mix = [&h](const std::string& s) {
    for (unsigned char ch : s) {
      h ^= ch;
      h *= 1099511628211ull;
    }
  };
  mix("rpflow-config-v1");
  for (const auto& [k, v] : raw) {
    mix(k);
    mix("=");
    mix(v);
    mix("\n");
  }
  char buf[20];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(h));
  return buf;
}

std::uint64_t realization_seed(std::uint64_t master, std::string_view purpose, int index) {
  return derive(derive(master, purpose), std::uint64_t(index));
}

}  // namespace rpflow
