// Config parsing/validation, the experiment drivers' determinism and
// manifests, report aggregation and the CSV formatting contract.
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include "doctest.h"
#include "json.hpp"
#include "rpflow/csv.hpp"
#include "rpflow/experiments.hpp"

using namespace rpflow;
namespace fs = std::filesystem;

namespace {

std::string slurp(const fs::path& p) {
  std::ifstream f(p, std::ios::binary);
  REQUIRE(f.good());
  std::ostringstream ss;
  ss << f.rdbuf();
  return ss.str();
}

fs::path fresh_dir(const std::string& leaf) {
  const fs::path p = fs::temp_directory_path() / "rpflow-tests" / leaf;
  fs::remove_all(p);
  fs::create_directories(p);
  return p;
}

int count_lines(const std::string& text) {
  int n = 0;
  for (char c : text)
    if (c == '\n') ++n;
  return n;
}

const char* kLocText =
    "experiment = localization\n"
    "N = 60\n"
    "delta = 0.5\n"
    "alpha = 0.5\n"
    "ensemble = 3\n"
    "master_seed = 424242\n";

}  // namespace

TEST_SUITE("harness") {

TEST_CASE("parsing resolves exponent defaults against delta") {
  const ExperimentConfig c = parse_config_text(kLocText);
  CHECK(c.model.N == 60);
  CHECK(c.exponents.kappa == doctest::Approx(0.7).epsilon(1e-15));
  CHECK(c.exponents.theta == doctest::Approx(0.35).epsilon(1e-15));
  CHECK(c.exponents.gamma == doctest::Approx(0.05));
  CHECK(c.exponents.ell == doctest::Approx(0.25));
  CHECK(c.exponents.beta == doctest::Approx(0.5));
  CHECK(validate(c).empty());
  CHECK(!c.raw.empty());
  CHECK(!c.hash().empty());
  // comments, blank lines and inline whitespace are tolerated
  const ExperimentConfig c2 = parse_config_text(
      "# a comment\n\nexperiment=localization\n  N   =  60\ndelta=0.5\n"
      "alpha=0.5\nensemble = 3\nmaster_seed=424242\n");
  CHECK(c2.hash() == c.hash());
}

TEST_CASE("the config hash tracks content, not formatting") {
  const ExperimentConfig a = parse_config_text(kLocText);
  ExperimentConfig b = parse_config_text(kLocText);
  CHECK(a.hash() == b.hash());
  const ExperimentConfig c =
      parse_config_text(std::string(kLocText) + "track_g = false\n");
  CHECK(c.hash() != a.hash());
}

TEST_CASE("parse errors are collected, named and fatal") {
  try {
    parse_config_text(
        "experiment = localization\nN = sixty\nN = 60\nfrobnicate = 1\n");
    FAIL("expected a ConfigError");
  } catch (const ConfigError& e) {
    const std::string msg = e.what();
    CHECK(msg.find("expected an integer") != std::string::npos);
    CHECK(msg.find("set more than once") != std::string::npos);
    CHECK(msg.find("unknown key 'frobnicate'") != std::string::npos);
  }
}

TEST_CASE("validation enforces the exponent ordering and ranges") {
  // delta = 0.8 pushes the default kappa to 1.0, out of range.
  ExperimentConfig c = parse_config_text(
      "experiment = localization\nN = 50\ndelta = 0.8\nalpha = 0.5\n");
  std::vector<std::string> bad = validate(c);
  CHECK(!bad.empty());
  bool mentions_kappa = false;
  for (const auto& b : bad)
    if (b.find("kappa") != std::string::npos) mentions_kappa = true;
  CHECK(mentions_kappa);

  // explicit in-range exponents repair it
  c = parse_config_text(
      "experiment = localization\nN = 50\ndelta = 0.8\nalpha = 0.5\n"
      "kappa = 0.9\ntheta = 0.65\n");
  CHECK(validate(c).empty());

  // ordering violation is reported verbatim
  c = parse_config_text(
      "experiment = localization\nN = 50\ndelta = 0.6\nalpha = 0.5\n"
      "kappa = 0.55\ntheta = 0.3\n");
  bad = validate(c);
  bool ordered = false;
  for (const auto& b : bad)
    if (b == "exponent ordering requires kappa > delta > theta") ordered = true;
  CHECK(ordered);
}

TEST_CASE("per-realization seeds are deterministic and distinct") {
  std::set<std::uint64_t> seen;
  for (int i = 0; i < 200; ++i) seen.insert(realization_seed(9001, "realization", i));
  CHECK(seen.size() == 200);
  CHECK(realization_seed(9001, "realization", 7) ==
        realization_seed(9001, "realization", 7));
  CHECK(realization_seed(9001, "realization", 7) !=
        realization_seed(9002, "realization", 7));
  CHECK(realization_seed(9001, "potential", 7) !=
        realization_seed(9001, "realization", 7));
}

TEST_CASE("runs are reproducible byte-for-byte across thread counts") {
  const ExperimentConfig c = parse_config_text(kLocText);
  const fs::path d1 = fresh_dir("det-a"), d2 = fresh_dir("det-b");
  std::ostringstream log1, log2;
  const RunOutcome o1 = run(c, d1.string(), 1, log1);
  const RunOutcome o2 = run(c, d2.string(), 2, log2);
  CHECK(o1.completed == 3);
  CHECK(o2.completed == 3);
  CHECK(o1.failed == 0);
  for (const char* f : {"localization.csv", "localization_summary.csv"}) {
    INFO("file " << f);
    CHECK(slurp(d1 / f) == slurp(d2 / f));
  }
  // no temp files survive the atomic renames
  for (const auto& ent : fs::recursive_directory_iterator(d1))
    CHECK(ent.path().extension() != ".tmp");
}

TEST_CASE("the manifest records the run's identity and outputs") {
  const ExperimentConfig c = parse_config_text(kLocText);
  const fs::path dir = fresh_dir("manifest");
  std::ostringstream log;
  run(c, dir.string(), 1, log);

  nlohmann::json j;
  std::ifstream f(dir / "manifest.json");
  REQUIRE(f.good());
  f >> j;
  CHECK(j.at("version").get<std::string>() == kVersion);
  CHECK(j.at("config_hash").get<std::string>() == c.hash());
  CHECK(j.at("experiment").get<std::string>() == "localization");
  CHECK(j.at("realization_seeds").size() == 3);
  CHECK(j.at("config").at("N").get<std::string>() == "60");
  CHECK(j.at("failures").empty());
  CHECK(!j.at("phase_seconds").empty());
  bool lists_csv = false;
  for (const auto& out : j.at("outputs"))
    if (out.get<std::string>() == "localization.csv") lists_csv = true;
  CHECK(lists_csv);
}

TEST_CASE("reports aggregate compatible runs and refuse mismatched ones") {
  const ExperimentConfig a = parse_config_text(kLocText);
  const ExperimentConfig b = parse_config_text(
      "experiment = localization\nN = 60\ndelta = 0.5\nalpha = 0.5\n"
      "ensemble = 3\nmaster_seed = 7\n");
  const fs::path da = fresh_dir("rep-a"), db = fresh_dir("rep-b");
  std::ostringstream log;
  run(a, da.string(), 1, log);
  run(b, db.string(), 1, log);

  const fs::path rep = fresh_dir("rep-out");
  report({da.string(), db.string()}, rep.string(), log);
  CHECK(fs::exists(rep / "scaling_summary.csv"));

  // a run with a different delta is not aggregable
  const ExperimentConfig c = parse_config_text(
      "experiment = localization\nN = 60\ndelta = 0.4\nalpha = 0.5\n"
      "ensemble = 3\nmaster_seed = 424242\n");
  const fs::path dc = fresh_dir("rep-c");
  run(c, dc.string(), 1, log);
  try {
    report({da.string(), dc.string()}, fresh_dir("rep-bad").string(), log);
    FAIL("expected a ConfigError");
  } catch (const ConfigError& e) {
    const std::string msg = e.what();
    CHECK(msg.find("differ beyond") != std::string::npos);
    CHECK(msg.find("delta") != std::string::npos);
  }
}

TEST_CASE("a flow-events run produces every advertised table") {
  const ExperimentConfig c = parse_config_text(
      "experiment = flow_events\nN = 40\ndelta = 0.5\nalpha = 0.5\n"
      "ensemble = 2\nmaster_seed = 99\ngrid_size = 2\n"
      "subsample_policy = ladder\nsubsample_size = 6\n"
      "dump_trajectories = 1\n");
  const fs::path dir = fresh_dir("flow-run");
  std::ostringstream log;
  const RunOutcome o = run(c, dir.string(), 1, log);
  CHECK(o.completed == 2);
  CHECK(o.failed == 0);
  for (const char* f : {"events.csv", "grid_summary.csv", "events_summary.csv",
                        "trajectories.csv", "manifest.json"})
    CHECK(fs::exists(dir / f));

  const std::string events = slurp(dir / "events.csv");
  CHECK(events.rfind("run_id,statistic_name,value,threshold,occurred", 0) == 0);
  CHECK(count_lines(events) == 1 + 2 * 2);  // header + two statistics per run

  const std::string traj = slurp(dir / "trajectories.csv");
  CHECK(traj.rfind("run_id,z0_re,z0_im,t,xi_re,xi_im,S_re,S_im,stopped", 0) == 0);
  CHECK(count_lines(traj) > 2);

  const fs::path rep = fresh_dir("flow-rep");
  report({dir.string()}, rep.string(), log);
  CHECK(fs::exists(rep / "events_summary.csv"));
  CHECK(fs::exists(rep / "events.svg"));
}

TEST_CASE("a subordination run reports per-site relative errors") {
  const ExperimentConfig c = parse_config_text(
      "experiment = subordination\nN = 40\ndelta = 0.5\nalpha = 0.5\n"
      "ensemble = 2\nmaster_seed = 31\ngrid_size = 2\nsites = 0,1,2,3\n");
  const fs::path dir = fresh_dir("sub-run");
  std::ostringstream log;
  const RunOutcome o = run(c, dir.string(), 1, log);
  CHECK(o.completed == 2);
  const std::string csv = slurp(dir / "subordination.csv");
  CHECK(csv.rfind("run_id,z_re,z_im,w_re,w_im,site,rel_error", 0) == 0);
  CHECK(count_lines(csv) > 4);
  CHECK(fs::exists(dir / "subordination_summary.csv"));

  const fs::path rep = fresh_dir("sub-rep");
  report({dir.string()}, rep.string(), log);
  CHECK(fs::exists(rep / "subordination_summary.csv"));
  CHECK(fs::exists(rep / "subordination.svg"));
}

TEST_CASE("sample emits the potential and terminal spectrum") {
  const ExperimentConfig c = parse_config_text(
      "experiment = localization\nN = 24\ndelta = 0.5\nalpha = 0.5\n"
      "grid_size = 2\nmaster_seed = 5\n");
  const fs::path dir = fresh_dir("smoke");
  std::ostringstream log;
  sample(c, dir.string(), log);
  const std::string pot = slurp(dir / "potential.csv");
  const std::string spec = slurp(dir / "spectrum.csv");
  CHECK(pot.rfind("site,value", 0) == 0);
  CHECK(spec.rfind("index,lambda", 0) == 0);
  CHECK(count_lines(pot) == 25);
  CHECK(count_lines(spec) == 25);
}

TEST_CASE("doubles round-trip through the CSV format") {
  for (double v : {1.0 / 3.0, 1e-17, -2.5e300, 0.0, 6.02214076e23}) {
    const std::string s = format_double(v);
    CHECK(std::stod(s) == v);
  }
}

TEST_CASE("cells with commas or quotes are escaped on write") {
  const fs::path dir = fresh_dir("csv-escape");
  const fs::path file = dir / "t.csv";
  {
    CsvWriter w(file.string(), {"name", "x"});
    w.cell(std::string("uniform[-1,1]")).cell(2.0).end_row();
    w.cell(std::string("say \"hi\"")).cell(3.0).end_row();
    w.close();
  }
  const std::string text = slurp(file);
  CHECK(text.find("\"uniform[-1,1]\"") != std::string::npos);
  CHECK(text.find("\"say \"\"hi\"\"\"") != std::string::npos);
}

}  // TEST_SUITE
