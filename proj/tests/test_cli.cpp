#include <cmath>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

#include "doctest.h"
#include "qphase/config.hpp"
#include "qphase/errors.hpp"
#include "qphase/grid.hpp"
#include "qphase/moments.hpp"
#include "qphase/runner.hpp"

using namespace qphase;
namespace fs = std::filesystem;

namespace {

constexpr const char* kHeader =
    "step,time,l1_mean,l1_stderr,centroid_norm,centroid_norm_stderr,"
    "liouvillian_loss,liouvillian_loss_stderr,n1_mean,n1_stderr,residual,"
    "clamp_count";

fs::path fresh_dir(const std::string& name) {
  fs::path p = fs::temp_directory_path() / "qphase_cli_tests" / name;
  fs::remove_all(p);
  fs::create_directories(p);
  return p;
}

std::string slurp(const fs::path& p) {
  std::ifstream f(p, std::ios::binary);
  REQUIRE(bool(f));
  std::stringstream buf;
  buf << f.rdbuf();
  return buf.str();
}

std::vector<std::string> lines_of(const fs::path& p) {
  std::vector<std::string> out;
  std::istringstream in(slurp(p));
  std::string line;
  while (std::getline(in, line)) out.push_back(line);
  return out;
}

std::vector<std::string> fields_of(const std::string& line) {
  std::vector<std::string> out;
  size_t start = 0;
  while (true) {
    size_t comma = line.find(',', start);
    if (comma == std::string::npos) {
      out.push_back(line.substr(start));
      break;
    }
    out.push_back(line.substr(start, comma - start));
    start = comma + 1;
  }
  return out;
}

const char* kSmokeText = R"({
  "model": {"kind": "harmonic", "wells": 1, "omega": 1.0, "gamma": 1.0, "nbar": 0.5},
  "method": "euler-kl",
  "flow": {"layers": 2, "hidden": 4},
  "euler": {"dt": 0.01, "t_end": 0.03, "epochs_per_step": 5, "batch": 50, "lr": 0.001},
  "metrics": {"cadence": 1, "samples": 256, "list": ["l1", "centroid", "liouvillian", "n1"]},
  "seed": 3
})";

}  // namespace

TEST_SUITE("cli") {

TEST_CASE("drawn parameters are deterministic and in range") {
  const char* text = R"({
    "model": {"kind": "harmonic", "wells": 3, "omega": "draw", "gamma": "draw", "nbar": "draw"},
    "param_seed": 7
  })";
  RunConfig a = parse_config_text(text);
  RunConfig b = parse_config_text(text);
  for (int w = 0; w < 3; ++w) {
    CHECK(a.model.omega[w] >= 0.5);
    CHECK(a.model.omega[w] < 1.5);
    CHECK(a.model.gamma[w] >= 0.5);
    CHECK(a.model.gamma[w] < 1.5);
    CHECK(a.model.nbar[w] >= 3.0);
    CHECK(a.model.nbar[w] < 7.0);
    CHECK(a.model.omega[w] == b.model.omega[w]);
    CHECK(a.model.gamma[w] == b.model.gamma[w]);
    CHECK(a.model.nbar[w] == b.model.nbar[w]);
  }
  std::string other = text;
  other.replace(other.find("\"param_seed\": 7"), 15, "\"param_seed\": 8");
  RunConfig c = parse_config_text(other);
  CHECK(c.model.omega[0] != a.model.omega[0]);
}

TEST_CASE("bad configs fail with pointed messages") {
  CHECK_THROWS_AS(parse_config_text("{\"nonsense\": 1}"), ConfigError);
  CHECK_THROWS_AS(parse_config_text("not json"), ConfigError);
  CHECK_THROWS_AS(
      parse_config_text(R"({"model": {"kind": "spins", "wells": 1}})"),
      ConfigError);
  CHECK_THROWS_AS(parse_config_text(R"({
    "model": {"kind": "harmonic", "wells": 1, "omega": 1, "gamma": 1, "nbar": 1},
    "method": "magic"
  })"),
                  ConfigError);
  // pseudo-spectral refuses more than two modes
  CHECK_THROWS_AS(parse_config_text(R"({
    "model": {"kind": "harmonic", "wells": 3, "omega": 1, "gamma": 1, "nbar": 1},
    "method": "pseudo-spectral"
  })"),
                  ConfigError);
  CHECK_THROWS_AS(parse_config_text(R"({
    "model": {"kind": "harmonic", "wells": 1, "omega": 1, "gamma": 1, "nbar": 1},
    "metrics": {"list": ["entropy"]}
  })"),
                  ConfigError);
  // the closed-form l1 reference only exists for the harmonic model
  CHECK_THROWS_AS(parse_config_text(R"({
    "model": {"kind": "bosonic-chain", "wells": 2, "hopping": 1.0, "gamma": [1, 0]},
    "init": {"type": "bec", "n_total": 2},
    "metrics": {"list": ["l1"]}
  })"),
                  ConfigError);
  // condensate initial states belong to the two well chain
  CHECK_THROWS_AS(parse_config_text(R"({
    "model": {"kind": "harmonic", "wells": 1, "omega": 1, "gamma": 1, "nbar": 1},
    "init": {"type": "bec", "n_total": 2}
  })"),
                  ConfigError);
}

TEST_CASE("rendered configs parse back to the same run") {
  const char* text = R"({
    "model": {"kind": "harmonic", "wells": 2, "omega": "draw", "gamma": "draw", "nbar": "draw"},
    "param_seed": 11,
    "method": "tdvp",
    "tdvp": {"dt": 0.02, "t_end": 1.0, "batch": 123, "shift": 0.05, "centered": true},
    "seed": 9,
    "out": "somewhere"
  })";
  RunConfig a = parse_config_text(text);
  RunConfig b = parse_config_text(render_config(a));
  CHECK(b.method == Method::Tdvp);
  CHECK(b.model.wells == 2);
  for (int w = 0; w < 2; ++w) {
    CHECK(a.model.omega[w] == b.model.omega[w]);
    CHECK(a.model.gamma[w] == b.model.gamma[w]);
    CHECK(a.model.nbar[w] == b.model.nbar[w]);
  }
  CHECK(a.seed == b.seed);
  CHECK(a.param_seed == b.param_seed);
  CHECK(b.tdvp.batch_n == 123);
  CHECK(b.tdvp.centered);
  CHECK((a.init.mean - b.init.mean).cwiseAbs().maxCoeff() == 0.0);
  CHECK(b.out_dir == "somewhere");
}

TEST_CASE("a short run produces the full artifact set") {
  fs::path dir = fresh_dir("smoke");
  RunConfig cfg = parse_config_text(kSmokeText);
  cfg.out_dir = dir.string();
  REQUIRE(run_experiment(cfg) == 0);

  CHECK(fs::exists(dir / "config.json"));
  CHECK(fs::exists(dir / "final.flow"));
  CHECK(fs::exists(dir / "final.flow.meta"));
  CHECK(!fs::exists(dir / "FAILED"));

  auto lines = lines_of(dir / "metrics.csv");
  REQUIRE(lines.size() == 5);  // header + t=0 + three steps
  CHECK(lines[0] == kHeader);

  auto row0 = fields_of(lines[1]);
  REQUIRE(row0.size() == 12);
  CHECK(row0[0] == "0");
  CHECK(row0[1] == "0");
  // identity initialization represents the gaussian start exactly
  CHECK(std::stod(row0[2]) < 1e-12);
  CHECK(std::abs(std::stod(row0[4]) - std::sqrt(2.0)) < 0.2);
  CHECK(std::abs(std::stod(row0[8]) - 2.0) < 0.6);
  CHECK(row0[10].empty());  // no optimizer stats before the first step
  CHECK(row0[11].empty());

  auto last = fields_of(lines[4]);
  CHECK(last[0] == "3");
  CHECK(!last[10].empty());
  CHECK(last[11] == "0");

  // byte-identical replay
  fs::path dir2 = fresh_dir("smoke_replay");
  cfg.out_dir = dir2.string();
  REQUIRE(run_experiment(cfg) == 0);
  CHECK(slurp(dir / "metrics.csv") == slurp(dir2 / "metrics.csv"));
}

TEST_CASE("cadence thins rows but keeps the final step") {
  fs::path dir = fresh_dir("cadence");
  RunConfig cfg = parse_config_text(kSmokeText);
  cfg.out_dir = dir.string();
  cfg.euler.t_end = 0.05;
  cfg.metrics.cadence = 2;
  cfg.metrics.checkpoint_cadence = 2;
  REQUIRE(run_experiment(cfg) == 0);

  auto lines = lines_of(dir / "metrics.csv");
  REQUIRE(lines.size() == 5);
  CHECK(fields_of(lines[1])[0] == "0");
  CHECK(fields_of(lines[2])[0] == "2");
  CHECK(fields_of(lines[3])[0] == "4");
  CHECK(fields_of(lines[4])[0] == "5");
  CHECK(fs::exists(dir / "checkpoint_2.flow"));
  CHECK(fs::exists(dir / "checkpoint_2.flow.meta"));
  CHECK(fs::exists(dir / "checkpoint_4.flow"));
  CHECK(!fs::exists(dir / "checkpoint_5.flow"));  // final.flow covers the end
}

TEST_CASE("evaluating the final checkpoint reproduces the last row") {
  fs::path dir = fresh_dir("eval");
  RunConfig cfg = parse_config_text(kSmokeText);
  cfg.out_dir = dir.string();
  REQUIRE(run_experiment(cfg) == 0);
  auto last = fields_of(lines_of(dir / "metrics.csv").back());

  fs::path csv = dir / "eval.csv";
  REQUIRE(run_eval(cfg, (dir / "final.flow").string(), -1.0, csv.string()) == 0);
  auto lines = lines_of(csv);
  REQUIRE(lines.size() == 2);
  CHECK(lines[0] == kHeader);
  auto row = fields_of(lines[1]);
  for (int i = 0; i < 10; ++i) CHECK(row[i] == last[i]);
  CHECK(row[10].empty());  // optimizer stats never apply to a reload

  CHECK_THROWS_AS(
      run_eval(cfg, (dir / "missing.flow").string(), -1.0, csv.string()),
      IoError);

  fs::path bare = dir / "bare.flow";
  fs::copy_file(dir / "final.flow", bare);
  CHECK_THROWS_AS(run_eval(cfg, bare.string(), -1.0, csv.string()), ConfigError);
  CHECK(run_eval(cfg, bare.string(), 0.03, csv.string()) == 0);
}

TEST_CASE("a checkpoint of the wrong width is rejected") {
  fs::path dir = fresh_dir("width");
  RunConfig cfg = parse_config_text(kSmokeText);
  cfg.out_dir = dir.string();
  REQUIRE(run_experiment(cfg) == 0);

  RunConfig wide = parse_config_text(R"({
    "model": {"kind": "harmonic", "wells": 2, "omega": 1.0, "gamma": 1.0, "nbar": 0.5},
    "euler": {"dt": 0.01, "t_end": 0.02, "epochs_per_step": 2, "batch": 50}
  })");
  wide.out_dir = (dir / "wide").string();
  wide.init_checkpoint = (dir / "final.flow").string();
  CHECK_THROWS_AS(run_experiment(wide), ConfigError);
  CHECK_THROWS_AS(
      run_eval(wide, (dir / "final.flow").string(), 0.0, (dir / "x.csv").string()),
      ConfigError);
}

TEST_CASE("condensate runs demand a pretrained start") {
  RunConfig cfg = parse_config_text(R"({
    "model": {"kind": "bosonic-chain", "wells": 2, "hopping": 1.0, "gamma": [1.0, 0.0]},
    "init": {"type": "bec", "n_total": 2},
    "euler": {"dt": 0.01, "t_end": 0.02, "epochs_per_step": 2, "batch": 50},
    "metrics": {"list": ["centroid", "n1"], "samples": 64}
  })");
  cfg.out_dir = fresh_dir("bec_nostart").string();
  CHECK_THROWS_AS(run_experiment(cfg), ConfigError);
}

TEST_CASE("an aborted run leaves a marker and a diagnostic state") {
  fs::path dir = fresh_dir("abort");
  RunConfig cfg = parse_config_text(kSmokeText);
  cfg.out_dir = dir.string();
  // a clamp floor above one clamps every sample, which is a fatal step
  cfg.euler.clamp_floor = 2.0;
  CHECK(run_experiment(cfg) == 1);
  CHECK(fs::exists(dir / "FAILED"));
  CHECK(slurp(dir / "FAILED").find("clamped") != std::string::npos);
  CHECK(fs::exists(dir / "diagnostic.flow"));
  CHECK(lines_of(dir / "metrics.csv").size() == 2);  // header + t=0 only

  // a healthy rerun into the same directory clears the marker
  cfg.euler.clamp_floor = 1e-12;
  REQUIRE(run_experiment(cfg) == 0);
  CHECK(!fs::exists(dir / "FAILED"));
}

TEST_CASE("the spectral path writes grids and matching metrics") {
  fs::path dir = fresh_dir("ps");
  RunConfig cfg = parse_config_text(R"({
    "model": {"kind": "harmonic", "wells": 1, "omega": 1.0, "gamma": 0.5, "nbar": 3.0},
    "method": "pseudo-spectral",
    "ps": {"grid_n": 64, "extent": 8.0, "times": [0.25, 0.5]},
    "metrics": {"samples": 512, "list": ["l1", "centroid"]},
    "seed": 2
  })");
  cfg.out_dir = dir.string();
  REQUIRE(run_experiment(cfg) == 0);

  auto lines = lines_of(dir / "metrics.csv");
  REQUIRE(lines.size() == 4);
  GaussianMomentState init;
  init.mu = cfg.init.mean;
  init.sigma = Mat(cfg.init.var.asDiagonal());
  for (int row = 1; row <= 3; ++row) {
    auto f = fields_of(lines[row]);
    double t = std::stod(f[1]);
    CHECK(std::stod(f[2]) < 0.05);  // within the interpolation budget
    double expect = gaussian_moment_solution(cfg.model, init, t).mu.norm();
    CHECK(std::abs(std::stod(f[4]) - expect) < 0.15);
  }

  GridState final = load_grid((dir / "final.grid").string());
  CHECK(final.n == 64);
  CHECK(std::abs(grid_quadrature(final) - 1.0) < 1e-10);
}

TEST_CASE("reference trajectories carry the closed form moments") {
  fs::path dir = fresh_dir("reference");
  RunConfig cfg = parse_config_text(R"({
    "model": {"kind": "harmonic", "wells": 1, "omega": 1.0, "gamma": 1.0, "nbar": 2.0},
    "euler": {"dt": 0.01, "t_end": 0.05, "epochs_per_step": 2, "batch": 50},
    "metrics": {"cadence": 2, "list": ["centroid", "n1"]}
  })");
  cfg.out_dir = dir.string();
  REQUIRE(run_reference(cfg) == 0);

  auto lines = lines_of(dir / "reference.csv");
  REQUIRE(lines.size() == 5);  // header + steps 0,2,4 + forced final 5
  auto first = fields_of(lines[1]);
  CHECK(std::stod(first[4]) == doctest::Approx(std::sqrt(2.0)));
  CHECK(first[5] == "0");
  CHECK(std::stod(first[8]) == doctest::Approx(2.0));
  auto last = fields_of(lines[4]);
  CHECK(last[0] == "5");
  CHECK(std::stod(last[4]) ==
        doctest::Approx(std::sqrt(2.0) * std::exp(-0.025)).epsilon(1e-9));
  CHECK(first[2].empty());  // no l1 column for a reference trajectory
}

}  // TEST_SUITE
