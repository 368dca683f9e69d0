#include "qphase/runner.hpp"

#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include "json.hpp"
#include "qphase/errors.hpp"
#include "qphase/evolve.hpp"
#include "qphase/flow.hpp"
#include "qphase/grid.hpp"
#include "qphase/metrics.hpp"
#include "qphase/moments.hpp"
#include "qphase/pretrain.hpp"

namespace qphase {
namespace {

namespace fs = std::filesystem;
using nlohmann::json;

// Children of the global seed. Fixed keys keep every consumer independent of
// the others: adding metric draws never perturbs the training trajectory.
enum : std::uint64_t {
  kSeedTrain = 1,
  kSeedMetrics = 2,
  kSeedMh = 3,
  kSeedFlowInit = 4,
  kSeedNll = 5,
  kSeedKl = 6,
};

std::string fmt(double v) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

constexpr const char* kCsvHeader =
    "step,time,l1_mean,l1_stderr,centroid_norm,centroid_norm_stderr,"
    "liouvillian_loss,liouvillian_loss_stderr,n1_mean,n1_stderr,residual,"
    "clamp_count";

struct CsvRow {
  long step = 0;
  double time = 0;
  std::optional<MetricValue> l1, cnorm, lloss, n1;
  std::optional<double> residual;
  std::optional<long> clamp;
};

class CsvFile {
 public:
  explicit CsvFile(const fs::path& path) : out_(path, std::ios::binary) {
    if (!out_) throw IoError("cannot open " + path.string());
    out_ << kCsvHeader << "\n";
    out_.flush();
  }

  void write(const CsvRow& r) {
    std::string s = std::to_string(r.step) + "," + fmt(r.time);
    auto pair = [&](const std::optional<MetricValue>& m) {
      s += ',';
      if (m) s += fmt(m->mean);
      s += ',';
      if (m) s += fmt(m->se);
    };
    pair(r.l1);
    pair(r.cnorm);
    pair(r.lloss);
    pair(r.n1);
    s += ',';
    if (r.residual) s += fmt(*r.residual);
    s += ',';
    if (r.clamp) s += std::to_string(*r.clamp);
    out_ << s << "\n";
    out_.flush();  // keep partial trajectories readable after an abort
  }

 private:
  std::ofstream out_;
};

void write_text(const fs::path& path, const std::string& text) {
  std::ofstream f(path, std::ios::binary);
  if (!f) throw IoError("cannot open " + path.string());
  f << text;
}

void prepare_out_dir(const RunConfig& cfg) {
  fs::create_directories(cfg.out_dir);
  fs::remove(fs::path(cfg.out_dir) / "FAILED");
  write_text(fs::path(cfg.out_dir) / "config.json", render_config(cfg));
}

void mark_failed(const fs::path& out, const std::string& msg) {
  std::ofstream f(out / "FAILED", std::ios::binary);
  f << msg << "\n";
}

void save_checkpoint(const FlowModel& m, const fs::path& path, long step,
                     double t) {
  m.save(path.string());
  json meta{{"step", step}, {"time", t}};
  write_text(fs::path(path.string() + ".meta"), meta.dump(2) + "\n");
}

GaussianMomentState initial_state(const RunConfig& cfg) {
  GaussianMomentState s;
  s.mu = cfg.init.mean;
  s.sigma = Mat(cfg.init.var.asDiagonal());
  return s;
}

FlowModel build_flow(const RunConfig& cfg) {
  FlowConfig fc;
  fc.dim = 2 * cfg.model.wells;
  fc.n_layers = cfg.flow.layers;
  fc.hidden = cfg.flow.hidden;
  fc.s_cap = cfg.flow.s_cap;
  // The coupling layers start as the identity map, so a Gaussian initial
  // condition is represented exactly by putting it in the prior. The BEC
  // state keeps a standard-normal prior and is learned by pretraining.
  if (cfg.init.kind == InitSpec::Kind::Gaussian)
    fc.prior = Prior::diagonal_gaussian(cfg.init.mean, cfg.init.var);
  else
    fc.prior = Prior::standard_normal(fc.dim);
  FlowModel m(fc);
  RngStream r(mix64(cfg.seed, kSeedFlowInit));
  m.init_params(r);
  return m;
}

TargetDensity initial_target(const RunConfig& cfg) {
  if (cfg.init.kind == InitSpec::Kind::Gaussian)
    return gaussian_target(cfg.init.mean, cfg.init.var);
  return bec_target(cfg.init.n_total);
}

// Mode correlations <a_i^dag a_j> of the initial state, for the chain oracle.
Eigen::MatrixXcd initial_correlations(const RunConfig& cfg) {
  const int m = cfg.model.wells;
  Eigen::MatrixXcd c(m, m);
  if (cfg.init.kind == InitSpec::Kind::Bec) {
    // all particles in (a_1^dag - a_2^dag)/sqrt(2)
    double h = cfg.init.n_total / 2.0;
    c << h, -h, -h, h;
    return c;
  }
  // product Gaussian Q: E[conj(a_i) a_j] factorizes, diagonal picks up the
  // anti-normal-ordering shift E|a|^2 = <a a^dag>
  Eigen::VectorXcd alpha(m);
  for (int j = 0; j < m; ++j)
    alpha[j] = cplx(cfg.init.mean[j], cfg.init.mean[m + j]);
  c = alpha.conjugate() * alpha.transpose();
  for (int j = 0; j < m; ++j)
    c(j, j) += cfg.init.var[j] + cfg.init.var[m + j] - 1.0;
  return c;
}

// One metrics row for a flow state. The stream is split per step so cadence
// changes never shift which numbers a given step sees.
class MetricsPlan {
 public:
  MetricsPlan(const RunConfig& cfg, const QOperator& op)
      : cfg_(cfg), op_(op), init_(initial_state(cfg)),
        root_(mix64(cfg.seed, kSeedMetrics)) {}

  CsvRow row(long step, double t, const FlowModel& model,
             const EulerStepStats* stats) const {
    RngStream rng = root_.split(static_cast<std::uint64_t>(step));
    CsvRow r;
    r.step = step;
    r.time = t;
    const MetricSpec& ms = cfg_.metrics;
    if (ms.centroid || ms.n1) {
      RngStream br = rng.split(1);
      Mat X;
      Vec lq;
      model.sample(ms.samples, br, X, lq);
      if (ms.centroid) r.cnorm = centroid_norm(X);
      if (ms.n1) r.n1 = n1_observable(X);
    }
    if (ms.l1) {
      GaussianExact exact(gaussian_moment_solution(cfg_.model, init_, t));
      FlowEval sim(model);
      RngStream br = rng.split(2);
      r.l1 = l1_loss(sim, exact, ms.samples, br);
    }
    if (ms.liouvillian) {
      RngStream br = rng.split(3);
      r.lloss = liouvillian_loss(model, op_, ms.samples, br);
    }
    if (stats) {
      r.residual = stats->residual;
      r.clamp = stats->clamp_count;
    }
    return r;
  }

 private:
  const RunConfig& cfg_;
  const QOperator& op_;
  GaussianMomentState init_;
  RngStream root_;
};

FlowModel starting_model(const RunConfig& cfg) {
  if (!cfg.init_checkpoint.empty()) {
    FlowModel m = FlowModel::load(cfg.init_checkpoint);
    if (m.dim() != 2 * cfg.model.wells)
      throw ConfigError("init_checkpoint: flow dimension " +
                        std::to_string(m.dim()) + " does not match model (" +
                        std::to_string(2 * cfg.model.wells) + ")");
    return m;
  }
  if (cfg.init.kind == InitSpec::Kind::Bec)
    throw ConfigError(
        "init_checkpoint: bec initial states need a pretrained flow; run the "
        "pretrain subcommand and point init_checkpoint at its output");
  return build_flow(cfg);
}

int run_flow_experiment(const RunConfig& cfg, const QOperator& op) {
  const fs::path out(cfg.out_dir);
  FlowModel model = starting_model(cfg);

  EulerKLConfig ecfg = cfg.euler;
  TdvpConfig tcfg = cfg.tdvp;
  ecfg.seed = tcfg.seed = mix64(cfg.seed, kSeedTrain);
  const bool euler = cfg.method == Method::EulerKL;
  const long n_steps = euler ? ecfg.n_steps() : tcfg.n_steps();
  const double dt = euler ? ecfg.dt : tcfg.dt;

  MetricsPlan plan(cfg, op);
  CsvFile csv(out / "metrics.csv");
  csv.write(plan.row(0, 0.0, model, nullptr));

  long done_step = 0;
  auto on_step = [&](long step, double t, const EulerStepStats* stats,
                     FlowModel& m) {
    done_step = step;
    if (step % cfg.metrics.cadence == 0 || step == n_steps)
      csv.write(plan.row(step, t, m, stats));
    if (cfg.metrics.checkpoint_cadence > 0 &&
        step % cfg.metrics.checkpoint_cadence == 0 && step != n_steps)
      save_checkpoint(m, out / ("checkpoint_" + std::to_string(step) + ".flow"),
                      step, t);
  };

  try {
    if (euler) {
      euler_kl_run(model, op, ecfg,
                   [&](long s, double t, const EulerStepStats& st,
                       FlowModel& m) { on_step(s, t, &st, m); });
    } else {
      tdvp_run(model, op, tcfg,
               [&](long s, double t, FlowModel& m) { on_step(s, t, nullptr, m); });
    }
  } catch (const std::exception& e) {
    mark_failed(out, e.what());
    save_checkpoint(model, out / "diagnostic.flow", done_step, done_step * dt);
    std::cerr << "run aborted at step " << done_step + 1 << ": " << e.what()
              << "\n";
    return 1;
  }
  save_checkpoint(model, out / "final.flow", n_steps, n_steps * dt);
  return 0;
}

int run_ps_experiment(const RunConfig& cfg, const QOperator& op) {
  const fs::path out(cfg.out_dir);
  GridState g = make_grid(op.dim(), cfg.ps.grid_n, cfg.ps.extent);
  {
    TargetDensity target = initial_target(cfg);
    fill_grid(g, [&](const Vec& x) { return std::exp(target.log_density(x)); });
  }
  PsOptions opts;
  opts.rtol = cfg.ps.rtol;

  const GaussianMomentState init = initial_state(cfg);
  RngStream root(mix64(cfg.seed, kSeedMetrics));
  CsvFile csv(out / "metrics.csv");

  auto emit = [&](long step, double t) {
    RngStream rng = root.split(static_cast<std::uint64_t>(step));
    CsvRow r;
    r.step = step;
    r.time = t;
    const MetricSpec& ms = cfg.metrics;
    if (ms.centroid || ms.n1) {
      RngStream br = rng.split(1);
      Mat X;
      grid_sample(g, ms.samples, br, X);
      if (ms.centroid) r.cnorm = centroid_norm(X);
      if (ms.n1) r.n1 = n1_observable(X);
    }
    if (ms.l1) {
      GaussianExact exact(gaussian_moment_solution(cfg.model, init, t));
      GridEval sim(g);
      RngStream br = rng.split(2);
      r.l1 = l1_loss(sim, exact, ms.samples, br);
    }
    csv.write(r);
  };

  emit(0, 0.0);
  double t_cur = 0;
  long step = 0;
  try {
    for (double t_next : cfg.ps.times) {
      g = pseudospectral_solve(op, g, t_next - t_cur, opts);
      t_cur = t_next;
      emit(++step, t_cur);
    }
  } catch (const std::exception& e) {
    mark_failed(out, e.what());
    save_grid(g, (out / "diagnostic.grid").string());
    std::cerr << "run aborted at t=" << t_cur << ": " << e.what() << "\n";
    return 1;
  }
  save_grid(g, (out / "final.grid").string());
  return 0;
}

}  // namespace

int run_pretrain(const RunConfig& cfg) {
  cfg.validate();
  prepare_out_dir(cfg);
  const fs::path out(cfg.out_dir);
  const PretrainSpec& ps = cfg.pretrain;

  FlowModel model = build_flow(cfg);
  TargetDensity target = initial_target(cfg);

  MhOptions mo;
  mo.proposal_sigma = ps.mh_sigma;
  mo.burn_in = ps.burn_in;
  mo.thin = ps.thin;
  RngStream mh_rng(mix64(cfg.seed, kSeedMh));
  MhResult mh = mh_sample(target, ps.mh_n, mo, mh_rng);

  RngStream nll_rng(mix64(cfg.seed, kSeedNll));
  Vec nll = nll_pretrain(model, mh.points, ps.nll_epochs, ps.batch, ps.lr,
                         nll_rng);
  RngStream kl_rng(mix64(cfg.seed, kSeedKl));
  Vec kl = kl_pretrain(model, target, ps.kl_epochs, ps.batch, ps.lr, kl_rng);
  double fkl = forward_kl_estimate(model, target, mh.points);

  save_checkpoint(model, out / "pretrained.flow", 0, 0.0);
  std::string log;
  log += "mh_acceptance " + fmt(mh.acceptance_rate) + "\n";
  if (nll.size() > 0) log += "nll_final " + fmt(nll[nll.size() - 1]) + "\n";
  if (kl.size() > 0) log += "kl_final " + fmt(kl[kl.size() - 1]) + "\n";
  log += "forward_kl " + fmt(fkl) + "\n";
  write_text(out / "pretrain.log", log);
  std::cout << log;
  return 0;
}

int run_experiment(const RunConfig& cfg) {
  cfg.validate();
  prepare_out_dir(cfg);
  QOperator op = compile(model_terms(cfg.model), cfg.model.n_modes());
  if (cfg.method == Method::PseudoSpectral) return run_ps_experiment(cfg, op);
  return run_flow_experiment(cfg, op);
}

int run_reference(const RunConfig& cfg) {
  cfg.validate();
  prepare_out_dir(cfg);
  const fs::path out(cfg.out_dir);

  std::vector<std::pair<long, double>> rows;
  if (cfg.method == Method::PseudoSpectral) {
    rows.emplace_back(0, 0.0);
    long s = 0;
    for (double t : cfg.ps.times) rows.emplace_back(++s, t);
  } else {
    const double dt = cfg.method == Method::EulerKL ? cfg.euler.dt : cfg.tdvp.dt;
    const long n = cfg.method == Method::EulerKL ? cfg.euler.n_steps()
                                                 : cfg.tdvp.n_steps();
    for (long s = 0; s <= n; ++s)
      if (s % cfg.metrics.cadence == 0 || s == n) rows.emplace_back(s, s * dt);
  }

  CsvFile csv(out / "reference.csv");
  const int m = cfg.model.wells;
  if (cfg.model.kind == ModelSpec::Kind::Harmonic) {
    const GaussianMomentState init = initial_state(cfg);
    for (auto [s, t] : rows) {
      GaussianMomentState st = gaussian_moment_solution(cfg.model, init, t);
      CsvRow r;
      r.step = s;
      r.time = t;
      if (cfg.metrics.centroid) r.cnorm = MetricValue{st.mu.norm(), 0.0};
      if (cfg.metrics.n1)
        r.n1 = MetricValue{st.mu[0] * st.mu[0] + st.mu[m] * st.mu[m] +
                               st.sigma(0, 0) + st.sigma(m, m) - 1.0,
                           0.0};
      csv.write(r);
    }
  } else {
    const Eigen::MatrixXcd c0 = initial_correlations(cfg);
    for (auto [s, t] : rows) {
      SecondMomentState st =
          bosonic_moment_solution(cfg.model.hopping, cfg.model.gamma, {c0}, t);
      CsvRow r;
      r.step = s;
      r.time = t;
      r.n1 = MetricValue{st.occupation(0), 0.0};
      csv.write(r);
    }
  }
  return 0;
}

int run_eval(const RunConfig& cfg, const std::string& checkpoint, double time,
             const std::string& out_csv) {
  cfg.validate();
  if (checkpoint.empty()) throw ConfigError("eval: a checkpoint path is required");
  FlowModel model = FlowModel::load(checkpoint);
  if (model.dim() != 2 * cfg.model.wells)
    throw ConfigError("eval: checkpoint dimension " +
                      std::to_string(model.dim()) + " does not match model (" +
                      std::to_string(2 * cfg.model.wells) + ")");

  long step = 0;
  double t = time;
  const std::string meta_path = checkpoint + ".meta";
  if (std::ifstream meta(meta_path, std::ios::binary); meta) {
    json j = json::parse(meta, nullptr, true);
    if (j.contains("step")) step = j["step"].get<long>();
    if (t < 0 && j.contains("time")) t = j["time"].get<double>();
  }
  if (t < 0)
    throw ConfigError("eval: " + meta_path +
                      " is missing; pass the evaluation time explicitly");

  QOperator op = compile(model_terms(cfg.model), cfg.model.n_modes());
  MetricsPlan plan(cfg, op);
  CsvRow row = plan.row(step, t, model, nullptr);
  CsvFile csv{out_csv.empty() ? fs::path("/dev/stdout") : fs::path(out_csv)};
  csv.write(row);
  return 0;
}

}  // namespace qphase
