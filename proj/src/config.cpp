#include "qphase/config.hpp"

#include <fstream>
#include <set>
#include <sstream>

#include "json.hpp"
#include "qphase/errors.hpp"

namespace qphase {

namespace {

using nlohmann::json;

[[noreturn]] void fail(const std::string& path, const std::string& msg) {
  throw ConfigError(path + ": " + msg);
}

void expect_keys(const json& j, const std::string& path,
                 const std::set<std::string>& allowed) {
  for (auto it = j.begin(); it != j.end(); ++it)
    if (!allowed.count(it.key())) fail(path + "." + it.key(), "unknown key");
}

double get_num(const json& j, const std::string& path) {
  if (!j.is_number()) fail(path, "expected a number");
  return j.get<double>();
}

long get_int(const json& j, const std::string& path) {
  if (!j.is_number_integer()) fail(path, "expected an integer");
  return j.get<long>();
}

std::uint64_t get_seed(const json& j, const std::string& path) {
  if (!j.is_number_unsigned() && !j.is_number_integer())
    fail(path, "expected a nonnegative integer");
  auto v = j.get<long long>();
  if (v < 0) fail(path, "expected a nonnegative integer");
  return static_cast<std::uint64_t>(v);
}

struct ParamField {
  std::vector<double> values;
  bool draw = false;
};

ParamField parse_param(const json& v, int wells, const std::string& path) {
  ParamField f;
  f.values.assign(wells, 0.0);
  if (v.is_string()) {
    if (v.get<std::string>() != "draw") fail(path, "only the string \"draw\" is allowed");
    f.draw = true;
  } else if (v.is_number()) {
    f.values.assign(wells, v.get<double>());
  } else if (v.is_array()) {
    if (static_cast<int>(v.size()) != wells)
      fail(path, "expected one entry per well");
    for (int i = 0; i < wells; ++i) f.values[i] = get_num(v[i], path);
  } else {
    fail(path, "expected a number, an array, or \"draw\"");
  }
  return f;
}

Vec parse_vec(const json& v, const std::string& path) {
  if (!v.is_array()) fail(path, "expected an array of numbers");
  Vec out(v.size());
  for (size_t i = 0; i < v.size(); ++i) out[i] = get_num(v[i], path);
  return out;
}

}  // namespace

void RunConfig::validate() const {
  model.validate();
  switch (method) {
    case Method::EulerKL:
      euler.validate();
      break;
    case Method::Tdvp:
      tdvp.validate();
      break;
    case Method::PseudoSpectral:
      if (2 * model.n_modes() > 4)
        throw ConfigError(
            "method: pseudo-spectral is limited to 2 modes (4 grid "
            "dimensions); use euler-kl or tdvp");
      if (ps.grid_n < 8 || ps.grid_n % 2 != 0)
        throw ConfigError("ps.grid_n: need an even size >= 8");
      if (ps.rtol <= 0 || ps.extent <= 0)
        throw ConfigError("ps: rtol and extent must be positive");
      break;
  }
  if (flow.layers < 1) throw ConfigError("flow.layers: must be >= 1");
  if (flow.hidden < 1) throw ConfigError("flow.hidden: must be >= 1");
  int d = 2 * model.n_modes();
  if (init.kind == InitSpec::Kind::Gaussian) {
    if (init.mean.size() != d || init.var.size() != d)
      throw ConfigError("init: mean/var must have one entry per coordinate");
    if ((init.var.array() <= 0).any())
      throw ConfigError("init.var: entries must be positive");
  } else {
    if (model.kind != ModelSpec::Kind::BosonicChain || model.wells != 2)
      throw ConfigError("init.bec: needs the 2-well bosonic-chain model");
    if (init.n_total < 1) throw ConfigError("init.n_total: must be >= 1");
  }
  if (metrics.cadence < 1) throw ConfigError("metrics.cadence: must be >= 1");
  if (metrics.samples < 2) throw ConfigError("metrics.samples: must be >= 2");
  if (metrics.l1 && model.kind != ModelSpec::Kind::Harmonic)
    throw ConfigError("metrics.l1: closed-form reference exists only for the harmonic model");
  if (metrics.checkpoint_cadence < 0)
    throw ConfigError("metrics.checkpoint_cadence: must be >= 0");
}

RunConfig parse_config_text(const std::string& text) {
  json j;
  try {
    j = json::parse(text);
  } catch (const json::exception& e) {
    throw ConfigError(std::string("config: ") + e.what());
  }
  if (!j.is_object()) throw ConfigError("config: top level must be an object");
  expect_keys(j, "config",
              {"model", "method", "flow", "euler", "tdvp", "ps", "init",
               "metrics", "pretrain", "seed", "param_seed", "out",
               "init_checkpoint"});

  RunConfig cfg;
  if (!j.contains("model")) fail("model", "required");
  const json& jm = j["model"];
  expect_keys(jm, "model", {"kind", "wells", "omega", "gamma", "nbar", "hopping"});
  std::string kind = jm.value("kind", "");
  if (kind == "harmonic")
    cfg.model.kind = ModelSpec::Kind::Harmonic;
  else if (kind == "bosonic-chain")
    cfg.model.kind = ModelSpec::Kind::BosonicChain;
  else
    fail("model.kind", "expected \"harmonic\" or \"bosonic-chain\"");
  if (!jm.contains("wells")) fail("model.wells", "required");
  cfg.model.wells = static_cast<int>(get_int(jm["wells"], "model.wells"));
  if (cfg.model.wells < 1) fail("model.wells", "must be >= 1");
  int M = cfg.model.wells;

  if (j.contains("param_seed")) cfg.param_seed = get_seed(j["param_seed"], "param_seed");
  RngStream prng(cfg.param_seed);

  ParamField om, ga, nb;
  if (cfg.model.kind == ModelSpec::Kind::Harmonic) {
    if (!jm.contains("omega")) fail("model.omega", "required");
    if (!jm.contains("gamma")) fail("model.gamma", "required");
    if (!jm.contains("nbar")) fail("model.nbar", "required");
    om = parse_param(jm["omega"], M, "model.omega");
    ga = parse_param(jm["gamma"], M, "model.gamma");
    nb = parse_param(jm["nbar"], M, "model.nbar");
  } else {
    if (!jm.contains("hopping")) fail("model.hopping", "required");
    cfg.model.hopping = get_num(jm["hopping"], "model.hopping");
    if (!jm.contains("gamma")) fail("model.gamma", "required");
    ga = parse_param(jm["gamma"], M, "model.gamma");
    om.values.assign(M, 0.0);
    nb.values.assign(M, 0.0);
  }
  // materialize draws well by well so the draw count is independent of which
  // fields are drawn
  for (int w = 0; w < M; ++w) {
    if (om.draw) om.values[w] = prng.uniform(0.5, 1.5);
    if (ga.draw) ga.values[w] = prng.uniform(0.5, 1.5);
    if (nb.draw) nb.values[w] = prng.uniform(3.0, 7.0);
  }
  cfg.model.omega = om.values;
  cfg.model.gamma = ga.values;
  cfg.model.nbar = nb.values;

  std::string method = j.value("method", "euler-kl");
  if (method == "euler-kl")
    cfg.method = Method::EulerKL;
  else if (method == "tdvp")
    cfg.method = Method::Tdvp;
  else if (method == "pseudo-spectral")
    cfg.method = Method::PseudoSpectral;
  else
    fail("method", "expected euler-kl, tdvp, or pseudo-spectral");

  if (j.contains("flow")) {
    const json& jf = j["flow"];
    expect_keys(jf, "flow", {"layers", "hidden", "s_cap"});
    if (jf.contains("layers"))
      cfg.flow.layers = static_cast<int>(get_int(jf["layers"], "flow.layers"));
    if (jf.contains("hidden"))
      cfg.flow.hidden = static_cast<int>(get_int(jf["hidden"], "flow.hidden"));
    if (jf.contains("s_cap")) cfg.flow.s_cap = get_num(jf["s_cap"], "flow.s_cap");
  }

  if (j.contains("euler")) {
    const json& je = j["euler"];
    expect_keys(je, "euler",
                {"dt", "t_end", "epochs_per_step", "batch", "lr", "clamp_floor"});
    if (je.contains("dt")) cfg.euler.dt = get_num(je["dt"], "euler.dt");
    if (je.contains("t_end")) cfg.euler.t_end = get_num(je["t_end"], "euler.t_end");
    if (je.contains("epochs_per_step"))
      cfg.euler.epochs_per_step =
          static_cast<int>(get_int(je["epochs_per_step"], "euler.epochs_per_step"));
    if (je.contains("batch"))
      cfg.euler.batch_n = static_cast<int>(get_int(je["batch"], "euler.batch"));
    if (je.contains("lr")) cfg.euler.lr = get_num(je["lr"], "euler.lr");
    if (je.contains("clamp_floor"))
      cfg.euler.clamp_floor = get_num(je["clamp_floor"], "euler.clamp_floor");
  }

  if (j.contains("tdvp")) {
    const json& jt = j["tdvp"];
    expect_keys(jt, "tdvp", {"dt", "t_end", "batch", "shift", "centered"});
    if (jt.contains("dt")) cfg.tdvp.dt = get_num(jt["dt"], "tdvp.dt");
    if (jt.contains("t_end")) cfg.tdvp.t_end = get_num(jt["t_end"], "tdvp.t_end");
    if (jt.contains("batch"))
      cfg.tdvp.batch_n = static_cast<int>(get_int(jt["batch"], "tdvp.batch"));
    if (jt.contains("shift")) cfg.tdvp.shift = get_num(jt["shift"], "tdvp.shift");
    if (jt.contains("centered")) {
      if (!jt["centered"].is_boolean()) fail("tdvp.centered", "expected a bool");
      cfg.tdvp.centered = jt["centered"].get<bool>();
    }
  }

  if (j.contains("ps")) {
    const json& jp = j["ps"];
    expect_keys(jp, "ps", {"grid_n", "extent", "rtol", "times"});
    if (jp.contains("grid_n"))
      cfg.ps.grid_n = static_cast<int>(get_int(jp["grid_n"], "ps.grid_n"));
    if (jp.contains("extent")) cfg.ps.extent = get_num(jp["extent"], "ps.extent");
    if (jp.contains("rtol")) cfg.ps.rtol = get_num(jp["rtol"], "ps.rtol");
    if (jp.contains("times")) {
      Vec t = parse_vec(jp["times"], "ps.times");
      cfg.ps.times.assign(t.data(), t.data() + t.size());
      for (size_t i = 0; i < cfg.ps.times.size(); ++i)
        if (cfg.ps.times[i] <= 0 ||
            (i > 0 && cfg.ps.times[i] <= cfg.ps.times[i - 1]))
          fail("ps.times", "expected strictly increasing positive times");
    }
  }

  int d = 2 * M;
  cfg.init.mean = Vec::Constant(d, -1.0);
  cfg.init.var = Vec::Constant(d, 0.5);
  if (j.contains("init")) {
    const json& ji = j["init"];
    expect_keys(ji, "init", {"type", "mean", "var", "n_total"});
    std::string type = ji.value("type", "gaussian");
    if (type == "gaussian") {
      cfg.init.kind = InitSpec::Kind::Gaussian;
      if (ji.contains("mean")) cfg.init.mean = parse_vec(ji["mean"], "init.mean");
      if (ji.contains("var")) cfg.init.var = parse_vec(ji["var"], "init.var");
    } else if (type == "bec") {
      cfg.init.kind = InitSpec::Kind::Bec;
      if (ji.contains("n_total"))
        cfg.init.n_total = static_cast<int>(get_int(ji["n_total"], "init.n_total"));
    } else {
      fail("init.type", "expected \"gaussian\" or \"bec\"");
    }
  }

  cfg.metrics.n1 = cfg.model.kind == ModelSpec::Kind::BosonicChain;
  cfg.metrics.l1 = cfg.model.kind == ModelSpec::Kind::Harmonic;
  if (j.contains("metrics")) {
    const json& jme = j["metrics"];
    expect_keys(jme, "metrics",
                {"cadence", "samples", "list", "checkpoint_cadence"});
    if (jme.contains("cadence"))
      cfg.metrics.cadence = get_int(jme["cadence"], "metrics.cadence");
    if (jme.contains("samples"))
      cfg.metrics.samples =
          static_cast<int>(get_int(jme["samples"], "metrics.samples"));
    if (jme.contains("checkpoint_cadence"))
      cfg.metrics.checkpoint_cadence =
          get_int(jme["checkpoint_cadence"], "metrics.checkpoint_cadence");
    if (jme.contains("list")) {
      if (!jme["list"].is_array()) fail("metrics.list", "expected an array");
      cfg.metrics.l1 = cfg.metrics.centroid = cfg.metrics.liouvillian =
          cfg.metrics.n1 = false;
      for (const auto& item : jme["list"]) {
        std::string name = item.is_string() ? item.get<std::string>() : "";
        if (name == "l1")
          cfg.metrics.l1 = true;
        else if (name == "centroid")
          cfg.metrics.centroid = true;
        else if (name == "liouvillian")
          cfg.metrics.liouvillian = true;
        else if (name == "n1")
          cfg.metrics.n1 = true;
        else
          fail("metrics.list", "unknown metric \"" + name + "\"");
      }
    }
  }

  if (j.contains("pretrain")) {
    const json& jp = j["pretrain"];
    expect_keys(jp, "pretrain",
                {"mh_n", "mh_sigma", "burn_in", "thin", "nll_epochs",
                 "kl_epochs", "batch", "lr"});
    if (jp.contains("mh_n")) cfg.pretrain.mh_n = get_int(jp["mh_n"], "pretrain.mh_n");
    if (jp.contains("mh_sigma"))
      cfg.pretrain.mh_sigma = get_num(jp["mh_sigma"], "pretrain.mh_sigma");
    if (jp.contains("burn_in"))
      cfg.pretrain.burn_in = get_int(jp["burn_in"], "pretrain.burn_in");
    if (jp.contains("thin"))
      cfg.pretrain.thin = static_cast<int>(get_int(jp["thin"], "pretrain.thin"));
    if (jp.contains("nll_epochs"))
      cfg.pretrain.nll_epochs =
          static_cast<int>(get_int(jp["nll_epochs"], "pretrain.nll_epochs"));
    if (jp.contains("kl_epochs"))
      cfg.pretrain.kl_epochs =
          static_cast<int>(get_int(jp["kl_epochs"], "pretrain.kl_epochs"));
    if (jp.contains("batch"))
      cfg.pretrain.batch = static_cast<int>(get_int(jp["batch"], "pretrain.batch"));
    if (jp.contains("lr")) cfg.pretrain.lr = get_num(jp["lr"], "pretrain.lr");
  }

  if (j.contains("seed")) cfg.seed = get_seed(j["seed"], "seed");
  if (j.contains("out")) {
    if (!j["out"].is_string()) fail("out", "expected a string");
    cfg.out_dir = j["out"].get<std::string>();
  }
  if (j.contains("init_checkpoint")) {
    if (!j["init_checkpoint"].is_string())
      fail("init_checkpoint", "expected a string");
    cfg.init_checkpoint = j["init_checkpoint"].get<std::string>();
  }

  cfg.validate();
  return cfg;
}

RunConfig parse_config(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw IoError("config: cannot open " + path);
  std::stringstream buf;
  buf << in.rdbuf();
  return parse_config_text(buf.str());
}

std::string render_config(const RunConfig& cfg) {
  json j;
  json jm;
  jm["kind"] =
      cfg.model.kind == ModelSpec::Kind::Harmonic ? "harmonic" : "bosonic-chain";
  jm["wells"] = cfg.model.wells;
  if (cfg.model.kind == ModelSpec::Kind::Harmonic) {
    jm["omega"] = cfg.model.omega;
    jm["gamma"] = cfg.model.gamma;
    jm["nbar"] = cfg.model.nbar;
  } else {
    jm["hopping"] = cfg.model.hopping;
    jm["gamma"] = cfg.model.gamma;
  }
  j["model"] = jm;
  j["param_seed"] = cfg.param_seed;
  j["method"] = cfg.method == Method::EulerKL      ? "euler-kl"
                : cfg.method == Method::Tdvp       ? "tdvp"
                                                   : "pseudo-spectral";
  j["flow"] = {{"layers", cfg.flow.layers},
               {"hidden", cfg.flow.hidden},
               {"s_cap", cfg.flow.s_cap}};
  j["euler"] = {{"dt", cfg.euler.dt},
                {"t_end", cfg.euler.t_end},
                {"epochs_per_step", cfg.euler.epochs_per_step},
                {"batch", cfg.euler.batch_n},
                {"lr", cfg.euler.lr},
                {"clamp_floor", cfg.euler.clamp_floor}};
  j["tdvp"] = {{"dt", cfg.tdvp.dt},
               {"t_end", cfg.tdvp.t_end},
               {"batch", cfg.tdvp.batch_n},
               {"shift", cfg.tdvp.shift},
               {"centered", cfg.tdvp.centered}};
  j["ps"] = {{"grid_n", cfg.ps.grid_n},
             {"extent", cfg.ps.extent},
             {"rtol", cfg.ps.rtol},
             {"times", cfg.ps.times}};
  if (cfg.init.kind == InitSpec::Kind::Gaussian) {
    j["init"] = {{"type", "gaussian"},
                 {"mean", std::vector<double>(cfg.init.mean.data(),
                                              cfg.init.mean.data() +
                                                  cfg.init.mean.size())},
                 {"var", std::vector<double>(cfg.init.var.data(),
                                             cfg.init.var.data() +
                                                 cfg.init.var.size())}};
  } else {
    j["init"] = {{"type", "bec"}, {"n_total", cfg.init.n_total}};
  }
  json names = json::array();
  if (cfg.metrics.l1) names.push_back("l1");
  if (cfg.metrics.centroid) names.push_back("centroid");
  if (cfg.metrics.liouvillian) names.push_back("liouvillian");
  if (cfg.metrics.n1) names.push_back("n1");
  j["metrics"] = {{"cadence", cfg.metrics.cadence},
                  {"samples", cfg.metrics.samples},
                  {"list", names},
                  {"checkpoint_cadence", cfg.metrics.checkpoint_cadence}};
  j["pretrain"] = {{"mh_n", cfg.pretrain.mh_n},
                   {"mh_sigma", cfg.pretrain.mh_sigma},
                   {"burn_in", cfg.pretrain.burn_in},
                   {"thin", cfg.pretrain.thin},
                   {"nll_epochs", cfg.pretrain.nll_epochs},
                   {"kl_epochs", cfg.pretrain.kl_epochs},
                   {"batch", cfg.pretrain.batch},
                   {"lr", cfg.pretrain.lr}};
  j["seed"] = cfg.seed;
  j["out"] = cfg.out_dir;
  if (!cfg.init_checkpoint.empty()) j["init_checkpoint"] = cfg.init_checkpoint;
  return j.dump(2) + "\n";
}

}  // namespace qphase
