#pragma once

// Run configuration: strict JSON parsing (unknown keys are errors) into a
// RunConfig, plus serialization so every run can emit a sidecar that
// reproduces it byte for byte.

#include <cmath>
#include <cstdint>
#include <fstream>
#include <initializer_list>
#include <optional>
#include <string>

#include <json.hpp>

#include "spikeslab/common.hpp"
#include "spikeslab/decomposition.hpp"
#include "spikeslab/design.hpp"
#include "spikeslab/feasibility.hpp"
#include "spikeslab/samplers.hpp"
#include "spikeslab/slab.hpp"

namespace spikeslab {

namespace detail {

inline void check_keys(const nlohmann::json& j, const std::string& where,
                       std::initializer_list<const char*> allowed) {
  if (!j.is_object())
    throw ConfigError(where + ": expected an object");
  for (auto it = j.begin(); it != j.end(); ++it) {
    bool known = false;
    for (const char* k : allowed)
      if (it.key() == k) {
        known = true;
        break;
      }
    if (!known)
      throw ConfigError(where + ": unknown key \"" + it.key() + "\"");
  }
}

inline double get_number(const nlohmann::json& j, const std::string& where) {
  if (!j.is_number()) throw ConfigError(where + ": expected a number");
  return j.get<double>();
}

inline long get_integer(const nlohmann::json& j, const std::string& where) {
  if (!j.is_number_integer()) throw ConfigError(where + ": expected an integer");
  return j.get<long>();
}

inline std::uint64_t get_seed(const nlohmann::json& j, const std::string& where) {
  if (!j.is_number_integer())
    throw ConfigError(where + ": expected an integer seed");
  if (j.is_number_unsigned()) return j.get<std::uint64_t>();
  const long long v = j.get<long long>();
  if (v < 0) throw ConfigError(where + ": seed must be >= 0");
  return static_cast<std::uint64_t>(v);
}

inline bool get_bool(const nlohmann::json& j, const std::string& where) {
  if (!j.is_boolean()) throw ConfigError(where + ": expected a boolean");
  return j.get<bool>();
}

inline std::string get_string(const nlohmann::json& j, const std::string& where) {
  if (!j.is_string()) throw ConfigError(where + ": expected a string");
  return j.get<std::string>();
}

}  // namespace detail

struct ModelSection {
  std::optional<int> n;
  std::optional<int> d;
  std::optional<double> q;
  std::optional<SlabFamily> slab;
  std::optional<double> sigma_d;  // exactly one of sigma_d / sigma0
  std::optional<double> sigma0;   // sigma_d = sigma0 * sqrt(d)
  std::optional<DesignSpec> design;
};

struct ExperimentSection {
  long repetitions = 100;
  long samples = 1000;
  double level = 0.95;
  bool force_run = false;
  bool misspecified = false;
};

struct AxisConfig {
  std::string param;  // "delta", "sigma0" or "q"
  double min = 0.0;
  double max = 0.0;
  int count = 1;
  bool log_scale = false;
};

struct RegionSection {
  bool present = false;
  AxisConfig axis1;
  AxisConfig axis2;
  std::optional<double> delta;
  std::optional<double> sigma0;
  std::optional<double> q;  // falls back to model.q when absent
};

struct RunConfig {
  ModelSection model;
  GammaPolicy gamma = AutoGamma{};
  ChainConfig chain;
  ExperimentSection experiment;
  RegionSection region;
};

namespace detail {

inline SlabFamily parse_slab(const nlohmann::json& j, const std::string& where) {
  const std::string kind =
      j.contains("kind") ? get_string(j.at("kind"), where + ".kind") : "";
  if (kind == "gaussian") {
    check_keys(j, where, {"kind", "variance"});
    if (!j.contains("variance"))
      throw ConfigError(where + ": gaussian slab requires \"variance\"");
    return make_slab(GaussianSlab{get_number(j.at("variance"), where + ".variance")});
  }
  if (kind == "laplace") {
    check_keys(j, where, {"kind", "rate"});
    if (!j.contains("rate"))
      throw ConfigError(where + ": laplace slab requires \"rate\"");
    return make_slab(LaplaceSlab{get_number(j.at("rate"), where + ".rate")});
  }
  throw ConfigError(where + ": slab kind must be \"gaussian\" or \"laplace\"");
}

inline DesignSpec parse_design(const nlohmann::json& j, const std::string& where) {
  const std::string kind =
      j.contains("kind") ? get_string(j.at("kind"), where + ".kind") : "";
  if (kind == "iid_gaussian") {
    check_keys(j, where, {"kind", "variance"});
    const double var = j.contains("variance")
                           ? get_number(j.at("variance"), where + ".variance")
                           : 1.0;
    return make_design(IidGaussian{var});
  }
  if (kind == "correlated_gaussian") {
    check_keys(j, where, {"kind", "rho"});
    if (!j.contains("rho"))
      throw ConfigError(where + ": correlated design requires \"rho\"");
    return make_design(CorrelatedGaussian{get_number(j.at("rho"), where + ".rho")});
  }
  throw ConfigError(where +
                    ": design kind must be \"iid_gaussian\" or \"correlated_gaussian\"");
}

inline ModelSection parse_model(const nlohmann::json& j) {
  check_keys(j, "model", {"n", "d", "q", "slab", "sigma_d", "sigma0", "design"});
  ModelSection m;
  if (j.contains("n")) m.n = static_cast<int>(get_integer(j.at("n"), "model.n"));
  if (j.contains("d")) m.d = static_cast<int>(get_integer(j.at("d"), "model.d"));
  if (j.contains("q")) m.q = get_number(j.at("q"), "model.q");
  if (j.contains("slab")) m.slab = parse_slab(j.at("slab"), "model.slab");
  if (j.contains("sigma_d"))
    m.sigma_d = get_number(j.at("sigma_d"), "model.sigma_d");
  if (j.contains("sigma0"))
    m.sigma0 = get_number(j.at("sigma0"), "model.sigma0");
  if (m.sigma_d && m.sigma0)
    throw ConfigError("model: give either \"sigma_d\" or \"sigma0\", not both");
  if (j.contains("design")) m.design = parse_design(j.at("design"), "model.design");
  return m;
}

inline GammaPolicy parse_gamma(const nlohmann::json& j) {
  check_keys(j, "decomposition", {"gamma"});
  if (!j.contains("gamma")) return AutoGamma{};
  const auto& g = j.at("gamma");
  if (g.is_number()) return get_number(g, "decomposition.gamma");
  if (g.is_string()) {
    if (g.get<std::string>() == "auto") return AutoGamma{};
    throw ConfigError("decomposition.gamma: string form must be \"auto\"");
  }
  throw ConfigError("decomposition.gamma: expected a number or \"auto\"");
}

inline ChainConfig parse_sampler(const nlohmann::json& j) {
  ChainConfig c;
  const std::string method =
      j.contains("method") ? get_string(j.at("method"), "sampler.method") : "mala";
  if (method == "mala") {
    check_keys(j, "sampler",
               {"method", "tau", "total_steps", "burn_in", "thinning", "seed",
                "init_smoothness", "rejection_policy"});
    MalaParams p;
    if (j.contains("tau")) p.tau = get_number(j.at("tau"), "sampler.tau");
    c.method = p;
  } else if (method == "hmc") {
    check_keys(j, "sampler",
               {"method", "epsilon", "leapfrog_steps", "total_steps", "burn_in",
                "thinning", "seed", "init_smoothness", "rejection_policy"});
    HmcParams p;
    if (j.contains("epsilon"))
      p.epsilon = get_number(j.at("epsilon"), "sampler.epsilon");
    if (j.contains("leapfrog_steps"))
      p.leapfrog_steps = static_cast<int>(
          get_integer(j.at("leapfrog_steps"), "sampler.leapfrog_steps"));
    c.method = p;
  } else {
    throw ConfigError("sampler.method: must be \"mala\" or \"hmc\"");
  }
  if (j.contains("total_steps"))
    c.total_steps = get_integer(j.at("total_steps"), "sampler.total_steps");
  if (j.contains("burn_in"))
    c.burn_in = get_integer(j.at("burn_in"), "sampler.burn_in");
  if (j.contains("thinning"))
    c.thinning = get_integer(j.at("thinning"), "sampler.thinning");
  if (j.contains("seed")) c.seed = get_seed(j.at("seed"), "sampler.seed");
  if (j.contains("init_smoothness"))
    c.init_smoothness =
        get_number(j.at("init_smoothness"), "sampler.init_smoothness");
  if (j.contains("rejection_policy")) {
    const std::string policy =
        get_string(j.at("rejection_policy"), "sampler.rejection_policy");
    if (policy == "stay_on_reject")
      c.rejection_policy = RejectionPolicy::StayOnReject;
    else if (policy == "retry_until_accept")
      c.rejection_policy = RejectionPolicy::RetryUntilAccept;
    else
      throw ConfigError(
          "sampler.rejection_policy: must be \"stay_on_reject\" or "
          "\"retry_until_accept\"");
  }
  return c;
}

inline ExperimentSection parse_experiment(const nlohmann::json& j) {
  check_keys(j, "experiment",
             {"repetitions", "samples", "level", "force_run", "misspecified"});
  ExperimentSection e;
  if (j.contains("repetitions"))
    e.repetitions = get_integer(j.at("repetitions"), "experiment.repetitions");
  if (j.contains("samples"))
    e.samples = get_integer(j.at("samples"), "experiment.samples");
  if (j.contains("level")) e.level = get_number(j.at("level"), "experiment.level");
  if (j.contains("force_run"))
    e.force_run = get_bool(j.at("force_run"), "experiment.force_run");
  if (j.contains("misspecified"))
    e.misspecified = get_bool(j.at("misspecified"), "experiment.misspecified");
  return e;
}

inline AxisConfig parse_axis(const nlohmann::json& j, const std::string& where) {
  check_keys(j, where, {"param", "min", "max", "count", "log"});
  AxisConfig a;
  if (!j.contains("param") || !j.contains("min") || !j.contains("max") ||
      !j.contains("count"))
    throw ConfigError(where + ": requires \"param\", \"min\", \"max\", \"count\"");
  a.param = get_string(j.at("param"), where + ".param");
  if (a.param != "delta" && a.param != "sigma0" && a.param != "q")
    throw ConfigError(where + ".param: must be \"delta\", \"sigma0\" or \"q\"");
  a.min = get_number(j.at("min"), where + ".min");
  a.max = get_number(j.at("max"), where + ".max");
  a.count = static_cast<int>(get_integer(j.at("count"), where + ".count"));
  if (j.contains("log")) a.log_scale = get_bool(j.at("log"), where + ".log");
  return a;
}

inline RegionSection parse_region(const nlohmann::json& j) {
  check_keys(j, "region", {"axis1", "axis2", "delta", "sigma0", "q"});
  RegionSection r;
  r.present = true;
  if (!j.contains("axis1") || !j.contains("axis2"))
    throw ConfigError("region: requires \"axis1\" and \"axis2\"");
  r.axis1 = parse_axis(j.at("axis1"), "region.axis1");
  r.axis2 = parse_axis(j.at("axis2"), "region.axis2");
  if (j.contains("delta")) r.delta = get_number(j.at("delta"), "region.delta");
  if (j.contains("sigma0")) r.sigma0 = get_number(j.at("sigma0"), "region.sigma0");
  if (j.contains("q")) r.q = get_number(j.at("q"), "region.q");
  return r;
}

}  // namespace detail

inline RunConfig parse_run_config(const nlohmann::json& j) {
  detail::check_keys(j, "config",
                     {"model", "decomposition", "sampler", "experiment", "region"});
  RunConfig c;
  if (j.contains("model")) c.model = detail::parse_model(j.at("model"));
  if (j.contains("decomposition")) c.gamma = detail::parse_gamma(j.at("decomposition"));
  if (j.contains("sampler")) c.chain = detail::parse_sampler(j.at("sampler"));
  if (j.contains("experiment"))
    c.experiment = detail::parse_experiment(j.at("experiment"));
  if (j.contains("region")) c.region = detail::parse_region(j.at("region"));
  return c;
}

inline RunConfig load_run_config(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open config file: " + path);
  nlohmann::json j;
  try {
    in >> j;
  } catch (const nlohmann::json::parse_error& e) {
    throw ConfigError("config file " + path + ": " + e.what());
  }
  return parse_run_config(j);
}

// The variance-matched counterpart in the other family, used for
// misspecified-inference experiments: gaussian(v) <-> laplace(sqrt(2/v)).
inline SlabFamily misspecified_counterpart(const SlabFamily& slab) {
  if (const auto* g = std::get_if<GaussianSlab>(&slab))
    return make_slab(LaplaceSlab{std::sqrt(2.0 / g->variance)});
  if (const auto* l = std::get_if<LaplaceSlab>(&slab))
    return make_slab(GaussianSlab{2.0 / (l->rate * l->rate)});
  throw ValidationError(
      "misspecified_counterpart: only gaussian and laplace slabs have one");
}

// Noise level actually used for data: sigma_d directly or sigma0 * sqrt(d).
inline double effective_sigma_d(const ModelSection& m) {
  if (m.sigma_d) return *m.sigma_d;
  if (m.sigma0) {
    if (!m.d) throw ConfigError("model: \"sigma0\" requires \"d\"");
    return *m.sigma0 * std::sqrt(static_cast<double>(*m.d));
  }
  throw ConfigError("model: requires \"sigma_d\" or \"sigma0\"");
}

inline nlohmann::json to_json(const SlabFamily& slab) {
  if (const auto* g = std::get_if<GaussianSlab>(&slab))
    return nlohmann::json{{"kind", "gaussian"}, {"variance", g->variance}};
  if (const auto* l = std::get_if<LaplaceSlab>(&slab))
    return nlohmann::json{{"kind", "laplace"}, {"rate", l->rate}};
  throw ValidationError("to_json: generic slabs are not serializable");
}

inline nlohmann::json to_json(const DesignSpec& design) {
  if (const auto* g = std::get_if<IidGaussian>(&design))
    return nlohmann::json{{"kind", "iid_gaussian"}, {"variance", g->variance}};
  if (const auto* c = std::get_if<CorrelatedGaussian>(&design))
    return nlohmann::json{{"kind", "correlated_gaussian"}, {"rho", c->rho}};
  throw ValidationError("to_json: generic designs are not serializable");
}

inline nlohmann::json to_json(const GammaPolicy& gamma) {
  if (const auto* fixed = std::get_if<double>(&gamma)) return *fixed;
  return "auto";
}

inline nlohmann::json to_json(const RunConfig& c) {
  nlohmann::json j;
  nlohmann::json model = nlohmann::json::object();
  if (c.model.n) model["n"] = *c.model.n;
  if (c.model.d) model["d"] = *c.model.d;
  if (c.model.q) model["q"] = *c.model.q;
  if (c.model.slab) model["slab"] = to_json(*c.model.slab);
  if (c.model.sigma_d) model["sigma_d"] = *c.model.sigma_d;
  if (c.model.sigma0) model["sigma0"] = *c.model.sigma0;
  if (c.model.design) model["design"] = to_json(*c.model.design);
  if (!model.empty()) j["model"] = model;
  j["decomposition"] = nlohmann::json{{"gamma", to_json(c.gamma)}};
  nlohmann::json sampler;
  if (const auto* m = std::get_if<MalaParams>(&c.chain.method)) {
    sampler["method"] = "mala";
    sampler["tau"] = m->tau;
  } else {
    const auto& h = std::get<HmcParams>(c.chain.method);
    sampler["method"] = "hmc";
    sampler["epsilon"] = h.epsilon;
    sampler["leapfrog_steps"] = h.leapfrog_steps;
  }
  sampler["total_steps"] = c.chain.total_steps;
  sampler["burn_in"] = c.chain.burn_in;
  sampler["thinning"] = c.chain.thinning;
  sampler["rejection_policy"] =
      c.chain.rejection_policy == RejectionPolicy::StayOnReject
          ? "stay_on_reject"
          : "retry_until_accept";
  sampler["seed"] = c.chain.seed;
  sampler["init_smoothness"] = c.chain.init_smoothness;
  j["sampler"] = sampler;
  j["experiment"] = nlohmann::json{{"repetitions", c.experiment.repetitions},
                                   {"samples", c.experiment.samples},
                                   {"level", c.experiment.level},
                                   {"force_run", c.experiment.force_run},
                                   {"misspecified", c.experiment.misspecified}};
  if (c.region.present) {
    auto axis = [](const AxisConfig& a) {
      return nlohmann::json{{"param", a.param},
                            {"min", a.min},
                            {"max", a.max},
                            {"count", a.count},
                            {"log", a.log_scale}};
    };
    nlohmann::json region{{"axis1", axis(c.region.axis1)},
                          {"axis2", axis(c.region.axis2)}};
    if (c.region.delta) region["delta"] = *c.region.delta;
    if (c.region.sigma0) region["sigma0"] = *c.region.sigma0;
    if (c.region.q) region["q"] = *c.region.q;
    j["region"] = region;
  }
  return j;
}

}  // namespace spikeslab
