#include "spdelab/experiment.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <functional>
#include <memory>
#include <sstream>

#include <nlohmann/json.hpp>

#include "spdelab/averaging_engine.hpp"
#include "spdelab/drift.hpp"
#include "spdelab/errors.hpp"
#include "spdelab/frozen_dynamics.hpp"
#include "spdelab/mild_integrator.hpp"
#include "spdelab/spectral_space.hpp"
#include "spdelab/stable_noise.hpp"
#include "spdelab/stats.hpp"
#include "spdelab/zvonkin_resolvent.hpp"

namespace spdelab {

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

std::string fmt_g(double v) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.12g", v);
  return buf;
}

std::string fmt_list(const std::vector<double>& v) {
  std::string out;
  for (std::size_t i = 0; i < v.size(); ++i) {
    if (i) out += ',';
    out += fmt_g(v[i]);
  }
  return out;
}

std::string trim(const std::string& s) {
  const auto a = s.find_first_not_of(" \t\r\n");
  if (a == std::string::npos) return "";
  const auto b = s.find_last_not_of(" \t\r\n");
  return s.substr(a, b - a + 1);
}

bool parse_double(const std::string& s, double& out) {
  char* end = nullptr;
  const std::string t = trim(s);
  if (t.empty()) return false;
  out = std::strtod(t.c_str(), &end);
  return end == t.c_str() + t.size();
}

bool parse_int(const std::string& s, int& out) {
  double d;
  if (!parse_double(s, d) || d != std::floor(d) || std::abs(d) > 2e9) return false;
  out = static_cast<int>(d);
  return true;
}

bool parse_u64(const std::string& s, std::uint64_t& out) {
  const std::string t = trim(s);
  if (t.empty()) return false;
  char* end = nullptr;
  out = std::strtoull(t.c_str(), &end, 10);
  return end == t.c_str() + t.size();
}

bool parse_bool(const std::string& s, bool& out) {
  const std::string t = trim(s);
  if (t == "true" || t == "1") {
    out = true;
    return true;
  }
  if (t == "false" || t == "0") {
    out = false;
    return true;
  }
  return false;
}

bool parse_list(const std::string& s, std::vector<double>& out) {
  out.clear();
  const std::string t = trim(s);
  if (t.empty()) return true;
  std::stringstream ss(t);
  std::string item;
  while (std::getline(ss, item, ',')) {
    double v;
    if (!parse_double(item, v)) return false;
    out.push_back(v);
  }
  return true;
}

// one schema entry: parse assignment and canonical echo
struct Field {
  std::string section, key;
  std::function<bool(const std::string&, ExperimentConfig&)> set;
  std::function<std::string(const ExperimentConfig&)> get;
};

std::vector<Field> schema() {
  std::vector<Field> f;

#define FIELD_STR(sec, key, path)                                        \
  f.push_back({sec, key,                                                 \
               [](const std::string& v, ExperimentConfig& c) {           \
                 c.path = trim(v);                                       \
                 return true;                                            \
               },                                                        \
               [](const ExperimentConfig& c) { return c.path; }})
#define FIELD_DOUBLE(sec, key, path)                                     \
  f.push_back({sec, key,                                                 \
               [](const std::string& v, ExperimentConfig& c) {           \
                 return parse_double(v, c.path);                         \
               },                                                        \
               [](const ExperimentConfig& c) { return fmt_g(c.path); }})
#define FIELD_INT(sec, key, path)                                        \
  f.push_back({sec, key,                                                 \
               [](const std::string& v, ExperimentConfig& c) {           \
                 return parse_int(v, c.path);                            \
               },                                                        \
               [](const ExperimentConfig& c) { return std::to_string(c.path); }})
#define FIELD_U64(sec, key, path)                                        \
  f.push_back({sec, key,                                                 \
               [](const std::string& v, ExperimentConfig& c) {           \
                 return parse_u64(v, c.path);                            \
               },                                                        \
               [](const ExperimentConfig& c) { return std::to_string(c.path); }})
#define FIELD_BOOL(sec, key, path)                                       \
  f.push_back({sec, key,                                                 \
               [](const std::string& v, ExperimentConfig& c) {           \
                 return parse_bool(v, c.path);                           \
               },                                                        \
               [](const ExperimentConfig& c) { return c.path ? "true" : "false"; }})
#define FIELD_LIST(sec, key, path)                                       \
  f.push_back({sec, key,                                                 \
               [](const std::string& v, ExperimentConfig& c) {           \
                 return parse_list(v, c.path);                           \
               },                                                        \
               [](const ExperimentConfig& c) { return fmt_list(c.path); }})

  FIELD_STR("experiment", "kind", experiment.kind);
  FIELD_STR("experiment", "preset", experiment.preset);
  FIELD_U64("experiment", "seed", experiment.seed);
  FIELD_STR("experiment", "out", experiment.out);
  FIELD_INT("experiment", "jobs", experiment.jobs);
  FIELD_BOOL("experiment", "strict_assumptions", experiment.strict_assumptions);
  FIELD_INT("experiment", "memory_budget_mb", experiment.memory_budget_mb);
  FIELD_BOOL("experiment", "export_trajectories", experiment.export_trajectories);

  FIELD_INT("spectrum", "n_modes", spectrum.n_modes);
  FIELD_DOUBLE("spectrum", "alpha", spectrum.alpha);
  FIELD_DOUBLE("spectrum", "lambda_power", spectrum.lambda_power);
  FIELD_DOUBLE("spectrum", "r", spectrum.r);
  FIELD_DOUBLE("spectrum", "amp", spectrum.amp);
  FIELD_DOUBLE("spectrum", "kappa1", spectrum.kappa1);

  FIELD_INT("grid", "n_points", grid.n_points);

  FIELD_STR("drift_b", "kind", drift_b.kind);
  FIELD_DOUBLE("drift_b", "ax", drift_b.ax);
  FIELD_DOUBLE("drift_b", "ay", drift_b.ay);
  FIELD_DOUBLE("drift_b", "eta1", drift_b.eta1);
  FIELD_DOUBLE("drift_b", "eta2", drift_b.eta2);
  FIELD_DOUBLE("drift_b", "eta_x", drift_b.eta_x);
  FIELD_DOUBLE("drift_b", "eta_y", drift_b.eta_y);

  FIELD_STR("drift_f", "kind", drift_f.kind);
  FIELD_DOUBLE("drift_f", "ax", drift_f.ax);
  FIELD_DOUBLE("drift_f", "ay", drift_f.ay);
  FIELD_DOUBLE("drift_f", "eta3", drift_f.eta3);
  FIELD_DOUBLE("drift_f", "eta_x", drift_f.eta_x);
  FIELD_DOUBLE("drift_f", "eta_y", drift_f.eta_y);

  FIELD_DOUBLE("run", "T", run.T);
  FIELD_DOUBLE("run", "dt_macro", run.dt_macro);
  FIELD_LIST("run", "epsilons", run.epsilons);
  FIELD_DOUBLE("run", "epsilon", run.epsilon);
  FIELD_STR("run", "delta_policy", run.delta_policy);
  FIELD_DOUBLE("run", "delta", run.delta);
  FIELD_INT("run", "replicas", run.replicas);
  FIELD_LIST("run", "p_moments", run.p_moments);
  FIELD_DOUBLE("run", "theta", run.theta);
  FIELD_DOUBLE("run", "theta_prime", run.theta_prime);
  FIELD_DOUBLE("run", "micro_kappa", run.micro_kappa);
  FIELD_LIST("run", "x_coeffs", run.x_coeffs);
  FIELD_LIST("run", "y0_coeffs", run.y0_coeffs);

  FIELD_DOUBLE("estimator", "t_burn", estimator.t_burn);
  FIELD_DOUBLE("estimator", "t_avg", estimator.t_avg);
  FIELD_DOUBLE("estimator", "dt", estimator.dt);
  FIELD_INT("estimator", "replicas", estimator.replicas);
  FIELD_DOUBLE("estimator", "stderr_tol", estimator.stderr_tol);
  FIELD_DOUBLE("estimator", "quant_step", estimator.quant_step);

  FIELD_DOUBLE("frozen", "t_burn", frozen.t_burn);
  FIELD_DOUBLE("frozen", "t_avg", frozen.t_avg);
  FIELD_DOUBLE("frozen", "dt", frozen.dt);
  FIELD_INT("frozen", "replicas", frozen.replicas);
  FIELD_DOUBLE("frozen", "stderr_tol", frozen.stderr_tol);
  FIELD_LIST("frozen", "t_grid", frozen.t_grid);
  FIELD_DOUBLE("frozen", "mixing_far_scale", frozen.mixing_far_scale);
  FIELD_INT("frozen", "mixing_replicas", frozen.mixing_replicas);

  FIELD_INT("zvonkin", "dims", zvonkin.dims);
  FIELD_STR("zvonkin", "drift", zvonkin.drift);
  FIELD_DOUBLE("zvonkin", "drift_scale", zvonkin.drift_scale);
  FIELD_DOUBLE("zvonkin", "const_value", zvonkin.const_value);
  FIELD_LIST("zvonkin", "lambdas", zvonkin.lambdas);
  FIELD_DOUBLE("zvonkin", "half_width", zvonkin.half_width);
  FIELD_INT("zvonkin", "nodes_per_dim", zvonkin.nodes_per_dim);
  FIELD_DOUBLE("zvonkin", "t_max", zvonkin.t_max);
  FIELD_INT("zvonkin", "n_time", zvonkin.n_time);
  FIELD_INT("zvonkin", "n_paths", zvonkin.n_paths);
  FIELD_DOUBLE("zvonkin", "picard_tol", zvonkin.picard_tol);
  FIELD_INT("zvonkin", "max_iter", zvonkin.max_iter);
  FIELD_STR("zvonkin", "boundary", zvonkin.boundary);
  FIELD_DOUBLE("zvonkin", "split_c", zvonkin.split_c);

  FIELD_LIST("noise", "alphas", noise.alphas);
  FIELD_INT("noise", "samples", noise.samples);
  FIELD_DOUBLE("noise", "split_dt", noise.split_dt);
  FIELD_INT("noise", "split_samples", noise.split_samples);
  FIELD_BOOL("noise", "dump_path", noise.dump_path);

#undef FIELD_STR
#undef FIELD_DOUBLE
#undef FIELD_INT
#undef FIELD_U64
#undef FIELD_BOOL
#undef FIELD_LIST
  return f;
}

const std::vector<Field>& schema_cached() {
  static const std::vector<Field> s = schema();
  return s;
}

void validate_semantics(const ExperimentConfig& c, std::vector<std::string>& violations) {
  auto bad = [&](const std::string& msg) { violations.push_back(msg); };

  static const char* kinds[] = {"assumptions", "noise-check", "frozen", "avg-drift",
                                "mixing",      "converge",    "zvonkin"};
  if (std::find_if(std::begin(kinds), std::end(kinds),
                   [&](const char* k) { return c.experiment.kind == k; }) == std::end(kinds))
    bad("experiment.kind: unknown run kind '" + c.experiment.kind + "'");
  if (c.experiment.preset != "heat1d")
    bad("experiment.preset: unknown preset '" + c.experiment.preset + "' (registered: heat1d)");
  if (c.experiment.jobs < 1) bad("experiment.jobs: must be >= 1");
  if (c.experiment.memory_budget_mb < 1) bad("experiment.memory_budget_mb: must be >= 1");

  if (c.spectrum.n_modes < 1) bad("spectrum.n_modes: must be >= 1");
  if (!(c.spectrum.alpha > 1.0 && c.spectrum.alpha <= 2.0))
    bad("spectrum.alpha: must lie in (1, 2]");
  if (!(c.spectrum.r > 0.0)) bad("spectrum.r: must be > 0");
  if (!(c.spectrum.amp > 0.0)) bad("spectrum.amp: must be > 0");
  if (!(c.spectrum.kappa1 > 0.0 && c.spectrum.kappa1 < 0.5))
    bad("spectrum.kappa1: must lie in (0, 1/2)");
  if (c.experiment.strict_assumptions) {
    const double a = c.spectrum.alpha;
    const double lo = 1.0 / (2.0 * a), hi = (a - 1.0) / a;
    if (!(c.spectrum.r > lo && c.spectrum.r < hi))
      bad("spectrum.r: strict mode requires r in (1/(2 alpha), (alpha-1)/alpha) = (" + fmt_g(lo) +
          ", " + fmt_g(hi) + "), got " + fmt_g(c.spectrum.r));
  }

  if (c.grid.n_points < 2 * c.spectrum.n_modes)
    bad("grid.n_points: must be >= 2 * spectrum.n_modes (anti-aliasing)");

  static const char* drift_kinds[] = {"zero", "const", "sincos", "sinsin",
                                      "sin_x", "sin_y", "holder"};
  auto known_drift = [&](const std::string& k) {
    return std::find_if(std::begin(drift_kinds), std::end(drift_kinds),
                        [&](const char* d) { return k == d; }) != std::end(drift_kinds);
  };
  if (!known_drift(c.drift_b.kind)) bad("drift_b.kind: unknown drift '" + c.drift_b.kind + "'");
  if (!known_drift(c.drift_f.kind)) bad("drift_f.kind: unknown drift '" + c.drift_f.kind + "'");
  // dissipativity is checkable at configuration time: lambda_1 = 1 for the
  // power-law spectrum
  if (c.drift_f.kind == "sinsin" || c.drift_f.kind == "sincos" || c.drift_f.kind == "sin_y") {
    if (!(1.0 - std::abs(c.drift_f.ay) > 0.0))
      bad("drift_f.ay: lambda_1 - L_F = " + fmt_g(1.0 - std::abs(c.drift_f.ay)) +
          " must be positive");
  }
  if (c.drift_f.kind == "holder" && c.drift_f.ay != 0.0)
    bad("drift_f.kind: the holder map is not Lipschitz in y and cannot drive the fast equation");

  if (!(c.run.T > 0.0)) bad("run.T: must be > 0");
  if (!(c.run.dt_macro > 0.0)) bad("run.dt_macro: must be > 0");
  if (c.run.epsilons.empty()) bad("run.epsilons: empty list");
  for (double e : c.run.epsilons)
    if (!(e > 0.0 && e <= 1.0)) bad("run.epsilons: entries must lie in (0, 1]");
  for (std::size_t i = 1; i < c.run.epsilons.size(); ++i)
    if (!(c.run.epsilons[i] < c.run.epsilons[i - 1])) {
      bad("run.epsilons: list must be strictly decreasing");
      break;
    }
  if (!(c.run.epsilon > 0.0 && c.run.epsilon <= 1.0)) bad("run.epsilon: must lie in (0, 1]");
  if (c.run.delta_policy != "sqrt_eps" && c.run.delta_policy != "fixed")
    bad("run.delta_policy: must be sqrt_eps or fixed");
  if (c.run.replicas < 1) bad("run.replicas: must be >= 1");
  if (c.run.p_moments.empty()) bad("run.p_moments: empty list");
  for (double p : c.run.p_moments)
    if (!(p > 0.0)) bad("run.p_moments: entries must be > 0");
  if (static_cast<int>(c.run.x_coeffs.size()) > c.spectrum.n_modes)
    bad("run.x_coeffs: more coefficients than modes");
  if (static_cast<int>(c.run.y0_coeffs.size()) > c.spectrum.n_modes)
    bad("run.y0_coeffs: more coefficients than modes");

  if (c.estimator.replicas < 2) bad("estimator.replicas: must be >= 2");
  if (!(c.estimator.t_burn > 0.0 && c.estimator.t_avg > 0.0 && c.estimator.dt > 0.0))
    bad("estimator: t_burn, t_avg and dt must be > 0");
  if (c.frozen.replicas < 2) bad("frozen.replicas: must be >= 2");
  if (!(c.frozen.t_burn > 0.0 && c.frozen.t_avg > 0.0 && c.frozen.dt > 0.0))
    bad("frozen: t_burn, t_avg and dt must be > 0");

  if (c.zvonkin.dims != 1 && c.zvonkin.dims != 2) bad("zvonkin.dims: must be 1 or 2");
  if (c.zvonkin.drift != "tanh" && c.zvonkin.drift != "const" && c.zvonkin.drift != "zero")
    bad("zvonkin.drift: must be tanh, const or zero");
  if (c.zvonkin.boundary != "clamp" && c.zvonkin.boundary != "absorb")
    bad("zvonkin.boundary: must be clamp or absorb");
  if (c.zvonkin.nodes_per_dim < 5) bad("zvonkin.nodes_per_dim: must be >= 5");
  if (c.zvonkin.lambdas.empty()) bad("zvonkin.lambdas: empty list");
  for (double l : c.zvonkin.lambdas)
    if (!(l > 0.0)) bad("zvonkin.lambdas: entries must be > 0");
  if (c.spectrum.alpha >= 2.0 && c.experiment.kind == "zvonkin")
    bad("zvonkin: requires alpha < 2");

  for (double a : c.noise.alphas)
    if (!(a > 1.0 && a <= 2.0)) bad("noise.alphas: entries must lie in (1, 2]");
  if (c.noise.samples < 1000) bad("noise.samples: must be >= 1000");
  if (c.noise.split_samples < 1000) bad("noise.split_samples: must be >= 1000");
}

}  // namespace

std::string ExperimentConfig::echo() const {
  std::string out;
  std::string current;
  for (const Field& f : schema_cached()) {
    if (f.section != current) {
      if (!out.empty()) out += '\n';
      out += '[' + f.section + "]\n";
      current = f.section;
    }
    out += f.key + " = " + f.get(*this) + '\n';
  }
  return out;
}

std::uint64_t fnv1a64(const std::string& text) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char ch : text) {
    h ^= ch;
    h *= 0x100000001b3ULL;
  }
  return h;
}

std::string ExperimentConfig::config_hash() const {
  // execution-only keys do not change the semantics of the run
  std::string filtered;
  std::istringstream in(echo());
  std::string line, section;
  while (std::getline(in, line)) {
    if (!line.empty() && line.front() == '[') section = line;
    if (section == "[experiment]" &&
        (line.rfind("out = ", 0) == 0 || line.rfind("jobs = ", 0) == 0))
      continue;
    filtered += line;
    filtered += '\n';
  }
  char buf[20];
  std::snprintf(buf, sizeof buf, "%016llx",
                static_cast<unsigned long long>(fnv1a64(filtered)));
  return buf;
}

ConfigLoadResult load_config_text(const std::string& text) {
  ConfigLoadResult res;
  ExperimentConfig cfg;  // defaults = heat1d preset
  std::istringstream in(text);
  std::string line, section;
  int lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    const std::string t = trim(line);
    if (t.empty() || t.front() == '#' || t.front() == ';') continue;
    if (t.front() == '[') {
      if (t.back() != ']') {
        res.violations.push_back("line " + std::to_string(lineno) + ": malformed section header");
        continue;
      }
      section = trim(t.substr(1, t.size() - 2));
      continue;
    }
    const auto eq = t.find('=');
    if (eq == std::string::npos) {
      res.violations.push_back("line " + std::to_string(lineno) + ": expected key = value");
      continue;
    }
    const std::string key = trim(t.substr(0, eq));
    const std::string value = trim(t.substr(eq + 1));
    const auto& fields = schema_cached();
    const auto it = std::find_if(fields.begin(), fields.end(), [&](const Field& f) {
      return f.section == section && f.key == key;
    });
    if (it == fields.end()) {
      res.violations.push_back("unknown key '" + section + "." + key + "'");
      continue;
    }
    if (!it->set(value, cfg))
      res.violations.push_back("invalid value for '" + section + "." + key + "': '" + value + "'");
  }
  validate_semantics(cfg, res.violations);
  if (res.violations.empty()) res.config = cfg;
  return res;
}

ConfigLoadResult load_config_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) {
    ConfigLoadResult res;
    res.violations.push_back("cannot read config file '" + path + "'");
    return res;
  }
  std::stringstream ss;
  ss << in.rdbuf();
  return load_config_text(ss.str());
}

ExperimentConfig preset_heat1d() { return ExperimentConfig{}; }

namespace {

struct BuiltSystem {
  ModeSpectrum spectrum;
  std::shared_ptr<const SineTransform> transform;
  std::unique_ptr<Drift> b, f;
  SpectralVec x0, y0;
};

SpectralVec padded(const std::vector<double>& coeffs, int n) {
  SpectralVec v(static_cast<std::size_t>(n));
  for (std::size_t i = 0; i < coeffs.size() && i < static_cast<std::size_t>(n); ++i)
    v.c[i] = coeffs[i];
  return v;
}

BuiltSystem build_system(const ExperimentConfig& cfg) {
  BuiltSystem sys;
  sys.spectrum = cfg.make_spectrum();
  sys.transform = std::make_shared<SineTransform>(cfg.spectrum.n_modes, cfg.grid.n_points);

  DriftSpec bs;
  bs.kind = cfg.drift_b.kind;
  bs.ax = cfg.drift_b.ax;
  bs.ay = cfg.drift_b.ay;
  bs.eta_x = cfg.drift_b.eta_x;
  bs.eta_y = cfg.drift_b.eta_y;
  bs.eta1 = cfg.drift_b.eta1;
  bs.eta2 = cfg.drift_b.eta2;
  if (bs.kind == "const") bs.const_coeffs = padded({1.0}, cfg.spectrum.n_modes).c;
  sys.b = std::make_unique<Drift>(make_drift(bs, sys.transform));

  DriftSpec fs_;
  fs_.kind = cfg.drift_f.kind;
  fs_.ax = cfg.drift_f.ax;
  fs_.ay = cfg.drift_f.ay;
  fs_.eta_x = cfg.drift_f.eta_x;
  fs_.eta_y = cfg.drift_f.eta_y;
  fs_.eta3 = cfg.drift_f.eta3;
  if (fs_.kind == "const") fs_.const_coeffs = padded({1.0}, cfg.spectrum.n_modes).c;
  sys.f = std::make_unique<Drift>(make_drift(fs_, sys.transform));

  sys.x0 = padded(cfg.run.x_coeffs, cfg.spectrum.n_modes);
  sys.y0 = padded(cfg.run.y0_coeffs, cfg.spectrum.n_modes);
  return sys;
}

EstimatorConfig estimator_config(const ExperimentConfig& cfg) {
  EstimatorConfig ec;
  ec.t_burn = cfg.estimator.t_burn;
  ec.t_avg = cfg.estimator.t_avg;
  ec.dt = cfg.estimator.dt;
  ec.n_replicas = cfg.estimator.replicas;
  ec.stderr_tol = cfg.estimator.stderr_tol;
  ec.quant_step = cfg.estimator.quant_step;
  return ec;
}

class OutputDir {
 public:
  OutputDir(const ExperimentConfig& cfg, RunResult& result)
      : dir_(cfg.experiment.out), result_(result) {
    header_ = "config_hash=" + cfg.config_hash() +
              " master_seed=" + std::to_string(cfg.experiment.seed);
    fs::create_directories(dir_);
  }

  const std::string& header() const { return header_; }
  fs::path path(const std::string& name) const { return fs::path(dir_) / name; }

  std::ofstream open_csv(const std::string& name) {
    std::ofstream os(path(name));
    os << "# " << header_ << "\n";
    result_.files.push_back(name);
    return os;
  }

  void write_json(const std::string& name, const json& j) {
    std::ofstream os(path(name));
    os << j.dump(2) << "\n";
    result_.files.push_back(name);
  }

  void write_text(const std::string& name, const std::string& text) {
    std::ofstream os(path(name));
    os << text;
    result_.files.push_back(name);
  }

 private:
  std::string dir_;
  RunResult& result_;
  std::string header_;
};

json lineage_json(const ExperimentConfig& cfg) {
  return json{{"master_seed", cfg.experiment.seed},
              {"derivation", "mt19937_64 seeded by mix64 chain over (master, domain, replica, stream)"},
              {"stream_order", "mode-major within each step"}};
}

json assumption_json(const AssumptionReport& rep) {
  return json{{"alpha", rep.alpha},
              {"kappa1", rep.kappa1},
              {"r_beta", rep.r_beta},
              {"r_gamma", rep.r_gamma},
              {"gamma_index", rep.gamma_index},
              {"sum_beta_alpha", rep.sum_beta_alpha},
              {"sum_gamma_alpha", rep.sum_gamma_alpha},
              {"sum_inv_lambda", rep.sum_inv_lambda},
              {"t_grid", rep.t_grid},
              {"lambda1", rep.lambda1},
              {"lambda2", rep.lambda2},
              {"lambda3", rep.lambda3},
              {"integral_lambda_gamma_prime", rep.integral_lambda_gamma_prime},
              {"integral_lambda3", rep.integral_lambda3},
              {"flags",
               {{"beta_sum_converges", rep.beta_sum_converges},
                {"gamma_sum_converges", rep.gamma_sum_converges},
                {"inv_lambda_sum_converges", rep.inv_lambda_sum_converges},
                {"gamma_index_admissible", rep.gamma_index_admissible},
                {"kappa1_admissible", rep.kappa1_admissible},
                {"lambda_integral_finite", rep.lambda_integral_finite},
                {"lambda3_integral_finite", rep.lambda3_integral_finite},
                {"all_pass", rep.all_pass()}}}};
}

void run_assumptions(const ExperimentConfig& cfg, OutputDir& out, RunResult& result) {
  const ModeSpectrum spectrum = cfg.make_spectrum();
  const AssumptionReport rep =
      check_assumptions(spectrum, cfg.spectrum.alpha, cfg.spectrum.kappa1, cfg.spectrum.r);
  out.write_json("assumptions.json", assumption_json(rep));
  json summary{{"kind", "assumptions"},
               {"config_hash", cfg.config_hash()},
               {"seed_lineage", lineage_json(cfg)},
               {"report", assumption_json(rep)},
               {"config_echo", cfg.echo()}};
  out.write_json("summary.json", summary);
  if (cfg.experiment.strict_assumptions && !rep.all_pass()) {
    result.exit_code = kExitConfigError;
    result.status = "config-error";
    result.failures.push_back("assumption flags failed under strict mode");
  }
}

void run_noise_check(const ExperimentConfig& cfg, OutputDir& out, RunResult& result) {
  std::ofstream csv = out.open_csv("noise_check.csv");
  csv << "alpha,statistic,value,expected,tol,pass\n";
  bool all_ok = true;
  auto row = [&](double alpha, const std::string& stat, double value, double expected,
                 double tol, bool pass) {
    csv << fmt_g(alpha) << ',' << stat << ',' << fmt_g(value) << ',' << fmt_g(expected) << ','
        << fmt_g(tol) << ',' << (pass ? "true" : "false") << "\n";
    all_ok = all_ok && pass;
  };

  const std::size_t n = static_cast<std::size_t>(cfg.noise.samples);
  for (std::size_t ai = 0; ai < cfg.noise.alphas.size(); ++ai) {
    const double alpha = cfg.noise.alphas[ai];
    RngStream rng(SeedLineage{cfg.experiment.seed, static_cast<std::uint32_t>(ai),
                              StreamDomain::kGeneric, 0});
    const auto samples = sample_sas(StableParams{alpha, 1.0}, n, rng);
    if (alpha == 2.0) {
      const double var = sample_variance(samples);
      row(alpha, "variance", var, 2.0, 0.04, std::abs(var - 2.0) <= 0.04);
      continue;
    }
    const double hill = hill_index_extrapolated(samples);
    row(alpha, "hill_extrapolated", hill, alpha, 0.1, std::abs(hill - alpha) <= 0.1);
    const double slope = tail_slope(samples);
    row(alpha, "tail_slope", slope, alpha, 0.15, std::abs(slope - alpha) <= 0.15);
    std::vector<double> abs_sorted(samples);
    for (double& v : abs_sorted) v = std::abs(v);
    std::sort(abs_sorted.begin(), abs_sorted.end());
    for (int j = 1; j <= 10; ++j) {
      const double p = static_cast<double>(j) / 11.0;
      const double emp = quantile_sorted(abs_sorted, p);
      const double exact = sas_abs_quantile(p, alpha);
      const double rel = std::abs(emp / exact - 1.0);
      row(alpha, "abs_quantile_p" + std::to_string(j), emp, exact, 0.02, rel <= 0.02);
    }
  }

  // split-step exactness per mode of the preset spectrum
  const ModeSpectrum spectrum = cfg.make_spectrum();
  const double dt = cfg.noise.split_dt;
  const int ns = cfg.noise.split_samples;
  const NoisePath direct = generate_noise_path(
      spectrum, cfg.spectrum.alpha, NoiseBand::kSlow, dt, ns, 1.0,
      SeedLineage{cfg.experiment.seed, 1001, StreamDomain::kSlowNoise, 0});
  const NoisePath fine = generate_noise_path(
      spectrum, cfg.spectrum.alpha, NoiseBand::kSlow, 0.5 * dt, 2 * ns, 1.0,
      SeedLineage{cfg.experiment.seed, 1002, StreamDomain::kSlowNoise, 0});
  const NoisePath composed = aggregate_pairs(fine, spectrum, 1.0);
  for (int m = 0; m < spectrum.n_modes(); ++m) {
    std::vector<double> a(static_cast<std::size_t>(ns)), b(static_cast<std::size_t>(ns));
    for (int k = 0; k < ns; ++k) {
      a[static_cast<std::size_t>(k)] = direct.increments[static_cast<std::size_t>(k) * spectrum.n_modes() + m];
      b[static_cast<std::size_t>(k)] = composed.increments[static_cast<std::size_t>(k) * spectrum.n_modes() + m];
    }
    const auto cmp = two_sample_quantile_test(std::move(a), std::move(b), 19);
    row(cfg.spectrum.alpha, "split_quantile_worst_mode_" + std::to_string(m + 1),
        cmp.worst_ratio, 0.0, 1.0, cmp.pass());
  }

  if (cfg.noise.dump_path) {
    std::ofstream bin(out.path("noise_path.bin"), std::ios::binary);
    dump_noise_path(direct, bin);
    result.files.push_back("noise_path.bin");
  }

  json summary{{"kind", "noise-check"},
               {"config_hash", cfg.config_hash()},
               {"seed_lineage", lineage_json(cfg)},
               {"all_pass", all_ok},
               {"config_echo", cfg.echo()}};
  out.write_json("summary.json", summary);
  if (!all_ok) {
    result.exit_code = kExitNumericalError;
    result.status = "numerical-error";
    result.failures.push_back("one or more sampler fidelity checks failed (see noise_check.csv)");
  }
}

void run_frozen(const ExperimentConfig& cfg, OutputDir& out, RunResult& result) {
  BuiltSystem sys = build_system(cfg);
  const double T = cfg.frozen.t_burn + cfg.frozen.t_avg;
  const int n_steps = static_cast<int>(std::llround(T / cfg.frozen.dt));
  std::ofstream csv = out.open_csv("frozen.csv");
  csv << "replica,sup_norm,mean_norm,final_norm\n";
  for (int r = 0; r < cfg.frozen.replicas; ++r) {
    const NoisePath noise = generate_noise_path(
        sys.spectrum, cfg.spectrum.alpha, NoiseBand::kFast, cfg.frozen.dt, n_steps, 1.0,
        SeedLineage{cfg.experiment.seed, static_cast<std::uint32_t>(r), StreamDomain::kFrozenNoise, 0});
    const Trajectory traj =
        simulate_frozen(sys.spectrum, sys.x0, sys.y0, *sys.f, n_steps, noise, 1);
    double sup = 0.0, mean = 0.0;
    for (const auto& s : traj.states) {
      sup = std::max(sup, s.norm());
      mean += s.norm();
    }
    mean /= traj.n_saved();
    csv << r << ',' << fmt_g(sup) << ',' << fmt_g(mean) << ',' << fmt_g(traj.back().norm())
        << "\n";
    if (cfg.experiment.export_trajectories) {
      std::ofstream tcsv(out.path("traj_replica_" + std::to_string(r) + ".csv"));
      write_trajectory_csv(tcsv, traj, out.header());
      result.files.push_back("traj_replica_" + std::to_string(r) + ".csv");
    }
  }
  json summary{{"kind", "frozen"},
               {"config_hash", cfg.config_hash()},
               {"seed_lineage", lineage_json(cfg)},
               {"replicas", cfg.frozen.replicas},
               {"config_echo", cfg.echo()}};
  out.write_json("summary.json", summary);
}

void run_avg_drift(const ExperimentConfig& cfg, OutputDir& out, RunResult& result) {
  BuiltSystem sys = build_system(cfg);
  EstimatorConfig ec;
  ec.t_burn = cfg.frozen.t_burn;
  ec.t_avg = cfg.frozen.t_avg;
  ec.dt = cfg.frozen.dt;
  ec.n_replicas = cfg.frozen.replicas;
  ec.stderr_tol = cfg.frozen.stderr_tol;
  const auto est = estimate_averaged_drift(sys.spectrum, cfg.spectrum.alpha, sys.x0, *sys.b,
                                           *sys.f, sys.y0, ec, cfg.experiment.seed);
  std::ofstream csv = out.open_csv("avg_drift.csv");
  csv << "mode,value,stderr\n";
  for (int n = 0; n < est.value.size(); ++n)
    csv << (n + 1) << ',' << fmt_g(est.value[n]) << ','
        << fmt_g(est.stderr_mode[static_cast<std::size_t>(n)]) << "\n";
  json summary{{"kind", "avg-drift"},
               {"config_hash", cfg.config_hash()},
               {"seed_lineage", lineage_json(cfg)},
               {"reliable", est.reliable},
               {"max_stderr", est.max_stderr},
               {"t_burn", est.t_burn},
               {"t_avg", est.t_avg},
               {"replicas", est.n_replicas},
               {"warning", est.reliable ? "" : "estimate flagged unreliable (stderr above tolerance)"},
               {"config_echo", cfg.echo()}};
  out.write_json("summary.json", summary);
  (void)result;
}

void run_mixing(const ExperimentConfig& cfg, OutputDir& out, RunResult& result) {
  BuiltSystem sys = build_system(cfg);
  const Observable phi(ObservableSpec{"sin_mode", 0, 1.0, 1.0});
  std::vector<SpectralVec> ys{sys.y0};
  SpectralVec far = SpectralVec::unit(cfg.spectrum.n_modes, 0);
  ys.push_back(cfg.frozen.mixing_far_scale * far);
  const MixingTable table =
      mixing_check(sys.spectrum, cfg.spectrum.alpha, sys.x0, phi, ys, cfg.frozen.t_grid, *sys.f,
                   cfg.frozen.dt, cfg.frozen.mixing_replicas, cfg.experiment.seed);
  std::ofstream csv = out.open_csv("mixing.csv");
  csv << "y_index,t,value,stderr,gap\n";
  for (const auto& row : table.rows)
    csv << row.y_index << ',' << fmt_g(row.t) << ',' << fmt_g(row.value) << ','
        << fmt_g(row.stderr_value) << ',' << fmt_g(row.gap) << "\n";
  json summary{{"kind", "mixing"},
               {"config_hash", cfg.config_hash()},
               {"seed_lineage", lineage_json(cfg)},
               {"long_run", table.long_run},
               {"long_run_stderr", table.long_run_stderr},
               {"fitted_rate", table.fitted_rate},
               {"config_echo", cfg.echo()}};
  out.write_json("summary.json", summary);
  (void)result;
}

std::string moment_label(double p) {
  if (p == 0.5) return "moment_p05";
  if (p == std::floor(p)) return "moment_p" + std::to_string(static_cast<int>(p));
  std::string s = "moment_p" + fmt_g(p);
  std::replace(s.begin(), s.end(), '.', '_');
  return s;
}

void run_converge(const ExperimentConfig& cfg, OutputDir& out, RunResult& result) {
  BuiltSystem sys = build_system(cfg);
  const AssumptionReport rep =
      check_assumptions(sys.spectrum, cfg.spectrum.alpha, cfg.spectrum.kappa1, cfg.spectrum.r);
  if (cfg.experiment.strict_assumptions && !rep.all_pass()) {
    result.exit_code = kExitConfigError;
    result.status = "config-error";
    result.failures.push_back("assumption flags failed under strict mode");
    return;
  }

  StudyConfig sc;
  sc.base.spectrum = sys.spectrum;
  sc.base.alpha = cfg.spectrum.alpha;
  sc.base.x0 = sys.x0;
  sc.base.y0 = sys.y0;
  sc.base.epsilon = cfg.run.epsilons.front();
  sc.base.T = cfg.run.T;
  sc.base.dt_macro = cfg.run.dt_macro;
  sc.base.micro_kappa = cfg.run.micro_kappa;
  sc.base.master_seed = cfg.experiment.seed;
  sc.base.memory_budget_bytes =
      static_cast<std::size_t>(cfg.experiment.memory_budget_mb) << 20;
  sc.epsilons = cfg.run.epsilons;
  sc.n_replicas = cfg.run.replicas;
  sc.p_set = cfg.run.p_moments;
  sc.theta = cfg.run.theta;
  sc.theta_prime = cfg.run.theta_prime;
  sc.gamma_index = rep.gamma_index;
  sc.fixed_delta = cfg.run.delta_policy == "fixed" ? cfg.run.delta : 0.0;
  sc.jobs = cfg.experiment.jobs;

  BbarEstimator bbar(sys.spectrum, cfg.spectrum.alpha, *sys.b, *sys.f, sys.y0,
                     estimator_config(cfg), cfg.experiment.seed);
  const StudyTable table = convergence_study(sc, *sys.b, *sys.f, bbar);

  std::ofstream csv = out.open_csv("study.csv");
  csv << "epsilon,delta,replicas,median_sup_err,q05,q25,q75,q95";
  for (double p : sc.p_set) csv << ',' << moment_label(p);
  csv << ",theta_tilde,fitted_slope\n";
  const std::string slope = table.have_slope ? fmt_g(table.fitted_slope) : "nan";
  for (const StudyRow& row : table.rows) {
    csv << fmt_g(row.epsilon) << ',' << fmt_g(row.delta) << ',' << row.replicas;
    if (row.ok) {
      csv << ',' << fmt_g(row.report.median) << ',' << fmt_g(row.report.q05) << ','
          << fmt_g(row.report.q25) << ',' << fmt_g(row.report.q75) << ','
          << fmt_g(row.report.q95);
      for (double m : row.report.moments) csv << ',' << fmt_g(m);
    } else {
      for (std::size_t i = 0; i < 5 + sc.p_set.size(); ++i) csv << ",nan";
    }
    csv << ',' << fmt_g(table.theta_tilde) << ',' << slope << "\n";
  }

  json rows = json::array();
  for (const StudyRow& row : table.rows) {
    json jr{{"epsilon", row.epsilon}, {"delta", row.delta},
            {"replicas", row.replicas}, {"ok", row.ok}};
    if (row.ok) {
      jr["median_sup_err"] = row.report.median;
      jr["q05"] = row.report.q05;
      jr["q25"] = row.report.q25;
      jr["q75"] = row.report.q75;
      jr["q95"] = row.report.q95;
      for (std::size_t i = 0; i < sc.p_set.size(); ++i)
        jr[moment_label(sc.p_set[i])] = row.report.moments[i];
      jr["ceiling_ok"] = row.report.ceiling_ok;
    } else {
      jr["error"] = row.error;
      result.failures.push_back("epsilon " + fmt_g(row.epsilon) + ": " + row.error);
    }
    rows.push_back(jr);
  }
  json summary{{"kind", "converge"},
               {"config_hash", cfg.config_hash()},
               {"seed_lineage", lineage_json(cfg)},
               {"rows", rows},
               {"theta_tilde", table.theta_tilde},
               {"fitted_slope", table.have_slope ? json(table.fitted_slope) : json()},
               {"medians_monotone", table.medians_monotone},
               {"endpoints_strict", table.endpoints_strict},
               {"config_echo", cfg.echo()}};
  out.write_json("summary.json", summary);

  if (!result.failures.empty()) {
    result.exit_code = kExitNumericalError;
    result.status = "numerical-error";
  }
}

void run_zvonkin(const ExperimentConfig& cfg, OutputDir& out, RunResult& result) {
  const ModeSpectrum spectrum = cfg.make_spectrum();
  const double alpha = cfg.spectrum.alpha;
  const int dims = cfg.zvonkin.dims;

  GridDrift drift;
  if (cfg.zvonkin.drift == "tanh") {
    const double s = cfg.zvonkin.drift_scale;
    drift = [s, dims](const double* x, double* o) {
      for (int i = 0; i < dims; ++i) o[i] = s * std::tanh(x[i]);
    };
  } else if (cfg.zvonkin.drift == "const") {
    const double v = cfg.zvonkin.const_value;
    drift = [v, dims](const double*, double* o) {
      for (int i = 0; i < dims; ++i) o[i] = v;
    };
  } else {
    drift = [dims](const double*, double* o) {
      for (int i = 0; i < dims; ++i) o[i] = 0.0;
    };
  }

  FeynmanKacConfig fk;
  fk.t_max = cfg.zvonkin.t_max;
  fk.n_time = cfg.zvonkin.n_time;
  fk.n_paths = cfg.zvonkin.n_paths;
  fk.boundary = cfg.zvonkin.boundary == "absorb" ? FeynmanKacConfig::Boundary::kAbsorb
                                                 : FeynmanKacConfig::Boundary::kClamp;
  fk.seed = cfg.experiment.seed;

  std::ofstream csv = out.open_csv("zvonkin.csv");
  csv << "lambda,u_norm,du_norm,iterations,converged,mc_noise,core_residual\n";
  bool all_ok = true;
  for (std::size_t li = 0; li < cfg.zvonkin.lambdas.size(); ++li) {
    const double lambda = cfg.zvonkin.lambdas[li];
    const PicardResult pr =
        picard_solve(spectrum, alpha, lambda, drift, dims, cfg.zvonkin.half_width,
                     cfg.zvonkin.nodes_per_dim, fk, cfg.zvonkin.max_iter, cfg.zvonkin.picard_tol);
    double residual_core = std::nan("");
    std::vector<double> residual;
    if (pr.converged && dims == 1) {
      std::vector<double> bvals(static_cast<std::size_t>(pr.grid.n_nodes()));
      for (int node = 0; node < pr.grid.n_nodes(); ++node) {
        const double x = pr.grid.coord(node, 0);
        drift(&x, &bvals[static_cast<std::size_t>(node)]);
      }
      JumpQuadratureConfig jq;
      jq.split_c = cfg.zvonkin.split_c;
      residual = generator_residual(spectrum, alpha, pr.grid, bvals, jq);
      residual_core = core_sup(pr.grid, residual);
    }
    csv << fmt_g(lambda) << ',' << fmt_g(pr.converged ? pr.grid.u_sup() : std::nan("")) << ','
        << fmt_g(pr.converged ? pr.grid.du_sup() : std::nan("")) << ',' << pr.iterations << ','
        << (pr.converged ? "true" : "false") << ',' << fmt_g(pr.mc_noise_estimate) << ','
        << fmt_g(residual_core) << "\n";
    if (!pr.converged) {
      all_ok = false;
      result.failures.push_back("lambda " + fmt_g(lambda) + ": " + pr.diagnostic);
    }

    // grid dump: node coordinates, U, DU, residual
    std::ofstream gcsv = out.open_csv("zvonkin_grid_" + std::to_string(li) + ".csv");
    for (int d = 0; d < dims; ++d) gcsv << (d ? "," : "") << "x" << (d + 1);
    for (int d = 0; d < dims; ++d) gcsv << ",u" << (d + 1);
    for (int i = 0; i < dims; ++i)
      for (int j = 0; j < dims; ++j) gcsv << ",du" << (i + 1) << (j + 1);
    gcsv << ",residual\n";
    for (int node = 0; node < pr.grid.n_nodes(); ++node) {
      for (int d = 0; d < dims; ++d) gcsv << (d ? "," : "") << fmt_g(pr.grid.coord(node, d));
      for (int d = 0; d < dims; ++d)
        gcsv << ',' << fmt_g(pr.grid.u[static_cast<std::size_t>(node) * dims + d]);
      for (int i = 0; i < dims * dims; ++i)
        gcsv << ',' << fmt_g(pr.grid.du[static_cast<std::size_t>(node) * dims * dims + i]);
      gcsv << ','
           << fmt_g(residual.empty() ? std::nan("") : residual[static_cast<std::size_t>(node)])
           << "\n";
    }
  }

  json summary{{"kind", "zvonkin"},
               {"config_hash", cfg.config_hash()},
               {"seed_lineage", lineage_json(cfg)},
               {"all_converged", all_ok},
               {"config_echo", cfg.echo()}};
  out.write_json("summary.json", summary);
  if (!all_ok) {
    result.exit_code = kExitNumericalError;
    result.status = "numerical-error";
  }
}

}  // namespace

RunResult run_experiment(const ExperimentConfig& cfg) {
  RunResult result;
  const auto t0 = std::chrono::steady_clock::now();
  OutputDir out(cfg, result);
  out.write_text("config.echo", "# " + out.header() + "\n" + cfg.echo());

  try {
    const std::string& kind = cfg.experiment.kind;
    if (kind == "assumptions") {
      run_assumptions(cfg, out, result);
    } else if (kind == "noise-check") {
      run_noise_check(cfg, out, result);
    } else if (kind == "frozen") {
      run_frozen(cfg, out, result);
    } else if (kind == "avg-drift") {
      run_avg_drift(cfg, out, result);
    } else if (kind == "mixing") {
      run_mixing(cfg, out, result);
    } else if (kind == "converge") {
      run_converge(cfg, out, result);
    } else if (kind == "zvonkin") {
      run_zvonkin(cfg, out, result);
    } else {
      result.exit_code = kExitConfigError;
      result.status = "config-error";
      result.failures.push_back("unknown run kind '" + kind + "'");
    }
  } catch (const ResourceError& e) {
    result.exit_code = kExitResourceError;
    result.status = "resource-error";
    result.failures.push_back(e.what());
  } catch (const NumericalError& e) {
    result.exit_code = kExitNumericalError;
    result.status = "numerical-error";
    result.failures.push_back(e.what());
  } catch (const std::invalid_argument& e) {
    result.exit_code = kExitConfigError;
    result.status = "config-error";
    result.failures.push_back(e.what());
  } catch (const std::exception& e) {
    result.exit_code = kExitNumericalError;
    result.status = "numerical-error";
    result.failures.push_back(e.what());
  }

  const double elapsed =
      std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  json manifest{{"kind", cfg.experiment.kind},
                {"status", result.status},
                {"exit_code", result.exit_code},
                {"config_hash", cfg.config_hash()},
                {"master_seed", cfg.experiment.seed},
                {"elapsed_seconds", elapsed},
                {"files", result.files},
                {"failures", result.failures}};
  out.write_json("manifest.json", manifest);
  return result;
}

}  // namespace spdelab
