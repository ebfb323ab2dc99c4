#pragma once

// Run output (convergence.csv, mesh dumps, solution samples, summary.json)
// and the key = value run configuration format.

#include <cmath>
#include <filesystem>
#include <fstream>
#include <map>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "ndg/driver.hpp"

namespace ndg {

inline constexpr const char* kConvergenceHeader = "pass,n_newton,dofs,sqrt_dofs,estimator,delta_sq,sum_eta_sq,dt,action";

inline const char* mode_name(RefinementMode m) { return m == RefinementMode::hp ? "hp" : "h"; }

inline RefinementMode parse_mode(const std::string& s) {
  if (s == "hp") return RefinementMode::hp;
  if (s == "h" || s == "h-only" || s == "h_only") return RefinementMode::h_only;
  throw std::invalid_argument("unknown refinement mode '" + s + "' (expected h or hp)");
}

inline void write_convergence_csv(const RunRecord& rec, std::ostream& os) {
  os << kConvergenceHeader << '\n';
  os.precision(17);
  for (const PassRecord& r : rec.passes) {
    os << r.pass << ',' << r.n_newton << ',' << r.dofs << ',' << std::sqrt(static_cast<double>(r.dofs)) << ','
       << r.estimator << ',' << r.delta_sq << ',' << r.sum_eta_sq << ',' << r.dt << ',' << action_name(r.action)
       << '\n';
  }
}

/// Per-pass Newton log: n, dt, ||d||_DG, dofs, and refinement counts.
inline void write_newton_log(const RunRecord& rec, std::ostream& os) {
  os << "pass,n_newton,dt,d_norm,dofs,fallback,h_marked,p_marked,closure_forced\n";
  os.precision(17);
  for (const PassRecord& r : rec.passes) {
    os << r.pass << ',' << r.n_newton << ',' << r.dt << ',' << r.d_norm << ',' << r.dofs << ','
       << (r.step_fallback ? 1 : 0) << ',' << r.h_marked << ',' << r.p_marked << ',' << r.closure_forced << '\n';
  }
}

struct RunSummary {
  std::string problem;
  std::string mode;
  double eps = 0.0;
  double amplitude = 0.0;
  std::string status;
  bool converged = false;
  std::string reason;
  double final_estimate = 0.0;
  int dofs = 0;
  int passes = 0;
  int newton_steps = 0;
  int refinements = 0;
  double u_max = 0.0;
  double u_min = 0.0;
  double seconds = 0.0;
  std::vector<double> dt_trace;
  std::vector<std::string> warnings;

  bool operator==(const RunSummary&) const = default;
};

inline void to_json(nlohmann::json& j, const RunSummary& s) {
  j = {{"problem", s.problem},   {"mode", s.mode},
       {"eps", s.eps},           {"amplitude", s.amplitude},
       {"status", s.status},     {"converged", s.converged},
       {"reason", s.reason},     {"final_estimate", s.final_estimate},
       {"dofs", s.dofs},         {"passes", s.passes},
       {"newton_steps", s.newton_steps}, {"refinements", s.refinements},
       {"u_max", s.u_max},       {"u_min", s.u_min},
       {"seconds", s.seconds},   {"dt_trace", s.dt_trace},
       {"warnings", s.warnings}};
}

inline void from_json(const nlohmann::json& j, RunSummary& s) {
  j.at("problem").get_to(s.problem);
  j.at("mode").get_to(s.mode);
  j.at("eps").get_to(s.eps);
  j.at("amplitude").get_to(s.amplitude);
  j.at("status").get_to(s.status);
  j.at("converged").get_to(s.converged);
  j.at("reason").get_to(s.reason);
  j.at("final_estimate").get_to(s.final_estimate);
  j.at("dofs").get_to(s.dofs);
  j.at("passes").get_to(s.passes);
  j.at("newton_steps").get_to(s.newton_steps);
  j.at("refinements").get_to(s.refinements);
  j.at("u_max").get_to(s.u_max);
  j.at("u_min").get_to(s.u_min);
  j.at("seconds").get_to(s.seconds);
  j.at("dt_trace").get_to(s.dt_trace);
  j.at("warnings").get_to(s.warnings);
}

inline RunSummary summarize(const RunRecord& rec) {
  RunSummary s;
  s.problem = rec.problem;
  s.mode = mode_name(rec.mode);
  s.eps = rec.eps;
  s.amplitude = rec.amplitude;
  s.status = status_name(rec.status);
  s.converged = rec.converged();
  s.reason = rec.reason;
  s.passes = static_cast<int>(rec.passes.size());
  s.newton_steps = rec.newton_steps();
  s.refinements = static_cast<int>(rec.meshes.size()) - 1;
  if (!rec.passes.empty()) s.final_estimate = rec.passes.back().estimator;
  if (rec.solution) {
    s.dofs = rec.solution->size();
    if (rec.solution->coefficients().allFinite()) {
      const Extrema ex = sample_extrema(*rec.solution);
      s.u_max = ex.max;
      s.u_min = ex.min;
    }
  }
  s.seconds = rec.seconds;
  for (const PassRecord& r : rec.passes) s.dt_trace.push_back(r.dt);
  s.warnings = rec.warnings;
  return s;
}

inline RunSummary read_summary(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open " + path.string());
  return nlohmann::json::parse(in).get<RunSummary>();
}

namespace detail {

inline std::ofstream open_output(const std::filesystem::path& p) {
  std::ofstream os(p);
  if (!os) throw std::runtime_error("cannot write " + p.string());
  return os;
}

}  // namespace detail

/// Writes convergence.csv, newton_log.csv, meshes/mesh_k.json, solution.csv
/// and summary.json under out_dir.
inline void emit_records(const RunRecord& rec, const std::filesystem::path& out_dir, int sample_n = 100) {
  namespace fs = std::filesystem;
  fs::create_directories(out_dir / "meshes");
  {
    auto os = detail::open_output(out_dir / "convergence.csv");
    write_convergence_csv(rec, os);
  }
  {
    auto os = detail::open_output(out_dir / "newton_log.csv");
    write_newton_log(rec, os);
  }
  for (std::size_t k = 0; k < rec.meshes.size(); ++k) {
    auto os = detail::open_output(out_dir / "meshes" / ("mesh_" + std::to_string(k) + ".json"));
    os << mesh_to_json(*rec.meshes[k]).dump() << '\n';
  }
  if (rec.solution && rec.solution->coefficients().allFinite()) {
    auto os = detail::open_output(out_dir / "solution.csv");
    write_solution_csv(*rec.solution, sample_n, os);
  }
  auto os = detail::open_output(out_dir / "summary.json");
  os << nlohmann::json(summarize(rec)).dump(2) << '\n';
  if (!os) throw std::runtime_error("failed writing " + (out_dir / "summary.json").string());
}

/// Flat key = value document. "[section]" headers prefix later keys with
/// "section."; '#' starts a comment; string values may be double-quoted.
class KeyValueConfig {
 public:
  static KeyValueConfig parse(std::istream& in, const std::string& source = "<config>") {
    KeyValueConfig cfg;
    std::string line, section;
    int lineno = 0;
    while (std::getline(in, line)) {
      ++lineno;
      line = strip_comment(line);
      line = trim(line);
      if (line.empty()) continue;
      if (line.front() == '[') {
        if (line.back() != ']') throw error(source, lineno, "unterminated section header");
        section = trim(line.substr(1, line.size() - 2));
        continue;
      }
      const auto eq = line.find('=');
      if (eq == std::string::npos) throw error(source, lineno, "expected key = value");
      std::string key = trim(line.substr(0, eq));
      std::string value = trim(line.substr(eq + 1));
      if (key.empty()) throw error(source, lineno, "empty key");
      if (value.size() >= 2 && value.front() == '"' && value.back() == '"') value = value.substr(1, value.size() - 2);
      if (!section.empty()) key = section + "." + key;
      if (cfg.values_.contains(key)) throw error(source, lineno, "duplicate key '" + key + "'");
      cfg.values_[key] = value;
    }
    return cfg;
  }

  static KeyValueConfig load(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw std::runtime_error("cannot open config " + path.string());
    return parse(in, path.string());
  }

  bool contains(const std::string& key) const { return values_.contains(key); }

  std::string get(const std::string& key, const std::string& fallback) const {
    used_[key] = true;
    const auto it = values_.find(key);
    return it == values_.end() ? fallback : it->second;
  }

  double get(const std::string& key, double fallback) const {
    const auto it = values_.find(key);
    used_[key] = true;
    if (it == values_.end()) return fallback;
    std::size_t n = 0;
    double v = 0.0;
    try {
      v = std::stod(it->second, &n);
    } catch (const std::exception&) {
      n = 0;
    }
    if (n != it->second.size()) throw std::invalid_argument("config key '" + key + "': not a number: " + it->second);
    return v;
  }

  int get(const std::string& key, int fallback) const {
    const double v = get(key, static_cast<double>(fallback));
    if (v != std::floor(v)) throw std::invalid_argument("config key '" + key + "': expected an integer");
    return static_cast<int>(v);
  }

  bool get(const std::string& key, bool fallback) const {
    const std::string v = get(key, std::string(fallback ? "true" : "false"));
    if (v == "true" || v == "1") return true;
    if (v == "false" || v == "0") return false;
    throw std::invalid_argument("config key '" + key + "': expected true or false");
  }

  /// Keys present in the document that no getter asked for.
  std::vector<std::string> unused() const {
    std::vector<std::string> out;
    for (const auto& [k, v] : values_) {
      if (!used_.contains(k)) out.push_back(k);
    }
    return out;
  }

 private:
  static std::string trim(const std::string& s) {
    const auto b = s.find_first_not_of(" \t\r");
    if (b == std::string::npos) return {};
    const auto e = s.find_last_not_of(" \t\r");
    return s.substr(b, e - b + 1);
  }

  static std::string strip_comment(const std::string& s) {
    bool quoted = false;
    for (std::size_t i = 0; i < s.size(); ++i) {
      if (s[i] == '"') quoted = !quoted;
      if (s[i] == '#' && !quoted) return s.substr(0, i);
    }
    return s;
  }

  static std::invalid_argument error(const std::string& source, int line, const std::string& what) {
    return std::invalid_argument(source + ":" + std::to_string(line) + ": " + what);
  }

  std::map<std::string, std::string> values_;
  mutable std::map<std::string, bool> used_;
};

/// A problem and run configuration read from a KeyValueConfig.
struct RunSetup {
  ProblemSpec problem;
  RunConfig config;
  std::string out_dir = "out";
};

inline RunSetup setup_from_config(const KeyValueConfig& c) {
  RunSetup s;
  const std::string name = c.get("problem", std::string("bratu"));
  const double eps_default = name == "bratu_critical" ? kBratuCriticalEps : 1.0;
  s.problem = preset(name, c.get("eps", eps_default), c.get("amplitude", std::nan("")));
  RunConfig& r = s.config;
  r = default_config(name, s.problem.eps, parse_mode(c.get("mode", std::string("hp"))));
  r.newton.tau = c.get("newton.tau", r.newton.tau);
  r.newton.gamma = c.get("newton.gamma", r.newton.gamma);
  r.newton.h_cap = c.get("newton.h_cap", r.newton.h_cap);
  r.newton.solver.tol = c.get("solver.tol", r.newton.solver.tol);
  r.theta = c.get("dg.theta", r.theta);
  r.c_sigma = c.get("dg.c_sigma", r.c_sigma);
  r.lambda = c.get("adapt.lambda", r.lambda);
  r.marking.upsilon = c.get("adapt.upsilon", r.marking.upsilon);
  r.marking.theta_hp = c.get("adapt.theta_hp", r.marking.theta_hp);
  r.limits.p_max = c.get("adapt.p_max", r.limits.p_max);
  r.limits.level_max = c.get("adapt.level_max", r.limits.level_max);
  r.limits.degree_ratio = c.get("adapt.rho2", r.limits.degree_ratio);
  r.n_init = c.get("mesh.n", r.n_init);
  r.p0 = c.get("mesh.p0", r.p0);
  r.e_tol = c.get("stop.e_tol", r.e_tol);
  r.max_passes = c.get("stop.max_passes", r.max_passes);
  r.max_dofs = c.get("stop.max_dofs", r.max_dofs);
  r.sample_n = c.get("output.sample_n", r.sample_n);
  s.out_dir = c.get("output.dir", s.out_dir);
  const auto extra = c.unused();
  if (!extra.empty()) throw std::invalid_argument("unknown config key '" + extra.front() + "'");
  r.validate();
  return s;
}

}  // namespace ndg
