// ndg: run the adaptive Newton-DG solver from a config file or a preset.
//
//   ndg run --config run.toml [--out dir]
//   ndg preset bratu --eps 1 --amp 6 --mode hp --out dir
//
// Exit status: 0 converged, 2 not converged, 1 error.

#include <cmath>
#include <exception>
#include <iostream>
#include <string>

#include <CLI11.hpp>

#include "ndg/ndg.hpp"

namespace {

int execute(const ndg::RunSetup& setup, bool quiet) {
  const ndg::RunRecord rec = ndg::run_adaptive(setup.problem, setup.config);
  ndg::emit_records(rec, setup.out_dir, setup.config.sample_n);
  if (!quiet) {
    const ndg::RunSummary s = ndg::summarize(rec);
    std::cout << s.problem << " eps=" << s.eps << " mode=" << s.mode << ": " << s.status << " (" << s.reason
              << ")\n  passes=" << s.passes << " newton=" << s.newton_steps << " refinements=" << s.refinements
              << " dofs=" << s.dofs << " E=" << s.final_estimate << " max u=" << s.u_max << " min u=" << s.u_min
              << " time=" << s.seconds << "s\n  records in " << setup.out_dir << '\n';
  }
  switch (rec.status) {
    case ndg::RunStatus::converged: return 0;
    case ndg::RunStatus::not_converged: return 2;
    case ndg::RunStatus::error: return 1;
  }
  return 1;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"hp-adaptive Newton-DG solver for -eps Lap u + u = f(u), u = 0 on the boundary"};
  app.require_subcommand(1);
  bool quiet = false;
  app.add_flag("-q,--quiet", quiet, "Suppress the run summary");

  auto* run = app.add_subcommand("run", "Run from a key = value config file");
  std::string config_path, run_out;
  run->add_option("--config", config_path, "Config file")->required()->check(CLI::ExistingFile);
  run->add_option("--out", run_out, "Output directory (overrides output.dir)");

  auto* pre = app.add_subcommand("preset", "Run a named preset with its default settings");
  std::string name, mode = "hp", pre_out = "out";
  double eps = std::nan(""), amp = std::nan(""), e_tol = std::nan("");
  int max_dofs = 0, max_passes = 0;
  pre->add_option("name", name, "bratu | bratu_critical | ginzburg_landau | manufactured_linear")->required();
  pre->add_option("--eps", eps, "Diffusion coefficient eps in (0,1]");
  pre->add_option("--amp", amp, "Initial guess amplitude");
  pre->add_option("--mode", mode, "Refinement mode: h or hp")->check(CLI::IsMember({"h", "hp"}));
  pre->add_option("--out", pre_out, "Output directory");
  pre->add_option("--e-tol", e_tol, "Stop once the estimator falls below this value");
  pre->add_option("--max-dofs", max_dofs, "Degree-of-freedom cap");
  pre->add_option("--max-passes", max_passes, "Pass cap");

  CLI11_PARSE(app, argc, argv);

  try {
    ndg::RunSetup setup;
    if (*run) {
      setup = ndg::setup_from_config(ndg::KeyValueConfig::load(config_path));
      if (!run_out.empty()) setup.out_dir = run_out;
    } else {
      if (std::isnan(eps)) eps = name == "bratu_critical" ? ndg::kBratuCriticalEps : 1.0;
      setup.problem = ndg::preset(name, eps, amp);
      setup.config = ndg::default_config(name, eps, ndg::parse_mode(mode));
      if (!std::isnan(e_tol)) setup.config.e_tol = e_tol;
      if (max_dofs > 0) setup.config.max_dofs = max_dofs;
      if (max_passes > 0) setup.config.max_passes = max_passes;
      setup.config.validate();
      setup.out_dir = pre_out;
    }
    return execute(setup, quiet);
  } catch (const std::exception& e) {
    std::cerr << "ndg: error: " << e.what() << '\n';
    return 1;
  }
}
