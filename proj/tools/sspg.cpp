// sspg: command-line driver for the experiments.
//
//   sspg run --config <file> [--out <dir>] [--plot] [--threads N]
//   sspg rates --gamma <g> [--gamma <g> ...] --seeds <R> [...]
//   sspg cfp [--angle <rad> | --instance <file>] --seeds <R> [...]
//   sspg generate --n <n> --m <m> --alpha <a> --lambda <l> --seed <s> --out <file>
//   sspg verify --out <dir>
//
// Exit codes: 0 all verdicts pass, 1 some verdict fails, 2 invalid config.

#include "sspg/sspg.hpp"

#include <CLI11.hpp>

#include <iostream>

namespace {

int report(const sspg::Manifest& m) {
  for (const auto& v : m.verdicts)
    std::cout << (v.pass ? "PASS " : "FAIL ") << v.name << ": " << v.detail << '\n';
  for (const auto& u : m.unconverged) std::cout << "unconverged: " << u << '\n';
  std::cout << m.artifacts.size() << " artifacts in " << m.output_dir << '\n';
  return m.all_pass() ? 0 : 1;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Stochastic splitting proximal gradient experiments"};
  app.require_subcommand(1);

  std::string config_path, out_dir;
  bool plot = false;
  unsigned threads = 0;
  auto* run = app.add_subcommand("run", "run an experiment from a JSON config");
  run->add_option("--config", config_path, "config file")->required();
  run->add_option("--out", out_dir, "output directory (overrides config)");
  run->add_flag("--plot", plot, "also write SVG plots");
  run->add_option("--threads", threads, "worker threads")->check(CLI::PositiveNumber);

  sspg::ExperimentConfig rates_cfg;
  rates_cfg.experiment = sspg::ExperimentKind::RateSweep;
  rates_cfg.problem.n = 10;
  rates_cfg.problem.m = 40;
  rates_cfg.problem.alpha = 2.0;
  rates_cfg.problem.lambda = 1e-3;
  rates_cfg.problem.instance_seed = 11;
  rates_cfg.problem.start = "zero";
  rates_cfg.schedule.mu0 = 8.0;
  rates_cfg.schedule.mu0_units = "clamp";
  rates_cfg.schedule.gammas.clear();
  rates_cfg.output_dir = "out/rates";
  auto* rates = app.add_subcommand("rates", "fit decaying-stepsize rate exponents");
  rates->add_option("--gamma", rates_cfg.schedule.gammas, "stepsize exponents")
      ->required();
  rates->add_option("--seeds", rates_cfg.replicas, "Monte-Carlo replicas R")->required();
  rates->add_option("--seed", rates_cfg.seed_base, "base seed");
  rates->add_option("--n", rates_cfg.problem.n, "atoms");
  rates->add_option("--m", rates_cfg.problem.m, "features");
  rates->add_option("--alpha", rates_cfg.problem.alpha, "ridge weight");
  rates->add_option("--lambda", rates_cfg.problem.lambda, "l1 weight");
  rates->add_option("--instance-seed", rates_cfg.problem.instance_seed, "instance seed");
  rates->add_option("--mu0", rates_cfg.schedule.mu0, "mu0 in units of 1/(2 L_f)");
  rates->add_option("--horizon", rates_cfg.run.horizon, "iterations K");
  rates->add_option("--kmin", rates_cfg.run.fit_k_min, "fit window start");
  rates->add_option("--kmax", rates_cfg.run.fit_k_max, "fit window end");
  rates->add_option("--out", rates_cfg.output_dir, "output directory");
  rates->add_option("--threads", rates_cfg.threads, "worker threads");
  rates->add_flag("--plot", rates_cfg.plot, "also write SVG plots");

  sspg::ExperimentConfig cfp_cfg;
  cfp_cfg.experiment = sspg::ExperimentKind::CfpLinear;
  cfp_cfg.run.horizon = 500;
  cfp_cfg.replicas = 200;
  cfp_cfg.output_dir = "out/cfp";
  auto* cfp = app.add_subcommand("cfp", "randomized alternating projections");
  cfp->add_option("--angle", cfp_cfg.cfp.angle, "angle between the two lines (rad)");
  cfp->add_option("--instance", cfp_cfg.cfp.instance, "JSON CFP instance");
  cfp->add_option("--seeds", cfp_cfg.replicas, "Monte-Carlo replicas R");
  cfp->add_option("--seed", cfp_cfg.seed_base, "base seed");
  cfp->add_option("--iterations", cfp_cfg.run.horizon, "iterations K");
  cfp->add_option("--samples", cfp_cfg.cfp.kappa_samples, "kappa estimation samples");
  cfp->add_option("--start-seed", cfp_cfg.problem.start_seed, "seed of the start point");
  cfp->add_option("--out", cfp_cfg.output_dir, "output directory");
  cfp->add_option("--threads", cfp_cfg.threads, "worker threads");
  cfp->add_flag("--plot", cfp_cfg.plot, "also write SVG plots");

  std::size_t gen_n = 10, gen_m = 40;
  double gen_alpha = 0.5, gen_lambda = 5.0;
  std::uint64_t gen_seed = 1;
  std::string gen_out;
  auto* gen = app.add_subcommand("generate", "write a random SR instance");
  gen->add_option("--n", gen_n, "atoms");
  gen->add_option("--m", gen_m, "features");
  gen->add_option("--alpha", gen_alpha, "ridge weight");
  gen->add_option("--lambda", gen_lambda, "l1 weight");
  gen->add_option("--seed", gen_seed, "instance seed");
  gen->add_option("--out", gen_out, "output file")->required();

  std::string verify_dir;
  auto* verify = app.add_subcommand("verify", "re-hash the artifacts of a manifest");
  verify->add_option("--out", verify_dir, "output directory")->required();

  CLI11_PARSE(app, argc, argv);

  try {
    if (*run) {
      sspg::ExperimentConfig cfg = sspg::load_config(config_path);
      if (!out_dir.empty()) cfg.output_dir = out_dir;
      if (plot) cfg.plot = true;
      if (threads) cfg.threads = threads;
      sspg::apply_environment(cfg);
      cfg.validate();
      return report(sspg::run_experiment(cfg));
    }
    if (*rates || *cfp) {
      sspg::ExperimentConfig cfg = *rates ? rates_cfg : cfp_cfg;
      sspg::apply_environment(cfg);
      cfg.validate();
      return report(sspg::run_experiment(cfg));
    }
    if (*gen) {
      sspg::save_sr_instance(
          sspg::generate_sr_instance(gen_n, gen_m, gen_alpha, gen_lambda, gen_seed),
          gen_out);
      return 0;
    }
    if (*verify) {
      const auto bad = sspg::verify_manifest(verify_dir);
      for (const auto& b : bad) std::cout << "mismatch: " << b << '\n';
      std::cout << (bad.empty() ? "manifest verified\n" : "manifest mismatch\n");
      return bad.empty() ? 0 : 1;
    }
  } catch (const sspg::ConfigError& e) {
    std::cerr << "invalid config: " << e.what() << '\n';
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 1;
  }
  return 0;
}
