// lipflow command-line front end. Talks to the engine only through lipflow.h.

#include <cstdint>
#include <cstdio>
#include <fstream>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>

#include <CLI11.hpp>

#include "lipflow/lipflow.h"

namespace {

constexpr int kOk = 0;
constexpr int kUsage = 1;
constexpr int kDiverged = 2;
constexpr int kIo = 3;

int exit_code(lipflow_status s) {
  switch (s) {
    case LIPFLOW_OK: return kOk;
    case LIPFLOW_ERR_INVALID: return kUsage;
    case LIPFLOW_DIVERGED: return kDiverged;
    default: return kIo;
  }
}

int report(lipflow_status s, const char* what) {
  if (s != LIPFLOW_OK) std::cerr << "lipflow " << what << ": " << lipflow_last_error() << "\n";
  return exit_code(s);
}

struct ConfigHandle {
  lipflow_config* ptr = nullptr;
  ~ConfigHandle() { lipflow_config_destroy(ptr); }
};

struct Common {
  std::string config;
  std::optional<std::uint64_t> seed;
  bool deterministic = false;
  std::string out;
  std::optional<int> latent_dim;
};

void add_common(CLI::App* sub, Common& c, bool config_required,
                const char* seed_help = "override the transport seed") {
  auto* opt = sub->add_option("--config", c.config, "experiment configuration (TOML)")->check(CLI::ExistingFile);
  if (config_required) opt->required();
  sub->add_option("--seed", c.seed, seed_help);
  sub->add_flag("--deterministic", c.deterministic, "single-threaded, fixed reduction order");
  sub->add_option("--latent-dim", c.latent_dim, "run in a PCA latent space of this dimension (0 disables)")
      ->check(CLI::NonNegativeNumber);
}

lipflow_status load(const Common& c, ConfigHandle& h) {
  if (auto s = lipflow_config_load(c.config.c_str(), &h.ptr); s != LIPFLOW_OK) return s;
  if (c.seed) lipflow_config_set_seed(h.ptr, *c.seed);
  if (c.latent_dim) lipflow_config_set_latent_dim(h.ptr, *c.latent_dim);
  lipflow_config_set_deterministic(h.ptr, c.deterministic ? 1 : 0);
  return LIPFLOW_OK;
}

int cmd_run(const Common& c) {
  ConfigHandle h;
  if (auto s = load(c, h); s != LIPFLOW_OK) return report(s, "run");
  if (!c.out.empty()) lipflow_config_set_output_dir(h.ptr, c.out.c_str());
  lipflow_outcome* run = nullptr;
  const lipflow_status s = lipflow_run(h.ptr, &run);
  if (run) {
    std::printf("termination=%s steps=%zu final_divergence=%.6g final_ke=%.6g\n", lipflow_run_termination(run),
                lipflow_run_steps(run), lipflow_run_final_divergence(run), lipflow_run_final_kinetic_energy(run));
    lipflow_run_destroy(run);
  }
  return report(s, "run");
}

std::string slurp(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"lipflow: Lipschitz-regularized generative particle transport"};
  app.require_subcommand(1);
  app.set_version_flag("--version", std::string(lipflow_version()));

  Common run_opts;
  auto* run = app.add_subcommand("run", "transport source particles to the target and write artifacts");
  add_common(run, run_opts, true);
  run->add_option("--out", run_opts.out, "output directory (overrides [output].dir)");

  Common gen_opts;
  std::string dist_text;
  std::size_t gen_n = 0;
  auto* gen = app.add_subcommand("datagen", "sample a distribution to CSV");
  auto* dist_file = gen->add_option("--config", gen_opts.config, "distribution table (TOML file)")
                        ->check(CLI::ExistingFile);
  auto* dist_inline = gen->add_option("--dist", dist_text, "distribution as inline TOML, e.g. 'kind = \"swiss_roll\"'");
  dist_file->excludes(dist_inline);
  gen->add_option("--n", gen_n, "number of samples (0: distribution default)");
  gen->add_option("--seed", gen_opts.seed, "override the distribution seed");
  gen->add_option("--out", gen_opts.out, "output CSV")->required();

  Common eval_opts;
  std::string eval_a, eval_b;
  auto* eval = app.add_subcommand("eval", "compare two particle CSVs and print a JSON report");
  eval->add_option("a", eval_a, "first CSV")->required();
  eval->add_option("b", eval_b, "second CSV")->required();
  eval->add_option("--config", eval_opts.config, "configuration whose [eval] table sets the metrics")
      ->check(CLI::ExistingFile);
  eval->add_option("--out", eval_opts.out, "write the report here instead of stdout");

  Common rep_opts;
  std::string ckpt_dir;
  std::size_t rep_n = 0;
  auto* rep = app.add_subcommand("replay", "push fresh source particles through recorded vector fields");
  add_common(rep, rep_opts, true, "seed for the fresh source sample (default: the training source)");
  rep->add_option("--ckpt", ckpt_dir, "checkpoint directory of a run with output.replay = true")
      ->required();
  rep->add_option("--n", rep_n, "number of fresh particles")->required();
  rep->add_option("--out", rep_opts.out, "output CSV")->required();

  Common sweep_opts;
  int sweep_threads = 0;
  auto* sw = app.add_subcommand("sweep", "run the (L, dt, f, alpha) grid from [sweep] and tabulate outcomes");
  add_common(sw, sweep_opts, true);
  sw->add_option("--out", sweep_opts.out, "output CSV")->required();
  sw->add_option("--threads", sweep_threads, "worker threads (0: hardware count)")->check(CLI::NonNegativeNumber);

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int rc = app.exit(e);
    return rc == 0 ? kOk : kUsage;
  }

  if (*run) return cmd_run(run_opts);

  if (*gen) {
    if (gen_opts.config.empty() && dist_text.empty()) {
      std::cerr << "lipflow datagen: one of --config or --dist is required\n" << gen->help();
      return kUsage;
    }
    const std::string text = gen_opts.config.empty() ? dist_text : slurp(gen_opts.config);
    const std::uint64_t* seed = gen_opts.seed ? &*gen_opts.seed : nullptr;
    return report(lipflow_datagen(text.c_str(), gen_n, seed, gen_opts.out.c_str()), "datagen");
  }

  if (*eval) {
    ConfigHandle h;
    if (!eval_opts.config.empty()) {
      if (auto s = lipflow_config_load(eval_opts.config.c_str(), &h.ptr); s != LIPFLOW_OK) return report(s, "eval");
    }
    const char* out = eval_opts.out.empty() ? nullptr : eval_opts.out.c_str();
    return report(lipflow_eval(eval_a.c_str(), eval_b.c_str(), h.ptr, out), "eval");
  }

  if (*rep) {
    ConfigHandle h;
    Common base = rep_opts;
    base.seed.reset();
    if (auto s = load(base, h); s != LIPFLOW_OK) return report(s, "replay");
    const std::uint64_t* seed = rep_opts.seed ? &*rep_opts.seed : nullptr;
    return report(lipflow_replay(ckpt_dir.c_str(), h.ptr, seed, rep_n, rep_opts.out.c_str()), "replay");
  }

  ConfigHandle h;
  if (auto s = load(sweep_opts, h); s != LIPFLOW_OK) return report(s, "sweep");
  return report(lipflow_sweep(h.ptr, sweep_threads, sweep_opts.out.c_str()), "sweep");
}
