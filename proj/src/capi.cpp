#include "lipflow/lipflow.h"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <exception>
#include <fstream>
#include <string>

#include "lipflow/config.hpp"
#include "lipflow/datasets.hpp"
#include "lipflow/experiment.hpp"
#include "lipflow/fdiv.hpp"
#include "lipflow/serialize.hpp"

struct lipflow_particles {
  lipflow::ParticleSet set;
};

struct lipflow_net {
  lipflow::netdisc::DiscriminatorNet net;
};

struct lipflow_config {
  lipflow::config::ExperimentConfig cfg;
};

struct lipflow_outcome {
  lipflow::experiment::RunOutcome outcome;
  std::string termination;
  std::string summary;
};

namespace {

thread_local std::string g_last_error;

lipflow_status fail(lipflow_status s, const std::string& msg) {
  g_last_error = msg;
  return s;
}

template <class F>
lipflow_status guarded(F&& body) {
  try {
    g_last_error.clear();
    return body();
  } catch (const lipflow::InvalidArgument& e) {
    return fail(LIPFLOW_ERR_INVALID, e.what());
  } catch (const lipflow::IoError& e) {
    return fail(LIPFLOW_ERR_IO, e.what());
  } catch (const lipflow::fdiv::DivergedError& e) {
    return fail(LIPFLOW_DIVERGED, e.what());
  } catch (const std::bad_alloc&) {
    return fail(LIPFLOW_ERR_INTERNAL, "out of memory");
  } catch (const std::exception& e) {
    return fail(LIPFLOW_ERR_INTERNAL, e.what());
  } catch (...) {
    return fail(LIPFLOW_ERR_INTERNAL, "unknown error");
  }
}

#define LIPFLOW_REQUIRE(cond, msg) \
  do {                             \
    if (!(cond)) return fail(LIPFLOW_ERR_INVALID, msg); \
  } while (0)

lipflow::Matrix from_row_major(const double* data, size_t rows, size_t cols) {
  using RowMajor = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
  return Eigen::Map<const RowMajor>(data, static_cast<Eigen::Index>(rows), static_cast<Eigen::Index>(cols));
}

void to_row_major(const lipflow::Matrix& m, double* out) {
  for (Eigen::Index i = 0; i < m.rows(); ++i)
    for (Eigen::Index j = 0; j < m.cols(); ++j) out[i * m.cols() + j] = m(i, j);
}

}  // namespace

extern "C" {

const char* lipflow_version(void) { return "0.1.0"; }

const char* lipflow_last_error(void) { return g_last_error.c_str(); }

lipflow_status lipflow_particles_create(const double* data, size_t rows, size_t cols, lipflow_particles** out) {
  LIPFLOW_REQUIRE(out, "out is NULL");
  LIPFLOW_REQUIRE(data || rows * cols == 0, "data is NULL");
  LIPFLOW_REQUIRE(cols > 0, "cols must be > 0");
  return guarded([&] {
    auto* p = new lipflow_particles;
    p->set.positions = rows ? from_row_major(data, rows, cols) : lipflow::Matrix(0, static_cast<Eigen::Index>(cols));
    *out = p;
    return LIPFLOW_OK;
  });
}

lipflow_status lipflow_particles_load_csv(const char* path, lipflow_particles** out) {
  LIPFLOW_REQUIRE(path && out, "NULL argument");
  return guarded([&] {
    auto set = lipflow::datasets::load_csv(path);
    *out = new lipflow_particles{std::move(set)};
    return LIPFLOW_OK;
  });
}

lipflow_status lipflow_particles_save_csv(const lipflow_particles* p, const char* path) {
  LIPFLOW_REQUIRE(p && path, "NULL argument");
  return guarded([&] {
    lipflow::datasets::save_csv(p->set, path);
    return LIPFLOW_OK;
  });
}

lipflow_status lipflow_particles_sample(const char* dist_toml, size_t n, lipflow_particles** out) {
  LIPFLOW_REQUIRE(dist_toml && out, "NULL argument");
  return guarded([&] {
    const auto [spec, configured] = lipflow::config::parse_dist_text(dist_toml);
    const Eigen::Index count =
        n ? static_cast<Eigen::Index>(n) : (configured ? configured : lipflow::config::default_count(spec));
    *out = new lipflow_particles{lipflow::datasets::sample(spec, count)};
    return LIPFLOW_OK;
  });
}

size_t lipflow_particles_rows(const lipflow_particles* p) { return p ? static_cast<size_t>(p->set.size()) : 0; }

size_t lipflow_particles_cols(const lipflow_particles* p) { return p ? static_cast<size_t>(p->set.dim()) : 0; }

lipflow_status lipflow_particles_copy(const lipflow_particles* p, double* out, size_t capacity) {
  LIPFLOW_REQUIRE(p && (out || p->set.positions.size() == 0), "NULL argument");
  LIPFLOW_REQUIRE(capacity >= static_cast<size_t>(p->set.positions.size()), "capacity too small");
  to_row_major(p->set.positions, out);
  return LIPFLOW_OK;
}

void lipflow_particles_destroy(lipflow_particles* p) { delete p; }

lipflow_status lipflow_net_create(int input_dim, const int* widths, size_t depth, double lipschitz, int smooth,
                                  uint64_t seed, lipflow_net** out) {
  LIPFLOW_REQUIRE(out && widths && depth > 0, "NULL or empty argument");
  return guarded([&] {
    lipflow::netdisc::NetConfig cfg;
    cfg.input_dim = input_dim;
    cfg.widths.assign(widths, widths + depth);
    cfg.lipschitz = lipschitz;
    cfg.activation = smooth ? lipflow::netdisc::Activation::smooth_relu : lipflow::netdisc::Activation::relu;
    *out = new lipflow_net{lipflow::netdisc::DiscriminatorNet::init(cfg, seed)};
    return LIPFLOW_OK;
  });
}

lipflow_status lipflow_net_load(const char* path, lipflow_net** out) {
  LIPFLOW_REQUIRE(path && out, "NULL argument");
  return guarded([&] {
    *out = new lipflow_net{lipflow::netdisc::load_net(path)};
    return LIPFLOW_OK;
  });
}

lipflow_status lipflow_net_save(const lipflow_net* net, const char* path) {
  LIPFLOW_REQUIRE(net && path, "NULL argument");
  return guarded([&] {
    lipflow::netdisc::save_net(net->net, path);
    return LIPFLOW_OK;
  });
}

lipflow_status lipflow_net_forward(const lipflow_net* net, const lipflow_particles* x, double* out, size_t capacity) {
  LIPFLOW_REQUIRE(net && x && (out || x->set.size() == 0), "NULL argument");
  LIPFLOW_REQUIRE(capacity >= static_cast<size_t>(x->set.size()), "capacity too small");
  LIPFLOW_REQUIRE(x->set.dim() == net->net.input_dim(), "dimension mismatch");
  return guarded([&] {
    const lipflow::Vector v = net->net.forward(x->set.positions);
    for (Eigen::Index i = 0; i < v.size(); ++i) out[i] = v(i);
    return LIPFLOW_OK;
  });
}

lipflow_status lipflow_net_gradient(const lipflow_net* net, const lipflow_particles* x, double* out, size_t capacity) {
  LIPFLOW_REQUIRE(net && x && (out || x->set.size() == 0), "NULL argument");
  LIPFLOW_REQUIRE(capacity >= static_cast<size_t>(x->set.positions.size()), "capacity too small");
  LIPFLOW_REQUIRE(x->set.dim() == net->net.input_dim(), "dimension mismatch");
  return guarded([&] {
    to_row_major(net->net.input_gradient(x->set.positions), out);
    return LIPFLOW_OK;
  });
}

lipflow_status lipflow_estimate_divergence(const char* f, double alpha, const char* nu_mode, lipflow_net* net,
                                           const lipflow_particles* p, const lipflow_particles* q, int inner_steps,
                                           double* estimate) {
  LIPFLOW_REQUIRE(f && net && p && q && estimate, "NULL argument");
  return guarded([&] {
    const auto spec = lipflow::fdiv::parse_spec(f, alpha, nu_mode ? nu_mode : "");
    auto [value, trained] =
        lipflow::fdiv::estimate_divergence(spec, net->net, p->set.positions, q->set.positions, inner_steps);
    net->net = std::move(trained);
    *estimate = value.divergence_estimate;
    return LIPFLOW_OK;
  });
}

void lipflow_net_destroy(lipflow_net* net) { delete net; }

lipflow_status lipflow_config_load(const char* path, lipflow_config** out) {
  LIPFLOW_REQUIRE(path && out, "NULL argument");
  return guarded([&] {
    *out = new lipflow_config{lipflow::config::load_config(path)};
    return LIPFLOW_OK;
  });
}

lipflow_status lipflow_config_parse(const char* toml_text, const char* base_dir, lipflow_config** out) {
  LIPFLOW_REQUIRE(toml_text && out, "NULL argument");
  return guarded([&] {
    *out = new lipflow_config{lipflow::config::parse_config(toml_text, base_dir ? base_dir : "")};
    return LIPFLOW_OK;
  });
}

lipflow_status lipflow_config_set_seed(lipflow_config* cfg, uint64_t seed) {
  LIPFLOW_REQUIRE(cfg, "NULL argument");
  cfg->cfg.transport.seed = seed;
  return LIPFLOW_OK;
}

lipflow_status lipflow_config_set_output_dir(lipflow_config* cfg, const char* dir) {
  LIPFLOW_REQUIRE(cfg && dir && *dir, "NULL or empty argument");
  cfg->cfg.output.dir = dir;
  return LIPFLOW_OK;
}

lipflow_status lipflow_config_set_latent_dim(lipflow_config* cfg, int latent_dim) {
  LIPFLOW_REQUIRE(cfg, "NULL argument");
  LIPFLOW_REQUIRE(latent_dim >= 0, "latent dimension must be >= 0");
  cfg->cfg.latent.dim = latent_dim;
  return LIPFLOW_OK;
}

lipflow_status lipflow_config_set_deterministic(lipflow_config* cfg, int deterministic) {
  LIPFLOW_REQUIRE(cfg, "NULL argument");
  cfg->cfg.deterministic = deterministic != 0;
  return LIPFLOW_OK;
}

void lipflow_config_destroy(lipflow_config* cfg) { delete cfg; }

lipflow_status lipflow_run(const lipflow_config* cfg, lipflow_outcome** out) {
  LIPFLOW_REQUIRE(cfg && out, "NULL argument");
  return guarded([&] {
    auto* run = new lipflow_outcome;
    try {
      run->outcome = lipflow::experiment::run_experiment(cfg->cfg);
    } catch (...) {
      delete run;
      throw;
    }
    run->termination = run->outcome.summary.at("termination").get<std::string>();
    run->summary = run->outcome.summary.dump(2);
    *out = run;
    if (run->outcome.exit_code == lipflow::experiment::kExitDiverged)
      return fail(LIPFLOW_DIVERGED, "run diverged: " + run->outcome.log.reason);
    return LIPFLOW_OK;
  });
}

const char* lipflow_run_termination(const lipflow_outcome* run) { return run ? run->termination.c_str() : ""; }

size_t lipflow_run_steps(const lipflow_outcome* run) { return run ? run->outcome.log.records.size() : 0; }

double lipflow_run_final_divergence(const lipflow_outcome* run) {
  if (!run || run->outcome.log.records.empty()) return std::nan("");
  return run->outcome.log.records.back().divergence;
}

double lipflow_run_final_kinetic_energy(const lipflow_outcome* run) {
  if (!run || run->outcome.log.records.empty()) return std::nan("");
  return run->outcome.log.records.back().kinetic_energy;
}

const char* lipflow_run_summary_json(const lipflow_outcome* run) { return run ? run->summary.c_str() : ""; }

lipflow_status lipflow_run_particles(const lipflow_outcome* run, lipflow_particles** out) {
  LIPFLOW_REQUIRE(run && out, "NULL argument");
  return guarded([&] {
    *out = new lipflow_particles{run->outcome.particles};
    return LIPFLOW_OK;
  });
}

void lipflow_run_destroy(lipflow_outcome* run) { delete run; }

lipflow_status lipflow_datagen(const char* dist_toml, size_t n, const uint64_t* seed, const char* out_csv) {
  LIPFLOW_REQUIRE(dist_toml && out_csv, "NULL argument");
  return guarded([&] {
    auto [spec, configured] = lipflow::config::parse_dist_text(dist_toml);
    if (seed) spec.seed = *seed;
    const Eigen::Index count =
        n ? static_cast<Eigen::Index>(n) : (configured ? configured : lipflow::config::default_count(spec));
    lipflow::datasets::save_csv(lipflow::datasets::sample(spec, count), out_csv);
    return LIPFLOW_OK;
  });
}

lipflow_status lipflow_eval(const char* a_csv, const char* b_csv, const lipflow_config* cfg, const char* out_json) {
  LIPFLOW_REQUIRE(a_csv && b_csv, "NULL argument");
  return guarded([&] {
    const auto a = lipflow::datasets::load_csv(a_csv);
    const auto b = lipflow::datasets::load_csv(b_csv);
    const lipflow::config::EvalConfig eval = cfg ? cfg->cfg.eval : lipflow::config::EvalConfig{};
    const std::string text = lipflow::experiment::evaluate(a.positions, b.positions, eval).dump(2) + "\n";
    if (!out_json) {
      std::fputs(text.c_str(), stdout);
      return LIPFLOW_OK;
    }
    std::ofstream out(out_json, std::ios::binary);
    if (!out) throw lipflow::IoError(std::string("cannot open '") + out_json + "' for writing");
    out << text;
    if (!out) throw lipflow::IoError(std::string("write failed for '") + out_json + "'");
    return LIPFLOW_OK;
  });
}

lipflow_status lipflow_replay(const char* ckpt_dir, const lipflow_config* cfg, const uint64_t* seed, size_t n,
                              const char* out_csv) {
  LIPFLOW_REQUIRE(ckpt_dir && cfg && out_csv, "NULL argument");
  return guarded([&] {
    lipflow::ParticleSet fresh;
    const auto& side = cfg->cfg.source;
    if (side.dist) {
      auto spec = *side.dist;
      if (seed) spec.seed = *seed;
      fresh = lipflow::datasets::sample(spec, static_cast<Eigen::Index>(n));
    } else {
      fresh = lipflow::datasets::load_csv(side.csv);
      const Eigen::Index rows = std::min<Eigen::Index>(fresh.size(), static_cast<Eigen::Index>(n));
      fresh.positions = fresh.positions.topRows(rows).eval();
    }
    fresh.role = lipflow::Role::source;
    lipflow::ParticleSet out = lipflow::experiment::replay_directory(ckpt_dir, fresh);
    lipflow::datasets::save_csv(out, out_csv);
    return LIPFLOW_OK;
  });
}

lipflow_status lipflow_sweep(const lipflow_config* cfg, int threads, const char* out_csv) {
  LIPFLOW_REQUIRE(cfg && out_csv, "NULL argument");
  return guarded([&] {
    const int n = lipflow::experiment::resolve_threads(threads > 0 ? threads : cfg->cfg.sweep.threads,
                                                       cfg->cfg.deterministic);
    const auto rows = lipflow::experiment::sweep(cfg->cfg, n);
    lipflow::experiment::write_sweep_csv(rows, out_csv);
    return LIPFLOW_OK;
  });
}

}  // extern "C"
