#include "lipflow/experiment.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstdlib>
#include <fstream>
#include <mutex>
#include <thread>

#include "lipflow/rng.hpp"
#include "lipflow/serialize.hpp"

namespace lipflow::experiment {

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

json num(double v) {
  if (std::isfinite(v)) return v;
  if (std::isinf(v)) return v > 0 ? "inf" : "-inf";
  return nullptr;
}

void ensure_dir(const fs::path& dir) {
  std::error_code ec;
  fs::create_directories(dir, ec);
  if (ec || !fs::is_directory(dir)) throw IoError("cannot create directory '" + dir.string() + "'");
}

void write_text(const fs::path& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot open '" + path.string() + "' for writing");
  out << text;
  if (!out) throw IoError("write failed for '" + path.string() + "'");
}

std::string read_text(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open '" + path.string() + "'");
  return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

json record_json(const transport::StepRecord& r) {
  return json{{"step", r.step}, {"t", r.t}, {"div", num(r.divergence)}, {"ke", num(r.kinetic_energy)},
              {"max_speed", num(r.max_speed)}, {"wall_time", r.wall_time}};
}

json transport_json(const transport::TransportConfig& t) {
  return json{{"dt", t.dt},
              {"L", num(t.lipschitz)},
              {"f", fdiv::to_string(t.fdiv.kind)},
              {"alpha", t.fdiv.alpha},
              {"nu_mode", fdiv::to_string(t.fdiv.nu_mode)},
              {"integrator", transport::to_string(t.integrator)},
              {"n_max", t.n_max},
              {"m_max", t.m_max},
              {"seed", t.seed}};
}

void save_particles(const Matrix& x, const fs::path& path) {
  ParticleSet p;
  p.positions = x;
  datasets::save_csv(p, path);
}

}  // namespace

void apply_overrides(config::ExperimentConfig& cfg, const Overrides& o) {
  if (o.seed) cfg.transport.seed = *o.seed;
  if (o.out) cfg.output.dir = *o.out;
  if (o.latent_dim) {
    if (*o.latent_dim < 0) throw InvalidArgument("--latent-dim must be >= 0");
    cfg.latent.dim = *o.latent_dim;
  }
  if (o.deterministic) cfg.deterministic = true;
}

int resolve_threads(int requested, bool deterministic) {
  if (deterministic) return 1;
  int n = requested > 0 ? requested : static_cast<int>(std::thread::hardware_concurrency());
  if (n < 1) n = 1;
  if (const char* env = std::getenv("LIPFLOW_THREADS")) {
    char* end = nullptr;
    const long cap = std::strtol(env, &end, 10);
    if (end != env && *end == '\0' && cap >= 1) n = std::min<long>(n, cap);
  }
  return n;
}

json evaluate(const Matrix& a, const Matrix& b, const config::EvalConfig& eval) {
  if (a.cols() != b.cols()) throw InvalidArgument("eval: dimension mismatch");
  json rep{{"n_a", a.rows()}, {"n_b", b.rows()}, {"dim", a.cols()}};
  if (eval.sinkhorn && a.rows() > 0 && b.rows() > 0) {
    const auto s = metrics::sinkhorn(a, b, eval.sinkhorn_cfg);
    rep["sinkhorn"] = json{{"w2", num(s.w2)},     {"cost", num(s.cost)},      {"epsilon", num(s.epsilon)},
                           {"iterations", s.iterations}, {"converged", s.converged}};
  }
  if (a.rows() == b.rows() && a.rows() > 0 && a.rows() <= 256) {
    rep["exact_w1"] = metrics::exact_w1_small(a, b);
    rep["exact_w2"] = metrics::exact_w2_small(a, b);
  }
  if (!eval.mode_centers.empty() && a.rows() > 0) {
    const Vector cov = metrics::mode_coverage(a, eval.mode_centers, eval.mode_radius);
    rep["mode_coverage"] = std::vector<double>(cov.data(), cov.data() + cov.size());
  }
  if (eval.carpet_level > 0 && a.cols() == 2) {
    const auto occ = metrics::carpet_occupancy(a, eval.carpet_level, eval.carpet_box);
    rep["carpet"] = json{{"level", eval.carpet_level},        {"max_deviation", occ.max_deviation},
                         {"empty_cells", occ.empty_cells},    {"in_holes", occ.in_holes},
                         {"central_hole", occ.central_hole},  {"outside", occ.outside}};
  }
  return rep;
}

void write_checkpoints(const transport::CheckpointRing& ring, const std::optional<latent::LatentMap>& map,
                       const fs::path& dir) {
  ensure_dir(dir);
  json meta{{"format", "lipflow.ckpt"},
            {"version", 1},
            {"dt", ring.dt},
            {"integrator", transport::to_string(ring.integrator)}};
  std::vector<int> steps;
  for (const auto& c : ring.entries) {
    const std::string stem = "step_" + std::to_string(c.step);
    write_text(dir / stem, c.net);
    if (!c.corrector.empty()) write_text(dir / (stem + ".corrector"), c.corrector);
    steps.push_back(c.step);
  }
  meta["steps"] = steps;
  meta["latent_map"] = map ? latent::to_json(*map) : json(nullptr);
  write_text(dir / "meta.json", meta.dump(2) + "\n");
}

transport::CheckpointRing read_checkpoints(const fs::path& dir, std::optional<latent::LatentMap>* map) {
  const fs::path meta_path = dir / "meta.json";
  if (!fs::exists(meta_path)) throw IoError("no checkpoint metadata at '" + meta_path.string() + "'");
  json meta;
  try {
    meta = json::parse(read_text(meta_path));
  } catch (const json::exception& e) {
    throw IoError("malformed '" + meta_path.string() + "': " + e.what());
  }
  transport::CheckpointRing ring;
  try {
    if (meta.at("format") != "lipflow.ckpt") throw IoError("'" + meta_path.string() + "' is not checkpoint metadata");
    ring.dt = meta.at("dt").get<double>();
    ring.integrator = transport::integrator_from_string(meta.at("integrator").get<std::string>());
    for (int step : meta.at("steps").get<std::vector<int>>()) {
      transport::Checkpoint c;
      c.step = step;
      const std::string stem = "step_" + std::to_string(step);
      c.net = read_text(dir / stem);
      if (ring.integrator == transport::Integrator::heun) c.corrector = read_text(dir / (stem + ".corrector"));
      ring.entries.push_back(std::move(c));
    }
    if (map) {
      map->reset();
      if (!meta.at("latent_map").is_null()) *map = latent::latent_map_from_json(meta.at("latent_map"));
    }
  } catch (const json::exception& e) {
    throw IoError("malformed '" + meta_path.string() + "': " + e.what());
  }
  return ring;
}

ParticleSet replay_directory(const fs::path& dir, const ParticleSet& fresh) {
  std::optional<latent::LatentMap> map;
  const auto ring = read_checkpoints(dir, &map);
  if (!map) return transport::replay(ring, fresh);
  ParticleSet z{latent::encode(*map, fresh.positions), fresh.role, fresh.seed};
  ParticleSet out = transport::replay(ring, z);
  out.positions = latent::decode(*map, out.positions);
  return out;
}

RunOutcome run_experiment(const config::ExperimentConfig& cfg) {
  cfg.transport.validate();
  const fs::path dir = cfg.output.dir;
  ensure_dir(dir);
  ensure_dir(dir / "snapshots");

  const ParticleSet source = cfg.source.load(Role::source);
  const ParticleSet target = cfg.target.load(Role::target);
  if (source.size() == 0 || target.size() == 0) throw InvalidArgument("run: source and target must be nonempty");
  if (source.dim() != target.dim()) throw InvalidArgument("run: source and target dimensions differ");
  datasets::save_csv(source, dir / "source.csv");
  datasets::save_csv(target, dir / "target.csv");
  save_particles(source.positions, dir / "snapshots" / "step_0.csv");

  std::ofstream traj(dir / "trajectory.jsonl", std::ios::binary);
  if (!traj) throw IoError("cannot open trajectory log in '" + dir.string() + "'");
  const int every = cfg.output.snapshot_every;
  auto observer = [&](const transport::StepRecord& rec, const Matrix& y) {
    traj << record_json(rec).dump() << '\n';
    traj.flush();
    const int done = rec.step + 1;
    if (every > 0 && done % every == 0)
      save_particles(y, dir / "snapshots" / ("step_" + std::to_string(done) + ".csv"));
  };

  RunOutcome out;
  json latent_json = nullptr;
  transport::GpaResult run;
  if (cfg.latent.dim > 0) {
    auto lr = latent::latent_gpa(source, target, cfg.latent.dim, cfg.transport, cfg.latent.dpi_inner_steps, observer);
    out.particles = lr.decoded;
    out.map = lr.map;
    run = std::move(lr.latent_run);
    latent_json = json{{"dim", cfg.latent.dim},
                       {"explained_variance_ratio", latent::explained_variance_ratio(lr.map)},
                       {"degenerate", lr.map.degenerate},
                       {"reconstruction_error", lr.dpi.reconstruction_error},
                       {"reconstruction_exact", lr.dpi.reconstruction_exact}};
    if (cfg.latent.dpi_inner_steps > 0)
      latent_json["dpi"] = json{{"ambient_estimate", num(lr.dpi.ambient_estimate)},
                                {"latent_estimate", num(lr.dpi.latent_estimate)},
                                {"tolerance", lr.dpi.tolerance},
                                {"asserted", lr.dpi.asserted},
                                {"holds", lr.dpi.holds}};
  } else {
    run = transport::gpa_run(source, target, cfg.transport, observer);
    out.particles = run.particles;
  }
  traj.close();
  out.log = run.log;
  out.ring = run.ring;

  const int steps = static_cast<int>(run.log.records.size());
  const int final_step = steps;
  save_particles(out.particles.positions, dir / "final.csv");
  if (every <= 0 || final_step % every != 0)
    save_particles(out.particles.positions, dir / "snapshots" / ("step_" + std::to_string(final_step) + ".csv"));
  if (cfg.transport.checkpoint_every > 0) write_checkpoints(run.ring, out.map, dir / "ckpt");
  netdisc::save_net(run.net, dir / "final_net.json");

  const bool diverged = run.log.termination == transport::Termination::diverged;
  out.exit_code = diverged ? kExitDiverged : kExitOk;
  double max_speed = 0.0;
  for (const auto& r : run.log.records) max_speed = std::max(max_speed, r.max_speed);

  json s;
  s["name"] = cfg.name;
  s["termination"] = transport::to_string(run.log.termination);
  s["reason"] = run.log.reason;
  s["steps"] = steps;
  s["final_divergence"] = steps ? num(run.log.records.back().divergence) : json(nullptr);
  s["final_ke"] = steps ? num(run.log.records.back().kinetic_energy) : json(nullptr);
  s["max_speed"] = num(max_speed);
  s["wall_time"] = steps ? run.log.records.back().wall_time : 0.0;
  s["exit_code"] = out.exit_code;
  s["diverged_step"] = diverged ? json(run.log.diverged_step) : json(nullptr);
  s["diverged_magnitude"] = diverged ? num(run.log.diverged_magnitude) : json(nullptr);
  s["n_source"] = source.size();
  s["n_target"] = target.size();
  s["dim"] = source.dim();
  s["transport"] = transport_json(cfg.transport);
  s["latent"] = latent_json;
  s["eval"] = out.particles.all_finite() ? evaluate(out.particles.positions, target.positions, cfg.eval) : json(nullptr);
  write_text(dir / "summary.json", s.dump(2) + "\n");
  out.summary = std::move(s);
  return out;
}

std::vector<SweepRow> sweep(const config::ExperimentConfig& cfg, int threads) {
  const auto& sw = cfg.sweep;
  const std::vector<double> ls = sw.lipschitz.empty() ? std::vector<double>{cfg.transport.lipschitz} : sw.lipschitz;
  const std::vector<double> dts = sw.dt.empty() ? std::vector<double>{cfg.transport.dt} : sw.dt;
  const std::vector<std::string> fs_ =
      sw.f.empty() ? std::vector<std::string>{std::string(fdiv::to_string(cfg.transport.fdiv.kind))} : sw.f;
  const std::vector<double> alphas = sw.alpha.empty() ? std::vector<double>{cfg.transport.fdiv.alpha} : sw.alpha;

  struct Cell {
    transport::TransportConfig t;
    SweepRow row;
  };
  std::vector<Cell> cells;
  for (double l : ls)
    for (double dt : dts)
      for (const auto& f : fs_) {
        const bool uses_alpha = f == "alpha";
        for (std::size_t ai = 0; ai < (uses_alpha ? alphas.size() : 1); ++ai) {
          Cell c;
          c.t = cfg.transport;
          c.t.lipschitz = l;
          c.t.dt = dt;
          const std::string_view nu =
              f == fdiv::to_string(cfg.transport.fdiv.kind) ? fdiv::to_string(cfg.transport.fdiv.nu_mode) : std::string_view{};
          c.t.fdiv = fdiv::parse_spec(f, uses_alpha ? alphas[ai] : cfg.transport.fdiv.alpha, nu);
          c.t.checkpoint_every = 0;
          c.row.cell = static_cast<int>(cells.size());
          c.t.seed = derive_seed(cfg.transport.seed, static_cast<std::uint64_t>(c.row.cell));
          c.t.validate();
          c.row.lipschitz = l;
          c.row.dt = dt;
          c.row.f = f;
          c.row.alpha = uses_alpha ? alphas[ai] : 0.0;
          cells.push_back(std::move(c));
        }
      }

  const ParticleSet source = cfg.source.load(Role::source);
  const ParticleSet target = cfg.target.load(Role::target);
  if (source.dim() != target.dim()) throw InvalidArgument("sweep: source and target dimensions differ");
  const int latent_dim = cfg.latent.dim;

  std::atomic<std::size_t> next{0};
  std::mutex error_mutex;
  std::exception_ptr error;
  auto worker = [&] {
    while (true) {
      const std::size_t i = next.fetch_add(1);
      if (i >= cells.size()) return;
      try {
        Cell& c = cells[i];
        const transport::GpaResult r =
            latent_dim > 0 ? latent::latent_gpa(source, target, latent_dim, c.t).latent_run
                           : transport::gpa_run(source, target, c.t);
        SweepRow& row = c.row;
        row.termination = std::string(transport::to_string(r.log.termination));
        row.steps = static_cast<int>(r.log.records.size());
        if (row.steps) {
          row.final_divergence = r.log.records.back().divergence;
          row.final_ke = r.log.records.back().kinetic_energy;
          row.wall_time = r.log.records.back().wall_time;
        } else {
          row.final_divergence = std::nan("");
          row.final_ke = std::nan("");
        }
        for (const auto& rec : r.log.records) row.max_speed = std::max(row.max_speed, rec.max_speed);
        row.diverged_step = r.log.diverged_step;
        row.exit_code = r.log.termination == transport::Termination::diverged ? kExitDiverged : kExitOk;
      } catch (...) {
        std::lock_guard<std::mutex> lock(error_mutex);
        if (!error) error = std::current_exception();
      }
    }
  };
  const int n_threads = std::max(1, std::min<int>(threads, static_cast<int>(cells.size())));
  if (n_threads == 1) {
    worker();
  } else {
    std::vector<std::thread> pool;
    for (int i = 0; i < n_threads; ++i) pool.emplace_back(worker);
    for (auto& t : pool) t.join();
  }
  if (error) std::rethrow_exception(error);
  std::vector<SweepRow> rows;
  for (auto& c : cells) rows.push_back(std::move(c.row));
  return rows;
}

void write_sweep_csv(const std::vector<SweepRow>& rows, const fs::path& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot open '" + path.string() + "' for writing");
  out << "cell,L,dt,f,alpha,termination,steps,final_divergence,final_ke,max_speed,diverged_step,wall_time,exit_code\n";
  out.precision(17);
  for (const auto& r : rows) {
    out << r.cell << ',' << r.lipschitz << ',' << r.dt << ',' << r.f << ',' << r.alpha << ',' << r.termination << ','
        << r.steps << ',' << r.final_divergence << ',' << r.final_ke << ',' << r.max_speed << ',' << r.diverged_step
        << ',' << r.wall_time << ',' << r.exit_code << '\n';
  }
  if (!out) throw IoError("write failed for '" + path.string() + "'");
}

}  // namespace lipflow::experiment
