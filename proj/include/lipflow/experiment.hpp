#pragma once

#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "lipflow/config.hpp"
#include "lipflow/latent.hpp"
#include "lipflow/transport.hpp"

// Config-driven runner behind the command-line subcommands.
namespace lipflow::experiment {

enum ExitCode : int { kExitOk = 0, kExitUsage = 1, kExitDiverged = 2, kExitIo = 3 };

struct Overrides {
  std::optional<std::uint64_t> seed;
  std::optional<std::filesystem::path> out;
  std::optional<int> latent_dim;
  bool deterministic = false;
};

void apply_overrides(config::ExperimentConfig& cfg, const Overrides& o);

/// Worker threads for parallel sections: `requested` (0 = hardware
/// concurrency) capped by the LIPFLOW_THREADS environment variable; 1 in
/// deterministic mode.
int resolve_threads(int requested, bool deterministic);

struct RunOutcome {
  int exit_code = kExitOk;
  nlohmann::json summary;
  ParticleSet particles;  // final particles in data space
  transport::TrajectoryLog log;
  transport::CheckpointRing ring;
  std::optional<latent::LatentMap> map;
};

/// Runs one experiment and writes trajectory.jsonl, snapshots/, final.csv,
/// source.csv, target.csv, ckpt/ and summary.json under cfg.output.dir.
RunOutcome run_experiment(const config::ExperimentConfig& cfg);

/// Evaluation report comparing particles `a` with reference `b`.
nlohmann::json evaluate(const Matrix& a, const Matrix& b, const config::EvalConfig& eval);

void write_checkpoints(const transport::CheckpointRing& ring, const std::optional<latent::LatentMap>& map,
                       const std::filesystem::path& dir);
transport::CheckpointRing read_checkpoints(const std::filesystem::path& dir,
                                           std::optional<latent::LatentMap>* map = nullptr);

/// Replays a checkpoint directory on fresh data-space particles, going
/// through the stored latent map when there is one.
ParticleSet replay_directory(const std::filesystem::path& dir, const ParticleSet& fresh);

struct SweepRow {
  int cell = 0;
  double lipschitz = 1.0;
  double dt = 0.0;
  std::string f;
  double alpha = 0.0;
  std::string termination;
  int steps = 0;
  double final_divergence = 0.0;
  double final_ke = 0.0;
  double max_speed = 0.0;
  int diverged_step = -1;
  double wall_time = 0.0;
  int exit_code = kExitOk;
};

/// Runs every (L, dt, f, alpha) cell of cfg.sweep. Rows come back in grid
/// order regardless of thread count.
std::vector<SweepRow> sweep(const config::ExperimentConfig& cfg, int threads);
void write_sweep_csv(const std::vector<SweepRow>& rows, const std::filesystem::path& path);

}  // namespace lipflow::experiment
