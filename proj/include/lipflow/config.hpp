#pragma once

#include <filesystem>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "lipflow/datasets.hpp"
#include "lipflow/metrics.hpp"
#include "lipflow/transport.hpp"

namespace lipflow::config {

/// One side of an experiment: a generator spec or a CSV file.
struct SideConfig {
  std::optional<datasets::DistSpec> dist;
  std::filesystem::path csv;
  Eigen::Index n = 0;  // sample count for a spec; 0 means the kind's default

  ParticleSet load(Role role) const;
};

struct LatentConfig {
  int dim = 0;  // 0: run in ambient space
  int dpi_inner_steps = 0;
};

struct OutputConfig {
  std::filesystem::path dir = "lipflow_out";
  int snapshot_every = 0;  // 0: only the initial and final snapshots
  bool replay = false;     // keep a checkpoint for every step
};

struct EvalConfig {
  bool sinkhorn = true;
  metrics::SinkhornConfig sinkhorn_cfg{};
  std::vector<Vector> mode_centers;
  double mode_radius = 1.5;
  int carpet_level = 0;
  datasets::Box carpet_box{};
};

struct SweepConfig {
  std::vector<double> lipschitz;
  std::vector<double> dt;
  std::vector<std::string> f;
  std::vector<double> alpha;
  int threads = 0;  // 0: LIPFLOW_THREADS or hardware concurrency
};

struct ExperimentConfig {
  std::string name = "experiment";
  SideConfig source;
  SideConfig target;
  transport::TransportConfig transport;
  LatentConfig latent;
  OutputConfig output;
  EvalConfig eval;
  SweepConfig sweep;
  bool deterministic = false;
};

/// Parses TOML text. Relative CSV paths resolve against `base_dir`.
ExperimentConfig parse_config(std::string_view text, const std::filesystem::path& base_dir = {});
ExperimentConfig load_config(const std::filesystem::path& path);

/// Parses a distribution given as TOML key/value text, e.g.
/// `kind = "sierpinski"` and `level = 4` on separate lines, or as an inline
/// table `{ kind = "sierpinski", level = 4 }`. Returns the distribution and the
/// optional `n` entry (0 when absent).
std::pair<datasets::DistSpec, Eigen::Index> parse_dist_text(std::string_view text);

/// Default sample count for a spec when none is configured.
Eigen::Index default_count(const datasets::DistSpec& spec);

}  // namespace lipflow::config
