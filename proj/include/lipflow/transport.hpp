#pragma once

#include <cstdint>
#include <functional>
#include <string>
#include <string_view>
#include <vector>

#include "lipflow/fdiv.hpp"
#include "lipflow/netdisc.hpp"
#include "lipflow/particles.hpp"

// Particle transport along the learned discriminator gradient:
//   Y_{n+1} = Y_n - dt * grad phi_n(Y_n)
// with phi_n retrained for m_max ascent steps against the current particles.
namespace lipflow::transport {

enum class Integrator { euler, heun };
enum class Termination { n_max, ke_threshold, diverged };

std::string_view to_string(Integrator i) noexcept;
std::string_view to_string(Termination t) noexcept;
Integrator integrator_from_string(std::string_view s);

struct TransportConfig {
  double dt = 0.2;
  int n_max = 1000;
  int m_max = 5;
  double lipschitz = 1.0;  // +inf disables spectral normalization
  fdiv::FDivSpec fdiv{};
  Integrator integrator = Integrator::euler;
  bool warm_start = true;
  int checkpoint_every = 100;  // 0: no checkpoints
  double stop_ke = -1.0;       // < 0: 1e-6 * L^2 (0 when L is infinite)
  std::uint64_t seed = 0;

  std::vector<int> widths{32, 32, 32, 1};
  netdisc::Activation activation = netdisc::Activation::relu;
  double smooth_eps = netdisc::kDefaultSmoothEps;
  netdisc::SpectralMethod sn_method = netdisc::SpectralMethod::exact;
  int sn_power_iters = 1;
  netdisc::AdamConfig adam{};

  void validate() const;
  double effective_stop_ke() const noexcept;
  netdisc::NetConfig net_config(int input_dim) const;
};

struct StepRecord {
  int step = 0;
  double t = 0.0;
  double divergence = 0.0;      // estimate at Y_n after training phi_n
  double kinetic_energy = 0.0;  // mean |grad phi_n(Y_n)|^2
  double max_speed = 0.0;       // max |Y_{n+1} - Y_n| / dt
  double max_gradient = 0.0;    // max |grad phi_n(Y_n)|
  double wall_time = 0.0;       // seconds since the run started
};

struct TrajectoryLog {
  std::vector<StepRecord> records;
  Termination termination = Termination::n_max;
  std::string reason;
  int diverged_step = -1;
  double diverged_magnitude = 0.0;
};

struct Checkpoint {
  int step = 0;
  std::string net;        // binary blob of phi_n
  std::string corrector;  // Heun only: phi trained at the predicted state
};

struct CheckpointRing {
  double dt = 0.0;
  Integrator integrator = Integrator::euler;
  std::vector<Checkpoint> entries;

  bool empty() const noexcept { return entries.empty(); }
  /// True when entries cover steps 0..k-1 without gaps.
  bool contiguous() const noexcept;
};

struct GpaResult {
  ParticleSet particles;
  TrajectoryLog log;
  CheckpointRing ring;
  netdisc::DiscriminatorNet net;
};

/// Called after every completed step with the record and the new positions.
using StepObserver = std::function<void(const StepRecord&, const Matrix&)>;

/// Kinetic energy of the field -grad phi at the given positions.
double kinetic_energy(const Matrix& y, const netdisc::DiscriminatorNet& net);

Matrix euler_step(const Matrix& y, const netdisc::DiscriminatorNet& net, double dt);

/// Heun update with an already trained corrector field.
Matrix heun_step(const Matrix& y, const netdisc::DiscriminatorNet& net,
                 const netdisc::DiscriminatorNet& corrector, double dt);

/// Heun update where the corrector is produced from the predicted positions.
Matrix heun_step(const Matrix& y, const netdisc::DiscriminatorNet& net,
                 const std::function<const netdisc::DiscriminatorNet&(const Matrix&)>& corrector_at,
                 double dt);

/// Runs the transport loop. Divergence of the objective ends the run with
/// Termination::diverged and returns the state reached so far.
GpaResult gpa_run(const ParticleSet& source, const ParticleSet& target, const TransportConfig& cfg,
                  const StepObserver& observer = {});

/// Pushes fresh particles through the recorded fields. `steps` < 0 replays all.
ParticleSet replay(const CheckpointRing& ring, const ParticleSet& fresh, int steps = -1);

struct DissipationReport {
  int regime_begin = 0;  // first step of the mid-run regime
  int regime_end = 0;    // one past the last step
  int windows = 0;
  double decay_rate = 0.0;      // mean over windows of -dD/dt
  double mean_ke = 0.0;         // mean over windows of KE
  double relative_discrepancy = 0.0;
  double max_window_discrepancy = 0.0;
  double monotonicity_violation = 0.0;  // largest windowed rise / range of D
  bool monotone = true;                 // violation within 5% of range
};

/// Compares the windowed decay rate of the divergence estimate with the
/// windowed kinetic energy. The regime runs from the kinetic-energy peak to
/// the first step where it falls below `tail_fraction` of that peak.
DissipationReport dissipation_check(const TrajectoryLog& log, double dt, int window,
                                    double tail_fraction = 0.1);

}  // namespace lipflow::transport
