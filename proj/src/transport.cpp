#include "lipflow/transport.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <limits>

#include "lipflow/rng.hpp"
#include "lipflow/serialize.hpp"

namespace lipflow::transport {

std::string_view to_string(Integrator i) noexcept {
  return i == Integrator::heun ? "heun" : "euler";
}

std::string_view to_string(Termination t) noexcept {
  switch (t) {
    case Termination::n_max: return "n_max";
    case Termination::ke_threshold: return "ke_threshold";
    case Termination::diverged: return "diverged";
  }
  return "?";
}

Integrator integrator_from_string(std::string_view s) {
  if (s == "euler") return Integrator::euler;
  if (s == "heun") return Integrator::heun;
  throw InvalidArgument("unknown integrator '" + std::string(s) + "'");
}

void TransportConfig::validate() const {
  if (!(dt > 0.0) || !std::isfinite(dt)) throw InvalidArgument("transport: dt must be > 0");
  if (n_max < 1) throw InvalidArgument("transport: n_max must be >= 1");
  if (m_max < 1) throw InvalidArgument("transport: m_max must be >= 1");
  if (!(lipschitz > 0.0)) throw InvalidArgument("transport: L must be > 0");
  if (checkpoint_every < 0) throw InvalidArgument("transport: checkpoint_every must be >= 0");
  if (std::isnan(stop_ke)) throw InvalidArgument("transport: stop_ke is NaN");
  if (widths.empty() || widths.back() != 1)
    throw InvalidArgument("transport: widths must be nonempty and end in 1");
  fdiv.validate();
}

double TransportConfig::effective_stop_ke() const noexcept {
  if (stop_ke >= 0.0) return stop_ke;
  if (!std::isfinite(lipschitz)) return 0.0;
  return 1e-6 * lipschitz * lipschitz;
}

netdisc::NetConfig TransportConfig::net_config(int input_dim) const {
  netdisc::NetConfig nc;
  nc.input_dim = input_dim;
  nc.widths = widths;
  nc.lipschitz = lipschitz;
  nc.activation = activation;
  nc.smooth_eps = smooth_eps;
  nc.sn_method = sn_method;
  nc.sn_power_iters = sn_power_iters;
  return nc;
}

bool CheckpointRing::contiguous() const noexcept {
  for (std::size_t i = 0; i < entries.size(); ++i)
    if (entries[i].step != static_cast<int>(i)) return false;
  return true;
}

double kinetic_energy(const Matrix& y, const netdisc::DiscriminatorNet& net) {
  if (y.rows() == 0) return 0.0;
  return net.input_gradient(y).rowwise().squaredNorm().mean();
}

Matrix euler_step(const Matrix& y, const netdisc::DiscriminatorNet& net, double dt) {
  if (dt == 0.0 || y.rows() == 0) return y;
  return y - dt * net.input_gradient(y);
}

namespace {

Matrix heun_combine(const Matrix& y, const Matrix& grad, const Matrix& predicted,
                    const netdisc::DiscriminatorNet& corrector, double dt) {
  return y - (0.5 * dt) * (grad + corrector.input_gradient(predicted));
}

}  // namespace

Matrix heun_step(const Matrix& y, const netdisc::DiscriminatorNet& net,
                 const netdisc::DiscriminatorNet& corrector, double dt) {
  if (dt == 0.0 || y.rows() == 0) return y;
  const Matrix grad = net.input_gradient(y);
  const Matrix predicted = y - dt * grad;
  return heun_combine(y, grad, predicted, corrector, dt);
}

Matrix heun_step(const Matrix& y, const netdisc::DiscriminatorNet& net,
                 const std::function<const netdisc::DiscriminatorNet&(const Matrix&)>& corrector_at,
                 double dt) {
  if (dt == 0.0 || y.rows() == 0) return y;
  const Matrix grad = net.input_gradient(y);
  const Matrix predicted = y - dt * grad;
  return heun_combine(y, grad, predicted, corrector_at(predicted), dt);
}

GpaResult gpa_run(const ParticleSet& source, const ParticleSet& target, const TransportConfig& cfg,
                  const StepObserver& observer) {
  cfg.validate();
  if (source.size() < 1 || target.size() < 1) throw InvalidArgument("gpa_run: empty particle set");
  if (source.dim() != target.dim()) throw InvalidArgument("gpa_run: source and target dimensions differ");
  if (!source.all_finite() || !target.all_finite())
    throw InvalidArgument("gpa_run: non-finite input positions");

  const auto start = std::chrono::steady_clock::now();
  const int d = static_cast<int>(source.dim());
  const netdisc::NetConfig net_cfg = cfg.net_config(d);
  const double stop_ke = cfg.effective_stop_ke();

  GpaResult result;
  result.ring.dt = cfg.dt;
  result.ring.integrator = cfg.integrator;
  result.particles.role = Role::generated;
  result.particles.seed = source.seed;

  fdiv::DiscriminatorTrainer trainer(cfg.fdiv, netdisc::DiscriminatorNet::init(net_cfg, cfg.seed),
                                     cfg.adam);
  Matrix y = source.positions;
  const Matrix& q = target.positions;
  TrajectoryLog& log = result.log;
  log.termination = Termination::n_max;
  log.reason = "reached n_max";

  for (int n = 0; n < cfg.n_max; ++n) {
    if (!cfg.warm_start && n > 0) {
      trainer.net() = netdisc::DiscriminatorNet::init(net_cfg, derive_seed(cfg.seed, n));
      trainer.reset_optimizer();
    }
    StepRecord rec;
    rec.step = n;
    rec.t = n * cfg.dt;
    Matrix next;
    Checkpoint ckpt;
    try {
      const fdiv::ObjectiveValue v = trainer.train(y, q, cfg.m_max);
      rec.divergence = v.divergence_estimate;
      const Matrix grad = trainer.net().input_gradient(y);
      const Vector sq = grad.rowwise().squaredNorm();
      rec.kinetic_energy = sq.mean();
      rec.max_gradient = std::sqrt(sq.maxCoeff());
      const bool keep = cfg.checkpoint_every > 0 && n % cfg.checkpoint_every == 0;
      if (keep) {
        ckpt.step = n;
        ckpt.net = netdisc::to_blob(trainer.net());
      }
      if (cfg.integrator == Integrator::euler) {
        next = euler_step(y, trainer.net(), cfg.dt);
      } else {
        const Matrix predicted = y - cfg.dt * grad;
        trainer.train(predicted, q, cfg.m_max);
        next = heun_combine(y, grad, predicted, trainer.net(), cfg.dt);
        if (keep) ckpt.corrector = netdisc::to_blob(trainer.net());
      }
      if (!next.allFinite()) throw fdiv::DivergedError("particle positions became non-finite", 0.0);
      if (keep) result.ring.entries.push_back(std::move(ckpt));
    } catch (const fdiv::DivergedError& e) {
      log.termination = Termination::diverged;
      log.reason = e.what();
      log.diverged_step = n;
      log.diverged_magnitude = e.magnitude();
      break;
    }
    rec.max_speed = (next - y).rowwise().norm().maxCoeff() / cfg.dt;
    y = std::move(next);
    rec.wall_time = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    log.records.push_back(rec);
    if (observer) observer(rec, y);
    if (rec.kinetic_energy < stop_ke) {
      log.termination = Termination::ke_threshold;
      log.reason = "kinetic energy below threshold";
      break;
    }
  }

  result.particles.positions = std::move(y);
  result.net = trainer.net();
  return result;
}

ParticleSet replay(const CheckpointRing& ring, const ParticleSet& fresh, int steps) {
  if (ring.empty()) throw InvalidArgument("replay: checkpoint ring is empty");
  if (!ring.contiguous())
    throw InvalidArgument("replay: checkpoints must cover every step (checkpoint_every = 1)");
  const int available = static_cast<int>(ring.entries.size());
  const int count = steps < 0 ? available : steps;
  if (count > available) throw InvalidArgument("replay: not enough checkpoints for requested steps");

  ParticleSet out;
  out.role = Role::generated;
  out.seed = fresh.seed;
  Matrix y = fresh.positions;
  for (int n = 0; n < count && y.rows() > 0; ++n) {
    const Checkpoint& c = ring.entries[static_cast<std::size_t>(n)];
    const netdisc::DiscriminatorNet net = netdisc::net_from_blob(c.net);
    if (net.input_dim() != y.cols()) throw InvalidArgument("replay: dimension mismatch");
    if (ring.integrator == Integrator::euler) {
      y = euler_step(y, net, ring.dt);
    } else {
      if (c.corrector.empty()) throw InvalidArgument("replay: Heun checkpoint without corrector");
      const netdisc::DiscriminatorNet corrector = netdisc::net_from_blob(c.corrector);
      y = heun_step(y, net, corrector, ring.dt);
    }
  }
  out.positions = std::move(y);
  return out;
}

DissipationReport dissipation_check(const TrajectoryLog& log, double dt, int window,
                                    double tail_fraction) {
  if (window < 1) throw InvalidArgument("dissipation_check: window must be >= 1");
  if (!(dt > 0.0)) throw InvalidArgument("dissipation_check: dt must be > 0");
  DissipationReport rep;
  const auto& r = log.records;
  const int n = static_cast<int>(r.size());
  if (n < window + 1) return rep;

  int peak = 0;
  for (int i = 1; i < n; ++i)
    if (r[i].kinetic_energy > r[peak].kinetic_energy) peak = i;
  const double threshold = tail_fraction * r[peak].kinetic_energy;
  int end = n;
  for (int i = peak; i < n; ++i) {
    if (r[i].kinetic_energy < threshold) {
      end = i;
      break;
    }
  }
  rep.regime_begin = peak;
  rep.regime_end = end;

  double rate_sum = 0.0, ke_sum = 0.0;
  double d_min = std::numeric_limits<double>::infinity();
  double d_max = -d_min;
  std::vector<double> window_means;
  for (int a = peak; a + window < end + 1 && a + window < n; a += window) {
    const double rate = (r[a].divergence - r[a + window].divergence) / (window * dt);
    double ke = 0.0, dmean = 0.0;
    for (int i = a; i < a + window; ++i) {
      ke += r[i].kinetic_energy;
      dmean += r[i].divergence;
    }
    ke /= window;
    dmean /= window;
    rate_sum += rate;
    ke_sum += ke;
    if (ke > 0.0) rep.max_window_discrepancy = std::max(rep.max_window_discrepancy, std::abs(rate - ke) / ke);
    window_means.push_back(dmean);
    d_min = std::min(d_min, dmean);
    d_max = std::max(d_max, dmean);
    ++rep.windows;
  }
  if (rep.windows == 0) return rep;
  rep.decay_rate = rate_sum / rep.windows;
  rep.mean_ke = ke_sum / rep.windows;
  rep.relative_discrepancy = ke_sum > 0.0 ? std::abs(rate_sum - ke_sum) / ke_sum : 0.0;

  const double range = d_max - d_min;
  double worst_rise = 0.0;
  for (std::size_t i = 1; i < window_means.size(); ++i)
    worst_rise = std::max(worst_rise, window_means[i] - window_means[i - 1]);
  rep.monotonicity_violation = range > 0.0 ? worst_rise / range : 0.0;
  rep.monotone = rep.monotonicity_violation <= 0.05;
  return rep;
}

}  // namespace lipflow::transport
