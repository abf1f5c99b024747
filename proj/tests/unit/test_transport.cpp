#include <doctest.h>

#include <cmath>
#include <random>

#include "helpers.hpp"
#include "lipflow/transport.hpp"

using namespace lipflow;
using namespace lipflow::transport;
using netdisc::Activation;
using netdisc::DiscriminatorNet;
using netdisc::LayerParams;

namespace {

DiscriminatorNet linear_net(const Vector& w, double lipschitz = std::numeric_limits<double>::infinity()) {
  LayerParams layer;
  layer.weight = w;
  layer.bias = Vector::Zero(1);
  return DiscriminatorNet::from_layers({layer}, lipschitz, Activation::relu);
}

ParticleSet cloud(Eigen::Index n, double cx, double cy, double spread, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  ParticleSet p;
  p.positions = testutil::gaussian(n, 2, rng, spread);
  p.positions.col(0).array() += cx;
  p.positions.col(1).array() += cy;
  return p;
}

}  // namespace

TEST_CASE("euler step with a constant field") {
  Vector v(2);
  v << 0.3, -1.2;
  const auto net = linear_net(v);
  std::mt19937_64 rng(1);
  const Matrix y = testutil::gaussian(10, 2, rng);
  const Matrix next = euler_step(y, net, 0.5);
  CHECK((next - (y.rowwise() - 0.5 * v.transpose())).norm() < 1e-14);
  CHECK(euler_step(y, net, 0.0) == y);
  CHECK((heun_step(y, net, net, 0.5) - next).norm() < 1e-14);
}

TEST_CASE("heun on a linear field gives the RK2 factor") {
  // Frozen field grad phi(y) = y, y' = -y. The corrector gradient at the
  // prediction (1 - dt) y is supplied as a second constant field.
  const double dt = 0.1;
  Matrix y(1, 2);
  y << 1.0, 2.0;
  Vector g0(2), g1(2);
  g0 << 1.0, 2.0;
  g1 = (1.0 - dt) * g0;
  const auto n0 = linear_net(g0);
  const auto n1 = linear_net(g1);
  const Matrix next = heun_step(y, n0, n1, dt);
  CHECK(next(0, 0) == doctest::Approx(0.905 * 1.0).epsilon(1e-14));
  CHECK(next(0, 1) == doctest::Approx(0.905 * 2.0).epsilon(1e-14));
  CHECK(euler_step(y, n0, dt)(0, 0) == doctest::Approx(0.9));
}

TEST_CASE("kinetic energy examples") {
  std::mt19937_64 rng(2);
  const Matrix y = testutil::gaussian(30, 2, rng);
  CHECK(kinetic_energy(y, linear_net(Vector::Zero(2))) == 0.0);
  Vector w = Vector::Zero(2);
  w(0) = 1.0;
  CHECK(kinetic_energy(y, linear_net(w, 1.0)) == doctest::Approx(1.0).epsilon(1e-15));
  CHECK(kinetic_energy(y, linear_net(3.0 * w, 3.0)) == doctest::Approx(9.0).epsilon(1e-15));
}

TEST_CASE("config validation") {
  TransportConfig cfg;
  CHECK_NOTHROW(cfg.validate());
  CHECK(cfg.effective_stop_ke() == doctest::Approx(1e-6));
  cfg.lipschitz = std::numeric_limits<double>::infinity();
  CHECK(cfg.effective_stop_ke() == 0.0);
  cfg = TransportConfig{};
  cfg.dt = 0.0;
  CHECK_THROWS_AS(cfg.validate(), InvalidArgument);
  cfg = TransportConfig{};
  cfg.m_max = 0;
  CHECK_THROWS_AS(cfg.validate(), InvalidArgument);
  cfg = TransportConfig{};
  cfg.widths = {8, 3};
  CHECK_THROWS_AS(cfg.validate(), InvalidArgument);
  CHECK(integrator_from_string("heun") == Integrator::heun);
  CHECK_THROWS_AS(integrator_from_string("rk4"), InvalidArgument);
}

TEST_CASE("two-cluster run obeys the speed limit and converges") {
  const ParticleSet src = cloud(60, 10.0, 10.0, 0.1, 3);
  const ParticleSet tgt = cloud(60, 0.0, 0.0, 0.1, 4);
  TransportConfig cfg;
  cfg.dt = 0.5;
  cfg.n_max = 150;
  cfg.m_max = 20;
  cfg.adam.lr = 5e-3;
  cfg.checkpoint_every = 1;
  cfg.seed = 5;
  std::vector<double> centroid_dist;
  const auto res = gpa_run(src, tgt, cfg, [&](const StepRecord&, const Matrix& y) {
    centroid_dist.push_back(y.colwise().mean().norm());
  });
  REQUIRE(res.log.termination != Termination::diverged);
  double peak = 0.0;
  for (const auto& r : res.log.records) {
    CHECK(r.max_speed <= cfg.lipschitz * (1 + 1e-6));
    CHECK(r.max_gradient <= cfg.lipschitz * (1 + 1e-6));
    peak = std::max(peak, r.kinetic_energy);
  }
  CHECK(res.particles.positions.colwise().mean().norm() < 0.5);
  CHECK(res.log.records.back().kinetic_energy < 0.01 * peak);
  // The centroid approaches the origin along the way.
  CHECK(centroid_dist.size() == res.log.records.size());
  CHECK(centroid_dist[centroid_dist.size() / 2] < centroid_dist.front());

  // Steps strictly increasing and contiguous; replay reproduces the run.
  REQUIRE(res.ring.contiguous());
  for (std::size_t i = 0; i < res.ring.entries.size(); ++i) CHECK(res.ring.entries[i].step == static_cast<int>(i));
  const ParticleSet again = replay(res.ring, src);
  CHECK(again.positions == res.particles.positions);
  CHECK(replay(res.ring, src, 0).positions == src.positions);

  ParticleSet none;
  none.positions = Matrix(0, 2);
  CHECK(replay(res.ring, none).size() == 0);
}

TEST_CASE("runs are deterministic in the seed") {
  const ParticleSet src = cloud(40, 2.0, 0.0, 0.5, 6);
  const ParticleSet tgt = cloud(40, -2.0, 0.0, 0.5, 7);
  TransportConfig cfg;
  cfg.n_max = 20;
  cfg.seed = 11;
  const auto a = gpa_run(src, tgt, cfg);
  const auto b = gpa_run(src, tgt, cfg);
  CHECK(a.particles.positions == b.particles.positions);
  cfg.seed = 12;
  const auto c = gpa_run(src, tgt, cfg);
  CHECK(a.particles.positions != c.particles.positions);
}

TEST_CASE("identical source and target barely move") {
  // Needs a well-trained critic: with few inner steps the random initial
  // field moves the particles before it flattens out.
  const ParticleSet src = cloud(200, 0.0, 0.0, 1.0, 8);
  TransportConfig cfg;
  cfg.n_max = 50;
  cfg.m_max = 200;
  cfg.stop_ke = 0.0;
  const auto res = gpa_run(src, src, cfg);
  const double moved = (res.particles.positions - src.positions).rowwise().norm().maxCoeff();
  CHECK(moved < 1e-2 * cfg.lipschitz * cfg.dt * cfg.n_max);
  for (const auto& r : res.log.records) CHECK(r.divergence <= 1e-3);
}

TEST_CASE("heun checkpoints carry a corrector and replay exactly") {
  const ParticleSet src = cloud(30, 3.0, 0.0, 0.3, 9);
  const ParticleSet tgt = cloud(30, 0.0, 0.0, 0.3, 10);
  TransportConfig cfg;
  cfg.integrator = Integrator::heun;
  cfg.n_max = 15;
  cfg.checkpoint_every = 1;
  const auto res = gpa_run(src, tgt, cfg);
  REQUIRE(res.ring.entries.size() == res.log.records.size());
  for (const auto& e : res.ring.entries) CHECK_FALSE(e.corrector.empty());
  CHECK(replay(res.ring, src).positions == res.particles.positions);
  for (const auto& r : res.log.records) CHECK(r.max_speed <= cfg.lipschitz * (1 + 1e-6));
}

TEST_CASE("replay preconditions") {
  CheckpointRing empty;
  ParticleSet p;
  p.positions = Matrix::Zero(3, 2);
  CHECK_THROWS_AS(replay(empty, p), InvalidArgument);

  const ParticleSet src = cloud(20, 1.0, 0.0, 0.3, 12);
  TransportConfig cfg;
  cfg.n_max = 6;
  cfg.checkpoint_every = 2;
  const auto res = gpa_run(src, cloud(20, 0.0, 0.0, 0.3, 13), cfg);
  CHECK(res.ring.entries.size() == 3);
  CHECK_FALSE(res.ring.contiguous());
  CHECK_THROWS_AS(replay(res.ring, src), InvalidArgument);
}

TEST_CASE("dissipation check on synthetic logs") {
  // D(t) = exp(-t), KE = exp(-t): rate and energy agree exactly in the limit.
  TrajectoryLog log;
  const double dt = 0.01;
  for (int n = 0; n < 2000; ++n) {
    StepRecord r;
    r.step = n;
    r.t = n * dt;
    r.divergence = std::exp(-r.t);
    r.kinetic_energy = std::exp(-r.t);
    log.records.push_back(r);
  }
  const auto rep = dissipation_check(log, dt, 20);
  CHECK(rep.windows > 5);
  CHECK(rep.regime_begin == 0);
  CHECK(rep.relative_discrepancy < 0.02);
  CHECK(rep.monotone);

  // A flat, converged tail: both sides vanish.
  TrajectoryLog flat;
  for (int n = 0; n < 200; ++n) {
    StepRecord r;
    r.step = n;
    r.divergence = 1e-5;
    r.kinetic_energy = 0.0;
    flat.records.push_back(r);
  }
  const auto frep = dissipation_check(flat, dt, 20);
  CHECK(std::abs(frep.decay_rate) < 1e-3);
  CHECK(frep.mean_ke < 1e-3);

  // An increasing divergence is flagged.
  TrajectoryLog up = log;
  for (auto& r : up.records) r.divergence = r.t;
  CHECK_FALSE(dissipation_check(up, dt, 20).monotone);
  CHECK_THROWS_AS(dissipation_check(log, dt, 0), InvalidArgument);
}
