#include <doctest.h>

#include <cmath>
#include <numbers>
#include <random>

#include <Eigen/SVD>

#include "helpers.hpp"
#include "lipflow/netdisc.hpp"
#include "lipflow/serialize.hpp"

using namespace lipflow;
using namespace lipflow::netdisc;

namespace {

double svd_norm(const Matrix& w) {
  Eigen::JacobiSVD<Matrix> svd(w);
  return svd.singularValues()(0);
}

// Plain power iteration, independent of the library's implementation.
double power_norm(const Matrix& w, int iters = 2000) {
  Vector v = Vector::Ones(w.cols()).normalized();
  double s = 0.0;
  for (int i = 0; i < iters; ++i) {
    Vector u = w * v;
    v = w.transpose() * u;
    s = std::sqrt(v.norm());
    v.normalize();
  }
  return s;
}

}  // namespace

TEST_CASE("smooth_relu branches") {
  const double eps = 0.0625;
  CHECK(smooth_relu(0.0, eps) == 0.0);
  CHECK(smooth_relu_derivative(0.0, eps) == 0.0);
  CHECK(smooth_relu(-1.0, eps) == 0.0);
  CHECK(smooth_relu(3 * eps, eps) == doctest::Approx(2 * eps).epsilon(1e-15));
  const double pi = std::numbers::pi;
  CHECK(smooth_relu(eps, eps) == doctest::Approx(eps / 4 - eps / (pi * pi)).epsilon(1e-14));
  // Continuity at 2 eps and derivative within [0, 1].
  CHECK(smooth_relu(2 * eps - 1e-12, eps) == doctest::Approx(eps).epsilon(1e-9));
  for (double x = -0.1; x < 0.3; x += 1e-3) {
    const double d = smooth_relu_derivative(x, eps);
    CHECK(d >= 0.0);
    CHECK(d <= 1.0 + 1e-15);
    const double h = 1e-6;
    if (std::abs(x) > 2 * h && std::abs(x - 2 * eps) > 2 * h)
      CHECK(d == doctest::Approx((smooth_relu(x + h, eps) - smooth_relu(x - h, eps)) / (2 * h)).epsilon(1e-6));
  }
}

TEST_CASE("init rescales every layer to L^(1/D)") {
  NetConfig cfg;
  cfg.input_dim = 2;
  cfg.widths = {32, 32, 32, 1};
  cfg.lipschitz = 1.0;
  const auto net = DiscriminatorNet::init(cfg, 7);
  for (const auto& layer : net.layers()) {
    CHECK(svd_norm(layer.weight) == doctest::Approx(1.0).epsilon(1e-4));
    CHECK(layer.sn_state.norm() == doctest::Approx(1.0).epsilon(1e-12));
  }
  cfg.lipschitz = 5.0;
  const auto net5 = DiscriminatorNet::init(cfg, 7);
  const double budget = std::pow(5.0, 0.25);
  CHECK(budget == doctest::Approx(1.49535).epsilon(1e-5));
  for (const auto& layer : net5.layers()) CHECK(power_norm(layer.weight) == doctest::Approx(budget).epsilon(1e-4));
}

TEST_CASE("init is deterministic and rejects bad configs") {
  NetConfig cfg;
  const auto a = DiscriminatorNet::init(cfg, 42);
  const auto b = DiscriminatorNet::init(cfg, 42);
  const auto c = DiscriminatorNet::init(cfg, 43);
  CHECK(a.flatten() == b.flatten());
  CHECK(a.flatten() != c.flatten());
  cfg.widths = {8, 2};
  CHECK_THROWS_AS(DiscriminatorNet::init(cfg, 1), InvalidArgument);
  cfg.widths = {8, 1};
  cfg.lipschitz = 0.0;
  CHECK_THROWS_AS(DiscriminatorNet::init(cfg, 1), InvalidArgument);
}

TEST_CASE("spectral_normalize examples") {
  LayerParams layer;
  layer.weight = 2.0 * Matrix::Identity(3, 3);
  layer.bias = Vector::Zero(3);
  spectral_normalize(layer, 1.0, 10);
  CHECK((layer.weight - Matrix::Identity(3, 3)).norm() < 1e-12);

  layer.weight = Matrix::Zero(2, 2);
  layer.weight(0, 0) = 3.0;
  layer.weight(1, 1) = 1.0;
  layer.sn_state.resize(0);
  spectral_normalize(layer, 1.0, 10);
  CHECK(layer.weight(0, 0) == doctest::Approx(1.0).epsilon(1e-8));
  CHECK(layer.weight(1, 1) == doctest::Approx(1.0 / 3.0).epsilon(1e-8));

  layer.weight = Matrix::Identity(4, 4);
  layer.bias = Vector::Zero(4);
  layer.sn_state.resize(0);
  spectral_normalize(layer, 2.0, 10);
  CHECK((layer.weight - 2.0 * Matrix::Identity(4, 4)).norm() < 1e-12);

  std::mt19937_64 rng(5);
  layer.weight = testutil::gaussian(16, 16, rng);
  layer.bias = Vector::Zero(16);
  layer.sn_state.resize(0);
  spectral_normalize(layer, 1.0, 200);
  CHECK(svd_norm(layer.weight) == doctest::Approx(1.0).epsilon(1e-3));

  layer.weight = testutil::gaussian(16, 9, rng);
  layer.bias = Vector::Zero(9);
  spectral_normalize_exact(layer, 0.7);
  CHECK(svd_norm(layer.weight) == doctest::Approx(0.7).epsilon(1e-10));

  layer.weight = Matrix::Zero(3, 3);
  const auto res = spectral_normalize(layer, 1.0, 5);
  CHECK(res.degenerate);
  CHECK(layer.weight.isZero(0.0));
}

TEST_CASE("spectral_norm agrees with SVD") {
  std::mt19937_64 rng(9);
  for (int trial = 0; trial < 10; ++trial) {
    const Matrix w = testutil::gaussian(3 + trial, 20 - trial, rng);
    CHECK(spectral_norm(w) == doctest::Approx(svd_norm(w)).epsilon(1e-10));
  }
}

TEST_CASE("forward examples and reference agreement") {
  LayerParams only;
  only.weight = Matrix::Zero(2, 1);
  only.weight(0, 0) = 1.0;
  only.bias = Vector::Zero(1);
  auto lin = DiscriminatorNet::from_layers({only}, 1.0, Activation::relu);
  Matrix x(1, 2);
  x << 3.0, 4.0;
  CHECK(lin.forward(x)(0) == 3.0);
  CHECK(lin.input_gradient(x).row(0).transpose() == only.weight.col(0));

  NetConfig cfg;
  auto zero = DiscriminatorNet::init(cfg, 1);
  for (auto& layer : zero.layers()) {
    layer.weight.setZero();
    layer.bias.setZero();
  }
  std::mt19937_64 rng(11);
  const Matrix pts = testutil::gaussian(20, 2, rng);
  CHECK(zero.forward(pts).isZero(0.0));

  for (auto act : {Activation::relu, Activation::smooth_relu}) {
    const auto net = testutil::random_net(3, {16, 8, 1}, 2.0, act, 21);
    const Matrix xs = testutil::gaussian(50, 3, rng);
    const Vector out = net.forward(xs);
    for (Eigen::Index i = 0; i < xs.rows(); ++i)
      CHECK(out(i) == doctest::Approx(testutil::reference_forward(net, xs.row(i).transpose())).epsilon(1e-12));
  }
}

TEST_CASE("empirical Lipschitz ratio stays below L") {
  for (double L : {0.5, 1.0, 3.0}) {
    for (auto act : {Activation::relu, Activation::smooth_relu}) {
      NetConfig cfg;
      cfg.lipschitz = L;
      cfg.activation = act;
      const auto net = DiscriminatorNet::init(cfg, 17);
      const double ratio = empirical_lipschitz(net, Vector::Constant(2, -5.0), Vector::Constant(2, 5.0), 10000, 3);
      CHECK(ratio <= L * (1 + 1e-6));
      CHECK(ratio > 0.0);
    }
  }
}

TEST_CASE("input and parameter gradients match central differences") {
  std::mt19937_64 rng(23);
  auto net = testutil::random_net(2, {12, 12, 1}, std::numeric_limits<double>::infinity(), Activation::smooth_relu, 5);
  const Matrix x = testutil::gaussian(6, 2, rng);
  const Vector upstream = testutil::gaussian(6, 1, rng);
  ForwardCache cache;
  net.forward(x, cache);
  const Gradients g = net.backward(cache, upstream);
  auto loss = [&](const DiscriminatorNet& n, const Matrix& pts) { return upstream.dot(n.forward(pts)); };

  const double h = 1e-6;
  for (Eigen::Index i = 0; i < x.rows(); ++i)
    for (Eigen::Index j = 0; j < x.cols(); ++j) {
      Matrix xp = x, xm = x;
      xp(i, j) += h;
      xm(i, j) -= h;
      const double fd = (loss(net, xp) - loss(net, xm)) / (2 * h);
      CHECK(g.input(i, j) == doctest::Approx(fd).epsilon(1e-5));
    }

  const Vector flat = net.flatten();
  const Vector analytic = net.flatten(g);
  REQUIRE(analytic.size() == flat.size());
  for (Eigen::Index k = 0; k < flat.size(); k += 3) {
    auto np = net, nm = net;
    Vector fp = flat, fm = flat;
    fp(k) += h;
    fm(k) -= h;
    np.unflatten(fp);
    nm.unflatten(fm);
    const double fd = (loss(np, x) - loss(nm, x)) / (2 * h);
    CHECK(analytic(k) == doctest::Approx(fd).epsilon(1e-5).scale(1e-6));
  }

  const Gradients none = net.backward(cache, Vector::Zero(6));
  CHECK(net.flatten(none).isZero(0.0));
  CHECK(none.input.isZero(0.0));
}

TEST_CASE("adam step") {
  // Maximize -(w - 1)^2 with a one-weight linear net on input 1.
  LayerParams layer;
  layer.weight = Matrix::Zero(1, 1);
  layer.bias = Vector::Zero(1);
  auto net = DiscriminatorNet::from_layers({layer}, std::numeric_limits<double>::infinity(), Activation::relu);
  AdamConfig cfg;
  cfg.lr = 0.1;
  AdamState state(cfg);
  auto step = [&] {
    Gradients g;
    const double w = net.layers()[0].weight(0, 0);
    g.weight = {Matrix::Constant(1, 1, -2.0 * (w - 1.0))};
    g.bias = {Vector::Zero(1)};
    adam_step(net, g, 0.0, state);
  };
  step();
  CHECK(net.layers()[0].weight(0, 0) == doctest::Approx(0.1).epsilon(1e-6));
  int steps = 1;
  while (steps < 500 && std::abs(net.layers()[0].weight(0, 0) - 1.0) > 1e-3) {
    step();
    ++steps;
  }
  CHECK(std::abs(net.layers()[0].weight(0, 0) - 1.0) <= 1e-3);
  CHECK(steps <= 500);

  // Zero gradients leave a normalized net where it was.
  NetConfig nc;
  auto constrained = DiscriminatorNet::init(nc, 3);
  const Vector before = constrained.flatten();
  Gradients zero;
  for (const auto& l : constrained.layers()) {
    zero.weight.push_back(Matrix::Zero(l.weight.rows(), l.weight.cols()));
    zero.bias.push_back(Vector::Zero(l.bias.size()));
  }
  AdamState s2;
  adam_step(constrained, zero, 0.0, s2);
  CHECK((constrained.flatten() - before).norm() < 1e-12);
}

TEST_CASE("serialization round-trips exactly") {
  NetConfig cfg;
  cfg.activation = Activation::smooth_relu;
  cfg.lipschitz = 2.5;
  auto net = DiscriminatorNet::init(cfg, 99);
  net.set_nu(-0.3141592653589793);
  const auto back = net_from_json(to_json(net));
  CHECK(back.flatten() == net.flatten());
  CHECK(back.nu() == net.nu());
  CHECK(back.lipschitz_bound() == net.lipschitz_bound());
  CHECK(back.activation() == net.activation());
  const auto blob = net_from_blob(to_blob(net));
  CHECK(blob.flatten() == net.flatten());
  for (std::size_t l = 0; l < net.layers().size(); ++l) CHECK(blob.layers()[l].sn_state == net.layers()[l].sn_state);

  NetConfig inf_cfg;
  inf_cfg.lipschitz = std::numeric_limits<double>::infinity();
  const auto unconstrained = DiscriminatorNet::init(inf_cfg, 1);
  CHECK_FALSE(net_from_json(to_json(unconstrained)).constrained());
  CHECK_THROWS(net_from_blob("LIPFNET1garbage"));
}
