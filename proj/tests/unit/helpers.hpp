#pragma once

#include <cmath>
#include <random>

#include "lipflow/netdisc.hpp"

namespace testutil {

using lipflow::Matrix;
using lipflow::Vector;

inline Matrix gaussian(Eigen::Index rows, Eigen::Index cols, std::mt19937_64& rng, double sigma = 1.0) {
  std::normal_distribution<double> g(0.0, sigma);
  Matrix m(rows, cols);
  for (Eigen::Index j = 0; j < cols; ++j)
    for (Eigen::Index i = 0; i < rows; ++i) m(i, j) = g(rng);
  return m;
}

// Plain scalar re-implementation of the network, one sample at a time.
inline double reference_forward(const lipflow::netdisc::DiscriminatorNet& net, const Vector& x) {
  Vector a = x;
  const auto& layers = net.layers();
  for (std::size_t l = 0; l < layers.size(); ++l) {
    const auto& w = layers[l].weight;
    Vector z(w.cols());
    for (Eigen::Index o = 0; o < w.cols(); ++o) {
      double s = layers[l].bias(o);
      for (Eigen::Index i = 0; i < w.rows(); ++i) s += a(i) * w(i, o);
      z(o) = s;
    }
    if (l + 1 < layers.size()) {
      for (Eigen::Index o = 0; o < z.size(); ++o)
        z(o) = net.activation() == lipflow::netdisc::Activation::relu ? std::max(0.0, z(o))
                                                                       : lipflow::netdisc::smooth_relu(z(o), net.smooth_eps());
    }
    a = z;
  }
  return a(0);
}

inline lipflow::netdisc::DiscriminatorNet random_net(int input_dim, std::vector<int> widths, double lipschitz,
                                                     lipflow::netdisc::Activation act, std::uint64_t seed) {
  lipflow::netdisc::NetConfig cfg;
  cfg.input_dim = input_dim;
  cfg.widths = std::move(widths);
  cfg.lipschitz = lipschitz;
  cfg.activation = act;
  auto net = lipflow::netdisc::DiscriminatorNet::init(cfg, seed);
  // Non-zero biases so that the smooth region of the activation is exercised.
  std::mt19937_64 rng(seed ^ 0x5eed);
  std::normal_distribution<double> g(0.0, 0.1);
  for (auto& layer : net.layers())
    for (Eigen::Index i = 0; i < layer.bias.size(); ++i) layer.bias(i) = g(rng);
  return net;
}

}  // namespace testutil
