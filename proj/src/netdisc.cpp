#include "lipflow/netdisc.hpp"

#include <cmath>
#include <numbers>
#include <random>
#include <string>

#include <Eigen/Eigenvalues>

#include "lipflow/rng.hpp"

namespace lipflow::netdisc {

double smooth_relu(double x, double eps) noexcept {
  if (x <= 0.0) return 0.0;
  if (x >= 2.0 * eps) return x - eps;
  constexpr double pi = std::numbers::pi;
  return x * x / (4.0 * eps) + eps / (2.0 * pi * pi) * (std::cos(pi * x / eps) - 1.0);
}

double smooth_relu_derivative(double x, double eps) noexcept {
  if (x <= 0.0) return 0.0;
  if (x >= 2.0 * eps) return 1.0;
  constexpr double pi = std::numbers::pi;
  return x / (2.0 * eps) - std::sin(pi * x / eps) / (2.0 * pi);
}

double spectral_norm(const Matrix& w) {
  if (w.size() == 0) return 0.0;
  if (w.rows() == 1 || w.cols() == 1) return w.norm();
  Matrix gram = w.rows() <= w.cols() ? Matrix(w * w.transpose()) : Matrix(w.transpose() * w);
  Eigen::SelfAdjointEigenSolver<Matrix> solver(gram, Eigen::EigenvaluesOnly);
  return std::sqrt(std::max(0.0, solver.eigenvalues().maxCoeff()));
}

namespace {

void ensure_sn_state(LayerParams& layer) {
  const auto in = layer.weight.rows();
  if (layer.sn_state.size() == in && layer.sn_state.norm() > 0.0) return;
  layer.sn_state = Vector::Constant(in, 1.0 / std::sqrt(static_cast<double>(in)));
}

// One step u <- W W^T u / |.|; returns the Rayleigh estimate |W^T u|.
double power_step(const Matrix& w, Vector& u) {
  Vector v = w.transpose() * u;
  const double vn = v.norm();
  if (vn == 0.0) return 0.0;
  v /= vn;
  Vector next = w * v;
  const double sigma = next.norm();
  if (sigma == 0.0) return 0.0;
  u = next / sigma;
  return sigma;
}

void rescale(LayerParams& layer, double sigma, double target_norm) {
  layer.weight *= target_norm / sigma;
}

}  // namespace

SpectralResult spectral_normalize(LayerParams& layer, double target_norm, int power_iters) {
  if (power_iters < 1) throw InvalidArgument("spectral_normalize: power_iters must be >= 1");
  SpectralResult result;
  if (layer.weight.size() == 0 || layer.weight.isZero(0.0)) {
    result.degenerate = true;
    return result;
  }
  ensure_sn_state(layer);
  double sigma = 0.0;
  for (int i = 0; i < power_iters; ++i) sigma = power_step(layer.weight, layer.sn_state);
  if (!(sigma > 0.0)) {
    // sn_state orthogonal to the row space; fall back to the exact norm.
    sigma = spectral_norm(layer.weight);
  }
  result.sigma = sigma;
  rescale(layer, sigma, target_norm);
  return result;
}

SpectralResult spectral_normalize_exact(LayerParams& layer, double target_norm) {
  SpectralResult result;
  if (layer.weight.size() == 0 || layer.weight.isZero(0.0)) {
    result.degenerate = true;
    return result;
  }
  ensure_sn_state(layer);
  power_step(layer.weight, layer.sn_state);
  result.sigma = spectral_norm(layer.weight);
  rescale(layer, result.sigma, target_norm);
  return result;
}

DiscriminatorNet DiscriminatorNet::init(const NetConfig& cfg, std::uint64_t seed) {
  if (!(cfg.lipschitz > 0.0)) throw InvalidArgument("init_network: Lipschitz bound must be > 0");
  if (cfg.input_dim < 1) throw InvalidArgument("init_network: input dimension must be >= 1");
  if (cfg.widths.empty()) throw InvalidArgument("init_network: widths must be nonempty");
  if (cfg.widths.back() != 1) throw InvalidArgument("init_network: final width must be 1");
  for (int w : cfg.widths)
    if (w < 1) throw InvalidArgument("init_network: widths must be positive");

  SplitMix64 rng(seed);
  std::vector<LayerParams> layers;
  int in = cfg.input_dim;
  for (int out : cfg.widths) {
    LayerParams layer;
    const double limit = std::sqrt(6.0 / static_cast<double>(in + out));
    std::uniform_real_distribution<double> uni(-limit, limit);
    layer.weight.resize(in, out);
    for (Eigen::Index j = 0; j < layer.weight.cols(); ++j)
      for (Eigen::Index i = 0; i < layer.weight.rows(); ++i) layer.weight(i, j) = uni(rng);
    layer.bias = Vector::Zero(out);
    layer.sn_state.resize(in);
    std::normal_distribution<double> gauss;
    for (Eigen::Index i = 0; i < in; ++i) layer.sn_state(i) = gauss(rng);
    layer.sn_state.normalize();
    layers.push_back(std::move(layer));
    in = out;
  }

  DiscriminatorNet net = from_layers(std::move(layers), cfg.lipschitz, cfg.activation,
                                     cfg.smooth_eps);
  net.set_spectral_method(cfg.sn_method, cfg.sn_power_iters);
  if (net.constrained()) {
    for (auto& layer : net.layers_) {
      if (net.sn_method_ == SpectralMethod::exact)
        spectral_normalize_exact(layer, net.layer_norm_budget());
      else
        spectral_normalize(layer, net.layer_norm_budget(), std::max(1, cfg.sn_init_iters));
    }
  }
  return net;
}

DiscriminatorNet DiscriminatorNet::from_layers(std::vector<LayerParams> layers, double lipschitz,
                                               Activation activation, double smooth_eps) {
  if (!(lipschitz > 0.0)) throw InvalidArgument("DiscriminatorNet: Lipschitz bound must be > 0");
  if (layers.empty()) throw InvalidArgument("DiscriminatorNet: at least one layer required");
  if (activation == Activation::smooth_relu && !(smooth_eps > 0.0))
    throw InvalidArgument("DiscriminatorNet: smooth_relu eps must be > 0");
  for (std::size_t l = 0; l < layers.size(); ++l) {
    const auto& layer = layers[l];
    if (layer.bias.size() != layer.weight.cols())
      throw InvalidArgument("DiscriminatorNet: bias size mismatch in layer " + std::to_string(l));
    if (l > 0 && layers[l - 1].weight.cols() != layer.weight.rows())
      throw InvalidArgument("DiscriminatorNet: width mismatch at layer " + std::to_string(l));
  }
  if (layers.back().weight.cols() != 1)
    throw InvalidArgument("DiscriminatorNet: final layer must have width 1");
  DiscriminatorNet net;
  net.layers_ = std::move(layers);
  net.lipschitz_ = lipschitz;
  net.activation_ = activation;
  net.smooth_eps_ = smooth_eps;
  return net;
}

int DiscriminatorNet::input_dim() const noexcept {
  return layers_.empty() ? 0 : static_cast<int>(layers_.front().weight.rows());
}

double DiscriminatorNet::layer_norm_budget() const noexcept {
  if (!constrained()) return lipschitz_;
  return std::pow(lipschitz_, 1.0 / static_cast<double>(depth()));
}

void DiscriminatorNet::set_spectral_method(SpectralMethod m, int power_iters) noexcept {
  sn_method_ = m;
  sn_power_iters_ = std::max(1, power_iters);
}

void DiscriminatorNet::normalize(int power_iters) {
  if (!constrained()) return;
  const double budget = layer_norm_budget();
  for (auto& layer : layers_) {
    if (power_iters > 0)
      spectral_normalize(layer, budget, power_iters);
    else if (sn_method_ == SpectralMethod::exact)
      spectral_normalize_exact(layer, budget);
    else
      spectral_normalize(layer, budget, sn_power_iters_);
  }
}

Eigen::Index DiscriminatorNet::parameter_count() const noexcept {
  Eigen::Index n = 0;
  for (const auto& layer : layers_) n += layer.weight.size() + layer.bias.size();
  return n;
}

void DiscriminatorNet::activate(const Matrix& pre, Matrix& post) const {
  if (activation_ == Activation::relu) {
    post = pre.cwiseMax(0.0);
  } else {
    const double eps = smooth_eps_;
    post = pre.unaryExpr([eps](double x) { return smooth_relu(x, eps); });
  }
}

void DiscriminatorNet::activation_slope(const Matrix& pre, Matrix& slope) const {
  if (activation_ == Activation::relu) {
    slope = (pre.array() > 0.0).cast<double>().matrix();
  } else {
    const double eps = smooth_eps_;
    slope = pre.unaryExpr([eps](double x) { return smooth_relu_derivative(x, eps); });
  }
}

void DiscriminatorNet::forward(const Matrix& x, ForwardCache& cache) const {
  if (x.cols() != input_dim())
    throw InvalidArgument("forward: input has " + std::to_string(x.cols()) +
                          " columns, network expects " + std::to_string(input_dim()));
  const std::size_t depth = layers_.size();
  cache.pre.resize(depth);
  cache.post.resize(depth);
  cache.post[0] = x;
  for (std::size_t l = 0; l < depth; ++l) {
    const auto& layer = layers_[l];
    Matrix& z = cache.pre[l];
    z.noalias() = cache.post[l] * layer.weight;
    z.rowwise() += layer.bias.transpose();
    if (l + 1 < depth) activate(z, cache.post[l + 1]);
  }
  cache.output = cache.pre.back().col(0);
}

Vector DiscriminatorNet::forward(const Matrix& x) const {
  ForwardCache cache;
  forward(x, cache);
  return cache.output;
}

void DiscriminatorNet::backward(const ForwardCache& cache, const Vector& upstream, Gradients& out,
                                bool want_params, bool want_input) const {
  if (cache.empty() || cache.pre.size() != layers_.size())
    throw InvalidArgument("backward: no cached forward pass for this network");
  if (upstream.size() != cache.batch())
    throw InvalidArgument("backward: upstream gradient size does not match cached batch");
  const std::size_t depth = layers_.size();
  if (want_params) {
    out.weight.resize(depth);
    out.bias.resize(depth);
  }
  Matrix delta = upstream;  // B x 1
  Matrix slope;
  for (std::size_t l = depth; l-- > 0;) {
    const auto& layer = layers_[l];
    if (want_params) {
      out.weight[l].noalias() = cache.post[l].transpose() * delta;
      out.bias[l] = delta.colwise().sum().transpose();
    }
    if (l == 0 && !want_input) break;
    Matrix back;
    back.noalias() = delta * layer.weight.transpose();
    if (l == 0) {
      out.input = std::move(back);
    } else {
      activation_slope(cache.pre[l - 1], slope);
      delta = back.cwiseProduct(slope);
    }
  }
}

Gradients DiscriminatorNet::backward(const ForwardCache& cache, const Vector& upstream) const {
  Gradients g;
  backward(cache, upstream, g, true, true);
  return g;
}

Matrix DiscriminatorNet::input_gradient(const Matrix& x) const {
  ForwardCache cache;
  forward(x, cache);
  Gradients g;
  backward(cache, Vector::Ones(x.rows()), g, false, true);
  return g.input;
}

Vector DiscriminatorNet::flatten() const {
  Vector flat(parameter_count());
  Eigen::Index k = 0;
  for (const auto& layer : layers_) {
    flat.segment(k, layer.weight.size()) = layer.weight.reshaped();
    k += layer.weight.size();
    flat.segment(k, layer.bias.size()) = layer.bias;
    k += layer.bias.size();
  }
  return flat;
}

Vector DiscriminatorNet::flatten(const Gradients& grads) const {
  if (grads.weight.size() != layers_.size() || grads.bias.size() != layers_.size())
    throw InvalidArgument("flatten: gradient layout does not match network");
  Vector flat(parameter_count());
  Eigen::Index k = 0;
  for (std::size_t l = 0; l < layers_.size(); ++l) {
    flat.segment(k, grads.weight[l].size()) = grads.weight[l].reshaped();
    k += grads.weight[l].size();
    flat.segment(k, grads.bias[l].size()) = grads.bias[l];
    k += grads.bias[l].size();
  }
  return flat;
}

void DiscriminatorNet::unflatten(const Vector& flat) {
  if (flat.size() != parameter_count())
    throw InvalidArgument("unflatten: parameter vector has wrong length");
  Eigen::Index k = 0;
  for (auto& layer : layers_) {
    layer.weight.reshaped() = flat.segment(k, layer.weight.size());
    k += layer.weight.size();
    layer.bias = flat.segment(k, layer.bias.size());
    k += layer.bias.size();
  }
}

void AdamState::ascend(Vector& params, const Vector& grad) {
  if (params.size() != grad.size())
    throw InvalidArgument("adam_step: gradient and parameter shapes differ");
  if (m_.size() != params.size()) {
    m_ = Vector::Zero(params.size());
    v_ = Vector::Zero(params.size());
    step_ = 0;
  }
  ++step_;
  m_ = cfg_.beta1 * m_ + (1.0 - cfg_.beta1) * grad;
  v_ = cfg_.beta2 * v_ + (1.0 - cfg_.beta2) * grad.cwiseAbs2();
  const double c1 = 1.0 - std::pow(cfg_.beta1, static_cast<double>(step_));
  const double c2 = 1.0 - std::pow(cfg_.beta2, static_cast<double>(step_));
  params.array() += cfg_.lr * (m_.array() / c1) / ((v_.array() / c2).sqrt() + cfg_.eps);
}

void adam_step(DiscriminatorNet& net, const Gradients& grads, double grad_nu, AdamState& state) {
  const Eigen::Index n = net.parameter_count();
  Vector params(n + 1);
  params.head(n) = net.flatten();
  params(n) = net.nu();
  Vector g(n + 1);
  g.head(n) = net.flatten(grads);
  g(n) = grad_nu;
  state.ascend(params, g);
  net.unflatten(params.head(n));
  net.set_nu(params(n));
  net.normalize();
}

double empirical_lipschitz(const DiscriminatorNet& net, const Vector& lo, const Vector& hi,
                           int pairs, std::uint64_t seed) {
  const auto d = net.input_dim();
  if (lo.size() != d || hi.size() != d)
    throw InvalidArgument("empirical_lipschitz: bounding box dimension mismatch");
  SplitMix64 rng(seed);
  Matrix x(pairs, d), y(pairs, d);
  for (int i = 0; i < pairs; ++i)
    for (int j = 0; j < d; ++j) {
      x(i, j) = lo(j) + (hi(j) - lo(j)) * rng.uniform();
      y(i, j) = lo(j) + (hi(j) - lo(j)) * rng.uniform();
    }
  const Vector fx = net.forward(x);
  const Vector fy = net.forward(y);
  double best = 0.0;
  for (int i = 0; i < pairs; ++i) {
    const double dist = (x.row(i) - y.row(i)).norm();
    if (dist > 0.0) best = std::max(best, std::abs(fx(i) - fy(i)) / dist);
  }
  return best;
}

}  // namespace lipflow::netdisc
