#pragma once

#include <cstdint>
#include <limits>
#include <vector>

#include "lipflow/particles.hpp"

// Lipschitz-constrained feed-forward discriminator phi: R^d -> R.
//
// Layer l maps a batch A (B x in) to act(A * W + 1 b^T) with W stored as an
// (in x out) matrix; the last layer is linear and has out = 1. Every weight
// matrix is rescaled to spectral norm L^(1/D), so with activation slopes in
// [0, 1] the network is globally L-Lipschitz. L = +inf disables the
// normalization entirely.
namespace lipflow::netdisc {

enum class Activation { relu, smooth_relu };
enum class SpectralMethod { exact, power };

inline constexpr double kDefaultSmoothEps = 0.0625;  // 2^-4

/// C^1 rectifier: 0 for x <= 0, x^2/(4 eps) + eps/(2 pi^2) (cos(pi x/eps) - 1)
/// on (0, 2 eps), and x - eps beyond. Derivative lies in [0, 1].
double smooth_relu(double x, double eps) noexcept;
double smooth_relu_derivative(double x, double eps) noexcept;

struct LayerParams {
  Matrix weight;    // in x out
  Vector bias;      // out
  Vector sn_state;  // unit vector in R^in, warm start for power iteration
};

struct SpectralResult {
  double sigma = 0.0;  // norm estimate before rescaling
  bool degenerate = false;
};

/// Spectral norm by the largest eigenvalue of the smaller Gram matrix.
double spectral_norm(const Matrix& w);

/// Rescale `layer.weight` to spectral norm `target_norm` using `power_iters`
/// warm-started power iterations. A zero matrix is left unchanged and flagged.
SpectralResult spectral_normalize(LayerParams& layer, double target_norm, int power_iters);

/// Same contract, but divides by the exact spectral norm. sn_state still
/// advances by one power step.
SpectralResult spectral_normalize_exact(LayerParams& layer, double target_norm);

struct NetConfig {
  int input_dim = 2;
  std::vector<int> widths{32, 32, 32, 1};
  double lipschitz = 1.0;  // +inf: unconstrained
  Activation activation = Activation::relu;
  double smooth_eps = kDefaultSmoothEps;
  SpectralMethod sn_method = SpectralMethod::exact;
  int sn_power_iters = 1;
  int sn_init_iters = 20;
};

/// Activations cached by a forward pass, consumed by backward().
struct ForwardCache {
  std::vector<Matrix> pre;   // pre[l]: B x width_l, pre-activation of layer l
  std::vector<Matrix> post;  // post[0] = input, post[l+1] = act(pre[l])
  Vector output;             // B

  bool empty() const noexcept { return pre.empty(); }
  Eigen::Index batch() const noexcept { return output.size(); }
};

struct Gradients {
  std::vector<Matrix> weight;
  std::vector<Vector> bias;
  Matrix input;  // B x d, row i = d/dx of sum_j g_j phi(x_j) at x_i
};

class DiscriminatorNet {
public:
  DiscriminatorNet() = default;

  /// Random Glorot-uniform weights, zero biases, nu = 0, then every layer
  /// rescaled to L^(1/D). Deterministic given the seed.
  static DiscriminatorNet init(const NetConfig& cfg, std::uint64_t seed);

  /// Build from explicit layers. Weights are taken as given (not normalized).
  static DiscriminatorNet from_layers(std::vector<LayerParams> layers, double lipschitz,
                                      Activation activation,
                                      double smooth_eps = kDefaultSmoothEps);

  int input_dim() const noexcept;
  int depth() const noexcept { return static_cast<int>(layers_.size()); }
  double lipschitz_bound() const noexcept { return lipschitz_; }
  bool constrained() const noexcept { return lipschitz_ < std::numeric_limits<double>::infinity(); }
  /// Per-layer norm budget L^(1/D).
  double layer_norm_budget() const noexcept;
  Activation activation() const noexcept { return activation_; }
  double smooth_eps() const noexcept { return smooth_eps_; }
  SpectralMethod sn_method() const noexcept { return sn_method_; }
  int sn_power_iters() const noexcept { return sn_power_iters_; }
  void set_spectral_method(SpectralMethod m, int power_iters) noexcept;

  const std::vector<LayerParams>& layers() const noexcept { return layers_; }
  std::vector<LayerParams>& layers() noexcept { return layers_; }
  double nu() const noexcept { return nu_; }
  void set_nu(double nu) noexcept { nu_ = nu; }

  /// Project every layer back onto spectral norm L^(1/D) (no-op when L = inf).
  /// `power_iters` <= 0 selects the net's configured method.
  void normalize(int power_iters = 0);

  /// Number of trainable scalars excluding nu.
  Eigen::Index parameter_count() const noexcept;

  Vector forward(const Matrix& x) const;
  void forward(const Matrix& x, ForwardCache& cache) const;

  /// Gradient of sum_i upstream_i * phi(x_i) w.r.t. the parameters (optional)
  /// and the inputs. Throws InvalidArgument without a matching cache.
  void backward(const ForwardCache& cache, const Vector& upstream, Gradients& out,
                bool want_params = true, bool want_input = true) const;
  Gradients backward(const ForwardCache& cache, const Vector& upstream) const;

  /// Row-wise grad_x phi over a batch.
  Matrix input_gradient(const Matrix& x) const;

  /// Flat parameter vector [W_1, b_1, ..., W_D, b_D] (column-major weights).
  Vector flatten() const;
  void unflatten(const Vector& flat);
  Vector flatten(const Gradients& grads) const;

private:
  void activate(const Matrix& pre, Matrix& post) const;
  void activation_slope(const Matrix& pre, Matrix& slope) const;

  std::vector<LayerParams> layers_;
  double lipschitz_ = 1.0;
  Activation activation_ = Activation::relu;
  double smooth_eps_ = kDefaultSmoothEps;
  SpectralMethod sn_method_ = SpectralMethod::exact;
  int sn_power_iters_ = 1;
  double nu_ = 0.0;
};

struct AdamConfig {
  double lr = 1e-3;
  double beta1 = 0.5;
  double beta2 = 0.999;
  double eps = 1e-8;
};

/// Adam moments over a flat parameter vector. `ascend` takes a step along
/// +gradient (the discriminator problem is a maximization).
class AdamState {
public:
  AdamState() = default;
  explicit AdamState(AdamConfig cfg) : cfg_(cfg) {}

  void ascend(Vector& params, const Vector& grad);

  const AdamConfig& config() const noexcept { return cfg_; }
  long step() const noexcept { return step_; }
  const Vector& first_moment() const noexcept { return m_; }
  const Vector& second_moment() const noexcept { return v_; }

private:
  AdamConfig cfg_;
  Vector m_;
  Vector v_;
  long step_ = 0;
};

/// One optimizer step on (W, b, nu) followed by spectral re-projection.
void adam_step(DiscriminatorNet& net, const Gradients& grads, double grad_nu, AdamState& state);

/// max |phi(x) - phi(y)| / |x - y| over `pairs` uniform pairs in [lo, hi].
double empirical_lipschitz(const DiscriminatorNet& net, const Vector& lo, const Vector& hi,
                           int pairs, std::uint64_t seed);

}  // namespace lipflow::netdisc
