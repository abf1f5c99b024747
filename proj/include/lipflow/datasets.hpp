#pragma once

#include <cstdint>
#include <filesystem>
#include <memory>
#include <string_view>
#include <vector>

#include "lipflow/particles.hpp"

namespace lipflow::datasets {

enum class DistKind { gauss_mixture, gauss_ball, sierpinski, swiss_roll, student_t, gen_gaussian, embedded };

std::string_view to_string(DistKind k) noexcept;
DistKind dist_kind_from_string(std::string_view s);

/// Axis-aligned square [lo, hi]^2.
struct Box {
  double lo = 0.0;
  double hi = 10.0;
};

struct DistSpec {
  DistKind kind = DistKind::gauss_ball;
  std::uint64_t seed = 0;

  // gauss_ball, student_t, gen_gaussian: location and per-coordinate scale.
  // An empty center means the origin in `dim` dimensions.
  Vector center;
  int dim = 2;
  double scale = 1.0;

  // gauss_mixture: isotropic components with common std `scale`.
  std::vector<Vector> centers;
  std::vector<double> weights;  // empty: uniform

  double df = 3.0;    // student_t degrees of freedom
  double beta = 0.5;  // gen_gaussian shape, density ~ exp(-|x|^beta)

  int level = 4;  // sierpinski
  Box box{};

  double noise = 0.0;  // swiss_roll isotropic Gaussian noise

  // embedded: inner sample placed in the first coordinates of R^ambient_dim,
  // every coordinate shifted by `offset`, the remaining coordinates drawn
  // from N(0, ortho_sigma^2). With `rotate`, a seeded random orthonormal
  // frame replaces the coordinate axes.
  std::shared_ptr<DistSpec> inner;
  int ambient_dim = 0;
  double offset = 0.0;
  double ortho_sigma = 0.0;
  bool rotate = false;

  int dimension() const;
  void validate() const;

  static DistSpec gauss_ball(Vector center, double sigma, std::uint64_t seed);
  static DistSpec gauss_mixture(std::vector<Vector> centers, double sigma, std::uint64_t seed);
  static DistSpec student_t(Vector center, double df, double scale, std::uint64_t seed);
  static DistSpec gen_gaussian(Vector center, double beta, double scale, std::uint64_t seed);
  static DistSpec sierpinski(int level, Box box, std::uint64_t seed);
  static DistSpec swiss_roll(double noise, std::uint64_t seed);
  static DistSpec embedded(DistSpec inner, int ambient_dim, double offset, double ortho_sigma,
                           bool rotate, std::uint64_t seed);
};

/// n i.i.d. draws, deterministic in (spec, n). For sierpinski, n = 8^level
/// gives one draw per retained cell; any other n draws cells uniformly.
ParticleSet sample(const DistSpec& spec, Eigen::Index n);

/// One uniform draw in each of the 8^level retained cells of the carpet.
ParticleSet sierpinski_targets(int level, const Box& box, std::uint64_t seed);

/// True when x lies in a removed square of the level-`level` carpet on `box`.
bool in_carpet_hole(double x, double y, int level, const Box& box);

/// Spiral with angle 3*pi*s and radius 1 + 3s, s ~ U[0, 1].
ParticleSet swiss_roll(Eigen::Index n, double noise, std::uint64_t seed);

/// Random orthonormal d x d matrix (QR of a Gaussian matrix with sign fix).
Matrix random_orthonormal(int d, std::uint64_t seed);

/// CSV with header x_0..x_{d-1} and 17 significant digits.
void save_csv(const ParticleSet& particles, const std::filesystem::path& path);
ParticleSet load_csv(const std::filesystem::path& path, bool has_header = true);

}  // namespace lipflow::datasets
