#include "lipflow/datasets.hpp"

#include <array>
#include <charconv>
#include <cmath>
#include <fstream>
#include <numbers>
#include <random>
#include <sstream>
#include <string>

#include <Eigen/QR>

#include "lipflow/rng.hpp"

namespace lipflow {

std::string_view to_string(Role role) noexcept {
  switch (role) {
    case Role::source: return "source";
    case Role::target: return "target";
    case Role::generated: return "generated";
  }
  return "?";
}

}  // namespace lipflow

namespace lipflow::datasets {

namespace {

constexpr std::array<std::string_view, 7> kKindNames{
    "gauss_mixture", "gauss_ball", "sierpinski", "swiss_roll", "student_t", "gen_gaussian", "embedded"};

Eigen::Index ipow(Eigen::Index base, int e) {
  Eigen::Index r = 1;
  for (int i = 0; i < e; ++i) r *= base;
  return r;
}

bool retained_cell(Eigen::Index i, Eigen::Index j) {
  while (i > 0 || j > 0) {
    if (i % 3 == 1 && j % 3 == 1) return false;
    i /= 3;
    j /= 3;
  }
  return true;
}

std::vector<std::pair<Eigen::Index, Eigen::Index>> retained_cells(int level) {
  const Eigen::Index side = ipow(3, level);
  std::vector<std::pair<Eigen::Index, Eigen::Index>> cells;
  cells.reserve(static_cast<std::size_t>(ipow(8, level)));
  for (Eigen::Index i = 0; i < side; ++i)
    for (Eigen::Index j = 0; j < side; ++j)
      if (retained_cell(i, j)) cells.emplace_back(i, j);
  return cells;
}

Vector location(const DistSpec& s) {
  return s.center.size() ? s.center : Vector::Zero(s.dim);
}

Matrix sample_gauss_ball(const DistSpec& s, Eigen::Index n, SplitMix64& rng) {
  const Vector c = location(s);
  std::normal_distribution<double> normal(0.0, 1.0);
  Matrix x(n, c.size());
  for (Eigen::Index i = 0; i < n; ++i)
    for (Eigen::Index k = 0; k < c.size(); ++k) x(i, k) = c(k) + s.scale * normal(rng);
  return x;
}

Matrix sample_mixture(const DistSpec& s, Eigen::Index n, SplitMix64& rng) {
  const Eigen::Index d = s.centers.front().size();
  std::vector<double> w = s.weights;
  if (w.empty()) w.assign(s.centers.size(), 1.0);
  std::discrete_distribution<std::size_t> pick(w.begin(), w.end());
  std::normal_distribution<double> normal(0.0, 1.0);
  Matrix x(n, d);
  for (Eigen::Index i = 0; i < n; ++i) {
    const Vector& c = s.centers[pick(rng)];
    for (Eigen::Index k = 0; k < d; ++k) x(i, k) = c(k) + s.scale * normal(rng);
  }
  return x;
}

Matrix sample_student_t(const DistSpec& s, Eigen::Index n, SplitMix64& rng) {
  const Vector c = location(s);
  std::normal_distribution<double> normal(0.0, 1.0);
  std::chi_squared_distribution<double> chi2(s.df);
  Matrix x(n, c.size());
  for (Eigen::Index i = 0; i < n; ++i)
    for (Eigen::Index k = 0; k < c.size(); ++k) {
      const double z = normal(rng);
      const double v = chi2(rng);
      x(i, k) = c(k) + s.scale * z / std::sqrt(v / s.df);
    }
  return x;
}

Matrix sample_gen_gaussian(const DistSpec& s, Eigen::Index n, SplitMix64& rng) {
  const Vector c = location(s);
  std::gamma_distribution<double> gamma(1.0 / s.beta, 1.0);
  Matrix x(n, c.size());
  for (Eigen::Index i = 0; i < n; ++i)
    for (Eigen::Index k = 0; k < c.size(); ++k) {
      const double r = std::pow(gamma(rng), 1.0 / s.beta);
      const double sign = (rng() >> 63) ? 1.0 : -1.0;
      x(i, k) = c(k) + s.scale * sign * r;
    }
  return x;
}

Matrix sample_sierpinski(const DistSpec& s, Eigen::Index n, SplitMix64& rng) {
  const auto cells = retained_cells(s.level);
  const double width = (s.box.hi - s.box.lo) / static_cast<double>(ipow(3, s.level));
  const bool one_per_cell = n == static_cast<Eigen::Index>(cells.size());
  std::uniform_int_distribution<std::size_t> pick(0, cells.size() - 1);
  Matrix x(n, 2);
  for (Eigen::Index r = 0; r < n; ++r) {
    const auto& [i, j] = one_per_cell ? cells[static_cast<std::size_t>(r)] : cells[pick(rng)];
    x(r, 0) = s.box.lo + (static_cast<double>(i) + rng.uniform()) * width;
    x(r, 1) = s.box.lo + (static_cast<double>(j) + rng.uniform()) * width;
  }
  return x;
}

Matrix sample_swiss_roll(Eigen::Index n, double noise, SplitMix64& rng) {
  std::normal_distribution<double> normal(0.0, 1.0);
  Matrix x(n, 2);
  for (Eigen::Index i = 0; i < n; ++i) {
    const double s = rng.uniform();
    const double theta = 3.0 * std::numbers::pi * s;
    const double r = 1.0 + 3.0 * s;
    x(i, 0) = r * std::cos(theta);
    x(i, 1) = r * std::sin(theta);
    if (noise > 0.0) {
      x(i, 0) += noise * normal(rng);
      x(i, 1) += noise * normal(rng);
    }
  }
  return x;
}

Matrix sample_matrix(const DistSpec& s, Eigen::Index n);

Matrix sample_embedded(const DistSpec& s, Eigen::Index n, SplitMix64& rng) {
  const Matrix inner = sample_matrix(*s.inner, n);
  const Eigen::Index k = inner.cols();
  const Eigen::Index d = s.ambient_dim;
  Matrix coords = Matrix::Zero(n, d);
  coords.leftCols(k) = inner;
  if (s.ortho_sigma > 0.0) {
    std::normal_distribution<double> normal(0.0, s.ortho_sigma);
    for (Eigen::Index i = 0; i < n; ++i)
      for (Eigen::Index c = k; c < d; ++c) coords(i, c) = normal(rng);
  }
  if (s.rotate) coords = coords * random_orthonormal(static_cast<int>(d), derive_seed(s.seed, 1)).transpose();
  coords.array() += s.offset;
  return coords;
}

Matrix sample_matrix(const DistSpec& s, Eigen::Index n) {
  s.validate();
  if (n < 0) throw InvalidArgument("sample: n must be >= 0");
  SplitMix64 rng(s.seed);
  switch (s.kind) {
    case DistKind::gauss_ball: return sample_gauss_ball(s, n, rng);
    case DistKind::gauss_mixture: return sample_mixture(s, n, rng);
    case DistKind::student_t: return sample_student_t(s, n, rng);
    case DistKind::gen_gaussian: return sample_gen_gaussian(s, n, rng);
    case DistKind::sierpinski: return sample_sierpinski(s, n, rng);
    case DistKind::swiss_roll: return sample_swiss_roll(n, s.noise, rng);
    case DistKind::embedded: return sample_embedded(s, n, rng);
  }
  return {};
}

std::string_view trim(std::string_view s) {
  while (!s.empty() && (s.front() == ' ' || s.front() == '\t')) s.remove_prefix(1);
  while (!s.empty() && (s.back() == ' ' || s.back() == '\t' || s.back() == '\r')) s.remove_suffix(1);
  return s;
}

std::vector<std::string_view> split_fields(std::string_view line) {
  std::vector<std::string_view> out;
  std::size_t pos = 0;
  while (true) {
    const std::size_t comma = line.find(',', pos);
    out.push_back(trim(line.substr(pos, comma == std::string_view::npos ? std::string_view::npos : comma - pos)));
    if (comma == std::string_view::npos) break;
    pos = comma + 1;
  }
  return out;
}

}  // namespace

std::string_view to_string(DistKind k) noexcept {
  return kKindNames[static_cast<std::size_t>(k)];
}

DistKind dist_kind_from_string(std::string_view s) {
  for (std::size_t i = 0; i < kKindNames.size(); ++i)
    if (kKindNames[i] == s) return static_cast<DistKind>(i);
  throw InvalidArgument("unknown distribution kind '" + std::string(s) + "'");
}

int DistSpec::dimension() const {
  switch (kind) {
    case DistKind::gauss_mixture: return centers.empty() ? 0 : static_cast<int>(centers.front().size());
    case DistKind::sierpinski:
    case DistKind::swiss_roll: return 2;
    case DistKind::embedded: return ambient_dim;
    default: return center.size() ? static_cast<int>(center.size()) : dim;
  }
}

void DistSpec::validate() const {
  if (!(scale > 0.0) && kind != DistKind::sierpinski && kind != DistKind::swiss_roll && kind != DistKind::embedded)
    throw InvalidArgument("distribution: scale must be > 0");
  switch (kind) {
    case DistKind::gauss_ball:
    case DistKind::student_t:
    case DistKind::gen_gaussian:
      if (center.size() == 0 && dim < 1) throw InvalidArgument("distribution: dimension must be >= 1");
      if (kind == DistKind::student_t && !(df > 0.0)) throw InvalidArgument("student_t: df must be > 0");
      if (kind == DistKind::gen_gaussian && !(beta > 0.0)) throw InvalidArgument("gen_gaussian: beta must be > 0");
      break;
    case DistKind::gauss_mixture: {
      if (centers.empty()) throw InvalidArgument("gauss_mixture: no centers");
      for (const auto& c : centers)
        if (c.size() != centers.front().size() || c.size() == 0)
          throw InvalidArgument("gauss_mixture: centers must share a positive dimension");
      if (!weights.empty()) {
        if (weights.size() != centers.size()) throw InvalidArgument("gauss_mixture: weights/centers size mismatch");
        double total = 0.0;
        for (double w : weights) {
          if (!(w >= 0.0)) throw InvalidArgument("gauss_mixture: negative weight");
          total += w;
        }
        if (std::abs(total - 1.0) > 1e-9) throw InvalidArgument("gauss_mixture: weights must sum to 1");
      }
      break;
    }
    case DistKind::sierpinski:
      if (level < 1) throw InvalidArgument("sierpinski: level must be >= 1");
      if (level > 8) throw InvalidArgument("sierpinski: level must be <= 8");
      if (!(box.hi > box.lo)) throw InvalidArgument("sierpinski: empty bounding box");
      break;
    case DistKind::swiss_roll:
      if (noise < 0.0) throw InvalidArgument("swiss_roll: noise must be >= 0");
      break;
    case DistKind::embedded:
      if (!inner) throw InvalidArgument("embedded: missing inner distribution");
      inner->validate();
      if (ambient_dim < inner->dimension()) throw InvalidArgument("embedded: ambient dimension below inner dimension");
      if (ortho_sigma < 0.0) throw InvalidArgument("embedded: ortho_sigma must be >= 0");
      break;
  }
}

DistSpec DistSpec::gauss_ball(Vector c, double sigma, std::uint64_t seed) {
  DistSpec s;
  s.kind = DistKind::gauss_ball;
  s.dim = static_cast<int>(c.size());
  s.center = std::move(c);
  s.scale = sigma;
  s.seed = seed;
  return s;
}

DistSpec DistSpec::gauss_mixture(std::vector<Vector> cs, double sigma, std::uint64_t seed) {
  DistSpec s;
  s.kind = DistKind::gauss_mixture;
  s.centers = std::move(cs);
  s.scale = sigma;
  s.seed = seed;
  return s;
}

DistSpec DistSpec::student_t(Vector c, double df, double scale, std::uint64_t seed) {
  DistSpec s = gauss_ball(std::move(c), scale, seed);
  s.kind = DistKind::student_t;
  s.df = df;
  return s;
}

DistSpec DistSpec::gen_gaussian(Vector c, double beta, double scale, std::uint64_t seed) {
  DistSpec s = gauss_ball(std::move(c), scale, seed);
  s.kind = DistKind::gen_gaussian;
  s.beta = beta;
  return s;
}

DistSpec DistSpec::sierpinski(int level, Box box, std::uint64_t seed) {
  DistSpec s;
  s.kind = DistKind::sierpinski;
  s.level = level;
  s.box = box;
  s.seed = seed;
  return s;
}

DistSpec DistSpec::swiss_roll(double noise, std::uint64_t seed) {
  DistSpec s;
  s.kind = DistKind::swiss_roll;
  s.noise = noise;
  s.seed = seed;
  return s;
}

DistSpec DistSpec::embedded(DistSpec inner, int ambient_dim, double offset, double ortho_sigma,
                            bool rotate, std::uint64_t seed) {
  DistSpec s;
  s.kind = DistKind::embedded;
  s.inner = std::make_shared<DistSpec>(std::move(inner));
  s.ambient_dim = ambient_dim;
  s.offset = offset;
  s.ortho_sigma = ortho_sigma;
  s.rotate = rotate;
  s.seed = seed;
  return s;
}

ParticleSet sample(const DistSpec& spec, Eigen::Index n) {
  ParticleSet p;
  p.positions = sample_matrix(spec, n);
  p.seed = spec.seed;
  return p;
}

ParticleSet sierpinski_targets(int level, const Box& box, std::uint64_t seed) {
  ParticleSet p = sample(DistSpec::sierpinski(level, box, seed), ipow(8, level));
  p.role = Role::target;
  return p;
}

bool in_carpet_hole(double x, double y, int level, const Box& box) {
  const double w = box.hi - box.lo;
  double u = (x - box.lo) / w;
  double v = (y - box.lo) / w;
  if (!(u >= 0.0 && u < 1.0 && v >= 0.0 && v < 1.0)) return false;
  for (int p = 0; p < level; ++p) {
    u *= 3.0;
    v *= 3.0;
    const double du = std::floor(u);
    const double dv = std::floor(v);
    if (du == 1.0 && dv == 1.0) return true;
    u -= du;
    v -= dv;
  }
  return false;
}

ParticleSet swiss_roll(Eigen::Index n, double noise, std::uint64_t seed) {
  return sample(DistSpec::swiss_roll(noise, seed), n);
}

Matrix random_orthonormal(int d, std::uint64_t seed) {
  if (d < 1) throw InvalidArgument("random_orthonormal: d must be >= 1");
  SplitMix64 rng(seed);
  std::normal_distribution<double> normal(0.0, 1.0);
  Matrix g(d, d);
  for (int j = 0; j < d; ++j)
    for (int i = 0; i < d; ++i) g(i, j) = normal(rng);
  Eigen::HouseholderQR<Matrix> qr(g);
  Matrix q = qr.householderQ() * Matrix::Identity(d, d);
  const Matrix r = qr.matrixQR().triangularView<Eigen::Upper>();
  for (int j = 0; j < d; ++j)
    if (r(j, j) < 0.0) q.col(j) = -q.col(j);
  return q;
}

void save_csv(const ParticleSet& particles, const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot open '" + path.string() + "' for writing");
  const Matrix& x = particles.positions;
  std::string line;
  for (Eigen::Index k = 0; k < x.cols(); ++k) {
    if (k) line += ',';
    line += "x_" + std::to_string(k);
  }
  out << line << '\n';
  char buf[64];
  for (Eigen::Index i = 0; i < x.rows(); ++i) {
    line.clear();
    for (Eigen::Index k = 0; k < x.cols(); ++k) {
      if (k) line += ',';
      const auto res = std::to_chars(buf, buf + sizeof buf, x(i, k), std::chars_format::general, 17);
      line.append(buf, res.ptr);
    }
    out << line << '\n';
  }
  if (!out) throw IoError("write failed for '" + path.string() + "'");
}

ParticleSet load_csv(const std::filesystem::path& path, bool has_header) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open '" + path.string() + "'");
  std::vector<double> values;
  Eigen::Index cols = -1;
  Eigen::Index rows = 0;
  std::string line;
  long line_no = 0;
  bool header_seen = !has_header;
  while (std::getline(in, line)) {
    ++line_no;
    const std::string_view view = trim(line);
    if (view.empty()) continue;
    const auto fields = split_fields(view);
    if (!header_seen) {
      header_seen = true;
      cols = static_cast<Eigen::Index>(fields.size());
      continue;
    }
    if (cols >= 0 && static_cast<Eigen::Index>(fields.size()) != cols)
      throw IoError(path.string() + ": row " + std::to_string(line_no) + " has " + std::to_string(fields.size()) +
                    " columns, expected " + std::to_string(cols));
    cols = static_cast<Eigen::Index>(fields.size());
    for (const auto f : fields) {
      double v = 0.0;
      const auto res = std::from_chars(f.data(), f.data() + f.size(), v);
      if (res.ec != std::errc() || res.ptr != f.data() + f.size())
        throw IoError(path.string() + ": row " + std::to_string(line_no) + ": cannot parse '" + std::string(f) + "'");
      values.push_back(v);
    }
    ++rows;
  }
  if (cols < 0) throw IoError(path.string() + ": empty file");
  ParticleSet p;
  p.positions = Eigen::Map<const Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>>(
      values.data(), rows, cols);
  return p;
}

}  // namespace lipflow::datasets
