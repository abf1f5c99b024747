#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <numbers>
#include <set>

#include <Eigen/SVD>

#include "lipflow/datasets.hpp"

using namespace lipflow;
using namespace lipflow::datasets;

namespace {

std::filesystem::path temp_file(const std::string& name) {
  const auto dir = std::filesystem::temp_directory_path() / "lipflow_unit";
  std::filesystem::create_directories(dir);
  return dir / name;
}

Vector vec2(double a, double b) {
  Vector v(2);
  v << a, b;
  return v;
}

}  // namespace

TEST_CASE("gaussian ball moments") {
  const auto p = sample(DistSpec::gauss_ball(vec2(10, 10), 0.5, 1), 10000);
  const Vector mean = p.positions.colwise().mean();
  CHECK((mean - vec2(10, 10)).norm() < 0.02);
  for (int c = 0; c < 2; ++c) {
    const double sd = std::sqrt((p.positions.col(c).array() - mean(c)).square().mean());
    CHECK(std::abs(sd - 0.5) < 0.03 * 0.5);
  }
}

TEST_CASE("student-t median and tails") {
  auto spec = DistSpec::student_t(Vector::Zero(1), 3.0, 1.0, 2);
  const auto p = sample(spec, 100000);
  std::vector<double> v(p.positions.data(), p.positions.data() + p.positions.size());
  std::nth_element(v.begin(), v.begin() + v.size() / 2, v.end());
  CHECK(std::abs(v[v.size() / 2]) < 0.02);
  const auto x = p.positions.col(0).array();
  const double m2 = x.square().mean();
  const double m4 = x.square().square().mean();
  CHECK(std::isfinite(m4 / (m2 * m2)));
  CHECK(m4 / (m2 * m2) > 3.0);
}

TEST_CASE("generalized gaussian is heavier than gaussian for beta < 2") {
  const auto p = sample(DistSpec::gen_gaussian(Vector::Zero(1), 0.5, 1.0, 3), 50000);
  const auto x = p.positions.col(0).array();
  const double m2 = x.square().mean();
  const double m4 = x.square().square().mean();
  CHECK(m4 / (m2 * m2) > 3.0);
}

TEST_CASE("mixture puts mass near every center") {
  std::vector<Vector> centers{vec2(4, 4), vec2(-4, 4), vec2(-4, -4), vec2(4, -4)};
  const auto p = sample(DistSpec::gauss_mixture(centers, 0.5, 4), 4000);
  std::vector<int> counts(4, 0);
  for (Eigen::Index i = 0; i < p.size(); ++i)
    for (int k = 0; k < 4; ++k)
      if ((p.positions.row(i).transpose() - centers[k]).norm() < 1.5) ++counts[k];
  for (int c : counts) CHECK(std::abs(c / 4000.0 - 0.25) < 0.03);
}

TEST_CASE("sierpinski carpet construction") {
  const Box box{0.0, 10.0};
  const auto l1 = sierpinski_targets(1, box, 5);
  CHECK(l1.size() == 8);
  for (Eigen::Index i = 0; i < l1.size(); ++i) {
    const double x = l1.positions(i, 0), y = l1.positions(i, 1);
    CHECK_FALSE((x > 10.0 / 3 && x < 20.0 / 3 && y > 10.0 / 3 && y < 20.0 / 3));
  }
  const auto l4 = sierpinski_targets(4, box, 6);
  CHECK(l4.size() == 4096);
  const double width = 10.0 / 81.0;
  std::set<std::pair<long, long>> cells;
  for (Eigen::Index i = 0; i < l4.size(); ++i) {
    const double x = l4.positions(i, 0), y = l4.positions(i, 1);
    CHECK_FALSE(in_carpet_hole(x, y, 4, box));
    cells.emplace(static_cast<long>(std::floor(x / width)), static_cast<long>(std::floor(y / width)));
  }
  CHECK(cells.size() == 4096);
  CHECK(in_carpet_hole(5.0, 5.0, 1, box));
  CHECK_FALSE(in_carpet_hole(1.0, 1.0, 1, box));
  CHECK(in_carpet_hole(1.6, 1.6, 2, box));
  CHECK_FALSE(in_carpet_hole(1.6, 1.6, 1, box));
  CHECK_FALSE(in_carpet_hole(0.5, 0.5, 2, box));
}

TEST_CASE("swiss roll lies on its spiral") {
  const auto p = swiss_roll(200, 0.0, 7);
  CHECK(p.size() == 200);
  for (Eigen::Index i = 0; i < p.size(); ++i) {
    const double r = p.positions.row(i).norm();
    const double s = (r - 1.0) / 3.0;
    REQUIRE(s >= -1e-12);
    REQUIRE(s <= 1.0 + 1e-12);
    const double theta = 3.0 * std::numbers::pi * s;
    CHECK(std::abs(p.positions(i, 0) - r * std::cos(theta)) < 1e-9);
    CHECK(std::abs(p.positions(i, 1) - r * std::sin(theta)) < 1e-9);
  }
}

TEST_CASE("embedded mixture in 12 dimensions") {
  std::vector<Vector> centers{vec2(4, 4), vec2(-4, 4), vec2(-4, -4), vec2(4, -4)};
  const auto spec = DistSpec::embedded(DistSpec::gauss_mixture(centers, 0.5, 8), 12, 8.0, 0.5, false, 9);
  CHECK(spec.dimension() == 12);
  const auto p = sample(spec, 20000);
  for (int c = 2; c < 12; ++c) {
    const double mean = p.positions.col(c).mean();
    const double var = (p.positions.col(c).array() - mean).square().mean();
    CHECK(std::abs(mean - 8.0) < 0.02);
    CHECK(std::abs(var - 0.25) < 0.02);
  }

  // Exact 5-dim subspace of R^50 after a rotation: rank 5 after centering.
  const auto sub = DistSpec::embedded(DistSpec::gauss_ball(Vector::Zero(5), 1.0, 10), 50, 0.0, 0.0, true, 11);
  const auto q = sample(sub, 300);
  const Matrix centered = q.positions.rowwise() - q.positions.colwise().mean();
  Eigen::JacobiSVD<Matrix> svd(centered);
  const Vector s = svd.singularValues();
  CHECK(s(4) > 1.0);
  CHECK(s(5) < 1e-10 * s(0));
}

TEST_CASE("random orthonormal frames") {
  const Matrix q = random_orthonormal(7, 3);
  CHECK((q.transpose() * q - Matrix::Identity(7, 7)).norm() < 1e-12);
  CHECK(random_orthonormal(7, 3) == q);
}

TEST_CASE("sampling is deterministic in the seed") {
  const auto a = sample(DistSpec::swiss_roll(0.1, 1), 50);
  const auto b = sample(DistSpec::swiss_roll(0.1, 1), 50);
  const auto c = sample(DistSpec::swiss_roll(0.1, 2), 50);
  CHECK(a.positions == b.positions);
  CHECK(a.positions != c.positions);
}

TEST_CASE("spec validation") {
  auto bad = DistSpec::gauss_ball(vec2(0, 0), -1.0, 0);
  CHECK_THROWS_AS(bad.validate(), InvalidArgument);
  auto t = DistSpec::student_t(vec2(0, 0), 0.0, 1.0, 0);
  CHECK_THROWS_AS(t.validate(), InvalidArgument);
  CHECK_THROWS_AS(dist_kind_from_string("uniform"), InvalidArgument);
  CHECK(dist_kind_from_string("swiss_roll") == DistKind::swiss_roll);
}

TEST_CASE("csv round trip and errors") {
  const auto p = sample(DistSpec::student_t(vec2(1, -2), 0.5, 1.0, 12), 100);
  const auto path = temp_file("roundtrip.csv");
  save_csv(p, path);
  const auto back = load_csv(path);
  CHECK(back.positions == p.positions);

  ParticleSet empty;
  empty.positions = Matrix(0, 3);
  save_csv(empty, temp_file("empty_rows.csv"));
  const auto e = load_csv(temp_file("empty_rows.csv"));
  CHECK(e.size() == 0);
  CHECK(e.dim() == 3);

  { std::ofstream(temp_file("blank.csv")); }
  CHECK_THROWS_AS(load_csv(temp_file("blank.csv")), IoError);

  {
    std::ofstream out(temp_file("ragged.csv"));
    out << "x_0,x_1\n1,2\n3,4\n5\n";
  }
  try {
    load_csv(temp_file("ragged.csv"));
    FAIL("expected an error");
  } catch (const IoError& err) {
    CHECK(std::string(err.what()).find("row 4") != std::string::npos);
  }
  CHECK_THROWS_AS(load_csv(temp_file("does_not_exist.csv")), IoError);
}
