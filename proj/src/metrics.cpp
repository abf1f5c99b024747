#include "lipflow/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <string>

namespace lipflow::metrics {

namespace {

Matrix squared_distances(const Matrix& a, const Matrix& b) {
  const Vector an = a.rowwise().squaredNorm();
  const Vector bn = b.rowwise().squaredNorm();
  Matrix c = (-2.0 * a * b.transpose()).colwise() + an;
  c.rowwise() += bn.transpose();
  return c.cwiseMax(0.0);
}

double median_of(std::vector<double> v) {
  if (v.empty()) return 0.0;
  const auto mid = v.begin() + static_cast<std::ptrdiff_t>(v.size() / 2);
  std::nth_element(v.begin(), mid, v.end());
  return *mid;
}

// -eps * log sum_j w_j exp((h_j - c_j) / eps), stabilized.
double soft_min(const Eigen::Ref<const Vector>& h_minus_c, double log_w, double eps) {
  const double m = h_minus_c.maxCoeff();
  const double s = ((h_minus_c.array() - m) / eps).exp().sum();
  return -(m + eps * (std::log(s) + log_w));
}

struct Solve {
  double value = 0.0;
  int iterations = 0;
  bool converged = false;
};

// Entropic OT between uniform measures on the rows/columns of `c`, with
// epsilon annealed geometrically down to `eps`.
Solve entropic_ot(const Matrix& c, double eps, const SinkhornConfig& cfg) {
  const Eigen::Index n = c.rows();
  const Eigen::Index m = c.cols();
  const double log_a = -std::log(static_cast<double>(n));
  const double log_b = -std::log(static_cast<double>(m));
  Vector f = Vector::Zero(n);
  Vector g = Vector::Zero(m);
  const Matrix ct = c.transpose();
  Solve out;

  double cur = std::max(eps, c.maxCoeff());
  Vector tmp_m(m), tmp_n(n);
  auto sweep = [&](double e) {
    for (Eigen::Index i = 0; i < n; ++i) {
      tmp_m = g - ct.col(i);
      f(i) = soft_min(tmp_m, log_b, e);
    }
    for (Eigen::Index j = 0; j < m; ++j) {
      tmp_n = f - c.col(j);
      g(j) = soft_min(tmp_n, log_a, e);
    }
  };
  while (cur > eps) {
    sweep(cur);
    cur = std::max(eps, cur * 0.5);
  }
  for (int it = 1; it <= cfg.max_iters; ++it) {
    sweep(eps);
    out.iterations = it;
    if (it % 5 == 0 || it == cfg.max_iters) {
      // After the g update the column marginals are exact; check the rows.
      double violation = 0.0;
      const double a = std::exp(log_a);
      for (Eigen::Index i = 0; i < n; ++i) {
        tmp_m = (g - ct.col(i)).array() + f(i);
        const double row = a * std::exp(log_b) * (tmp_m.array() / eps).exp().sum();
        violation += std::abs(row - a);
      }
      if (violation < cfg.tolerance) {
        out.converged = true;
        break;
      }
    }
  }
  out.value = f.mean() + g.mean();
  return out;
}

}  // namespace

SinkhornResult sinkhorn(const Matrix& a, const Matrix& b, const SinkhornConfig& cfg) {
  if (a.rows() == 0 || b.rows() == 0) throw InvalidArgument("sinkhorn: empty point set");
  if (a.cols() != b.cols()) throw InvalidArgument("sinkhorn: dimension mismatch");
  if (cfg.max_iters < 1) throw InvalidArgument("sinkhorn: max_iters must be >= 1");
  const Matrix cab = squared_distances(a, b);
  SinkhornResult res;
  double eps = cfg.epsilon;
  if (!(eps > 0.0)) {
    const double med = median_of(std::vector<double>(cab.data(), cab.data() + cab.size()));
    eps = 0.05 * (med > 0.0 ? med : std::max(cab.maxCoeff(), 1.0));
  }
  res.epsilon = eps;
  const Solve ab = entropic_ot(cab, eps, cfg);
  res.iterations = ab.iterations;
  res.converged = ab.converged;
  res.cost = ab.value;
  if (cfg.debiased) {
    const Solve aa = entropic_ot(squared_distances(a, a), eps, cfg);
    const Solve bb = entropic_ot(squared_distances(b, b), eps, cfg);
    res.cost -= 0.5 * (aa.value + bb.value);
    res.iterations = std::max({res.iterations, aa.iterations, bb.iterations});
    res.converged = res.converged && aa.converged && bb.converged;
  }
  res.w2 = std::sqrt(std::max(0.0, res.cost));
  return res;
}

double sinkhorn_w2(const Matrix& a, const Matrix& b, const SinkhornConfig& cfg) {
  return sinkhorn(a, b, cfg).w2;
}

std::vector<int> hungarian(const Matrix& cost) {
  const int n = static_cast<int>(cost.rows());
  if (cost.cols() != n) throw InvalidArgument("hungarian: cost matrix must be square");
  if (n == 0) return {};
  constexpr double inf = std::numeric_limits<double>::infinity();
  // 1-based potentials; p[j] is the row matched to column j.
  std::vector<double> u(n + 1, 0.0), v(n + 1, 0.0), minv(n + 1);
  std::vector<int> p(n + 1, 0), way(n + 1, 0);
  std::vector<char> used(n + 1);
  for (int i = 1; i <= n; ++i) {
    p[0] = i;
    int j0 = 0;
    std::fill(minv.begin(), minv.end(), inf);
    std::fill(used.begin(), used.end(), 0);
    do {
      used[j0] = 1;
      const int i0 = p[j0];
      double delta = inf;
      int j1 = 0;
      for (int j = 1; j <= n; ++j) {
        if (used[j]) continue;
        const double cur = cost(i0 - 1, j - 1) - u[i0] - v[j];
        if (cur < minv[j]) {
          minv[j] = cur;
          way[j] = j0;
        }
        if (minv[j] < delta) {
          delta = minv[j];
          j1 = j;
        }
      }
      for (int j = 0; j <= n; ++j) {
        if (used[j]) {
          u[p[j]] += delta;
          v[j] -= delta;
        } else {
          minv[j] -= delta;
        }
      }
      j0 = j1;
    } while (p[j0] != 0);
    do {
      const int j1 = way[j0];
      p[j0] = p[j1];
      j0 = j1;
    } while (j0);
  }
  std::vector<int> assignment(n);
  for (int j = 1; j <= n; ++j) assignment[p[j] - 1] = j - 1;
  return assignment;
}

namespace {

void check_small(const Matrix& a, const Matrix& b, const char* who) {
  if (a.rows() != b.rows()) throw InvalidArgument(std::string(who) + ": point sets must have equal size");
  if (a.cols() != b.cols()) throw InvalidArgument(std::string(who) + ": dimension mismatch");
  if (a.rows() == 0) throw InvalidArgument(std::string(who) + ": empty point set");
  if (a.rows() > 256) throw InvalidArgument(std::string(who) + ": at most 256 points");
}

}  // namespace

double exact_w1_small(const Matrix& a, const Matrix& b) {
  check_small(a, b, "exact_w1_small");
  const Matrix c = squared_distances(a, b).cwiseSqrt();
  const auto match = hungarian(c);
  double total = 0.0;
  for (Eigen::Index i = 0; i < a.rows(); ++i) total += (a.row(i) - b.row(match[i])).norm();
  return total / static_cast<double>(a.rows());
}

double exact_w2_small(const Matrix& a, const Matrix& b) {
  check_small(a, b, "exact_w2_small");
  const Matrix c = squared_distances(a, b);
  const auto match = hungarian(c);
  double total = 0.0;
  for (Eigen::Index i = 0; i < a.rows(); ++i) total += (a.row(i) - b.row(match[i])).squaredNorm();
  return std::sqrt(total / static_cast<double>(a.rows()));
}

Vector mode_coverage(const Matrix& particles, const std::vector<Vector>& centers, double radius) {
  if (particles.rows() == 0) throw InvalidArgument("mode_coverage: empty particle set");
  if (centers.empty()) throw InvalidArgument("mode_coverage: no centers");
  Vector counts = Vector::Zero(static_cast<Eigen::Index>(centers.size()));
  for (Eigen::Index i = 0; i < particles.rows(); ++i) {
    std::size_t best = 0;
    double best_d = std::numeric_limits<double>::infinity();
    for (std::size_t c = 0; c < centers.size(); ++c) {
      if (centers[c].size() != particles.cols()) throw InvalidArgument("mode_coverage: dimension mismatch");
      const double d = (particles.row(i).transpose() - centers[c]).norm();
      if (d < best_d) {
        best_d = d;
        best = c;
      }
    }
    if (best_d <= radius) counts(static_cast<Eigen::Index>(best)) += 1.0;
  }
  return counts / static_cast<double>(particles.rows());
}

CarpetOccupancy carpet_occupancy(const Matrix& particles, int level, const datasets::Box& box) {
  if (level < 1 || level > 8) throw InvalidArgument("carpet_occupancy: level must be in [1, 8]");
  if (particles.cols() != 2) throw InvalidArgument("carpet_occupancy: particles must be 2D");
  if (!(box.hi > box.lo)) throw InvalidArgument("carpet_occupancy: empty box");
  long side = 1;
  for (int i = 0; i < level; ++i) side *= 3;
  std::vector<long> index(static_cast<std::size_t>(side * side), -1);
  long retained = 0;
  for (long i = 0; i < side; ++i)
    for (long j = 0; j < side; ++j) {
      long a = i, b = j;
      bool keep = true;
      while (a > 0 || b > 0) {
        if (a % 3 == 1 && b % 3 == 1) {
          keep = false;
          break;
        }
        a /= 3;
        b /= 3;
      }
      if (keep) index[static_cast<std::size_t>(i * side + j)] = retained++;
    }

  CarpetOccupancy occ;
  occ.counts.assign(static_cast<std::size_t>(retained), 0);
  const double w = box.hi - box.lo;
  for (Eigen::Index r = 0; r < particles.rows(); ++r) {
    const double u = (particles(r, 0) - box.lo) / w;
    const double v = (particles(r, 1) - box.lo) / w;
    if (!(u >= 0.0 && u < 1.0 && v >= 0.0 && v < 1.0)) {
      ++occ.outside;
      continue;
    }
    if (datasets::in_carpet_hole(particles(r, 0), particles(r, 1), 1, box)) ++occ.central_hole;
    const long i = std::min(side - 1, static_cast<long>(u * static_cast<double>(side)));
    const long j = std::min(side - 1, static_cast<long>(v * static_cast<double>(side)));
    const long idx = index[static_cast<std::size_t>(i * side + j)];
    if (idx < 0)
      ++occ.in_holes;
    else
      ++occ.counts[static_cast<std::size_t>(idx)];
  }
  const double expected = static_cast<double>(particles.rows()) / static_cast<double>(retained);
  for (long c : occ.counts) {
    if (c == 0) ++occ.empty_cells;
    if (expected > 0.0) occ.max_deviation = std::max(occ.max_deviation, std::abs(c - expected) / expected);
  }
  return occ;
}

}  // namespace lipflow::metrics
