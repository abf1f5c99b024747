#pragma once

#include <vector>

#include "lipflow/datasets.hpp"
#include "lipflow/particles.hpp"

namespace lipflow::metrics {

struct SinkhornConfig {
  double epsilon = -1.0;  // <= 0: 0.05 * median pairwise squared distance
  int max_iters = 2000;
  double tolerance = 1e-9;  // max marginal violation
  bool debiased = true;
};

struct SinkhornResult {
  double w2 = 0.0;          // sqrt of the (debiased) entropic cost
  double cost = 0.0;        // the cost itself, may be slightly negative before clamping
  double epsilon = 0.0;     // blur actually used
  int iterations = 0;       // largest count over the solves
  bool converged = true;    // false if any solve hit max_iters
};

/// Log-domain entropic OT with squared Euclidean cost and uniform weights.
/// Returns OT_eps(A,B) - (OT_eps(A,A) + OT_eps(B,B))/2 when debiased.
SinkhornResult sinkhorn(const Matrix& a, const Matrix& b, const SinkhornConfig& cfg = {});
double sinkhorn_w2(const Matrix& a, const Matrix& b, const SinkhornConfig& cfg = {});

/// Minimum-cost perfect matching (Hungarian algorithm) on a square cost matrix.
/// Returns assignment[row] = column.
std::vector<int> hungarian(const Matrix& cost);

/// Exact W1 between equal-size uniform empirical measures (at most 256 points).
double exact_w1_small(const Matrix& a, const Matrix& b);
/// Exact W2 between equal-size uniform empirical measures via assignment.
double exact_w2_small(const Matrix& a, const Matrix& b);

/// Fraction of particles within `radius` of each center (nearest center wins).
Vector mode_coverage(const Matrix& particles, const std::vector<Vector>& centers, double radius);

struct CarpetOccupancy {
  std::vector<long> counts;  // one per retained cell, row-major over the grid
  long outside = 0;          // outside the box
  long in_holes = 0;         // inside any removed square up to `level`
  long central_hole = 0;     // inside the level-1 middle square
  double max_deviation = 0.0;  // max |count - n/8^k| / (n/8^k)
  long empty_cells = 0;
};

CarpetOccupancy carpet_occupancy(const Matrix& particles, int level, const datasets::Box& box);

}  // namespace lipflow::metrics
