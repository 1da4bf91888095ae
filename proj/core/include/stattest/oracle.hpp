#pragma once

#include <cstdint>
#include <utility>
#include <vector>

#include "stattest/model.hpp"
#include "stattest/numkit.hpp"

// Brute-force ground truth at desk scale, independent of the chain-rule
// constructions: enumerate the sign cells of the tie-hyperplane arrangement,
// collect the limiting gradient of each cell, measure the distance from the
// origin to their convex hull, and certify or refute membership of a vector
// in the regular subdifferential via per-cell linear programs.

namespace stattest::oracle {

/// One realizable strict sign assignment over the tied (unit, sample) pairs,
/// together with a packed parameter-space direction realizing it.
struct CellSign {
  std::vector<std::pair<int, int>> ties;  // (unit, sample), sorted
  std::vector<int8_t> signs;              // +1 / -1 per tie
  Eigen::VectorXd witness;
};

/// All sign vectors realizable by some direction, found by strict
/// feasibility LPs with prefix pruning. Guarded by the total tie count
/// (guard_error beyond max_ties). No ties yields the single empty cell.
std::vector<CellSign> enumerate_cells(const model::Network& net, const model::Dataset& data,
                                      const model::LossModel& loss,
                                      const numkit::SolverOptions& opt = {}, int max_ties = 20);

/// Gradient of the empirical loss on the given cell: a tied activation
/// counts as active exactly when its cell sign is positive.
Eigen::VectorXd cell_gradient(const model::Network& net, const model::Dataset& data,
                              const model::LossModel& loss, const CellSign& cell);

/// dist(0, Conv{cell gradients}).
double clarke_oracle_distance(const model::Network& net, const model::Dataset& data,
                              const model::LossModel& loss,
                              const numkit::SolverOptions& opt = {}, int max_ties = 20);

/// True iff g^T d <= L'(x; d) for every direction, checked cell by cell:
/// on each closed cell cone the directional derivative is linear with the
/// cell gradient as coefficient, so one LP per cell over the cone
/// intersected with the unit box decides the inequality up to margin_tol.
bool frechet_oracle_check(const Eigen::VectorXd& g, const model::Network& net,
                          const model::Dataset& data, const model::LossModel& loss,
                          const numkit::SolverOptions& opt = {}, int max_ties = 20);

struct FiniteDifferenceReport {
  int directions = 0;
  double max_rel_error = 0.0;
  uint64_t seed = 0;
};

/// Compares the analytic directional derivative against forward difference
/// quotients along seeded random unit directions.
FiniteDifferenceReport finite_difference_report(const model::Network& net,
                                                const model::Dataset& data,
                                                const model::LossModel& loss, int n_directions,
                                                uint64_t seed);

struct HullDistanceResult {
  double distance = 0.0;
  Eigen::VectorXd weights;  // convex weights over the input points
  numkit::SolveReport report;
};

/// min_{lambda in simplex} || points * lambda ||, solved by the min-norm-
/// point method with exact affine solves on the active face; warm-started
/// from the box least-squares kernel through lambda = xi / sum(xi).
HullDistanceResult hull_distance(const Eigen::MatrixXd& points,
                                 const numkit::SolverOptions& opt = {});

}  // namespace stattest::oracle
