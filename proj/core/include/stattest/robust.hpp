#pragma once

#include <optional>
#include <vector>

#include "stattest/exact.hpp"

// Near-approximate stationarity testing: per-unit neural rounding onto the
// tie polyhedron, the general robust test with its distance guard, a
// halving line search over the rounding radius, and the explicit constant
// bundle (curvature / separation) used to state the certified bounds.

namespace stattest::robust {

struct ConstantSet {
  double c1 = 0.0, c2 = 0.0, c3 = 0.0, c4 = 0.0, c5 = 0.0;
  double c_mu = 0.0;  // c4 + c5
};

struct ConstantBundle {
  double radius = 0.0;         // R = max ||x_i||
  double norm_bound = 0.0;     // B
  double loss_value_lip = 0.0; // L of the loss value
  double loss_grad_lip = 0.0;  // L of the loss derivative
  ConstantSet clarke;   // c1 = 3*L'*N*H*B*R, c2 = B*R*c1, c3 = 2*L'*N*R,
                        // c4 = H*(c2+c3), c5 = H*(B*R*c1 + N*R*L')
  ConstantSet frechet;  // same template with c1 = 4*L'*N*H*B*R and
                        // c5 = H*(B*R*c1 + 2*N*R*L')
  double c_u = 0.0;     // L' * (4*H*R*B^2 + 1)
  // separation constants, present when a reference point was supplied
  std::optional<double> c_tau_clarke;
  std::optional<double> c_tau_frechet;             // conservative (4*c_u denominator)
  std::optional<double> c_tau_frechet_definition;  // c_u denominator variant
};

/// Curvature constants for a network of the given width whose norm stays
/// below norm_bound. When a reference point is supplied its separation
/// constants are filled in as well.
ConstantBundle constants(const model::Dataset& data, const model::LossModel& loss,
                         double norm_bound, int width,
                         const std::optional<model::Network>& reference = std::nullopt);

struct SeparationConstants {
  double c_tau_clarke = 0.0;
  double c_tau_frechet = 0.0;             // min of the dot term and tau'/(4 c_u)
  double c_tau_frechet_definition = 0.0;  // min of the dot term and tau'/c_u
};

/// Separation of the activation pattern around a reference point; +inf terms
/// when the defining sets are empty.
SeparationConstants separation(const model::Network& reference, const model::Dataset& data,
                               const model::LossModel& loss);

struct RoundingResult {
  bool feasible = true;
  model::Network net;
  /// Tie rows per unit (the samples pinned to w_k^T x = 0 by the rounding).
  std::vector<std::vector<int>> ties;
  /// All pinned dots evaluate to exactly zero after snapping, so the exact
  /// test sees the intended kinks.
  bool ties_exact = true;
};

/// Per-unit projection of w_k onto {z : z^T x_i >= 2R*delta on clear
/// positives, <= -2R*delta on clear negatives, = 0 on near-ties}, with
/// thresholds R*delta on the input dots. Outer weights pass through.
RoundingResult rnd_clarke(const model::Network& net, double delta, const model::Dataset& data,
                          const numkit::SolverOptions& opt = {});

/// Clarke rounding followed by the outer-weight rule: a unit whose rounded
/// weight has ties and whose smallest u*rho over them (rho at the input
/// point) is at most 2*c_u*delta gets u zeroed; min over no ties is +inf.
RoundingResult rnd_frechet(const model::Network& net, double delta, const model::Dataset& data,
                           const model::LossModel& loss, const numkit::SolverOptions& opt = {});

struct RobustResult {
  enum class Status { infinite, not_sq, value };
  enum class InfiniteReason { none, rounding_infeasible, moved_too_far, frechet_empty };
  Status status = Status::infinite;
  InfiniteReason reason = InfiniteReason::none;
  double epsilon = 0.0;
  std::vector<exact::ExactTestResult::UnitBreakdown> units;
  std::optional<model::Network> rounded;
  double distance_moved = 0.0;
  std::optional<Eigen::VectorXd> minimizer;

  bool is_value() const { return status == Status::value; }
};

/// Round with the kind's rounder; infinite when rounding is infeasible or
/// the rounded point moved farther than delta; otherwise the exact test at
/// the rounded point. A finite value v certifies the (v, delta) NAS of the
/// input point constructively.
RobustResult rtest(exact::TestKind kind, const model::Network& net, double delta,
                   const model::Dataset& data, const model::LossModel& loss,
                   const numkit::SolverOptions& opt = {});

struct LineSearchStep {
  double delta = 0.0;
  RobustResult result;
  bool rounding_identity = false;
};

struct LineSearchTrace {
  std::vector<LineSearchStep> steps;
  /// Best finite certificate as (epsilon, delta), smallest epsilon first.
  std::optional<std::pair<double, double>> best;
  int first_identity_step = -1;
};

/// Runs rtest at delta0, delta0/2, ...; stops after the first radius below
/// min nonzero |x_i^T w_k| / (2R) (rounding is the identity from there on)
/// or after max_iters steps.
LineSearchTrace line_search(exact::TestKind kind, const model::Network& net,
                            const model::Dataset& data, const model::LossModel& loss,
                            double delta0, int max_iters,
                            const numkit::SolverOptions& opt = {});

/// Forces the listed dot products to evaluate to exactly zero by nudging one
/// weight coordinate per row (last nonzero data coordinate, ulp search).
/// Returns false when some row could not be zeroed exactly. Exposed for
/// tests.
bool snap_ties(Eigen::VectorXd& w, const std::vector<Eigen::VectorXd>& tie_rows);

}  // namespace stattest::robust
