#pragma once

#include <Eigen/Dense>
#include <limits>
#include <optional>
#include <utility>
#include <vector>

#include "stattest/errors.hpp"

// Small dense numerical kernels: rank with tolerance, a bounded-variable
// linear program solver, strict-inequality feasibility, box-constrained
// least squares (distance to a translated zonotope), and Euclidean
// projection onto a polyhedron. Problem sizes are a few hundred variables
// at most; everything is dense and deterministic.

namespace stattest::numkit {

inline constexpr double kInf = std::numeric_limits<double>::infinity();

/// Plain ascending-index dot product. Sign and tie decisions throughout the
/// library go through this single summation order, so a value snapped to
/// exact zero stays zero wherever it is re-evaluated.
inline double dot_ascending(const Eigen::VectorXd& a, const Eigen::VectorXd& b) {
  double s = 0.0;
  for (Eigen::Index i = 0; i < a.size(); ++i) s += a(i) * b(i);
  return s;
}

struct SolverOptions {
  double qp_tol = 1e-9;        // KKT residual target for the QP kernels
  double feas_tol = 1e-8;      // phase-1 feasibility threshold
  double margin_tol = 1e-7;    // strict-inequality margin
  double rank_rel_tol = 1e-9;  // default relative tolerance for rank decisions
  int max_iter = 5000;
};

enum class SolveStatus { optimal, infeasible, max_iter };

struct SolveReport {
  SolveStatus status = SolveStatus::optimal;
  double kkt_residual = 0.0;
  int iterations = 0;
};

/// Translated zonotope {base + sum_j xi_j * generators[j] : xi in [0,1]^n}.
struct SegmentSumSet {
  Eigen::VectorXd base;
  std::vector<Eigen::VectorXd> generators;

  int dim() const { return static_cast<int>(base.size()); }
  Eigen::VectorXd point_at(const Eigen::VectorXd& xi) const;
};

/// Linear constraints a^T z >= b, a^T z <= b, a^T z = b.
struct PolyhedronSpec {
  std::vector<std::pair<Eigen::VectorXd, double>> ge_rows;
  std::vector<std::pair<Eigen::VectorXd, double>> le_rows;
  std::vector<std::pair<Eigen::VectorXd, double>> eq_rows;

  int dim() const;
  /// Every constraint holds at z (non-strict, exact comparisons).
  bool contains(const Eigen::VectorXd& z) const;
  /// Largest violation of any constraint at z (0 when feasible).
  double violation(const Eigen::VectorXd& z) const;
};

/// Number of singular values exceeding rel_tol * sigma_max; 0 for empty or
/// all-zero input.
int rank_with_tolerance(const Eigen::MatrixXd& m, double rel_tol);

// ---------------------------------------------------------------------------
// Linear programming (dense two-phase simplex).

struct LpRow {
  Eigen::VectorXd a;
  double lo = -kInf;
  double hi = kInf;
};

/// minimize cost^T x  s.t.  lo_r <= a_r^T x <= hi_r,  var_lo <= x <= var_hi.
struct LpProblem {
  Eigen::VectorXd cost;
  std::vector<LpRow> rows;
  Eigen::VectorXd var_lo, var_hi;  // may be +-inf componentwise

  static LpProblem with_free_vars(int n);
};

enum class LpStatus { optimal, infeasible, unbounded, max_iter };

struct LpSolution {
  LpStatus status = LpStatus::max_iter;
  Eigen::VectorXd x;
  double objective = 0.0;
  int iterations = 0;
};

LpSolution solve_lp(const LpProblem& p, const SolverOptions& opt = {});

// ---------------------------------------------------------------------------
// Strict linear feasibility (existence of d with a^T d > 0 / < 0 rows plus
// homogeneous equalities), decided by maximizing a margin slack over the
// unit box. Feasible iff the maximal margin exceeds margin_tol.

struct StrictRow {
  Eigen::VectorXd a;
  bool greater = true;  // a^T d > 0 when true, a^T d < 0 otherwise
};

struct StrictFeasibility {
  bool feasible = false;
  std::optional<Eigen::VectorXd> witness;
  double margin = 0.0;  // achieved margin, recomputed from the witness
  SolveReport report;
};

StrictFeasibility lp_strict_feasible(const std::vector<StrictRow>& strict_rows,
                                     const std::vector<Eigen::VectorXd>& eq_rows,
                                     const SolverOptions& opt = {});

// ---------------------------------------------------------------------------
// Distance from the origin to a SegmentSumSet, i.e.
//   min_{xi in [0,1]^n} || base + P xi ||,
// solved by a bounded-variable active-set least-squares method.

struct BoxLsResult {
  double distance = 0.0;
  Eigen::VectorXd minimizer;  // xi in [0,1]^n
  SolveReport report;
};

BoxLsResult box_ls_distance(const SegmentSumSet& s, const SolverOptions& opt = {});

/// Same solver started from a caller-supplied xi (used for independent
/// cross-runs in tests).
BoxLsResult box_ls_distance(const SegmentSumSet& s, const Eigen::VectorXd& xi0,
                            const SolverOptions& opt = {});

// ---------------------------------------------------------------------------
// Euclidean projection of w onto a polyhedron, primal active-set method with
// an LP phase 1. status == infeasible when the phase-1 margin drops below
// -feas_tol.

struct ProjectionResult {
  SolveStatus status = SolveStatus::optimal;
  Eigen::VectorXd point;
  double phase1_margin = 0.0;  // 0 when w itself was feasible
  SolveReport report;
};

ProjectionResult project_polyhedron(const Eigen::VectorXd& w, const PolyhedronSpec& spec,
                                    const SolverOptions& opt = {});

}  // namespace stattest::numkit
