#pragma once

#include <Eigen/Dense>
#include <cstdint>
#include <iosfwd>
#include <vector>

#include "stattest/numkit.hpp"

// Executable hardness constructions: the 3SAT -> piecewise-linear-test
// reduction, evaluation and stationarity checking of the reduced function
//   f(d) = max_i -sum_{j<3} max(d^T y_{3i+j}, 0),
// the shallow-network wrapper sharing its directional derivative, the
// abs-normal encoding of f, and the first-order minimality test on that
// encoding. Everything here is exponential-time by design and guarded.

namespace stattest::hardness {

struct Cnf3 {
  int num_vars = 0;
  std::vector<std::vector<int>> clauses;  // signed 1-based variable indexes

  int clause_count() const { return static_cast<int>(clauses.size()); }
  void validate() const;  // 1..3 literals per clause, indexes within range
};

/// Groups of three integer vectors per clause; reduction instances use
/// signed unit vectors only.
struct PltInstance {
  int dim = 0;  // m
  std::vector<Eigen::VectorXi> vectors;

  int clause_count() const { return static_cast<int>(vectors.size()) / 3; }
  bool is_reduction_form() const;  // every vector is +-e_k
  void validate() const;
};

/// Abs-linear data (a, b, Z, L) of a piecewise linear function with
/// switching variables z = Z x + L |z| and value y = a^T x + b^T |z|;
/// L is strictly lower triangular (switches in evaluation order).
struct AbsNormalForm {
  Eigen::VectorXd a;
  Eigen::VectorXd b;
  Eigen::MatrixXd Z;
  Eigen::MatrixXd L;

  int switches() const { return static_cast<int>(b.size()); }
  int inputs() const { return static_cast<int>(a.size()); }
  void validate() const;
};

/// DIMACS CNF ("p cnf <vars> <clauses>", 0-terminated clauses, 'c' comment
/// lines). Clauses with more than three literals are rejected.
Cnf3 parse_dimacs(std::istream& in);

/// One +-e_k vector per literal position; clauses with fewer than three
/// literals are padded by repeating their last literal, which preserves the
/// satisfiability equivalence since repeated max terms only rescale the
/// clause sum.
PltInstance sat_to_plt(const Cnf3& cnf);

double eval_plt(const PltInstance& inst, const Eigen::VectorXd& d);

/// max_i sum_j u_{3i+j} * max(w^T y_{3i+j}, 0).
double eval_nnt(const PltInstance& inst, const Eigen::VectorXd& u, const Eigen::VectorXd& w);

enum class PltMode { exhaustive, certificate };

/// Decides whether the origin admits a regular subgradient of norm at most
/// epsilon. Since f <= 0 everywhere with f(0) = 0, only the zero vector can
/// qualify, so the verdict is that f is nonnegative everywhere and epsilon
/// does not affect it.
///  - exhaustive (reduction instances, dim <= 20): epsilon == 0 sweeps
///    d in {-1,+1}^dim, which the reduction makes sufficient; epsilon > 0
///    minimizes f per coordinate orthant by LP.
///  - certificate (3^n budget, n <= 12): one LP per clause-literal
///    selection seeking f <= -1; stationary iff all are infeasible.
bool plt_stationary(const PltInstance& inst, double epsilon, PltMode mode,
                    const numkit::SolverOptions& opt = {});

/// Exhaustive truth-table satisfiability, num_vars <= 20.
bool brute_sat(const Cnf3& cnf);

struct NntReport {
  int directions = 0;
  double max_abs_error = 0.0;
  uint64_t seed = 0;
};

/// Difference quotients of the network wrapper at (-1, 0) along random
/// directions against the reduced function's value at the weight part.
NntReport nnt_directional_check(const PltInstance& inst, int n_directions, uint64_t seed);

/// Abs-normal encoding with 3n ReLU switches plus n-1 cascaded max
/// switches; all coefficients are dyadic, so the encoding is exact.
AbsNormalForm plt_to_abs_normal(const PltInstance& inst);

/// Forward evaluation of the abs-linear data (validation helper).
double eval_abs_linear(const AbsNormalForm& anf, const Eigen::VectorXd& x);

/// First-order minimality refutation: true iff some signature sigma in
/// {-1,1}^s makes the multiplier system
///   a^T + (b - mu)^T (Diag(sigma) - L)^{-1} Z = 0,  mu >= 0
/// infeasible. False exactly when the origin is a regular stationary point
/// of the encoded function. Guarded by switches() <= 16.
bool anft_check(const AbsNormalForm& anf, const numkit::SolverOptions& opt = {});

}  // namespace stattest::hardness
