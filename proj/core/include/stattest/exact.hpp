#pragma once

#include <optional>
#include <vector>

#include "stattest/chain.hpp"

// Exact stationarity measurement at a point: the distance from the origin
// to the product subdifferential, computed per unit as the u-component gap
// plus a box least-squares distance, valid exactly when the span
// qualification holds.

namespace stattest::exact {

enum class TestKind { clarke, frechet };

struct ExactTestResult {
  enum class Status { not_sq, value, infinite };
  Status status = Status::value;
  double epsilon = 0.0;  // meaningful when status == value
  struct UnitBreakdown {
    double u_gap = 0.0;   // |sum_i rho_i max(w_k^T x_i, 0)|
    double w_dist = 0.0;  // dist(0, unit set)
  };
  std::vector<UnitBreakdown> units;
  chain::SqReport sq;
  /// The packed subgradient achieving the distance (status == value only).
  std::optional<Eigen::VectorXd> minimizer;

  bool is_value() const { return status == Status::value; }
};

ExactTestResult etest_clarke(const model::Network& net, const model::Dataset& data,
                             const model::LossModel& loss, const numkit::SolverOptions& opt = {});

/// Returns infinite when any unit has a tied sample with u*rho < 0 (the
/// regular subdifferential is empty there).
ExactTestResult etest_frechet(const model::Network& net, const model::Dataset& data,
                              const model::LossModel& loss, const numkit::SolverOptions& opt = {});

ExactTestResult etest(TestKind kind, const model::Network& net, const model::Dataset& data,
                      const model::LossModel& loss, const numkit::SolverOptions& opt = {});

}  // namespace stattest::exact
