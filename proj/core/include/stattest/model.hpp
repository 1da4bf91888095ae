#pragma once

#include <Eigen/Dense>
#include <functional>
#include <string>
#include <vector>

#include "stattest/errors.hpp"

// Networks, datasets, and loss models for the two-layer ReLU empirical loss
//   L(u_1, w_1, ..., u_H, w_H) = sum_i loss(sum_k u_k * max(w_k^T x_i, 0), y_i),
// together with per-sample loss slopes, tie partitions, and exact one-sided
// directional derivatives. All operations are pure; parameter vectors pack
// as (u_1, w_1, ..., u_H, w_H).

namespace stattest::model {

struct Dataset {
  std::vector<Eigen::VectorXd> points;  // stored x_i, bias already appended when requested
  std::vector<double> labels;
  bool bias_appended = false;

  int size() const { return static_cast<int>(points.size()); }
  int dim() const { return points.empty() ? 0 : static_cast<int>(points.front().size()); }
  /// R = max_i ||x_i||.
  double radius() const;

  /// Builds a dataset, appending a trailing 1 to every point when
  /// append_bias is set. Throws std::invalid_argument on bad shapes or a
  /// zero data point.
  static Dataset make(std::vector<Eigen::VectorXd> points, std::vector<double> labels,
                      bool append_bias = false);
  void validate() const;
};

struct Network {
  struct Unit {
    double u = 0.0;
    Eigen::VectorXd w;
  };
  std::vector<Unit> units;

  int width() const { return static_cast<int>(units.size()); }  // H
  int dim() const { return units.empty() ? 0 : static_cast<int>(units.front().w.size()); }
  int param_count() const { return width() * (dim() + 1); }
  /// Euclidean norm of the packed parameter vector (the bound B).
  double norm() const { return pack().norm(); }

  Eigen::VectorXd pack() const;
  static Network unpack(const Eigen::VectorXd& params, int dim);
  void validate() const;
};

struct LossModel {
  enum class Kind { square, identity, logistic, custom };
  Kind kind = Kind::square;
  std::function<double(double, double)> value;  // (t, y) -> loss
  std::function<double(double, double)> deriv;  // d/dt
  double value_lip = 1.0;  // Lipschitz constant of the value (on the reporting box)
  double grad_lip = 1.0;   // Lipschitz constant of the derivative

  /// 0.5 * (t - y)^2. The value itself is not globally Lipschitz; value_lip
  /// is reported for |t - y| <= box.
  static LossModel square(double box = 1.0);
  /// loss(t, y) = t; realizes piecewise-linear empirical losses.
  static LossModel identity();
  /// loss(t, y) = y * t; per-sample slopes equal the labels.
  static LossModel scaled_identity();
  /// log(1 + exp(-y t)) with labels in [-1, 1].
  static LossModel logistic();
  static LossModel custom(std::function<double(double, double)> value,
                          std::function<double(double, double)> deriv, double value_lip,
                          double grad_lip);
  static LossModel by_name(const std::string& kind);
};

/// Indices of [N] split by the sign of x_i^T w_k, one split per hidden unit.
/// Ties (eq) are decided by the literal comparison x_i^T w_k == 0; near-ties
/// belong to the robust test, not to this partition.
struct ActivationPartition {
  struct UnitSplit {
    std::vector<int> less, eq, greater;
  };
  std::vector<UnitSplit> units;
};

/// Per-sample loss slopes at the current point plus the tie bookkeeping the
/// subdifferential constructions consume: tied_nonneg / tied_neg split each
/// unit's eq set by the sign of u_k * rho_i.
struct RhoPartition {
  Eigen::VectorXd rho;  // rho_i = loss'(output_i, y_i)
  ActivationPartition partition;
  std::vector<std::vector<int>> tied_nonneg;  // u_k * rho_i >= 0
  std::vector<std::vector<int>> tied_neg;     // u_k * rho_i < 0
};

/// Network outputs per sample: sum_k u_k * max(w_k^T x_i, 0).
Eigen::VectorXd network_outputs(const Network& net, const Dataset& data);

double eval_loss(const Network& net, const Dataset& data, const LossModel& loss);

RhoPartition rho_and_partition(const Network& net, const Dataset& data, const LossModel& loss);

/// Exact one-sided directional derivative of the empirical loss along the
/// packed direction. Requires ||direction|| > 0.
double directional_derivative(const Network& net, const Dataset& data, const LossModel& loss,
                              const Eigen::VectorXd& direction);

void check_compatible(const Network& net, const Dataset& data);

}  // namespace stattest::model
