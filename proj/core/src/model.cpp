#include <cmath>
#include <stdexcept>

#include "stattest/model.hpp"

#include "stattest/numkit.hpp"

namespace stattest::model {

double Dataset::radius() const {
  double r = 0.0;
  for (const auto& x : points) r = std::max(r, x.norm());
  return r;
}

Dataset Dataset::make(std::vector<Eigen::VectorXd> points, std::vector<double> labels,
                      bool append_bias) {
  Dataset d;
  if (append_bias) {
    for (auto& x : points) {
      Eigen::VectorXd lifted(x.size() + 1);
      lifted << x, 1.0;
      x = std::move(lifted);
    }
  }
  d.points = std::move(points);
  d.labels = std::move(labels);
  d.bias_appended = append_bias;
  d.validate();
  return d;
}

void Dataset::validate() const {
  if (points.empty()) throw std::invalid_argument("dataset: need at least one point");
  if (points.size() != labels.size())
    throw std::invalid_argument("dataset: points and labels differ in length");
  const int d = static_cast<int>(points.front().size());
  for (const auto& x : points) {
    if (static_cast<int>(x.size()) != d)
      throw std::invalid_argument("dataset: inconsistent point dimensions");
    if (x.isZero(0.0)) throw std::invalid_argument("dataset: zero data point");
  }
}

Eigen::VectorXd Network::pack() const {
  Eigen::VectorXd v(param_count());
  int at = 0;
  for (const auto& unit : units) {
    v(at++) = unit.u;
    v.segment(at, unit.w.size()) = unit.w;
    at += static_cast<int>(unit.w.size());
  }
  return v;
}

Network Network::unpack(const Eigen::VectorXd& params, int dim) {
  if (dim <= 0 || params.size() % (dim + 1) != 0)
    throw std::invalid_argument("network: packed size not a multiple of dim+1");
  Network net;
  const int h = static_cast<int>(params.size()) / (dim + 1);
  net.units.resize(h);
  int at = 0;
  for (auto& unit : net.units) {
    unit.u = params(at++);
    unit.w = params.segment(at, dim);
    at += dim;
  }
  net.validate();
  return net;
}

void Network::validate() const {
  if (units.empty()) throw std::invalid_argument("network: need at least one hidden unit");
  const int d = static_cast<int>(units.front().w.size());
  if (d == 0) throw std::invalid_argument("network: zero-dimensional weights");
  for (const auto& unit : units)
    if (static_cast<int>(unit.w.size()) != d)
      throw std::invalid_argument("network: inconsistent weight dimensions");
}

LossModel LossModel::square(double box) {
  LossModel m;
  m.kind = Kind::square;
  m.value = [](double t, double y) { return 0.5 * (t - y) * (t - y); };
  m.deriv = [](double t, double y) { return t - y; };
  m.value_lip = box;
  m.grad_lip = 1.0;
  return m;
}

LossModel LossModel::identity() {
  LossModel m;
  m.kind = Kind::identity;
  m.value = [](double t, double) { return t; };
  m.deriv = [](double, double) { return 1.0; };
  m.value_lip = 1.0;
  m.grad_lip = 0.0;
  return m;
}

LossModel LossModel::scaled_identity() {
  LossModel m;
  m.kind = Kind::custom;
  m.value = [](double t, double y) { return y * t; };
  m.deriv = [](double, double y) { return y; };
  m.value_lip = 1.0;  // for |y| <= 1
  m.grad_lip = 0.0;
  return m;
}

LossModel LossModel::logistic() {
  LossModel m;
  m.kind = Kind::logistic;
  m.value = [](double t, double y) {
    const double z = -y * t;
    // stable log(1+exp(z))
    return z > 0 ? z + std::log1p(std::exp(-z)) : std::log1p(std::exp(z));
  };
  m.deriv = [](double t, double y) { return -y / (1.0 + std::exp(y * t)); };
  m.value_lip = 1.0;
  m.grad_lip = 0.25;
  return m;
}

LossModel LossModel::custom(std::function<double(double, double)> value,
                            std::function<double(double, double)> deriv, double value_lip,
                            double grad_lip) {
  LossModel m;
  m.kind = Kind::custom;
  m.value = std::move(value);
  m.deriv = std::move(deriv);
  m.value_lip = value_lip;
  m.grad_lip = grad_lip;
  return m;
}

LossModel LossModel::by_name(const std::string& kind) {
  if (kind == "square") return square();
  if (kind == "identity") return identity();
  if (kind == "logistic") return logistic();
  throw std::invalid_argument("unknown loss kind: " + kind);
}

void check_compatible(const Network& net, const Dataset& data) {
  net.validate();
  data.validate();
  if (net.dim() != data.dim())
    throw std::invalid_argument("network weight dimension does not match the data");
}

Eigen::VectorXd network_outputs(const Network& net, const Dataset& data) {
  check_compatible(net, data);
  const int n = data.size();
  Eigen::VectorXd out(n);
  for (int i = 0; i < n; ++i) {
    double t = 0.0;
    for (const auto& unit : net.units) t += unit.u * std::max(numkit::dot_ascending(unit.w, data.points[i]), 0.0);
    out(i) = t;
  }
  return out;
}

double eval_loss(const Network& net, const Dataset& data, const LossModel& loss) {
  const Eigen::VectorXd out = network_outputs(net, data);
  double total = 0.0;
  for (int i = 0; i < data.size(); ++i) total += loss.value(out(i), data.labels[i]);
  return total;
}

RhoPartition rho_and_partition(const Network& net, const Dataset& data, const LossModel& loss) {
  const Eigen::VectorXd out = network_outputs(net, data);
  const int n = data.size(), h = net.width();
  RhoPartition rp;
  rp.rho.resize(n);
  for (int i = 0; i < n; ++i) rp.rho(i) = loss.deriv(out(i), data.labels[i]);
  rp.partition.units.resize(h);
  rp.tied_nonneg.resize(h);
  rp.tied_neg.resize(h);
  for (int k = 0; k < h; ++k) {
    auto& split = rp.partition.units[k];
    for (int i = 0; i < n; ++i) {
      const double dot = numkit::dot_ascending(net.units[k].w, data.points[i]);
      if (dot < 0.0) {
        split.less.push_back(i);
      } else if (dot > 0.0) {
        split.greater.push_back(i);
      } else {
        split.eq.push_back(i);
        if (net.units[k].u * rp.rho(i) >= 0.0)
          rp.tied_nonneg[k].push_back(i);
        else
          rp.tied_neg[k].push_back(i);
      }
    }
  }
  return rp;
}

double directional_derivative(const Network& net, const Dataset& data, const LossModel& loss,
                              const Eigen::VectorXd& direction) {
  check_compatible(net, data);
  if (direction.size() != net.param_count())
    throw std::invalid_argument("direction size does not match the parameter count");
  if (direction.norm() == 0.0) throw std::invalid_argument("direction must be nonzero");

  const Network dir = Network::unpack(direction, net.dim());
  const Eigen::VectorXd out = network_outputs(net, data);
  double total = 0.0;
  for (int i = 0; i < data.size(); ++i) {
    const auto& x = data.points[i];
    double dout = 0.0;
    for (int k = 0; k < net.width(); ++k) {
      const double dot = numkit::dot_ascending(net.units[k].w, x);
      const double ddot = numkit::dot_ascending(dir.units[k].w, x);
      // product rule for u_k * relu(w_k^T x); the kink contributes
      // max(ddot, 0) on ties
      dout += dir.units[k].u * std::max(dot, 0.0);
      if (dot > 0.0)
        dout += net.units[k].u * ddot;
      else if (dot == 0.0)
        dout += net.units[k].u * std::max(ddot, 0.0);
    }
    total += loss.deriv(out(i), data.labels[i]) * dout;
  }
  return total;
}

}  // namespace stattest::model
