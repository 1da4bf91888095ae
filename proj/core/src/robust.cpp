#include <algorithm>
#include <cmath>
#include <stdexcept>

#include "stattest/robust.hpp"

namespace stattest::robust {

namespace {

using numkit::dot_ascending;
using numkit::kInf;

ConstantSet clarke_constants(double lg, int n, int h, double b, double r) {
  ConstantSet c;
  c.c1 = 3.0 * lg * n * h * b * r;
  c.c2 = b * r * c.c1;
  c.c3 = 2.0 * lg * n * r;
  c.c4 = h * (c.c2 + c.c3);
  c.c5 = h * (b * r * c.c1 + n * r * lg);
  c.c_mu = c.c4 + c.c5;
  return c;
}

ConstantSet frechet_constants(double lg, int n, int h, double b, double r) {
  ConstantSet c;
  c.c1 = 4.0 * lg * n * h * b * r;
  c.c2 = b * r * c.c1;
  c.c3 = 2.0 * lg * n * r;
  c.c4 = h * (c.c2 + c.c3);
  c.c5 = h * (b * r * c.c1 + 2.0 * n * r * lg);
  c.c_mu = c.c4 + c.c5;
  return c;
}

double outer_weight_threshold(double lg, int h, double r, double b) {
  return lg * (4.0 * h * r * b * b + 1.0);
}

}  // namespace

ConstantBundle constants(const model::Dataset& data, const model::LossModel& loss,
                         double norm_bound, int width,
                         const std::optional<model::Network>& reference) {
  ConstantBundle bundle;
  bundle.radius = data.radius();
  bundle.norm_bound = norm_bound;
  bundle.loss_value_lip = loss.value_lip;
  bundle.loss_grad_lip = loss.grad_lip;
  const int n = data.size();
  bundle.clarke = clarke_constants(loss.grad_lip, n, width, norm_bound, bundle.radius);
  bundle.frechet = frechet_constants(loss.grad_lip, n, width, norm_bound, bundle.radius);
  bundle.c_u = outer_weight_threshold(loss.grad_lip, width, bundle.radius, norm_bound);
  if (reference.has_value()) {
    const SeparationConstants sep = separation(*reference, data, loss);
    bundle.c_tau_clarke = sep.c_tau_clarke;
    bundle.c_tau_frechet = sep.c_tau_frechet;
    bundle.c_tau_frechet_definition = sep.c_tau_frechet_definition;
  }
  return bundle;
}

SeparationConstants separation(const model::Network& reference, const model::Dataset& data,
                               const model::LossModel& loss) {
  model::check_compatible(reference, data);
  const double r = data.radius();
  SeparationConstants sep;

  double min_dot = kInf;
  for (const auto& unit : reference.units)
    for (const auto& x : data.points) {
      const double dot = dot_ascending(unit.w, x);
      if (dot != 0.0) min_dot = std::min(min_dot, std::abs(dot));
    }
  sep.c_tau_clarke = std::isfinite(min_dot) ? min_dot / (4.0 * r) : kInf;

  const auto rp = model::rho_and_partition(reference, data, loss);
  double tau_u = kInf;
  for (int k = 0; k < reference.width(); ++k)
    for (const int i : rp.partition.units[k].eq) {
      const double v = reference.units[k].u * rp.rho(i);
      if (v > 0.0) tau_u = std::min(tau_u, v);
    }
  const double cu = outer_weight_threshold(loss.grad_lip, reference.width(), r, reference.norm());
  const double term = (std::isfinite(tau_u) && cu > 0.0) ? tau_u / (4.0 * cu) : kInf;
  const double term_def = (std::isfinite(tau_u) && cu > 0.0) ? tau_u / cu : kInf;
  sep.c_tau_frechet = std::min(sep.c_tau_clarke, term);
  sep.c_tau_frechet_definition = std::min(sep.c_tau_clarke, term_def);
  return sep;
}

namespace {

// Nudges w(pivot) by ulps until the ascending dot lands on exact zero.
// Walk width 96 covers the product-grid gaps of small integer pivots.
bool snap_one(Eigen::VectorXd& w, const Eigen::VectorXd& x, int pivot) {
  double prefix = 0.0;
  const int d = static_cast<int>(w.size());
  for (int i = 0; i < d; ++i)
    if (i != pivot) prefix += x(i) * w(i);
  const double t0 = -prefix / x(pivot);
  if (!std::isfinite(t0)) return false;

  const double keep = w(pivot);
  double best = keep, best_abs = std::abs(dot_ascending(x, w));
  double up = t0, dn = t0;
  for (int step = 0; step <= 96; ++step) {
    for (const double cand : {up, dn}) {
      w(pivot) = cand;
      const double s = dot_ascending(x, w);
      if (s == 0.0) return true;
      if (std::abs(s) < best_abs) { best_abs = std::abs(s); best = cand; }
      if (step == 0) break;  // up == dn == t0
    }
    up = std::nextafter(up, kInf);
    dn = std::nextafter(dn, -kInf);
  }
  w(pivot) = best;
  return false;
}

bool snap_row(Eigen::VectorXd& w, const Eigen::VectorXd& x) {
  if (dot_ascending(x, w) == 0.0) return true;
  // prefer pivots whose product grid has no gaps (|coefficient| <= 2),
  // later coordinates first so the untouched suffix stays exact
  const int d = static_cast<int>(w.size());
  std::vector<int> pivots;
  for (int j = d - 1; j >= 0; --j)
    if (x(j) != 0.0 && std::abs(x(j)) <= 2.0) pivots.push_back(j);
  for (int j = d - 1; j >= 0; --j)
    if (x(j) != 0.0 && std::abs(x(j)) > 2.0) pivots.push_back(j);
  for (const int pivot : pivots)
    if (snap_one(w, x, pivot)) return true;
  return false;
}

// Joint two-row snap over a pivot pair: walk one pivot by ulps, solve the
// first row exactly in the other, test the second row on that family.
bool snap_pair_on(Eigen::VectorXd& w, const Eigen::VectorXd& x1, const Eigen::VectorXd& x2,
                  int p1, int p2) {
  const int d = static_cast<int>(w.size());
  const double a11 = x1(p1), a12 = x1(p2), a21 = x2(p1), a22 = x2(p2);
  double r1 = 0.0, r2 = 0.0;
  for (int i = 0; i < d; ++i) {
    if (i == p1 || i == p2) continue;
    r1 += x1(i) * w(i);
    r2 += x2(i) * w(i);
  }
  const double det = a11 * a22 - a12 * a21;
  if (det == 0.0 || !std::isfinite(det)) return false;
  const double t1 = (-r1 * a22 + r2 * a12) / det;
  const double t2 = (-a11 * r2 + a21 * r1) / det;
  if (!std::isfinite(t1) || !std::isfinite(t2)) return false;

  double up = t2, dn = t2;
  w(p1) = t1;
  for (int s = 0; s <= 32; ++s) {
    for (const double c2 : {up, dn}) {
      w(p2) = c2;
      if (snap_one(w, x1, p1) && dot_ascending(x2, w) == 0.0 &&
          dot_ascending(x1, w) == 0.0)
        return true;
      if (s == 0) break;
    }
    up = std::nextafter(up, kInf);
    dn = std::nextafter(dn, -kInf);
  }
  return false;
}

// The reachable joint values form a lattice whose offset depends on the
// pivot pair and on the untouched coordinates; cycle over pivot pairs and
// ulp nudges of the free coordinates until a joint zero exists.
bool snap_pair(Eigen::VectorXd& w, const Eigen::VectorXd& x1, const Eigen::VectorXd& x2) {
  const int d = static_cast<int>(w.size());
  const Eigen::VectorXd saved = w;
  std::vector<std::pair<int, int>> pairs;
  for (int p1 = d - 1; p1 >= 0; --p1) {
    if (x1(p1) == 0.0) continue;
    for (int p2 = d - 1; p2 >= 0; --p2) {
      if (p2 == p1 || x2(p2) == 0.0) continue;
      pairs.push_back({p1, p2});
    }
  }
  for (int nudge = 0; nudge <= 8; ++nudge) {
    for (const auto& [p1, p2] : pairs) {
      w = saved;
      if (nudge > 0) {
        // shift a free coordinate to move the lattice offset
        const int free = 3 - p1 - p2;
        if (d != 3 || free < 0 || free > 2) break;
        const int steps = (nudge + 1) / 2;
        const double dir = nudge % 2 ? kInf : -kInf;
        for (int s = 0; s < steps; ++s) w(free) = std::nextafter(w(free), dir);
      }
      if (snap_pair_on(w, x1, x2, p1, p2)) return true;
    }
  }
  w = saved;
  return false;
}

}  // namespace

bool snap_ties(Eigen::VectorXd& w, const std::vector<Eigen::VectorXd>& tie_rows) {
  if (tie_rows.empty()) return true;

  auto all_exact = [&]() {
    for (const auto& x : tie_rows)
      if (dot_ascending(x, w) != 0.0) return false;
    return true;
  };

  if (tie_rows.size() == 1) {
    snap_row(w, tie_rows.front());
    return all_exact();
  }
  if (tie_rows.size() == 2) {
    if (snap_pair(w, tie_rows[0], tie_rows[1])) return true;
  }
  // Gauss-Seidel sweeps; adjusting one row can disturb another, so iterate
  for (int sweep = 0; sweep < 8; ++sweep) {
    for (const auto& x : tie_rows) snap_row(w, x);
    if (all_exact()) return true;
  }
  return all_exact();
}

RoundingResult rnd_clarke(const model::Network& net, double delta, const model::Dataset& data,
                          const numkit::SolverOptions& opt) {
  if (!(delta > 0.0)) throw std::invalid_argument("rounding radius must be positive");
  model::check_compatible(net, data);
  const double r = data.radius();
  RoundingResult out;
  out.net = net;
  out.ties.resize(net.width());

  for (int k = 0; k < net.width(); ++k) {
    numkit::PolyhedronSpec spec;
    std::vector<Eigen::VectorXd> tie_rows;
    for (int i = 0; i < data.size(); ++i) {
      const double dot = dot_ascending(net.units[k].w, data.points[i]);
      if (dot > r * delta) {
        spec.ge_rows.push_back({data.points[i], 2.0 * r * delta});
      } else if (dot < -r * delta) {
        spec.le_rows.push_back({data.points[i], -2.0 * r * delta});
      } else {
        spec.eq_rows.push_back({data.points[i], 0.0});
        out.ties[k].push_back(i);
        tie_rows.push_back(data.points[i]);
      }
    }
    const auto proj = numkit::project_polyhedron(net.units[k].w, spec, opt);
    if (proj.status == numkit::SolveStatus::infeasible) {
      out.feasible = false;
      return out;
    }
    if (proj.status == numkit::SolveStatus::max_iter)
      throw solver_error("rounding projection did not converge");
    Eigen::VectorXd w = proj.point;
    if (!tie_rows.empty() && w != net.units[k].w)
      out.ties_exact = snap_ties(w, tie_rows) && out.ties_exact;
    out.net.units[k].w = std::move(w);
  }
  return out;
}

RoundingResult rnd_frechet(const model::Network& net, double delta, const model::Dataset& data,
                           const model::LossModel& loss, const numkit::SolverOptions& opt) {
  RoundingResult out = rnd_clarke(net, delta, data, opt);
  if (!out.feasible) return out;
  // slopes at the pre-rounding point, threshold at the rounded ties
  const auto rp = model::rho_and_partition(net, data, loss);
  const double b = net.norm() + delta;
  const double cu = outer_weight_threshold(loss.grad_lip, net.width(), data.radius(), b);
  for (int k = 0; k < net.width(); ++k) {
    double min_tied = kInf;
    for (int i = 0; i < data.size(); ++i)
      if (dot_ascending(out.net.units[k].w, data.points[i]) == 0.0)
        min_tied = std::min(min_tied, net.units[k].u * rp.rho(i));
    if (min_tied <= 2.0 * cu * delta)  // min over no ties is +inf: u survives
      out.net.units[k].u = 0.0;
  }
  return out;
}

RobustResult rtest(exact::TestKind kind, const model::Network& net, double delta,
                   const model::Dataset& data, const model::LossModel& loss,
                   const numkit::SolverOptions& opt) {
  RobustResult res;
  const RoundingResult rounded = kind == exact::TestKind::clarke
                                     ? rnd_clarke(net, delta, data, opt)
                                     : rnd_frechet(net, delta, data, loss, opt);
  if (!rounded.feasible) {
    res.status = RobustResult::Status::infinite;
    res.reason = RobustResult::InfiniteReason::rounding_infeasible;
    return res;
  }
  res.rounded = rounded.net;
  res.distance_moved = (net.pack() - rounded.net.pack()).norm();
  if (res.distance_moved > delta) {
    res.status = RobustResult::Status::infinite;
    res.reason = RobustResult::InfiniteReason::moved_too_far;
    return res;
  }
  const auto er = exact::etest(kind, rounded.net, data, loss, opt);
  switch (er.status) {
    case exact::ExactTestResult::Status::not_sq:
      res.status = RobustResult::Status::not_sq;
      break;
    case exact::ExactTestResult::Status::infinite:
      res.status = RobustResult::Status::infinite;
      res.reason = RobustResult::InfiniteReason::frechet_empty;
      break;
    case exact::ExactTestResult::Status::value:
      res.status = RobustResult::Status::value;
      res.epsilon = er.epsilon;
      res.units = er.units;
      res.minimizer = er.minimizer;
      break;
  }
  return res;
}

LineSearchTrace line_search(exact::TestKind kind, const model::Network& net,
                            const model::Dataset& data, const model::LossModel& loss,
                            double delta0, int max_iters, const numkit::SolverOptions& opt) {
  if (!(delta0 > 0.0)) throw std::invalid_argument("initial radius must be positive");
  model::check_compatible(net, data);

  double min_dot = kInf;
  for (const auto& unit : net.units)
    for (const auto& x : data.points) {
      const double dot = dot_ascending(unit.w, x);
      if (dot != 0.0) min_dot = std::min(min_dot, std::abs(dot));
    }
  // below this radius every clear activation sits past the 2R*delta margin,
  // so rounding is provably the identity
  const double stop = std::isfinite(min_dot) ? min_dot / (2.0 * data.radius()) : kInf;

  LineSearchTrace trace;
  const Eigen::VectorXd packed = net.pack();
  double delta = delta0;
  for (int t = 0; t < max_iters; ++t) {
    LineSearchStep step;
    step.delta = delta;
    step.result = rtest(kind, net, delta, data, loss, opt);
    if (step.result.rounded.has_value())
      step.rounding_identity = step.result.rounded->pack() == packed;
    if (step.rounding_identity && trace.first_identity_step < 0) trace.first_identity_step = t;
    if (step.result.is_value()) {
      const std::pair<double, double> cert{step.result.epsilon, delta};
      if (!trace.best || cert < *trace.best) trace.best = cert;
    }
    trace.steps.push_back(std::move(step));
    if (delta < stop) break;
    delta /= 2.0;
  }
  return trace;
}

}  // namespace stattest::robust
