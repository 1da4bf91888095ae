#include <algorithm>
#include <cmath>
#include <random>

#include "stattest/oracle.hpp"

namespace stattest::oracle {

namespace {

using numkit::dot_ascending;
using numkit::kInf;

// Strict-feasibility row for tie (k, i) in the concatenated weight space.
numkit::StrictRow tie_row(const model::Dataset& data, int h, int k, int i, bool positive) {
  numkit::StrictRow row;
  row.a = Eigen::VectorXd::Zero(h * data.dim());
  row.a.segment(k * data.dim(), data.dim()) = data.points[i];
  row.greater = positive;
  return row;
}

void enumerate_rec(const model::Dataset& data, int h,
                   const std::vector<std::pair<int, int>>& ties,
                   const numkit::SolverOptions& opt, std::vector<numkit::StrictRow>& rows,
                   std::vector<int8_t>& signs, std::vector<CellSign>& out) {
  if (signs.size() == ties.size()) {
    CellSign cell;
    cell.ties = ties;
    cell.signs = signs;
    // recover a witness for the full pattern and embed it in parameter space
    Eigen::VectorXd dw;
    if (rows.empty()) {
      dw = Eigen::VectorXd::Zero(h * data.dim());
    } else {
      const auto feas = numkit::lp_strict_feasible(rows, {}, opt);
      if (!feas.feasible) return;  // unreachable given pruning succeeded
      dw = *feas.witness;
    }
    cell.witness = Eigen::VectorXd::Zero(h * (data.dim() + 1));
    for (int k = 0; k < h; ++k)
      cell.witness.segment(k * (data.dim() + 1) + 1, data.dim()) =
          dw.segment(k * data.dim(), data.dim());
    out.push_back(std::move(cell));
    return;
  }
  const auto [k, i] = ties[signs.size()];
  for (const int8_t sgn : {int8_t{-1}, int8_t{1}}) {
    rows.push_back(tie_row(data, h, k, i, sgn > 0));
    const auto feas = numkit::lp_strict_feasible(rows, {}, opt);
    if (feas.report.status == numkit::SolveStatus::max_iter)
      throw solver_error("cell feasibility LP did not converge");
    if (feas.feasible) {
      signs.push_back(sgn);
      enumerate_rec(data, h, ties, opt, rows, signs, out);
      signs.pop_back();
    }
    rows.pop_back();
  }
}

}  // namespace

std::vector<CellSign> enumerate_cells(const model::Network& net, const model::Dataset& data,
                                      const model::LossModel& loss,
                                      const numkit::SolverOptions& opt, int max_ties) {
  const auto rp = model::rho_and_partition(net, data, loss);
  std::vector<std::pair<int, int>> ties;
  for (int k = 0; k < net.width(); ++k)
    for (const int i : rp.partition.units[k].eq) ties.push_back({k, i});
  if (static_cast<int>(ties.size()) > max_ties)
    throw guard_error("cell enumeration: too many simultaneous ties");

  std::vector<CellSign> cells;
  if (ties.empty()) {
    CellSign cell;
    cell.witness = Eigen::VectorXd::Zero(net.param_count());
    cells.push_back(std::move(cell));
    return cells;
  }
  std::vector<numkit::StrictRow> rows;
  std::vector<int8_t> signs;
  enumerate_rec(data, net.width(), ties, opt, rows, signs, cells);
  std::sort(cells.begin(), cells.end(),
            [](const CellSign& a, const CellSign& b) { return a.signs < b.signs; });
  return cells;
}

Eigen::VectorXd cell_gradient(const model::Network& net, const model::Dataset& data,
                              const model::LossModel& loss, const CellSign& cell) {
  const auto rp = model::rho_and_partition(net, data, loss);
  const int d = data.dim();
  Eigen::VectorXd g = Eigen::VectorXd::Zero(net.param_count());
  for (int k = 0; k < net.width(); ++k) {
    double gu = 0.0;
    Eigen::VectorXd gw = Eigen::VectorXd::Zero(d);
    for (int i = 0; i < data.size(); ++i) {
      const double dot = dot_ascending(net.units[k].w, data.points[i]);
      gu += rp.rho(i) * std::max(dot, 0.0);
      bool active = dot > 0.0;
      if (dot == 0.0) {
        const auto it = std::find(cell.ties.begin(), cell.ties.end(), std::make_pair(k, i));
        active = it != cell.ties.end() && cell.signs[it - cell.ties.begin()] > 0;
      }
      if (active) gw += rp.rho(i) * net.units[k].u * data.points[i];
    }
    g(k * (d + 1)) = gu;
    g.segment(k * (d + 1) + 1, d) = gw;
  }
  return g;
}

double clarke_oracle_distance(const model::Network& net, const model::Dataset& data,
                              const model::LossModel& loss, const numkit::SolverOptions& opt,
                              int max_ties) {
  const auto cells = enumerate_cells(net, data, loss, opt, max_ties);
  std::vector<Eigen::VectorXd> grads;
  for (const auto& cell : cells) {
    Eigen::VectorXd g = cell_gradient(net, data, loss, cell);
    bool dup = false;
    for (const auto& seen : grads) dup = dup || seen == g;
    if (!dup) grads.push_back(std::move(g));
  }
  Eigen::MatrixXd pts(net.param_count(), grads.size());
  for (size_t c = 0; c < grads.size(); ++c) pts.col(c) = grads[c];
  const auto hd = hull_distance(pts, opt);
  if (hd.report.status != numkit::SolveStatus::optimal)
    throw solver_error("hull distance did not converge");
  return hd.distance;
}

bool frechet_oracle_check(const Eigen::VectorXd& g, const model::Network& net,
                          const model::Dataset& data, const model::LossModel& loss,
                          const numkit::SolverOptions& opt, int max_ties) {
  if (g.size() != net.param_count())
    throw std::invalid_argument("candidate subgradient has the wrong size");
  const auto cells = enumerate_cells(net, data, loss, opt, max_ties);
  const int p = net.param_count(), d = data.dim();
  for (const auto& cell : cells) {
    const Eigen::VectorXd coeff = cell_gradient(net, data, loss, cell) - g;
    // min coeff^T delta over the closed cell cone intersected with the box
    numkit::LpProblem lp = numkit::LpProblem::with_free_vars(p);
    lp.cost = coeff;
    lp.var_lo.setConstant(-1.0);
    lp.var_hi.setConstant(1.0);
    for (size_t t = 0; t < cell.ties.size(); ++t) {
      const auto [k, i] = cell.ties[t];
      numkit::LpRow row;
      row.a = Eigen::VectorXd::Zero(p);
      row.a.segment(k * (d + 1) + 1, d) = cell.signs[t] > 0
                                              ? data.points[i]
                                              : Eigen::VectorXd(-data.points[i]);
      row.lo = 0.0;
      row.hi = numkit::kInf;
      lp.rows.push_back(std::move(row));
    }
    const auto sol = numkit::solve_lp(lp, opt);
    if (sol.status != numkit::LpStatus::optimal)
      throw solver_error("cell cone LP did not converge");
    if (sol.objective < -opt.margin_tol) return false;
  }
  return true;
}

FiniteDifferenceReport finite_difference_report(const model::Network& net,
                                                const model::Dataset& data,
                                                const model::LossModel& loss, int n_directions,
                                                uint64_t seed) {
  if (n_directions < 1) throw std::invalid_argument("need at least one direction");
  FiniteDifferenceReport rep;
  rep.directions = n_directions;
  rep.seed = seed;
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> gauss(0.0, 1.0);

  const Eigen::VectorXd x0 = net.pack();
  const double f0 = model::eval_loss(net, data, loss);
  for (int t = 0; t < n_directions; ++t) {
    Eigen::VectorXd dir(net.param_count());
    for (int j = 0; j < dir.size(); ++j) dir(j) = gauss(rng);
    if (dir.norm() == 0.0) dir(0) = 1.0;
    dir /= dir.norm();
    const double exact = model::directional_derivative(net, data, loss, dir);
    double best = kInf;
    for (const double h : {1e-3, 1e-4, 1e-5, 1e-6, 1e-7}) {
      const model::Network stepped = model::Network::unpack(x0 + h * dir, net.dim());
      const double quotient = (model::eval_loss(stepped, data, loss) - f0) / h;
      best = std::min(best, std::abs(quotient - exact));
    }
    rep.max_rel_error = std::max(rep.max_rel_error, best / std::max(1.0, std::abs(exact)));
  }
  return rep;
}

HullDistanceResult hull_distance(const Eigen::MatrixXd& points, const numkit::SolverOptions& opt) {
  HullDistanceResult out;
  const int d = static_cast<int>(points.rows());
  const int n = static_cast<int>(points.cols());
  if (n == 0) throw std::invalid_argument("hull of no points");
  out.weights = Eigen::VectorXd::Zero(n);
  if (n == 1) {
    out.weights(0) = 1.0;
    out.distance = points.col(0).norm();
    return out;
  }

  const double scale = std::max(1.0, points.colwise().squaredNorm().maxCoeff());
  const double tol = opt.qp_tol * scale;

  // warm start: box least squares over segments from the first point,
  // mapped to the simplex via lambda = xi / sum(xi)
  Eigen::VectorXd lambda = Eigen::VectorXd::Zero(n);
  {
    numkit::SegmentSumSet seed;
    seed.base = points.col(0);
    for (int c = 1; c < n; ++c) seed.generators.push_back(points.col(c) - points.col(0));
    const auto ls = numkit::box_ls_distance(seed, opt);
    const double total = ls.minimizer.sum();
    if (total <= 1.0) {
      lambda(0) = 1.0 - total;
      lambda.tail(n - 1) = ls.minimizer;
    } else {
      lambda.tail(n - 1) = ls.minimizer / total;
    }
  }

  // min-norm point iterations on the active face
  std::vector<int> corral;
  for (int c = 0; c < n; ++c)
    if (lambda(c) > 1e-12) corral.push_back(c);
  if (corral.empty()) corral.push_back(0);
  {  // renormalize onto the corral
    const Eigen::VectorXd seed_weights = lambda;
    double s = 0.0;
    for (const int c : corral) s += std::max(0.0, seed_weights(c));
    lambda.setZero();
    if (s <= 0.0)
      lambda(corral[0]) = 1.0;
    else
      for (const int c : corral) lambda(c) = std::max(0.0, seed_weights(c)) / s;
  }

  auto affine_minimizer = [&](const std::vector<int>& set) {
    const int m = static_cast<int>(set.size());
    Eigen::MatrixXd g(d, m);
    for (int t = 0; t < m; ++t) g.col(t) = points.col(set[t]);
    Eigen::MatrixXd kkt = Eigen::MatrixXd::Zero(m + 1, m + 1);
    kkt.topLeftCorner(m, m) = g.transpose() * g;
    kkt.topRightCorner(m, 1).setOnes();
    kkt.bottomLeftCorner(1, m).setOnes();
    Eigen::VectorXd rhs = Eigen::VectorXd::Zero(m + 1);
    rhs(m) = 1.0;
    Eigen::CompleteOrthogonalDecomposition<Eigen::MatrixXd> cod(kkt);
    const Eigen::VectorXd sol = cod.solve(rhs);
    return Eigen::VectorXd(sol.head(m));
  };

  // minor cycle: walk toward the affine minimizer of the corral, dropping
  // vertices whose weight hits zero, until the face optimum lies inside
  auto minor_cycle = [&]() {
    for (int minor = 0; minor <= n + 1; ++minor) {
      const Eigen::VectorXd alpha = affine_minimizer(corral);
      if (alpha.minCoeff() >= -1e-12) {
        Eigen::VectorXd next = Eigen::VectorXd::Zero(n);
        double s = 0.0;
        for (size_t t = 0; t < corral.size(); ++t) {
          const double v = std::max(0.0, alpha(t));
          next(corral[t]) = v;
          s += v;
        }
        lambda = next / s;
        std::vector<int> kept;
        for (const int c : corral)
          if (lambda(c) > 1e-14) kept.push_back(c);
        if (!kept.empty()) corral = kept;
        return;
      }
      double theta = 1.0;
      for (size_t t = 0; t < corral.size(); ++t) {
        if (alpha(t) < 0.0) {
          const double cur = lambda(corral[t]);
          if (cur - alpha(t) > 0.0) theta = std::min(theta, cur / (cur - alpha(t)));
        }
      }
      Eigen::VectorXd next = Eigen::VectorXd::Zero(n);
      for (size_t t = 0; t < corral.size(); ++t)
        next(corral[t]) = (1.0 - theta) * lambda(corral[t]) + theta * alpha(t);
      std::vector<int> kept;
      double s = 0.0;
      for (const int c : corral) {
        if (next(c) > 1e-14) { kept.push_back(c); s += next(c); }
      }
      if (kept.empty()) { kept.push_back(corral[0]); s = 1.0; next(corral[0]) = 1.0; }
      corral = kept;
      lambda.setZero();
      for (const int c : corral) lambda(c) = next(c) / s;
    }
  };

  // exact line-search step toward a vertex; strict descent whenever the
  // optimality gap is positive, which breaks degenerate corral cycles
  auto toward_vertex = [&](int c, const Eigen::VectorXd& x) {
    const Eigen::VectorXd diff = x - points.col(c);
    const double denom = diff.squaredNorm();
    if (denom <= 0.0) return;
    const double gamma = std::clamp(x.dot(diff) / denom, 0.0, 1.0);
    lambda *= (1.0 - gamma);
    lambda(c) += gamma;
    corral.clear();
    for (int j = 0; j < n; ++j)
      if (lambda(j) > 1e-14) corral.push_back(j);
    if (corral.empty()) {
      corral.push_back(c);
      lambda.setZero();
      lambda(c) = 1.0;
    }
  };

  minor_cycle();  // establish the corral invariant on the warm start
  int iters = 0;
  for (; iters < opt.max_iter; ++iters) {
    const Eigen::VectorXd x = points * lambda;
    // best improving vertex
    int cbest = 0;
    double vbest = kInf;
    for (int c = 0; c < n; ++c) {
      const double v = points.col(c).dot(x);
      if (v < vbest - 1e-15 * scale) { vbest = v; cbest = c; }
    }
    if (vbest >= x.squaredNorm() - tol) break;  // Wolfe optimality
    const double before = x.squaredNorm();
    if (std::find(corral.begin(), corral.end(), cbest) == corral.end()) {
      corral.push_back(cbest);
      minor_cycle();
    }
    if ((points * lambda).squaredNorm() >= before - 1e-14 * scale)
      toward_vertex(cbest, points * lambda);
  }

  const Eigen::VectorXd x = points * lambda;
  double kkt = 0.0;
  for (int c = 0; c < n; ++c) kkt = std::max(kkt, x.squaredNorm() - points.col(c).dot(x));
  out.distance = x.norm();
  out.weights = lambda;
  out.report.iterations = iters;
  out.report.kkt_residual = std::max(0.0, kkt) / scale;
  out.report.status =
      iters >= opt.max_iter ? numkit::SolveStatus::max_iter : numkit::SolveStatus::optimal;
  return out;
}

}  // namespace stattest::oracle
