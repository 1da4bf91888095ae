#include <algorithm>
#include <cmath>

#include "stattest/numkit.hpp"

namespace stattest::numkit {

Eigen::VectorXd SegmentSumSet::point_at(const Eigen::VectorXd& xi) const {
  Eigen::VectorXd p = base;
  for (int j = 0; j < static_cast<int>(generators.size()); ++j) p += xi(j) * generators[j];
  return p;
}

int PolyhedronSpec::dim() const {
  if (!ge_rows.empty()) return static_cast<int>(ge_rows.front().first.size());
  if (!le_rows.empty()) return static_cast<int>(le_rows.front().first.size());
  if (!eq_rows.empty()) return static_cast<int>(eq_rows.front().first.size());
  return 0;
}

bool PolyhedronSpec::contains(const Eigen::VectorXd& z) const {
  for (const auto& [a, b] : ge_rows)
    if (!(dot_ascending(a, z) >= b)) return false;
  for (const auto& [a, b] : le_rows)
    if (!(dot_ascending(a, z) <= b)) return false;
  for (const auto& [a, b] : eq_rows)
    if (dot_ascending(a, z) != b) return false;
  return true;
}

double PolyhedronSpec::violation(const Eigen::VectorXd& z) const {
  double v = 0.0;
  for (const auto& [a, b] : ge_rows) v = std::max(v, b - dot_ascending(a, z));
  for (const auto& [a, b] : le_rows) v = std::max(v, dot_ascending(a, z) - b);
  for (const auto& [a, b] : eq_rows) v = std::max(v, std::abs(dot_ascending(a, z) - b));
  return v;
}

int rank_with_tolerance(const Eigen::MatrixXd& m, double rel_tol) {
  if (m.rows() == 0 || m.cols() == 0) return 0;
  Eigen::JacobiSVD<Eigen::MatrixXd> svd(m);
  const Eigen::VectorXd& sv = svd.singularValues();
  if (sv.size() == 0 || sv(0) == 0.0) return 0;
  const double cut = rel_tol * sv(0);
  int r = 0;
  while (r < sv.size() && sv(r) > cut) ++r;
  return r;
}

// ---------------------------------------------------------------------------
// Box-constrained least squares (BVLS-style active set).

namespace {

enum : int8_t { kAtLo = 0, kAtHi = 1, kFree = 2 };

BoxLsResult box_ls_run(const SegmentSumSet& s, Eigen::VectorXd xi, const SolverOptions& opt) {
  BoxLsResult out;
  const int n = static_cast<int>(s.generators.size());
  const int d = s.dim();
  if (n == 0) {
    out.distance = s.base.norm();
    out.minimizer = Eigen::VectorXd(0);
    return out;
  }
  Eigen::MatrixXd P(d, n);
  for (int j = 0; j < n; ++j) P.col(j) = s.generators[j];

  std::vector<int8_t> state(n);
  for (int j = 0; j < n; ++j) {
    xi(j) = std::clamp(xi(j), 0.0, 1.0);
    state[j] = xi(j) <= 0.0 ? kAtLo : (xi(j) >= 1.0 ? kAtHi : kFree);
  }

  const double scale = std::max(1.0, P.cwiseAbs().maxCoeff());
  const double ktol = opt.qp_tol * scale * scale;
  auto objective = [&](const Eigen::VectorXd& v) { return (s.base + P * v).squaredNorm(); };

  int iters = 0;
  double last_obj = objective(xi);
  std::vector<char> blocked(n, 0);

  while (iters < opt.max_iter) {
    ++iters;
    // inner loop: optimize over the free set, fixing blocking bounds
    for (int inner = 0; inner <= n + 1; ++inner) {
      std::vector<int> freev;
      for (int j = 0; j < n; ++j)
        if (state[j] == kFree) freev.push_back(j);
      if (freev.empty()) break;
      Eigen::MatrixXd Pf(d, freev.size());
      for (size_t t = 0; t < freev.size(); ++t) Pf.col(t) = P.col(freev[t]);
      Eigen::VectorXd fixed = s.base;
      for (int j = 0; j < n; ++j)
        if (state[j] == kAtHi) fixed += P.col(j);
      Eigen::CompleteOrthogonalDecomposition<Eigen::MatrixXd> cod(Pf);
      // keep the current free values as the particular point: minimum-norm
      // step from xi_F, so rank-deficient columns stay put
      Eigen::VectorXd xif(freev.size());
      for (size_t t = 0; t < freev.size(); ++t) xif(t) = xi(freev[t]);
      const Eigen::VectorXd target = cod.solve(-(fixed + Pf * xif)) + xif;

      bool inside = true;
      for (size_t t = 0; t < freev.size(); ++t)
        if (target(t) < 0.0 || target(t) > 1.0) inside = false;
      if (inside) {
        for (size_t t = 0; t < freev.size(); ++t) xi(freev[t]) = target(t);
        break;
      }
      // ratio test toward the unconstrained minimizer
      double alpha = 1.0;
      for (size_t t = 0; t < freev.size(); ++t) {
        const double from = xi(freev[t]), to = target(t);
        if (to < 0.0 && from > 0.0) alpha = std::min(alpha, from / (from - to));
        else if (to > 1.0 && from < 1.0) alpha = std::min(alpha, (1.0 - from) / (to - from));
        else if (to < 0.0 || to > 1.0) alpha = 0.0;
      }
      int fixed_any = 0;
      for (size_t t = 0; t < freev.size(); ++t) {
        const int j = freev[t];
        xi(j) += alpha * (target(t) - xi(j));
        if (xi(j) <= 1e-12 && target(t) < 0.0) { xi(j) = 0.0; state[j] = kAtLo; ++fixed_any; }
        else if (xi(j) >= 1.0 - 1e-12 && target(t) > 1.0) { xi(j) = 1.0; state[j] = kAtHi; ++fixed_any; }
      }
      if (!fixed_any) {
        // numerical stall: pin the worst offender
        int jworst = -1; double w = -1.0;
        for (size_t t = 0; t < freev.size(); ++t) {
          const double over = std::max(-target(t), target(t) - 1.0);
          if (over > w) { w = over; jworst = static_cast<int>(t); }
        }
        const int j = freev[jworst];
        state[j] = target(jworst) < 0.0 ? kAtLo : kAtHi;
        xi(j) = target(jworst) < 0.0 ? 0.0 : 1.0;
      }
    }

    // KKT check at the current partition
    const Eigen::VectorXd r = s.base + P * xi;
    const Eigen::VectorXd g = P.transpose() * r;
    const double obj = r.squaredNorm();
    if (obj < last_obj - 1e-15) blocked.assign(n, 0);
    last_obj = obj;

    int jfree = -1;
    double worst = ktol;
    for (int j = 0; j < n; ++j) {
      if (blocked[j]) continue;
      double viol = 0.0;
      if (state[j] == kAtLo) viol = -g(j);
      else if (state[j] == kAtHi) viol = g(j);
      if (viol > worst) { worst = viol; jfree = j; }
    }
    if (jfree < 0) {
      double kkt = 0.0;
      for (int j = 0; j < n; ++j) {
        if (state[j] == kAtLo) kkt = std::max(kkt, -g(j));
        else if (state[j] == kAtHi) kkt = std::max(kkt, g(j));
        else kkt = std::max(kkt, std::abs(g(j)));
      }
      out.distance = r.norm();
      out.minimizer = xi;
      out.report = {SolveStatus::optimal, std::max(0.0, kkt), iters};
      return out;
    }
    blocked[jfree] = 1;  // cleared on the next strict decrease
    state[jfree] = kFree;
  }
  out.distance = (s.base + P * xi).norm();
  out.minimizer = xi;
  out.report = {SolveStatus::max_iter, kInf, iters};
  return out;
}

}  // namespace

BoxLsResult box_ls_distance(const SegmentSumSet& s, const SolverOptions& opt) {
  return box_ls_run(s, Eigen::VectorXd::Zero(static_cast<int>(s.generators.size())), opt);
}

BoxLsResult box_ls_distance(const SegmentSumSet& s, const Eigen::VectorXd& xi0,
                            const SolverOptions& opt) {
  return box_ls_run(s, xi0, opt);
}

// ---------------------------------------------------------------------------
// Euclidean projection onto a polyhedron.

namespace {

struct Row {
  Eigen::VectorXd a;
  double lo, hi;
};

enum class Pin { lower, upper, equality };

}  // namespace

ProjectionResult project_polyhedron(const Eigen::VectorXd& w, const PolyhedronSpec& spec,
                                    const SolverOptions& opt) {
  ProjectionResult out;
  const int d = static_cast<int>(w.size());

  if (spec.contains(w)) {  // exact short-circuit: projection is the identity
    out.point = w;
    return out;
  }

  std::vector<Row> rows;
  auto push = [&](const Eigen::VectorXd& a, double lo, double hi) {
    const double nrm = a.cwiseAbs().maxCoeff();
    if (nrm == 0.0) {
      if (lo > 0.0 || hi < 0.0) rows.push_back({a, 1.0, 1.0});  // unsatisfiable marker
      return;
    }
    rows.push_back({a / nrm, lo / nrm, hi / nrm});
  };
  for (const auto& [a, b] : spec.ge_rows) push(a, b, kInf);
  for (const auto& [a, b] : spec.le_rows) push(a, -kInf, b);
  for (const auto& [a, b] : spec.eq_rows) push(a, b, b);
  const int m = static_cast<int>(rows.size());

  // phase 1: minimize the worst violation v
  LpProblem p1 = LpProblem::with_free_vars(d + 1);
  p1.cost(d) = 1.0;
  p1.var_lo(d) = 0.0;
  for (const auto& r : rows) {
    if (std::isfinite(r.lo)) {
      LpRow lr;
      lr.a = Eigen::VectorXd::Zero(d + 1);
      lr.a.head(d) = r.a;
      lr.a(d) = 1.0;
      lr.lo = r.lo;
      lr.hi = kInf;
      p1.rows.push_back(std::move(lr));
    }
    if (std::isfinite(r.hi)) {
      LpRow lr;
      lr.a = Eigen::VectorXd::Zero(d + 1);
      lr.a.head(d) = r.a;
      lr.a(d) = -1.0;
      lr.lo = -kInf;
      lr.hi = r.hi;
      p1.rows.push_back(std::move(lr));
    }
  }
  const LpSolution ph1 = solve_lp(p1, opt);
  if (ph1.status == LpStatus::max_iter) {
    out.status = SolveStatus::max_iter;
    out.report.status = SolveStatus::max_iter;
    return out;
  }
  if (ph1.status != LpStatus::optimal) {
    out.status = SolveStatus::infeasible;
    out.phase1_margin = -kInf;
    return out;
  }
  const double vstar = std::max(0.0, ph1.objective);
  out.phase1_margin = -vstar;
  if (vstar > opt.feas_tol) {
    out.status = SolveStatus::infeasible;
    return out;
  }

  Eigen::VectorXd z = ph1.x.head(d);
  const double act_tol = std::max(1e-9, 2.0 * vstar);

  // working set: pinned rows as equalities
  std::vector<std::pair<int, Pin>> work;
  std::vector<char> in_work(m, 0);
  auto pin_value = [&](int r, Pin side) { return side == Pin::upper ? rows[r].hi : rows[r].lo; };
  for (int r = 0; r < m; ++r) {
    if (rows[r].lo == rows[r].hi) {
      work.push_back({r, Pin::equality});
      in_work[r] = 1;
    } else if (std::isfinite(rows[r].lo) && std::abs(rows[r].a.dot(z) - rows[r].lo) <= act_tol) {
      work.push_back({r, Pin::lower});
      in_work[r] = 1;
    } else if (std::isfinite(rows[r].hi) && std::abs(rows[r].a.dot(z) - rows[r].hi) <= act_tol) {
      work.push_back({r, Pin::upper});
      in_work[r] = 1;
    }
  }

  const double step_tol = 1e-12 * std::max(1.0, w.cwiseAbs().maxCoeff());
  int iters = 0;
  while (iters < opt.max_iter) {
    ++iters;
    const int k = static_cast<int>(work.size());
    Eigen::MatrixXd Aw(k, d);
    Eigen::VectorXd beta(k);
    for (int t = 0; t < k; ++t) {
      Aw.row(t) = rows[work[t].first].a;
      beta(t) = pin_value(work[t].first, work[t].second);
    }
    // EQP: min ||z' - w||  s.t.  Aw z' = beta
    Eigen::VectorXd zeqp;
    if (k == 0) {
      zeqp = w;
    } else {
      Eigen::CompleteOrthogonalDecomposition<Eigen::MatrixXd> cod(Aw);
      zeqp = w - cod.solve(Aw * w - beta);
    }
    const Eigen::VectorXd pdir = zeqp - z;

    if (pdir.cwiseAbs().maxCoeff() <= step_tol) {
      // multipliers: z - w = Aw^T lambda
      Eigen::VectorXd lambda;
      if (k > 0) {
        Eigen::CompleteOrthogonalDecomposition<Eigen::MatrixXd> codt(
            Eigen::MatrixXd(Aw.transpose()));
        lambda = codt.solve(z - w);
      } else {
        lambda = Eigen::VectorXd(0);
      }
      const double mult_tol = 1e-10 * std::max(1.0, (z - w).norm());
      int drop = -1;
      double worst = mult_tol;
      for (int t = 0; t < k; ++t) {
        double viol = 0.0;
        if (work[t].second == Pin::lower) viol = -lambda(t);
        else if (work[t].second == Pin::upper) viol = lambda(t);
        if (viol > worst) { worst = viol; drop = t; }
      }
      if (drop < 0) {
        double kkt = 0.0;
        if (k > 0) kkt = (z - w - Aw.transpose() * lambda).cwiseAbs().maxCoeff();
        else kkt = (z - w).cwiseAbs().maxCoeff();
        double feas = 0.0;
        for (const auto& r : rows) {
          feas = std::max(feas, std::isfinite(r.lo) ? r.lo - r.a.dot(z) : 0.0);
          feas = std::max(feas, std::isfinite(r.hi) ? r.a.dot(z) - r.hi : 0.0);
        }
        out.point = z;
        out.report = {SolveStatus::optimal, std::max(kkt, feas), iters};
        return out;
      }
      in_work[work[drop].first] = 0;
      work.erase(work.begin() + drop);
      continue;
    }

    // ratio test against inactive rows (first-hit wins; ties keep the
    // lowest row index since later rows need a strictly smaller step)
    double alpha = 1.0;
    int block = -1;
    Pin block_side = Pin::lower;
    for (int r = 0; r < m; ++r) {
      if (in_work[r]) continue;
      const double v = rows[r].a.dot(pdir);
      const double cur = rows[r].a.dot(z);
      if (v < -1e-13 && std::isfinite(rows[r].lo)) {
        const double lim = (rows[r].lo - cur) / v;
        if (lim < alpha) { alpha = std::max(0.0, lim); block = r; block_side = Pin::lower; }
      } else if (v > 1e-13 && std::isfinite(rows[r].hi)) {
        const double lim = (rows[r].hi - cur) / v;
        if (lim < alpha) { alpha = std::max(0.0, lim); block = r; block_side = Pin::upper; }
      }
    }
    z += alpha * pdir;
    if (block >= 0) {
      work.push_back({block, block_side});
      in_work[block] = 1;
    }
  }
  out.status = SolveStatus::max_iter;
  out.point = z;
  out.report = {SolveStatus::max_iter, kInf, iters};
  return out;
}

}  // namespace stattest::numkit
