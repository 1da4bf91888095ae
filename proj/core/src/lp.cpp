#include <algorithm>
#include <cmath>

#include "stattest/numkit.hpp"

// Two-phase primal simplex on the standard form  min c^T y, A y = b, y >= 0.
// General problems (free variables, ranged rows, upper bounds) are compiled
// to standard form first. Dantzig pricing with a Bland fallback; the basis
// is refactored every iteration, which is cheap at these sizes and keeps
// the arithmetic fresh.

namespace stattest::numkit {

namespace {

constexpr double kPivotTol = 1e-11;
constexpr double kCostTol = 1e-10;
constexpr double kPhase1Tol = 1e-9;

struct StdForm {
  Eigen::MatrixXd A;  // m x n
  Eigen::VectorXd b;  // >= 0 after normalization
  Eigen::VectorXd c;
  std::vector<int> basis;          // size m
  std::vector<char> is_artificial; // size n
  int n = 0, m = 0;
};

struct VarMap {
  // x_j = sign * y[col] + shift  (pos_col >= 0), or x_j = y[col] - y[col2]
  int col = -1, col2 = -1;
  double sign = 1.0, shift = 0.0;
};

enum class Rel { le, ge, eq };

struct RawRow {
  Eigen::VectorXd a;
  Rel rel;
  double b;
};

// Simplex over a fixed standard form. Mutates sf.basis. Entering restricted
// to columns with allowed[j].
LpStatus simplex(StdForm& sf, const std::vector<char>& allowed, int max_iter,
                 Eigen::VectorXd& y_out, int& iters) {
  const int m = sf.m, n = sf.n;
  Eigen::MatrixXd B(m, m);
  Eigen::VectorXd xB(m), duals(m);
  const int bland_threshold = 20 * (m + n + 1);

  for (iters = 0; iters < max_iter; ++iters) {
    for (int i = 0; i < m; ++i) B.col(i) = sf.A.col(sf.basis[i]);
    Eigen::PartialPivLU<Eigen::MatrixXd> lu(B);
    xB = lu.solve(sf.b);
    Eigen::VectorXd cB(m);
    for (int i = 0; i < m; ++i) cB(i) = sf.c(sf.basis[i]);
    duals = Eigen::PartialPivLU<Eigen::MatrixXd>(B.transpose()).solve(cB);

    // pricing
    int enter = -1;
    double best = -kCostTol;
    const bool bland = iters > bland_threshold;
    std::vector<char> basic(n, 0);
    for (int i = 0; i < m; ++i) basic[sf.basis[i]] = 1;
    for (int j = 0; j < n; ++j) {
      if (basic[j] || !allowed[j]) continue;
      const double dj = sf.c(j) - sf.A.col(j).dot(duals);
      if (dj < -kCostTol) {
        if (bland) { enter = j; break; }
        if (dj < best) { best = dj; enter = j; }
      }
    }
    if (enter < 0) {
      y_out = Eigen::VectorXd::Zero(n);
      for (int i = 0; i < m; ++i) y_out(sf.basis[i]) = std::max(0.0, xB(i));
      return LpStatus::optimal;
    }

    Eigen::VectorXd dir = lu.solve(sf.A.col(enter));
    int leave = -1;
    double min_ratio = kInf;
    for (int i = 0; i < m; ++i) {
      if (dir(i) > kPivotTol) {
        const double ratio = std::max(0.0, xB(i)) / dir(i);
        if (ratio < min_ratio - 1e-12 ||
            (ratio < min_ratio + 1e-12 &&
             (leave < 0 || sf.basis[i] < sf.basis[leave]))) {
          min_ratio = ratio;
          leave = i;
        }
      }
    }
    if (leave < 0) return LpStatus::unbounded;
    sf.basis[leave] = enter;
  }
  return LpStatus::max_iter;
}

}  // namespace

LpProblem LpProblem::with_free_vars(int n) {
  LpProblem p;
  p.cost = Eigen::VectorXd::Zero(n);
  p.var_lo = Eigen::VectorXd::Constant(n, -kInf);
  p.var_hi = Eigen::VectorXd::Constant(n, kInf);
  return p;
}

LpSolution solve_lp(const LpProblem& p, const SolverOptions& opt) {
  const int nx = static_cast<int>(p.cost.size());
  LpSolution sol;
  sol.x = Eigen::VectorXd::Zero(nx);

  // variable transforms to y >= 0
  std::vector<VarMap> vmap(nx);
  std::vector<RawRow> raw;
  int ny = 0;
  for (int j = 0; j < nx; ++j) {
    const double lo = p.var_lo(j), hi = p.var_hi(j);
    if (std::isfinite(lo)) {
      vmap[j] = {ny++, -1, 1.0, lo};
      if (std::isfinite(hi)) {
        RawRow r{Eigen::VectorXd::Zero(nx), Rel::le, hi};
        r.a(j) = 1.0;
        raw.push_back(std::move(r));
      }
    } else if (std::isfinite(hi)) {
      vmap[j] = {ny++, -1, -1.0, hi};  // x = hi - y
    } else {
      vmap[j] = {ny, ny + 1, 1.0, 0.0};
      ny += 2;
    }
  }

  for (const auto& row : p.rows) {
    if (row.lo == row.hi) {
      raw.push_back({row.a, Rel::eq, row.lo});
    } else {
      if (std::isfinite(row.lo)) raw.push_back({row.a, Rel::ge, row.lo});
      if (std::isfinite(row.hi)) raw.push_back({row.a, Rel::le, row.hi});
    }
  }

  // rewrite rows over y and collect (a_y, rel, rhs)
  const int m = static_cast<int>(raw.size());
  Eigen::MatrixXd Ay = Eigen::MatrixXd::Zero(m, ny);
  Eigen::VectorXd rhs(m);
  std::vector<Rel> rel(m);
  for (int r = 0; r < m; ++r) {
    double shift = 0.0;
    for (int j = 0; j < nx; ++j) {
      const double aj = raw[r].a(j);
      if (aj == 0.0) continue;
      const VarMap& vm = vmap[j];
      if (vm.col2 < 0) {
        Ay(r, vm.col) += aj * vm.sign;
        shift += aj * vm.shift;
      } else {
        Ay(r, vm.col) += aj;
        Ay(r, vm.col2) -= aj;
      }
    }
    rhs(r) = raw[r].b - shift;
    rel[r] = raw[r].rel;
    // normalize rhs >= 0
    if (rhs(r) < 0) {
      Ay.row(r) = -Ay.row(r);
      rhs(r) = -rhs(r);
      if (rel[r] == Rel::le) rel[r] = Rel::ge;
      else if (rel[r] == Rel::ge) rel[r] = Rel::le;
    }
  }

  // slacks / artificials
  int n_slack = 0, n_art = 0;
  for (int r = 0; r < m; ++r) {
    if (rel[r] != Rel::eq) ++n_slack;
    if (rel[r] != Rel::le) ++n_art;
  }
  StdForm sf;
  sf.m = m;
  sf.n = ny + n_slack + n_art;
  sf.A = Eigen::MatrixXd::Zero(m, sf.n);
  sf.A.leftCols(ny) = Ay;
  sf.b = rhs;
  sf.c = Eigen::VectorXd::Zero(sf.n);
  sf.is_artificial.assign(sf.n, 0);
  sf.basis.assign(m, -1);
  {
    int sc = ny, ac = ny + n_slack;
    for (int r = 0; r < m; ++r) {
      if (rel[r] == Rel::le) {
        sf.A(r, sc) = 1.0;
        sf.basis[r] = sc++;
      } else if (rel[r] == Rel::ge) {
        sf.A(r, sc) = -1.0;
        ++sc;
        sf.A(r, ac) = 1.0;
        sf.is_artificial[ac] = 1;
        sf.basis[r] = ac++;
      } else {
        sf.A(r, ac) = 1.0;
        sf.is_artificial[ac] = 1;
        sf.basis[r] = ac++;
      }
    }
  }

  std::vector<char> allow_all(sf.n, 1);
  std::vector<char> allow_real(sf.n, 1);
  for (int j = 0; j < sf.n; ++j)
    if (sf.is_artificial[j]) allow_real[j] = 0;

  Eigen::VectorXd y;
  int it1 = 0, it2 = 0;

  if (n_art > 0) {
    for (int j = 0; j < sf.n; ++j) sf.c(j) = sf.is_artificial[j] ? 1.0 : 0.0;
    const LpStatus st = simplex(sf, allow_all, opt.max_iter, y, it1);
    if (st == LpStatus::max_iter) {
      sol.status = LpStatus::max_iter;
      sol.iterations = it1;
      return sol;
    }
    double infeas = 0.0;
    for (int j = 0; j < sf.n; ++j)
      if (sf.is_artificial[j]) infeas += y(j);
    if (st != LpStatus::optimal || infeas > kPhase1Tol) {
      sol.status = LpStatus::infeasible;
      sol.iterations = it1;
      return sol;
    }
    // pivot basic artificials out where possible
    Eigen::MatrixXd B(m, m);
    for (int i = 0; i < m; ++i) B.col(i) = sf.A.col(sf.basis[i]);
    Eigen::PartialPivLU<Eigen::MatrixXd> lu(B);
    for (int i = 0; i < m; ++i) {
      if (!sf.is_artificial[sf.basis[i]]) continue;
      for (int j = 0; j < sf.n; ++j) {
        if (sf.is_artificial[j]) continue;
        const Eigen::VectorXd col = lu.solve(sf.A.col(j));
        if (std::abs(col(i)) > 1e-7) {
          bool already = false;
          for (int t = 0; t < m; ++t) already |= (sf.basis[t] == j);
          if (!already) {
            sf.basis[i] = j;
            for (int t = 0; t < m; ++t) B.col(t) = sf.A.col(sf.basis[t]);
            lu.compute(B);
            break;
          }
        }
      }
    }
  }

  // phase 2
  sf.c.setZero();
  for (int j = 0; j < nx; ++j) {
    const double cj = p.cost(j);
    if (cj == 0.0) continue;
    const VarMap& vm = vmap[j];
    if (vm.col2 < 0) {
      sf.c(vm.col) += cj * vm.sign;
    } else {
      sf.c(vm.col) += cj;
      sf.c(vm.col2) -= cj;
    }
  }
  const LpStatus st2 = simplex(sf, allow_real, opt.max_iter, y, it2);
  sol.iterations = it1 + it2;
  sol.status = st2;
  if (st2 != LpStatus::optimal) return sol;

  for (int j = 0; j < nx; ++j) {
    const VarMap& vm = vmap[j];
    sol.x(j) = vm.col2 < 0 ? vm.sign * y(vm.col) + vm.shift : y(vm.col) - y(vm.col2);
  }
  sol.objective = p.cost.dot(sol.x);
  return sol;
}

StrictFeasibility lp_strict_feasible(const std::vector<StrictRow>& strict_rows,
                                     const std::vector<Eigen::VectorXd>& eq_rows,
                                     const SolverOptions& opt) {
  StrictFeasibility out;
  if (strict_rows.empty() && eq_rows.empty()) {
    out.feasible = false;
    return out;
  }
  const int d = static_cast<int>(strict_rows.empty() ? eq_rows.front().size()
                                                     : strict_rows.front().a.size());
  // max s  s.t.  sign_r * a_r^T d - s >= 0,  eq rows = 0,  |d|_inf <= 1.
  // Variables (d, s).
  LpProblem p = LpProblem::with_free_vars(d + 1);
  p.cost(d) = -1.0;  // maximize s
  for (int j = 0; j < d; ++j) {
    p.var_lo(j) = -1.0;
    p.var_hi(j) = 1.0;
  }
  double bound = 1.0;
  for (const auto& r : strict_rows) bound = std::max(bound, r.a.lpNorm<1>());
  p.var_lo(d) = -bound - 1.0;
  p.var_hi(d) = bound + 1.0;
  for (const auto& r : strict_rows) {
    LpRow row;
    row.a = Eigen::VectorXd::Zero(d + 1);
    row.a.head(d) = r.greater ? r.a : Eigen::VectorXd(-r.a);
    row.a(d) = -1.0;
    row.lo = 0.0;
    row.hi = kInf;
    p.rows.push_back(std::move(row));
  }
  for (const auto& a : eq_rows) {
    LpRow row;
    row.a = Eigen::VectorXd::Zero(d + 1);
    row.a.head(d) = a;
    row.lo = row.hi = 0.0;
    p.rows.push_back(std::move(row));
  }

  const LpSolution sol = solve_lp(p, opt);
  out.report.iterations = sol.iterations;
  if (sol.status == LpStatus::max_iter) {
    out.report.status = SolveStatus::max_iter;
    out.feasible = false;
    return out;
  }
  if (sol.status != LpStatus::optimal) {
    // (d, s) = (0, -bound) is always feasible, so anything else is a solver bug;
    // report indeterminate rather than guessing.
    out.report.status = SolveStatus::max_iter;
    out.feasible = false;
    return out;
  }
  out.report.status = SolveStatus::optimal;
  const Eigen::VectorXd d_star = sol.x.head(d);
  // recompute the certified margin from the witness itself
  double margin = kInf;
  for (const auto& r : strict_rows) {
    const double v = r.greater ? r.a.dot(d_star) : -r.a.dot(d_star);
    margin = std::min(margin, v);
  }
  double eq_err = 0.0;
  for (const auto& a : eq_rows) eq_err = std::max(eq_err, std::abs(a.dot(d_star)));
  out.margin = strict_rows.empty() ? 0.0 : margin;
  out.feasible = (strict_rows.empty() || margin > opt.margin_tol) && eq_err <= opt.feas_tol;
  if (out.feasible) out.witness = d_star;
  return out;
}

}  // namespace stattest::numkit
