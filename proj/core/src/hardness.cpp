#include <algorithm>
#include <cmath>
#include <istream>
#include <random>
#include <sstream>
#include <stdexcept>
#include <string>

#include "stattest/hardness.hpp"

namespace stattest::hardness {

void Cnf3::validate() const {
  if (num_vars < 1) throw std::invalid_argument("cnf: need at least one variable");
  if (clauses.empty()) throw std::invalid_argument("cnf: need at least one clause");
  for (const auto& clause : clauses) {
    if (clause.empty() || clause.size() > 3)
      throw std::invalid_argument("cnf: clauses must hold 1..3 literals");
    for (const int lit : clause) {
      const int v = std::abs(lit);
      if (v < 1 || v > num_vars) throw std::invalid_argument("cnf: literal out of range");
    }
  }
}

bool PltInstance::is_reduction_form() const {
  for (const auto& y : vectors) {
    int nonzero = 0;
    for (int j = 0; j < y.size(); ++j) {
      if (y(j) != 0) {
        ++nonzero;
        if (y(j) != 1 && y(j) != -1) return false;
      }
    }
    if (nonzero != 1) return false;
  }
  return true;
}

void PltInstance::validate() const {
  if (dim < 1) throw std::invalid_argument("plt: dimension must be positive");
  if (vectors.empty() || vectors.size() % 3 != 0)
    throw std::invalid_argument("plt: vector count must be a positive multiple of 3");
  for (const auto& y : vectors)
    if (static_cast<int>(y.size()) != dim)
      throw std::invalid_argument("plt: vector dimension mismatch");
}

void AbsNormalForm::validate() const {
  const int s = switches(), n = inputs();
  if (Z.rows() != s || Z.cols() != n || L.rows() != s || L.cols() != s)
    throw std::invalid_argument("abs-normal form: inconsistent dimensions");
  for (int i = 0; i < s; ++i)
    for (int j = i; j < s; ++j)
      if (L(i, j) != 0.0)
        throw std::invalid_argument("abs-normal form: L must be strictly lower triangular");
}

Cnf3 parse_dimacs(std::istream& in) {
  Cnf3 cnf;
  int declared_clauses = -1;
  std::string line;
  std::vector<int> clause;
  bool header_seen = false;
  while (std::getline(in, line)) {
    if (line.empty() || line[0] == 'c') continue;
    if (line[0] == '%') break;
    std::istringstream ls(line);
    if (line[0] == 'p') {
      std::string p, fmt;
      if (!(ls >> p >> fmt >> cnf.num_vars >> declared_clauses) || fmt != "cnf")
        throw io_error("dimacs: malformed problem line");
      header_seen = true;
      continue;
    }
    if (!header_seen) throw io_error("dimacs: clause before the problem line");
    int lit;
    while (ls >> lit) {
      if (lit == 0) {
        if (clause.empty()) throw io_error("dimacs: empty clause");
        if (clause.size() > 3) throw io_error("dimacs: clause longer than three literals");
        cnf.clauses.push_back(clause);
        clause.clear();
      } else {
        clause.push_back(lit);
      }
    }
  }
  if (!header_seen) throw io_error("dimacs: missing problem line");
  if (!clause.empty()) throw io_error("dimacs: unterminated clause");
  if (declared_clauses >= 0 && declared_clauses != cnf.clause_count())
    throw io_error("dimacs: clause count does not match the header");
  try {
    cnf.validate();
  } catch (const std::invalid_argument& e) {
    throw io_error(std::string("dimacs: ") + e.what());
  }
  return cnf;
}

PltInstance sat_to_plt(const Cnf3& cnf) {
  cnf.validate();
  PltInstance inst;
  inst.dim = cnf.num_vars;
  for (const auto& clause : cnf.clauses) {
    for (int pos = 0; pos < 3; ++pos) {
      const int lit = clause[std::min<size_t>(pos, clause.size() - 1)];
      Eigen::VectorXi y = Eigen::VectorXi::Zero(cnf.num_vars);
      y(std::abs(lit) - 1) = lit > 0 ? 1 : -1;
      inst.vectors.push_back(std::move(y));
    }
  }
  return inst;
}

double eval_plt(const PltInstance& inst, const Eigen::VectorXd& d) {
  if (d.size() != inst.dim) throw std::invalid_argument("plt: direction dimension mismatch");
  double best = -numkit::kInf;
  for (int i = 0; i < inst.clause_count(); ++i) {
    double s = 0.0;
    for (int j = 0; j < 3; ++j)
      s += std::max(inst.vectors[3 * i + j].cast<double>().dot(d), 0.0);
    best = std::max(best, -s);
  }
  return best;
}

double eval_nnt(const PltInstance& inst, const Eigen::VectorXd& u, const Eigen::VectorXd& w) {
  if (u.size() != static_cast<int>(inst.vectors.size()) || w.size() != inst.dim)
    throw std::invalid_argument("nnt: argument dimension mismatch");
  double best = -numkit::kInf;
  for (int i = 0; i < inst.clause_count(); ++i) {
    double s = 0.0;
    for (int j = 0; j < 3; ++j)
      s += u(3 * i + j) * std::max(inst.vectors[3 * i + j].cast<double>().dot(w), 0.0);
    best = std::max(best, s);
  }
  return best;
}

namespace {

bool stationary_exhaustive(const PltInstance& inst, double epsilon,
                           const numkit::SolverOptions& opt) {
  const int m = inst.dim;
  if (m > 20) throw guard_error("plt exhaustive: dimension above 20");
  if (!inst.is_reduction_form())
    throw std::invalid_argument("plt exhaustive: instance is not in reduction form");
  const int n = inst.clause_count();

  // (coordinate, sign) per vector
  std::vector<std::pair<int, int>> atoms(inst.vectors.size());
  for (size_t t = 0; t < inst.vectors.size(); ++t) {
    const auto& y = inst.vectors[t];
    for (int j = 0; j < m; ++j)
      if (y(j) != 0) atoms[t] = {j, y(j)};
  }

  if (epsilon == 0.0) {
    // the reduction argument makes the +-1 grid sufficient: f drops below
    // zero somewhere iff it does on the grid
    for (uint32_t mask = 0; mask < (1u << m); ++mask) {
      bool all_positive = true;
      for (int i = 0; i < n && all_positive; ++i) {
        int s = 0;
        for (int j = 0; j < 3; ++j) {
          const auto [coord, sign] = atoms[3 * i + j];
          const int dk = (mask >> coord) & 1u ? 1 : -1;
          if (sign * dk > 0) ++s;
        }
        all_positive = s > 0;
      }
      if (all_positive) return false;  // f(d) <= -1 on this grid point
    }
    return true;
  }

  // epsilon > 0: f <= 0 with f(0) = 0 forces the regular subdifferential at
  // the origin into {0}, so the test still reduces to f >= 0 everywhere;
  // minimize f on every coordinate orthant by LP and look for a negative cell
  for (uint32_t mask = 0; mask < (1u << m); ++mask) {
    numkit::LpProblem lp = numkit::LpProblem::with_free_vars(m + 1);
    lp.cost(m) = 1.0;
    for (int j = 0; j < m; ++j) {
      const bool pos = (mask >> j) & 1u;
      lp.var_lo(j) = pos ? 0.0 : -1.0;
      lp.var_hi(j) = pos ? 1.0 : 0.0;
    }
    lp.var_lo(m) = -3.0 * n - 1.0;
    lp.var_hi(m) = 1.0;
    for (int i = 0; i < n; ++i) {
      numkit::LpRow row;  // clause slope on this orthant, minus t
      row.a = Eigen::VectorXd::Zero(m + 1);
      for (int j = 0; j < 3; ++j) {
        const auto [coord, sign] = atoms[3 * i + j];
        const bool pos = (mask >> coord) & 1u;
        if ((sign > 0) == pos) row.a(coord) -= sign;
      }
      row.a(m) = -1.0;
      row.lo = -numkit::kInf;
      row.hi = 0.0;
      lp.rows.push_back(std::move(row));
    }
    const auto sol = numkit::solve_lp(lp, opt);
    if (sol.status != numkit::LpStatus::optimal)
      throw solver_error("plt orthant LP did not converge");
    if (sol.objective < -opt.margin_tol) return false;
  }
  return true;
}

bool stationary_certificate(const PltInstance& inst, const numkit::SolverOptions& opt) {
  const int n = inst.clause_count();
  if (n > 12) throw guard_error("plt certificate: more than 12 clauses");
  std::vector<int> pick(n, 0);
  while (true) {
    // feasibility of d with d^T y_{3i+pick_i} >= 1 for every clause
    numkit::LpProblem lp = numkit::LpProblem::with_free_vars(inst.dim);
    for (int i = 0; i < n; ++i) {
      numkit::LpRow row;
      row.a = inst.vectors[3 * i + pick[i]].cast<double>();
      row.lo = 1.0;
      row.hi = numkit::kInf;
      lp.rows.push_back(std::move(row));
    }
    const auto sol = numkit::solve_lp(lp, opt);
    if (sol.status == numkit::LpStatus::max_iter)
      throw solver_error("plt certificate LP did not converge");
    if (sol.status != numkit::LpStatus::infeasible) return false;  // witness found

    int at = n - 1;
    while (at >= 0 && pick[at] == 2) pick[at--] = 0;
    if (at < 0) break;
    ++pick[at];
  }
  return true;
}

}  // namespace

bool plt_stationary(const PltInstance& inst, double epsilon, PltMode mode,
                    const numkit::SolverOptions& opt) {
  inst.validate();
  if (epsilon < 0.0) throw std::invalid_argument("plt: epsilon must be nonnegative");
  if (mode == PltMode::exhaustive) return stationary_exhaustive(inst, epsilon, opt);
  return stationary_certificate(inst, opt);
}

bool brute_sat(const Cnf3& cnf) {
  cnf.validate();
  if (cnf.num_vars > 20) throw guard_error("brute sat: more than 20 variables");
  for (uint32_t mask = 0; mask < (1u << cnf.num_vars); ++mask) {
    bool ok = true;
    for (const auto& clause : cnf.clauses) {
      bool sat = false;
      for (const int lit : clause) {
        const bool val = (mask >> (std::abs(lit) - 1)) & 1u;
        if ((lit > 0) == val) { sat = true; break; }
      }
      if (!sat) { ok = false; break; }
    }
    if (ok) return true;
  }
  return false;
}

NntReport nnt_directional_check(const PltInstance& inst, int n_directions, uint64_t seed) {
  inst.validate();
  if (n_directions < 1) throw std::invalid_argument("nnt: need at least one direction");
  NntReport rep;
  rep.directions = n_directions;
  rep.seed = seed;
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> gauss(0.0, 1.0);
  const int nu = static_cast<int>(inst.vectors.size());
  const Eigen::VectorXd u0 = Eigen::VectorXd::Constant(nu, -1.0);
  const double t = 1e-8;
  for (int it = 0; it < n_directions; ++it) {
    Eigen::VectorXd du(nu), dw(inst.dim);
    for (int j = 0; j < nu; ++j) du(j) = gauss(rng);
    for (int j = 0; j < inst.dim; ++j) dw(j) = gauss(rng);
    const double nrm = std::sqrt(du.squaredNorm() + dw.squaredNorm());
    du /= nrm;
    dw /= nrm;
    const double quotient = eval_nnt(inst, u0 + t * du, t * dw) / t;
    rep.max_abs_error = std::max(rep.max_abs_error, std::abs(quotient - eval_plt(inst, dw)));
  }
  return rep;
}

AbsNormalForm plt_to_abs_normal(const PltInstance& inst) {
  inst.validate();
  const int m = inst.dim, n = inst.clause_count();
  const int s = 3 * n + (n - 1);
  AbsNormalForm anf;
  anf.Z = Eigen::MatrixXd::Zero(s, m);
  anf.L = Eigen::MatrixXd::Zero(s, s);
  for (int t = 0; t < 3 * n; ++t) anf.Z.row(t) = inst.vectors[t].cast<double>().transpose();

  // clause values q_i = -1/2 sum_j d^T y - 1/2 sum_j |z|, as rows over
  // (input, switch) coordinates
  Eigen::MatrixXd qd = Eigen::MatrixXd::Zero(n, m);
  Eigen::MatrixXd qp = Eigen::MatrixXd::Zero(n, s);
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < 3; ++j) {
      qd.row(i) -= 0.5 * inst.vectors[3 * i + j].cast<double>().transpose();
      qp(i, 3 * i + j) -= 0.5;
    }

  // running maximum M_t = max(M_{t-1}, q_t) through max(a,b) = (a+b)/2 + |a-b|/2
  Eigen::RowVectorXd md = qd.row(0);
  Eigen::RowVectorXd mp = qp.row(0);
  for (int t = 1; t < n; ++t) {
    const int sw = 3 * n + t - 1;
    anf.Z.row(sw) = md - qd.row(t);
    anf.L.row(sw) = mp - qp.row(t);
    md = 0.5 * (md + qd.row(t));
    mp = 0.5 * (mp + qp.row(t));
    mp(sw) += 0.5;
  }
  anf.a = md.transpose();
  anf.b = mp.transpose();
  anf.validate();
  return anf;
}

double eval_abs_linear(const AbsNormalForm& anf, const Eigen::VectorXd& x) {
  const int s = anf.switches();
  Eigen::VectorXd z(s);
  for (int i = 0; i < s; ++i) {
    double v = anf.Z.row(i).dot(x);
    for (int j = 0; j < i; ++j) v += anf.L(i, j) * std::abs(z(j));
    z(i) = v;
  }
  return anf.a.dot(x) + anf.b.dot(z.cwiseAbs());
}

bool anft_check(const AbsNormalForm& anf, const numkit::SolverOptions& opt) {
  anf.validate();
  const int s = anf.switches(), m = anf.inputs();
  if (s > 16) throw guard_error("anft: more than 16 switching variables");

  for (uint32_t mask = 0; mask < (1u << s); ++mask) {
    // V = (Diag(sigma) - L)^{-1} Z by forward substitution (unit-magnitude
    // diagonal, strictly lower L)
    Eigen::MatrixXd v(s, m);
    for (int i = 0; i < s; ++i) {
      const double sigma = (mask >> i) & 1u ? 1.0 : -1.0;
      Eigen::RowVectorXd row = anf.Z.row(i);
      for (int j = 0; j < i; ++j) row += anf.L(i, j) * v.row(j);
      v.row(i) = row / sigma;
    }
    const Eigen::VectorXd rhs = anf.a + v.transpose() * anf.b;

    // feasibility of mu >= 0 with V^T mu = rhs
    numkit::LpProblem lp;
    lp.cost = Eigen::VectorXd::Zero(s);
    lp.var_lo = Eigen::VectorXd::Zero(s);
    lp.var_hi = Eigen::VectorXd::Constant(s, numkit::kInf);
    for (int j = 0; j < m; ++j) {
      numkit::LpRow row;
      row.a = v.col(j);
      row.lo = row.hi = rhs(j);
      lp.rows.push_back(std::move(row));
    }
    const auto sol = numkit::solve_lp(lp, opt);
    if (sol.status == numkit::LpStatus::max_iter)
      throw solver_error("anft feasibility LP did not converge");
    if (sol.status == numkit::LpStatus::infeasible) return true;  // definite refuting signature
  }
  return false;
}

}  // namespace stattest::hardness
