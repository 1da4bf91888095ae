#include <algorithm>
#include <cmath>

#include "support/instances.hpp"

namespace testsupport {

using stattest::numkit::dot_ascending;

double dyadic(std::mt19937_64& rng) {
  std::uniform_int_distribution<int> mant(1, 8), expo(-3, 1), sign(0, 1);
  const double v = std::ldexp(static_cast<double>(mant(rng)), expo(rng));
  return sign(rng) ? v : -v;
}

Eigen::VectorXd integer_point(std::mt19937_64& rng, int dim) {
  std::uniform_int_distribution<int> coord(-3, 3);
  Eigen::VectorXd x(dim);
  do {
    for (int j = 0; j < dim; ++j) x(j) = coord(rng);
  } while (x.isZero(0.0));
  return x;
}

namespace {

// integer basis of x^perp: x_p e_j - x_j e_p for the pivot p, j != p
std::vector<Eigen::VectorXd> integer_perp_basis(const Eigen::VectorXd& x) {
  const int d = static_cast<int>(x.size());
  int p = 0;
  for (int j = 0; j < d; ++j)
    if (x(j) != 0.0) p = j;
  std::vector<Eigen::VectorXd> basis;
  for (int j = 0; j < d; ++j) {
    if (j == p) continue;
    Eigen::VectorXd v = Eigen::VectorXd::Zero(d);
    v(j) = x(p);
    v(p) = -x(j);
    basis.push_back(std::move(v));
  }
  return basis;
}

Eigen::VectorXd cross3(const Eigen::VectorXd& a, const Eigen::VectorXd& b) {
  Eigen::VectorXd c(3);
  c << a(1) * b(2) - a(2) * b(1), a(2) * b(0) - a(0) * b(2), a(0) * b(1) - a(1) * b(0);
  return c;
}

}  // namespace

Eigen::VectorXd tied_weight(std::mt19937_64& rng, const std::vector<Eigen::VectorXd>& targets,
                            int dim) {
  std::uniform_int_distribution<int> coef(-3, 3);
  const double scale = dyadic(rng);

  if (targets.empty()) {
    return scale * integer_point(rng, dim);
  }
  if (dim == 1) return Eigen::VectorXd::Zero(1);

  Eigen::VectorXd w = Eigen::VectorXd::Zero(dim);
  if (targets.size() >= 2 && dim == 3) {
    w = cross3(targets[0], targets[1]);
  }
  if (w.isZero(0.0)) {
    // single-target (or parallel targets) case: integer combination of the
    // coordinate-swap perp basis
    const auto basis = integer_perp_basis(targets[0]);
    for (int attempt = 0; attempt < 64 && w.isZero(0.0); ++attempt) {
      w.setZero();
      for (const auto& v : basis) w += static_cast<double>(coef(rng)) * v;
    }
    if (w.isZero(0.0)) w = basis.front();
  }
  return scale * w;
}

Instance random_instance(std::mt19937_64& rng, const InstanceConfig& cfg) {
  std::uniform_int_distribution<int> dd(cfg.dim_min, cfg.dim_max);
  std::uniform_int_distribution<int> nn(cfg.n_min, cfg.n_max);
  std::uniform_int_distribution<int> hh(cfg.h_min, cfg.h_max);
  std::uniform_real_distribution<double> unif(0.0, 1.0);
  std::uniform_int_distribution<int> lab(0, 3);
  const int d = dd(rng), n = nn(rng), h = hh(rng);

  Instance inst;
  std::vector<Eigen::VectorXd> pts;
  std::vector<double> labels;
  for (int i = 0; i < n; ++i) {
    pts.push_back(integer_point(rng, d));
    labels.push_back(std::vector<double>{-2.0, -1.0, 1.0, 2.0}[lab(rng)]);
  }
  inst.data = model::Dataset::make(pts, labels);

  inst.loss = (cfg.square_loss_allowed && unif(rng) < 0.5) ? model::LossModel::square()
                                                           : model::LossModel::scaled_identity();

  inst.net.units.resize(h);
  for (auto& unit : inst.net.units) {
    unit.u = unif(rng) < 0.1 ? 0.0 : dyadic(rng);
    if (unif(rng) < cfg.tie_prob) {
      std::vector<Eigen::VectorXd> targets;
      std::uniform_int_distribution<int> pick(0, n - 1);
      targets.push_back(pts[pick(rng)]);
      if (d == 3 && unif(rng) < 0.4) targets.push_back(pts[pick(rng)]);
      unit.w = tied_weight(rng, targets, d);
    } else {
      unit.w = tied_weight(rng, {}, d);
    }
  }
  return inst;
}

Instance abs_value_fixture(int dim) {
  Instance inst;
  Eigen::VectorXd x = Eigen::VectorXd::Zero(dim);
  x(0) = 1.0;
  inst.data = model::Dataset::make({x, -x}, {0.0, 0.0});
  inst.loss = model::LossModel::identity();
  inst.net.units.push_back({1.0, Eigen::VectorXd::Zero(dim)});
  return inst;
}

Instance sq_not_liad_fixture() {
  Instance inst;
  auto v = [](std::initializer_list<double> c) {
    Eigen::VectorXd x(c.size());
    int j = 0;
    for (const double t : c) x(j++) = t;
    return x;
  };
  inst.data = model::Dataset::make(
      {v({0, 2, 0, 1}), v({2, 0, 2, 1}), v({1, 1, 1, 1}), v({1, 0, -1, 1})},
      {1.0, 1.0, 1.0, -1.0});
  inst.loss = model::LossModel::scaled_identity();
  inst.net.units.push_back({1.0, Eigen::VectorXd::Zero(4)});
  return inst;
}

Instance liad_not_gp_fixture() {
  Instance inst;
  auto v = [](std::initializer_list<double> c) {
    Eigen::VectorXd x(c.size());
    int j = 0;
    for (const double t : c) x(j++) = t;
    return x;
  };
  inst.data = model::Dataset::make({v({0, -2, 1}), v({0, -1, 1}), v({1, 0, 1}), v({0, 1, 1})},
                                   {1.0, 1.0, 1.0, -1.0});
  inst.loss = model::LossModel::scaled_identity();
  Eigen::VectorXd w(3);
  w << 1, 1, -1;
  inst.net.units.push_back({1.0, w});
  return inst;
}

Instance non_sq_fixture(std::mt19937_64& rng, int dim) {
  Instance inst;
  std::uniform_int_distribution<int> mult(1, 2);
  const Eigen::VectorXd x = integer_point(rng, dim);
  const Eigen::VectorXd x2 = static_cast<double>(mult(rng)) * x;
  std::vector<Eigen::VectorXd> pts{x, x2};
  std::vector<double> labels{1.0, -1.0};
  if (dim >= 2) {
    pts.push_back(integer_point(rng, dim));
    labels.push_back(2.0);
  }
  inst.data = model::Dataset::make(pts, labels);
  inst.loss = model::LossModel::scaled_identity();
  inst.net.units.push_back({1.0, tied_weight(rng, {x}, dim)});
  return inst;
}

StationaryFixture stationary_fixture(std::mt19937_64& rng, int dim, bool with_zero_u) {
  StationaryFixture fix;
  std::uniform_int_distribution<int> mant(1, 8);

  // tie target with a small pivot coordinate so snapping always lands
  Eigen::VectorXd x_tie;
  auto has_small_pivot = [](const Eigen::VectorXd& x) {
    for (int j = 0; j < x.size(); ++j)
      if (std::abs(x(j)) == 1.0 || std::abs(x(j)) == 2.0) return true;
    return false;
  };
  do {
    x_tie = integer_point(rng, dim);
  } while (!has_small_pivot(x_tie));

  Eigen::VectorXd w1;
  do {
    w1 = tied_weight(rng, {x_tie}, dim);
  } while (w1.isZero(0.0));

  Instance inst;
  inst.loss = model::LossModel::square();
  inst.net.units.push_back({std::abs(dyadic(rng)), w1});
  if (with_zero_u) {
    Eigen::VectorXd w2;
    do {
      w2 = tied_weight(rng, {x_tie}, dim);
    } while (w2.isZero(0.0));
    inst.net.units.push_back({0.0, w2});
  }

  Eigen::VectorXd x_pair;
  auto clear_of_ties = [&](const Eigen::VectorXd& x) {
    for (const auto& unit : inst.net.units)
      if (dot_ascending(unit.w, x) == 0.0) return false;
    return true;
  };
  do {
    x_pair = integer_point(rng, dim);
  } while (!clear_of_ties(x_pair));

  // square loss with dyadic data keeps every slope exact: the duplicated
  // pair carries slopes -c and +c around its own output, the tied sample a
  // positive slope r, so the point is exactly stationary for both tests
  double t_pair = 0.0;
  for (const auto& unit : inst.net.units)
    t_pair += unit.u * std::max(dot_ascending(unit.w, x_pair), 0.0);
  const double c = std::ldexp(static_cast<double>(mant(rng)), -3);  // in (0, 1]
  const double r = std::ldexp(static_cast<double>(mant(rng)), -3);
  const double t_tie = 0.0;  // every unit is tied on x_tie

  inst.data = model::Dataset::make({x_tie, x_pair, x_pair},
                                   {t_tie - r, t_pair + c, t_pair - c});

  fix.min_clear_dot = stattest::numkit::kInf;
  for (const auto& unit : inst.net.units)
    for (const auto& x : inst.data.points) {
      const double dot = dot_ascending(unit.w, x);
      if (dot != 0.0) fix.min_clear_dot = std::min(fix.min_clear_dot, std::abs(dot));
    }
  fix.instance = std::move(inst);
  return fix;
}

double grid_search_distance(const numkit::SegmentSumSet& s, double step) {
  const int n = static_cast<int>(s.generators.size());
  const int levels = static_cast<int>(std::lround(1.0 / step)) + 1;
  std::vector<int> idx(n, 0);
  double best = stattest::numkit::kInf;
  while (true) {
    Eigen::VectorXd p = s.base;
    for (int j = 0; j < n; ++j) p += std::min(1.0, idx[j] * step) * s.generators[j];
    best = std::min(best, p.norm());
    int at = n - 1;
    while (at >= 0 && idx[at] == levels - 1) idx[at--] = 0;
    if (at < 0) break;
    ++idx[at];
  }
  return best;
}

double hull_membership_gap(const Eigen::MatrixXd& points, const Eigen::VectorXd& v) {
  const int d = static_cast<int>(points.rows());
  const int n = static_cast<int>(points.cols());
  // variables (lambda, t): min t  s.t.  -t <= (P lambda - v)_j <= t,
  // sum lambda = 1, lambda >= 0
  numkit::LpProblem lp;
  lp.cost = Eigen::VectorXd::Zero(n + 1);
  lp.cost(n) = 1.0;
  lp.var_lo = Eigen::VectorXd::Zero(n + 1);
  lp.var_hi = Eigen::VectorXd::Constant(n + 1, stattest::numkit::kInf);
  for (int j = 0; j < n; ++j) lp.var_hi(j) = 1.0;
  {
    numkit::LpRow sum;
    sum.a = Eigen::VectorXd::Zero(n + 1);
    sum.a.head(n).setOnes();
    sum.lo = sum.hi = 1.0;
    lp.rows.push_back(std::move(sum));
  }
  for (int j = 0; j < d; ++j) {
    numkit::LpRow up, dn;
    up.a = Eigen::VectorXd::Zero(n + 1);
    up.a.head(n) = points.row(j).transpose();
    up.a(n) = -1.0;
    up.lo = -stattest::numkit::kInf;
    up.hi = v(j);
    dn.a = Eigen::VectorXd::Zero(n + 1);
    dn.a.head(n) = points.row(j).transpose();
    dn.a(n) = 1.0;
    dn.lo = v(j);
    dn.hi = stattest::numkit::kInf;
    lp.rows.push_back(std::move(up));
    lp.rows.push_back(std::move(dn));
  }
  const auto sol = numkit::solve_lp(lp);
  if (sol.status != numkit::LpStatus::optimal)
    throw stattest::solver_error("membership LP did not converge");
  return sol.objective;
}

namespace {

bool dpll_rec(std::vector<std::vector<int>> clauses, std::vector<int>& assign) {
  // unit propagation
  bool changed = true;
  while (changed) {
    changed = false;
    for (auto& clause : clauses) {
      std::vector<int> open;
      bool sat = false;
      for (const int lit : clause) {
        const int v = assign[std::abs(lit)];
        if (v == 0) open.push_back(lit);
        else if ((lit > 0) == (v > 0)) sat = true;
      }
      if (sat) continue;
      if (open.empty()) return false;
      if (open.size() == 1) {
        assign[std::abs(open[0])] = open[0] > 0 ? 1 : -1;
        changed = true;
      }
    }
  }
  int var = 0;
  for (const auto& clause : clauses) {
    bool sat = false;
    for (const int lit : clause)
      if (assign[std::abs(lit)] != 0 && (lit > 0) == (assign[std::abs(lit)] > 0)) sat = true;
    if (!sat)
      for (const int lit : clause)
        if (assign[std::abs(lit)] == 0) { var = std::abs(lit); break; }
    if (var) break;
  }
  if (var == 0) {
    for (const auto& clause : clauses) {
      bool sat = false;
      for (const int lit : clause)
        if (assign[std::abs(lit)] != 0 && (lit > 0) == (assign[std::abs(lit)] > 0)) sat = true;
      if (!sat) return false;
    }
    return true;
  }
  for (const int v : {1, -1}) {
    auto saved = assign;
    assign[var] = v;
    if (dpll_rec(clauses, assign)) return true;
    assign = saved;
  }
  return false;
}

}  // namespace

bool dpll_sat(const hardness::Cnf3& cnf) {
  std::vector<int> assign(cnf.num_vars + 1, 0);
  return dpll_rec(cnf.clauses, assign);
}

hardness::Cnf3 random_cnf(std::mt19937_64& rng, int max_vars, int max_clauses) {
  std::uniform_int_distribution<int> mm(1, max_vars), nn(1, max_clauses);
  hardness::Cnf3 cnf;
  cnf.num_vars = mm(rng);
  const int n = nn(rng);
  std::uniform_int_distribution<int> len(1, 3), var(1, cnf.num_vars), sgn(0, 1);
  for (int i = 0; i < n; ++i) {
    const int k = std::min(len(rng), cnf.num_vars);
    std::vector<int> vars;
    while (static_cast<int>(vars.size()) < k) {
      const int v = var(rng);
      if (std::find(vars.begin(), vars.end(), v) == vars.end()) vars.push_back(v);
    }
    std::vector<int> clause;
    for (const int v : vars) clause.push_back(sgn(rng) ? v : -v);
    cnf.clauses.push_back(std::move(clause));
  }
  return cnf;
}

double central_difference(const model::Network& net, const model::Dataset& data,
                          const model::LossModel& loss, const Eigen::VectorXd& dir) {
  const Eigen::VectorXd x0 = net.pack();
  auto fval = [&](double t) {
    return model::eval_loss(model::Network::unpack(x0 + t * dir, net.dim()), data, loss);
  };
  auto diff = [&](double h) { return (fval(h) - fval(-h)) / (2.0 * h); };
  const double h = 1e-4;
  return (4.0 * diff(h / 2.0) - diff(h)) / 3.0;
}

}  // namespace testsupport
