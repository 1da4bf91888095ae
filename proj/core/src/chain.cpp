#include <cmath>

#include "stattest/chain.hpp"

namespace stattest::chain {

namespace {

Eigen::MatrixXd columns_of(const model::Dataset& data, const std::vector<int>& idx) {
  Eigen::MatrixXd m(data.dim(), idx.size());
  for (size_t t = 0; t < idx.size(); ++t) m.col(t) = data.points[idx[t]];
  return m;
}

// Enumerates the strict sign patterns over tied_neg realizable by some
// direction, extending one tie at a time and pruning unrealizable prefixes.
void realizable_patterns(const model::Dataset& data, const std::vector<int>& tied_neg,
                         const numkit::SolverOptions& opt, std::vector<numkit::StrictRow>& rows,
                         std::vector<uint8_t>& bits, std::vector<std::vector<uint8_t>>& out) {
  const size_t t = bits.size();
  if (t == tied_neg.size()) {
    out.push_back(bits);
    return;
  }
  for (const uint8_t bit : {uint8_t{0}, uint8_t{1}}) {
    rows.push_back({data.points[tied_neg[t]], bit != 0});
    const auto feas = numkit::lp_strict_feasible(rows, {}, opt);
    if (feas.report.status == numkit::SolveStatus::max_iter)
      throw solver_error("limiting pattern feasibility LP did not converge");
    if (feas.feasible) {
      bits.push_back(bit);
      realizable_patterns(data, tied_neg, opt, rows, bits, out);
      bits.pop_back();
    }
    rows.pop_back();
  }
}

}  // namespace

SqReport check_sq(const model::Network& net, const model::Dataset& data,
                  const model::LossModel& loss, double rel_tol) {
  const auto rp = model::rho_and_partition(net, data, loss);
  SqReport report;
  report.units.resize(net.width());
  for (int k = 0; k < net.width(); ++k) {
    auto& ur = report.units[k];
    const auto& plus = rp.tied_nonneg[k];
    const auto& minus = rp.tied_neg[k];
    ur.rank_nonneg = numkit::rank_with_tolerance(columns_of(data, plus), rel_tol);
    ur.rank_neg = numkit::rank_with_tolerance(columns_of(data, minus), rel_tol);
    std::vector<int> joint = plus;
    joint.insert(joint.end(), minus.begin(), minus.end());
    ur.rank_joint = numkit::rank_with_tolerance(columns_of(data, joint), rel_tol);
    ur.sq = (ur.rank_joint == ur.rank_nonneg + ur.rank_neg);
    report.overall = report.overall && ur.sq;
  }
  return report;
}

std::vector<UnitSubdiff> build_subdiff_sets(const model::Network& net,
                                            const model::Dataset& data,
                                            const model::LossModel& loss,
                                            const numkit::SolverOptions& opt,
                                            bool include_limiting) {
  const auto rp = model::rho_and_partition(net, data, loss);
  std::vector<UnitSubdiff> subs(net.width());

  for (int k = 0; k < net.width(); ++k) {
    const double u = net.units[k].u;
    auto& sub = subs[k];

    double ucomp = 0.0;
    for (int i = 0; i < data.size(); ++i)
      ucomp += rp.rho(i) * std::max(net.units[k].w.dot(data.points[i]), 0.0);
    sub.u_component = ucomp;

    Eigen::VectorXd base = Eigen::VectorXd::Zero(data.dim());
    for (const int i : rp.partition.units[k].greater) base += u * rp.rho(i) * data.points[i];

    sub.clarke.base = base;
    for (const int j : rp.tied_nonneg[k]) sub.clarke.generators.push_back(u * rp.rho(j) * data.points[j]);
    for (const int j : rp.tied_neg[k]) sub.clarke.generators.push_back(u * rp.rho(j) * data.points[j]);

    if (rp.tied_neg[k].empty()) {
      numkit::SegmentSumSet fre;
      fre.base = base;
      for (const int j : rp.tied_nonneg[k]) fre.generators.push_back(u * rp.rho(j) * data.points[j]);
      sub.frechet = std::move(fre);
    }

    if (!include_limiting) continue;

    std::vector<std::vector<uint8_t>> patterns;
    if (rp.tied_neg[k].empty()) {
      patterns.push_back({});
    } else {
      std::vector<numkit::StrictRow> rows;
      std::vector<uint8_t> bits;
      realizable_patterns(data, rp.tied_neg[k], opt, rows, bits, patterns);
    }
    for (const auto& bits : patterns) {
      numkit::SegmentSumSet member;
      member.base = base;
      for (size_t t = 0; t < bits.size(); ++t)
        if (bits[t]) member.base += u * rp.rho(rp.tied_neg[k][t]) * data.points[rp.tied_neg[k][t]];
      for (const int j : rp.tied_nonneg[k])
        member.generators.push_back(u * rp.rho(j) * data.points[j]);
      sub.limiting.push_back(std::move(member));
      sub.limiting_signs.push_back(bits);
    }
  }
  return subs;
}

RegularityReport check_regularities(const model::Network& net, const model::Dataset& data,
                                    const model::LossModel& loss,
                                    const numkit::SolverOptions& opt, long long max_subsets) {
  const auto rp = model::rho_and_partition(net, data, loss);
  const int n = data.size(), d = data.dim(), h = net.width();
  RegularityReport rep;

  // general position: every d-subset of the data spans R^d (trivially true
  // when fewer than d points exist)
  if (n < d) {
    rep.general_position = true;
  } else {
    long long count = 1;
    for (int t = 1; t <= d; ++t) {
      count = count * (n - t + 1) / t;
      if (count > max_subsets) throw guard_error("general position: too many d-subsets");
    }
    rep.general_position = true;
    std::vector<int> pick(d);
    for (int t = 0; t < d; ++t) pick[t] = t;
    while (true) {
      if (numkit::rank_with_tolerance(columns_of(data, pick), opt.rank_rel_tol) < d) {
        rep.general_position = false;
        break;
      }
      int t = d - 1;
      while (t >= 0 && pick[t] == n - d + t) --t;
      if (t < 0) break;
      ++pick[t];
      for (int s = t + 1; s < d; ++s) pick[s] = pick[s - 1] + 1;
    }
  }

  // LIAD: tied data per unit linearly independent
  rep.liad = true;
  for (int k = 0; k < h && rep.liad; ++k) {
    const auto& eq = rp.partition.units[k].eq;
    if (eq.empty()) continue;
    if (static_cast<int>(eq.size()) > d ||
        numkit::rank_with_tolerance(columns_of(data, eq), opt.rank_rel_tol) <
            static_cast<int>(eq.size()))
      rep.liad = false;
  }

  // LIKQ through the stacked tie rows in the full parameter space: the row
  // of tie (k, i) carries x_i in unit k's weight block and zeros elsewhere
  {
    std::vector<std::pair<int, int>> ties;
    for (int k = 0; k < h; ++k)
      for (const int i : rp.partition.units[k].eq) ties.push_back({k, i});
    if (ties.empty()) {
      rep.likq = true;
    } else {
      Eigen::MatrixXd rows = Eigen::MatrixXd::Zero(ties.size(), h * (d + 1));
      for (size_t t = 0; t < ties.size(); ++t) {
        const auto [k, i] = ties[t];
        rows.block(t, k * (d + 1) + 1, 1, d) = data.points[i].transpose();
      }
      rep.likq = numkit::rank_with_tolerance(rows, opt.rank_rel_tol) ==
                 static_cast<int>(ties.size());
    }
  }

  rep.sq = check_sq(net, data, loss, opt.rank_rel_tol).overall;
  return rep;
}

}  // namespace stattest::chain
