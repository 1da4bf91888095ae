#include <cmath>

#include "stattest/exact.hpp"

namespace stattest::exact {

namespace {

ExactTestResult run(TestKind kind, const model::Network& net, const model::Dataset& data,
                    const model::LossModel& loss, const numkit::SolverOptions& opt) {
  ExactTestResult res;
  res.sq = chain::check_sq(net, data, loss, opt.rank_rel_tol);
  if (!res.sq.overall) {
    res.status = ExactTestResult::Status::not_sq;
    return res;
  }
  const auto subs = chain::build_subdiff_sets(net, data, loss, opt, /*include_limiting=*/false);

  if (kind == TestKind::frechet) {
    for (const auto& sub : subs) {
      if (!sub.frechet.has_value()) {
        res.status = ExactTestResult::Status::infinite;
        return res;
      }
    }
  }

  const int d = data.dim();
  Eigen::VectorXd minimizer(net.param_count());
  double sum_sq = 0.0;
  res.units.resize(subs.size());
  for (size_t k = 0; k < subs.size(); ++k) {
    const numkit::SegmentSumSet& set =
        kind == TestKind::clarke ? subs[k].clarke : *subs[k].frechet;
    const auto ls = numkit::box_ls_distance(set, opt);
    if (ls.report.status != numkit::SolveStatus::optimal)
      throw solver_error("unit distance QP did not converge");
    res.units[k].u_gap = std::abs(subs[k].u_component);
    res.units[k].w_dist = ls.distance;
    sum_sq += res.units[k].u_gap * res.units[k].u_gap + ls.distance * ls.distance;
    const int at = static_cast<int>(k) * (d + 1);
    minimizer(at) = subs[k].u_component;
    minimizer.segment(at + 1, d) = set.point_at(ls.minimizer);
  }
  res.status = ExactTestResult::Status::value;
  res.epsilon = std::sqrt(sum_sq);
  res.minimizer = std::move(minimizer);
  return res;
}

}  // namespace

ExactTestResult etest_clarke(const model::Network& net, const model::Dataset& data,
                             const model::LossModel& loss, const numkit::SolverOptions& opt) {
  return run(TestKind::clarke, net, data, loss, opt);
}

ExactTestResult etest_frechet(const model::Network& net, const model::Dataset& data,
                              const model::LossModel& loss, const numkit::SolverOptions& opt) {
  return run(TestKind::frechet, net, data, loss, opt);
}

ExactTestResult etest(TestKind kind, const model::Network& net, const model::Dataset& data,
                      const model::LossModel& loss, const numkit::SolverOptions& opt) {
  return run(kind, net, data, loss, opt);
}

}  // namespace stattest::exact
