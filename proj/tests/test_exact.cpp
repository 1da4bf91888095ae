#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <random>

#include "stattest/exact.hpp"
#include "stattest/oracle.hpp"
#include "support/instances.hpp"

using namespace stattest;
using exact::ExactTestResult;
using testsupport::Instance;

namespace {

Eigen::VectorXd vec(std::initializer_list<double> c) {
  Eigen::VectorXd x(c.size());
  int j = 0;
  for (const double t : c) x(j++) = t;
  return x;
}

Instance neg_abs_fixture() {
  Instance inst;
  inst.data = model::Dataset::make({vec({1.0}), vec({-1.0})}, {-1.0, -1.0});
  inst.loss = model::LossModel::scaled_identity();
  inst.net.units.push_back({1.0, vec({0.0})});
  return inst;
}

}  // namespace

TEST_CASE("exact Clarke test") {
  SUBCASE("absolute value at the kink") {
    const auto inst = testsupport::abs_value_fixture();
    const auto r = exact::etest_clarke(inst.net, inst.data, inst.loss);
    REQUIRE(r.status == ExactTestResult::Status::value);
    CHECK(r.epsilon == doctest::Approx(0.0).epsilon(1e-12));
    CHECK(r.units[0].u_gap == 0.0);
  }
  SUBCASE("absolute value off the kink matches the oracle") {
    auto inst = testsupport::abs_value_fixture();
    inst.net.units[0].w(0) = 0.3;
    const auto r = exact::etest_clarke(inst.net, inst.data, inst.loss);
    REQUIRE(r.status == ExactTestResult::Status::value);
    CHECK(r.units[0].u_gap == doctest::Approx(0.3));
    CHECK(r.units[0].w_dist == doctest::Approx(1.0));
    const double oracle_dist = oracle::clarke_oracle_distance(inst.net, inst.data, inst.loss);
    CHECK(r.epsilon == doctest::Approx(oracle_dist).epsilon(1e-9));
  }
  SUBCASE("dependent opposing ties report not-SQ") {
    Instance inst;
    inst.data = model::Dataset::make({vec({1.0}), vec({1.0})}, {1.0, -1.0});
    inst.loss = model::LossModel::scaled_identity();
    inst.net.units.push_back({1.0, vec({0.0})});
    const auto r = exact::etest_clarke(inst.net, inst.data, inst.loss);
    CHECK(r.status == ExactTestResult::Status::not_sq);
  }
  SUBCASE("minimizer realizes the reported distance") {
    std::mt19937_64 rng(71);
    int checked = 0;
    while (checked < 80) {
      const auto inst = testsupport::random_instance(rng);
      const auto r = exact::etest_clarke(inst.net, inst.data, inst.loss);
      if (r.status != ExactTestResult::Status::value) continue;
      ++checked;
      CHECK(r.minimizer->norm() == doctest::Approx(r.epsilon).epsilon(1e-9));
    }
  }
}

TEST_CASE("exact Frechet test") {
  SUBCASE("absolute value at the kink") {
    const auto inst = testsupport::abs_value_fixture();
    const auto r = exact::etest_frechet(inst.net, inst.data, inst.loss);
    REQUIRE(r.status == ExactTestResult::Status::value);
    CHECK(r.epsilon == doctest::Approx(0.0).epsilon(1e-12));
  }
  SUBCASE("negated absolute value is infinite") {
    const auto inst = neg_abs_fixture();
    const auto r = exact::etest_frechet(inst.net, inst.data, inst.loss);
    CHECK(r.status == ExactTestResult::Status::infinite);
  }
  SUBCASE("smooth points: both tests equal the gradient norm") {
    std::mt19937_64 rng(73);
    std::normal_distribution<double> gauss(0.0, 1.0);
    int checked = 0;
    while (checked < 60) {
      testsupport::InstanceConfig cfg;
      cfg.tie_prob = 0.0;
      const auto inst = testsupport::random_instance(rng, cfg);
      const auto rp = model::rho_and_partition(inst.net, inst.data, inst.loss);
      bool any_tie = false;
      for (const auto& u : rp.partition.units) any_tie |= !u.eq.empty();
      if (any_tie) continue;
      ++checked;
      const auto rc = exact::etest_clarke(inst.net, inst.data, inst.loss);
      const auto rf = exact::etest_frechet(inst.net, inst.data, inst.loss);
      REQUIRE(rc.status == ExactTestResult::Status::value);
      REQUIRE(rf.status == ExactTestResult::Status::value);
      CHECK(rc.epsilon == doctest::Approx(rf.epsilon).epsilon(1e-12));
      // gradient norm via central differences along coordinate directions
      Eigen::VectorXd grad(inst.net.param_count());
      for (int j = 0; j < grad.size(); ++j) {
        Eigen::VectorXd e = Eigen::VectorXd::Zero(grad.size());
        e(j) = 1.0;
        grad(j) = testsupport::central_difference(inst.net, inst.data, inst.loss, e);
      }
      CHECK(rc.epsilon == doctest::Approx(grad.norm()).epsilon(1e-6));
    }
  }
  SUBCASE("frechet dominates clarke when both are finite") {
    std::mt19937_64 rng(79);
    int checked = 0;
    while (checked < 100) {
      const auto inst = testsupport::random_instance(rng);
      const auto rc = exact::etest_clarke(inst.net, inst.data, inst.loss);
      const auto rf = exact::etest_frechet(inst.net, inst.data, inst.loss);
      if (rc.status != ExactTestResult::Status::value ||
          rf.status != ExactTestResult::Status::value)
        continue;
      ++checked;
      CHECK(rf.epsilon >= rc.epsilon - 1e-10);
    }
  }
  SUBCASE("under SQ the formula matches the brute-force oracle") {
    std::mt19937_64 rng(83);
    int checked = 0;
    while (checked < 150) {
      const auto inst = testsupport::random_instance(rng);
      const auto rc = exact::etest_clarke(inst.net, inst.data, inst.loss);
      if (rc.status != ExactTestResult::Status::value) continue;
      ++checked;
      const double oracle_dist = oracle::clarke_oracle_distance(inst.net, inst.data, inst.loss);
      CHECK(std::abs(rc.epsilon - oracle_dist) <= 1e-7);
    }
  }
  SUBCASE("without SQ the formula set strictly contains the true set") {
    // duplicated tied point with opposing slopes: the empirical loss is
    // identically zero, the formula set keeps a whole segment
    Instance inst;
    inst.data = model::Dataset::make({vec({1.0}), vec({1.0})}, {1.0, -1.0});
    inst.loss = model::LossModel::scaled_identity();
    inst.net.units.push_back({1.0, vec({0.0})});
    REQUIRE(exact::etest_clarke(inst.net, inst.data, inst.loss).status ==
            ExactTestResult::Status::not_sq);
    const auto subs = chain::build_subdiff_sets(inst.net, inst.data, inst.loss);
    const auto cells = oracle::enumerate_cells(inst.net, inst.data, inst.loss);
    Eigen::MatrixXd grads(inst.net.param_count(), cells.size());
    for (size_t c = 0; c < cells.size(); ++c)
      grads.col(c) = oracle::cell_gradient(inst.net, inst.data, inst.loss, cells[c]);
    // the formula vertex with only the positive-slope tie active is not a
    // convex combination of true limiting gradients
    Eigen::VectorXd vertex(2);
    vertex(0) = subs[0].u_component;
    vertex(1) = (subs[0].clarke.base + subs[0].clarke.generators[0])(0);
    CHECK(testsupport::hull_membership_gap(grads, vertex) > 1e-6);
  }
}
