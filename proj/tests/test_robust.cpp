#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <random>

#include "stattest/robust.hpp"
#include "support/instances.hpp"

using namespace stattest;
using testsupport::Instance;

namespace {

Eigen::VectorXd vec(std::initializer_list<double> c) {
  Eigen::VectorXd x(c.size());
  int j = 0;
  for (const double t : c) x(j++) = t;
  return x;
}

}  // namespace

TEST_CASE("constant bundle") {
  SUBCASE("unit-scale arithmetic") {
    const auto data = model::Dataset::make({vec({1.0})}, {1.0});
    const auto loss = model::LossModel::square();  // grad_lip = 1
    const auto b = robust::constants(data, loss, /*norm_bound=*/1.0, /*width=*/1);
    CHECK(b.clarke.c1 == 3.0);
    CHECK(b.clarke.c2 == 3.0);
    CHECK(b.clarke.c3 == 2.0);
    CHECK(b.clarke.c4 == 5.0);
    CHECK(b.clarke.c5 == 4.0);
    CHECK(b.clarke.c_mu == 9.0);
    CHECK(b.frechet.c1 == 4.0);
    CHECK(b.frechet.c_mu == doctest::Approx(4.0 + 2.0 + 4.0 + 2.0));
    CHECK(b.c_u == 5.0);
  }
  SUBCASE("identity loss zeroes the curvature") {
    const auto data = model::Dataset::make({vec({1.0, 2.0})}, {1.0});
    const auto b = robust::constants(data, model::LossModel::identity(), 2.0, 3);
    CHECK(b.clarke.c_mu == 0.0);
    CHECK(b.frechet.c_mu == 0.0);
    CHECK(b.c_u == 0.0);
  }
  SUBCASE("all ties give infinite separation") {
    const auto inst = testsupport::abs_value_fixture();
    const auto sep = robust::separation(inst.net, inst.data, inst.loss);
    CHECK(std::isinf(sep.c_tau_clarke));
  }
  SUBCASE("separation at a reference point") {
    std::mt19937_64 rng(3);
    const auto fix = testsupport::stationary_fixture(rng, 2);
    const auto sep = robust::separation(fix.instance.net, fix.instance.data, fix.instance.loss);
    CHECK(sep.c_tau_clarke ==
          doctest::Approx(fix.min_clear_dot / (4.0 * fix.instance.data.radius())));
    // square loss: the outer-weight term is finite and conservative by a
    // factor of four against the definition variant
    CHECK(sep.c_tau_frechet > 0.0);
    CHECK(sep.c_tau_frechet <= sep.c_tau_clarke);
    CHECK(sep.c_tau_frechet_definition >= sep.c_tau_frechet);
  }
}

TEST_CASE("tie snapping") {
  std::mt19937_64 rng(5);
  std::normal_distribution<double> gauss(0.0, 1.0);
  SUBCASE("single generic row") {
    int exact = 0;
    for (int t = 0; t < 200; ++t) {
      const int d = 3;
      Eigen::VectorXd x = testsupport::integer_point(rng, d);
      Eigen::VectorXd w(d);
      for (int j = 0; j < d; ++j) w(j) = gauss(rng);
      // make w nearly orthogonal, then snap
      w -= x * (numkit::dot_ascending(x, w) / x.squaredNorm());
      const Eigen::VectorXd before = w;
      if (robust::snap_ties(w, {x})) ++exact;
      CHECK((w - before).cwiseAbs().maxCoeff() <= 1e-12);
    }
    CHECK(exact == 200);
  }
  SUBCASE("two rows with distinct pivots") {
    int exact = 0, total = 0;
    while (total < 100) {
      Eigen::VectorXd x1 = testsupport::integer_point(rng, 3);
      Eigen::VectorXd x2 = testsupport::integer_point(rng, 3);
      Eigen::MatrixXd joint(2, 3);
      joint << x1.transpose(), x2.transpose();
      if (numkit::rank_with_tolerance(joint, 1e-9) < 2) continue;
      ++total;
      Eigen::VectorXd w(3);
      for (int j = 0; j < 3; ++j) w(j) = gauss(rng);
      // project near the intersection first
      Eigen::CompleteOrthogonalDecomposition<Eigen::MatrixXd> cod(joint);
      w -= cod.solve(joint * w);
      if (robust::snap_ties(w, {x1, x2})) ++exact;
    }
    CHECK(exact >= 90);  // generic row pairs can refuse; the fixtures avoid that
  }
}

TEST_CASE("Clarke rounding") {
  SUBCASE("near-tie is pinned to the hyperplane exactly") {
    // threshold R*delta = 0.2 catches dot 0.1
    const auto data = model::Dataset::make({vec({1.0, 0.0})}, {1.0});
    model::Network net;
    net.units.push_back({1.0, vec({0.1, 0.9})});
    const auto r = robust::rnd_clarke(net, 0.2, data);
    REQUIRE(r.feasible);
    CHECK(r.net.units[0].w == vec({0.0, 0.9}));
    CHECK(r.ties_exact);
    CHECK(r.ties[0] == std::vector<int>{0});
  }
  SUBCASE("clear activation is untouched") {
    const auto data = model::Dataset::make({vec({1.0, 0.0})}, {1.0});
    model::Network net;
    net.units.push_back({1.0, vec({0.5, -0.2})});
    const auto r = robust::rnd_clarke(net, 0.2, data);
    REQUIRE(r.feasible);
    CHECK(r.net.units[0].w == net.units[0].w);
  }
  SUBCASE("borderline activation is pushed past the margin") {
    const auto data = model::Dataset::make({vec({1.0, 0.0})}, {1.0});
    model::Network net;
    net.units.push_back({1.0, vec({0.3, 0.7})});
    const auto r = robust::rnd_clarke(net, 0.2, data);
    REQUIRE(r.feasible);
    CHECK(r.net.units[0].w(0) == doctest::Approx(0.4));
    CHECK(r.net.units[0].w(1) == doctest::Approx(0.7));
  }
  SUBCASE("outer weights pass through") {
    std::mt19937_64 rng(7);
    const auto inst = testsupport::random_instance(rng);
    const auto r = robust::rnd_clarke(inst.net, 0.25, inst.data);
    if (r.feasible)
      for (int k = 0; k < inst.net.width(); ++k)
        CHECK(r.net.units[k].u == inst.net.units[k].u);
  }
}

TEST_CASE("Frechet rounding outer-weight rule") {
  const auto loss = model::LossModel::square();
  SUBCASE("tiny outer weight with a tie is zeroed") {
    const auto data = model::Dataset::make({vec({1.0, 0.0}), vec({0.0, 1.0})}, {1.0, 1.0});
    model::Network net;
    net.units.push_back({1e-6, vec({0.0, 0.5})});  // exact tie on x1
    const auto r = robust::rnd_frechet(net, 0.01, data, loss);
    REQUIRE(r.feasible);
    CHECK(r.net.units[0].u == 0.0);
  }
  SUBCASE("no ties leaves the outer weight alone") {
    const auto data = model::Dataset::make({vec({1.0, 0.0}), vec({0.0, 1.0})}, {1.0, 1.0});
    model::Network net;
    net.units.push_back({1e-6, vec({0.5, 0.5})});
    const auto r = robust::rnd_frechet(net, 0.01, data, loss);
    REQUIRE(r.feasible);
    CHECK(r.net.units[0].u == 1e-6);
  }
  SUBCASE("large tied slope survives") {
    // u*rho = 5 at the tie; the threshold 2*c_u*delta stays below it
    const auto d2 = model::Dataset::make({vec({1.0, 0.0})}, {-5.0});
    model::Network net;
    net.units.push_back({1.0, vec({0.0, 1.0})});
    const double delta = 1e-4;
    const auto b = robust::constants(d2, loss, net.norm() + delta, 1);
    REQUIRE(5.0 > 2.0 * b.c_u * delta);
    const auto r = robust::rnd_frechet(net, delta, d2, loss);
    REQUIRE(r.feasible);
    CHECK(r.net.units[0].u == 1.0);
  }
}

TEST_CASE("robust test") {
  SUBCASE("distance guard fires when rounding moves every unit") {
    // two units with dots just past R*delta: each weight must travel about
    // delta to reach the 2R*delta margin, and two such moves stack past delta
    const auto data = model::Dataset::make({vec({3.0, 0.0})}, {1.0});
    const double delta = 0.1;
    model::Network net;
    net.units.push_back({1.0, vec({0.101, 0.3})});   // dot 0.303, barely clear
    net.units.push_back({1.0, vec({0.101, -0.2})});  // moves (0.6-0.303)/3 each
    const auto r = robust::rtest(exact::TestKind::clarke, net, delta, data,
                                 model::LossModel::square());
    CHECK(r.status == robust::RobustResult::Status::infinite);
    CHECK(r.reason == robust::RobustResult::InfiniteReason::moved_too_far);
  }
  SUBCASE("exact stationary point certifies zero at identity rounding") {
    std::mt19937_64 rng(11);
    for (int t = 0; t < 30; ++t) {
      const auto fix = testsupport::stationary_fixture(rng, 2 + (t % 2));
      const auto& inst = fix.instance;
      const double delta = 0.9 * fix.min_clear_dot / (2.0 * inst.data.radius());
      const auto r =
          robust::rtest(exact::TestKind::clarke, inst.net, delta, inst.data, inst.loss);
      REQUIRE(r.status == robust::RobustResult::Status::value);
      CHECK(r.rounded->pack() == inst.net.pack());
      CHECK(r.epsilon == 0.0);
    }
  }
  SUBCASE("absolute value near the kink certifies (0, delta)") {
    auto inst = testsupport::abs_value_fixture();
    inst.net.units[0].w(0) = 0.1;
    const auto r = robust::rtest(exact::TestKind::clarke, inst.net, 0.2, inst.data, inst.loss);
    REQUIRE(r.status == robust::RobustResult::Status::value);
    CHECK(r.rounded->units[0].w(0) == 0.0);
    CHECK(r.epsilon == 0.0);
    CHECK(r.distance_moved == doctest::Approx(0.1));
  }
  SUBCASE("finite values re-verify exactly on the rounded point") {
    std::mt19937_64 rng(13);
    std::normal_distribution<double> gauss(0.0, 1.0);
    int finite = 0;
    while (finite < 60) {
      const auto fix = testsupport::stationary_fixture(rng, 2);
      const auto& inst = fix.instance;
      const double delta = std::min(1.0, fix.min_clear_dot / (4.0 * inst.data.radius()));
      Eigen::VectorXd noise(inst.net.param_count());
      for (int j = 0; j < noise.size(); ++j) noise(j) = gauss(rng);
      noise *= (delta / 2.0) / noise.norm();
      const auto moved = model::Network::unpack(inst.net.pack() + noise, inst.net.dim());
      const auto r = robust::rtest(exact::TestKind::clarke, moved, delta, inst.data, inst.loss);
      if (r.status != robust::RobustResult::Status::value) continue;
      ++finite;
      CHECK(r.distance_moved <= delta);
      const auto again = exact::etest_clarke(*r.rounded, inst.data, inst.loss);
      REQUIRE(again.status == exact::ExactTestResult::Status::value);
      CHECK(again.epsilon == r.epsilon);  // bitwise: same deterministic path
    }
  }
}

TEST_CASE("pattern identification within the separation radius") {
  std::mt19937_64 rng(17);
  std::normal_distribution<double> gauss(0.0, 1.0);
  for (int t = 0; t < 60; ++t) {
    const auto fix = testsupport::stationary_fixture(rng, 2 + (t % 2), t % 3 == 0);
    const auto& inst = fix.instance;
    const auto sep = robust::separation(inst.net, inst.data, inst.loss);
    const double delta = std::min(sep.c_tau_clarke, 1.0);
    Eigen::VectorXd noise(inst.net.param_count());
    for (int j = 0; j < noise.size(); ++j) noise(j) = gauss(rng);
    noise *= (delta / 2.0) / noise.norm();
    const auto moved = model::Network::unpack(inst.net.pack() + noise, inst.net.dim());
    const auto rounded = robust::rnd_clarke(moved, delta, inst.data);
    REQUIRE(rounded.feasible);
    REQUIRE(rounded.ties_exact);
    const auto ref = model::rho_and_partition(inst.net, inst.data, inst.loss);
    const auto got = model::rho_and_partition(rounded.net, inst.data, inst.loss);
    for (int k = 0; k < inst.net.width(); ++k) {
      CHECK(got.partition.units[k].eq == ref.partition.units[k].eq);
      CHECK(got.partition.units[k].less == ref.partition.units[k].less);
      CHECK(got.partition.units[k].greater == ref.partition.units[k].greater);
    }
  }
}

TEST_CASE("certified bound epsilon + c_mu * delta") {
  std::mt19937_64 rng(19);
  std::normal_distribution<double> gauss(0.0, 1.0);
  int tested = 0;
  while (tested < 40) {
    const auto fix = testsupport::stationary_fixture(rng, 2);
    const Instance& inst = fix.instance;
    const auto sep = robust::separation(inst.net, inst.data, inst.loss);
    const double delta = std::min(sep.c_tau_clarke, 1.0);
    Eigen::VectorXd noise(inst.net.param_count());
    for (int j = 0; j < noise.size(); ++j) noise(j) = gauss(rng);
    noise *= (delta / 2.0) / noise.norm();
    const auto moved = model::Network::unpack(inst.net.pack() + noise, inst.net.dim());
    const auto r = robust::rtest(exact::TestKind::clarke, moved, delta, inst.data, inst.loss);
    REQUIRE(r.status == robust::RobustResult::Status::value);
    const auto bundle =
        robust::constants(inst.data, inst.loss, moved.norm() + delta, moved.width());
    CHECK(r.epsilon <= 0.0 + bundle.clarke.c_mu * delta + 1e-7);
    ++tested;
  }
}

TEST_CASE("line search") {
  SUBCASE("stop bound on the number of halvings") {
    // min nonzero dot 0.5, R = 1: identity rounding within ceil(log2(4)) = 2
    const auto data = model::Dataset::make({vec({1.0, 0.0})}, {1.0});
    model::Network net;
    net.units.push_back({1.0, vec({0.5, 0.4})});
    const auto trace = robust::line_search(exact::TestKind::clarke, net, data,
                                           model::LossModel::square(), 1.0, 40);
    REQUIRE(trace.first_identity_step >= 0);
    CHECK(trace.first_identity_step <= 2);
  }
  SUBCASE("exact stationary input certifies zero at the first identity step") {
    std::mt19937_64 rng(23);
    const auto fix = testsupport::stationary_fixture(rng, 2);
    const auto& inst = fix.instance;
    const auto trace =
        robust::line_search(exact::TestKind::clarke, inst.net, inst.data, inst.loss, 1.0, 60);
    REQUIRE(trace.best.has_value());
    CHECK(trace.best->first == 0.0);
  }
  SUBCASE("perturbed stationary point yields a finite certificate") {
    std::mt19937_64 rng(29);
    std::normal_distribution<double> gauss(0.0, 1.0);
    for (int t = 0; t < 20; ++t) {
      const auto fix = testsupport::stationary_fixture(rng, 2);
      const auto& inst = fix.instance;
      const auto sep = robust::separation(inst.net, inst.data, inst.loss);
      const double radius = std::min(sep.c_tau_clarke / 2.0, 0.5);
      Eigen::VectorXd noise(inst.net.param_count());
      for (int j = 0; j < noise.size(); ++j) noise(j) = gauss(rng);
      noise *= radius / noise.norm();
      const auto moved = model::Network::unpack(inst.net.pack() + noise, inst.net.dim());
      const auto trace =
          robust::line_search(exact::TestKind::clarke, moved, inst.data, inst.loss, 1.0, 60);
      REQUIRE(trace.best.has_value());
      const auto bundle =
          robust::constants(inst.data, inst.loss, moved.norm() + 1.0, moved.width());
      CHECK(trace.best->first <= bundle.clarke.c_mu * trace.best->second + 1e-7);
    }
  }
}

TEST_CASE("Frechet outer-weight identification") {
  std::mt19937_64 rng(31);
  std::normal_distribution<double> gauss(0.0, 1.0);
  int tested = 0;
  while (tested < 40) {
    const auto fix = testsupport::stationary_fixture(rng, 2, /*with_zero_u=*/true);
    const auto& inst = fix.instance;
    const auto sep = robust::separation(inst.net, inst.data, inst.loss);
    const double delta = std::min(sep.c_tau_frechet, 0.5);
    REQUIRE(delta > 0.0);
    Eigen::VectorXd noise(inst.net.param_count());
    for (int j = 0; j < noise.size(); ++j) noise(j) = gauss(rng);
    noise *= (delta / 2.0) / noise.norm();
    const auto moved = model::Network::unpack(inst.net.pack() + noise, inst.net.dim());
    const auto r = robust::rnd_frechet(moved, delta, inst.data, inst.loss);
    REQUIRE(r.feasible);
    ++tested;
    for (int k = 0; k < inst.net.width(); ++k) {
      if (inst.net.units[k].u == 0.0)
        CHECK(r.net.units[k].u == 0.0);
      else
        CHECK(r.net.units[k].u == moved.units[k].u);
    }
  }
}
