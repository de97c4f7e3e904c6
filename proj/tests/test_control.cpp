#include <doctest.h>

#include <cmath>
#include <random>

#include "control_fixtures.hpp"
#include "oracles.hpp"
#include "rescbf/control.hpp"

using namespace rescbf;
using fixtures::Scene;

TEST_SUITE("control") {

TEST_CASE("degree barrier examples") {
  LocalView<double> view;
  view.self_position = Eigen::Vector2d::Zero();
  view.f_prime = 7;
  view.params = AdjacencyParamsd{2.05, 1.0, 3.0, 11};
  CHECK(degree_cbf(view) == -7.0);

  for (int k = 0; k < 8; ++k) view.neighbors.push_back({k + 1, Eigen::Vector2d(1e-9 * (k + 1), 0), 0.0});
  CHECK(degree_cbf(view) == doctest::Approx(8 * 1.025 - 7).epsilon(1e-12));

  view.neighbors.clear();
  for (int k = 0; k < 7; ++k) {
    const double a = 2 * M_PI * k / 7;
    view.neighbors.push_back({k + 1, Eigen::Vector2d(3 * std::cos(a), 3 * std::sin(a)), 0.0});
  }
  CHECK(degree_cbf(view) == doctest::Approx(-7.0).epsilon(1e-12));
}

TEST_CASE("broadcast barrier examples") {
  CHECK(hat_h(7.0, 7) == 0.0);
  CHECK(hat_h(9.5, 7) == 2.5);

  std::mt19937_64 rng(1);
  const Scene s = fixtures::random_scene(rng, 9, 2);
  for (int i = 0; i < s.n(); ++i) {
    const auto view = s.view(i);
    CHECK(hat_h(s.c[static_cast<std::size_t>(i)], s.f_prime) == degree_cbf(view));
  }
}

TEST_CASE("collision barrier examples") {
  const Eigen::Vector2d o = Eigen::Vector2d::Zero();
  CHECK(collision_cbf(o, Eigen::Vector2d(0.3, 0), 0.3) == doctest::Approx(0.0));
  CHECK(collision_cbf(o, Eigen::Vector2d(1, 0), 0.3) == doctest::Approx(0.91));
  CHECK(collision_cbf(o, o, 0.3) == doctest::Approx(-0.09));
}

TEST_CASE("composed barrier examples") {
  const CbfWeights<double> w{2.0, 1.0, 1.0};
  const auto p = AdjacencyParamsd::defaults(2, 3.0);
  Eigen::Matrix<double, 2, 2> x;
  x << 0, 10, 0, 0;
  const GraphSnapshot g = build_graph(x, 3.0);
  REQUIRE(g.edges().empty());

  const std::vector<double> quarter{1 + std::log(4.0) / 2.0, 1 + std::log(4.0) / 2.0};
  CHECK(composed_cbf(x, g, w, 1, p, 0.3, std::span<const double>(quarter)) == doctest::Approx(0.5));

  const std::vector<double> huge{1e6, 1e6};
  CHECK(composed_cbf(x, g, w, 1, p, 0.3, std::span<const double>(huge)) == doctest::Approx(1.0));

  const std::vector<double> zero{1.0, 1e6};
  CHECK(composed_cbf(x, g, w, 1, p, 0.3, std::span<const double>(zero)) <= 0.0);
}

TEST_CASE("local barrier examples") {
  LocalView<double> view;
  view.self_position = Eigen::Vector2d::Zero();
  view.f_prime = 7;
  view.delta_d = 0.3;
  view.params = AdjacencyParamsd::defaults(11, 3.0);
  view.weights = {1.0, 10.0, 1.0};
  view.self_connectivity = 10.0;  // h-hat = 3
  for (int k = 0; k < 7; ++k) {
    const double a = 2 * M_PI * k / 7;
    view.neighbors.push_back({k + 1, Eigen::Vector2d(2.9 * std::cos(a), 2.9 * std::sin(a)), 10.0});
  }
  CHECK(local_phi(view) == doctest::Approx(1.0 / 11 - std::exp(-3.0)).epsilon(1e-12));
  CHECK(local_phi(view) == doctest::Approx(0.0411).epsilon(1e-3));

  view.neighbors[3].connectivity = 7.0;  // one h-hat at zero
  CHECK(local_phi(view) <= 1.0 / 11 - 1.0 / 8);

  view.self_connectivity = 1e6;
  for (auto& nb : view.neighbors) nb.connectivity = 1e6;
  CHECK(local_phi(view) == doctest::Approx(1.0 / 11));
}

TEST_CASE("constraint row: degree gradient vanishes at the range boundary") {
  LocalView<double> view;
  view.self_position = Eigen::Vector2d::Zero();
  view.f_prime = 2;
  view.delta_d = 0.3;
  view.params = AdjacencyParamsd::defaults(5, 3.0);
  view.weights = {1.0, 1.0, 1.0};
  view.self_connectivity = 0.0;
  for (int k = 0; k < 3; ++k) {
    const double a = 2 * M_PI * k / 3 + 0.1;
    view.neighbors.push_back({k + 1, Eigen::Vector2d(3 * std::cos(a), 3 * std::sin(a)), 0.0});
  }
  Eigen::Vector2d collision = Eigen::Vector2d::Zero();
  for (const auto& nb : view.neighbors) {
    const double e = std::exp(-view.weights.w_c * ((view.self_position - nb.position).squaredNorm() - 0.09));
    collision += view.weights.w_c * e * 2 * (view.self_position - nb.position);
  }
  const auto row = constraint_row(view);
  CHECK((row.normal - collision).norm() <= 1e-15 * (1 + collision.norm()));
}

TEST_CASE("constraint row: two-robot mirror symmetry") {
  Eigen::Matrix<double, 2, 2> x;
  x << -0.7, 0.7, 0.2, 0.2;
  Scene s = fixtures::scene_from(x, 0, {2.0, 3.0, 1.0}, 0.3);
  const auto r0 = constraint_row(s.view(0));
  const auto r1 = constraint_row(s.view(1));
  CHECK((r0.normal + r1.normal).norm() <= 1e-14);
  CHECK(r0.rhs == doctest::Approx(r1.rhs));
}

TEST_CASE("property: constraint row matches central finite differences") {
  std::mt19937_64 rng(17);
  for (int t = 0; t < 100; ++t) {
    const Scene s = fixtures::random_scene(rng, 5 + static_cast<int>(rng() % 7), 2);
    const int i = static_cast<int>(rng() % s.n());
    const Eigen::VectorXd H = constraint_row(s.view(i)).normal;
    const Eigen::VectorXd Hfd = fixtures::fd_gradient(s, i, 1e-5);
    CHECK((H - Hfd).norm() <= 1e-5 * Hfd.norm());
  }
}

TEST_CASE("property: decomposition inequality") {
  std::mt19937_64 rng(23);
  int checked = 0;
  for (int t = 0; t < 400; ++t) {
    Scene s = fixtures::random_scene(rng, 5 + static_cast<int>(rng() % 7), 2);
    if (!s.degree_condition()) continue;
    fixtures::perturb_broadcasts(s, rng);
    ++checked;
    double sum = 0.0;
    for (int i = 0; i < s.n(); ++i) sum += local_phi(s.view(i));
    CHECK(s.phi() >= sum - 1e-12);
    CHECK(s.phi() == doctest::Approx(fixtures::phi_by_definition(s)).epsilon(1e-12));
  }
  CHECK(checked > 100);
}

TEST_CASE("property: per-robot constraints aggregate to the composed one") {
  std::mt19937_64 rng(29);
  int checked = 0;
  for (int t = 0; t < 400; ++t) {
    Scene s = fixtures::random_scene(rng, 5 + static_cast<int>(rng() % 7), 2);
    if (!s.degree_condition()) continue;
    const auto box = InputBox<double>::symmetric(2, 1.5);
    Eigen::Matrix2Xd u(2, s.n());
    double lhs = 0.0;
    double phi_sum = 0.0;
    bool all_optimal = true;
    for (int i = 0; i < s.n(); ++i) {
      const auto view = s.view(i);
      const Eigen::Vector2d u_des(std::cos(i + t), std::sin(i + t));
      const auto out = cbf_qp_controller(view, Eigen::VectorXd(u_des), box);
      all_optimal = all_optimal && out.status == QpStatus::kOptimal;
      u.col(i) = out.u;
      lhs += out.row.normal.dot(out.u);
      phi_sum += out.phi;
    }
    if (!all_optimal) continue;
    ++checked;
    const double composed_rate = fixtures::composed_rate(s, u);
    CHECK(lhs == doctest::Approx(composed_rate).epsilon(1e-10));
    CHECK(composed_rate >= -s.weights.gamma * s.phi() - 1e-12);
    CHECK(-s.weights.gamma * phi_sum >= -s.weights.gamma * s.phi() - 1e-12);
  }
  CHECK(checked > 50);
}

TEST_CASE("QP: desired input already feasible") {
  const auto box = InputBox<double>::symmetric(2, 2.0);
  const ConstraintRow<double> row{Eigen::Vector2d(0, 1), -1.0};
  const auto sol = solve_box_qp(Eigen::VectorXd(Eigen::Vector2d(1, 0.5)), row, box);
  CHECK(sol.status == QpStatus::kOptimal);
  CHECK(sol.u == Eigen::VectorXd(Eigen::Vector2d(1, 0.5)));
}

TEST_CASE("QP: projection onto a halfplane with the box inactive") {
  const auto box = InputBox<double>::symmetric(2, 2.0);
  const ConstraintRow<double> row{Eigen::Vector2d(0, 1), 1.0};
  const auto sol = solve_box_qp(Eigen::VectorXd(Eigen::Vector2d(1, 0)), row, box);
  CHECK(sol.status == QpStatus::kOptimal);
  CHECK(sol.u(0) == doctest::Approx(1.0));
  CHECK(sol.u(1) == doctest::Approx(1.0));
}

TEST_CASE("QP: zero is a feasibility witness when rhs <= 0") {
  std::mt19937_64 rng(3);
  std::normal_distribution<double> nd;
  const auto box = InputBox<double>::symmetric(2, 1.5);
  for (int t = 0; t < 500; ++t) {
    const ConstraintRow<double> row{Eigen::Vector2d(nd(rng), nd(rng)), -std::abs(nd(rng))};
    const auto sol = solve_box_qp(Eigen::VectorXd(Eigen::Vector2d(3 * nd(rng), 3 * nd(rng))), row, box);
    CHECK(sol.status == QpStatus::kOptimal);
    CHECK(row.normal.dot(sol.u) >= row.rhs - 1e-12);
    CHECK(box.contains(sol.u));
  }
}

TEST_CASE("QP: infeasible instance falls back to the least-violating vertex") {
  const auto box = InputBox<double>::symmetric(2, 1.0);
  const ConstraintRow<double> row{Eigen::Vector2d(1, -2), 10.0};
  const auto sol = solve_box_qp(Eigen::VectorXd(Eigen::Vector2d(0, 0)), row, box);
  CHECK(sol.status == QpStatus::kInfeasible);
  CHECK(sol.u == Eigen::VectorXd(Eigen::Vector2d(1, -1)));

  const ConstraintRow<double> axis{Eigen::Vector2d(1, 0), 5.0};
  const auto free_axis = solve_box_qp(Eigen::VectorXd(Eigen::Vector2d(0, 0.4)), axis, box);
  CHECK(free_axis.status == QpStatus::kInfeasible);
  CHECK(free_axis.u == Eigen::VectorXd(Eigen::Vector2d(1, 0.4)));
}

TEST_CASE("QP: vanishing normal voids the constraint") {
  const auto box = InputBox<double>::symmetric(2, 1.0);
  const ConstraintRow<double> row{Eigen::Vector2d(1e-13, 0), 1.0};
  const auto sol = solve_box_qp(Eigen::VectorXd(Eigen::Vector2d(3, -0.5)), row, box);
  CHECK(sol.status == QpStatus::kVoidConstraint);
  CHECK(sol.u == Eigen::VectorXd(Eigen::Vector2d(1, -0.5)));
}

TEST_CASE("QP input validation") {
  const auto box = InputBox<double>::symmetric(2, 1.0);
  const ConstraintRow<double> row{Eigen::Vector3d(1, 0, 0), 0.0};
  CHECK_THROWS_AS(solve_box_qp(Eigen::VectorXd(Eigen::Vector2d(0, 0)), row, box), std::invalid_argument);
  InputBox<double> off{Eigen::Vector2d(0.5, -1), Eigen::Vector2d(1, 1)};
  CHECK_THROWS_AS(off.validate(), std::invalid_argument);
}

TEST_CASE("property: QP matches the active-set oracle and is deterministic") {
  std::mt19937_64 rng(31);
  int infeasible = 0;
  for (int t = 0; t < 3000; ++t) {
    const auto q = fixtures::random_qp(rng);
    const InputBox<double> box{q.lo, q.hi};
    const ConstraintRow<double> row{q.H, q.rhs};
    const auto sol = solve_box_qp(Eigen::VectorXd(q.u_des), row, box);
    const auto again = solve_box_qp(Eigen::VectorXd(q.u_des), row, box);
    CHECK(sol.u == again.u);
    const auto ref = oracle::kkt_qp(q);
    if (!ref) {
      ++infeasible;
      CHECK(sol.status == QpStatus::kInfeasible);
      continue;
    }
    CHECK(sol.status == QpStatus::kOptimal);
    CHECK((sol.u - *ref).norm() <= 1e-6);
  }
  CHECK(infeasible > 0);
}

TEST_CASE("controller: slack constraint leaves the desired input unchanged") {
  Eigen::Matrix<double, 2, 4> x;
  x << 0, 0.8, -0.8, 0, 0, 0, 0, 0.8;
  const Scene s = fixtures::scene_from(x, 0, {20.0, 5.0, 1.0}, 0.3);
  const auto view = s.view(0);
  REQUIRE(local_phi(view) > 0.05);
  const Eigen::VectorXd u_des = Eigen::Vector2d(0.01, -0.02);
  const auto out = cbf_qp_controller(view, u_des, InputBox<double>::symmetric(2, 1.5));
  CHECK(out.u == u_des);
}

TEST_CASE("controller: robot at the barrier margin pulling away is slowed") {
  // Two robots, F' = 1. Place them where phi_0 is small but positive.
  Eigen::Matrix<double, 2, 2> x;
  x << 0, 2.4, 0, 0;
  Scene s = fixtures::scene_from(x, 0, {20.0, 10.0, 1.0}, 0.3);
  auto view = s.view(0);
  REQUIRE(local_phi(view) > 0);
  // stretch until the local barrier is nearly spent: bisect on the spacing
  auto phi_at = [&](double d) {
    x(0, 1) = d;
    s = fixtures::scene_from(x, 0, {20.0, 10.0, 1.0}, 0.3);
    return local_phi(s.view(0));
  };
  double inside = 2.4;
  double outside = 3.0;
  REQUIRE(phi_at(outside) < 0);
  while (phi_at(inside) > 1e-3) {
    const double mid = 0.5 * (inside + outside);
    (phi_at(mid) >= 0 ? inside : outside) = mid;
  }
  view = s.view(0);
  REQUIRE(local_phi(view) >= 0);
  const Eigen::VectorXd u_des = Eigen::Vector2d(-1, 0);  // away from the neighbor
  const auto out = cbf_qp_controller(view, u_des, InputBox<double>::symmetric(2, 1.5));
  CHECK(out.status == QpStatus::kOptimal);
  CHECK(out.u(0) > u_des(0));
  CHECK(out.row.normal.dot(out.u) == doctest::Approx(out.row.rhs).epsilon(1e-9));
  // KKT: u_des - u is parallel to H with a nonnegative multiplier
  const Eigen::VectorXd diff = out.u - u_des;
  const double lam = diff.dot(out.row.normal) / out.row.normal.squaredNorm();
  CHECK(lam >= 0);
  CHECK((diff - lam * out.row.normal).norm() <= 1e-9);
}

TEST_CASE("controller: zero desired input stays zero inside the safe set") {
  std::mt19937_64 rng(37);
  for (int t = 0; t < 200; ++t) {
    const Scene s = fixtures::random_scene(rng, 6, 2);
    for (int i = 0; i < s.n(); ++i) {
      const auto view = s.view(i);
      if (local_phi(view) < 0) continue;
      const auto out = cbf_qp_controller(view, Eigen::VectorXd(Eigen::Vector2d::Zero()),
                                         InputBox<double>::symmetric(2, 1.5));
      CHECK(out.u.isZero());
    }
  }
}

TEST_CASE("templates instantiate for long double") {
  LocalView<long double> view;
  view.self_position = Vec<long double>::Zero(2);
  view.f_prime = 1;
  view.delta_d = 0.3L;
  view.params = AdjacencyParams<long double>::defaults(3, 3.0L);
  view.weights = {1.0L, 1.0L, 1.0L};
  view.self_connectivity = 1.2L;
  Vec<long double> p(2);
  p << 1.0L, 0.5L;
  view.neighbors.push_back({1, p, 1.1L});
  const auto out = cbf_qp_controller(view, Vec<long double>(Vec<long double>::Zero(2)), InputBox<long double>::symmetric(2, 1.0L));
  CHECK(out.u.size() == 2);
}

}  // TEST_SUITE
