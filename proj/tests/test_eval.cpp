#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>

#include "doctest.h"
#include "efiln/errors.hpp"
#include "efiln/eval.hpp"
#include "efiln/rng.hpp"

using namespace efiln;

namespace {

// A network whose output is the constant `c` in normalized space.
Checkpoint constant_model(const Position& c) {
  const auto arch = Architecture::mlp(1, 4);
  auto p = NetworkParams::unflatten(arch, std::vector<double>(arch.parameter_count(), 0.0));
  p.layers().back().biases = {c.x, c.y, c.z};
  Checkpoint m{p, {}};
  m.stats.pos_min = {10, 10, 10};
  m.stats.pos_max = {60, 60, 60};
  m.stats.field_min = {-1e9, -1e9, -1e9};
  m.stats.field_max = {1e9, 1e9, 1e9};
  return m;
}

}  // namespace

TEST_SUITE("eval") {

TEST_CASE("metrics arithmetic") {
  const std::vector<Position> truth{{1, 2, 3}};
  const auto zero = compute_metrics(truth, truth, 100.0);
  CHECK(zero.mae == std::array<double, 3>{0, 0, 0});
  CHECK(zero.rmse == std::array<double, 3>{0, 0, 0});
  CHECK(zero.mean_euclidean == 0.0);
  CHECK(zero.percent_error == 0.0);

  const std::vector<Position> off{{2, 2, 3}};
  const auto m = compute_metrics(truth, off, 100.0);
  CHECK(m.mae[0] == 1.0);
  CHECK(m.mae[1] == 0.0);
  CHECK(m.mean_euclidean == 1.0);
  CHECK(m.points == 1);

  const std::vector<Position> t2{{0, 0, 0}, {0, 0, 0}};
  const std::vector<Position> p2{{3, -4, 0}, {-1, 0, 2}};
  const auto m2 = compute_metrics(t2, p2, 50.0);
  CHECK(m2.mae[0] == 2.0);
  CHECK(m2.mae[1] == 2.0);
  CHECK(m2.mae[2] == 1.0);
  CHECK(m2.rmse[0] == doctest::Approx(std::sqrt(5.0)));
  CHECK(m2.mean_euclidean == doctest::Approx((5.0 + std::sqrt(5.0)) / 2));
  CHECK(m2.percent_error == doctest::Approx((2.0 + 2.0 + 1.0) / 3.0 / 50.0 * 100.0));
  CHECK_THROWS_AS(compute_metrics(t2, off, 1.0), ShapeMismatch);
}

TEST_CASE("metrics are permutation invariant") {
  Rng rng(3);
  std::vector<Position> t(200), p(200);
  for (std::size_t i = 0; i < t.size(); ++i) {
    t[i] = {rng.uniform(10, 60), rng.uniform(10, 60), rng.uniform(10, 60)};
    p[i] = {t[i].x + rng.normal(), t[i].y + rng.normal(), t[i].z + rng.normal()};
  }
  const auto a = compute_metrics(t, p, 50.0);
  std::vector<std::size_t> order(t.size());
  for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
  shuffle(order, rng);
  std::vector<Position> ts, ps;
  for (auto i : order) {
    ts.push_back(t[i]);
    ps.push_back(p[i]);
  }
  const auto b = compute_metrics(ts, ps, 50.0);
  for (int k = 0; k < 3; ++k) {
    CHECK(a.mae[k] == doctest::Approx(b.mae[k]).epsilon(1e-12));
    CHECK(a.rmse[k] == doctest::Approx(b.rmse[k]).epsilon(1e-12));
  }
  CHECK(a.mean_euclidean == doctest::Approx(b.mean_euclidean).epsilon(1e-12));
}

TEST_CASE("trajectory shapes") {
  const auto g = GridSpec::desk();
  for (auto kind : {TrajectoryKind::Spiral, TrajectoryKind::Circle, TrajectoryKind::Random}) {
    const auto pts = make_trajectory(kind, 200, 7, g);
    REQUIRE(pts.size() == 200);
    for (const auto& p : pts) {
      for (int a = 0; a < 3; ++a) {
        CHECK(p[a] > g.min[a]);
        CHECK(p[a] < g.max[a]);
      }
      CHECK_FALSE(g.is_node(p));
      // exact comparison against the neighbouring nodes
      bool on_node = true;
      for (int a = 0; a < 3; ++a) {
        const double k = std::floor((p[a] - g.min[a]) / g.step[a]);
        on_node = on_node && (g.node(a, std::size_t(k)) == p[a] || g.node(a, std::size_t(k) + 1) == p[a]);
      }
      CHECK_FALSE(on_node);
    }
  }
  const auto circle = make_trajectory(TrajectoryKind::Circle, 64, 0, g);
  for (const auto& p : circle) {
    CHECK(std::abs(p.z - circle[0].z) < 1e-9);
    CHECK(std::abs(std::hypot(p.x - 35.0, p.y - 35.0) - 15.0) < 1e-9);
  }
  const auto spiral = make_trajectory(TrajectoryKind::Spiral, 101, 0, g);
  CHECK(spiral.front().z == doctest::Approx(15.0 + 0.5));
  CHECK(spiral.back().z >= 55.0);
  CHECK(spiral.back().z <= 55.5);
  CHECK(make_trajectory(TrajectoryKind::Random, 50, 1, g) == make_trajectory(TrajectoryKind::Random, 50, 1, g));
  CHECK_FALSE(make_trajectory(TrajectoryKind::Random, 50, 1, g) == make_trajectory(TrajectoryKind::Random, 50, 2, g));
}

TEST_CASE("trajectory errors and names") {
  CHECK_THROWS_AS(make_trajectory(TrajectoryKind::Spiral, 10, 0, GridSpec::uniform(0, 3, 1)), DomainTooSmall);
  CHECK_THROWS_AS(make_trajectory(TrajectoryKind::Spiral, 1, 0, GridSpec::desk()), ConfigError);
  CHECK(parse_trajectory_kind("circle") == TrajectoryKind::Circle);
  CHECK(to_string(TrajectoryKind::Spiral) == "spiral");
  CHECK_THROWS_AS(parse_trajectory_kind("square"), ConfigError);
}

TEST_CASE("evaluate with a constant predictor") {
  const auto model = constant_model({0.5, 0.5, 0.5});
  const std::vector<Position> pts{{20.5, 30.5, 40.5}, {50.25, 12.5, 35.5}};
  const auto r = evaluate(model, pts, default_electrodes(), PhysicalConstants{}, {0.0, 0, GridSpec::desk(), "t"});
  for (const auto& p : r.trajectory.predicted) {
    CHECK(p.x == doctest::Approx(35.0));
    CHECK(p.y == doctest::Approx(35.0));
    CHECK(p.z == doctest::Approx(35.0));
  }
  CHECK(r.metrics.mae[0] == doctest::Approx((14.5 + 15.25) / 2));
  CHECK(r.metrics.mae[1] == doctest::Approx((4.5 + 22.5) / 2));
  CHECK(r.metrics.mae[2] == doctest::Approx((5.5 + 0.5) / 2));
  CHECK(r.metrics.percent_error ==
        doctest::Approx((r.metrics.mae[0] + r.metrics.mae[1] + r.metrics.mae[2]) / 3.0 / 50.0 * 100.0));
  CHECK(r.trajectory.name == "t");
}

TEST_CASE("evaluate rejects invalid points") {
  const auto model = constant_model({0.5, 0.5, 0.5});
  const std::vector<Position> outside{{5, 30.5, 30.5}};
  CHECK_THROWS_AS(evaluate(model, outside, default_electrodes(), PhysicalConstants{}), ConfigError);
  const std::vector<Position> node{{20, 30, 40}};
  EvalOptions opt;
  opt.grid = GridSpec::desk();
  CHECK_THROWS_AS(evaluate(model, node, default_electrodes(), PhysicalConstants{}, opt), ConfigError);
}

TEST_CASE("zero-noise evaluation is reproducible and noise is seeded") {
  auto model = constant_model({0.0, 0.0, 0.0});
  model.params = init_network(Architecture::mlp(2, 8), 3);
  const auto pts = make_trajectory(TrajectoryKind::Random, 50, 9, GridSpec::desk());
  const auto a = evaluate(model, pts, default_electrodes(), PhysicalConstants{});
  const auto b = evaluate(model, pts, default_electrodes(), PhysicalConstants{});
  CHECK(a.trajectory.predicted == b.trajectory.predicted);
  CHECK(format_metrics(a.metrics) == format_metrics(b.metrics));
  EvalOptions n1{0.1, 4, std::nullopt, "n"};
  const auto c = evaluate(model, pts, default_electrodes(), PhysicalConstants{}, n1);
  const auto d = evaluate(model, pts, default_electrodes(), PhysicalConstants{}, n1);
  CHECK(c.trajectory.predicted == d.trajectory.predicted);
  CHECK_FALSE(c.trajectory.predicted == a.trajectory.predicted);
}

TEST_CASE("predict is single/batch consistent") {
  auto model = constant_model({0.0, 0.0, 0.0});
  model.params = init_network(Architecture::reference(), 5);
  Rng rng(1);
  std::vector<FieldVector> fields(33);
  for (auto& f : fields) f = {rng.uniform(-1e9, 1e9), rng.uniform(-1e9, 1e9), rng.uniform(-1e9, 1e9)};
  const auto batch = predict(model, fields);
  for (std::size_t i = 0; i < fields.size(); ++i) CHECK(batch[i] == predict(model, fields[i]));
}

TEST_CASE("metrics text and csv") {
  const std::vector<Position> t{{0, 0, 0}, {1, 1, 1}};
  const std::vector<Position> p{{0.5, -0.25, 1.0 / 3}, {1.1, 1, 0.2}};
  const auto m = compute_metrics(t, p, 50.0);
  const auto back = parse_metrics(format_metrics(m));
  CHECK(back.mae == m.mae);
  CHECK(back.rmse == m.rmse);
  CHECK(back.mean_euclidean == m.mean_euclidean);
  CHECK(back.percent_error == m.percent_error);
  CHECK(back.points == m.points);
  const auto header = metrics_csv_header();
  const auto row = metrics_csv_row(m);
  CHECK(std::count(header.begin(), header.end(), ',') == std::count(row.begin(), row.end(), ','));
}

TEST_CASE("points csv") {
  const auto path = std::filesystem::temp_directory_path() / "efiln_points.csv";
  {
    std::ofstream out(path);
    out << "x,y,z\n20.5,30.5,40.5\n11.25,12,13\n";
  }
  const auto pts = load_points_csv(path);
  REQUIRE(pts.size() == 2);
  CHECK(pts[1] == Position{11.25, 12, 13});
  {
    std::ofstream out(path);
    out << "x,y,z\n1,2\n";
  }
  CHECK_THROWS_AS(load_points_csv(path), SchemaError);
}

}  // TEST_SUITE
