#include <cmath>
#include <sstream>

#include "doctest.h"
#include "efiln/errors.hpp"
#include "efiln/parallel.hpp"
#include "efiln/trainer.hpp"
#include "grad_check.hpp"

using namespace efiln;

namespace {

NetworkParams zero_net() {
  const auto arch = Architecture::reference();
  return NetworkParams::unflatten(arch, std::vector<double>(arch.parameter_count(), 0.0));
}

Dataset coarse_grid() {
  return generate_grid(GridSpec::uniform(10, 60, 5.0), default_electrodes(), PhysicalConstants{});
}

TrainConfig quick_config() {
  TrainConfig c;
  c.max_epochs = 20;
  c.batch_size = 256;
  c.lbfgs.max_iterations = 30;
  return c;
}

}  // namespace

TEST_SUITE("trainer") {

TEST_CASE("loss arithmetic") {
  const auto p = zero_net();
  const std::vector<Sample> perfect{{{0, 0, 0}, {0.3, 0.4, 0.5}}};
  const auto l0 = loss(p, perfect, LossWeights{});
  CHECK(l0.total == 0.0);
  CHECK(l0.x == 0.0);
  CHECK(l0.y == 0.0);
  CHECK(l0.z == 0.0);

  // zero net predicts 0, so the error is minus the target
  const std::vector<Sample> one{{{0.1, 0, 0}, {0.3, 0.4, 0.5}}};
  CHECK(loss(p, one, LossWeights{}).total == doctest::Approx(0.01).epsilon(1e-15));

  const std::vector<Sample> mixed{{{0.1, 0.2, 0.3}, {0.1, 0.1, 0.1}}, {{0.3, 0.6, 0.9}, {0.9, 0.8, 0.7}}};
  const auto l = loss(p, mixed, LossWeights{2.0, 0.0, 0.0});
  CHECK(l.total == 2.0 * l.x);
  CHECK(l.x == doctest::Approx((0.01 + 0.09) / 2).epsilon(1e-15));
  CHECK(l.y == doctest::Approx((0.04 + 0.36) / 2).epsilon(1e-15));
  const LossWeights w{0.5, 1.5, 3.0};
  const auto lw = loss(p, mixed, w);
  CHECK(lw.total == w.alpha * lw.x + w.beta * lw.y + w.gamma * lw.z);
  CHECK_THROWS_AS(loss(p, std::vector<Sample>{}, w), ShapeMismatch);
}

TEST_CASE("loss weight validation") {
  CHECK_THROWS_AS((LossWeights{0, 0, 0}.validate()), ConfigError);
  CHECK_THROWS_AS((LossWeights{-1, 1, 1}.validate()), ConfigError);
  CHECK_NOTHROW((LossWeights{0, 0, 1}.validate()));
}

TEST_CASE("loss gradient matches finite differences on a small net") {
  for (std::uint64_t seed = 1; seed <= 5; ++seed) {
    const auto p = init_network(Architecture::mlp(1, 2), seed);
    REQUIRE(p.parameter_count() == 17);
    const auto batch = gradcheck::toy_batch(16, seed);
    const auto r = gradcheck::check(p, batch, LossWeights{1.0, 0.7, 1.3}, 17, seed);
    CHECK(r.checked == 17);
    CHECK(r.worst < 1e-6);
  }
}

TEST_CASE("3-16-16-3 net gradient check") {
  for (std::uint64_t seed = 1; seed <= 5; ++seed) {
    const auto p = init_network(Architecture::mlp(2, 16), seed);
    const auto batch = gradcheck::toy_batch(64, 10 + seed);
    const auto r = gradcheck::check(p, batch, LossWeights{}, 200, 20 + seed);
    CHECK(r.worst < 1e-6);
  }
}

TEST_CASE("gradient is linear in the weights") {
  const auto p = init_network(Architecture::reference(), 4);
  const auto batch = gradcheck::toy_batch(40, 4);
  const auto gx = loss_gradient(p, batch, LossWeights{1, 0, 0});
  const auto gx2 = loss_gradient(p, batch, LossWeights{2, 0, 0});
  const auto gy = loss_gradient(p, batch, LossWeights{0, 1, 0});
  const auto gz = loss_gradient(p, batch, LossWeights{0, 0, 1});
  const auto all = loss_gradient(p, batch, LossWeights{});
  for (std::size_t i = 0; i < gx.size(); ++i) {
    CHECK(gx2[i] == 2.0 * gx[i]);
    const double sum = gx[i] + gy[i] + gz[i];
    CHECK(std::abs(all[i] - sum) <= 1e-13 * (std::abs(gx[i]) + std::abs(gy[i]) + std::abs(gz[i]) + 1e-300));
  }
}

TEST_CASE("batch gradient is the mean of per-sample gradients") {
  const auto p = init_network(Architecture::reference(), 5);
  const auto batch = gradcheck::toy_batch(25, 5);
  const auto g = loss_gradient(p, batch, LossWeights{});
  std::vector<double> mean(g.size(), 0.0), mag(g.size(), 0.0);
  for (const auto& s : batch) {
    const auto gs = loss_gradient(p, std::span<const Sample>(&s, 1), LossWeights{});
    for (std::size_t i = 0; i < g.size(); ++i) {
      mean[i] += gs[i] / 25.0;
      mag[i] += std::abs(gs[i]) / 25.0;
    }
  }
  for (std::size_t i = 0; i < g.size(); ++i) CHECK(std::abs(g[i] - mean[i]) <= 1e-13 * mag[i] + 1e-300);
}

TEST_CASE("chunked loss does not depend on thread count") {
  const auto raw = generate_grid(GridSpec::uniform(10, 60, 2.0), default_electrodes(), PhysicalConstants{});
  const auto packed = pack(normalize(raw, fit_norm_stats(raw)));
  const auto p = init_network(Architecture::reference(), 6);
  std::vector<double> g1(p.parameter_count()), g4(p.parameter_count());
  set_max_threads(1);
  const auto l1 = evaluate_loss(p, packed, {}, LossWeights{}, g1);
  set_max_threads(4);
  const auto l4 = evaluate_loss(p, packed, {}, LossWeights{}, g4);
  set_max_threads(0);
  CHECK(l1.total == l4.total);
  CHECK(g1 == g4);
}

TEST_CASE("training run contracts") {
  const auto cfg = quick_config();
  const auto r = train(cfg, coarse_grid());
  const auto& rep = r.report;
  CHECK(rep.adam_epochs == 20);
  CHECK(rep.stage_boundary == 20);
  CHECK(rep.rows.size() == rep.adam_epochs + rep.lbfgs_iterations);
  CHECK(rep.validation.size() == 20);
  CHECK(rep.lbfgs_iterations > 0);
  // handoff continuity
  CHECK(rep.lbfgs_initial_loss == rep.handoff_loss.total);
  double prev = rep.handoff_loss.total;
  for (std::size_t i = rep.stage_boundary; i < rep.rows.size(); ++i) {
    CHECK(rep.rows[i].stage == Stage::Lbfgs);
    CHECK(rep.rows[i].loss.total <= prev);
    prev = rep.rows[i].loss.total;
  }
  CHECK(rep.final_loss.total == rep.rows.back().loss.total);
  for (const auto& row : rep.rows) {
    CHECK(row.loss.x >= 0.0);
    CHECK(row.loss.y >= 0.0);
    CHECK(row.loss.z >= 0.0);
    CHECK(row.loss.total == row.loss.x + row.loss.y + row.loss.z);
  }
  CHECK(rep.final_loss.total < rep.rows.front().loss.total);
}

TEST_CASE("training is deterministic and thread-count independent") {
  auto cfg = quick_config();
  cfg.max_epochs = 5;
  cfg.lbfgs.max_iterations = 10;
  set_max_threads(1);
  const auto a = train(cfg, coarse_grid());
  set_max_threads(3);
  const auto b = train(cfg, coarse_grid());
  set_max_threads(0);
  CHECK(serialize_checkpoint(a.model) == serialize_checkpoint(b.model));
  CHECK(format_report_csv(a.report) == format_report_csv(b.report));
}

TEST_CASE("shuffle flag changes the result but not its validity") {
  auto cfg = quick_config();
  cfg.max_epochs = 5;
  cfg.lbfgs.max_iterations = 0;
  const auto a = train(cfg, coarse_grid());
  cfg.shuffle = false;
  const auto b = train(cfg, coarse_grid());
  CHECK_FALSE(a.model.params == b.model.params);
  CHECK(std::isfinite(b.report.final_loss.total));
  CHECK(b.report.lbfgs_iterations == 0);
  CHECK(b.report.rows.size() == 5);
}

TEST_CASE("early stopping on validation plateau") {
  auto cfg = quick_config();
  cfg.patience = 3;
  cfg.min_delta = 1e6;  // no epoch can count as an improvement after the first
  cfg.lbfgs.max_iterations = 0;
  const auto r = train(cfg, coarse_grid());
  CHECK(r.report.adam_early_stopped);
  CHECK(r.report.adam_epochs == 4);
}

TEST_CASE("single epoch budget") {
  auto cfg = quick_config();
  cfg.max_epochs = 1;
  cfg.lbfgs.max_iterations = 0;
  const auto r = train(cfg, coarse_grid());
  CHECK(r.report.rows.size() == 1);
  CHECK(r.report.rows[0].stage == Stage::Adam);
}

TEST_CASE("report csv") {
  auto cfg = quick_config();
  cfg.max_epochs = 3;
  cfg.lbfgs.max_iterations = 2;
  const auto r = train(cfg, coarse_grid());
  std::istringstream in(format_report_csv(r.report));
  std::string line;
  std::getline(in, line);
  CHECK(line == "epoch,stage,loss_x,loss_y,loss_z,loss_total");
  std::size_t rows = 0, adam = 0;
  while (std::getline(in, line)) {
    ++rows;
    if (line.find(",adam,") != std::string::npos) ++adam;
    CHECK(std::count(line.begin(), line.end(), ',') == 5);
  }
  CHECK(rows == r.report.rows.size());
  CHECK(adam == 3);
}

TEST_CASE("config validation") {
  auto cfg = quick_config();
  cfg.batch_size = 0;
  CHECK_THROWS_AS(train(cfg, coarse_grid()), ConfigError);
  cfg = quick_config();
  Dataset tiny;
  tiny.samples.push_back({{1, 2, 3}, {1, 2, 3}});
  CHECK_THROWS_AS(train(cfg, tiny), ConfigError);
}

}  // TEST_SUITE
