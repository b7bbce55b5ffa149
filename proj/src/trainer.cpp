#include "efiln/trainer.hpp"

#include <chrono>
#include <cmath>
#include <algorithm>
#include <fstream>
#include <limits>
#include <numeric>
#include <sstream>

#include "efiln/errors.hpp"
#include "efiln/parallel.hpp"
#include "efiln/rng.hpp"

namespace efiln {

namespace {

constexpr std::size_t kChunk = 2048;

struct ChunkResult {
  double sq[3] = {0.0, 0.0, 0.0};
  std::vector<double> grad;
};

LossValue make_loss(const double sq[3], double count, const LossWeights& w) {
  LossValue v;
  v.x = sq[0] / count;
  v.y = sq[1] / count;
  v.z = sq[2] / count;
  v.total = w.alpha * v.x + w.beta * v.y + w.gamma * v.z;
  return v;
}

std::string describe(const LossValue& v) {
  std::ostringstream out;
  out.precision(6);
  out << "total=" << v.total << " x=" << v.x << " y=" << v.y << " z=" << v.z;
  return out.str();
}

bool finite(const LossValue& v) {
  return std::isfinite(v.total) && std::isfinite(v.x) && std::isfinite(v.y) && std::isfinite(v.z);
}

}  // namespace

void LossWeights::validate() const {
  if (!(alpha >= 0.0) || !(beta >= 0.0) || !(gamma >= 0.0))
    throw ConfigError("loss weights must be non-negative");
  if (!(alpha + beta + gamma > 0.0)) throw ConfigError("loss weights must not all be zero");
}

PackedSamples pack(const Dataset& normalized) {
  PackedSamples p;
  p.inputs.reserve(normalized.size() * 3);
  p.targets.reserve(normalized.size() * 3);
  for (const auto& s : normalized.samples) {
    for (int a = 0; a < 3; ++a) p.inputs.push_back(s.field[a]);
    for (int a = 0; a < 3; ++a) p.targets.push_back(s.position[a]);
  }
  return p;
}

LossValue evaluate_loss(const NetworkParams& params, const PackedSamples& data,
                        std::span<const std::size_t> indices, const LossWeights& weights,
                        std::span<double> grad) {
  const bool all = indices.empty();
  const std::size_t n = all ? data.size() : indices.size();
  if (n == 0) throw ShapeMismatch("loss needs a non-empty batch");
  const bool want_grad = !grad.empty();
  const std::size_t n_params = params.parameter_count();
  if (want_grad && grad.size() != n_params) throw ShapeMismatch("gradient buffer has wrong size");

  const std::size_t n_chunks = (n + kChunk - 1) / kChunk;
  std::vector<ChunkResult> results(n_chunks);
  parallel_for(n_chunks, [&](std::size_t c) {
    const std::size_t begin = c * kChunk;
    const std::size_t b = std::min(n, begin + kChunk) - begin;
    std::vector<double> in(3 * b);
    std::vector<double> target(3 * b);
    for (std::size_t s = 0; s < b; ++s) {
      const std::size_t idx = all ? begin + s : indices[begin + s];
      for (std::size_t a = 0; a < 3; ++a) {
        in[a * b + s] = data.inputs[3 * idx + a];
        target[a * b + s] = data.targets[3 * idx + a];
      }
    }
    ForwardTrace trace;
    forward(params, in, b, trace);
    const auto out = trace.output();
    auto& r = results[c];
    std::vector<double> out_grad(want_grad ? 3 * b : 0);
    for (std::size_t a = 0; a < 3; ++a) {
      const double w = weights[static_cast<int>(a)];
      for (std::size_t s = 0; s < b; ++s) {
        const double e = out[a * b + s] - target[a * b + s];
        r.sq[a] += e * e;
        if (want_grad) out_grad[a * b + s] = 2.0 * w * e;
      }
    }
    if (want_grad) {
      r.grad.resize(n_params);
      backward(params, trace, out_grad, r.grad);
    }
  });

  double sq[3] = {0.0, 0.0, 0.0};
  if (want_grad) std::fill(grad.begin(), grad.end(), 0.0);
  for (const auto& r : results) {
    for (int a = 0; a < 3; ++a) sq[a] += r.sq[a];
    if (want_grad)
      for (std::size_t i = 0; i < n_params; ++i) grad[i] += r.grad[i];
  }
  const double count = static_cast<double>(n);
  if (want_grad)
    for (auto& v : grad) v /= count;
  return make_loss(sq, count, weights);
}

LossValue loss(const NetworkParams& params, std::span<const Sample> batch, const LossWeights& weights) {
  Dataset d;
  d.samples.assign(batch.begin(), batch.end());
  return evaluate_loss(params, pack(d), {}, weights);
}

std::vector<double> loss_gradient(const NetworkParams& params, std::span<const Sample> batch,
                                  const LossWeights& weights) {
  Dataset d;
  d.samples.assign(batch.begin(), batch.end());
  std::vector<double> grad(params.parameter_count());
  evaluate_loss(params, pack(d), {}, weights, grad);
  return grad;
}

void TrainConfig::validate() const {
  architecture.validate();
  adam.validate();
  lbfgs.validate();
  weights.validate();
  if (batch_size == 0) throw ConfigError("batch size must be positive");
  if (patience == 0) throw ConfigError("patience must be positive");
  if (!(min_delta >= 0.0)) throw ConfigError("min_delta must be non-negative");
  if (!(holdout_fraction >= 0.0 && holdout_fraction < 1.0))
    throw ConfigError("holdout fraction must lie in [0, 1)");
}

TrainResult train(const TrainConfig& config, const Dataset& raw) {
  config.validate();
  if (raw.size() < 2) throw ConfigError("training needs at least two samples");
  const auto start = std::chrono::steady_clock::now();
  auto log = [&](const std::string& msg) {
    if (config.log) config.log(msg);
  };

  const auto [train_raw, val_raw] = split(raw, config.holdout_fraction, config.split_seed);
  const NormStats stats = fit_norm_stats(train_raw);
  const PackedSamples train_set = pack(normalize(train_raw, stats));
  const PackedSamples val_set = pack(normalize(val_raw, stats));
  const std::size_t m = train_set.size();

  NetworkParams params = init_network(config.architecture, config.init_seed);
  std::vector<double> theta = params.flatten();
  const std::size_t n_params = theta.size();
  TrainReport report;

  // Stage 1: minibatch Adam.
  AdamState adam(n_params, config.adam);
  Rng shuffle_rng(config.shuffle_seed);
  std::vector<std::size_t> order(m);
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::vector<double> grad(n_params);
  double best_val = std::numeric_limits<double>::infinity();
  std::size_t since_best = 0;
  log("stage adam: " + std::to_string(m) + " training samples, " +
      std::to_string(val_set.size()) + " validation samples, " + std::to_string(n_params) +
      " parameters");
  for (std::size_t epoch = 0; epoch < config.max_epochs; ++epoch) {
    if (config.shuffle) shuffle(order, shuffle_rng);
    double sq[3] = {0.0, 0.0, 0.0};
    for (std::size_t begin = 0, batch_no = 0; begin < m; begin += config.batch_size, ++batch_no) {
      const std::size_t b = std::min(config.batch_size, m - begin);
      const std::span<const std::size_t> batch(order.data() + begin, b);
      params.assign(theta);
      const LossValue lv = evaluate_loss(params, train_set, batch, config.weights, grad);
      if (!finite(lv) || !std::all_of(grad.begin(), grad.end(), [](double v) { return std::isfinite(v); }))
        throw NonFiniteLoss("non-finite loss in adam epoch " + std::to_string(epoch) + ", batch " +
                            std::to_string(batch_no) + " (samples " + std::to_string(begin) + ".." +
                            std::to_string(begin + b - 1) + " of the shuffled order): " +
                            describe(lv));
      sq[0] += lv.x * static_cast<double>(b);
      sq[1] += lv.y * static_cast<double>(b);
      sq[2] += lv.z * static_cast<double>(b);
      adam_step(adam, theta, grad);
    }
    report.rows.push_back({epoch, Stage::Adam, make_loss(sq, static_cast<double>(m), config.weights)});
    report.adam_epochs = epoch + 1;

    params.assign(theta);
    double monitored = report.rows.back().loss.total;
    if (val_set.size() > 0) {
      report.validation.push_back(evaluate_loss(params, val_set, {}, config.weights));
      monitored = report.validation.back().total;
    }
    if (!std::isfinite(monitored))
      throw NonFiniteLoss("non-finite validation loss after adam epoch " + std::to_string(epoch));
    if (best_val - monitored > config.min_delta) {
      best_val = monitored;
      since_best = 0;
    } else if (++since_best >= config.patience) {
      report.adam_early_stopped = true;
      log("stage adam: validation plateau after epoch " + std::to_string(epoch + 1));
      break;
    }
    if ((epoch + 1) % 100 == 0)
      log("adam epoch " + std::to_string(epoch + 1) + ": " + describe(report.rows.back().loss));
  }

  // Stage 2: full-batch L-BFGS.
  params.assign(theta);
  report.handoff_loss = evaluate_loss(params, train_set, {}, config.weights);
  report.stage_boundary = report.rows.size();
  log("stage lbfgs: start " + describe(report.handoff_loss));
  NetworkParams scratch = params;
  // The accepted iterate is always the most recent evaluation.
  LossValue last_eval;
  auto fg = [&](std::span<const double> x, std::span<double> g) {
    scratch.assign(x);
    last_eval = evaluate_loss(scratch, train_set, {}, config.weights, g);
    return last_eval.total;
  };
  auto observer = [&](std::size_t iter, std::span<const double>, double) {
    report.rows.push_back({report.adam_epochs + iter - 1, Stage::Lbfgs, last_eval});
    if (iter % 100 == 0) log("lbfgs iteration " + std::to_string(iter) + ": " + describe(report.rows.back().loss));
  };
  if (config.lbfgs.max_iterations > 0) {
    const auto res = lbfgs_minimize(theta, fg, config.lbfgs, observer);
    theta = res.x;
    report.lbfgs_initial_loss = res.initial_f;
    report.lbfgs_iterations = res.iterations;
    report.termination = res.reason;
    log("stage lbfgs: " + std::to_string(res.iterations) + " iterations, stopped on " +
        to_string(res.reason));
  } else {
    report.lbfgs_initial_loss = report.handoff_loss.total;
  }

  params.assign(theta);
  report.final_loss = evaluate_loss(params, train_set, {}, config.weights);
  if (val_set.size() > 0) report.final_validation = evaluate_loss(params, val_set, {}, config.weights);
  report.wall_seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  log("final training loss: " + describe(report.final_loss));
  return {{params, stats}, report};
}

std::string to_string(Stage s) { return s == Stage::Adam ? "adam" : "lbfgs"; }

std::string format_report_csv(const TrainReport& report) {
  std::ostringstream out;
  out << "epoch,stage,loss_x,loss_y,loss_z,loss_total\n";
  for (const auto& r : report.rows)
    out << r.epoch << ',' << to_string(r.stage) << ',' << format_double(r.loss.x) << ','
        << format_double(r.loss.y) << ',' << format_double(r.loss.z) << ','
        << format_double(r.loss.total) << '\n';
  return out.str();
}

void write_report_csv(const TrainReport& report, const std::filesystem::path& path) {
  std::ofstream out(path);
  if (!out) throw IoError("cannot open " + path.string() + " for writing");
  out << format_report_csv(report);
  if (!out) throw IoError("failed writing " + path.string());
}

}  // namespace efiln
