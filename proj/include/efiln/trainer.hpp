#pragma once

// Two-stage training: shuffled minibatch Adam, then full-batch L-BFGS, on the
// weighted per-axis squared error in normalized coordinates.

#include <cstdint>
#include <filesystem>
#include <functional>
#include <span>
#include <string>
#include <vector>

#include "efiln/dataset.hpp"
#include "efiln/network.hpp"
#include "efiln/optim.hpp"

namespace efiln {

struct LossWeights {
  double alpha = 1.0;
  double beta = 1.0;
  double gamma = 1.0;

  void validate() const;
  double operator[](int axis) const { return axis == 0 ? alpha : (axis == 1 ? beta : gamma); }
};

/// Per-axis mean squared error and the weighted total.
struct LossValue {
  double total = 0.0;
  double x = 0.0;
  double y = 0.0;
  double z = 0.0;
};

/// Normalized samples packed sample-major: inputs[3 s + c] is field component
/// c of sample s, targets[3 s + c] the position component.
struct PackedSamples {
  std::vector<double> inputs;
  std::vector<double> targets;
  std::size_t size() const { return inputs.size() / 3; }
};

PackedSamples pack(const Dataset& normalized);

/// Loss over the samples named by indices (all samples when empty). When grad
/// is non-empty it receives the gradient of the total, averaged over the batch.
/// Work is split into fixed-size chunks reduced in order, so the result does
/// not depend on the worker count.
LossValue evaluate_loss(const NetworkParams& params, const PackedSamples& data,
                        std::span<const std::size_t> indices, const LossWeights& weights,
                        std::span<double> grad = {});

LossValue loss(const NetworkParams& params, std::span<const Sample> batch, const LossWeights& weights);
std::vector<double> loss_gradient(const NetworkParams& params, std::span<const Sample> batch,
                                  const LossWeights& weights);

struct TrainConfig {
  Architecture architecture = Architecture::reference();
  std::uint64_t init_seed = 1;
  AdamConfig adam;
  std::size_t max_epochs = 50000;
  std::size_t batch_size = 4096;
  /// Stop Adam after this many epochs without a validation improvement of
  /// more than min_delta.
  std::size_t patience = 500;
  double min_delta = 1e-9;
  bool shuffle = true;
  std::uint64_t shuffle_seed = 2;
  LbfgsConfig lbfgs;
  LossWeights weights;
  double holdout_fraction = 0.1;
  std::uint64_t split_seed = 3;
  /// Optional progress sink.
  std::function<void(const std::string&)> log;

  void validate() const;
};

enum class Stage { Adam, Lbfgs };

struct LossRow {
  std::size_t epoch = 0;
  Stage stage = Stage::Adam;
  LossValue loss;
};

struct TrainReport {
  /// One row per Adam epoch (mean minibatch loss over the epoch) followed by
  /// one row per accepted L-BFGS iteration (full-batch loss).
  std::vector<LossRow> rows;
  std::vector<LossValue> validation;  // per Adam epoch; empty without a holdout
  std::size_t stage_boundary = 0;     // index of the first L-BFGS row
  std::size_t adam_epochs = 0;
  bool adam_early_stopped = false;
  LossValue handoff_loss;             // full-batch loss when Adam hands over
  double lbfgs_initial_loss = 0.0;
  std::size_t lbfgs_iterations = 0;
  TerminationReason termination = TerminationReason::MaxIterations;
  LossValue final_loss;               // full-batch training loss at the result
  LossValue final_validation;
  double wall_seconds = 0.0;
};

struct TrainResult {
  Checkpoint model;
  TrainReport report;
};

/// Splits the raw dataset, fits normalization on the training part, and runs
/// both stages. Throws NonFiniteLoss naming the offending batch.
TrainResult train(const TrainConfig& config, const Dataset& raw);

std::string to_string(Stage s);
/// CSV: epoch,stage,loss_x,loss_y,loss_z,loss_total
void write_report_csv(const TrainReport& report, const std::filesystem::path& path);
std::string format_report_csv(const TrainReport& report);

}  // namespace efiln
