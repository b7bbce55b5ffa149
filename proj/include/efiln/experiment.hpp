#pragma once

// End-to-end runs assembled from the library modules: dataset synthesis,
// training, trajectory evaluation and the noise / sampling-interval sweeps.

#include <cstdint>
#include <filesystem>
#include <string>
#include <string_view>
#include <vector>

#include "efiln/config.hpp"
#include "efiln/eval.hpp"
#include "efiln/trainer.hpp"

namespace efiln {

/// Grid samples with the configured noise applied.
Dataset make_dataset(const ExperimentConfig& config);

/// 64-bit FNV-1a, hex-encoded.
std::string fnv1a_hex(std::string_view bytes);
std::string hash_file(const std::filesystem::path& path);

/// Errors on `points` random off-grid points, plus the spiral and circle paths.
struct TrajectoryEval {
  TrajectoryKind kind;
  EvalResult result;
};

std::vector<TrajectoryEval> evaluate_trajectories(const Checkpoint& model, const ExperimentConfig& config,
                                                  double eval_noise);
EvalResult evaluate_kind(const Checkpoint& model, const ExperimentConfig& config, TrajectoryKind kind,
                         double eval_noise);

struct SweepRow {
  double level = 0.0;  // noise fraction or step in m
  EvalMetrics metrics;
};

/// label,mae_x,mae_y,mae_z with one row per level.
std::string format_sweep_csv(std::string_view label, const std::vector<SweepRow>& rows);

/// One model, evaluation-time noise varied; random trajectory.
std::vector<SweepRow> sweep_eval_noise(const Checkpoint& model, const ExperimentConfig& config,
                                       const std::vector<double>& levels);
/// Regenerates, retrains and evaluates per training-noise level.
std::vector<SweepRow> sweep_train_noise(const ExperimentConfig& config, const std::vector<double>& levels);
/// Regenerates, retrains and evaluates per grid step.
std::vector<SweepRow> sweep_step(const ExperimentConfig& config, const std::vector<double>& steps);

/// Writes config snapshot, dataset hash, checkpoint, loss curves and a
/// summary into dir.
void write_training_outputs(const std::filesystem::path& dir, const ExperimentConfig& config,
                            const std::string& dataset_hash, const TrainResult& result);

std::vector<double> parse_level_list(const std::string& text);

}  // namespace efiln
