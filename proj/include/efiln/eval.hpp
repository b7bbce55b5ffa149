#pragma once

// Localization metrics in meters and synthetic test trajectories.

#include <array>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "efiln/dataset.hpp"
#include "efiln/field_model.hpp"
#include "efiln/network.hpp"

namespace efiln {

struct EvalMetrics {
  std::array<double, 3> mae{};   // m
  std::array<double, 3> rmse{};  // m
  double mean_euclidean = 0.0;   // m
  /// mean(MAE) / mean axis extent * 100.
  double percent_error = 0.0;
  std::size_t points = 0;
};

struct Trajectory {
  std::string name;
  std::vector<Position> truth;
  std::vector<Position> predicted;
};

enum class TrajectoryKind { Spiral, Circle, Random };

TrajectoryKind parse_trajectory_kind(std::string_view name);
std::string to_string(TrajectoryKind kind);

/// Normalize the field, run the network, map the output back to meters.
Position predict(const Checkpoint& model, const FieldVector& field);
std::vector<Position> predict(const Checkpoint& model, std::span<const FieldVector> fields);

/// Test paths inside the domain that never land on a lattice node:
///  spiral: helix about the domain center, radius 0.3 extent, three turns,
///          z across the middle 80% of the domain;
///  circle: horizontal circle of radius 0.3 extent at mid height (the height
///          is moved half a step off the lattice when it sits on it);
///  random: uniform over the open box.
/// Throws DomainTooSmall when an axis spans fewer than four steps, and
/// ConfigError when n < 2.
std::vector<Position> make_trajectory(TrajectoryKind kind, std::size_t n, std::uint64_t seed,
                                      const GridSpec& domain);

/// Metrics from paired truths and predictions. extent is the axis extent used
/// for the percent error.
EvalMetrics compute_metrics(std::span<const Position> truth, std::span<const Position> predicted,
                            double extent);

struct EvalOptions {
  double noise_intensity = 0.0;
  std::uint64_t noise_seed = 0;
  /// When set, points must avoid its nodes.
  std::optional<GridSpec> grid;
  std::string name = "points";
};

struct EvalResult {
  EvalMetrics metrics;
  Trajectory trajectory;
};

/// Synthesizes fields at the true points (optionally noised with the dataset
/// noise model over this point set), inverts them and scores the result.
/// Throws ConfigError for points outside the model's position range or on a
/// grid node.
EvalResult evaluate(const Checkpoint& model, std::span<const Position> points,
                    std::span<const ElectrodeSystem> electrodes, const PhysicalConstants& constants,
                    const EvalOptions& options = {});

/// idx,true_x,true_y,true_z,pred_x,pred_y,pred_z
void write_trajectory_csv(const Trajectory& t, const std::filesystem::path& path);
/// Reads x,y,z rows (header "x,y,z").
std::vector<Position> load_points_csv(const std::filesystem::path& path);

std::string format_metrics(const EvalMetrics& m);
EvalMetrics parse_metrics(const std::string& text);
std::string metrics_csv_header();
std::string metrics_csv_row(const EvalMetrics& m);

}  // namespace efiln
