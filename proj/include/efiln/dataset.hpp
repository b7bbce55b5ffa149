#pragma once

// Position -> field corpora: grid sampling, noise injection, min-max
// normalization, splitting and CSV persistence.

#include <array>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "efiln/field_model.hpp"

namespace efiln {

/// Axis-aligned sampling lattice. Each axis holds min + i*step for every i
/// with min + i*step <= max (within 1e-9 steps), so both endpoints are kept
/// when the extent is a whole number of steps.
struct GridSpec {
  std::array<double, 3> min{10.0, 10.0, 10.0};
  std::array<double, 3> max{110.0, 110.0, 110.0};
  std::array<double, 3> step{0.5, 0.5, 0.5};

  /// Full-scale reference grid: [10, 110]^3 at 0.5 m.
  static GridSpec reference();
  /// Desk-scale grid: [10, 60]^3 at 1.0 m.
  static GridSpec desk();
  static GridSpec uniform(double lo, double hi, double step);

  void validate() const;
  std::size_t points_on_axis(int axis) const;
  std::size_t size() const;
  /// False when some axis extent is not an integral number of steps and the
  /// overhanging endpoint is dropped.
  bool endpoints_exact() const;
  double node(int axis, std::size_t i) const { return min[axis] + static_cast<double>(i) * step[axis]; }
  double extent(int axis) const { return max[axis] - min[axis]; }
  bool contains(const Position& p) const;
  /// True when p coincides exactly with a lattice node.
  bool is_node(const Position& p) const;
};

struct Sample {
  Position position;
  FieldVector field;
  friend bool operator==(const Sample&, const Sample&) = default;
};

/// Per-component extrema used for min-max scaling of positions and fields.
struct NormStats {
  std::array<double, 3> pos_min{};
  std::array<double, 3> pos_max{};
  std::array<double, 3> field_min{};
  std::array<double, 3> field_max{};

  Position normalize(const Position& p) const;
  FieldVector normalize(const FieldVector& f) const;
  Position denormalize(const Position& p_norm) const;
  friend bool operator==(const NormStats&, const NormStats&) = default;
};

struct Dataset {
  std::vector<Sample> samples;
  std::optional<NormStats> stats;  // set when samples are normalized
  double noise_intensity = 0.0;
  std::uint64_t seed = 0;

  std::size_t size() const { return samples.size(); }
  bool normalized() const { return stats.has_value(); }
};

/// One sample per node, x-major then y then z. Throws SourceCoincidence if a
/// node falls inside a source's exclusion radius.
Dataset generate_grid(const GridSpec& spec, std::span<const ElectrodeSystem> electrodes,
                      const PhysicalConstants& constants);

/// Adds N(0, (intensity * sigma_c)^2) to every field component c, where
/// sigma_c is the population standard deviation of that component over d.
/// Positions are untouched. Each sample draws from its own (seed, index)
/// stream, so the result does not depend on evaluation order.
Dataset add_noise(const Dataset& d, double intensity, std::uint64_t seed);

/// Per-component population standard deviation of the fields.
std::array<double, 3> field_std(const Dataset& d);

/// Exact extrema. Throws DegenerateComponent for M < 2 or any max == min.
NormStats fit_norm_stats(const Dataset& d);

/// Affine min-max map of every component; values outside the fitted range
/// land outside [0, 1].
Dataset normalize(const Dataset& d, const NormStats& s);
Position denormalize_position(const Position& p_norm, const NormStats& s);

struct SplitIndices {
  std::vector<std::size_t> train;
  std::vector<std::size_t> validation;
};

/// Seeded partition with round(fraction * M) validation samples. Both parts
/// keep the original relative order.
SplitIndices split_indices(std::size_t m, double holdout_fraction, std::uint64_t seed);
std::pair<Dataset, Dataset> split(const Dataset& d, double holdout_fraction, std::uint64_t seed);
Dataset subset(const Dataset& d, std::span<const std::size_t> indices);

/// CSV with header x,y,z,ex,ey,ez; shortest round-trip decimal formatting.
void save_csv(const Dataset& d, const std::filesystem::path& path);
Dataset load_csv(const std::filesystem::path& path);

/// Key-value sidecar: x_min=..., ..., ez_max=... (twelve keys).
void save_stats(const NormStats& s, const std::filesystem::path& path);
NormStats load_stats(const std::filesystem::path& path);
std::string format_stats(const NormStats& s);
NormStats parse_stats(const std::string& text);

/// Shortest decimal text that parses back to exactly v.
std::string format_double(double v);
/// Strict parse of a whole token; returns nullopt on any trailing garbage.
std::optional<double> parse_double(std::string_view text);

}  // namespace efiln
