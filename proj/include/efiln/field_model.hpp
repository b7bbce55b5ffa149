#pragma once

// Point-charge electrostatics for underwater electrode systems.
//
// Each electrode system is modelled as a point charge; the field at a point is
// the superposition of Coulomb fields of every source:
//
//   E(p) = sum_i Q_i (p - s_i) / (4 pi eps0 |p - s_i|^3)
//
// All functions are pure and safe to call concurrently.

#include <span>
#include <vector>

namespace efiln {

struct Position {
  double x = 0.0;
  double y = 0.0;
  double z = 0.0;

  double operator[](int axis) const { return axis == 0 ? x : (axis == 1 ? y : z); }
  double& operator[](int axis) { return axis == 0 ? x : (axis == 1 ? y : z); }
  friend bool operator==(const Position&, const Position&) = default;
};

/// Electric field components in V/m.
struct FieldVector {
  double ex = 0.0;
  double ey = 0.0;
  double ez = 0.0;

  double operator[](int axis) const { return axis == 0 ? ex : (axis == 1 ? ey : ez); }
  double& operator[](int axis) { return axis == 0 ? ex : (axis == 1 ? ey : ez); }
  double norm() const;

  FieldVector& operator+=(const FieldVector& o) {
    ex += o.ex;
    ey += o.ey;
    ez += o.ez;
    return *this;
  }
  friend FieldVector operator+(FieldVector a, const FieldVector& b) { return a += b; }
  friend FieldVector operator-(const FieldVector& a) { return {-a.ex, -a.ey, -a.ez}; }
  friend bool operator==(const FieldVector&, const FieldVector&) = default;
};

/// A charged source. The charge must be finite and nonzero.
struct ElectrodeSystem {
  Position source;
  double charge = 0.0;  // coulombs
};

struct PhysicalConstants {
  double epsilon0 = 8.854e-12;       // F/m
  double exclusion_radius = 1e-6;    // m; evaluation closer than this to a source is an error

  /// Coulomb constant 1/(4 pi eps0).
  double coulomb_k() const;
};

/// The two electrode systems of the reference scenario: +1 C at the origin
/// and -1 C at (0, 0, 100).
std::vector<ElectrodeSystem> default_electrodes();

/// Validates an electrode list (non-empty, finite positions, finite nonzero
/// charges). Throws ConfigError.
void validate_electrodes(std::span<const ElectrodeSystem> electrodes);

/// Throws SourceCoincidence when |p - source| <= exclusion radius.
FieldVector field_of_single_charge(const Position& p, const ElectrodeSystem& e,
                                   const PhysicalConstants& c);

/// Superposition over all electrodes. Throws SourceCoincidence if any term does.
FieldVector field_at(const Position& p, std::span<const ElectrodeSystem> electrodes,
                     const PhysicalConstants& c);

/// Central-difference estimate of div E at p with stencil half-width h.
/// Zero (up to truncation) anywhere away from the sources.
double numerical_divergence(const Position& p, std::span<const ElectrodeSystem> electrodes,
                            const PhysicalConstants& c, double h);

/// Distance from p to the closest source.
double nearest_source_distance(const Position& p, std::span<const ElectrodeSystem> electrodes);

}  // namespace efiln
