#include "efiln/field_model.hpp"

#include <cmath>
#include <limits>
#include <numbers>
#include <sstream>

#include "efiln/errors.hpp"

namespace efiln {

double FieldVector::norm() const { return std::sqrt(ex * ex + ey * ey + ez * ez); }

double PhysicalConstants::coulomb_k() const {
  return 1.0 / (4.0 * std::numbers::pi * epsilon0);
}

std::vector<ElectrodeSystem> default_electrodes() {
  return {{{0.0, 0.0, 0.0}, 1.0}, {{0.0, 0.0, 100.0}, -1.0}};
}

void validate_electrodes(std::span<const ElectrodeSystem> electrodes) {
  if (electrodes.empty()) throw ConfigError("electrode list is empty");
  for (const auto& e : electrodes) {
    if (!std::isfinite(e.source.x) || !std::isfinite(e.source.y) || !std::isfinite(e.source.z))
      throw ConfigError("electrode position must be finite");
    if (!std::isfinite(e.charge) || e.charge == 0.0)
      throw ConfigError("electrode charge must be finite and nonzero");
  }
}

FieldVector field_of_single_charge(const Position& p, const ElectrodeSystem& e,
                                   const PhysicalConstants& c) {
  const double dx = p.x - e.source.x;
  const double dy = p.y - e.source.y;
  const double dz = p.z - e.source.z;
  const double r2 = dx * dx + dy * dy + dz * dz;
  const double r = std::sqrt(r2);
  if (!(r > c.exclusion_radius)) {
    std::ostringstream msg;
    msg << "evaluation point (" << p.x << ", " << p.y << ", " << p.z
        << ") is within the exclusion radius of the source at (" << e.source.x << ", "
        << e.source.y << ", " << e.source.z << ")";
    throw SourceCoincidence(msg.str());
  }
  const double scale = c.coulomb_k() * e.charge / (r2 * r);
  return {scale * dx, scale * dy, scale * dz};
}

FieldVector field_at(const Position& p, std::span<const ElectrodeSystem> electrodes,
                     const PhysicalConstants& c) {
  FieldVector total;
  for (const auto& e : electrodes) total += field_of_single_charge(p, e, c);
  return total;
}

double numerical_divergence(const Position& p, std::span<const ElectrodeSystem> electrodes,
                            const PhysicalConstants& c, double h) {
  if (!(h > 0.0)) throw ConfigError("divergence stencil width must be positive");
  double div = 0.0;
  for (int axis = 0; axis < 3; ++axis) {
    Position fwd = p;
    Position bwd = p;
    fwd[axis] += h;
    bwd[axis] -= h;
    const double ef = field_at(fwd, electrodes, c)[axis];
    const double eb = field_at(bwd, electrodes, c)[axis];
    div += (ef - eb) / (2.0 * h);
  }
  return div;
}

double nearest_source_distance(const Position& p, std::span<const ElectrodeSystem> electrodes) {
  double best = std::numeric_limits<double>::infinity();
  for (const auto& e : electrodes) {
    const double dx = p.x - e.source.x;
    const double dy = p.y - e.source.y;
    const double dz = p.z - e.source.z;
    best = std::min(best, std::sqrt(dx * dx + dy * dy + dz * dz));
  }
  return best;
}

}  // namespace efiln
