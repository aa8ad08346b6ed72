#pragma once

#include "mvps/types.hpp"

namespace mvps {

/// Calibrated near-field LED.
struct PointLight {
  Vec3 position = Vec3::Zero();
  Vec3 direction = Vec3::UnitZ();  // principal direction, unit
  double brightness = 1.0;         // phi > 0
  double mu = 0.0;                 // angular dissipation >= 0

  /// Throws InputError on a non-unit direction or out-of-range phi / mu.
  void validate() const;
};

}  // namespace mvps
