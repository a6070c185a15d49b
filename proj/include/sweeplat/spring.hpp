#pragma once

#include "sweeplat/common.hpp"

#include <optional>

namespace sweeplat {

// Per-spring constitutive constants: stiffness k, state-feedback coefficient h,
// geometric slope s, initial yield stress c0.
struct SpringParams {
  double k = 1.0;
  double h = 1.0;
  double s = 0.0;
  double c0 = 1.0;
};

enum class PlasticityType { Hardening, Perfect, Softening };

namespace spring {

// k > 0, s >= 0, c0 > 0 and the solvability condition s^2 (1-h) / k > -1.
void validate(const SpringParams& p);

// Slope of the stress-elongation curve in the plastic regime,
// E^p = s^2 (1-h) / (1 + s^2 (1-h) / k).  Always below k.
double plasticity_modulus(const SpringParams& p);

PlasticityType classify(const SpringParams& p);

// Damage level at which a softening spring's admissible stress interval
// degenerates to {0}: c0 / (s (h-1)).  Empty unless h > 1 and s > 0.
std::optional<double> failure_damage(const SpringParams& p);

const char* type_name(PlasticityType t);

}  // namespace spring
}  // namespace sweeplat
