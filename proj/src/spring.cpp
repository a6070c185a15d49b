#include "sweeplat/spring.hpp"

#include <cmath>

namespace sweeplat::spring {

namespace {

double feedback_term(const SpringParams& p) { return p.s * p.s * (1.0 - p.h) / p.k; }

}  // namespace

void validate(const SpringParams& p) {
  if (!(p.k > 0.0)) throw InvalidParams("spring: stiffness k must be positive");
  if (!(p.s >= 0.0)) throw InvalidParams("spring: geometric slope s must be nonnegative");
  if (!(p.c0 > 0.0)) throw InvalidParams("spring: initial yield stress c0 must be positive");
  if (!std::isfinite(p.h)) throw InvalidParams("spring: feedback coefficient h must be finite");
  // The borderline value -1 is rejected too: the plastic modulus blows up there.
  if (!(feedback_term(p) > -1.0)) {
    throw InvalidParams("spring: solvability requires s^2 (1-h) / k > -1");
  }
}

double plasticity_modulus(const SpringParams& p) {
  validate(p);
  const double w = p.s * p.s * (1.0 - p.h);
  return w / (1.0 + w / p.k);
}

PlasticityType classify(const SpringParams& p) {
  validate(p);
  if (p.s == 0.0 || p.h == 1.0) return PlasticityType::Perfect;
  return p.h < 1.0 ? PlasticityType::Hardening : PlasticityType::Softening;
}

std::optional<double> failure_damage(const SpringParams& p) {
  validate(p);
  if (p.h > 1.0 && p.s > 0.0) return p.c0 / (p.s * (p.h - 1.0));
  return std::nullopt;
}

const char* type_name(PlasticityType t) {
  switch (t) {
    case PlasticityType::Hardening: return "hardening";
    case PlasticityType::Perfect: return "perfect";
    case PlasticityType::Softening: return "softening";
  }
  return "?";
}

}  // namespace sweeplat::spring
