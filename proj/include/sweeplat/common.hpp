#pragma once

#include <Eigen/Dense>

#include <stdexcept>
#include <string>

namespace sweeplat {

using Matrix = Eigen::MatrixXd;
using Vector = Eigen::VectorXd;
using Index = Eigen::Index;

struct Error : std::runtime_error {
  using std::runtime_error::runtime_error;
};

struct RankDeficient : Error { using Error::Error; };
struct InvalidParams : Error { using Error::Error; };
struct DegenerateSpring : Error { using Error::Error; };
struct Infeasible : Error { using Error::Error; };
struct MaxIterations : Error { using Error::Error; };
struct InconsistentEqualities : Error { using Error::Error; };
struct NotSelfStressed : Error { using Error::Error; };
struct WrongDimension : Error { using Error::Error; };
struct UnsupportedDimension : Error { using Error::Error; };
struct PreconditionViolated : Error { using Error::Error; };

}  // namespace sweeplat
