#pragma once

#include <Eigen/Dense>

#include <functional>
#include <string_view>
#include <vector>

namespace physolver::optim {

using Vector = Eigen::VectorXd;

struct LbfgsConfig {
  int historySize = 100;
  int maxIterations = 500;
  double c1 = 1e-4;
  double c2 = 0.9;
  int maxLineSearchSteps = 25;
  double gradTolerance = 1e-9;  // on the max-norm of the gradient
  double initialStep = 1.0;
  /// Line search gives up once the bracket, measured along the direction, is shorter than this.
  double bracketTolerance = 1e-14;

  void validate() const;
};

enum class Status { MaxIterations, GradientTolerance, LineSearchFailure, NoProgress };
std::string_view statusName(Status s);

struct TraceRow {
  int iteration = 0;
  double value = 0.0;
  double gradNorm = 0.0;  // max-norm after the step
  double step = 0.0;
  int evaluations = 0;  // objective calls so far
  bool armijo = true;
  bool curvature = true;
};

struct Result {
  Vector theta;
  double value = 0.0;
  Vector gradient;
  Status status = Status::MaxIterations;
  std::vector<TraceRow> trace;
  int evaluations = 0;
};

/// Returns f(theta) and writes the gradient into `grad` (already sized).
using Objective = std::function<double(const Vector& theta, Vector& grad)>;
using Callback = std::function<void(const TraceRow&)>;

/// L-BFGS with a strong Wolfe line search (cubic interpolation, bracketing
/// zoom). Every accepted step satisfies both Wolfe conditions; a failed line
/// search first retries along steepest descent with the history cleared, then
/// stops with Status::LineSearchFailure.
Result minimize(const Objective& objective, Vector theta0, const LbfgsConfig& cfg, const Callback& onStep = {});

}  // namespace physolver::optim
