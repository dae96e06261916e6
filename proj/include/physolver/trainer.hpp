#pragma once

#include "physolver/config.hpp"

#include <chrono>
#include <functional>
#include <memory>
#include <optional>

namespace physolver::trainer {

using ad::Index;
using ad::Matrix;
using ad::ParameterVector;
using ad::Vector;

/// Axis nodes of the experiment's tensor grid and the train/held-out split.
struct GridAxes {
  std::vector<double> times;         // all time nodes
  std::vector<double> trainTimes;    // leading nodes used for training
  std::vector<double> heldOutTimes;  // remaining nodes, forecasting targets
  std::vector<std::vector<double>> space;
};

GridAxes gridAxes(const ExperimentConfig& cfg, const pde::PdeDefinition& pde);

/// Builds the residual, boundary, initial and data sets. Reference values are
/// read only for the data stamps, and only when the data system is active.
sampling::GridBundle buildBundle(const ExperimentConfig& cfg, const pde::PdeDefinition& pde,
                                 const pde::ReferenceSolution* reference);

/// Reference selected by the config (closed form, Taylor-Green or file).
std::shared_ptr<const pde::ReferenceSolution> makeReference(const ExperimentConfig& cfg, const pde::PdeDefinition& pde);

std::unique_ptr<model::Model> makeModel(const ExperimentConfig& cfg);

/// Differentiable training objective over the whole bundle (full batch).
class Objective {
 public:
  Objective(const ExperimentConfig& cfg, const pde::PdeDefinition& pde, const model::Model& model,
            const sampling::GridBundle& bundle);

  /// Objective value; writes the gradient w.r.t. theta.
  double operator()(const Vector& theta, Vector& grad);
  /// Value only, with the loss breakdown.
  loss::LossBreakdown evaluate(const Vector& theta) const;
  const loss::LossBreakdown& last() const { return last_; }

 private:
  loss::LossTerms build(ad::Tape& tape, const ParameterVector& theta) const;

  ExperimentConfig cfg_;
  pde::PdeDefinition pde_;
  const model::Model& model_;
  const sampling::GridBundle& bundle_;
  loss::LossBreakdown last_;
};

struct TrainedModel {
  Method method = Method::PhysicsSolver;
  ExperimentConfig config;
  ParameterVector theta;
  loss::LossBreakdown finalLoss;
  optim::Status status = optim::Status::MaxIterations;
  std::vector<optim::TraceRow> trace;
  std::vector<loss::LossBreakdown> traceLosses;  // breakdown at every accepted step
  std::uint64_t referenceAccesses = 0;           // reference points read while building and training
  double trainSeconds = 0.0;
};

/// Everything needed to train and evaluate one configuration.
class Experiment {
 public:
  explicit Experiment(ExperimentConfig cfg);

  const ExperimentConfig& config() const { return cfg_; }
  const pde::PdeDefinition& pde() const { return pde_; }
  const pde::ReferenceSolution& reference() const { return *reference_; }
  const model::Model& model() const { return *model_; }
  const GridAxes& axes() const { return axes_; }

  /// Builds the bundle and runs L-BFGS. `onStep` sees every accepted step.
  TrainedModel train(const std::function<void(const optim::TraceRow&, const loss::LossBreakdown&)>& onStep = {});

  /// Model output at arbitrary (t, x[, y]) rows. Physics-Attention models
  /// expand every query into a pseudo sequence and read back position 0.
  Matrix predict(const ParameterVector& theta, const Matrix& coords) const;

  /// Coordinates of the tensor grid at the given times (time-major).
  Matrix gridAt(const std::vector<double>& times) const;

 private:
  ExperimentConfig cfg_;
  pde::PdeDefinition pde_;
  std::shared_ptr<const pde::ReferenceSolution> reference_;
  std::unique_ptr<model::Model> model_;
  GridAxes axes_;
};

/// Predictions on the spatial grid at time t, beyond the training interval.
Matrix forecastSingleStep(const Experiment& exp, const TrainedModel& trained, double t);
/// Direct strategy: every stamp evaluated independently. One matrix per time.
std::vector<Matrix> forecastMultiStep(const Experiment& exp, const TrainedModel& trained,
                                      const std::vector<double>& times);

/// 2 u(t) - u(t - dt).
Matrix extrapolate(const Matrix& current, const Matrix& previous);
/// Feeds its own outputs forward for `steps` frames.
std::vector<Matrix> extrapolateRecursive(const Matrix& previous, const Matrix& current, int steps);

}  // namespace physolver::trainer
