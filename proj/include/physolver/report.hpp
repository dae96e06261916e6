#pragma once

#include "physolver/metrics.hpp"
#include "physolver/trainer.hpp"

#include <filesystem>
#include <optional>

namespace physolver::report {

/// Errors of one trained model. Multi-field benchmarks are scored on their
/// last field (pressure for Navier-Stokes).
struct Evaluation {
  std::vector<metrics::ErrorRow> rows;
  std::vector<double> forwardPerTime;  // one entry per training time node
  std::vector<double> forecastPerTime;  // one entry per held-out node
  metrics::FieldTable forwardField;     // prediction on the training grid
  metrics::FieldTable forecastField;    // prediction on the held-out nodes
};

/// Forward error on the full training grid; forecast-1 on the first held-out
/// node; forecast-multi on every held-out node when there is more than one.
Evaluation evaluate(const trainer::Experiment& exp, const trainer::TrainedModel& trained);

/// Two-frame extrapolation from the reference at the last two training nodes,
/// recursively over the held-out nodes.
Evaluation extrapolationBaseline(const trainer::Experiment& exp);

struct RunResult {
  trainer::TrainedModel trained;
  Evaluation evaluation;
};

/// Trains, evaluates and, when `outDir` is set, writes config.snapshot,
/// trace.csv, checkpoint.bin, errors.csv and fields/*.csv.
RunResult run(const ExperimentConfig& cfg, const std::optional<std::filesystem::path>& outDir, bool verbose = false);

/// Writes the error rows and the extrapolation fields of a baseline run.
void writeEvaluation(const Evaluation& ev, const std::filesystem::path& outDir, const std::string& tag);

}  // namespace physolver::report
