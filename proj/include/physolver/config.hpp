#pragma once

#include "physolver/loss.hpp"
#include "physolver/model.hpp"
#include "physolver/optim.hpp"
#include "physolver/pde.hpp"
#include "physolver/sampling.hpp"

#include <json.hpp>

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

namespace physolver {

enum class Method { PhysicsSolver, Pinns, PinnsformerAblation };
std::string_view methodName(Method m);
Method parseMethod(std::string_view name);

enum class ReferenceSource { ClosedForm, TaylorGreen, File };

struct GridConfig {
  int tCount = 5;
  int xCount = 101;
  int yCount = 0;  // 0 for one spatial dimension
  /// Leading time nodes used for training; the rest are held out for forecasting.
  int trainTCount = 4;
  /// Boundary times (T_b), evenly spaced over the training interval; 0 means
  /// the training time nodes themselves.
  int boundaryTCount = 0;
  int collocationTStride = 1;
  int collocationXStride = 1;
  int collocationYStride = 1;
  /// Boundary condition imposed over the whole time domain, forecast nodes included.
  /// The condition is part of the problem statement, not measured data.
  bool boundaryFullSpan = false;
};

struct DataConfig {
  int nData = 2;
  bool snap = true;  // snap Halton stamps onto training time nodes
};

struct ExperimentConfig {
  std::string preset = "heat";
  Method method = Method::PhysicsSolver;
  std::uint64_t seed = 0;
  bool paperScale = false;
  pde::PdeKind pde = pde::PdeKind::Heat;
  pde::PdeParameters params;
  GridConfig grid;
  sampling::IpsggConfig ipsgg{5, 1e-3, 1.1};
  /// Also expand initial and data points into pseudo sequences (loss on position 0).
  bool expandAnchors = false;
  DataConfig data;
  loss::LossWeights weights;
  optim::LbfgsConfig lbfgs;
  /// Desk-scale network: feed-forward width 64, output MLP 64-64, attention eps 1.
  model::PhysicsSolverSpec solver{2, 1, 32, 2, 64, {}, {64, 64}, 1.0, 1e-5};
  model::PinnSpec pinn;
  /// Map the space-time domain box onto [-1, 1] per coordinate before the network.
  bool normalizeInputs = false;
  ReferenceSource reference = ReferenceSource::ClosedForm;
  std::string referencePath;
  int evalChunk = 4096;

  /// Throws ConfigError on inconsistent settings.
  void validate() const;
  /// Effective Physics-Attention network and PINN sizes (paper_scale applied).
  model::PhysicsSolverSpec solverSpec() const;
  model::PinnSpec pinnSpec() const;
  /// True when the data system contributes to training.
  bool usesData() const;
};

/// Named defaults: heat, reaction, convection, convection-reduced, navier-stokes.
ExperimentConfig preset(std::string_view name);
std::vector<std::string> presetNames();

nlohmann::json toJson(const ExperimentConfig& cfg);
/// Missing keys keep their preset values; unknown keys are a ConfigError.
ExperimentConfig fromJson(const nlohmann::json& j);

/// Every dotted leaf key, in document order.
std::vector<std::string> knownKeys();

/// Applies `key=value` (dotted key) to a resolved config document. The value
/// is parsed according to the type of the existing leaf.
void applyOverride(nlohmann::json& doc, std::string_view assignment);

/// Reads a JSON config file (its `preset`, or `pde.name`, selects the base
/// defaults), then applies the overrides in order.
ExperimentConfig loadConfig(const std::optional<std::filesystem::path>& path,
                            const std::vector<std::string>& overrides = {});

}  // namespace physolver
