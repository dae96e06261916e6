#pragma once

#include "physolver/autodiff.hpp"
#include "physolver/pde.hpp"
#include "physolver/sampling.hpp"

namespace physolver::loss {

using ad::Index;
using ad::Matrix;
using ad::Var;

struct LossWeights {
  double wr = 1.0;
  double wb = 1.0;
  double wi = 1.0;
  double lambdaPhysics = 1.0;  // penalty on the physics system
  double lambdaData = 1.0;     // penalty on the data system
  bool normalizeData = false;  // divide the data mismatch by its number of terms

  void validate() const;
};

struct LossBreakdown {
  double res = 0.0;
  double bc = 0.0;
  double ic = 0.0;
  double physicsTotal = 0.0;
  double data = 0.0;
  double grandTotal = 0.0;
};

/// Network outputs on the physics sets. `residual` must carry the pde's
/// derivative channels; the others only need values. Invalid handles mark sets
/// that were not evaluated (empty).
struct PhysicsOutputs {
  Var residual;
  ad::DerivativeRequest request;
  Var boundary;
  Var initial;
};

/// Scalar tape terms of one objective evaluation; invalid when absent.
struct LossTerms {
  Var res, bc, ic, physics, data, total;

  LossBreakdown breakdown() const;
};

/// Mean over every residual row (k * N_r rows) of the squared residual norm,
/// and likewise for boundary (k * N_b rows, periodic pairs counted once) and
/// initial (N_i rows). The physics total is w_r res + w_b bc + w_i ic.
LossTerms physicsLoss(const PhysicsOutputs& out, const sampling::GridBundle& bundle, const pde::PdeDefinition& pde,
                      const LossWeights& w);

/// Sum of squared mismatches, or their mean when `normalize`.
Var dataLoss(Var prediction, const Matrix& reference, bool normalize = false);

/// lambda_physics * physics + lambda_data * data.
double totalLoss(const LossBreakdown& b, const LossWeights& w);
/// Fills `terms.total` from the physics and data terms.
void assembleTotal(LossTerms& terms, const LossWeights& w);

/// Unnormalized w_r sum res^2 + w_b sum bc^2 + w_i sum ic^2 over pointwise sets.
LossTerms pinnsEmpiricalLoss(const PhysicsOutputs& out, const sampling::GridBundle& bundle,
                             const pde::PdeDefinition& pde, const LossWeights& w);

}  // namespace physolver::loss
