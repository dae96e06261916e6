#include "physolver/loss.hpp"

#include "physolver/errors.hpp"

#include <cmath>

namespace physolver::loss {

namespace {

double valueOf(const Var& v) { return v.valid() ? v.value()(0, 0) : 0.0; }

Var weighted(Var acc, double w, Var term) {
  if (!term.valid() || w == 0.0) return acc;
  Var scaled = ad::scale(term, w);
  return acc.valid() ? ad::add(acc, scaled) : scaled;
}

Var meanSquares(Var x, double count) { return ad::scale(ad::sumSquares(x), 1.0 / count); }

Var minusConstant(Var x, const Matrix& c) { return ad::sub(x, x.tape().constant(c)); }

/// Squared-sum terms of the three physics sets; `normalize` divides by the
/// number of rows (periodic pairs counted once).
LossTerms physicsTerms(const PhysicsOutputs& out, const sampling::GridBundle& bundle, const pde::PdeDefinition& pde,
                       const LossWeights& w, bool normalize) {
  LossTerms t;
  auto finish = [&](Var x, Index n) {
    if (n == 0) throw ConfigError("empty grid set in the physics loss");
    return normalize ? meanSquares(x, static_cast<double>(n)) : ad::sumSquares(x);
  };

  if (!bundle.residual.empty()) {
    if (!out.residual.valid()) throw ContractViolation("residual set was not evaluated");
    if (out.residual.rows() != bundle.residual.rows()) throw ContractViolation("residual output has the wrong length");
    auto fields = pde::fieldsFromOutput(out.residual, pde, out.request);
    Var acc;
    for (Var r : pde::residuals<Var>(pde, std::span<const pde::Field<Var>>(fields)))
      acc = acc.valid() ? ad::add(acc, finish(r, r.rows())) : finish(r, r.rows());
    t.res = acc;
  } else if (w.wr != 0.0) {
    throw ConfigError("empty residual grid");
  }

  if (!bundle.boundary.empty() && bundle.boundaryKind != sampling::BoundaryKind::None) {
    Var b = out.boundary;
    if (!b.valid() || b.rows() != bundle.boundary.rows()) throw ContractViolation("boundary output has the wrong length");
    if (bundle.boundaryKind == sampling::BoundaryKind::Periodic) {
      const Index half = b.rows() / 2;
      t.bc = finish(ad::sub(ad::sliceRows(b, 0, half), ad::sliceRows(b, half, half)), half);
    } else {
      const auto& c = bundle.boundary.coords;
      Matrix g(c.rows(), 1);
      for (Index r = 0; r < c.rows(); ++r) {
        std::vector<double> xs;
        for (Index k = 1; k < c.cols(); ++k) xs.push_back(c(r, k));
        g(r, 0) = pde.boundaryValue(c(r, 0), xs);
      }
      t.bc = finish(minusConstant(b, g), b.rows());
    }
  }

  if (!bundle.initial.empty() && pde.hasInitialCondition) {
    Var i = out.initial;
    if (!i.valid() || i.rows() != bundle.initialTargets.rows())
      throw ContractViolation("initial output and targets are not aligned");
    t.ic = finish(minusConstant(i, bundle.initialTargets), i.rows());
  }

  Var physics;
  physics = weighted(physics, w.wr, t.res);
  physics = weighted(physics, w.wb, t.bc);
  physics = weighted(physics, w.wi, t.ic);
  t.physics = physics;
  return t;
}

}  // namespace

void LossWeights::validate() const {
  for (double v : {wr, wb, wi, lambdaPhysics, lambdaData})
    if (!(v >= 0.0) || !std::isfinite(v)) throw ConfigError("loss weights must be finite and nonnegative");
}

LossBreakdown LossTerms::breakdown() const {
  LossBreakdown b;
  b.res = valueOf(res);
  b.bc = valueOf(bc);
  b.ic = valueOf(ic);
  b.physicsTotal = valueOf(physics);
  b.data = valueOf(data);
  b.grandTotal = valueOf(total);
  return b;
}

LossTerms physicsLoss(const PhysicsOutputs& out, const sampling::GridBundle& bundle, const pde::PdeDefinition& pde,
                      const LossWeights& w) {
  return physicsTerms(out, bundle, pde, w, true);
}

LossTerms pinnsEmpiricalLoss(const PhysicsOutputs& out, const sampling::GridBundle& bundle,
                             const pde::PdeDefinition& pde, const LossWeights& w) {
  LossTerms t = physicsTerms(out, bundle, pde, w, false);
  t.total = t.physics;
  return t;
}

Var dataLoss(Var prediction, const Matrix& reference, bool normalize) {
  if (prediction.rows() != reference.rows() || prediction.cols() != reference.cols())
    throw ContractViolation("data prediction and reference are not aligned");
  Var sq = ad::sumSquares(minusConstant(prediction, reference));
  return normalize ? ad::scale(sq, 1.0 / static_cast<double>(reference.size())) : sq;
}

double totalLoss(const LossBreakdown& b, const LossWeights& w) {
  return w.lambdaPhysics * b.physicsTotal + w.lambdaData * b.data;
}

void assembleTotal(LossTerms& terms, const LossWeights& w) {
  Var total;
  total = weighted(total, w.lambdaPhysics, terms.physics);
  total = weighted(total, w.lambdaData, terms.data);
  if (!total.valid()) throw ConfigError("the objective has no active term");
  terms.total = total;
}

}  // namespace physolver::loss
