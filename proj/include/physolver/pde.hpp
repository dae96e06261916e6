#pragma once

#include "physolver/autodiff.hpp"
#include "physolver/errors.hpp"
#include "physolver/sampling.hpp"

#include <atomic>
#include <cstdint>
#include <filesystem>
#include <memory>
#include <span>
#include <string>
#include <string_view>
#include <vector>

namespace physolver::pde {

using ad::Matrix;
using sampling::BoundaryKind;
using sampling::Interval;

enum class PdeKind { Convection, Reaction, Heat, NavierStokes };

std::string_view pdeName(PdeKind kind);
/// "convection", "reaction", "heat", "navier-stokes"; anything else is a ConfigError.
PdeKind parsePdeKind(std::string_view name);

struct PdeParameters {
  double convectionSpeed = 50.0;
  double reactionRho = 5.0;
  double diffusivity = 1.0;
  double lambda1 = 1.0;
  double lambda2 = 0.01;

  void validate() const;
};

// ---------------------------------------------------------------------------
// Derivative bundles of one output field.

enum DerivFlag : unsigned { kU = 1u, kUt = 2u, kUx = 4u, kUy = 8u, kUxx = 16u, kUyy = 32u };

template <class T>
struct Field {
  T u{}, ut{}, ux{}, uy{}, uxx{}, uyy{};
  unsigned present = 0;

  const T& need(unsigned flag) const {
    if ((present & flag) == 0) throw ContractViolation("residual needs a derivative channel that was not computed");
    switch (flag) {
      case kU: return u;
      case kUt: return ut;
      case kUx: return ux;
      case kUy: return uy;
      case kUxx: return uxx;
      default: return uyy;
    }
  }
};

struct PdeDefinition {
  PdeKind kind = PdeKind::Heat;
  PdeParameters params;
  Interval time;
  std::vector<Interval> space;
  BoundaryKind boundary = BoundaryKind::None;
  bool hasInitialCondition = true;
  std::vector<std::string> fieldNames;  // output columns
  std::vector<unsigned> required;       // per field, DerivFlag mask the residuals read

  int spatialDim() const { return static_cast<int>(space.size()); }
  int outputArity() const { return static_cast<int>(fieldNames.size()); }
  int residualCount() const { return kind == PdeKind::NavierStokes ? 3 : 1; }
  /// Input derivatives the forward pass must carry for the residual.
  ad::DerivativeRequest derivativeRequest() const;
  /// h(x) of the initial condition (scalar PDEs only).
  double initialValue(std::span<const double> x) const;
  /// g of a Dirichlet boundary.
  double boundaryValue(double t, std::span<const double> x) const;
};

PdeDefinition makePde(PdeKind kind, const PdeParameters& params = {});

/// Residuals L[u] - f, one entry per equation. Works for doubles and tape
/// variables alike.
template <class T>
std::vector<T> residuals(const PdeDefinition& pde, std::span<const Field<T>> f) {
  const auto& p = pde.params;
  switch (pde.kind) {
    case PdeKind::Convection:
      return {f[0].need(kUt) + p.convectionSpeed * f[0].need(kUx)};
    case PdeKind::Reaction: {
      const T& u = f[0].need(kU);
      return {f[0].need(kUt) - p.reactionRho * (u - u * u)};
    }
    case PdeKind::Heat:
      return {f[0].need(kUt) - p.diffusivity * f[0].need(kUxx)};
    case PdeKind::NavierStokes: {
      const Field<T>& U = f[0];
      const Field<T>& V = f[1];
      const Field<T>& P = f[2];
      const T& u = U.need(kU);
      const T& v = V.need(kU);
      T continuity = U.need(kUx) + V.need(kUy);
      T momX = U.need(kUt) + p.lambda1 * (u * U.need(kUx) + v * U.need(kUy)) + P.need(kUx) -
               p.lambda2 * (U.need(kUxx) + U.need(kUyy));
      T momY = V.need(kUt) + p.lambda1 * (u * V.need(kUx) + v * V.need(kUy)) + P.need(kUy) -
               p.lambda2 * (V.need(kUxx) + V.need(kUyy));
      return {continuity, momX, momY};
    }
  }
  return {};
}

/// Splits a network output (columns = fields) into per-field derivative
/// bundles. `request` is the one used to seed the forward pass.
std::vector<Field<ad::Var>> fieldsFromOutput(ad::Var output, const PdeDefinition& pde,
                                             const ad::DerivativeRequest& request);

// ---------------------------------------------------------------------------
// Reference solutions.

enum class ReferenceKind { ClosedForm, FileBacked, Manufactured };

class ReferenceSolution {
 public:
  virtual ~ReferenceSolution() = default;
  virtual ReferenceKind kind() const = 0;
  virtual int arity() const = 0;
  virtual int spatialDim() const = 0;

  /// Values at the rows of `coords` (t, x[, y]); result is rows x arity.
  /// Every call is recorded by the access counter.
  Matrix evaluate(const Matrix& coords) const;

  /// Number of points read through evaluate().
  std::uint64_t accessCount() const { return accesses_.load(); }
  void resetAccessCount() const { accesses_.store(0); }

 protected:
  virtual Matrix evaluateUncounted(const Matrix& coords) const = 0;

 private:
  mutable std::atomic<std::uint64_t> accesses_{0};
};

/// Closed-form and manufactured solutions also expose exact derivatives.
class AnalyticReference : public ReferenceSolution {
 public:
  virtual std::vector<Field<double>> derivatives(double t, std::span<const double> x) const = 0;
};

double reactionReference(double t, double x, double rho);
double heatReference(double t, double x, double alpha);
double convectionReference(double t, double x, double speed);
struct Velocity {
  double u, v, p;
};
Velocity taylorGreenReference(double t, double x, double y, double lambda2);

/// Closed form for convection, reaction and heat; Taylor-Green for Navier-Stokes.
std::unique_ptr<AnalyticReference> makeAnalyticReference(const PdeDefinition& pde);

/// Gridded table: nearest stamp in time, (bi)linear interpolation in space,
/// clamped at the grid edges.
class GriddedReference final : public ReferenceSolution {
 public:
  GriddedReference(std::vector<double> times, std::vector<double> xs, std::vector<double> ys,
                   std::vector<std::string> fields, std::vector<double> values);

  ReferenceKind kind() const override { return ReferenceKind::FileBacked; }
  int arity() const override { return static_cast<int>(fields_.size()); }
  int spatialDim() const override { return ys_.empty() ? 1 : 2; }

  const std::vector<double>& times() const { return times_; }
  const std::vector<double>& xs() const { return xs_; }
  const std::vector<double>& ys() const { return ys_; }
  const std::vector<std::string>& fields() const { return fields_; }
  double at(std::size_t ti, std::size_t xi, std::size_t yi, std::size_t field) const;

 protected:
  Matrix evaluateUncounted(const Matrix& coords) const override;

 private:
  std::vector<double> times_, xs_, ys_;
  std::vector<std::string> fields_;
  std::vector<double> values_;  // [t][x][y][field]
};

/// CSV with header `t,x,u` or `t,x,y,u,v,p`, rows time-major then x then y.
std::unique_ptr<GriddedReference> loadGriddedReference(const std::filesystem::path& path);

}  // namespace physolver::pde
