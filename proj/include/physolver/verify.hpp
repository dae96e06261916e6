#pragma once

#include <string>
#include <vector>

namespace physolver::verify {

struct Check {
  std::string name;
  bool passed = false;
  std::string detail;  // measured value against its tolerance
};

/// Parameter gradient of a loss built from u_t and u_xx of a 2-12-12-1 tanh
/// network against central differences (every coordinate, rel. error < 1e-4).
Check autodiffGradient();
/// Closed-form and manufactured references satisfy their PDEs (< 1e-9) at
/// 1000 quasi-random points.
Check referenceResiduals();
/// First 16 radical inverses in bases 2 and 3 equal a digit-string reversal.
Check haltonOracle();
/// Two-frame extrapolation of a linear-in-time field, 10 recursive steps (< 1e-12).
Check extrapolationExactness();
/// Every accepted L-BFGS step on Rosenbrock satisfies the strong Wolfe
/// conditions and the final point is within 1e-6 of (1, 1).
Check optimizerWolfe();

std::vector<Check> runPropertySuite();

}  // namespace physolver::verify
