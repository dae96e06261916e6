#include <doctest.h>

#include "physolver/errors.hpp"
#include "physolver/optim.hpp"

#include <cmath>
#include <limits>

using namespace physolver;
using namespace physolver::optim;

namespace {

double rosenbrock(const Vector& x, Vector& g) {
  const double a = 1.0 - x[0], b = x[1] - x[0] * x[0];
  g[0] = -2.0 * a - 400.0 * x[0] * b;
  g[1] = 200.0 * b;
  return a * a + 100.0 * b * b;
}

}  // namespace

TEST_CASE("squared norm converges in a few iterations") {
  Vector x0(2);
  x0 << 3.0, -4.0;
  auto r = minimize(
      [](const Vector& x, Vector& g) {
        g = 2.0 * x;
        return x.squaredNorm();
      },
      x0, LbfgsConfig{});
  CHECK(r.theta.norm() < 1e-10);
  CHECK(r.trace.size() <= 3);
}

TEST_CASE("rosenbrock reaches (1, 1) with Wolfe steps") {
  Vector x0(2);
  x0 << -1.2, 1.0;
  LbfgsConfig cfg;
  cfg.maxIterations = 200;
  cfg.gradTolerance = 1e-12;
  auto r = minimize(rosenbrock, x0, cfg);
  CHECK(std::abs(r.theta[0] - 1.0) < 1e-6);
  CHECK(std::abs(r.theta[1] - 1.0) < 1e-6);
  CHECK(r.trace.size() <= 200);
  double last = std::numeric_limits<double>::infinity();
  for (const auto& row : r.trace) {
    CHECK(row.armijo);
    CHECK(row.curvature);
    CHECK(row.value <= last);
    last = row.value;
  }
}

TEST_CASE("wolfe conditions recomputed from logged evaluations") {
  Vector x0(2);
  x0 << -1.2, 1.0;
  LbfgsConfig cfg;
  cfg.maxIterations = 60;
  struct Eval {
    Vector x, g;
    double f;
  };
  std::vector<Eval> evals, iterates;
  auto r = minimize(
      [&](const Vector& th, Vector& gr) {
        const double f = rosenbrock(th, gr);
        evals.push_back({th, gr, f});
        return f;
      },
      x0, cfg, [&](const TraceRow&) { iterates.push_back(evals.back()); });
  iterates.insert(iterates.begin(), evals.front());
  REQUIRE(iterates.size() == r.trace.size() + 1);
  for (std::size_t k = 0; k + 1 < iterates.size(); ++k) {
    const Vector s = iterates[k + 1].x - iterates[k].x;
    const double g0 = iterates[k].g.dot(s), g1 = iterates[k + 1].g.dot(s);
    CHECK(g0 < 0.0);
    CHECK(iterates[k + 1].f <= iterates[k].f + cfg.c1 * g0 + 1e-15);
    CHECK(std::abs(g1) <= cfg.c2 * std::abs(g0) * (1 + 1e-12));
  }
}

TEST_CASE("constant objective stops immediately") {
  Vector x0 = Vector::Constant(4, 0.7);
  auto r = minimize(
      [](const Vector&, Vector& g) {
        g.setZero();
        return 3.0;
      },
      x0, LbfgsConfig{});
  CHECK(r.status == Status::GradientTolerance);
  CHECK(r.trace.empty());
  CHECK(r.theta == x0);
}

TEST_CASE("non-finite objective at the start is an error") {
  Vector x0 = Vector::Zero(2);
  CHECK_THROWS_AS(minimize(
                      [](const Vector&, Vector& g) {
                        g.setZero();
                        return std::nan("");
                      },
                      x0, LbfgsConfig{}),
                  OptimizationError);
  LbfgsConfig bad;
  bad.c1 = 0.95;
  CHECK_THROWS_AS(minimize(rosenbrock, x0, bad), ConfigError);
}

TEST_CASE("identical runs give identical traces") {
  Vector x0(2);
  x0 << -1.2, 1.0;
  LbfgsConfig cfg;
  cfg.maxIterations = 50;
  auto a = minimize(rosenbrock, x0, cfg);
  auto b = minimize(rosenbrock, x0, cfg);
  REQUIRE(a.trace.size() == b.trace.size());
  for (std::size_t i = 0; i < a.trace.size(); ++i) {
    CHECK(a.trace[i].value == b.trace[i].value);
    CHECK(a.trace[i].step == b.trace[i].step);
  }
  CHECK(a.theta == b.theta);
}

TEST_CASE("max iterations is respected") {
  Vector x0(2);
  x0 << -1.2, 1.0;
  LbfgsConfig cfg;
  cfg.maxIterations = 5;
  auto r = minimize(rosenbrock, x0, cfg);
  CHECK(r.trace.size() == 5);
  CHECK(r.status == Status::MaxIterations);
}
