#include "physolver/verify.hpp"

#include "physolver/model.hpp"
#include "physolver/optim.hpp"
#include "physolver/pde.hpp"
#include "physolver/sampling.hpp"
#include "physolver/trainer.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <random>
#include <sstream>

namespace physolver::verify {

using ad::Matrix;
using ad::Vector;

namespace {

std::string sci(double v) {
  std::ostringstream s;
  s.precision(3);
  s << std::scientific << v;
  return s.str();
}

std::string fmt(const char* label, double value, const char* op, double tol) {
  return std::string(label) + ' ' + sci(value) + ' ' + op + ' ' + sci(tol);
}

}  // namespace

Check autodiffGradient() {
  Check c{"autodiff-gradient", false, {}};
  const auto start = std::chrono::steady_clock::now();
  model::PinnModel net(model::PinnSpec{2, 1, 12, 2});
  std::mt19937_64 rng(17);
  std::uniform_real_distribution<double> uni(-1.0, 1.0);
  Vector w(net.layout().size());
  for (auto& v : w) v = uni(rng);
  Matrix coords(24, 2);
  for (Eigen::Index i = 0; i < coords.size(); ++i) coords.data()[i] = uni(rng);
  const ad::DerivativeRequest request{{"t", "x"}, {"x"}};
  const std::vector<std::string> cols{"t", "x"};

  // L = mean((u_t - u_xx)^2) + mean(u^2)
  auto loss = [&](const Vector& theta, Vector* grad) {
    ad::ParameterVector p(net.layout(), theta);
    ad::Tape tape(p.size());
    ad::Var u = net.forward(tape, p, ad::seedInputs(tape, coords, cols, request), 1);
    const auto layout = u.layout();
    ad::Var r = ad::channel(u, layout.firstChannel(0)) - ad::channel(u, layout.secondChannel(0));
    const double n = static_cast<double>(coords.rows());
    ad::Var l = ad::sumSquares(r) * (1.0 / n) + ad::sumSquares(ad::channel(u, 0)) * (1.0 / n);
    if (grad) *grad = tape.gradient(l);
    return l.value()(0, 0);
  };
  Vector g;
  loss(w, &g);
  const double h = 1e-6;
  const double gScale = g.lpNorm<Eigen::Infinity>();
  double worst = 0.0;
  for (Eigen::Index i = 0; i < w.size(); ++i) {
    Vector a = w, b = w;
    a[i] += h;
    b[i] -= h;
    const double fd = (loss(a, nullptr) - loss(b, nullptr)) / (2 * h);
    // coordinates with a vanishing gradient are compared against the gradient scale
    const double denom = std::max({std::abs(fd), std::abs(g[i]), 1e-3 * gScale});
    worst = std::max(worst, std::abs(fd - g[i]) / denom);
  }
  const double seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  c.passed = worst < 1e-4 && seconds < 10.0;
  c.detail = fmt("max rel err", worst, "<", 1e-4) + " over " + std::to_string(w.size()) + " params, " +
             fmt("runtime s", seconds, "<", 10.0);
  return c;
}

Check referenceResiduals() {
  Check c{"reference-residuals", true, {}};
  const unsigned bases[] = {2, 3, 5};
  double overall = 0.0;
  for (pde::PdeKind kind :
       {pde::PdeKind::Reaction, pde::PdeKind::Heat, pde::PdeKind::Convection, pde::PdeKind::NavierStokes}) {
    const auto d = pde::makePde(kind);
    auto ref = pde::makeAnalyticReference(d);
    double worst = 0.0;
    for (std::uint64_t i = 1; i <= 1000; ++i) {
      const double t = d.time.lo + d.time.length() * sampling::radicalInverse(i, bases[0]);
      std::vector<double> x;
      for (std::size_t a = 0; a < d.space.size(); ++a)
        x.push_back(d.space[a].lo + d.space[a].length() * sampling::radicalInverse(i, bases[a + 1]));
      const auto fields = ref->derivatives(t, x);
      for (double r : pde::residuals<double>(d, fields)) worst = std::max(worst, std::abs(r));
    }
    overall = std::max(overall, worst);
    if (!(worst < 1e-9)) c.passed = false;
    c.detail += std::string(pde::pdeName(kind)) + " " + sci(worst) + "; ";
  }
  c.detail += fmt("max residual", overall, "<", 1e-9);
  return c;
}

Check haltonOracle() {
  Check c{"halton-oracle", true, {}};
  int mismatches = 0;
  for (unsigned base : {2u, 3u}) {
    for (std::uint64_t i = 1; i <= 16; ++i) {
      // digits of i, least significant first, read as a fraction
      std::vector<unsigned> digits;
      for (std::uint64_t n = i; n > 0; n /= base) digits.push_back(static_cast<unsigned>(n % base));
      std::uint64_t num = 0, den = 1;
      for (unsigned dgt : digits) {
        num = num * base + dgt;
        den *= base;
      }
      const double expected = static_cast<double>(num) / static_cast<double>(den);
      if (sampling::radicalInverse(i, base) != expected) ++mismatches;
    }
  }
  c.passed = mismatches == 0;
  c.detail = std::to_string(mismatches) + " mismatches in 32 values (exact equality)";
  return c;
}

Check extrapolationExactness() {
  Check c{"extrapolation-exactness", false, {}};
  std::mt19937_64 rng(23);
  std::uniform_real_distribution<double> uni(-2.0, 2.0);
  Matrix a(50, 3), b(50, 3);
  for (Eigen::Index i = 0; i < a.size(); ++i) {
    a.data()[i] = uni(rng);
    b.data()[i] = uni(rng);
  }
  const double dt = 0.1;
  auto field = [&](int step) { return Matrix(a + (step * dt) * b); };
  const auto frames = trainer::extrapolateRecursive(field(0), field(1), 10);
  double worst = 0.0;
  for (int s = 0; s < 10; ++s)
    worst = std::max(worst, (frames[static_cast<std::size_t>(s)] - field(s + 2)).cwiseAbs().maxCoeff());
  c.passed = frames.size() == 10 && worst < 1e-12;
  c.detail = fmt("max abs err", worst, "<", 1e-12) + " over 10 steps";
  return c;
}

Check optimizerWolfe() {
  Check c{"optimizer-wolfe", false, {}};
  struct Eval {
    Vector x, g;
    double f;
  };
  std::vector<Eval> evals, iterates;
  auto rosen = [&](const Vector& x, Vector& g) {
    const double a = 1.0 - x[0], b = x[1] - x[0] * x[0];
    g[0] = -2.0 * a - 400.0 * x[0] * b;
    g[1] = 200.0 * b;
    const double f = a * a + 100.0 * b * b;
    evals.push_back({x, g, f});
    return f;
  };
  optim::LbfgsConfig cfg;
  cfg.maxIterations = 200;
  cfg.gradTolerance = 1e-12;
  Vector x0(2);
  x0 << -1.2, 1.0;
  const auto r = optim::minimize(rosen, x0, cfg, [&](const optim::TraceRow&) { iterates.push_back(evals.back()); });
  iterates.insert(iterates.begin(), evals.front());
  int violations = 0;
  for (std::size_t k = 0; k + 1 < iterates.size(); ++k) {
    const Vector s = iterates[k + 1].x - iterates[k].x;
    const double g0 = iterates[k].g.dot(s), g1 = iterates[k + 1].g.dot(s);
    const bool armijo = iterates[k + 1].f <= iterates[k].f + cfg.c1 * g0 + 1e-15;
    const bool curvature = std::abs(g1) <= cfg.c2 * std::abs(g0) * (1 + 1e-12);
    if (!(g0 < 0.0 && armijo && curvature)) ++violations;
  }
  const double dist = (r.theta - Vector::Ones(2)).lpNorm<Eigen::Infinity>();
  c.passed = violations == 0 && dist < 1e-6 && !r.trace.empty();
  c.detail = std::to_string(violations) + " Wolfe violations in " + std::to_string(r.trace.size()) + " steps, " +
             fmt("distance to (1,1)", dist, "<", 1e-6);
  return c;
}

std::vector<Check> runPropertySuite() {
  return {autodiffGradient(), referenceResiduals(), haltonOracle(), extrapolationExactness(), optimizerWolfe()};
}

}  // namespace physolver::verify
