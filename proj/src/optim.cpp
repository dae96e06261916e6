#include "physolver/optim.hpp"

#include "physolver/errors.hpp"

#include <algorithm>
#include <cmath>
#include <deque>
#include <limits>

namespace physolver::optim {

void LbfgsConfig::validate() const {
  if (historySize < 1) throw ConfigError("lbfgs.history must be at least 1");
  if (maxIterations < 0) throw ConfigError("lbfgs.max_iterations must be nonnegative");
  if (!(0.0 < c1 && c1 < c2 && c2 < 1.0)) throw ConfigError("lbfgs Wolfe constants need 0 < c1 < c2 < 1");
  if (maxLineSearchSteps < 1) throw ConfigError("lbfgs.max_line_search must be at least 1");
  if (!(gradTolerance >= 0.0)) throw ConfigError("lbfgs.grad_tolerance must be nonnegative");
  if (!(initialStep > 0.0)) throw ConfigError("lbfgs.initial_step must be positive");
}

std::string_view statusName(Status s) {
  switch (s) {
    case Status::MaxIterations: return "max-iterations";
    case Status::GradientTolerance: return "gradient-tolerance";
    case Status::LineSearchFailure: return "line-search-failure";
    case Status::NoProgress: return "no-progress";
  }
  return "?";
}

namespace {

/// Minimiser of the cubic matching values and slopes at x1, x2, clamped to bounds.
double cubicInterpolate(double x1, double f1, double g1, double x2, double f2, double g2, double lo, double hi) {
  const double mid = 0.5 * (lo + hi);
  if (!std::isfinite(f1) || !std::isfinite(f2) || !std::isfinite(g1) || !std::isfinite(g2)) return mid;
  const double d1 = g1 + g2 - 3.0 * (f1 - f2) / (x1 - x2);
  const double d2sq = d1 * d1 - g1 * g2;
  if (d2sq < 0.0) return mid;
  const double d2 = std::sqrt(d2sq);
  double pos = x1 <= x2 ? x2 - (x2 - x1) * ((g2 + d2 - d1) / (g2 - g1 + 2.0 * d2))
                        : x1 - (x1 - x2) * ((g1 + d2 - d1) / (g1 - g2 + 2.0 * d2));
  if (!std::isfinite(pos)) return mid;
  return std::min(std::max(pos, lo), hi);
}

struct Probe {
  double t = 0.0;
  double f = 0.0;
  Vector g;
  double gtd = 0.0;
};

struct LineSearch {
  bool success = false;
  Probe accepted;
  int evaluations = 0;
};

LineSearch strongWolfe(const Objective& objective, const Vector& x, const Vector& d, double f, const Vector& g,
                       double gtd, double t, const LbfgsConfig& cfg) {
  LineSearch out;
  const double dNorm = d.lpNorm<Eigen::Infinity>();
  auto probe = [&](double step) {
    Probe p;
    p.t = step;
    p.g.resize(x.size());
    p.f = objective(x + step * d, p.g);
    if (!std::isfinite(p.f)) p.f = std::numeric_limits<double>::infinity();
    p.gtd = p.g.dot(d);
    ++out.evaluations;
    return p;
  };
  auto armijo = [&](const Probe& p) { return p.f <= f + cfg.c1 * p.t * gtd; };
  auto curvature = [&](const Probe& p) { return std::abs(p.gtd) <= -cfg.c2 * gtd; };

  Probe prev{0.0, f, g, gtd};
  Probe cur = probe(t);
  Probe lo, hi;  // zoom bracket: lo has the lower value
  int iter = 0;
  bool bracketed = false;
  while (iter < cfg.maxLineSearchSteps) {
    if (!armijo(cur) || (iter > 1 && cur.f >= prev.f)) {
      lo = prev;
      hi = cur;
      bracketed = true;
      break;
    }
    if (curvature(cur)) {
      out.success = true;
      out.accepted = cur;
      return out;
    }
    if (cur.gtd >= 0.0) {
      lo = cur;
      hi = prev;
      bracketed = true;
      break;
    }
    const double minStep = cur.t + 0.01 * (cur.t - prev.t);
    const double maxStep = cur.t * 10.0;
    const double next = cubicInterpolate(prev.t, prev.f, prev.gtd, cur.t, cur.f, cur.gtd, minStep, maxStep);
    prev = cur;
    cur = probe(next);
    ++iter;
  }
  if (!bracketed) return out;
  if (hi.f < lo.f) std::swap(lo, hi);

  bool insufficientProgress = false;
  while (iter < cfg.maxLineSearchSteps) {
    const double a = std::min(lo.t, hi.t), b = std::max(lo.t, hi.t);
    if ((b - a) * dNorm < cfg.bracketTolerance) break;
    double next = cubicInterpolate(lo.t, lo.f, lo.gtd, hi.t, hi.f, hi.gtd, a, b);
    const double eps = 0.1 * (b - a);
    if (std::min(b - next, next - a) < eps) {
      if (insufficientProgress || next >= b || next <= a) {
        next = std::abs(next - b) < std::abs(next - a) ? b - eps : a + eps;
        insufficientProgress = false;
      } else {
        insufficientProgress = true;
      }
    } else {
      insufficientProgress = false;
    }
    Probe p = probe(next);
    ++iter;
    if (!armijo(p) || p.f >= lo.f) {
      hi = p;
    } else {
      if (curvature(p)) {
        out.success = true;
        out.accepted = p;
        return out;
      }
      if (p.gtd * (hi.t - lo.t) >= 0.0) hi = lo;
      lo = p;
    }
  }
  return out;
}

}  // namespace

Result minimize(const Objective& objective, Vector theta0, const LbfgsConfig& cfg, const Callback& onStep) {
  cfg.validate();
  Result r;
  r.theta = std::move(theta0);
  if (!r.theta.allFinite()) throw OptimizationError("initial parameters are not finite");
  r.gradient.resize(r.theta.size());
  r.value = objective(r.theta, r.gradient);
  r.evaluations = 1;
  if (!std::isfinite(r.value) || !r.gradient.allFinite())
    throw OptimizationError("objective or gradient is not finite at the initial parameters");

  std::deque<Vector> S, Y;
  std::deque<double> rho;
  auto gradNorm = [&] { return r.gradient.lpNorm<Eigen::Infinity>(); };
  if (gradNorm() <= cfg.gradTolerance) {
    r.status = Status::GradientTolerance;
    return r;
  }

  std::vector<double> alpha(static_cast<std::size_t>(cfg.historySize));
  bool retriedSteepest = false;
  for (int it = 1; it <= cfg.maxIterations;) {
    Vector d = -r.gradient;
    // Two-loop recursion.
    if (!S.empty()) {
      for (int i = static_cast<int>(S.size()) - 1; i >= 0; --i) {
        const auto k = static_cast<std::size_t>(i);
        alpha[k] = rho[k] * S[k].dot(d);
        d -= alpha[k] * Y[k];
      }
      d *= S.back().dot(Y.back()) / Y.back().squaredNorm();
      for (std::size_t k = 0; k < S.size(); ++k) {
        const double beta = rho[k] * Y[k].dot(d);
        d += (alpha[k] - beta) * S[k];
      }
    }
    double gtd = r.gradient.dot(d);
    if (!(gtd < 0.0)) {
      S.clear();
      Y.clear();
      rho.clear();
      d = -r.gradient;
      gtd = -r.gradient.squaredNorm();
    }

    const double t0 = S.empty() ? std::min(1.0, 1.0 / r.gradient.lpNorm<1>()) * cfg.initialStep : cfg.initialStep;
    LineSearch ls = strongWolfe(objective, r.theta, d, r.value, r.gradient, gtd, t0, cfg);
    r.evaluations += ls.evaluations;
    if (!ls.success) {
      if (!retriedSteepest && !S.empty()) {
        S.clear();
        Y.clear();
        rho.clear();
        retriedSteepest = true;
        continue;
      }
      r.status = Status::LineSearchFailure;
      return r;
    }
    retriedSteepest = false;

    const Probe& p = ls.accepted;
    TraceRow row;
    row.iteration = it;
    row.step = p.t;
    row.armijo = p.f <= r.value + cfg.c1 * p.t * gtd;
    row.curvature = std::abs(p.gtd) <= -cfg.c2 * gtd;

    Vector s = p.t * d;
    Vector y = p.g - r.gradient;
    const double sy = s.dot(y);
    if (sy > 1e-10) {
      if (static_cast<int>(S.size()) == cfg.historySize) {
        S.pop_front();
        Y.pop_front();
        rho.pop_front();
      }
      S.push_back(std::move(s));
      Y.push_back(std::move(y));
      rho.push_back(1.0 / sy);
    }
    const double previous = r.value;
    r.theta += p.t * d;
    r.value = p.f;
    r.gradient = p.g;

    row.value = r.value;
    row.gradNorm = gradNorm();
    row.evaluations = r.evaluations;
    r.trace.push_back(row);
    if (onStep) onStep(row);

    if (row.gradNorm <= cfg.gradTolerance) {
      r.status = Status::GradientTolerance;
      return r;
    }
    if (r.value == previous) {
      r.status = Status::NoProgress;
      return r;
    }
    ++it;
  }
  r.status = Status::MaxIterations;
  return r;
}

}  // namespace physolver::optim
