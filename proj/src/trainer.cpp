#include "physolver/trainer.hpp"

#include "physolver/errors.hpp"

#include <algorithm>
#include <cmath>

namespace physolver::trainer {

namespace {

std::vector<double> strided(const std::vector<double>& v, int stride) {
  std::vector<double> out;
  for (std::size_t i = 0; i < v.size(); i += static_cast<std::size_t>(stride)) out.push_back(v[i]);
  return out;
}

/// Boundary times: the given nodes, or `count` evenly spaced times over their span.
std::vector<double> boundaryTimes(const std::vector<double>& nodes, int count) {
  if (count <= 0) return nodes;
  if (count == 1) return {nodes.front()};
  return sampling::linspace(nodes.front(), nodes.back(), count);
}

Matrix packCoords(const std::vector<sampling::GridPoint>& pts, int spatialDim) {
  Matrix m(static_cast<Index>(pts.size()), 1 + spatialDim);
  for (std::size_t i = 0; i < pts.size(); ++i) {
    m(static_cast<Index>(i), 0) = pts[i].t;
    for (int a = 0; a < spatialDim; ++a) m(static_cast<Index>(i), 1 + a) = pts[i].x[static_cast<std::size_t>(a)];
  }
  return m;
}

bool sequential(const ExperimentConfig& cfg) { return cfg.method != Method::Pinns; }

sampling::SequenceSet packSet(const std::vector<sampling::GridPoint>& pts, int spatialDim, bool expand,
                              const sampling::IpsggConfig& ipsgg) {
  return expand ? sampling::expandedSet(pts, spatialDim, ipsgg) : sampling::pointSet(pts, spatialDim);
}

}  // namespace

GridAxes gridAxes(const ExperimentConfig& cfg, const pde::PdeDefinition& pde) {
  GridAxes a;
  a.times = sampling::linspace(pde.time.lo, pde.time.hi, cfg.grid.tCount);
  a.trainTimes.assign(a.times.begin(), a.times.begin() + cfg.grid.trainTCount);
  a.heldOutTimes.assign(a.times.begin() + cfg.grid.trainTCount, a.times.end());
  a.space.push_back(sampling::linspace(pde.space[0].lo, pde.space[0].hi, cfg.grid.xCount));
  if (pde.spatialDim() == 2) a.space.push_back(sampling::linspace(pde.space[1].lo, pde.space[1].hi, cfg.grid.yCount));
  return a;
}

sampling::GridBundle buildBundle(const ExperimentConfig& cfg, const pde::PdeDefinition& pde,
                                 const pde::ReferenceSolution* reference) {
  cfg.validate();
  const GridAxes axes = gridAxes(cfg, pde);
  const int dim = pde.spatialDim();
  const bool seq = sequential(cfg);
  const bool expandAnchors = seq && cfg.expandAnchors;

  sampling::GridBundle b;
  b.spatialDim = dim;

  // Residual points: training times x spatial nodes, optionally thinned.
  {
    const auto times = strided(axes.trainTimes, cfg.grid.collocationTStride);
    std::vector<std::vector<double>> space{strided(axes.space[0], cfg.grid.collocationXStride)};
    if (dim == 2) space.push_back(strided(axes.space[1], cfg.grid.collocationYStride));
    const auto pts = sampling::tensorProductGrid(times, space);
    b.residual = packSet(pts, dim, seq, cfg.ipsgg);
  }

  // Boundary: lower edge sequences first, then the matching upper edge.
  b.boundaryKind = pde.boundary;
  if (pde.boundary != sampling::BoundaryKind::None) {
    const auto times = boundaryTimes(cfg.grid.boundaryFullSpan ? axes.times : axes.trainTimes, cfg.grid.boundaryTCount);
    std::vector<sampling::GridPoint> pts;
    for (double edge : {pde.space[0].lo, pde.space[0].hi})
      for (double t : times) pts.push_back({t, {edge}, {}});
    b.boundary = packSet(pts, dim, seq, cfg.ipsgg);
  } else {
    b.boundary.columns = sampling::columnNames(dim);
    b.boundary.coords.resize(0, 1 + dim);
  }

  if (pde.hasInitialCondition) {
    const std::vector<double> t0{pde.time.lo};
    const auto pts = sampling::tensorProductGrid(t0, axes.space);
    b.initial = packSet(pts, dim, expandAnchors, cfg.ipsgg);
    b.initialTargets.resize(static_cast<Index>(pts.size()), 1);
    for (std::size_t i = 0; i < pts.size(); ++i) b.initialTargets(static_cast<Index>(i), 0) = pde.initialValue(pts[i].x);
  } else {
    b.initial.columns = sampling::columnNames(dim);
    b.initial.coords.resize(0, 1 + dim);
  }

  b.data.columns = sampling::columnNames(dim);
  b.data.coords.resize(0, 1 + dim);
  if (cfg.usesData()) {
    if (reference == nullptr) throw ContractViolation("the data system needs a reference solution");
    const sampling::Interval span{axes.trainTimes.front(), axes.trainTimes.back()};
    b.dataTimes = cfg.data.snap
                      ? sampling::haltonDataStamps(cfg.data.nData, span, std::span<const double>(axes.trainTimes))
                      : sampling::haltonDataStamps(cfg.data.nData, span);
    const auto pts = sampling::tensorProductGrid(b.dataTimes, axes.space);
    b.data = packSet(pts, dim, expandAnchors, cfg.ipsgg);
    b.dataTargets = reference->evaluate(packCoords(pts, dim));
  }
  return b;
}

std::shared_ptr<const pde::ReferenceSolution> makeReference(const ExperimentConfig& cfg, const pde::PdeDefinition& pde) {
  if (cfg.reference == ReferenceSource::File) {
    auto ref = pde::loadGriddedReference(cfg.referencePath);
    if (ref->spatialDim() != pde.spatialDim() || ref->arity() != pde.outputArity())
      throw ConfigError("reference file " + cfg.referencePath + " does not match the pde's fields");
    return ref;
  }
  return pde::makeAnalyticReference(pde);
}

std::unique_ptr<model::Model> makeModel(const ExperimentConfig& cfg) {
  std::unique_ptr<model::Model> m;
  if (cfg.method == Method::Pinns)
    m = std::make_unique<model::PinnModel>(cfg.pinnSpec());
  else
    m = std::make_unique<model::PhysicsSolverModel>(cfg.solverSpec());
  if (cfg.normalizeInputs) {
    const auto d = pde::makePde(cfg.pde, cfg.params);
    std::vector<sampling::Interval> box{d.time};
    box.insert(box.end(), d.space.begin(), d.space.end());
    Eigen::RowVectorXd scale(m->inputDim()), shift(m->inputDim());
    for (int c = 0; c < m->inputDim(); ++c) {
      const auto& iv = box[static_cast<std::size_t>(c)];
      scale[c] = 2.0 / iv.length();
      shift[c] = -(iv.lo + iv.hi) / iv.length();
    }
    m->setInputScaling(scale, shift);
  }
  return m;
}

// ---------------------------------------------------------------------------

Objective::Objective(const ExperimentConfig& cfg, const pde::PdeDefinition& pde, const model::Model& model,
                     const sampling::GridBundle& bundle)
    : cfg_(cfg), pde_(pde), model_(model), bundle_(bundle) {}

loss::LossTerms Objective::build(ad::Tape& tape, const ParameterVector& theta) const {
  auto anchor = [&](const sampling::SequenceSet& set) {
    ad::Var out = model_.forward(tape, theta, tape.constant(set.coords), set.seqLen);
    return set.seqLen > 1 ? ad::selectPosition(out, set.seqLen, 0) : out;
  };
  loss::PhysicsOutputs out;
  out.request = pde_.derivativeRequest();
  if (!bundle_.residual.empty())
    out.residual = model_.forward(
        tape, theta, ad::seedInputs(tape, bundle_.residual.coords, bundle_.residual.columns, out.request),
        bundle_.residual.seqLen);
  if (!bundle_.boundary.empty())
    out.boundary = model_.forward(tape, theta, tape.constant(bundle_.boundary.coords), bundle_.boundary.seqLen);
  if (!bundle_.initial.empty()) out.initial = anchor(bundle_.initial);

  if (cfg_.method == Method::Pinns) return loss::pinnsEmpiricalLoss(out, bundle_, pde_, cfg_.weights);

  loss::LossTerms terms = loss::physicsLoss(out, bundle_, pde_, cfg_.weights);
  if (cfg_.usesData() && !bundle_.data.empty())
    terms.data = loss::dataLoss(anchor(bundle_.data), bundle_.dataTargets, cfg_.weights.normalizeData);
  loss::assembleTotal(terms, cfg_.weights);
  return terms;
}

double Objective::operator()(const Vector& theta, Vector& grad) {
  ad::Tape tape(theta.size());
  loss::LossTerms terms = build(tape, ParameterVector(model_.layout(), theta));
  last_ = terms.breakdown();
  grad = tape.gradient(terms.total);
  return last_.grandTotal;
}

loss::LossBreakdown Objective::evaluate(const Vector& theta) const {
  ad::Tape tape(theta.size());
  return build(tape, ParameterVector(model_.layout(), theta)).breakdown();
}

// ---------------------------------------------------------------------------

Experiment::Experiment(ExperimentConfig cfg) : cfg_(std::move(cfg)) {
  cfg_.validate();
  pde_ = pde::makePde(cfg_.pde, cfg_.params);
  reference_ = makeReference(cfg_, pde_);
  model_ = makeModel(cfg_);
  axes_ = gridAxes(cfg_, pde_);
}

TrainedModel Experiment::train(const std::function<void(const optim::TraceRow&, const loss::LossBreakdown&)>& onStep) {
  const auto start = std::chrono::steady_clock::now();
  const std::uint64_t accessesBefore = reference_->accessCount();
  const sampling::GridBundle bundle = buildBundle(cfg_, pde_, reference_.get());

  TrainedModel tm;
  tm.method = cfg_.method;
  tm.config = cfg_;
  const ParameterVector theta0 = model_->initialize(cfg_.seed);
  Objective objective(cfg_, pde_, *model_, bundle);
  auto result = optim::minimize(
      [&](const Vector& th, Vector& g) { return objective(th, g); }, theta0.values(), cfg_.lbfgs,
      [&](const optim::TraceRow& row) {
        // The accepted point is always the most recent evaluation.
        tm.traceLosses.push_back(objective.last());
        if (onStep) onStep(row, objective.last());
      });
  tm.theta = ParameterVector(model_->layout(), result.theta);
  tm.status = result.status;
  tm.trace = std::move(result.trace);
  tm.finalLoss = objective.evaluate(result.theta);
  tm.referenceAccesses = reference_->accessCount() - accessesBefore;
  tm.trainSeconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  return tm;
}

Matrix Experiment::gridAt(const std::vector<double>& times) const {
  return packCoords(sampling::tensorProductGrid(times, axes_.space), pde_.spatialDim());
}

Matrix Experiment::predict(const ParameterVector& theta, const Matrix& coords) const {
  const bool seq = sequential(cfg_);
  const Index k = seq ? cfg_.ipsgg.k : 1;
  Matrix out(coords.rows(), pde_.outputArity());
  const Index chunk = cfg_.evalChunk;
  for (Index start = 0; start < coords.rows(); start += chunk) {
    const Index n = std::min(chunk, coords.rows() - start);
    Matrix q(n * k, coords.cols());
    for (Index i = 0; i < n; ++i)
      for (Index j = 0; j < k; ++j) {
        q.row(i * k + j) = coords.row(start + i);
        q(i * k + j, 0) += static_cast<double>(j) * cfg_.ipsgg.gamma * cfg_.ipsgg.deltaT;
      }
    ad::Tape tape(theta.size());
    ad::Var y = model_->forward(tape, theta, tape.constant(q), k);
    if (k > 1) y = ad::selectPosition(y, k, 0);
    out.middleRows(start, n) = y.value();
  }
  return out;
}

// ---------------------------------------------------------------------------

Matrix forecastSingleStep(const Experiment& exp, const TrainedModel& trained, double t) {
  if (!(t > exp.axes().trainTimes.back()))
    throw ContractViolation("forecast time lies inside the training interval");
  return exp.predict(trained.theta, exp.gridAt({t}));
}

std::vector<Matrix> forecastMultiStep(const Experiment& exp, const TrainedModel& trained,
                                      const std::vector<double>& times) {
  if (!std::is_sorted(times.begin(), times.end()) ||
      std::adjacent_find(times.begin(), times.end()) != times.end())
    throw ContractViolation("forecast times must be strictly increasing");
  std::vector<Matrix> out;
  for (double t : times) out.push_back(forecastSingleStep(exp, trained, t));
  return out;
}

Matrix extrapolate(const Matrix& current, const Matrix& previous) {
  if (current.rows() != previous.rows() || current.cols() != previous.cols())
    throw ContractViolation("extrapolation frames have different shapes");
  return 2.0 * current - previous;
}

std::vector<Matrix> extrapolateRecursive(const Matrix& previous, const Matrix& current, int steps) {
  std::vector<Matrix> frames;
  Matrix a = previous, b = current;
  for (int s = 0; s < steps; ++s) {
    Matrix next = extrapolate(b, a);
    frames.push_back(next);
    a = std::move(b);
    b = std::move(next);
  }
  return frames;
}

}  // namespace physolver::trainer
