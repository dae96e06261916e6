#include "physolver/report.hpp"

#include "physolver/errors.hpp"

#include <fstream>
#include <iomanip>
#include <iostream>

namespace physolver::report {

using trainer::Index;
using trainer::Matrix;

namespace {

Eigen::VectorXd scoredColumn(const Matrix& m) { return m.col(m.cols() - 1); }

metrics::FieldTable fieldTable(const trainer::Experiment& exp, const Matrix& coords, const Matrix& values) {
  metrics::FieldTable t;
  t.coordNames = sampling::columnNames(exp.pde().spatialDim());
  t.fieldNames = exp.pde().outputArity() == 1 ? std::vector<std::string>{"value"} : exp.pde().fieldNames;
  t.coords = coords;
  t.values = values;
  return t;
}

metrics::ErrorRow row(const trainer::Experiment& exp, std::string method, std::string problem, const Matrix& approx,
                      const Matrix& ref, double seconds) {
  metrics::ErrorRow r;
  r.pde = exp.config().preset;
  r.method = std::move(method);
  r.problem = std::move(problem);
  const Matrix a = scoredColumn(approx), b = scoredColumn(ref);
  r.relL2 = metrics::relativeL2(a, b);
  r.relLinf = metrics::relativeLinf(a, b);
  r.runtimeSeconds = seconds;
  return r;
}

void scoreForecast(const trainer::Experiment& exp, const std::string& method, const std::vector<Matrix>& frames,
                   double seconds, Evaluation& ev) {
  const auto& held = exp.axes().heldOutTimes;
  if (held.empty()) return;
  const Index perTime = frames.front().rows();
  Matrix coords = exp.gridAt(held);
  Matrix approx(coords.rows(), frames.front().cols());
  for (std::size_t i = 0; i < frames.size(); ++i) approx.middleRows(static_cast<Index>(i) * perTime, perTime) = frames[i];
  const Matrix ref = exp.reference().evaluate(coords);
  ev.rows.push_back(row(exp, method, "forecast-1", frames.front(), ref.topRows(perTime), seconds));
  if (held.size() > 1) ev.rows.push_back(row(exp, method, "forecast-multi", approx, ref, seconds));
  ev.forecastPerTime = metrics::relativeL2PerTime(scoredColumn(approx), scoredColumn(ref), perTime);
  ev.forecastField = fieldTable(exp, coords, approx);
}

void writeTrace(const trainer::TrainedModel& tm, const std::filesystem::path& path) {
  std::ofstream out(path);
  out << std::setprecision(17);
  out << "iteration,loss,res,bc,ic,physics,data,grad_norm,step,evaluations\n";
  for (std::size_t i = 0; i < tm.trace.size(); ++i) {
    const auto& t = tm.trace[i];
    const auto& b = tm.traceLosses[i];
    out << t.iteration << ',' << t.value << ',' << b.res << ',' << b.bc << ',' << b.ic << ',' << b.physicsTotal << ','
        << b.data << ',' << t.gradNorm << ',' << t.step << ',' << t.evaluations << '\n';
  }
}

void writePerTime(const std::vector<double>& times, const std::vector<double>& errors, const std::filesystem::path& path) {
  std::ofstream out(path);
  out << std::setprecision(17) << "t,rel_l2\n";
  for (std::size_t i = 0; i < errors.size(); ++i) out << times[i] << ',' << errors[i] << '\n';
}

}  // namespace

Evaluation evaluate(const trainer::Experiment& exp, const trainer::TrainedModel& trained) {
  Evaluation ev;
  const std::string method(methodName(trained.method));
  const auto& axes = exp.axes();

  const Matrix coords = exp.gridAt(axes.trainTimes);
  const Matrix approx = exp.predict(trained.theta, coords);
  const Matrix ref = exp.reference().evaluate(coords);
  ev.rows.push_back(row(exp, method, "forward", approx, ref, trained.trainSeconds));
  ev.forwardPerTime = metrics::relativeL2PerTime(scoredColumn(approx), scoredColumn(ref),
                                                 coords.rows() / static_cast<Index>(axes.trainTimes.size()));
  ev.forwardField = fieldTable(exp, coords, approx);

  if (!axes.heldOutTimes.empty())
    scoreForecast(exp, method, trainer::forecastMultiStep(exp, trained, axes.heldOutTimes), trained.trainSeconds, ev);
  return ev;
}

Evaluation extrapolationBaseline(const trainer::Experiment& exp) {
  Evaluation ev;
  const auto& axes = exp.axes();
  if (axes.heldOutTimes.empty()) return ev;
  const auto& tr = axes.trainTimes;
  const Matrix prev = exp.reference().evaluate(exp.gridAt({tr[tr.size() - 2]}));
  const Matrix cur = exp.reference().evaluate(exp.gridAt({tr.back()}));
  const auto frames = trainer::extrapolateRecursive(prev, cur, static_cast<int>(axes.heldOutTimes.size()));
  scoreForecast(exp, "extrapolation", frames, 0.0, ev);
  return ev;
}

void writeEvaluation(const Evaluation& ev, const std::filesystem::path& outDir, const std::string& tag) {
  std::filesystem::create_directories(outDir / "fields");
  metrics::emitErrorTable(ev.rows, outDir / "errors.csv");
  if (ev.forwardField.coords.rows() > 0) metrics::emitFieldSnapshot(ev.forwardField, outDir / "fields" / (tag + "_forward.csv"));
  if (ev.forecastField.coords.rows() > 0)
    metrics::emitFieldSnapshot(ev.forecastField, outDir / "fields" / (tag + "_forecast.csv"));
}

RunResult run(const ExperimentConfig& cfg, const std::optional<std::filesystem::path>& outDir, bool verbose) {
  trainer::Experiment exp(cfg);
  if (outDir) {
    std::filesystem::create_directories(*outDir);
    std::ofstream(*outDir / "config.snapshot") << toJson(cfg).dump(2) << '\n';
  }
  RunResult r;
  r.trained = exp.train([&](const optim::TraceRow& row, const loss::LossBreakdown& b) {
    if (verbose && (row.iteration % 25 == 0 || row.iteration == 1))
      std::cerr << "iter " << row.iteration << " loss " << row.value << " (res " << b.res << ", bc " << b.bc << ", ic "
                << b.ic << ", data " << b.data << ")\n";
  });
  r.evaluation = evaluate(exp, r.trained);
  if (outDir) {
    model::writeCheckpoint(*outDir / "checkpoint.bin", r.trained.theta);
    writeTrace(r.trained, *outDir / "trace.csv");
    writeEvaluation(r.evaluation, *outDir, std::string(methodName(cfg.method)));
    writePerTime(exp.axes().trainTimes, r.evaluation.forwardPerTime, *outDir / "fields" / "forward_error_per_time.csv");
    if (!r.evaluation.forecastPerTime.empty())
      writePerTime(exp.axes().heldOutTimes, r.evaluation.forecastPerTime,
                   *outDir / "fields" / "forecast_error_per_time.csv");
  }
  return r;
}

}  // namespace physolver::report
