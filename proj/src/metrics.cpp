#include "physolver/metrics.hpp"

#include "physolver/errors.hpp"

#include <cmath>
#include <fstream>
#include <iomanip>
#include <limits>
#include <sstream>

namespace physolver::metrics {

namespace {

void checkAligned(const Matrix& a, const Matrix& b) {
  if (a.rows() != b.rows() || a.cols() != b.cols()) throw ContractViolation("metric inputs are not aligned");
}

std::ofstream openForWrite(const std::filesystem::path& path) {
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write " + path.string());
  out << std::setprecision(17);
  return out;
}

}  // namespace

double relativeL2(const Matrix& approx, const Matrix& ref) {
  checkAligned(approx, ref);
  const double denom = ref.squaredNorm();
  if (denom == 0.0) throw MetricError("relative error undefined: reference is identically zero");
  return std::sqrt((approx - ref).squaredNorm() / denom);
}

std::vector<double> relativeL2PerTime(const Matrix& approx, const Matrix& ref, Eigen::Index rowsPerTime) {
  checkAligned(approx, ref);
  if (rowsPerTime <= 0 || ref.rows() % rowsPerTime != 0) throw ContractViolation("rows are not a whole number of time blocks");
  std::vector<double> out;
  for (Eigen::Index s = 0; s < ref.rows(); s += rowsPerTime)
    out.push_back(relativeL2(approx.middleRows(s, rowsPerTime), ref.middleRows(s, rowsPerTime)));
  return out;
}

double relativeLinf(const Matrix& approx, const Matrix& ref) {
  checkAligned(approx, ref);
  const double denom = ref.cwiseAbs().maxCoeff();
  if (!(denom > 0.0)) throw MetricError("relative error undefined: reference is identically zero");
  return (approx - ref).cwiseAbs().maxCoeff() / denom;
}

void emitErrorTable(const std::vector<ErrorRow>& rows, const std::filesystem::path& path) {
  auto out = openForWrite(path);
  out << "pde,method,problem,rel_l2,rel_linf,runtime_s\n";
  for (const auto& r : rows)
    out << r.pde << ',' << r.method << ',' << r.problem << ',' << r.relL2 << ',' << r.relLinf << ','
        << r.runtimeSeconds << '\n';
  if (!out) throw std::runtime_error("failed writing " + path.string());
}

std::vector<ErrorRow> readErrorTable(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot read " + path.string());
  std::string line;
  std::getline(in, line);
  std::vector<ErrorRow> rows;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    std::stringstream ss(line);
    ErrorRow r;
    std::string cell;
    std::getline(ss, r.pde, ',');
    std::getline(ss, r.method, ',');
    std::getline(ss, r.problem, ',');
    std::getline(ss, cell, ',');
    r.relL2 = std::stod(cell);
    std::getline(ss, cell, ',');
    r.relLinf = std::stod(cell);
    std::getline(ss, cell, ',');
    r.runtimeSeconds = std::stod(cell);
    rows.push_back(r);
  }
  return rows;
}

void emitFieldSnapshot(const FieldTable& table, const std::filesystem::path& path) {
  if (table.coords.rows() != table.values.rows() ||
      table.coords.cols() != static_cast<Eigen::Index>(table.coordNames.size()) ||
      table.values.cols() != static_cast<Eigen::Index>(table.fieldNames.size()))
    throw ContractViolation("field table columns do not match its names");
  auto out = openForWrite(path);
  bool first = true;
  for (const auto& n : table.coordNames) out << (first ? "" : ",") << n, first = false;
  for (const auto& n : table.fieldNames) out << ',' << n;
  out << '\n';
  for (Eigen::Index r = 0; r < table.coords.rows(); ++r) {
    for (Eigen::Index c = 0; c < table.coords.cols(); ++c) out << (c ? "," : "") << table.coords(r, c);
    for (Eigen::Index c = 0; c < table.values.cols(); ++c) out << ',' << table.values(r, c);
    out << '\n';
  }
  if (!out) throw std::runtime_error("failed writing " + path.string());
}

}  // namespace physolver::metrics
