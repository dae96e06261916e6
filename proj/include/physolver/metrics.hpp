#pragma once

#include <Eigen/Dense>

#include <filesystem>
#include <string>
#include <vector>

namespace physolver::metrics {

using Matrix = Eigen::MatrixXd;

/// sqrt(sum |approx - ref|^2 / sum |ref|^2) over every entry.
double relativeL2(const Matrix& approx, const Matrix& ref);
/// The same ratio per block of `rowsPerTime` consecutive rows (one block per time stamp).
std::vector<double> relativeL2PerTime(const Matrix& approx, const Matrix& ref, Eigen::Index rowsPerTime);
/// max |approx - ref| / max |ref|.
double relativeLinf(const Matrix& approx, const Matrix& ref);

struct ErrorRow {
  std::string pde;
  std::string method;
  std::string problem;  // forward, forecast-1, forecast-multi
  double relL2 = 0.0;
  double relLinf = 0.0;
  double runtimeSeconds = 0.0;
};

/// CSV with header `pde,method,problem,rel_l2,rel_linf,runtime_s`; numbers at 17 significant digits.
void emitErrorTable(const std::vector<ErrorRow>& rows, const std::filesystem::path& path);
std::vector<ErrorRow> readErrorTable(const std::filesystem::path& path);

/// Field values on a set of space-time nodes.
struct FieldTable {
  std::vector<std::string> coordNames;  // t, x[, y]
  std::vector<std::string> fieldNames;  // value, or u, v, p
  Matrix coords;
  Matrix values;
};

/// CSV with header `t,x[,y],<fields>`, one row per node.
void emitFieldSnapshot(const FieldTable& table, const std::filesystem::path& path);

}  // namespace physolver::metrics
