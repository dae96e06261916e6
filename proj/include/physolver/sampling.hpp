#pragma once

#include <Eigen/Dense>

#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <vector>

namespace physolver::sampling {

struct Interval {
  double lo = 0.0;
  double hi = 1.0;
  double length() const { return hi - lo; }
};

struct GridPoint {
  double t = 0.0;
  std::vector<double> x;
  std::vector<double> v;  // velocity coordinates; unused by the shipped benchmarks
};

/// Pseudo-sequence generator settings: k steps of gamma * deltaT each.
struct IpsggConfig {
  int k = 5;
  double deltaT = 1e-2;
  double gamma = 1.1;

  /// Throws ConfigError unless k >= 1, deltaT > 0 and, for k > 1, (k-1)*gamma is not an integer.
  void validate() const;
};

/// n evenly spaced values including both endpoints (n >= 2).
std::vector<double> linspace(double lo, double hi, int n);

/// Time-major tensor grid; within one time the last spatial axis varies fastest.
std::vector<GridPoint> tensorProductGrid(int tCount, std::span<const int> spatialCounts, Interval time,
                                         std::span<const Interval> space);

/// Same ordering, from explicit per-axis node lists.
std::vector<GridPoint> tensorProductGrid(std::span<const double> times,
                                         std::span<const std::vector<double>> spatialNodes);

std::vector<GridPoint> ipsggExpand(const GridPoint& p, const IpsggConfig& cfg);

/// Base-b digit reversal of `index` (index >= 1, base >= 2).
double radicalInverse(std::uint64_t index, unsigned base);

/// First `count` base-2 Halton values scaled into `interval`, optionally snapped
/// to the nodes of `snapGrid` lying inside the interval (duplicates are replaced
/// by later Halton indices). Sorted ascending.
std::vector<double> haltonDataStamps(int count, Interval interval,
                                     std::optional<std::span<const double>> snapGrid = std::nullopt);

/// Star discrepancy of a point set in [0, 1].
double starDiscrepancy(std::vector<double> points);

// ---------------------------------------------------------------------------
// Packed point sets consumed by the models.

/// `count` sequences of `seqLen` consecutive rows; columns are coordinates
/// named by `columns` (t first, then spatial axes).
struct SequenceSet {
  std::vector<std::string> columns;
  Eigen::MatrixXd coords;
  Eigen::Index seqLen = 1;

  Eigen::Index count() const { return seqLen > 0 ? coords.rows() / seqLen : 0; }
  Eigen::Index rows() const { return coords.rows(); }
  bool empty() const { return coords.rows() == 0; }
};

std::vector<std::string> columnNames(int spatialDim);

/// Every point as a length-1 sequence.
SequenceSet pointSet(std::span<const GridPoint> points, int spatialDim);
/// Every point expanded into a pseudo sequence of cfg.k rows.
SequenceSet expandedSet(std::span<const GridPoint> points, int spatialDim, const IpsggConfig& cfg);

enum class BoundaryKind { None, Periodic, Dirichlet };

/// Collocation and data points for one experiment.
struct GridBundle {
  int spatialDim = 1;
  SequenceSet residual;
  /// Periodic: the first half of the sequences sits on the lower edge and the
  /// second half on the matching upper edge, in the same order.
  SequenceSet boundary;
  BoundaryKind boundaryKind = BoundaryKind::None;
  SequenceSet initial;
  Eigen::MatrixXd initialTargets;  // rows = initial.count()
  SequenceSet data;
  Eigen::MatrixXd dataTargets;  // rows = data.count(), cols = output arity
  std::vector<double> dataTimes;
};

}  // namespace physolver::sampling
