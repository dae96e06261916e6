#include "physolver/sampling.hpp"

#include "physolver/errors.hpp"

#include <algorithm>
#include <cmath>
#include <set>

namespace physolver::sampling {

void IpsggConfig::validate() const {
  if (k < 1) throw ConfigError("ipsgg.k must be >= 1");
  if (!(deltaT > 0.0)) throw ConfigError("ipsgg.dt must be positive");
  if (k > 1) {
    const double span = (k - 1) * gamma;
    if (std::abs(span - std::round(span)) < 1e-12)
      throw ConfigError("ipsgg: (k-1)*gamma = " + std::to_string(span) +
                        " is an integer, so pseudo points would land on grid nodes");
  }
}

std::vector<double> linspace(double lo, double hi, int n) {
  if (n < 2) throw ConfigError("grid axes need at least 2 nodes, got " + std::to_string(n));
  std::vector<double> out(static_cast<std::size_t>(n));
  const double step = (hi - lo) / (n - 1);
  for (int i = 0; i < n; ++i) out[static_cast<std::size_t>(i)] = lo + step * i;
  out.back() = hi;
  return out;
}

std::vector<GridPoint> tensorProductGrid(std::span<const double> times,
                                         std::span<const std::vector<double>> spatialNodes) {
  std::size_t perTime = 1;
  for (const auto& axis : spatialNodes) perTime *= axis.size();
  std::vector<GridPoint> out;
  out.reserve(times.size() * perTime);
  std::vector<std::size_t> idx(spatialNodes.size(), 0);
  for (double t : times) {
    std::fill(idx.begin(), idx.end(), 0);
    for (std::size_t n = 0; n < perTime; ++n) {
      GridPoint p;
      p.t = t;
      for (std::size_t a = 0; a < spatialNodes.size(); ++a) p.x.push_back(spatialNodes[a][idx[a]]);
      out.push_back(std::move(p));
      for (std::size_t a = spatialNodes.size(); a-- > 0;) {
        if (++idx[a] < spatialNodes[a].size()) break;
        idx[a] = 0;
      }
    }
  }
  return out;
}

std::vector<GridPoint> tensorProductGrid(int tCount, std::span<const int> spatialCounts, Interval time,
                                         std::span<const Interval> space) {
  if (spatialCounts.size() != space.size()) throw ConfigError("spatial counts and bounds differ in dimension");
  const auto times = linspace(time.lo, time.hi, tCount);
  std::vector<std::vector<double>> axes;
  for (std::size_t a = 0; a < space.size(); ++a) axes.push_back(linspace(space[a].lo, space[a].hi, spatialCounts[a]));
  return tensorProductGrid(times, axes);
}

std::vector<GridPoint> ipsggExpand(const GridPoint& p, const IpsggConfig& cfg) {
  cfg.validate();
  std::vector<GridPoint> seq(static_cast<std::size_t>(cfg.k), p);
  for (int j = 0; j < cfg.k; ++j) seq[static_cast<std::size_t>(j)].t = p.t + j * cfg.gamma * cfg.deltaT;
  return seq;
}

double radicalInverse(std::uint64_t index, unsigned base) {
  // Exact integer digit reversal while the denominator fits in 53 bits, so the
  // single final division is correctly rounded.
  std::uint64_t reversed = 0;
  std::uint64_t denom = 1;
  while (index > 0 && denom <= (std::uint64_t{1} << 53) / base) {
    reversed = reversed * base + index % base;
    denom *= base;
    index /= base;
  }
  double result = static_cast<double>(reversed) / static_cast<double>(denom);
  double factor = 1.0 / static_cast<double>(denom) / base;
  for (; index > 0; index /= base, factor /= base) result += static_cast<double>(index % base) * factor;
  return result;
}

std::vector<double> haltonDataStamps(int count, Interval interval, std::optional<std::span<const double>> snapGrid) {
  if (count < 1) throw ConfigError("data stamp count must be >= 1");
  if (!(interval.hi > interval.lo)) throw ConfigError("data stamp interval is empty");

  auto scaled = [&](std::uint64_t i) { return interval.lo + interval.length() * radicalInverse(i, 2); };
  std::vector<double> out;
  if (!snapGrid) {
    for (int i = 1; i <= count; ++i) out.push_back(scaled(static_cast<std::uint64_t>(i)));
  } else {
    std::vector<double> nodes;
    for (double n : *snapGrid)
      if (n >= interval.lo && n <= interval.hi) nodes.push_back(n);
    std::sort(nodes.begin(), nodes.end());
    if (static_cast<int>(nodes.size()) < count)
      throw SamplingExhausted("snap grid has " + std::to_string(nodes.size()) + " nodes in the interval but " +
                              std::to_string(count) + " stamps were requested");
    std::set<std::size_t> taken;
    // Every node is eventually hit once the Halton points become denser than the grid.
    const std::uint64_t limit = 1u << 24;
    for (std::uint64_t i = 1; static_cast<int>(taken.size()) < count; ++i) {
      if (i > limit) throw SamplingExhausted("could not find enough distinct snapped stamps");
      const double v = scaled(i);
      auto it = std::lower_bound(nodes.begin(), nodes.end(), v);
      std::size_t best = static_cast<std::size_t>(it - nodes.begin());
      if (best == nodes.size() || (best > 0 && v - nodes[best - 1] <= nodes[best] - v)) --best;
      if (taken.insert(best).second) out.push_back(nodes[best]);
    }
  }
  std::sort(out.begin(), out.end());
  return out;
}

double starDiscrepancy(std::vector<double> points) {
  std::sort(points.begin(), points.end());
  const double n = static_cast<double>(points.size());
  double d = 0.0;
  for (std::size_t i = 0; i < points.size(); ++i) {
    d = std::max(d, (i + 1) / n - points[i]);
    d = std::max(d, points[i] - i / n);
  }
  return d;
}

std::vector<std::string> columnNames(int spatialDim) {
  static const char* names[] = {"x", "y", "z"};
  if (spatialDim < 1 || spatialDim > 3) throw ConfigError("spatial dimension must be 1, 2 or 3");
  std::vector<std::string> out{"t"};
  for (int a = 0; a < spatialDim; ++a) out.emplace_back(names[a]);
  return out;
}

SequenceSet pointSet(std::span<const GridPoint> points, int spatialDim) {
  SequenceSet s;
  s.columns = columnNames(spatialDim);
  s.seqLen = 1;
  s.coords.resize(static_cast<Eigen::Index>(points.size()), spatialDim + 1);
  for (std::size_t i = 0; i < points.size(); ++i) {
    const auto r = static_cast<Eigen::Index>(i);
    s.coords(r, 0) = points[i].t;
    for (int a = 0; a < spatialDim; ++a) s.coords(r, a + 1) = points[i].x[static_cast<std::size_t>(a)];
  }
  return s;
}

SequenceSet expandedSet(std::span<const GridPoint> points, int spatialDim, const IpsggConfig& cfg) {
  cfg.validate();
  SequenceSet s;
  s.columns = columnNames(spatialDim);
  s.seqLen = cfg.k;
  s.coords.resize(static_cast<Eigen::Index>(points.size()) * cfg.k, spatialDim + 1);
  Eigen::Index r = 0;
  for (const auto& p : points) {
    for (const auto& q : ipsggExpand(p, cfg)) {
      s.coords(r, 0) = q.t;
      for (int a = 0; a < spatialDim; ++a) s.coords(r, a + 1) = q.x[static_cast<std::size_t>(a)];
      ++r;
    }
  }
  return s;
}

}  // namespace physolver::sampling
