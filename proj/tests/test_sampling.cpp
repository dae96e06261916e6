#include <doctest.h>

#include "physolver/errors.hpp"
#include "physolver/sampling.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <random>
#include <string>

using namespace physolver;
using namespace physolver::sampling;

namespace {

// Writes the index in base b, reverses the digit string and reads it back as
// the fraction 0.d1d2d3... in base b.
double digitReversalOracle(std::uint64_t index, unsigned base) {
  std::string digits;
  for (std::uint64_t i = index; i > 0; i /= base) digits.push_back(static_cast<char>('0' + i % base));
  std::uint64_t numerator = 0;
  std::uint64_t denominator = 1;
  for (char d : digits) {
    numerator = numerator * base + static_cast<std::uint64_t>(d - '0');
    denominator *= base;
  }
  return static_cast<double>(numerator) / static_cast<double>(denominator);
}

}  // namespace

TEST_CASE("linspace-based tensor grid") {
  const std::vector<int> counts{2};
  const std::vector<Interval> space{{0.0, 2 * std::numbers::pi}};
  auto g = tensorProductGrid(3, counts, Interval{0.0, 1.0}, space);
  REQUIRE(g.size() == 6);
  CHECK(g[0].t == 0.0);
  CHECK(g[2].t == 0.5);
  CHECK(g[5].t == 1.0);
  CHECK(g[0].x[0] == 0.0);
  CHECK(g[1].x[0] == doctest::Approx(2 * std::numbers::pi));

  const std::vector<int> big{101};
  auto full = tensorProductGrid(101, big, Interval{0.0, 1.0}, space);
  CHECK(full.size() == 10201);
  CHECK(full[101].t - full[0].t == doctest::Approx(0.01));

  auto ends = tensorProductGrid(2, counts, Interval{0.0, 1.0}, space);
  CHECK(ends.front().t == 0.0);
  CHECK(ends.back().t == 1.0);

  const std::vector<int> bad{1};
  CHECK_THROWS_AS(tensorProductGrid(3, bad, Interval{0.0, 1.0}, space), ConfigError);
  CHECK_THROWS_AS(tensorProductGrid(1, counts, Interval{0.0, 1.0}, space), ConfigError);
}

TEST_CASE("2D grid ordering is time-major then x then y") {
  const std::vector<int> counts{2, 3};
  const std::vector<Interval> space{{0.0, 1.0}, {0.0, 2.0}};
  auto g = tensorProductGrid(2, counts, Interval{0.0, 1.0}, space);
  REQUIRE(g.size() == 12);
  CHECK(g[1].x[0] == 0.0);
  CHECK(g[1].x[1] == 1.0);
  CHECK(g[3].x[0] == 1.0);
  CHECK(g[6].t == 1.0);
}

TEST_CASE("ipsgg expansion") {
  GridPoint p{0.0, {1.0}, {}};
  IpsggConfig cfg{5, 0.01, 1.1};
  auto seq = ipsggExpand(p, cfg);
  REQUIRE(seq.size() == 5);
  const double expected[] = {0.0, 0.011, 0.022, 0.033, 0.044};
  for (std::size_t j = 0; j < 5; ++j) {
    CHECK(seq[j].t == doctest::Approx(expected[j]).epsilon(1e-14));
    CHECK(seq[j].x == p.x);
  }
  CHECK_NOTHROW(cfg.validate());  // (k-1) * gamma = 4.4

  IpsggConfig single{1, 0.01, 1.1};
  auto one = ipsggExpand(p, single);
  REQUIRE(one.size() == 1);
  CHECK(one[0].t == p.t);

  IpsggConfig bad{5, 0.01, 1.25};  // (k-1) * gamma = 5
  CHECK_THROWS_AS(ipsggExpand(p, bad), ConfigError);
}

TEST_CASE("ipsgg preserves space and produces strictly increasing times") {
  std::mt19937_64 rng(5);
  std::uniform_real_distribution<double> u(-3.0, 3.0);
  IpsggConfig cfg{5, 0.01, 1.1};
  for (int trial = 0; trial < 200; ++trial) {
    GridPoint p{u(rng), {u(rng), u(rng)}, {}};
    auto seq = ipsggExpand(p, cfg);
    for (std::size_t j = 0; j < seq.size(); ++j) {
      CHECK(seq[j].x == p.x);
      if (j > 0) CHECK(seq[j].t > seq[j - 1].t);
    }
  }
}

TEST_CASE("default pseudo sequences never land on evaluation time nodes") {
  const auto nodes = linspace(0.0, 1.0, 101);
  IpsggConfig cfg{5, 0.01, 1.1};
  double closest = 1.0;
  for (double t : nodes) {
    auto seq = ipsggExpand(GridPoint{t, {0.0}, {}}, cfg);
    for (std::size_t j = 1; j < seq.size(); ++j)
      for (double n : nodes) closest = std::min(closest, std::abs(seq[j].t - n));
  }
  CHECK(closest > 1e-4);
}

TEST_CASE("radical inverse known values") {
  CHECK(radicalInverse(1, 2) == 0.5);
  CHECK(radicalInverse(2, 2) == 0.25);
  CHECK(radicalInverse(3, 2) == 0.75);
  CHECK(radicalInverse(1, 3) == 1.0 / 3.0);
}

TEST_CASE("radical inverse equals digit-reversal oracle for the first 16 indices") {
  for (unsigned base : {2u, 3u}) {
    for (std::uint64_t i = 1; i <= 16; ++i) {
      CAPTURE(base);
      CAPTURE(i);
      CHECK(radicalInverse(i, base) == digitReversalOracle(i, base));
    }
  }
}

TEST_CASE("halton points are pairwise distinct") {
  std::vector<double> v;
  for (std::uint64_t i = 1; i <= 1024; ++i) v.push_back(radicalInverse(i, 2));
  std::sort(v.begin(), v.end());
  CHECK(std::adjacent_find(v.begin(), v.end()) == v.end());
}

TEST_CASE("halton beats uniform random in star discrepancy") {
  std::vector<double> halton;
  for (std::uint64_t i = 1; i <= 64; ++i) halton.push_back(radicalInverse(i, 2));
  const double dHalton = starDiscrepancy(halton);

  std::mt19937_64 rng(2024);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  std::vector<double> randomD;
  for (int trial = 0; trial < 100; ++trial) {
    std::vector<double> pts(64);
    for (auto& p : pts) p = u(rng);
    randomD.push_back(starDiscrepancy(pts));
  }
  std::nth_element(randomD.begin(), randomD.begin() + 50, randomD.end());
  CHECK(dHalton < randomD[50]);
}

TEST_CASE("halton data stamps") {
  auto two = haltonDataStamps(2, Interval{0.0, 1.0});
  REQUIRE(two.size() == 2);
  CHECK(two[0] == 0.25);
  CHECK(two[1] == 0.5);

  auto one = haltonDataStamps(1, Interval{0.0, 2.0});
  REQUIRE(one.size() == 1);
  CHECK(one[0] == 1.0);

  const auto grid = linspace(0.0, 1.0, 101);
  auto snapped = haltonDataStamps(5, Interval{0.0, 1.0}, grid);
  REQUIRE(snapped.size() == 5);
  CHECK(std::adjacent_find(snapped.begin(), snapped.end()) == snapped.end());
  CHECK(std::is_sorted(snapped.begin(), snapped.end()));
  for (double s : snapped) CHECK(std::find(grid.begin(), grid.end(), s) != grid.end());

  // 0.5, 0.25 and 0.75 snap to three distinct nodes of a 3-node grid; a fourth does not exist.
  const auto coarse = linspace(0.0, 1.0, 3);
  CHECK(haltonDataStamps(3, Interval{0.0, 1.0}, coarse).size() == 3);
  CHECK_THROWS_AS(haltonDataStamps(4, Interval{0.0, 1.0}, coarse), SamplingExhausted);
  CHECK_THROWS_AS(haltonDataStamps(2, Interval{1.0, 1.0}), ConfigError);
  CHECK_THROWS_AS(haltonDataStamps(0, Interval{0.0, 1.0}), ConfigError);
}

TEST_CASE("packed sets") {
  std::vector<GridPoint> pts{{0.0, {1.0}, {}}, {0.5, {2.0}, {}}};
  auto s = pointSet(pts, 1);
  CHECK(s.count() == 2);
  CHECK(s.coords(1, 0) == 0.5);
  CHECK(s.coords(1, 1) == 2.0);
  auto e = expandedSet(pts, 1, IpsggConfig{5, 0.01, 1.1});
  CHECK(e.count() == 2);
  CHECK(e.rows() == 10);
  CHECK(e.coords(6, 0) == doctest::Approx(0.511));
  CHECK(e.coords(6, 1) == 2.0);
  CHECK(s.columns == std::vector<std::string>{"t", "x"});
}
