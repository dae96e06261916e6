#include <doctest.h>

#include "physolver/errors.hpp"
#include "physolver/metrics.hpp"

#include <fstream>
#include <random>

using namespace physolver;
using namespace physolver::metrics;

namespace {

Matrix randomField(Eigen::Index rows, Eigen::Index cols, unsigned seed) {
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> n(0.0, 1.0);
  Matrix m(rows, cols);
  for (Eigen::Index i = 0; i < m.size(); ++i) m.data()[i] = n(rng);
  return m;
}

int lineCount(const std::filesystem::path& p) {
  std::ifstream in(p);
  std::string line;
  int n = 0;
  while (std::getline(in, line)) ++n;
  return n;
}

}  // namespace

TEST_CASE("relative l2 examples") {
  const Matrix u = randomField(40, 1, 1);
  CHECK(relativeL2(u, u) == 0.0);
  CHECK(relativeL2(2.0 * u, u) == doctest::Approx(1.0).epsilon(1e-14));
  CHECK(relativeL2(Matrix::Zero(40, 1), u) == doctest::Approx(1.0).epsilon(1e-14));
  CHECK_THROWS_AS(relativeL2(u, Matrix::Zero(40, 1)), MetricError);
  CHECK_THROWS_AS(relativeL2(u, Matrix::Zero(39, 1)), ContractViolation);
}

TEST_CASE("relative linf examples") {
  Matrix u(4, 1);
  u << -2.0, 1.0, 2.0, -1.0;
  CHECK(relativeLinf(u, u) == 0.0);
  CHECK(relativeLinf(u.array() + 0.5, u) == doctest::Approx(0.25));
  CHECK(relativeLinf(-u, u) == doctest::Approx(2.0));
}

TEST_CASE("relative l2 is invariant under joint scaling") {
  const Matrix a = randomField(30, 2, 2), b = randomField(30, 2, 3);
  for (double s : {-3.0, 1e-3, 7.5}) CHECK(relativeL2(s * a, s * b) == doctest::Approx(relativeL2(a, b)).epsilon(1e-12));
}

TEST_CASE("relative l2 of a union is the pooled formula") {
  const Matrix a1 = randomField(10, 1, 4), b1 = randomField(10, 1, 5);
  const Matrix a2 = randomField(6, 1, 6), b2 = randomField(6, 1, 7);
  Matrix a(16, 1), b(16, 1);
  a << a1, a2;
  b << b1, b2;
  const double pooled =
      std::sqrt(((a1 - b1).squaredNorm() + (a2 - b2).squaredNorm()) / (b1.squaredNorm() + b2.squaredNorm()));
  CHECK(relativeL2(a, b) == doctest::Approx(pooled).epsilon(1e-13));
  const auto per = relativeL2PerTime(a.topRows(16), b.topRows(16), 8);
  REQUIRE(per.size() == 2);
  CHECK(per[0] == doctest::Approx(relativeL2(a.topRows(8), b.topRows(8))));
}

TEST_CASE("empty error table is header only") {
  const auto p = std::filesystem::temp_directory_path() / "physolver_metrics" / "empty.csv";
  emitErrorTable({}, p);
  std::ifstream in(p);
  std::string header;
  std::getline(in, header);
  CHECK(header == "pde,method,problem,rel_l2,rel_linf,runtime_s");
  CHECK(lineCount(p) == 1);
  CHECK(readErrorTable(p).empty());
}

TEST_CASE("error rows round trip at 17 digits") {
  const auto p = std::filesystem::temp_directory_path() / "physolver_metrics" / "rows.csv";
  ErrorRow r{"reaction", "physics-solver", "forecast-1", 0.1 + 0.2, 1.0 / 3.0, 12.345678901234567};
  ErrorRow s{"heat", "pinns", "forward", 5.550e-4, 3e-300, 0.0};
  emitErrorTable({r, s}, p);
  const auto back = readErrorTable(p);
  REQUIRE(back.size() == 2);
  CHECK(back[0].pde == r.pde);
  CHECK(back[0].problem == r.problem);
  CHECK(back[0].relL2 == r.relL2);
  CHECK(back[0].relLinf == r.relLinf);
  CHECK(back[0].runtimeSeconds == r.runtimeSeconds);
  CHECK(back[1].relLinf == s.relLinf);
}

TEST_CASE("field snapshot of a 3x2 grid has six rows") {
  FieldTable t;
  t.coordNames = {"t", "x"};
  t.fieldNames = {"value"};
  t.coords.resize(6, 2);
  t.values.resize(6, 1);
  for (int i = 0; i < 6; ++i) {
    t.coords.row(i) << i / 2, i % 2;
    t.values(i, 0) = i;
  }
  const auto p = std::filesystem::temp_directory_path() / "physolver_metrics" / "snap.csv";
  emitFieldSnapshot(t, p);
  CHECK(lineCount(p) == 7);
  std::ifstream in(p);
  std::string header;
  std::getline(in, header);
  CHECK(header == "t,x,value");
}

TEST_CASE("unwritable path reports the path") {
  try {
    emitErrorTable({}, "/proc/physolver/nope/errors.csv");
    FAIL("expected an error");
  } catch (const std::exception& e) {
    CHECK(std::string(e.what()).find("/proc/physolver/nope") != std::string::npos);
  }
}
