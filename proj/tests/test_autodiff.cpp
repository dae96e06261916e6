#include <doctest.h>

#include "fd_oracle.hpp"
#include "physolver/autodiff.hpp"
#include "physolver/errors.hpp"

#include <functional>
#include <random>

using namespace physolver;
using namespace physolver::ad;
using physolver::testing::centralDifference;
using physolver::testing::maxRelativeError;
using physolver::testing::randomMatrix;

namespace {

const std::vector<std::string> kTX = {"t", "x"};

DerivativeRequest fullRequest() { return DerivativeRequest{{"t", "x"}, {"t", "x"}}; }

// Two tanh projections of the (t, x) input feed each primitive under test.
struct Pipeline {
  using Body = std::function<Var(Tape&, Var h1, Var h2, const ParameterVector&)>;

  ParameterLayout layout;
  Matrix coords;
  Index seqLen = 3;
  std::vector<Matrix> probes;  // random weights contracting each output channel
  Body body;

  explicit Pipeline(Body b, std::mt19937_64& rng) : body(std::move(b)) {
    layout.add("w1", 2, 6);
    layout.add("b1", 1, 6);
    layout.add("w2", 2, 6);
    layout.add("gamma", 1, 6);
    layout.add("beta", 1, 6);
    layout.add("w3", 6, 4);
    coords = randomMatrix(6, 2, rng, -0.8, 0.8);
  }

  Var output(Tape& tape, const ParameterVector& theta, const Matrix& at) const {
    Var x = seedInputs(tape, at, kTX, fullRequest());
    Var h1 = ad::tanh(linear(x, tape.parameter(theta, "w1"), tape.parameter(theta, "b1")));
    Var h2 = ad::tanh(linear(x, tape.parameter(theta, "w2"), Var()));
    return body(tape, h1, h2, theta);
  }

  Var loss(Tape& tape, const ParameterVector& theta, std::mt19937_64* rng = nullptr) {
    Var y = output(tape, theta, coords);
    if (probes.empty() && rng) {
      for (int c = 0; c < y.layout().channels(); ++c) probes.push_back(randomMatrix(y.rows(), y.cols(), *rng));
    }
    Var total;
    for (int c = 0; c < y.layout().channels(); ++c) {
      Var term = sumAll(channel(y, c) * tape.constant(probes[static_cast<std::size_t>(c)]));
      total = total.valid() ? total + term : term;
    }
    return total;
  }
};

struct PrimitiveCase {
  const char* name;
  Pipeline::Body body;
};

std::vector<PrimitiveCase> primitiveCases() {
  return {
      {"tanh", [](Tape&, Var h1, Var, const ParameterVector&) { return ad::tanh(h1); }},
      {"exp", [](Tape&, Var h1, Var, const ParameterVector&) { return ad::exp(h1); }},
      {"sqrt", [](Tape&, Var h1, Var, const ParameterVector&) { return ad::sqrt(addScalar(h1 * h1, 0.5)); }},
      {"reciprocal", [](Tape&, Var h1, Var, const ParameterVector&) { return reciprocal(addScalar(h1, 2.0)); }},
      {"rsqrt", [](Tape&, Var h1, Var, const ParameterVector&) { return rsqrt(addScalar(h1, 1.5)); }},
      {"sin", [](Tape&, Var h1, Var, const ParameterVector&) { return unary(h1, UnaryKind::Sin); }},
      {"mul", [](Tape&, Var h1, Var h2, const ParameterVector&) { return h1 * h2; }},
      {"add/sub", [](Tape&, Var h1, Var h2, const ParameterVector&) { return (h1 + h2) - 0.5 * h2; }},
      {"mulRowScalar", [](Tape&, Var h1, Var h2, const ParameterVector&) { return mulRowScalar(h1, rowMean(h2)); }},
      {"linear",
       [](Tape& t, Var h1, Var, const ParameterVector& th) { return linear(h1, t.parameter(th, "w3"), Var()); }},
      {"affineColumns",
       [](Tape& t, Var h1, Var, const ParameterVector& th) {
         return affineColumns(h1, t.parameter(th, "gamma"), t.parameter(th, "beta"));
       }},
      {"centerRows", [](Tape&, Var h1, Var h2, const ParameterVector&) { return centerRows(h1 * h2); }},
      {"slice/concat",
       [](Tape&, Var h1, Var h2, const ParameterVector&) {
         return concatCols({sliceCols(h2, 3, 3), sliceCols(h1 * h1, 0, 2)});
       }},
      {"rows", [](Tape&, Var h1, Var h2, const ParameterVector&) {
         return concatRows({sliceRows(h1 * h2, 3, 3), selectPosition(h1, 3, 2)});
       }},
      {"blockSum", [](Tape&, Var h1, Var h2, const ParameterVector&) { return blockSum(h1 * h2, 3); }},
      {"blockMatmulABt", [](Tape&, Var h1, Var h2, const ParameterVector&) { return blockMatmulABt(h1, h2, 3); }},
      {"blockMatmulAB",
       [](Tape&, Var h1, Var h2, const ParameterVector&) {
         return blockMatmulAB(blockMatmulABt(h1, h2, 3), h2, 3);
       }},
      {"softmaxRows", [](Tape&, Var h1, Var h2, const ParameterVector&) { return softmaxRows(3.0 * (h1 * h2)); }},
  };
}

ParameterVector randomTheta(const ParameterLayout& layout, std::mt19937_64& rng) {
  ParameterVector theta(layout);
  theta.values() = randomMatrix(layout.size(), 1, rng);
  return theta;
}

}  // namespace

TEST_CASE("seedInputs seeds identity derivatives") {
  Tape tape;
  Matrix pt(1, 2);
  pt << 0.3, 1.0;
  Var x = seedInputs(tape, pt, kTX, DerivativeRequest{{"t"}, {"t"}});
  REQUIRE(x.layout().channels() == 3);
  CHECK(x.channel(1)(0, 0) == 1.0);
  CHECK(x.channel(1)(0, 1) == 0.0);
  CHECK(x.channel(2).isZero());

  Var y = seedInputs(tape, pt, kTX, DerivativeRequest{{"x"}, {}});
  CHECK(y.channel(1)(0, 0) == 0.0);
  CHECK(y.channel(1)(0, 1) == 1.0);

  Var z = seedInputs(tape, Matrix::Zero(5, 2), kTX, DerivativeRequest{{"t", "x"}, {}});
  CHECK(z.layout().firstOrder == 2);
  CHECK(z.channel(1).rows() == 5);
  CHECK(z.channel(2).cols() == 2);

  CHECK_THROWS_AS(seedInputs(tape, pt, kTX, DerivativeRequest{{"y"}, {}}), ConfigError);
  CHECK_THROWS_AS(seedInputs(tape, pt, kTX, DerivativeRequest{{"t"}, {"x"}}), ConfigError);
}

TEST_CASE("gradient of simple closed forms") {
  ParameterLayout layout;
  layout.add("theta", 2, 1);
  ParameterVector theta(layout);
  theta.values() << 1.0, 2.0;

  Tape tape(theta.size());
  Var p = tape.parameter(theta, "theta");
  Vector g = tape.gradient(sumSquares(p));
  CHECK(g[0] == doctest::Approx(2.0));
  CHECK(g[1] == doctest::Approx(4.0));

  Tape other(theta.size());
  other.parameter(theta, "theta");
  Var c = sumAll(other.constant(Matrix::Ones(3, 3)));
  CHECK(other.gradient(c).isZero());
}

TEST_CASE("gradient rejects non-scalar nodes") {
  Tape tape;
  Var m = tape.constant(Matrix::Ones(2, 2));
  CHECK_THROWS_AS(tape.gradient(m), ContractViolation);
}

TEST_CASE("tanh and affine propagation rules") {
  Tape tape;
  Var x = tape.dualConstant(ChannelLayout{1, {0}}, {Matrix::Zero(1, 1), Matrix::Ones(1, 1), Matrix::Zero(1, 1)});
  Var y = ad::tanh(x);
  CHECK(y.value()(0, 0) == 0.0);
  CHECK(y.channel(1)(0, 0) == doctest::Approx(1.0));
  CHECK(y.channel(2)(0, 0) == doctest::Approx(0.0));

  Matrix v(1, 1), d1(1, 1), d2(1, 1);
  v << 0.7;
  d1 << 3.0;
  d2 << -0.4;
  Var u = tape.dualConstant(ChannelLayout{1, {0}}, {v, d1, d2});
  Var a = addScalar(scale(u, 2.0), 1.0);
  CHECK(a.value()(0, 0) == doctest::Approx(2.4));
  CHECK(a.channel(1)(0, 0) == doctest::Approx(6.0));
  CHECK(a.channel(2)(0, 0) == doctest::Approx(-0.8));
}

TEST_CASE("random MLP loss gradient matches central differences") {
  std::mt19937_64 rng(7);
  // 2 -> 4 -> 1 tanh network: 8 + 4 + 4 + 1 = 17 weights, plus 3 extra in a scaling row = 20.
  ParameterLayout layout;
  layout.add("w0", 2, 4);
  layout.add("b0", 1, 4);
  layout.add("w1", 4, 1);
  layout.add("b1", 1, 1);
  layout.add("extra", 1, 3);
  ParameterVector theta = randomTheta(layout, rng);
  REQUIRE(layout.size() == 20);
  const Matrix coords = randomMatrix(8, 2, rng);
  const Matrix target = randomMatrix(8, 1, rng);

  auto lossOf = [&](Tape& tape, const ParameterVector& th) {
    Var x = tape.constant(coords);
    Var h = ad::tanh(linear(x, tape.parameter(th, "w0"), tape.parameter(th, "b0")));
    Var u = linear(h, tape.parameter(th, "w1"), tape.parameter(th, "b1"));
    Var e = tape.parameter(th, "extra");
    return sumSquares(u - tape.constant(target)) + sumSquares(ad::tanh(e));
  };
  Tape tape(theta.size());
  Vector g = tape.gradient(lossOf(tape, theta));
  Vector fd = centralDifference(
      [&](const Vector& v) {
        ParameterVector th(layout, v);
        Tape t(th.size());
        return lossOf(t, th).value()(0, 0);
      },
      theta.values(), 1e-4);
  CHECK(maxRelativeError(g, fd) < 1e-6);
}

TEST_CASE("every primitive: parameter gradients match central differences") {
  for (const auto& pc : primitiveCases()) {
    CAPTURE(pc.name);
    std::mt19937_64 rng(11);
    Pipeline pipe(pc.body, rng);
    ParameterVector theta = randomTheta(pipe.layout, rng);
    Tape tape(theta.size());
    Var loss = pipe.loss(tape, theta, &rng);
    Vector g = tape.gradient(loss);
    Vector fd = centralDifference(
        [&](const Vector& v) {
          ParameterVector th(pipe.layout, v);
          Tape t(th.size());
          return pipe.loss(t, th).value()(0, 0);
        },
        theta.values(), 1e-5);
    CHECK(maxRelativeError(g, fd) < 1e-5);
  }
}

TEST_CASE("every primitive: input derivative channels match finite differences") {
  for (const auto& pc : primitiveCases()) {
    CAPTURE(pc.name);
    std::mt19937_64 rng(13);
    Pipeline pipe(pc.body, rng);
    ParameterVector theta = randomTheta(pipe.layout, rng);
    Tape tape(theta.size());
    Var y = pipe.output(tape, theta, pipe.coords);
    for (int col = 0; col < 2; ++col) {
      CAPTURE(col);
      const double h = 1e-4;
      auto valueAt = [&](double shift) {
        Matrix c = pipe.coords;
        c.col(col).array() += shift;
        Tape t(theta.size());
        return Matrix(pipe.output(t, theta, c).value());
      };
      const Matrix p = valueAt(h), m = valueAt(-h), z = valueAt(0.0);
      const Matrix d1 = (p - m) / (2 * h);
      const Matrix d2 = (p - 2 * z + m) / (h * h);
      const Matrix& a1 = y.channel(1 + col);
      const Matrix& a2 = y.channel(3 + col);
      auto flat = [](const Matrix& mm) { return Eigen::Map<const Vector>(mm.data(), mm.size()).eval(); };
      CHECK(maxRelativeError(flat(a1), flat(d1)) < 1e-4);
      // The (f(x+h) - 2f(x) + f(x-h)) / h^2 stencil carries ~1e-8/h^2 round-off.
      CHECK(maxRelativeError(flat(a2), flat(d2), 1e-2) < 1e-3);
    }
  }
}

TEST_CASE("network u_xx matches the 5-point stencil") {
  std::mt19937_64 rng(17);
  ParameterLayout layout;
  layout.add("w0", 2, 16);
  layout.add("b0", 1, 16);
  layout.add("w1", 16, 16);
  layout.add("b1", 1, 16);
  layout.add("w2", 16, 1);
  layout.add("b2", 1, 1);
  ParameterVector theta = randomTheta(layout, rng);
  auto net = [&](Tape& tape, const Matrix& coords, const DerivativeRequest& req) {
    Var x = seedInputs(tape, coords, kTX, req);
    Var h = ad::tanh(linear(x, tape.parameter(theta, "w0"), tape.parameter(theta, "b0")));
    h = ad::tanh(linear(h, tape.parameter(theta, "w1"), tape.parameter(theta, "b1")));
    return linear(h, tape.parameter(theta, "w2"), tape.parameter(theta, "b2"));
  };
  Matrix pt(1, 2);
  pt << 0.3, 0.45;
  Tape tape(theta.size());
  Var u = net(tape, pt, DerivativeRequest{{"x"}, {"x"}});
  const double uxx = u.channel(2)(0, 0);
  const double fd = physolver::testing::secondDifference5(
      [&](double xv) {
        Matrix p = pt;
        p(0, 1) = xv;
        Tape t(theta.size());
        return net(t, p, DerivativeRequest{}).value()(0, 0);
      },
      pt(0, 1), 1e-3);
  CHECK(std::abs(uxx - fd) <= 1e-4 * std::abs(fd));
}

TEST_CASE("mixed check: parameter gradient of a loss containing u_t and u_xx") {
  std::mt19937_64 rng(19);
  ParameterLayout layout;
  layout.add("w0", 2, 8);
  layout.add("b0", 1, 8);
  layout.add("w1", 8, 8);
  layout.add("b1", 1, 8);
  layout.add("w2", 8, 1);
  layout.add("b2", 1, 1);
  ParameterVector theta = randomTheta(layout, rng);
  const Matrix coords = randomMatrix(10, 2, rng, 0.0, 1.0);
  auto lossOf = [&](Tape& tape, const ParameterVector& th) {
    Var x = seedInputs(tape, coords, kTX, DerivativeRequest{{"t", "x"}, {"x"}});
    Var h = ad::tanh(linear(x, tape.parameter(th, "w0"), tape.parameter(th, "b0")));
    h = ad::tanh(linear(h, tape.parameter(th, "w1"), tape.parameter(th, "b1")));
    Var u = linear(h, tape.parameter(th, "w2"), tape.parameter(th, "b2"));
    return sumSquares(channel(u, 1) - 0.7 * channel(u, 3)) + sumSquares(channel(u, 0));
  };
  Tape tape(theta.size());
  Vector g = tape.gradient(lossOf(tape, theta));
  Vector fd = centralDifference(
      [&](const Vector& v) {
        ParameterVector th(layout, v);
        Tape t(th.size());
        return lossOf(t, th).value()(0, 0);
      },
      theta.values(), 1e-5);
  CHECK(maxRelativeError(g, fd) < 1e-4);

  Tape again(theta.size());
  Vector g2 = again.gradient(lossOf(again, theta));
  CHECK((g2.array() == g.array()).all());
}

TEST_CASE("shape mismatches are contract violations") {
  Tape tape;
  Var a = tape.constant(Matrix::Ones(2, 3));
  Var b = tape.constant(Matrix::Ones(3, 2));
  CHECK_THROWS_AS(mul(a, b), ContractViolation);
  CHECK_THROWS_AS(linear(a, tape.constant(Matrix::Ones(2, 2)), Var()), ContractViolation);
  CHECK_THROWS_AS(blockSum(a, 4), ContractViolation);
}

TEST_CASE("sqrt at zero has a zero derivative instead of NaN") {
  Tape tape;
  Var x = tape.dualConstant(ChannelLayout{1, {0}}, {Matrix::Zero(1, 1), Matrix::Zero(1, 1), Matrix::Zero(1, 1)});
  Var y = ad::sqrt(x);
  CHECK(y.value()(0, 0) == 0.0);
  CHECK(std::isfinite(y.channel(1)(0, 0)));
  CHECK(std::isfinite(y.channel(2)(0, 0)));
}

TEST_CASE("parameter vector pack/unpack round trip") {
  std::mt19937_64 rng(3);
  ParameterLayout layout;
  layout.add("a", 3, 2);
  layout.add("b", 1, 4);
  ParameterVector theta(layout);
  const Matrix a = randomMatrix(3, 2, rng);
  const Matrix b = randomMatrix(1, 4, rng);
  theta.setTensor("a", a);
  theta.setTensor("b", b);
  CHECK(theta.tensor("a") == a);
  CHECK(theta.tensor("b") == b);
  CHECK(layout.slot("b").offset == 6);
  ParameterVector copy(layout, theta.values());
  CHECK(copy.tensor("a") == a);
  CHECK_THROWS_AS(theta.setTensor("a", b), ContractViolation);
}
