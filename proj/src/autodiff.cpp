#include "physolver/autodiff.hpp"

#include "physolver/errors.hpp"

#include <algorithm>
#include <cmath>
#include <utility>

namespace physolver::ad {

// ---------------------------------------------------------------------------
// ParameterLayout / ParameterVector

const TensorSlot& ParameterLayout::add(std::string name, Index rows, Index cols) {
  if (contains(name)) throw ContractViolation("duplicate parameter tensor '" + name + "'");
  if (rows <= 0 || cols <= 0) throw ContractViolation("parameter tensor '" + name + "' has empty shape");
  slots_.push_back(TensorSlot{std::move(name), size_, rows, cols});
  size_ += rows * cols;
  return slots_.back();
}

const TensorSlot& ParameterLayout::slot(std::string_view name) const {
  for (const auto& s : slots_)
    if (s.name == name) return s;
  throw ContractViolation("unknown parameter tensor '" + std::string(name) + "'");
}

bool ParameterLayout::contains(std::string_view name) const {
  return std::any_of(slots_.begin(), slots_.end(), [&](const TensorSlot& s) { return s.name == name; });
}

bool operator==(const ParameterLayout& a, const ParameterLayout& b) {
  if (a.size_ != b.size_ || a.slots_.size() != b.slots_.size()) return false;
  for (std::size_t i = 0; i < a.slots_.size(); ++i) {
    const auto& x = a.slots_[i];
    const auto& y = b.slots_[i];
    if (x.name != y.name || x.offset != y.offset || x.rows != y.rows || x.cols != y.cols) return false;
  }
  return true;
}

ParameterVector::ParameterVector(ParameterLayout layout)
    : layout_(std::move(layout)), values_(Vector::Zero(layout_.size())) {}

ParameterVector::ParameterVector(ParameterLayout layout, Vector values)
    : layout_(std::move(layout)), values_(std::move(values)) {
  if (values_.size() != layout_.size())
    throw ContractViolation("parameter vector length does not match its layout");
}

Matrix ParameterVector::tensor(std::string_view name) const {
  const auto& s = layout_.slot(name);
  return Eigen::Map<const Matrix>(values_.data() + s.offset, s.rows, s.cols);
}

void ParameterVector::setTensor(std::string_view name, const Matrix& m) {
  const auto& s = layout_.slot(name);
  if (m.rows() != s.rows || m.cols() != s.cols)
    throw ContractViolation("shape mismatch writing tensor '" + std::string(name) + "'");
  Eigen::Map<Matrix>(values_.data() + s.offset, s.rows, s.cols) = m;
}

// ---------------------------------------------------------------------------
// Var

const ChannelLayout& Var::layout() const { return tape_->node(id_).layout; }
const Matrix& Var::value() const { return tape_->node(id_).value[0]; }
const Matrix& Var::channel(int c) const { return tape_->node(id_).value[static_cast<std::size_t>(c)]; }
Index Var::rows() const { return value().rows(); }
Index Var::cols() const { return value().cols(); }

// ---------------------------------------------------------------------------
// Tape

Var Tape::push(ChannelLayout layout, std::vector<Matrix> value, Backward backward) {
  if (static_cast<int>(value.size()) != layout.channels())
    throw ContractViolation("channel count does not match layout");
  Node n;
  n.layout = std::move(layout);
  n.value = std::move(value);
  n.backward = std::move(backward);
  nodes_.push_back(std::move(n));
  return Var(this, static_cast<int>(nodes_.size()) - 1);
}

Var Tape::constant(Matrix value) {
  std::vector<Matrix> ch;
  ch.push_back(std::move(value));
  return push(ChannelLayout{}, std::move(ch), nullptr);
}

Var Tape::dualConstant(ChannelLayout layout, std::vector<Matrix> channels) {
  for (const auto& c : channels)
    if (c.rows() != channels[0].rows() || c.cols() != channels[0].cols())
      throw ContractViolation("dual channels must share the value shape");
  return push(std::move(layout), std::move(channels), nullptr);
}

Var Tape::parameter(const ParameterVector& theta, std::string_view name) {
  if (theta.size() != parameterCount_)
    throw ContractViolation("parameter vector length differs from the tape's parameter count");
  const auto& s = theta.layout().slot(name);
  Var v = constant(theta.tensor(name));
  nodes_.back().paramOffset = s.offset;
  return v;
}

Matrix& Tape::adjointChannel(int id, int c) {
  auto& n = nodes_[static_cast<std::size_t>(id)];
  if (n.adjoint.empty()) {
    n.adjoint.reserve(n.value.size());
    for (const auto& v : n.value) n.adjoint.push_back(Matrix::Zero(v.rows(), v.cols()));
  }
  return n.adjoint[static_cast<std::size_t>(c)];
}

void Tape::accumulate(int id, int c, const Matrix& delta) {
  if (!needsGradient(id)) return;
  adjointChannel(id, c) += delta;
}

const Matrix& Tape::adjoint(int id, int c) const {
  return nodes_[static_cast<std::size_t>(id)].adjoint[static_cast<std::size_t>(c)];
}

Vector Tape::gradient(Var loss) {
  if (loss.id() < 0 || &loss.tape() != this) throw ContractViolation("loss node belongs to another tape");
  const auto& ln = node(loss.id());
  if (!ln.layout.trivial() || ln.value[0].rows() != 1 || ln.value[0].cols() != 1)
    throw ContractViolation("gradient requires a scalar (1x1, value-only) node");

  for (auto& n : nodes_) n.adjoint.clear();
  adjointChannel(loss.id(), 0)(0, 0) = 1.0;
  for (int id = loss.id(); id >= 0; --id) {
    auto& n = nodes_[static_cast<std::size_t>(id)];
    if (n.adjoint.empty() || !n.backward) continue;
    n.backward(*this, id);
  }

  Vector grad = Vector::Zero(parameterCount_);
  for (const auto& n : nodes_) {
    if (n.paramOffset < 0 || n.adjoint.empty()) continue;
    const Matrix& a = n.adjoint[0];
    grad.segment(n.paramOffset, a.size()) += Eigen::Map<const Vector>(a.data(), a.size());
  }
  return grad;
}

// ---------------------------------------------------------------------------
// Elementwise functions

Matrix unaryDerivative(UnaryKind kind, const Matrix& x, int order) {
  auto a = x.array();
  auto guarded = [&](auto expr) -> Matrix { return (a == 0.0).select(0.0, expr).matrix(); };
  switch (kind) {
    case UnaryKind::Identity:
      if (order == 0) return x;
      if (order == 1) return Matrix::Ones(x.rows(), x.cols());
      return Matrix::Zero(x.rows(), x.cols());
    case UnaryKind::Tanh: {
      Eigen::ArrayXXd t = a.tanh();
      Eigen::ArrayXXd s = 1.0 - t.square();
      if (order == 0) return t.matrix();
      if (order == 1) return s.matrix();
      if (order == 2) return (-2.0 * t * s).matrix();
      return (s * (6.0 * t.square() - 2.0)).matrix();
    }
    case UnaryKind::Exp:
      return a.exp().matrix();
    case UnaryKind::Sqrt: {
      Eigen::ArrayXXd s = a.sqrt();
      if (order == 0) return s.matrix();
      if (order == 1) return guarded(0.5 / s);
      if (order == 2) return guarded(-0.25 / (a * s));
      return guarded(0.375 / (a.square() * s));
    }
    case UnaryKind::Reciprocal: {
      if (order == 0) return a.inverse().matrix();
      if (order == 1) return guarded(-1.0 / a.square());
      if (order == 2) return guarded(2.0 / a.cube());
      return guarded(-6.0 / a.square().square());
    }
    case UnaryKind::Rsqrt: {
      Eigen::ArrayXXd r = a.rsqrt();
      if (order == 0) return r.matrix();
      if (order == 1) return guarded(-0.5 * r / a);
      if (order == 2) return guarded(0.75 * r / a.square());
      return guarded(-1.875 * r / a.cube());
    }
    case UnaryKind::Sin:
      switch (order % 4) {
        case 0: return a.sin().matrix();
        case 1: return a.cos().matrix();
        case 2: return (-a.sin()).matrix();
        default: return (-a.cos()).matrix();
      }
    case UnaryKind::Cos:
      switch (order % 4) {
        case 0: return a.cos().matrix();
        case 1: return (-a.sin()).matrix();
        case 2: return (-a.cos()).matrix();
        default: return a.sin().matrix();
      }
  }
  throw ContractViolation("unknown unary kind");
}

// ---------------------------------------------------------------------------
// Helpers

namespace {

using MatFn = std::function<Matrix(const Matrix&)>;
using BinFn = std::function<Matrix(const Matrix&, const Matrix&)>;

void requireSameTape(Var a, Var b) {
  if (!a.valid() || !b.valid() || &a.tape() != &b.tape()) throw ContractViolation("operands live on different tapes");
}

const ChannelLayout& combinedLayout(Var a, Var b) {
  const auto& la = a.layout();
  const auto& lb = b.layout();
  if (la.trivial()) return lb;
  if (lb.trivial()) return la;
  if (!(la == lb)) throw ContractViolation("operands carry different derivative layouts");
  return la;
}

void requireShape(const Matrix& a, Index rows, Index cols, const char* what) {
  if (a.rows() != rows || a.cols() != cols)
    throw ContractViolation(std::string("shape mismatch in ") + what + ": got " + std::to_string(a.rows()) + "x" +
                            std::to_string(a.cols()) + ", expected " + std::to_string(rows) + "x" +
                            std::to_string(cols));
}

// Operation whose every channel is mapped by the same linear map.
Var linearMap(Var x, const MatFn& fwd, MatFn adj) {
  const auto& layout = x.layout();
  std::vector<Matrix> out;
  out.reserve(static_cast<std::size_t>(layout.channels()));
  for (int c = 0; c < layout.channels(); ++c) out.push_back(fwd(x.channel(c)));
  const int xi = x.id();
  return x.tape().push(layout, std::move(out), [xi, adj = std::move(adj)](Tape& tape, int self) {
    const auto& n = tape.node(self);
    for (int c = 0; c < n.layout.channels(); ++c) tape.accumulate(xi, c, adj(tape.adjoint(self, c)));
  });
}

// Product-rule propagation for any map M(a, b) that is linear in each argument.
// adjA(ybar, b) and adjB(ybar, a) return the transposed partial maps.
Var bilinear(Var a, Var b, const BinFn& fwd, BinFn adjA, BinFn adjB) {
  requireSameTape(a, b);
  const ChannelLayout layout = combinedLayout(a, b);
  const bool ha = !a.layout().trivial();
  const bool hb = !b.layout().trivial();
  const int nf = layout.firstOrder;
  const int ns = static_cast<int>(layout.secondOrder.size());

  std::vector<Matrix> out;
  out.reserve(static_cast<std::size_t>(layout.channels()));
  const Matrix& a0 = a.value();
  const Matrix& b0 = b.value();
  out.push_back(fwd(a0, b0));
  for (int i = 0; i < nf; ++i) {
    const int c = layout.firstChannel(i);
    Matrix y;
    if (ha) y = fwd(a.channel(c), b0);
    if (hb) {
      if (ha) y += fwd(a0, b.channel(c));
      else y = fwd(a0, b.channel(c));
    }
    out.push_back(std::move(y));
  }
  for (int j = 0; j < ns; ++j) {
    const int c = layout.secondChannel(j);
    const int fc = layout.firstChannel(layout.secondOrder[static_cast<std::size_t>(j)]);
    Matrix y = Matrix::Zero(out[0].rows(), out[0].cols());
    if (ha) y += fwd(a.channel(c), b0);
    if (ha && hb) y += 2.0 * fwd(a.channel(fc), b.channel(fc));
    if (hb) y += fwd(a0, b.channel(c));
    out.push_back(std::move(y));
  }

  const int ai = a.id();
  const int bi = b.id();
  return a.tape().push(layout, std::move(out),
                       [ai, bi, ha, hb, adjA = std::move(adjA), adjB = std::move(adjB)](Tape& tape, int self) {
                         const auto& L = tape.node(self).layout;
                         const auto& av = tape.node(ai).value;
                         const auto& bv = tape.node(bi).value;
                         const int nf = L.firstOrder;
                         const int ns = static_cast<int>(L.secondOrder.size());
                         auto ybar = [&](int c) -> const Matrix& { return tape.adjoint(self, c); };

                         // adjoint of a
                         tape.accumulate(ai, 0, adjA(ybar(0), bv[0]));
                         if (hb) {
                           for (int c = 1; c < L.channels(); ++c) tape.accumulate(ai, 0, adjA(ybar(c), bv[static_cast<std::size_t>(c)]));
                         }
                         if (ha) {
                           for (int c = 1; c < L.channels(); ++c) tape.accumulate(ai, c, adjA(ybar(c), bv[0]));
                           if (hb) {
                             for (int j = 0; j < ns; ++j) {
                               const int fc = L.firstChannel(L.secondOrder[static_cast<std::size_t>(j)]);
                               tape.accumulate(ai, fc, 2.0 * adjA(ybar(L.secondChannel(j)), bv[static_cast<std::size_t>(fc)]));
                             }
                           }
                         }
                         // adjoint of b
                         tape.accumulate(bi, 0, adjB(ybar(0), av[0]));
                         if (ha) {
                           for (int c = 1; c < L.channels(); ++c) tape.accumulate(bi, 0, adjB(ybar(c), av[static_cast<std::size_t>(c)]));
                         }
                         if (hb) {
                           for (int c = 1; c < L.channels(); ++c) tape.accumulate(bi, c, adjB(ybar(c), av[0]));
                           if (ha) {
                             for (int j = 0; j < ns; ++j) {
                               const int fc = L.firstChannel(L.secondOrder[static_cast<std::size_t>(j)]);
                               tape.accumulate(bi, fc, 2.0 * adjB(ybar(L.secondChannel(j)), av[static_cast<std::size_t>(fc)]));
                             }
                           }
                         }
                         (void)nf;
                       });
}

void requireBlocks(Index rows, Index seqLen) {
  if (seqLen <= 0 || rows % seqLen != 0)
    throw ContractViolation("row count " + std::to_string(rows) + " is not a multiple of sequence length " +
                            std::to_string(seqLen));
}

}  // namespace

// ---------------------------------------------------------------------------
// Elementwise

Var unary(Var x, UnaryKind kind) {
  const auto& layout = x.layout();
  const int nf = layout.firstOrder;
  const int ns = static_cast<int>(layout.secondOrder.size());
  const Matrix& x0 = x.value();

  std::vector<Matrix> out;
  out.reserve(static_cast<std::size_t>(layout.channels()));
  out.push_back(unaryDerivative(kind, x0, 0));
  if (nf > 0) {
    const Matrix f1 = unaryDerivative(kind, x0, 1);
    for (int i = 0; i < nf; ++i) out.push_back(f1.cwiseProduct(x.channel(layout.firstChannel(i))));
    if (ns > 0) {
      const Matrix f2 = unaryDerivative(kind, x0, 2);
      for (int j = 0; j < ns; ++j) {
        const Matrix& xc = x.channel(layout.firstChannel(layout.secondOrder[static_cast<std::size_t>(j)]));
        out.push_back((f2.array() * xc.array().square() + f1.array() * x.channel(layout.secondChannel(j)).array()).matrix());
      }
    }
  }

  const int xi = x.id();
  return x.tape().push(layout, std::move(out), [xi, kind](Tape& tape, int self) {
    const auto& L = tape.node(self).layout;
    const auto& xv = tape.node(xi).value;
    const Matrix& x0 = xv[0];
    const int nf = L.firstOrder;
    const int ns = static_cast<int>(L.secondOrder.size());
    const Matrix f1 = unaryDerivative(kind, x0, 1);

    Eigen::ArrayXXd g0 = f1.array() * tape.adjoint(self, 0).array();
    if (nf > 0) {
      const Matrix f2 = unaryDerivative(kind, x0, 2);
      for (int i = 0; i < nf; ++i) {
        const int c = L.firstChannel(i);
        const auto& yb = tape.adjoint(self, c);
        g0 += f2.array() * xv[static_cast<std::size_t>(c)].array() * yb.array();
        tape.accumulateExpr(xi, c, (f1.array() * yb.array()).matrix());
      }
      if (ns > 0) {
        const Matrix f3 = unaryDerivative(kind, x0, 3);
        for (int j = 0; j < ns; ++j) {
          const int c = L.secondChannel(j);
          const int fc = L.firstChannel(L.secondOrder[static_cast<std::size_t>(j)]);
          const auto& yb = tape.adjoint(self, c);
          const auto& xc = xv[static_cast<std::size_t>(fc)].array();
          g0 += (f3.array() * xc.square() + f2.array() * xv[static_cast<std::size_t>(c)].array()) * yb.array();
          tape.accumulateExpr(xi, fc, (2.0 * f2.array() * xc * yb.array()).matrix());
          tape.accumulateExpr(xi, c, (f1.array() * yb.array()).matrix());
        }
      }
    }
    tape.accumulateExpr(xi, 0, g0.matrix());
  });
}

Var tanh(Var x) { return unary(x, UnaryKind::Tanh); }
Var exp(Var x) { return unary(x, UnaryKind::Exp); }
Var sqrt(Var x) { return unary(x, UnaryKind::Sqrt); }
Var reciprocal(Var x) { return unary(x, UnaryKind::Reciprocal); }
Var rsqrt(Var x) { return unary(x, UnaryKind::Rsqrt); }

Var add(Var a, Var b) {
  requireSameTape(a, b);
  const ChannelLayout layout = combinedLayout(a, b);
  requireShape(b.value(), a.rows(), a.cols(), "add");
  std::vector<Matrix> out;
  for (int c = 0; c < layout.channels(); ++c) {
    const bool hasA = c < a.layout().channels();
    const bool hasB = c < b.layout().channels();
    if (hasA && hasB) out.push_back(a.channel(c) + b.channel(c));
    else out.push_back(hasA ? a.channel(c) : b.channel(c));
  }
  const int ai = a.id();
  const int bi = b.id();
  const int na = a.layout().channels();
  const int nb = b.layout().channels();
  return a.tape().push(layout, std::move(out), [ai, bi, na, nb](Tape& tape, int self) {
    for (int c = 0; c < na; ++c) tape.accumulate(ai, c, tape.adjoint(self, c));
    for (int c = 0; c < nb; ++c) tape.accumulate(bi, c, tape.adjoint(self, c));
  });
}

Var scale(Var x, double s) {
  return linearMap(x, [s](const Matrix& m) -> Matrix { return s * m; }, [s](const Matrix& m) -> Matrix { return s * m; });
}

Var sub(Var a, Var b) { return add(a, scale(b, -1.0)); }

Var addConstant(Var x, const Matrix& c) {
  const bool broadcast = c.rows() == 1 && c.cols() == 1;
  if (!broadcast) requireShape(c, x.rows(), x.cols(), "addConstant");
  std::vector<Matrix> out(x.tape().node(x.id()).value);
  if (broadcast) out[0].array() += c(0, 0);
  else out[0] += c;
  const int xi = x.id();
  return x.tape().push(x.layout(), std::move(out), [xi](Tape& tape, int self) {
    for (int ch = 0; ch < tape.node(self).layout.channels(); ++ch) tape.accumulate(xi, ch, tape.adjoint(self, ch));
  });
}

Var addScalar(Var x, double c) { return addConstant(x, Matrix::Constant(1, 1, c)); }

Var mul(Var a, Var b) {
  requireShape(b.value(), a.rows(), a.cols(), "mul");
  return bilinear(
      a, b, [](const Matrix& x, const Matrix& y) -> Matrix { return x.cwiseProduct(y); },
      [](const Matrix& yb, const Matrix& y) -> Matrix { return yb.cwiseProduct(y); },
      [](const Matrix& yb, const Matrix& x) -> Matrix { return yb.cwiseProduct(x); });
}

Var mulRowScalar(Var a, Var s) {
  requireShape(s.value(), a.rows(), 1, "mulRowScalar");
  return bilinear(
      a, s, [](const Matrix& x, const Matrix& r) -> Matrix { return (x.array().colwise() * r.col(0).array()).matrix(); },
      [](const Matrix& yb, const Matrix& r) -> Matrix { return (yb.array().colwise() * r.col(0).array()).matrix(); },
      [](const Matrix& yb, const Matrix& x) -> Matrix { return yb.cwiseProduct(x).rowwise().sum(); });
}

// ---------------------------------------------------------------------------
// Affine layers

Var linear(Var x, Var weight, Var bias) {
  requireSameTape(x, weight);
  if (!weight.layout().trivial()) throw ContractViolation("linear: weight must not carry input derivatives");
  if (weight.rows() != x.cols())
    throw ContractViolation("linear: input width " + std::to_string(x.cols()) + " does not match weight rows " +
                            std::to_string(weight.rows()));
  const bool hasBias = bias.valid();
  if (hasBias) requireShape(bias.value(), 1, weight.cols(), "linear bias");

  const auto& layout = x.layout();
  const Matrix& W = weight.value();
  std::vector<Matrix> out;
  out.reserve(static_cast<std::size_t>(layout.channels()));
  for (int c = 0; c < layout.channels(); ++c) out.push_back(x.channel(c) * W);
  if (hasBias) out[0].rowwise() += bias.value().row(0);

  const int xi = x.id();
  const int wi = weight.id();
  const int bi = hasBias ? bias.id() : -1;
  return x.tape().push(layout, std::move(out), [xi, wi, bi](Tape& tape, int self) {
    const auto& L = tape.node(self).layout;
    const auto& xv = tape.node(xi).value;
    const Matrix& W = tape.node(wi).value[0];
    const bool xNeedsGrad = tape.needsGradient(xi);
    Matrix gw = Matrix::Zero(W.rows(), W.cols());
    for (int c = 0; c < L.channels(); ++c) {
      const auto& yb = tape.adjoint(self, c);
      gw.noalias() += xv[static_cast<std::size_t>(c)].transpose() * yb;
      if (xNeedsGrad) tape.accumulate(xi, c, yb * W.transpose());
    }
    tape.accumulate(wi, 0, gw);
    if (bi >= 0) tape.accumulate(bi, 0, tape.adjoint(self, 0).colwise().sum());
  });
}

Var affineColumns(Var x, Var gamma, Var beta) {
  requireShape(gamma.value(), 1, x.cols(), "affineColumns gamma");
  requireShape(beta.value(), 1, x.cols(), "affineColumns beta");
  const auto& layout = x.layout();
  const auto g = gamma.value().row(0).array();
  std::vector<Matrix> out;
  for (int c = 0; c < layout.channels(); ++c) out.push_back((x.channel(c).array().rowwise() * g).matrix());
  out[0].rowwise() += beta.value().row(0);

  const int xi = x.id();
  const int gi = gamma.id();
  const int bi = beta.id();
  return x.tape().push(layout, std::move(out), [xi, gi, bi](Tape& tape, int self) {
    const auto& L = tape.node(self).layout;
    const auto& xv = tape.node(xi).value;
    const auto g = tape.node(gi).value[0].row(0).array();
    Matrix gg = Matrix::Zero(1, g.size());
    for (int c = 0; c < L.channels(); ++c) {
      const auto& yb = tape.adjoint(self, c);
      gg += yb.cwiseProduct(xv[static_cast<std::size_t>(c)]).colwise().sum();
      tape.accumulate(xi, c, (yb.array().rowwise() * g).matrix());
    }
    tape.accumulate(gi, 0, gg);
    tape.accumulate(bi, 0, tape.adjoint(self, 0).colwise().sum());
  });
}

// ---------------------------------------------------------------------------
// Shape / reduction maps

Var rowSum(Var x) {
  const Index cols = x.cols();
  return linearMap(
      x, [](const Matrix& m) -> Matrix { return m.rowwise().sum(); },
      [cols](const Matrix& yb) -> Matrix { return yb.col(0).replicate(1, cols); });
}

Var rowMean(Var x) { return scale(rowSum(x), 1.0 / static_cast<double>(x.cols())); }

Var centerRows(Var x) {
  auto center = [](const Matrix& m) -> Matrix {
    Eigen::VectorXd mean = m.rowwise().mean();
    return m.colwise() - mean;
  };
  return linearMap(x, center, center);
}

Var sliceCols(Var x, Index start, Index count) {
  if (start < 0 || count <= 0 || start + count > x.cols()) throw ContractViolation("sliceCols: range out of bounds");
  const Index rows = x.rows();
  const Index cols = x.cols();
  return linearMap(
      x, [start, count](const Matrix& m) -> Matrix { return m.middleCols(start, count); },
      [rows, cols, start, count](const Matrix& yb) -> Matrix {
        Matrix g = Matrix::Zero(rows, cols);
        g.middleCols(start, count) = yb;
        return g;
      });
}

Var sliceRows(Var x, Index start, Index count) {
  if (start < 0 || count <= 0 || start + count > x.rows()) throw ContractViolation("sliceRows: range out of bounds");
  const Index rows = x.rows();
  const Index cols = x.cols();
  return linearMap(
      x, [start, count](const Matrix& m) -> Matrix { return m.middleRows(start, count); },
      [rows, cols, start, count](const Matrix& yb) -> Matrix {
        Matrix g = Matrix::Zero(rows, cols);
        g.middleRows(start, count) = yb;
        return g;
      });
}

Var selectPosition(Var x, Index seqLen, Index position) {
  requireBlocks(x.rows(), seqLen);
  if (position < 0 || position >= seqLen) throw ContractViolation("selectPosition: position out of range");
  const Index rows = x.rows();
  const Index cols = x.cols();
  const Index n = rows / seqLen;
  return linearMap(
      x,
      [n, seqLen, position](const Matrix& m) -> Matrix {
        Matrix y(n, m.cols());
        for (Index s = 0; s < n; ++s) y.row(s) = m.row(s * seqLen + position);
        return y;
      },
      [n, rows, cols, seqLen, position](const Matrix& yb) -> Matrix {
        Matrix g = Matrix::Zero(rows, cols);
        for (Index s = 0; s < n; ++s) g.row(s * seqLen + position) = yb.row(s);
        return g;
      });
}

Var blockSum(Var x, Index seqLen) {
  requireBlocks(x.rows(), seqLen);
  const Index cols = x.cols();
  return linearMap(
      x,
      [seqLen](const Matrix& m) -> Matrix {
        Matrix y(m.rows(), 1);
        for (Index r = 0; r < m.rows(); r += seqLen) y.middleRows(r, seqLen).setConstant(m.middleRows(r, seqLen).sum());
        return y;
      },
      [seqLen, cols](const Matrix& yb) -> Matrix {
        Matrix g(yb.rows(), cols);
        for (Index r = 0; r < yb.rows(); r += seqLen) g.middleRows(r, seqLen).setConstant(yb.middleRows(r, seqLen).sum());
        return g;
      });
}

Var concatCols(const std::vector<Var>& parts) {
  if (parts.empty()) throw ContractViolation("concatCols: no operands");
  const auto& layout = parts[0].layout();
  Index cols = 0;
  for (const auto& p : parts) {
    if (&p.tape() != &parts[0].tape() || !(p.layout() == layout) || p.rows() != parts[0].rows())
      throw ContractViolation("concatCols: operands disagree in tape, layout or row count");
    cols += p.cols();
  }
  std::vector<Matrix> out;
  for (int c = 0; c < layout.channels(); ++c) {
    Matrix m(parts[0].rows(), cols);
    Index off = 0;
    for (const auto& p : parts) {
      m.middleCols(off, p.cols()) = p.channel(c);
      off += p.cols();
    }
    out.push_back(std::move(m));
  }
  std::vector<std::pair<int, Index>> spans;
  for (const auto& p : parts) spans.emplace_back(p.id(), p.cols());
  return parts[0].tape().push(layout, std::move(out), [spans](Tape& tape, int self) {
    for (int c = 0; c < tape.node(self).layout.channels(); ++c) {
      Index off = 0;
      for (const auto& [id, width] : spans) {
        tape.accumulateExpr(id, c, tape.adjoint(self, c).middleCols(off, width));
        off += width;
      }
    }
  });
}

Var concatRows(const std::vector<Var>& parts) {
  if (parts.empty()) throw ContractViolation("concatRows: no operands");
  const auto& layout = parts[0].layout();
  Index rows = 0;
  for (const auto& p : parts) {
    if (&p.tape() != &parts[0].tape() || !(p.layout() == layout) || p.cols() != parts[0].cols())
      throw ContractViolation("concatRows: operands disagree in tape, layout or column count");
    rows += p.rows();
  }
  std::vector<Matrix> out;
  for (int c = 0; c < layout.channels(); ++c) {
    Matrix m(rows, parts[0].cols());
    Index off = 0;
    for (const auto& p : parts) {
      m.middleRows(off, p.rows()) = p.channel(c);
      off += p.rows();
    }
    out.push_back(std::move(m));
  }
  std::vector<std::pair<int, Index>> spans;
  for (const auto& p : parts) spans.emplace_back(p.id(), p.rows());
  return parts[0].tape().push(layout, std::move(out), [spans](Tape& tape, int self) {
    for (int c = 0; c < tape.node(self).layout.channels(); ++c) {
      Index off = 0;
      for (const auto& [id, height] : spans) {
        tape.accumulateExpr(id, c, tape.adjoint(self, c).middleRows(off, height));
        off += height;
      }
    }
  });
}

Var blockMatmulABt(Var a, Var b, Index seqLen) {
  requireBlocks(a.rows(), seqLen);
  requireShape(b.value(), a.rows(), a.cols(), "blockMatmulABt");
  auto fwd = [seqLen](const Matrix& x, const Matrix& y) -> Matrix {
    Matrix out(x.rows(), seqLen);
    for (Index r = 0; r < x.rows(); r += seqLen)
      out.middleRows(r, seqLen).noalias() = x.middleRows(r, seqLen) * y.middleRows(r, seqLen).transpose();
    return out;
  };
  auto adjA = [seqLen](const Matrix& yb, const Matrix& y) -> Matrix {
    Matrix g(yb.rows(), y.cols());
    for (Index r = 0; r < yb.rows(); r += seqLen)
      g.middleRows(r, seqLen).noalias() = yb.middleRows(r, seqLen) * y.middleRows(r, seqLen);
    return g;
  };
  auto adjB = [seqLen](const Matrix& yb, const Matrix& x) -> Matrix {
    Matrix g(yb.rows(), x.cols());
    for (Index r = 0; r < yb.rows(); r += seqLen)
      g.middleRows(r, seqLen).noalias() = yb.middleRows(r, seqLen).transpose() * x.middleRows(r, seqLen);
    return g;
  };
  return bilinear(a, b, fwd, adjA, adjB);
}

Var blockMatmulAB(Var p, Var v, Index seqLen) {
  requireBlocks(p.rows(), seqLen);
  requireShape(p.value(), v.rows(), seqLen, "blockMatmulAB");
  auto fwd = [seqLen](const Matrix& x, const Matrix& y) -> Matrix {
    Matrix out(x.rows(), y.cols());
    for (Index r = 0; r < x.rows(); r += seqLen)
      out.middleRows(r, seqLen).noalias() = x.middleRows(r, seqLen) * y.middleRows(r, seqLen);
    return out;
  };
  auto adjA = [seqLen](const Matrix& yb, const Matrix& y) -> Matrix {
    Matrix g(yb.rows(), seqLen);
    for (Index r = 0; r < yb.rows(); r += seqLen)
      g.middleRows(r, seqLen).noalias() = yb.middleRows(r, seqLen) * y.middleRows(r, seqLen).transpose();
    return g;
  };
  auto adjB = [seqLen](const Matrix& yb, const Matrix& x) -> Matrix {
    Matrix g(yb.rows(), yb.cols());
    for (Index r = 0; r < yb.rows(); r += seqLen)
      g.middleRows(r, seqLen).noalias() = x.middleRows(r, seqLen).transpose() * yb.middleRows(r, seqLen);
    return g;
  };
  return bilinear(p, v, fwd, adjA, adjB);
}

Var softmaxRows(Var x) {
  // The shift cancels in the normalised result, so it is treated as a constant.
  const Matrix& v = x.value();
  Matrix shift = (-v.rowwise().maxCoeff()).replicate(1, v.cols());
  Var e = exp(addConstant(x, shift));
  return mulRowScalar(e, reciprocal(rowSum(e)));
}

// ---------------------------------------------------------------------------
// Scalars

Var channel(Var x, int c) {
  if (c < 0 || c >= x.layout().channels()) throw ContractViolation("channel index out of range");
  std::vector<Matrix> out{x.channel(c)};
  const int xi = x.id();
  return x.tape().push(ChannelLayout{}, std::move(out),
                       [xi, c](Tape& tape, int self) { tape.accumulate(xi, c, tape.adjoint(self, 0)); });
}

Var sumAll(Var x) {
  std::vector<Matrix> out{Matrix::Constant(1, 1, x.value().sum())};
  const int xi = x.id();
  const Index rows = x.rows();
  const Index cols = x.cols();
  return x.tape().push(ChannelLayout{}, std::move(out), [xi, rows, cols](Tape& tape, int self) {
    tape.accumulate(xi, 0, Matrix::Constant(rows, cols, tape.adjoint(self, 0)(0, 0)));
  });
}

Var sumSquares(Var x) {
  std::vector<Matrix> out{Matrix::Constant(1, 1, x.value().squaredNorm())};
  const int xi = x.id();
  return x.tape().push(ChannelLayout{}, std::move(out), [xi](Tape& tape, int self) {
    const double g = tape.adjoint(self, 0)(0, 0);
    tape.accumulate(xi, 0, 2.0 * g * tape.node(xi).value[0]);
  });
}

Var operator+(Var a, Var b) { return add(a, b); }
Var operator-(Var a, Var b) { return sub(a, b); }
Var operator*(Var a, Var b) { return mul(a, b); }
Var operator*(double s, Var x) { return scale(x, s); }
Var operator*(Var x, double s) { return scale(x, s); }
Var operator-(Var x) { return scale(x, -1.0); }

// ---------------------------------------------------------------------------
// Inputs

ChannelLayout layoutFor(const std::vector<std::string>& columnNames, const DerivativeRequest& request) {
  auto columnOf = [&](const std::string& name) {
    auto it = std::find(columnNames.begin(), columnNames.end(), name);
    if (it == columnNames.end()) throw ConfigError("unknown coordinate '" + name + "'");
    return static_cast<int>(it - columnNames.begin());
  };
  ChannelLayout layout;
  layout.firstOrder = static_cast<int>(request.first.size());
  for (const auto& n : request.first) columnOf(n);
  for (const auto& n : request.second) {
    columnOf(n);
    auto it = std::find(request.first.begin(), request.first.end(), n);
    if (it == request.first.end())
      throw ConfigError("second derivative in '" + n + "' requested without its first derivative");
    layout.secondOrder.push_back(static_cast<int>(it - request.first.begin()));
  }
  return layout;
}

Var seedInputs(Tape& tape, const Matrix& coords, const std::vector<std::string>& columnNames,
               const DerivativeRequest& request) {
  if (static_cast<Index>(columnNames.size()) != coords.cols())
    throw ContractViolation("seedInputs: column names do not match coordinate columns");
  ChannelLayout layout = layoutFor(columnNames, request);
  std::vector<Matrix> ch;
  ch.push_back(coords);
  for (const auto& name : request.first) {
    const auto col = std::find(columnNames.begin(), columnNames.end(), name) - columnNames.begin();
    Matrix d = Matrix::Zero(coords.rows(), coords.cols());
    d.col(col).setOnes();
    ch.push_back(std::move(d));
  }
  for (std::size_t j = 0; j < request.second.size(); ++j) ch.push_back(Matrix::Zero(coords.rows(), coords.cols()));
  return tape.dualConstant(std::move(layout), std::move(ch));
}

}  // namespace physolver::ad
