#pragma once

// Reverse-mode differentiation over matrix-valued nodes that also carry exact
// forward-mode input derivatives.
//
// Every node holds a list of channels: channel 0 is the value, the next
// `firstOrder` channels are directional first derivatives d/dc with respect to
// tracked input coordinates, and the remaining channels are diagonal second
// derivatives d^2/dc^2. The propagation rules for the derivative channels are
// themselves recorded on the tape, so a loss built from u_t or u_xx can be
// differentiated with respect to the network parameters.

#include <Eigen/Dense>

#include <functional>
#include <string>
#include <string_view>
#include <vector>

namespace physolver::ad {

using Matrix = Eigen::MatrixXd;
using Vector = Eigen::VectorXd;
using Index = Eigen::Index;

/// Channel structure shared by all dual nodes of one forward pass.
struct ChannelLayout {
  int firstOrder = 0;
  /// For every second-order channel, the first-order channel it differentiates twice.
  std::vector<int> secondOrder;

  int channels() const { return 1 + firstOrder + static_cast<int>(secondOrder.size()); }
  bool trivial() const { return channels() == 1; }
  int firstChannel(int i) const { return 1 + i; }
  int secondChannel(int j) const { return 1 + firstOrder + j; }

  friend bool operator==(const ChannelLayout&, const ChannelLayout&) = default;
};

// ---------------------------------------------------------------------------
// Parameters

struct TensorSlot {
  std::string name;
  Index offset = 0;
  Index rows = 0;
  Index cols = 0;
  Index size() const { return rows * cols; }
};

/// Maps named tensors onto contiguous slices of a flat vector. Tensors are
/// stored column-major.
class ParameterLayout {
 public:
  const TensorSlot& add(std::string name, Index rows, Index cols);
  const TensorSlot& slot(std::string_view name) const;
  bool contains(std::string_view name) const;
  const std::vector<TensorSlot>& slots() const { return slots_; }
  Index size() const { return size_; }

  friend bool operator==(const ParameterLayout& a, const ParameterLayout& b);

 private:
  std::vector<TensorSlot> slots_;
  Index size_ = 0;
};

class ParameterVector {
 public:
  ParameterVector() = default;
  explicit ParameterVector(ParameterLayout layout);
  ParameterVector(ParameterLayout layout, Vector values);

  const ParameterLayout& layout() const { return layout_; }
  const Vector& values() const { return values_; }
  Vector& values() { return values_; }
  Index size() const { return values_.size(); }

  Matrix tensor(std::string_view name) const;
  void setTensor(std::string_view name, const Matrix& m);

 private:
  ParameterLayout layout_;
  Vector values_;
};

// ---------------------------------------------------------------------------
// Tape

class Tape;

/// Handle to a tape node.
class Var {
 public:
  Var() = default;
  Var(Tape* tape, int id) : tape_(tape), id_(id) {}

  Tape& tape() const { return *tape_; }
  int id() const { return id_; }
  bool valid() const { return tape_ != nullptr; }

  const ChannelLayout& layout() const;
  const Matrix& value() const;
  const Matrix& channel(int c) const;
  Index rows() const;
  Index cols() const;

 private:
  Tape* tape_ = nullptr;
  int id_ = -1;
};

class Tape {
 public:
  using Backward = std::function<void(Tape&, int self)>;

  struct Node {
    ChannelLayout layout;
    std::vector<Matrix> value;
    std::vector<Matrix> adjoint;  // empty until reached by the reverse sweep
    Backward backward;
    Index paramOffset = -1;
  };

  explicit Tape(Index parameterCount = 0) : parameterCount_(parameterCount) {}
  Tape(const Tape&) = delete;
  Tape& operator=(const Tape&) = delete;

  Var constant(Matrix value);
  Var dualConstant(ChannelLayout layout, std::vector<Matrix> channels);
  /// Leaf bound to the named tensor of `theta`; its adjoint lands in the
  /// matching slice of gradient().
  Var parameter(const ParameterVector& theta, std::string_view name);

  /// Reverse sweep from a 1x1 trivial-layout node. Returns a vector of length
  /// parameterCount().
  Vector gradient(Var loss);

  Index parameterCount() const { return parameterCount_; }
  std::size_t size() const { return nodes_.size(); }

  // Low-level interface used by the primitive operations.
  Var push(ChannelLayout layout, std::vector<Matrix> value, Backward backward);
  const Node& node(int id) const { return nodes_[static_cast<std::size_t>(id)]; }
  /// Adds `delta` into channel `c` of the adjoint of node `id`.
  void accumulate(int id, int c, const Matrix& delta);
  template <class Expr>
  void accumulateExpr(int id, int c, const Expr& delta) {
    if (!needsGradient(id)) return;
    adjointChannel(id, c) += delta;
  }
  /// Operation nodes and parameter leaves; constant leaves never receive adjoints.
  bool needsGradient(int id) const {
    const auto& n = node(id);
    return n.backward != nullptr || n.paramOffset >= 0;
  }
  const Matrix& adjoint(int id, int c) const;
  bool hasAdjoint(int id) const { return !node(id).adjoint.empty(); }

 private:
  Matrix& adjointChannel(int id, int c);

  std::vector<Node> nodes_;
  Index parameterCount_ = 0;
};

// ---------------------------------------------------------------------------
// Elementwise functions with derivatives up to third order.

enum class UnaryKind { Identity, Tanh, Exp, Sqrt, Reciprocal, Rsqrt, Sin, Cos };

/// Elementwise f^(order)(x) for order 0..3. Sqrt/Rsqrt/Reciprocal derivatives
/// are taken as zero where x == 0.
Matrix unaryDerivative(UnaryKind kind, const Matrix& x, int order);

// ---------------------------------------------------------------------------
// Primitive operations. Operands with a trivial layout are treated as
// constants with respect to the tracked input coordinates.

Var unary(Var x, UnaryKind kind);
Var tanh(Var x);
Var exp(Var x);
Var sqrt(Var x);
Var reciprocal(Var x);
Var rsqrt(Var x);

Var add(Var a, Var b);
Var sub(Var a, Var b);
Var scale(Var x, double s);
/// Adds a constant to the value channel; `c` is broadcast when 1x1.
Var addConstant(Var x, const Matrix& c);
Var addScalar(Var x, double c);
/// Elementwise product (Hadamard), product rule on all channels.
Var mul(Var a, Var b);
/// a (N x F) times s (N x 1) broadcast along columns.
Var mulRowScalar(Var a, Var s);

/// x W + b, with W (in x out) and b (1 x out) trivial-layout nodes; b may be invalid.
Var linear(Var x, Var weight, Var bias);
/// x * gamma + beta with gamma, beta (1 x F) broadcast over rows.
Var affineColumns(Var x, Var gamma, Var beta);

Var rowSum(Var x);
Var rowMean(Var x);
Var centerRows(Var x);
Var sliceCols(Var x, Index start, Index count);
Var concatCols(const std::vector<Var>& parts);
Var concatRows(const std::vector<Var>& parts);
/// Rows [start, start+count).
Var sliceRows(Var x, Index start, Index count);
/// Row `position` of every consecutive block of `seqLen` rows.
Var selectPosition(Var x, Index seqLen, Index position);
/// Sum of all entries of every seqLen-row block, written back to each of the block's rows (N x 1).
Var blockSum(Var x, Index seqLen);
/// Per block of seqLen rows: A_s B_s^T -> (N x seqLen).
Var blockMatmulABt(Var a, Var b, Index seqLen);
/// Per block of seqLen rows: P_s V_s with P (N x seqLen) -> (N x cols(V)).
Var blockMatmulAB(Var p, Var v, Index seqLen);
/// Row-wise softmax over columns, stabilised by the row maximum.
Var softmaxRows(Var x);

/// Channel `c` of a dual node as a trivial-layout node.
Var channel(Var x, int c);
/// Sum of all value entries -> 1x1.
Var sumAll(Var x);
/// Sum of squared value entries -> 1x1.
Var sumSquares(Var x);

Var operator+(Var a, Var b);
Var operator-(Var a, Var b);
Var operator*(Var a, Var b);
Var operator*(double s, Var x);
Var operator*(Var x, double s);
Var operator-(Var x);

// ---------------------------------------------------------------------------
// Inputs

struct DerivativeRequest {
  std::vector<std::string> first;
  std::vector<std::string> second;  // must be a subset of `first`
};

/// Seeds a dual input from raw coordinates whose columns are named by
/// `columnNames` (e.g. {"t","x"}). Tracked coordinates receive d1 = indicator
/// of their column and d2 = 0.
Var seedInputs(Tape& tape, const Matrix& coords, const std::vector<std::string>& columnNames,
               const DerivativeRequest& request);

ChannelLayout layoutFor(const std::vector<std::string>& columnNames, const DerivativeRequest& request);

}  // namespace physolver::ad
