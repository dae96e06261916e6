#pragma once

#include "physolver/autodiff.hpp"

#include <cstdint>
#include <filesystem>
#include <memory>
#include <string>
#include <vector>

namespace physolver::model {

using ad::Index;
using ad::Matrix;
using ad::ParameterLayout;
using ad::ParameterVector;
using ad::Tape;
using ad::Var;

enum class Activation { Tanh, Identity };

/// Fully connected stack m_0 -> m_1 -> ... -> m_{L-1}. Hidden layers apply the
/// activation; the last layer is affine.
struct MlpSpec {
  std::string prefix;
  std::vector<int> widths;
  Activation activation = Activation::Tanh;
};

void registerMlp(ParameterLayout& layout, const MlpSpec& spec);
Var mlpForward(Tape& tape, const ParameterVector& theta, const MlpSpec& spec, Var input);

struct AttentionSpec {
  std::string prefix;
  int width = 32;
  int heads = 2;
  double normEpsilon = 1e-8;
};

void registerAttention(ParameterLayout& layout, const AttentionSpec& spec);
/// Per head: Softmax(Q K^T / (||Q K^T||_F + eps)) V within every block of
/// `seqLen` rows; heads are concatenated.
Var attention(Tape& tape, const ParameterVector& theta, const AttentionSpec& spec, Var y, Index seqLen);

struct LayerNormSpec {
  std::string prefix;
  int width = 32;
  double epsilon = 1e-5;
};

void registerLayerNorm(ParameterLayout& layout, const LayerNormSpec& spec);
Var layerNorm(Tape& tape, const ParameterVector& theta, const LayerNormSpec& spec, Var x);

/// Network mapping a batch of independent sequences of input points to solution values.
class Model {
 public:
  virtual ~Model() = default;
  virtual const ParameterLayout& layout() const = 0;
  virtual int inputDim() const = 0;
  virtual int outputDim() const = 0;
  /// `input` rows form consecutive sequences of `seqLen` points.
  virtual Var forward(Tape& tape, const ParameterVector& theta, Var input, Index seqLen) const = 0;
  /// Glorot-uniform weights, zero biases, unit layer-norm gains.
  ParameterVector initialize(std::uint64_t seed) const;

  /// Fixed affine map of the input columns, x * scale + shift, applied before
  /// the first layer. Derivative channels follow through the tape.
  void setInputScaling(Eigen::RowVectorXd scale, Eigen::RowVectorXd shift);

 protected:
  Var scaledInput(Tape& tape, Var input) const;

 private:
  Eigen::RowVectorXd inScale_, inShift_;
};

struct PhysicsSolverSpec {
  int inputDim = 2;
  int outputDim = 1;
  int embed = 32;
  int heads = 2;
  int ffWidth = 128;
  std::vector<int> inputHidden;            // hidden widths of the input MLP
  std::vector<int> outputHidden{128, 128};  // hidden widths of the output MLP
  double normEpsilon = 1e-8;
  double layerNormEpsilon = 1e-5;
};

/// Input MLP -> encoder Ln(Feed(Attn(Ln(.)))) -> decoder Ln(Feed(Ln(Attn(.)))) -> output MLP.
class PhysicsSolverModel final : public Model {
 public:
  explicit PhysicsSolverModel(PhysicsSolverSpec spec);

  const ParameterLayout& layout() const override { return layout_; }
  int inputDim() const override { return spec_.inputDim; }
  int outputDim() const override { return spec_.outputDim; }
  Var forward(Tape& tape, const ParameterVector& theta, Var input, Index seqLen) const override;

  Var encode(Tape& tape, const ParameterVector& theta, Var embedded, Index seqLen) const;
  Var decode(Tape& tape, const ParameterVector& theta, Var encoded, Index seqLen) const;
  const PhysicsSolverSpec& spec() const { return spec_; }

 private:
  Var feedForward(Tape& tape, const ParameterVector& theta, const std::string& prefix, Var x) const;

  PhysicsSolverSpec spec_;
  ParameterLayout layout_;
  MlpSpec inputMlp_, outputMlp_;
  AttentionSpec encoderAttn_, decoderAttn_;
  LayerNormSpec encoderLn1_, encoderLn2_, decoderLn1_, decoderLn2_;
};

struct PinnSpec {
  int inputDim = 2;
  int outputDim = 1;
  int width = 64;
  int depth = 4;  // hidden layers
};

/// Plain pointwise MLP baseline; sequence structure is ignored.
class PinnModel final : public Model {
 public:
  explicit PinnModel(PinnSpec spec);
  const ParameterLayout& layout() const override { return layout_; }
  int inputDim() const override { return spec_.inputDim; }
  int outputDim() const override { return spec_.outputDim; }
  Var forward(Tape& tape, const ParameterVector& theta, Var input, Index seqLen) const override;

 private:
  PinnSpec spec_;
  MlpSpec mlp_;
  ParameterLayout layout_;
};

/// Checkpoint: text header describing the layout, then the raw values as
/// little-endian IEEE-754 doubles.
///
///   physolver-checkpoint 1
///   tensors <n>
///   <name> <offset> <rows> <cols>      (n lines)
///   values <count>
///   <8 * count bytes>
void writeCheckpoint(const std::filesystem::path& path, const ParameterVector& theta);
ParameterVector readCheckpoint(const std::filesystem::path& path);

}  // namespace physolver::model
