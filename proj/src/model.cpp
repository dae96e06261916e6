#include "physolver/model.hpp"

#include "physolver/errors.hpp"

#include <bit>
#include <cmath>
#include <cstring>
#include <fstream>
#include <random>
#include <sstream>

namespace physolver::model {

namespace {

bool endsWith(const std::string& s, std::string_view suffix) {
  return s.size() >= suffix.size() && s.compare(s.size() - suffix.size(), suffix.size(), suffix) == 0;
}

std::string layerName(const std::string& prefix, std::size_t l, const char* what) {
  return prefix + "." + std::to_string(l) + "." + what;
}

}  // namespace

// ---------------------------------------------------------------------------
// Building blocks

void registerMlp(ParameterLayout& layout, const MlpSpec& spec) {
  if (spec.widths.size() < 2) throw ConfigError("MLP '" + spec.prefix + "' needs at least input and output widths");
  for (std::size_t l = 0; l + 1 < spec.widths.size(); ++l) {
    if (spec.widths[l] <= 0 || spec.widths[l + 1] <= 0) throw ConfigError("MLP widths must be positive");
    layout.add(layerName(spec.prefix, l, "weight"), spec.widths[l], spec.widths[l + 1]);
    layout.add(layerName(spec.prefix, l, "bias"), 1, spec.widths[l + 1]);
  }
}

Var mlpForward(Tape& tape, const ParameterVector& theta, const MlpSpec& spec, Var input) {
  if (input.cols() != spec.widths.front())
    throw ContractViolation("MLP '" + spec.prefix + "' expects width " + std::to_string(spec.widths.front()) +
                            ", got " + std::to_string(input.cols()));
  Var h = input;
  const std::size_t layers = spec.widths.size() - 1;
  for (std::size_t l = 0; l < layers; ++l) {
    if (l > 0 && spec.activation == Activation::Tanh) h = ad::tanh(h);
    h = ad::linear(h, tape.parameter(theta, layerName(spec.prefix, l, "weight")),
                   tape.parameter(theta, layerName(spec.prefix, l, "bias")));
  }
  return h;
}

void registerAttention(ParameterLayout& layout, const AttentionSpec& spec) {
  if (spec.heads <= 0 || spec.width % spec.heads != 0)
    throw ConfigError("attention width " + std::to_string(spec.width) + " is not divisible by " +
                      std::to_string(spec.heads) + " heads");
  layout.add(spec.prefix + ".wq", spec.width, spec.width);
  layout.add(spec.prefix + ".wk", spec.width, spec.width);
  layout.add(spec.prefix + ".wv", spec.width, spec.width);
}

Var attention(Tape& tape, const ParameterVector& theta, const AttentionSpec& spec, Var y, Index seqLen) {
  if (spec.heads <= 0 || spec.width % spec.heads != 0)
    throw ConfigError("attention width " + std::to_string(spec.width) + " is not divisible by " +
                      std::to_string(spec.heads) + " heads");
  if (y.cols() != spec.width) throw ContractViolation("attention input width mismatch");
  Var q = ad::linear(y, tape.parameter(theta, spec.prefix + ".wq"), Var());
  Var k = ad::linear(y, tape.parameter(theta, spec.prefix + ".wk"), Var());
  Var v = ad::linear(y, tape.parameter(theta, spec.prefix + ".wv"), Var());

  const Index headWidth = spec.width / spec.heads;
  std::vector<Var> heads;
  for (int h = 0; h < spec.heads; ++h) {
    Var qh = spec.heads == 1 ? q : ad::sliceCols(q, h * headWidth, headWidth);
    Var kh = spec.heads == 1 ? k : ad::sliceCols(k, h * headWidth, headWidth);
    Var vh = spec.heads == 1 ? v : ad::sliceCols(v, h * headWidth, headWidth);
    Var scores = ad::blockMatmulABt(qh, kh, seqLen);
    Var norm = ad::addScalar(ad::sqrt(ad::blockSum(scores * scores, seqLen)), spec.normEpsilon);
    Var weights = ad::softmaxRows(ad::mulRowScalar(scores, ad::reciprocal(norm)));
    heads.push_back(ad::blockMatmulAB(weights, vh, seqLen));
  }
  return heads.size() == 1 ? heads[0] : ad::concatCols(heads);
}

void registerLayerNorm(ParameterLayout& layout, const LayerNormSpec& spec) {
  layout.add(spec.prefix + ".gamma", 1, spec.width);
  layout.add(spec.prefix + ".beta", 1, spec.width);
}

Var layerNorm(Tape& tape, const ParameterVector& theta, const LayerNormSpec& spec, Var x) {
  Var centered = ad::centerRows(x);
  Var variance = ad::rowMean(centered * centered);
  Var normalized = ad::mulRowScalar(centered, ad::rsqrt(ad::addScalar(variance, spec.epsilon)));
  return ad::affineColumns(normalized, tape.parameter(theta, spec.prefix + ".gamma"),
                           tape.parameter(theta, spec.prefix + ".beta"));
}

// ---------------------------------------------------------------------------
// Model

ParameterVector Model::initialize(std::uint64_t seed) const {
  ParameterVector theta(layout());
  std::mt19937_64 rng(seed);
  for (const auto& slot : layout().slots()) {
    Matrix m;
    if (endsWith(slot.name, ".bias") || endsWith(slot.name, ".beta")) {
      m = Matrix::Zero(slot.rows, slot.cols);
    } else if (endsWith(slot.name, ".gamma")) {
      m = Matrix::Ones(slot.rows, slot.cols);
    } else {
      const double limit = std::sqrt(6.0 / static_cast<double>(slot.rows + slot.cols));
      std::uniform_real_distribution<double> u(-limit, limit);
      m.resize(slot.rows, slot.cols);
      for (Index j = 0; j < slot.cols; ++j)
        for (Index i = 0; i < slot.rows; ++i) m(i, j) = u(rng);
    }
    theta.setTensor(slot.name, m);
  }
  return theta;
}

PhysicsSolverModel::PhysicsSolverModel(PhysicsSolverSpec spec) : spec_(std::move(spec)) {
  if (spec_.inputDim <= 0 || spec_.outputDim <= 0 || spec_.embed <= 0 || spec_.ffWidth <= 0)
    throw ConfigError("model widths must be positive");
  inputMlp_.prefix = "input";
  inputMlp_.widths.push_back(spec_.inputDim);
  inputMlp_.widths.insert(inputMlp_.widths.end(), spec_.inputHidden.begin(), spec_.inputHidden.end());
  inputMlp_.widths.push_back(spec_.embed);

  outputMlp_.prefix = "output";
  outputMlp_.widths.push_back(spec_.embed);
  outputMlp_.widths.insert(outputMlp_.widths.end(), spec_.outputHidden.begin(), spec_.outputHidden.end());
  outputMlp_.widths.push_back(spec_.outputDim);

  encoderAttn_ = AttentionSpec{"encoder.attn", spec_.embed, spec_.heads, spec_.normEpsilon};
  decoderAttn_ = AttentionSpec{"decoder.attn", spec_.embed, spec_.heads, spec_.normEpsilon};
  encoderLn1_ = LayerNormSpec{"encoder.ln1", spec_.embed, spec_.layerNormEpsilon};
  encoderLn2_ = LayerNormSpec{"encoder.ln2", spec_.embed, spec_.layerNormEpsilon};
  decoderLn1_ = LayerNormSpec{"decoder.ln1", spec_.embed, spec_.layerNormEpsilon};
  decoderLn2_ = LayerNormSpec{"decoder.ln2", spec_.embed, spec_.layerNormEpsilon};

  registerMlp(layout_, inputMlp_);
  registerLayerNorm(layout_, encoderLn1_);
  registerAttention(layout_, encoderAttn_);
  registerMlp(layout_, MlpSpec{"encoder.feed", {spec_.embed, spec_.ffWidth, spec_.embed}, Activation::Tanh});
  registerLayerNorm(layout_, encoderLn2_);
  registerAttention(layout_, decoderAttn_);
  registerLayerNorm(layout_, decoderLn1_);
  registerMlp(layout_, MlpSpec{"decoder.feed", {spec_.embed, spec_.ffWidth, spec_.embed}, Activation::Tanh});
  registerLayerNorm(layout_, decoderLn2_);
  registerMlp(layout_, outputMlp_);
}

Var PhysicsSolverModel::feedForward(Tape& tape, const ParameterVector& theta, const std::string& prefix,
                                    Var x) const {
  return mlpForward(tape, theta, MlpSpec{prefix, {spec_.embed, spec_.ffWidth, spec_.embed}, Activation::Tanh}, x);
}

Var PhysicsSolverModel::encode(Tape& tape, const ParameterVector& theta, Var embedded, Index seqLen) const {
  Var y = layerNorm(tape, theta, encoderLn1_, embedded);
  y = attention(tape, theta, encoderAttn_, y, seqLen);
  y = feedForward(tape, theta, "encoder.feed", y);
  return layerNorm(tape, theta, encoderLn2_, y);
}

Var PhysicsSolverModel::decode(Tape& tape, const ParameterVector& theta, Var encoded, Index seqLen) const {
  Var y = attention(tape, theta, decoderAttn_, encoded, seqLen);
  y = layerNorm(tape, theta, decoderLn1_, y);
  y = feedForward(tape, theta, "decoder.feed", y);
  return layerNorm(tape, theta, decoderLn2_, y);
}

Var PhysicsSolverModel::forward(Tape& tape, const ParameterVector& theta, Var input, Index seqLen) const {
  Var embedded = mlpForward(tape, theta, inputMlp_, scaledInput(tape, input));
  Var decoded = decode(tape, theta, encode(tape, theta, embedded, seqLen), seqLen);
  return mlpForward(tape, theta, outputMlp_, decoded);
}

PinnModel::PinnModel(PinnSpec spec) : spec_(spec) {
  if (spec_.width <= 0 || spec_.depth < 1) throw ConfigError("PINN width and depth must be positive");
  mlp_.prefix = "pinn";
  mlp_.widths.push_back(spec_.inputDim);
  for (int l = 0; l < spec_.depth; ++l) mlp_.widths.push_back(spec_.width);
  mlp_.widths.push_back(spec_.outputDim);
  registerMlp(layout_, mlp_);
}

Var PinnModel::forward(Tape& tape, const ParameterVector& theta, Var input, Index) const {
  return mlpForward(tape, theta, mlp_, scaledInput(tape, input));
}

void Model::setInputScaling(Eigen::RowVectorXd scale, Eigen::RowVectorXd shift) {
  if (scale.size() != inputDim() || shift.size() != inputDim())
    throw ContractViolation("input scaling needs one entry per input column");
  inScale_ = std::move(scale);
  inShift_ = std::move(shift);
}

Var Model::scaledInput(Tape& tape, Var input) const {
  if (inScale_.size() == 0) return input;
  return affineColumns(input, tape.constant(inScale_), tape.constant(inShift_));
}

// ---------------------------------------------------------------------------
// Checkpoints

namespace {

std::uint64_t toLittleEndian(std::uint64_t v) {
  if constexpr (std::endian::native == std::endian::little) return v;
  std::uint64_t r = 0;
  for (int i = 0; i < 8; ++i) r |= ((v >> (8 * i)) & 0xffu) << (8 * (7 - i));
  return r;
}

}  // namespace

void writeCheckpoint(const std::filesystem::path& path, const ParameterVector& theta) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot open checkpoint for writing: " + path.string());
  out << "physolver-checkpoint 1\n";
  out << "tensors " << theta.layout().slots().size() << "\n";
  for (const auto& s : theta.layout().slots())
    out << s.name << " " << s.offset << " " << s.rows << " " << s.cols << "\n";
  out << "values " << theta.size() << "\n";
  for (Index i = 0; i < theta.size(); ++i) {
    const std::uint64_t bits = toLittleEndian(std::bit_cast<std::uint64_t>(theta.values()[i]));
    out.write(reinterpret_cast<const char*>(&bits), sizeof(bits));
  }
  if (!out) throw std::runtime_error("failed writing checkpoint: " + path.string());
}

ParameterVector readCheckpoint(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot open checkpoint: " + path.string());
  auto fail = [&](const std::string& what) {
    throw std::runtime_error("malformed checkpoint " + path.string() + ": " + what);
  };
  std::string line;
  if (!std::getline(in, line) || line != "physolver-checkpoint 1") fail("bad magic line");
  std::string word;
  std::size_t n = 0;
  if (!std::getline(in, line)) fail("missing tensor count");
  {
    std::istringstream ls(line);
    if (!(ls >> word >> n) || word != "tensors") fail("bad tensor count line");
  }
  ParameterLayout layout;
  for (std::size_t i = 0; i < n; ++i) {
    if (!std::getline(in, line)) fail("truncated tensor table");
    std::istringstream ls(line);
    std::string name;
    Index offset = 0, rows = 0, cols = 0;
    if (!(ls >> name >> offset >> rows >> cols)) fail("bad tensor line '" + line + "'");
    const auto& slot = layout.add(name, rows, cols);
    if (slot.offset != offset) fail("tensor '" + name + "' is not contiguous");
  }
  Index count = 0;
  if (!std::getline(in, line)) fail("missing value count");
  {
    std::istringstream ls(line);
    if (!(ls >> word >> count) || word != "values" || count != layout.size()) fail("bad value count");
  }
  ad::Vector values(count);
  for (Index i = 0; i < count; ++i) {
    std::uint64_t bits = 0;
    if (!in.read(reinterpret_cast<char*>(&bits), sizeof(bits))) fail("truncated value block");
    values[i] = std::bit_cast<double>(toLittleEndian(bits));
  }
  return ParameterVector(std::move(layout), std::move(values));
}

}  // namespace physolver::model
