#include "physolver/pde.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <numbers>
#include <sstream>

namespace physolver::pde {

namespace {

constexpr double kPi = std::numbers::pi;

double reactionH(double x) {
  const double s = kPi / 4.0;
  return std::exp(-(x - kPi) * (x - kPi) / (2.0 * s * s));
}

int indexOf(const std::vector<std::string>& names, std::string_view name) {
  auto it = std::find(names.begin(), names.end(), name);
  return it == names.end() ? -1 : static_cast<int>(it - names.begin());
}

}  // namespace

std::string_view pdeName(PdeKind kind) {
  switch (kind) {
    case PdeKind::Convection: return "convection";
    case PdeKind::Reaction: return "reaction";
    case PdeKind::Heat: return "heat";
    case PdeKind::NavierStokes: return "navier-stokes";
  }
  return "?";
}

PdeKind parsePdeKind(std::string_view name) {
  for (PdeKind k : {PdeKind::Convection, PdeKind::Reaction, PdeKind::Heat, PdeKind::NavierStokes})
    if (pdeName(k) == name) return k;
  throw ConfigError("unknown pde '" + std::string(name) + "' (known: convection, reaction, heat, navier-stokes)");
}

void PdeParameters::validate() const {
  auto positive = [](double v, const char* name) {
    if (!(v > 0.0) || !std::isfinite(v)) throw ConfigError(std::string(name) + " must be positive");
  };
  positive(convectionSpeed, "pde.convection_speed");
  positive(reactionRho, "pde.reaction_rho");
  positive(diffusivity, "pde.diffusivity");
  positive(lambda1, "pde.lambda1");
  positive(lambda2, "pde.lambda2");
}

PdeDefinition makePde(PdeKind kind, const PdeParameters& params) {
  params.validate();
  PdeDefinition d;
  d.kind = kind;
  d.params = params;
  switch (kind) {
    case PdeKind::Convection:
      d.time = {0.0, 1.0};
      d.space = {{0.0, 2 * kPi}};
      d.boundary = BoundaryKind::Periodic;
      d.fieldNames = {"u"};
      d.required = {kUt | kUx};
      break;
    case PdeKind::Reaction:
      d.time = {0.0, 1.0};
      d.space = {{0.0, 2 * kPi}};
      d.boundary = BoundaryKind::Periodic;
      d.fieldNames = {"u"};
      d.required = {kU | kUt};
      break;
    case PdeKind::Heat:
      d.time = {0.0, 0.2};
      d.space = {{0.0, 1.0}};
      d.boundary = BoundaryKind::Dirichlet;
      d.fieldNames = {"u"};
      d.required = {kUt | kUxx};
      break;
    case PdeKind::NavierStokes:
      d.time = {0.0, 1.0};
      d.space = {{1.0, 7.0}, {-2.0, 2.0}};
      d.boundary = BoundaryKind::None;
      d.hasInitialCondition = false;
      d.fieldNames = {"u", "v", "p"};
      const unsigned vel = kU | kUt | kUx | kUy | kUxx | kUyy;
      d.required = {vel, vel, kUx | kUy};
      break;
  }
  return d;
}

ad::DerivativeRequest PdeDefinition::derivativeRequest() const {
  switch (kind) {
    case PdeKind::Convection: return {{"t", "x"}, {}};
    case PdeKind::Reaction: return {{"t"}, {}};
    case PdeKind::Heat: return {{"t", "x"}, {"x"}};
    case PdeKind::NavierStokes: return {{"t", "x", "y"}, {"x", "y"}};
  }
  return {};
}

double PdeDefinition::initialValue(std::span<const double> x) const {
  switch (kind) {
    case PdeKind::Convection: return std::sin(x[0]);
    case PdeKind::Reaction: return reactionH(x[0]);
    case PdeKind::Heat: return std::sin(kPi * x[0]);
    case PdeKind::NavierStokes: break;
  }
  throw ContractViolation("navier-stokes has no scalar initial condition");
}

double PdeDefinition::boundaryValue(double, std::span<const double>) const {
  if (kind != PdeKind::Heat) throw ContractViolation("only the heat benchmark has a Dirichlet boundary");
  return 0.0;
}

std::vector<Field<ad::Var>> fieldsFromOutput(ad::Var output, const PdeDefinition& pde,
                                             const ad::DerivativeRequest& request) {
  const int arity = pde.outputArity();
  if (output.cols() != arity) throw ContractViolation("network output arity does not match the pde");
  const auto& layout = output.layout();
  auto column = [&](int channel, int f) {
    ad::Var c = ad::channel(output, channel);
    return arity == 1 ? c : ad::sliceCols(c, f, 1);
  };
  auto first = [&](std::string_view coord) {
    const int i = indexOf(request.first, coord);
    return i >= 0 && i < layout.firstOrder ? layout.firstChannel(i) : -1;
  };
  auto second = [&](std::string_view coord) {
    const int i = indexOf(request.second, coord);
    return i >= 0 && i < static_cast<int>(layout.secondOrder.size()) ? layout.secondChannel(i) : -1;
  };
  const int ct = first("t"), cx = first("x"), cy = first("y");
  const int cxx = second("x"), cyy = second("y");

  std::vector<Field<ad::Var>> out(static_cast<std::size_t>(arity));
  for (int f = 0; f < arity; ++f) {
    auto& fd = out[static_cast<std::size_t>(f)];
    const unsigned want = pde.required.empty() ? ~0u : pde.required[static_cast<std::size_t>(f)];
    auto fill = [&](unsigned flag, int channel, ad::Var& slot) {
      if ((want & flag) == 0 || channel < 0) return;
      slot = column(channel, f);
      fd.present |= flag;
    };
    fill(kU, 0, fd.u);
    fill(kUt, ct, fd.ut);
    fill(kUx, cx, fd.ux);
    fill(kUy, cy, fd.uy);
    fill(kUxx, cxx, fd.uxx);
    fill(kUyy, cyy, fd.uyy);
  }
  return out;
}

// ---------------------------------------------------------------------------

Matrix ReferenceSolution::evaluate(const Matrix& coords) const {
  if (coords.cols() != 1 + spatialDim()) throw ContractViolation("reference query has the wrong number of columns");
  accesses_.fetch_add(static_cast<std::uint64_t>(coords.rows()));
  return evaluateUncounted(coords);
}

double reactionReference(double t, double x, double rho) {
  const double h = reactionH(x);
  const double e = std::exp(rho * t);
  return h * e / (h * e + 1.0 - h);
}

double heatReference(double t, double x, double alpha) {
  return std::exp(-alpha * kPi * kPi * t) * std::sin(kPi * x);
}

double convectionReference(double t, double x, double speed) { return std::sin(x - speed * t); }

Velocity taylorGreenReference(double t, double x, double y, double lambda2) {
  const double e2 = std::exp(-2.0 * lambda2 * t);
  return {-std::cos(x) * std::sin(y) * e2, std::sin(x) * std::cos(y) * e2,
          -0.25 * (std::cos(2 * x) + std::cos(2 * y)) * e2 * e2};
}

namespace {

class ScalarClosedForm final : public AnalyticReference {
 public:
  explicit ScalarClosedForm(PdeDefinition pde) : pde_(std::move(pde)) {}
  ReferenceKind kind() const override { return ReferenceKind::ClosedForm; }
  int arity() const override { return 1; }
  int spatialDim() const override { return 1; }

  std::vector<Field<double>> derivatives(double t, std::span<const double> xs) const override {
    const double x = xs[0];
    const auto& p = pde_.params;
    Field<double> f;
    f.present = kU | kUt | kUx | kUxx;
    switch (pde_.kind) {
      case PdeKind::Convection: {
        const double s = std::sin(x - p.convectionSpeed * t), c = std::cos(x - p.convectionSpeed * t);
        f.u = s;
        f.ut = -p.convectionSpeed * c;
        f.ux = c;
        f.uxx = -s;
        break;
      }
      case PdeKind::Reaction: {
        // u = g / (g + 1 - h) with g = h e^{rho t}; derivatives via the logistic form.
        const double h = reactionH(x);
        const double hx = -(x - kPi) / (kPi * kPi / 16.0) * h;
        const double hxx = (-(1.0 / (kPi * kPi / 16.0)) + std::pow((x - kPi) / (kPi * kPi / 16.0), 2)) * h;
        const double e = std::exp(p.reactionRho * t);
        const double den = h * e + 1.0 - h;
        f.u = h * e / den;
        f.ut = p.reactionRho * h * (1.0 - h) * e / (den * den);
        // d/dx of h e / (h (e-1) + 1) = hx e / den^2
        f.ux = hx * e / (den * den);
        f.uxx = e * (hxx * den - 2.0 * hx * hx * (e - 1.0)) / (den * den * den);
        break;
      }
      case PdeKind::Heat: {
        const double decay = std::exp(-p.diffusivity * kPi * kPi * t);
        f.u = decay * std::sin(kPi * x);
        f.ut = -p.diffusivity * kPi * kPi * f.u;
        f.ux = decay * kPi * std::cos(kPi * x);
        f.uxx = -kPi * kPi * f.u;
        break;
      }
      case PdeKind::NavierStokes: break;
    }
    return {f};
  }

 protected:
  Matrix evaluateUncounted(const Matrix& coords) const override {
    Matrix out(coords.rows(), 1);
    const auto& p = pde_.params;
    for (Eigen::Index r = 0; r < coords.rows(); ++r) {
      const double t = coords(r, 0), x = coords(r, 1);
      switch (pde_.kind) {
        case PdeKind::Convection: out(r, 0) = convectionReference(t, x, p.convectionSpeed); break;
        case PdeKind::Reaction: out(r, 0) = reactionReference(t, x, p.reactionRho); break;
        case PdeKind::Heat: out(r, 0) = heatReference(t, x, p.diffusivity); break;
        case PdeKind::NavierStokes: break;
      }
    }
    return out;
  }

 private:
  PdeDefinition pde_;
};

class TaylorGreen final : public AnalyticReference {
 public:
  explicit TaylorGreen(double lambda2) : lambda2_(lambda2) {}
  ReferenceKind kind() const override { return ReferenceKind::Manufactured; }
  int arity() const override { return 3; }
  int spatialDim() const override { return 2; }

  std::vector<Field<double>> derivatives(double t, std::span<const double> xy) const override {
    const double x = xy[0], y = xy[1];
    const double e2 = std::exp(-2.0 * lambda2_ * t);
    const double cx = std::cos(x), sx = std::sin(x), cy = std::cos(y), sy = std::sin(y);
    const unsigned all = kU | kUt | kUx | kUy | kUxx | kUyy;
    Field<double> u, v, p;
    u.present = v.present = p.present = all;
    u.u = -cx * sy * e2;
    u.ut = -2.0 * lambda2_ * u.u;
    u.ux = sx * sy * e2;
    u.uy = -cx * cy * e2;
    u.uxx = cx * sy * e2;
    u.uyy = cx * sy * e2;
    v.u = sx * cy * e2;
    v.ut = -2.0 * lambda2_ * v.u;
    v.ux = cx * cy * e2;
    v.uy = -sx * sy * e2;
    v.uxx = -sx * cy * e2;
    v.uyy = -sx * cy * e2;
    const double e4 = e2 * e2;
    p.u = -0.25 * (std::cos(2 * x) + std::cos(2 * y)) * e4;
    p.ut = -4.0 * lambda2_ * p.u;
    p.ux = 0.5 * std::sin(2 * x) * e4;
    p.uy = 0.5 * std::sin(2 * y) * e4;
    p.uxx = std::cos(2 * x) * e4;
    p.uyy = std::cos(2 * y) * e4;
    return {u, v, p};
  }

 protected:
  Matrix evaluateUncounted(const Matrix& coords) const override {
    Matrix out(coords.rows(), 3);
    for (Eigen::Index r = 0; r < coords.rows(); ++r) {
      const Velocity w = taylorGreenReference(coords(r, 0), coords(r, 1), coords(r, 2), lambda2_);
      out.row(r) << w.u, w.v, w.p;
    }
    return out;
  }

 private:
  double lambda2_;
};

}  // namespace

std::unique_ptr<AnalyticReference> makeAnalyticReference(const PdeDefinition& pde) {
  if (pde.kind == PdeKind::NavierStokes) {
    if (pde.params.lambda1 != 1.0) throw ConfigError("the Taylor-Green reference requires pde.lambda1 = 1");
    return std::make_unique<TaylorGreen>(pde.params.lambda2);
  }
  return std::make_unique<ScalarClosedForm>(pde);
}

// ---------------------------------------------------------------------------
// Gridded reference

GriddedReference::GriddedReference(std::vector<double> times, std::vector<double> xs, std::vector<double> ys,
                                   std::vector<std::string> fields, std::vector<double> values)
    : times_(std::move(times)), xs_(std::move(xs)), ys_(std::move(ys)), fields_(std::move(fields)),
      values_(std::move(values)) {
  const std::size_t ny = ys_.empty() ? 1 : ys_.size();
  if (times_.empty() || xs_.empty() || fields_.empty() ||
      values_.size() != times_.size() * xs_.size() * ny * fields_.size())
    throw ContractViolation("gridded reference dimensions do not match its value count");
}

double GriddedReference::at(std::size_t ti, std::size_t xi, std::size_t yi, std::size_t field) const {
  const std::size_t ny = ys_.empty() ? 1 : ys_.size();
  return values_[((ti * xs_.size() + xi) * ny + yi) * fields_.size() + field];
}

namespace {

std::size_t nearest(const std::vector<double>& nodes, double q) {
  auto it = std::lower_bound(nodes.begin(), nodes.end(), q);
  if (it == nodes.begin()) return 0;
  if (it == nodes.end()) return nodes.size() - 1;
  const auto hi = static_cast<std::size_t>(it - nodes.begin());
  return (q - nodes[hi - 1] <= nodes[hi] - q) ? hi - 1 : hi;
}

/// Lower node index and weight of the upper node, clamped to the grid.
std::pair<std::size_t, double> bracket(const std::vector<double>& nodes, double q) {
  if (nodes.size() == 1 || q <= nodes.front()) return {0, 0.0};
  if (q >= nodes.back()) return {nodes.size() - 2, 1.0};
  auto it = std::upper_bound(nodes.begin(), nodes.end(), q);
  const auto hi = static_cast<std::size_t>(it - nodes.begin());
  return {hi - 1, (q - nodes[hi - 1]) / (nodes[hi] - nodes[hi - 1])};
}

}  // namespace

Matrix GriddedReference::evaluateUncounted(const Matrix& coords) const {
  const auto nf = fields_.size();
  Matrix out(coords.rows(), static_cast<Eigen::Index>(nf));
  for (Eigen::Index r = 0; r < coords.rows(); ++r) {
    const std::size_t ti = nearest(times_, coords(r, 0));
    auto [xi, wx] = bracket(xs_, coords(r, 1));
    const std::size_t xj = std::min(xi + 1, xs_.size() - 1);
    if (ys_.empty()) {
      for (std::size_t f = 0; f < nf; ++f)
        out(r, static_cast<Eigen::Index>(f)) = (1 - wx) * at(ti, xi, 0, f) + wx * at(ti, xj, 0, f);
      continue;
    }
    auto [yi, wy] = bracket(ys_, coords(r, 2));
    const std::size_t yj = std::min(yi + 1, ys_.size() - 1);
    for (std::size_t f = 0; f < nf; ++f)
      out(r, static_cast<Eigen::Index>(f)) =
          (1 - wx) * ((1 - wy) * at(ti, xi, yi, f) + wy * at(ti, xi, yj, f)) +
          wx * ((1 - wy) * at(ti, xj, yi, f) + wy * at(ti, xj, yj, f));
  }
  return out;
}

namespace {

std::string_view trim(std::string_view s) {
  while (!s.empty() && (s.front() == ' ' || s.front() == '\t')) s.remove_prefix(1);
  while (!s.empty() && (s.back() == ' ' || s.back() == '\t' || s.back() == '\r')) s.remove_suffix(1);
  return s;
}

std::vector<std::string_view> splitCsv(std::string_view line) {
  std::vector<std::string_view> cells;
  std::size_t start = 0;
  for (;;) {
    const std::size_t comma = line.find(',', start);
    cells.push_back(trim(line.substr(start, comma == std::string_view::npos ? std::string_view::npos : comma - start)));
    if (comma == std::string_view::npos) break;
    start = comma + 1;
  }
  return cells;
}

[[noreturn]] void fail(const std::filesystem::path& path, std::size_t row, const std::string& what) {
  std::ostringstream os;
  os << path.string() << ": row " << row << ": " << what;
  throw IngestionError(os.str());
}

}  // namespace

std::unique_ptr<GriddedReference> loadGriddedReference(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw IngestionError("cannot open reference file " + path.string());
  std::string line;
  if (!std::getline(in, line)) fail(path, 1, "missing header");
  if (line.size() >= 3 && line.compare(0, 3, "\xEF\xBB\xBF") == 0) line.erase(0, 3);
  const auto headerCells = splitCsv(line);
  std::vector<std::string> header(headerCells.begin(), headerCells.end());

  const bool twoD = indexOf(header, "y") >= 0;
  const std::vector<std::string> axes = twoD ? std::vector<std::string>{"t", "x", "y"}
                                             : std::vector<std::string>{"t", "x"};
  const std::vector<std::string> fields = twoD ? std::vector<std::string>{"u", "v", "p"}
                                               : std::vector<std::string>{"u"};
  std::vector<int> columnOf;
  for (const auto& names : {axes, fields})
    for (const auto& n : names) {
      const int c = indexOf(header, n);
      if (c < 0) fail(path, 1, "missing column '" + n + "'");
      columnOf.push_back(c);
    }
  if (header.size() != columnOf.size()) {
    for (const auto& h : header)
      if (indexOf(axes, h) < 0 && indexOf(fields, h) < 0) fail(path, 1, "unexpected column '" + h + "'");
    fail(path, 1, "duplicate column in header");
  }

  std::vector<std::vector<double>> rows;
  std::size_t rowNumber = 1;
  while (std::getline(in, line)) {
    ++rowNumber;
    if (trim(line).empty()) continue;
    const auto cells = splitCsv(line);
    if (cells.size() != header.size())
      fail(path, rowNumber, "expected " + std::to_string(header.size()) + " cells, found " +
                                std::to_string(cells.size()));
    std::vector<double> vals;
    for (std::size_t k = 0; k < columnOf.size(); ++k) {
      const auto cell = cells[static_cast<std::size_t>(columnOf[k])];
      double v = 0.0;
      auto [ptr, ec] = std::from_chars(cell.data(), cell.data() + cell.size(), v);
      const std::string& column = header[static_cast<std::size_t>(columnOf[k])];
      if (cell.empty() || ec != std::errc() || ptr != cell.data() + cell.size())
        fail(path, rowNumber, "cannot parse '" + std::string(cell) + "' in column '" + column + "' as a number");
      if (std::isnan(v)) fail(path, rowNumber, "NaN value in column '" + column + "'");
      if (!std::isfinite(v)) fail(path, rowNumber, "non-finite value in column '" + column + "'");
      vals.push_back(v);
    }
    rows.push_back(std::move(vals));
  }
  if (rows.empty()) fail(path, 2, "no data rows");

  // Axis nodes: times from changes of t, x and y from the first time block.
  std::vector<double> times, xs, ys;
  for (const auto& r : rows)
    if (times.empty() || r[0] != times.back()) times.push_back(r[0]);
  const std::size_t perTime = rows.size() / times.size();
  for (std::size_t i = 0; i < perTime && i < rows.size(); ++i) {
    if (rows[i][0] != times[0]) break;
    if (xs.empty() || rows[i][1] != xs.back()) xs.push_back(rows[i][1]);
    if (twoD && (ys.empty() || rows[i][1] == xs.front())) ys.push_back(rows[i][2]);
  }
  const std::size_t ny = twoD ? ys.size() : 1;
  if (rows.size() != times.size() * xs.size() * ny)
    fail(path, rows.size() + 1, "grid is not rectangular (" + std::to_string(rows.size()) + " rows for " +
                                    std::to_string(times.size()) + " times x " + std::to_string(xs.size() * ny) +
                                    " spatial nodes)");
  auto increasing = [](const std::vector<double>& v) { return std::adjacent_find(v.begin(), v.end(), std::greater_equal<>()) == v.end(); };
  if (!increasing(times) || !increasing(xs) || !increasing(ys))
    fail(path, 2, "axis values must be strictly increasing (time-major, then x, then y)");

  const std::size_t nf = fields.size();
  std::vector<double> values(rows.size() * nf);
  for (std::size_t i = 0; i < rows.size(); ++i) {
    const std::size_t ti = i / (xs.size() * ny), xi = (i / ny) % xs.size(), yi = i % ny;
    const auto& r = rows[i];
    if (r[0] != times[ti] || r[1] != xs[xi] || (twoD && r[2] != ys[yi]))
      fail(path, i + 2, "grid is not rectangular: coordinates do not match the expected node");
    for (std::size_t f = 0; f < nf; ++f) values[i * nf + f] = r[axes.size() + f];
  }
  return std::make_unique<GriddedReference>(std::move(times), std::move(xs), std::move(ys), fields,
                                            std::move(values));
}

}  // namespace physolver::pde
