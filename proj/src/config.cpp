#include "physolver/config.hpp"

#include "physolver/errors.hpp"

#include <fstream>
#include <set>
#include <sstream>

namespace physolver {

using nlohmann::json;

std::string_view methodName(Method m) {
  switch (m) {
    case Method::PhysicsSolver: return "physics-solver";
    case Method::Pinns: return "pinns";
    case Method::PinnsformerAblation: return "pinnsformer-ablation";
  }
  return "?";
}

Method parseMethod(std::string_view name) {
  for (Method m : {Method::PhysicsSolver, Method::Pinns, Method::PinnsformerAblation})
    if (methodName(m) == name) return m;
  throw ConfigError("unknown method '" + std::string(name) + "' (known: physics-solver, pinns, pinnsformer-ablation)");
}

namespace {

std::string_view referenceName(ReferenceSource r) {
  switch (r) {
    case ReferenceSource::ClosedForm: return "closed-form";
    case ReferenceSource::TaylorGreen: return "taylor-green";
    case ReferenceSource::File: return "file";
  }
  return "?";
}

ReferenceSource parseReference(std::string_view name) {
  for (auto r : {ReferenceSource::ClosedForm, ReferenceSource::TaylorGreen, ReferenceSource::File})
    if (referenceName(r) == name) return r;
  throw ConfigError("unknown reference.source '" + std::string(name) + "' (known: closed-form, taylor-green, file)");
}

void flatten(const json& j, const std::string& prefix, std::vector<std::pair<std::string, const json*>>& out) {
  if (j.is_object()) {
    for (auto it = j.begin(); it != j.end(); ++it)
      flatten(it.value(), prefix.empty() ? it.key() : prefix + "." + it.key(), out);
  } else {
    out.emplace_back(prefix, &j);
  }
}

std::string joinKeys() {
  std::string s;
  for (const auto& k : knownKeys()) s += (s.empty() ? "" : ", ") + k;
  return s;
}

json* leaf(json& doc, std::string_view dotted) {
  json* node = &doc;
  std::size_t start = 0;
  for (;;) {
    const std::size_t dot = dotted.find('.', start);
    const std::string part(dotted.substr(start, dot == std::string_view::npos ? std::string_view::npos : dot - start));
    if (!node->is_object() || !node->contains(part)) return nullptr;
    node = &(*node)[part];
    if (dot == std::string_view::npos) break;
    start = dot + 1;
  }
  return node->is_object() ? nullptr : node;
}

template <class T>
void read(const json& j, const char* section, const char* key, T& dst) {
  if (!j.contains(section)) return;
  const json& s = j.at(section);
  if (!s.contains(key)) return;
  try {
    dst = s.at(key).get<T>();
  } catch (const json::exception&) {
    throw ConfigError(std::string("config key ") + section + "." + key + " has the wrong type");
  }
}

template <class T>
void readTop(const json& j, const char* key, T& dst) {
  if (!j.contains(key)) return;
  try {
    dst = j.at(key).get<T>();
  } catch (const json::exception&) {
    throw ConfigError(std::string("config key ") + key + " has the wrong type");
  }
}

}  // namespace

model::PhysicsSolverSpec ExperimentConfig::solverSpec() const {
  model::PhysicsSolverSpec s = solver;
  s.inputDim = 1 + (pde == pde::PdeKind::NavierStokes ? 2 : 1);
  s.outputDim = pde == pde::PdeKind::NavierStokes ? 3 : 1;
  if (paperScale) {
    s.embed = 32;
    s.ffWidth = 512;
    s.outputHidden = {512, 512};
  }
  return s;
}

model::PinnSpec ExperimentConfig::pinnSpec() const {
  model::PinnSpec p = pinn;
  p.inputDim = 1 + (pde == pde::PdeKind::NavierStokes ? 2 : 1);
  p.outputDim = pde == pde::PdeKind::NavierStokes ? 3 : 1;
  if (paperScale) {
    p.width = 512;
    p.depth = 4;
  }
  return p;
}

bool ExperimentConfig::usesData() const {
  return method == Method::PhysicsSolver && weights.lambdaData > 0.0 && data.nData > 0;
}

void ExperimentConfig::validate() const {
  params.validate();
  const bool twoD = pde == pde::PdeKind::NavierStokes;
  if (grid.tCount < 2 || grid.xCount < 2) throw ConfigError("grid.t_count and grid.x_count must be at least 2");
  if (twoD && grid.yCount < 2) throw ConfigError("grid.y_count must be at least 2 for navier-stokes");
  if (!twoD && grid.yCount != 0) throw ConfigError("grid.y_count must be 0 for one-dimensional benchmarks");
  if (grid.trainTCount < 2 || grid.trainTCount > grid.tCount)
    throw ConfigError("grid.train_t_count must lie in [2, grid.t_count]");
  if (grid.boundaryTCount < 0) throw ConfigError("grid.boundary_t_count must be nonnegative");
  if (grid.collocationTStride < 1 || grid.collocationXStride < 1 || grid.collocationYStride < 1)
    throw ConfigError("collocation strides must be at least 1");
  if (method != Method::Pinns) ipsgg.validate();
  if (data.nData < 0) throw ConfigError("data.n_data must be nonnegative");
  if (data.snap && data.nData > grid.trainTCount)
    throw ConfigError("data.n_data exceeds the number of training time nodes available for snapping");
  weights.validate();
  lbfgs.validate();
  const auto s = solverSpec();
  if (s.embed < 1 || s.heads < 1 || s.ffWidth < 1) throw ConfigError("model sizes must be positive");
  if (s.embed % s.heads != 0) throw ConfigError("model.embed must be divisible by model.heads");
  for (int w : s.outputHidden)
    if (w < 1) throw ConfigError("model.output_hidden widths must be positive");
  for (int w : s.inputHidden)
    if (w < 1) throw ConfigError("model.input_hidden widths must be positive");
  if (pinn.width < 1 || pinn.depth < 1) throw ConfigError("model.pinn_width and model.pinn_depth must be positive");
  if (twoD && reference == ReferenceSource::ClosedForm)
    throw ConfigError("navier-stokes needs reference.source = taylor-green or file");
  if (!twoD && reference == ReferenceSource::TaylorGreen)
    throw ConfigError("the taylor-green reference only applies to navier-stokes");
  if (reference == ReferenceSource::File && referencePath.empty())
    throw ConfigError("reference.source = file needs reference.path");
  if (evalChunk < 1) throw ConfigError("eval.chunk must be positive");
}

std::vector<std::string> presetNames() {
  return {"heat", "reaction", "convection", "convection-reduced", "navier-stokes"};
}

ExperimentConfig preset(std::string_view name) {
  ExperimentConfig c;
  c.preset = std::string(name);
  if (name == "heat") {
    c.pde = pde::PdeKind::Heat;
    c.grid = GridConfig{5, 101, 0, 4, 0, 1, 1, 1};
    c.ipsgg = {5, 1e-3, 1.1};
    c.data.nData = 2;
  } else if (name == "reaction") {
    c.pde = pde::PdeKind::Reaction;
    c.grid = GridConfig{101, 101, 0, 100, 0, 2, 2, 1};
    c.ipsgg = {5, 1e-2, 1.1};
    c.data.nData = 10;
  } else if (name == "convection") {
    c.pde = pde::PdeKind::Convection;
    c.grid = GridConfig{101, 101, 0, 100, 0, 2, 2, 1};
    c.ipsgg = {5, 1e-3, 1.1};
    c.data.nData = 5;
  } else if (name == "convection-reduced") {
    c.pde = pde::PdeKind::Convection;
    c.params.convectionSpeed = 10.0;
    c.grid = GridConfig{51, 51, 0, 50, 0, 1, 1, 1};
    c.ipsgg = {5, 1e-3, 1.1};
    c.data.nData = 5;
  } else if (name == "navier-stokes") {
    c.pde = pde::PdeKind::NavierStokes;
    c.grid = GridConfig{10, 25, 10, 9, 0, 1, 1, 1};
    c.ipsgg = {5, 1e-2, 1.1};
    c.data.nData = 4;
    c.reference = ReferenceSource::TaylorGreen;
  } else {
    std::string names;
    for (const auto& n : presetNames()) names += (names.empty() ? "" : ", ") + n;
    throw ConfigError("unknown preset '" + std::string(name) + "' (known: " + names + ")");
  }
  return c;
}

json toJson(const ExperimentConfig& c) {
  json j;
  j["preset"] = c.preset;
  j["method"] = std::string(methodName(c.method));
  j["seed"] = c.seed;
  j["paper_scale"] = c.paperScale;
  j["pde"] = {{"name", std::string(pde::pdeName(c.pde))},
              {"convection_speed", c.params.convectionSpeed},
              {"reaction_rho", c.params.reactionRho},
              {"diffusivity", c.params.diffusivity},
              {"lambda1", c.params.lambda1},
              {"lambda2", c.params.lambda2}};
  j["grid"] = {{"t_count", c.grid.tCount},
               {"x_count", c.grid.xCount},
               {"y_count", c.grid.yCount},
               {"train_t_count", c.grid.trainTCount},
               {"boundary_t_count", c.grid.boundaryTCount},
               {"boundary_full_span", c.grid.boundaryFullSpan},
               {"collocation_t_stride", c.grid.collocationTStride},
               {"collocation_x_stride", c.grid.collocationXStride},
               {"collocation_y_stride", c.grid.collocationYStride}};
  j["ipsgg"] = {{"k", c.ipsgg.k}, {"gamma", c.ipsgg.gamma}, {"dt", c.ipsgg.deltaT}, {"expand_anchors", c.expandAnchors}};
  j["data"] = {{"n_data", c.data.nData}, {"snap", c.data.snap}, {"normalize", c.weights.normalizeData}};
  j["loss"] = {{"w_r", c.weights.wr},
               {"w_b", c.weights.wb},
               {"w_i", c.weights.wi},
               {"lambda_physics", c.weights.lambdaPhysics},
               {"lambda_data", c.weights.lambdaData}};
  j["lbfgs"] = {{"history", c.lbfgs.historySize},
                {"max_iterations", c.lbfgs.maxIterations},
                {"c1", c.lbfgs.c1},
                {"c2", c.lbfgs.c2},
                {"max_line_search", c.lbfgs.maxLineSearchSteps},
                {"grad_tolerance", c.lbfgs.gradTolerance},
                {"initial_step", c.lbfgs.initialStep}};
  j["model"] = {{"embed", c.solver.embed},
                {"heads", c.solver.heads},
                {"ff_width", c.solver.ffWidth},
                {"input_hidden", c.solver.inputHidden},
                {"output_hidden", c.solver.outputHidden},
                {"norm_epsilon", c.solver.normEpsilon},
                {"layer_norm_epsilon", c.solver.layerNormEpsilon},
                {"pinn_width", c.pinn.width},
                {"pinn_depth", c.pinn.depth},
                {"normalize_inputs", c.normalizeInputs}};
  j["reference"] = {{"source", std::string(referenceName(c.reference))}, {"path", c.referencePath}};
  j["eval"] = {{"chunk", c.evalChunk}};
  return j;
}

std::vector<std::string> knownKeys() {
  std::vector<std::pair<std::string, const json*>> leaves;
  const json j = toJson(preset("heat"));
  flatten(j, "", leaves);
  std::vector<std::string> keys;
  for (const auto& [k, v] : leaves) keys.push_back(k);
  return keys;
}

ExperimentConfig fromJson(const json& j) {
  if (!j.is_object()) throw ConfigError("config document must be a JSON object");
  {
    std::vector<std::pair<std::string, const json*>> leaves;
    flatten(j, "", leaves);
    const auto known = knownKeys();
    const std::set<std::string> knownSet(known.begin(), known.end());
    for (const auto& [k, v] : leaves)
      if (!knownSet.count(k)) throw ConfigError("unknown config key '" + k + "'; known keys: " + joinKeys());
  }
  std::string presetName = "heat";
  if (j.contains("preset")) {
    readTop(j, "preset", presetName);
  } else if (j.contains("pde") && j["pde"].contains("name")) {
    presetName = j["pde"]["name"].get<std::string>();
  }
  ExperimentConfig c = preset(presetName);

  std::string s;
  if (j.contains("method")) {
    readTop(j, "method", s);
    c.method = parseMethod(s);
  }
  readTop(j, "seed", c.seed);
  readTop(j, "paper_scale", c.paperScale);
  s.clear();
  read(j, "pde", "name", s);
  if (!s.empty()) c.pde = pde::parsePdeKind(s);
  read(j, "pde", "convection_speed", c.params.convectionSpeed);
  read(j, "pde", "reaction_rho", c.params.reactionRho);
  read(j, "pde", "diffusivity", c.params.diffusivity);
  read(j, "pde", "lambda1", c.params.lambda1);
  read(j, "pde", "lambda2", c.params.lambda2);
  read(j, "grid", "t_count", c.grid.tCount);
  read(j, "grid", "x_count", c.grid.xCount);
  read(j, "grid", "y_count", c.grid.yCount);
  read(j, "grid", "train_t_count", c.grid.trainTCount);
  read(j, "grid", "boundary_t_count", c.grid.boundaryTCount);
  read(j, "grid", "boundary_full_span", c.grid.boundaryFullSpan);
  read(j, "grid", "collocation_t_stride", c.grid.collocationTStride);
  read(j, "grid", "collocation_x_stride", c.grid.collocationXStride);
  read(j, "grid", "collocation_y_stride", c.grid.collocationYStride);
  read(j, "ipsgg", "k", c.ipsgg.k);
  read(j, "ipsgg", "gamma", c.ipsgg.gamma);
  read(j, "ipsgg", "dt", c.ipsgg.deltaT);
  read(j, "ipsgg", "expand_anchors", c.expandAnchors);
  read(j, "data", "n_data", c.data.nData);
  read(j, "data", "snap", c.data.snap);
  read(j, "data", "normalize", c.weights.normalizeData);
  read(j, "loss", "w_r", c.weights.wr);
  read(j, "loss", "w_b", c.weights.wb);
  read(j, "loss", "w_i", c.weights.wi);
  read(j, "loss", "lambda_physics", c.weights.lambdaPhysics);
  read(j, "loss", "lambda_data", c.weights.lambdaData);
  read(j, "lbfgs", "history", c.lbfgs.historySize);
  read(j, "lbfgs", "max_iterations", c.lbfgs.maxIterations);
  read(j, "lbfgs", "c1", c.lbfgs.c1);
  read(j, "lbfgs", "c2", c.lbfgs.c2);
  read(j, "lbfgs", "max_line_search", c.lbfgs.maxLineSearchSteps);
  read(j, "lbfgs", "grad_tolerance", c.lbfgs.gradTolerance);
  read(j, "lbfgs", "initial_step", c.lbfgs.initialStep);
  read(j, "model", "embed", c.solver.embed);
  read(j, "model", "heads", c.solver.heads);
  read(j, "model", "ff_width", c.solver.ffWidth);
  read(j, "model", "input_hidden", c.solver.inputHidden);
  read(j, "model", "output_hidden", c.solver.outputHidden);
  read(j, "model", "norm_epsilon", c.solver.normEpsilon);
  read(j, "model", "layer_norm_epsilon", c.solver.layerNormEpsilon);
  read(j, "model", "pinn_width", c.pinn.width);
  read(j, "model", "pinn_depth", c.pinn.depth);
  read(j, "model", "normalize_inputs", c.normalizeInputs);
  s.clear();
  read(j, "reference", "source", s);
  if (!s.empty()) c.reference = parseReference(s);
  read(j, "reference", "path", c.referencePath);
  read(j, "eval", "chunk", c.evalChunk);
  c.validate();
  return c;
}

void applyOverride(json& doc, std::string_view assignment) {
  const std::size_t eq = assignment.find('=');
  if (eq == std::string_view::npos || eq == 0) throw ConfigError("override must look like key=value: " + std::string(assignment));
  const std::string key(assignment.substr(0, eq));
  const std::string value(assignment.substr(eq + 1));
  json* target = leaf(doc, key);
  if (target == nullptr) throw ConfigError("unknown config key '" + key + "'; known keys: " + joinKeys());
  try {
    if (target->is_boolean()) {
      if (value == "true" || value == "1") *target = true;
      else if (value == "false" || value == "0") *target = false;
      else throw ConfigError("expected true or false for " + key);
    } else if (target->is_number_integer() || target->is_number_unsigned()) {
      std::size_t used = 0;
      const long long v = std::stoll(value, &used);
      if (used != value.size()) throw std::invalid_argument(value);
      *target = v;
    } else if (target->is_number()) {
      std::size_t used = 0;
      const double v = std::stod(value, &used);
      if (used != value.size()) throw std::invalid_argument(value);
      *target = v;
    } else if (target->is_array()) {
      json arr = json::array();
      std::string body = value;
      if (!body.empty() && body.front() == '[') body = body.substr(1, body.size() - 2);
      std::stringstream ss(body);
      for (std::string item; std::getline(ss, item, ',');)
        if (!item.empty()) arr.push_back(std::stoi(item));
      *target = arr;
    } else {
      *target = value;
    }
  } catch (const std::logic_error&) {
    throw ConfigError("cannot parse value '" + value + "' for " + key);
  }
}

ExperimentConfig loadConfig(const std::optional<std::filesystem::path>& path, const std::vector<std::string>& overrides) {
  json file = json::object();
  if (path) {
    std::ifstream in(*path);
    if (!in) throw ConfigError("cannot open config file " + path->string());
    try {
      file = json::parse(in, nullptr, true, true);
    } catch (const json::parse_error& e) {
      throw ConfigError("config file " + path->string() + " is not valid JSON: " + e.what());
    }
    if (!file.is_object()) throw ConfigError("config file " + path->string() + " must hold a JSON object");
  }
  // The preset decides the defaults, so resolve it before merging.
  std::string presetName = "heat";
  if (file.contains("preset")) presetName = file["preset"].get<std::string>();
  else if (file.contains("pde") && file["pde"].contains("name")) presetName = file["pde"]["name"].get<std::string>();
  for (const auto& o : overrides)
    if (o.rfind("preset=", 0) == 0) presetName = o.substr(7);

  json doc = toJson(preset(presetName));
  std::vector<std::pair<std::string, const json*>> leaves;
  flatten(file, "", leaves);
  for (const auto& [k, v] : leaves) {
    json* target = leaf(doc, k);
    if (target == nullptr) throw ConfigError("unknown config key '" + k + "'; known keys: " + joinKeys());
    *target = *v;
  }
  doc["preset"] = presetName;
  for (const auto& o : overrides) applyOverride(doc, o);
  return fromJson(doc);
}

}  // namespace physolver
