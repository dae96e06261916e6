#include "physolver/errors.hpp"
#include "physolver/report.hpp"
#include "physolver/verify.hpp"

#include <CLI11.hpp>

#include <spawn.h>
#include <sys/wait.h>

#include <fstream>
#include <iostream>

extern char** environ;

using namespace physolver;
namespace fs = std::filesystem;

namespace {

struct Common {
  std::optional<std::string> config;
  std::vector<std::string> overrides;
  std::optional<std::uint64_t> seed;
  bool paperScale = false;
  std::string out;
  bool quiet = false;
};

void addCommon(CLI::App* cmd, Common& c) {
  cmd->add_option("--config", c.config, "JSON config file")->check(CLI::ExistingFile);
  cmd->add_option("--set", c.overrides, "dotted key=value override (repeatable)");
  cmd->add_option("--seed", c.seed, "random seed");
  cmd->add_flag("--paper-scale", c.paperScale, "use the full network sizes");
  cmd->add_option("--out", c.out, "output directory");
  cmd->add_flag("--quiet", c.quiet, "no progress output");
}

ExperimentConfig resolve(const Common& c, std::vector<std::string> extra = {}) {
  std::vector<std::string> ov = c.overrides;
  if (c.seed) ov.push_back("seed=" + std::to_string(*c.seed));
  if (c.paperScale) ov.push_back("paper_scale=true");
  ov.insert(ov.end(), extra.begin(), extra.end());
  std::optional<fs::path> path;
  if (c.config) path = *c.config;
  return loadConfig(path, ov);
}

fs::path outDir(const Common& c, const ExperimentConfig& cfg, std::string_view tag) {
  if (!c.out.empty()) return c.out;
  return fs::path("runs") / (cfg.preset + "-" + std::string(tag));
}

void printRows(const std::vector<metrics::ErrorRow>& rows) {
  for (const auto& r : rows)
    std::cout << r.pde << ' ' << r.method << ' ' << r.problem << " rel_l2=" << r.relL2 << " rel_linf=" << r.relLinf
              << '\n';
}

int train(const Common& c) {
  const auto cfg = resolve(c);
  const auto dir = outDir(c, cfg, methodName(cfg.method));
  const auto r = report::run(cfg, dir, !c.quiet);
  std::cout << "status " << optim::statusName(r.trained.status) << ", " << r.trained.trace.size()
            << " iterations, loss " << r.trained.finalLoss.grandTotal << ", " << r.trained.trainSeconds << " s\n";
  printRows(r.evaluation.rows);
  std::cout << "wrote " << dir.string() << '\n';
  return 0;
}

int forecast(const Common& c, const std::string& from) {
  const fs::path run(from);
  std::vector<std::string> ov = c.overrides;
  if (c.seed) ov.push_back("seed=" + std::to_string(*c.seed));
  const auto cfg = loadConfig(run / "config.snapshot", ov);
  trainer::Experiment exp(cfg);
  trainer::TrainedModel tm;
  tm.method = cfg.method;
  tm.config = cfg;
  tm.theta = model::readCheckpoint(run / "checkpoint.bin");
  if (!(tm.theta.layout() == exp.model().layout()))
    throw ConfigError("checkpoint layout does not match the model described by config.snapshot");
  const auto ev = report::evaluate(exp, tm);
  const fs::path dir = c.out.empty() ? run / "forecast" : fs::path(c.out);
  report::writeEvaluation(ev, dir, std::string(methodName(cfg.method)));
  printRows(ev.rows);
  std::cout << "wrote " << dir.string() << '\n';
  return 0;
}

int baseline(const Common& c, bool withPinn) {
  auto cfg = resolve(c);
  const auto dir = outDir(c, cfg, "baseline");
  trainer::Experiment exp(cfg);
  auto ev = report::extrapolationBaseline(exp);
  report::writeEvaluation(ev, dir / "extrapolation", "extrapolation");
  auto rows = ev.rows;
  if (withPinn) {
    auto pinnCfg = resolve(c, {"method=pinns"});
    const auto r = report::run(pinnCfg, dir / "pinns", !c.quiet);
    rows.insert(rows.end(), r.evaluation.rows.begin(), r.evaluation.rows.end());
  }
  metrics::emitErrorTable(rows, dir / "errors.csv");
  printRows(rows);
  std::cout << "wrote " << dir.string() << '\n';
  return 0;
}

int spawnTrain(const std::string& self, const std::vector<std::string>& args) {
  std::vector<char*> argv;
  argv.push_back(const_cast<char*>(self.c_str()));
  for (const auto& a : args) argv.push_back(const_cast<char*>(a.c_str()));
  argv.push_back(nullptr);
  pid_t pid = 0;
  if (posix_spawn(&pid, self.c_str(), nullptr, nullptr, argv.data(), environ) != 0) return -1;
  return pid;
}

int bench(const Common& c, const std::vector<std::string>& presets, int jobs) {
  const fs::path dir = c.out.empty() ? fs::path("runs/bench") : fs::path(c.out);
  struct Job {
    std::string preset, method;
    fs::path out;
  };
  std::vector<Job> list;
  for (const auto& p : presets)
    for (const char* m : {"physics-solver", "pinns"}) list.push_back({p, m, dir / (p + "-" + m)});

  std::vector<metrics::ErrorRow> rows;
  for (const auto& p : presets) {
    Common base = c;
    base.config.reset();
    base.overrides.insert(base.overrides.begin(), "preset=" + p);
    trainer::Experiment exp(resolve(base));
    const auto ev = report::extrapolationBaseline(exp);
    rows.insert(rows.end(), ev.rows.begin(), ev.rows.end());
  }

  auto argsFor = [&](const Job& j) {
    std::vector<std::string> a{"train", "--quiet", "--out", j.out.string(), "--set", "preset=" + j.preset,
                               "--set", "method=" + j.method};
    for (const auto& o : c.overrides) a.insert(a.end(), {"--set", o});
    if (c.seed) a.insert(a.end(), {"--seed", std::to_string(*c.seed)});
    if (c.paperScale) a.push_back("--paper-scale");
    return a;
  };
  const std::string self = fs::read_symlink("/proc/self/exe").string();
  std::size_t next = 0;
  int running = 0, failures = 0;
  while (next < list.size() || running > 0) {
    while (running < jobs && next < list.size()) {
      const auto& j = list[next++];
      std::cout << "bench: " << j.preset << " / " << j.method << '\n' << std::flush;
      if (spawnTrain(self, argsFor(j)) < 0) {
        ++failures;
        continue;
      }
      ++running;
    }
    int status = 0;
    if (running > 0 && wait(&status) > 0) {
      --running;
      if (!WIFEXITED(status) || WEXITSTATUS(status) != 0) ++failures;
    }
  }
  for (const auto& j : list) {
    if (!fs::exists(j.out / "errors.csv")) continue;
    const auto r = metrics::readErrorTable(j.out / "errors.csv");
    rows.insert(rows.end(), r.begin(), r.end());
  }
  metrics::emitErrorTable(rows, dir / "errors.csv");
  printRows(rows);
  std::cout << "wrote " << (dir / "errors.csv").string() << '\n';
  if (failures > 0) {
    std::cerr << failures << " bench run(s) failed\n";
    return 2;
  }
  return 0;
}

int runVerify() {
  bool ok = true;
  for (const auto& check : verify::runPropertySuite()) {
    std::cout << (check.passed ? "PASS " : "FAIL ") << check.name << ": " << check.detail << '\n';
    ok = ok && check.passed;
  }
  return ok ? 0 : 3;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"physolver: transformer-enhanced physics-informed solver for time-dependent PDEs"};
  app.require_subcommand(1);
  Common common;
  std::string from;
  bool withPinn = false;
  int jobs = 1;
  std::vector<std::string> presets{"convection", "reaction", "heat", "navier-stokes"};

  auto* trainCmd = app.add_subcommand("train", "train one configuration and evaluate it");
  addCommon(trainCmd, common);
  auto* forecastCmd = app.add_subcommand("forecast", "evaluate a trained run beyond its training interval");
  addCommon(forecastCmd, common);
  forecastCmd->add_option("--from", from, "run directory with config.snapshot and checkpoint.bin")
      ->required()
      ->check(CLI::ExistingDirectory);
  auto* baselineCmd = app.add_subcommand("baseline", "extrapolation baseline (and optionally the PINN)");
  addCommon(baselineCmd, common);
  baselineCmd->add_flag("--pinn", withPinn, "also train the PINN baseline");
  auto* benchCmd = app.add_subcommand("bench", "every benchmark PDE with every method");
  addCommon(benchCmd, common);
  benchCmd->add_option("--presets", presets, "presets to run")->delimiter(',');
  benchCmd->add_option("--jobs", jobs, "parallel training processes")->check(CLI::PositiveNumber);
  app.add_subcommand("verify", "property checks: gradients, reference residuals, Halton, extrapolation, optimizer");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : 1;
  }

  try {
    if (trainCmd->parsed()) return train(common);
    if (forecastCmd->parsed()) return forecast(common, from);
    if (baselineCmd->parsed()) return baseline(common, withPinn);
    if (benchCmd->parsed()) return bench(common, presets, jobs);
    return runVerify();
  } catch (const ConfigError& e) {
    std::cerr << "config error: " << e.what() << '\n';
    return 1;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 2;
  }
}
