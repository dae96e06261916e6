#include <doctest.h>

#include "physolver/config.hpp"
#include "physolver/errors.hpp"

#include <fstream>

using namespace physolver;

namespace {

std::filesystem::path writeTemp(const std::string& name, const std::string& body) {
  auto path = std::filesystem::temp_directory_path() / name;
  std::ofstream(path) << body;
  return path;
}

}  // namespace

TEST_CASE("every preset validates") {
  for (const auto& name : presetNames()) {
    CAPTURE(name);
    const auto cfg = preset(name);
    CHECK_NOTHROW(cfg.validate());
    CHECK(cfg.preset == name);
  }
  CHECK_THROWS_AS(preset("wave"), ConfigError);
}

TEST_CASE("heat preset grid") {
  const auto cfg = preset("heat");
  CHECK(cfg.pde == pde::PdeKind::Heat);
  CHECK(cfg.grid.tCount == 5);
  CHECK(cfg.grid.xCount == 101);
  CHECK(cfg.data.nData == 2);
  CHECK(cfg.ipsgg.k == 5);
}

TEST_CASE("file config selects its preset and keeps other defaults") {
  const auto path = writeTemp("physolver_cfg_a.json", R"({"preset": "reaction", "seed": 7, "loss": {"w_b": 3}})");
  const auto cfg = loadConfig(path);
  CHECK(cfg.pde == pde::PdeKind::Reaction);
  CHECK(cfg.seed == 7);
  CHECK(cfg.weights.wb == 3.0);
  CHECK(cfg.grid.tCount == preset("reaction").grid.tCount);
}

TEST_CASE("unknown keys are rejected with the known-key list") {
  const auto path = writeTemp("physolver_cfg_b.json", R"({"preset": "heat", "loss": {"w_q": 1}})");
  try {
    loadConfig(path);
    FAIL("expected a config error");
  } catch (const ConfigError& e) {
    const std::string msg = e.what();
    CHECK(msg.find("loss.w_q") != std::string::npos);
    for (const auto& key : knownKeys()) CHECK(msg.find(key) != std::string::npos);
  }
  CHECK_THROWS_AS(loadConfig(std::nullopt, {"grid.x_cnt=3"}), ConfigError);
  CHECK_THROWS_AS(loadConfig(std::nullopt, {"no-equals-sign"}), ConfigError);
}

TEST_CASE("override w_r=2 doubles the snapshot value") {
  const auto base = loadConfig(std::nullopt, {"preset=heat"});
  const auto cfg = loadConfig(std::nullopt, {"preset=heat", "loss.w_r=2"});
  CHECK(toJson(cfg)["loss"]["w_r"].get<double>() == 2.0 * toJson(base)["loss"]["w_r"].get<double>());
}

TEST_CASE("overrides are typed by the existing leaf") {
  const auto cfg = loadConfig(std::nullopt, {"preset=heat", "model.output_hidden=16,8", "ipsgg.expand_anchors=true",
                                             "lbfgs.max_iterations=12", "method=pinns"});
  CHECK(cfg.solver.outputHidden == std::vector<int>{16, 8});
  CHECK(cfg.expandAnchors);
  CHECK(cfg.lbfgs.maxIterations == 12);
  CHECK(cfg.method == Method::Pinns);
  CHECK_THROWS_AS(loadConfig(std::nullopt, {"lbfgs.max_iterations=many"}), ConfigError);
  CHECK_THROWS_AS(loadConfig(std::nullopt, {"method=lstm"}), ConfigError);
}

TEST_CASE("snapshot round trip reproduces the config") {
  const auto cfg = loadConfig(std::nullopt, {"preset=navier-stokes", "seed=11", "ipsgg.dt=0.003", "paper_scale=true"});
  const auto again = fromJson(toJson(cfg));
  CHECK(toJson(again) == toJson(cfg));
  const auto path = writeTemp("physolver_cfg_c.json", toJson(cfg).dump());
  CHECK(toJson(loadConfig(path)) == toJson(cfg));
}

TEST_CASE("invalid values are config errors") {
  CHECK_THROWS_AS(loadConfig(std::nullopt, {"preset=heat", "grid.train_t_count=9"}), ConfigError);
  CHECK_THROWS_AS(loadConfig(std::nullopt, {"preset=heat", "ipsgg.k=0"}), ConfigError);
  CHECK_THROWS_AS(loadConfig(std::nullopt, {"preset=heat", "model.heads=3"}), ConfigError);
  CHECK_THROWS_AS(loadConfig(std::nullopt, {"preset=heat", "loss.w_r=-1"}), ConfigError);
}

TEST_CASE("paper_scale widens the networks") {
  auto cfg = preset("heat");
  cfg.paperScale = true;
  CHECK(cfg.solverSpec().ffWidth == 512);
  CHECK(cfg.pinnSpec().width == 512);
}

TEST_CASE("data system usage") {
  auto cfg = preset("heat");
  CHECK(cfg.usesData());
  cfg.weights.lambdaData = 0.0;
  CHECK_FALSE(cfg.usesData());
  cfg = preset("heat");
  cfg.data.nData = 0;
  CHECK_FALSE(cfg.usesData());
  cfg = preset("heat");
  cfg.method = Method::Pinns;
  CHECK_FALSE(cfg.usesData());
}

TEST_CASE("only the physics solver uses the data system") {
  CHECK(loadConfig(std::nullopt, {"preset=heat"}).usesData());
  CHECK_FALSE(loadConfig(std::nullopt, {"preset=heat", "method=pinns"}).usesData());
  CHECK_FALSE(loadConfig(std::nullopt, {"preset=heat", "method=pinnsformer-ablation"}).usesData());
  CHECK_FALSE(loadConfig(std::nullopt, {"preset=heat", "loss.lambda_data=0"}).usesData());
  CHECK_FALSE(loadConfig(std::nullopt, {"preset=heat", "data.n_data=0"}).usesData());
}
