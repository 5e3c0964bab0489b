#include <filesystem>
#include <fstream>
#include <map>

#include "doctest.h"

#include "mmbeam/pipeline.hpp"

using namespace mmbeam;
namespace fs = std::filesystem;

namespace {

ScenarioConfig small_config() {
  ScenarioConfig c = ScenarioConfig::desk();
  c.n_ues = 12;
  c.n_clusters = 2;
  c.n_subpaths = 2;
  c.eval_drops = 1;
  c.speeds = {1.0};
  return c;
}

fs::path fresh_dir(const std::string& name) {
  const fs::path p = fs::temp_directory_path() / ("mmbeam_harness_" + name);
  fs::remove_all(p);
  fs::create_directories(p);
  return p;
}

bool same_drop(const DropResult& a, const DropResult& b) {
  if (a.ues.size() != b.ues.size()) return false;
  for (std::size_t k = 0; k < a.ues.size(); ++k) {
    if (a.ues[k].rate_primary != b.ues[k].rate_primary) return false;
    if (a.ues[k].snr_backup_db != b.ues[k].snr_backup_db) return false;
    if (a.ues[k].gt != b.ues[k].gt) return false;
  }
  return a.traces.snr == b.traces.snr;
}

}  // namespace

TEST_CASE("percentile interpolates between closest ranks") {
  CHECK(percentile({1.0, 2.0, 3.0, 4.0}, 50.0) == doctest::Approx(2.5));
  CHECK(percentile({1.0, 2.0, 3.0, 4.0}, 25.0) == doctest::Approx(1.75));
  CHECK(percentile({7.0}, 75.0) == 7.0);
  CHECK_THROWS(percentile({}, 50.0));
}

TEST_CASE("report marks empty buckets absent and adds the gain row") {
  RateBuckets b;
  b[{2.0, "blocked", "BR-Pre"}] = {4.0, 2.0, 6.0};
  b[{2.0, "blocked", "BR-Det"}] = {1.0, 2.0, 3.0};
  b[{2.0, "non-blocked", "BF"}] = {};
  const auto rows = report(b, {50.0});
  bool saw_absent = false, saw_gain = false;
  for (const auto& r : rows) {
    if (r.method == "BF") {
      saw_absent = !r.values[0].has_value();
      CHECK(r.samples == 0);
    }
    if (r.method == "BR-Pre/BR-Det") {
      saw_gain = true;
      CHECK(*r.values[0] == doctest::Approx(100.0));
      CHECK(r.filter == "blocked");
    }
  }
  CHECK(saw_absent);
  CHECK(saw_gain);
}

TEST_CASE("config hash is stable and tracks every field") {
  const ScenarioConfig a = ScenarioConfig::desk();
  CHECK(config_hash(a) == config_hash(ScenarioConfig::desk()));
  CHECK(config_hash(a).size() == 16u);
  ScenarioConfig b = a;
  b.blocker_width = 2.5;
  CHECK(config_hash(a) != config_hash(b));
  CHECK(config_hash(ScenarioConfig::desk()) != config_hash(ScenarioConfig::full()));
}

TEST_CASE("JSON overrides apply on top of the scale preset") {
  const auto c = config_from_json(nlohmann::json{{"n_ues", 30}, {"blocker", {{"width", 1.0}}}});
  CHECK(c.n_ues == 30);
  CHECK(c.blocker_width == 1.0);
  CHECK(c.blocker_height == 3.0);
  CHECK(c.dataset_drops == ScenarioConfig::desk().dataset_drops);
  const auto p = config_from_json(nlohmann::json{{"scale", "full"}});
  CHECK(p.dataset_drops == ScenarioConfig::full().dataset_drops);
  CHECK(config_from_json(to_json(p)).dataset_drops == p.dataset_drops);
}

TEST_CASE("invalid configurations are rejected") {
  CHECK_THROWS_AS(config_from_json(nlohmann::json{{"scale", "huge"}}), ConfigError);
  CHECK_THROWS_AS(config_from_json(nlohmann::json{{"eta_s", 0.2}}), ConfigError);
  CHECK_THROWS_AS(config_from_json(nlohmann::json{{"n_ues", 0}}), ConfigError);
  CHECK_THROWS_AS(config_from_json(nlohmann::json{{"focus_bs", 12}}), ConfigError);
  CHECK_THROWS_AS(config_from_json(nlohmann::json{{"n_ues", "many"}}), ConfigError);
}

TEST_CASE("stream generators are independent per drop and stream") {
  Rng a = stream_rng(42, 1, 2), b = stream_rng(42, 1, 2), c = stream_rng(42, 2, 2), d = stream_rng(42, 1, 3);
  const auto x = a();
  CHECK(x == b());
  CHECK(x != c());
  CHECK(x != d());
  CHECK(eval_drop_id(1.0, 3) != eval_drop_id(2.0, 3));
  CHECK(eval_drop_id(1.0, 0) > 1000);
}

TEST_CASE("a drop spans 200 steps with consistent series") {
  const Scenario sc = build_scenario(small_config(), 7);
  const DropResult d = run_drop(sc, 0, 2.0);
  CHECK(sc.cfg.timing.steps_per_drop() == 200);
  REQUIRE(d.ues.size() == 12u);
  for (const auto& u : d.ues) {
    CHECK(u.steps() == 200);
    CHECK(u.gt.size() == 200u);
  }
  CHECK(d.traces.steps() == 200);
  CHECK(d.traces.beams() == sc.cfg.total_beams());
}

TEST_CASE("drops are reproducible and independent of evaluation order") {
  const Scenario sc = build_scenario(small_config(), 11);
  const DropResult first = run_drop(sc, 5, 1.0);
  run_drop(sc, 3, 2.0);
  const DropResult again = run_drop(sc, 5, 1.0);
  CHECK(same_drop(first, again));
  const DropResult other = run_drop(sc, 6, 1.0);
  CHECK_FALSE(same_drop(first, other));
}

TEST_CASE("users sharing a BS split its bandwidth") {
  const Scenario sc = build_scenario(small_config(), 13);
  const DropResult d = run_drop(sc, 0, 1.0);
  std::map<int, int> per_bs;
  for (const auto& a : d.assoc) ++per_bs[a.primary_bs];
  for (const auto& a : d.assoc) {
    CHECK(a.k_primary == per_bs[a.primary_bs]);
    CHECK(a.k_secondary == per_bs[a.secondary_bs] + 1);
    CHECK(a.secondary_bs != a.primary_bs);
  }
}

TEST_CASE("CSV headers carry mode, seed and config hash") {
  RunContext ctx;
  ctx.cfg = small_config();
  ctx.seed = 9;
  CHECK(ctx.header("simulate") == "# mode=simulate seed=9 config_hash=" + config_hash(ctx.cfg));
}

TEST_CASE("models trained for another configuration are a hard error") {
  RunContext ctx;
  ctx.cfg = small_config();
  ctx.seed = 3;
  const fs::path dir = fresh_dir("models");
  DnnModel m;
  m.net = Mlp({2, 2});
  m.mean = Eigen::RowVectorXd::Zero(2);
  m.corr.target = 5;
  m.beam = 5;
  m.config_hash = "0000000000000000";
  m.seed = 3;
  write_model_json(dir / "beam_5.json", m, TrainConfig{});
  CHECK_THROWS(load_models(ctx, dir));
  m.config_hash = ctx.hash();
  write_model_json(dir / "beam_5.json", m, TrainConfig{});
  CHECK(load_models(ctx, dir).size() == 1u);
  ctx.seed = 4;
  CHECK_THROWS(load_models(ctx, dir));
  fs::remove_all(dir);
}

TEST_CASE("evaluating without BR-Pre needs no models") {
  RunContext ctx;
  ctx.cfg = small_config();
  ctx.out = fresh_dir("eval");
  ctx.quiet = true;
  EvalOptions opt;
  opt.methods = {Method::kBf, Method::kGt};
  opt.models = ctx.out / "stale_models";
  fs::create_directories(opt.models);
  DnnModel stale;
  stale.net = Mlp({2, 2});
  stale.mean = Eigen::RowVectorXd::Zero(2);
  stale.config_hash = "0000000000000000";
  write_model_json(opt.models / "beam_0.json", stale, TrainConfig{});
  CHECK_NOTHROW(stage_evaluate(ctx, opt));
  CHECK(fs::exists(ctx.out / "report_percentiles.csv"));
  std::ifstream f(ctx.out / "report_percentiles.csv");
  std::string line;
  std::getline(f, line);
  CHECK(line == ctx.header("evaluate"));
  opt.methods = {Method::kBrPre};
  CHECK_THROWS(stage_evaluate(ctx, opt));
  fs::remove_all(ctx.out);
}
