// Command-line driver for the beam-management pipeline.

#include <cstdint>
#include <fstream>
#include <iostream>
#include <sstream>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "json.hpp"

#include "mmbeam/pipeline.hpp"

namespace {

std::vector<std::string> split_list(const std::string& s) {
  std::vector<std::string> out;
  std::stringstream ss(s);
  std::string item;
  while (std::getline(ss, item, ',')) {
    if (!item.empty()) out.push_back(item);
  }
  return out;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Indoor mmWave beam-management simulator"};
  app.require_subcommand(1);
  app.fallthrough();

  std::string config_path;
  std::uint64_t seed = 42;
  std::string out_dir = "out";
  std::string speed = "both";
  int drops = -1;
  std::string methods = "BF,BR-Det,BR-Pre,GT";
  std::string models_dir;
  bool desk = false;
  bool full = false;
  bool quiet = false;

  app.add_option("--config", config_path, "JSON scenario file")->check(CLI::ExistingFile);
  app.add_option("--seed", seed, "master seed")->envname("MMBEAM_SEED");
  app.add_option("--out", out_dir, "output directory")->envname("MMBEAM_OUT");
  app.add_option("--speed", speed, "blocker speed: 1, 2 or both")->check(CLI::IsMember({"1", "2", "both"}));
  app.add_option("--drops", drops, "number of drops (dataset drops for simulate, per speed for evaluate)")
      ->check(CLI::PositiveNumber);
  app.add_option("--methods", methods, "comma-separated methods: BF,BR-Det,BR-Pre,GT");
  app.add_option("--models", models_dir, "directory of trained models (default <out>/models)");
  auto* desk_flag = app.add_flag("--desk-scale", desk, "reduced drop counts (default)");
  app.add_flag("--full-scale", full, "full drop counts and predictors on every BS")->excludes(desk_flag);
  app.add_flag("-q,--quiet", quiet, "no progress output");

  auto* simulate = app.add_subcommand("simulate", "run dataset drops and write per-beam traces");
  auto* select = app.add_subcommand("select-beams", "pick correlated beams for every candidate target");
  auto* dataset = app.add_subcommand("build-dataset", "write per-beam training samples");
  auto* train = app.add_subcommand("train", "train one predictor per target beam");
  auto* evaluate = app.add_subcommand("evaluate", "run evaluation drops and write rate reports");
  auto* compare = app.add_subcommand("compare", "run every stage in order");

  CLI11_PARSE(app, argc, argv);

  try {
    nlohmann::json cfg_json = nlohmann::json::object();
    if (!config_path.empty()) {
      std::ifstream f(config_path);
      cfg_json = nlohmann::json::parse(f);
    }
    if (full) cfg_json["scale"] = "full";
    if (desk) cfg_json["scale"] = "desk";

    mmbeam::RunContext ctx;
    ctx.cfg = mmbeam::config_from_json(cfg_json);
    ctx.seed = seed;
    ctx.out = out_dir;
    ctx.quiet = quiet;
    std::filesystem::create_directories(ctx.out);

    mmbeam::EvalOptions opt;
    if (speed == "1") opt.speeds = {1.0};
    if (speed == "2") opt.speeds = {2.0};
    opt.methods.clear();
    for (const auto& m : split_list(methods)) opt.methods.push_back(mmbeam::parse_method(m));
    if (drops > 0) opt.drops = drops;
    if (!models_dir.empty()) opt.models = models_dir;
    const std::optional<int> sim_drops = drops > 0 ? std::optional<int>(drops) : std::nullopt;

    if (simulate->parsed()) mmbeam::stage_simulate(ctx, sim_drops);
    if (select->parsed()) mmbeam::stage_select_beams(ctx);
    if (dataset->parsed()) mmbeam::stage_build_dataset(ctx);
    if (train->parsed()) mmbeam::stage_train(ctx);
    if (evaluate->parsed()) mmbeam::stage_evaluate(ctx, opt);
    if (compare->parsed()) mmbeam::stage_compare(ctx, opt);
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 1;
  }
  return 0;
}
