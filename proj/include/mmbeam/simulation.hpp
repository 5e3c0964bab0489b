#pragma once

// Indoor multi-cell scenario and the per-drop simulation loop.

#include <cstdint>
#include <string>
#include <vector>

#include "json.hpp"

#include "mmbeam/blockage.hpp"
#include "mmbeam/channel.hpp"
#include "mmbeam/geometry.hpp"
#include "mmbeam/link.hpp"
#include "mmbeam/prediction.hpp"
#include "mmbeam/recovery.hpp"

namespace mmbeam {

struct ScenarioConfig {
  std::string scale = "desk";

  double room_x = 50.0;
  double room_y = 40.0;
  double room_z = 3.0;
  double isd = 20.0;
  std::vector<double> sector_boresights_deg = {30.0, 150.0, 270.0};
  double bs_height = 3.0;
  double bs_downtilt_deg = 20.0;
  int n_ues = 240;
  double ue_height = 1.0;
  double ue_x_half = 25.0;
  double ue_y_half = 20.0;

  int n_clusters = 8;
  int n_subpaths = 4;
  ChannelModelParams channel;
  LinkBudget budget;
  NrTiming timing;

  double blocker_width = 2.0;
  double blocker_height = 3.0;
  Trajectory trajectory;

  double eta_s = 0.4;
  double eps_s = 2.0;
  int correlated_beams = 5;
  double min_bl_max_db = 3.0;

  int focus_bs = 2;                   // 0-based; reported as BS-3
  std::vector<int> train_bs = {2};    // BSs whose beams get predictors
  int dataset_drops = 12;
  int eval_drops = 10;                // per speed
  std::vector<double> speeds = {1.0, 2.0};

  TrainConfig train;

  static ScenarioConfig desk();
  static ScenarioConfig full();

  int n_sites() const { return 4; }
  int n_bs() const { return n_sites() * static_cast<int>(sector_boresights_deg.size()); }
  int bs_beams() const { return 64; }
  int ue_beams() const { return 16; }
  int total_beams() const { return n_bs() * bs_beams(); }
  WindowSpec window() const;
  void validate() const;
};

nlohmann::json to_json(const ScenarioConfig& cfg);
/// Starts from the named scale preset (key "scale", default desk) and applies
/// every other key present in `j`.
ScenarioConfig config_from_json(const nlohmann::json& j);

/// FNV-1a over the canonical JSON dump, as 16 hex digits.
std::string config_hash(const ScenarioConfig& cfg);

std::uint64_t splitmix64(std::uint64_t x);
/// Independent generator for (seed, drop, stream).
Rng stream_rng(std::uint64_t seed, std::uint64_t drop, std::uint64_t stream);

inline int global_beam(int bs, int beam_id) { return bs * 64 + (beam_id - 1); }

struct Scenario {
  ScenarioConfig cfg;
  std::uint64_t seed = 0;
  std::vector<Position3D> bs_pos;
  std::vector<UpaConfig> bs_cfg;
  std::vector<Position3D> ue_pos;
  std::vector<UpaConfig> ue_cfg;
  Codebook bs_codebook;
  Codebook ue_codebook;
};

/// Lays out sites and draws UE positions and orientations from the master
/// seed; they stay fixed for every drop.
Scenario build_scenario(const ScenarioConfig& cfg, std::uint64_t seed);

struct DropResult {
  int drop_id = 0;
  double speed = 1.0;
  std::vector<Association> assoc;
  std::vector<UeDropSeries> ues;
  std::vector<double> snr_clear_mean_db;  // per UE, primary link without blockage
  std::vector<double> bl_max_db;          // per UE, worst blockage loss seen on the primary link
  BeamTraceMatrix traces;
};

DropResult run_drop(const Scenario& sc, int drop_id, double speed);

/// Detector thresholds of one UE derived from its drop statistics.
DetectorConfig detector_for(const DropResult& d, int ue, const ScenarioConfig& cfg);

/// Speed used by dataset drop `i` (speeds alternate).
double dataset_drop_speed(const ScenarioConfig& cfg, int i);
/// Drop id of the i-th evaluation drop at a speed; disjoint from dataset ids.
int eval_drop_id(double speed, int i);

}  // namespace mmbeam
