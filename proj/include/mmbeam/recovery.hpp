#pragma once

// Beam-management strategies evaluated on the step grid of one drop:
// fixed beam (BF), detection-based recovery (BR-Det), prediction-based
// recovery (BR-Pre) and the ground-truth oracle (GT).

#include <cstdint>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "mmbeam/link.hpp"

namespace mmbeam {

enum class Method { kBf, kBrDet, kBrPre, kGt };

std::string_view method_name(Method m);
Method parse_method(std::string_view name);

enum class Serving : std::uint8_t { kPrimary, kBackup };
enum class RecoveryMode : std::uint8_t { kOnPrimary, kSweeping, kOnBackup, kReturning };

std::string_view serving_name(Serving s);

/// Everything a recovery state machine needs about one UE over one drop.
/// All vectors are indexed by step and share the same length.
struct UeDropSeries {
  int drop_id = 0;
  int ue_id = 0;
  double dt = 0.2;
  std::vector<double> rate_primary;   // r' per step
  std::vector<double> rate_backup;    // r'' per step
  std::vector<double> snr_primary_db;
  std::vector<double> snr_backup_db;
  std::vector<std::uint8_t> gt;       // GT state of the primary link

  int steps() const { return static_cast<int>(rate_primary.size()); }
};

struct DetectorConfig {
  double snr_bar_db = 0.0;
  double bl_max_db = 0.0;
  double th1_db = 0.0;
  double th2_db = 0.0;
  bool armed = true;
};

/// Th1 = mean SNR - 70% BL_max, Th2 = mean SNR - 30% BL_max. Links whose
/// worst-case blockage loss stays below `min_bl_max_db` never trigger.
DetectorConfig make_detector(double snr_bar_db, double bl_max_db, double min_bl_max_db = 3.0);

struct RateRecord {
  int step = 0;
  double t = 0.0;
  double rate_bps = 0.0;
  double snr_db = 0.0;  // SNR of the serving pair
  Serving serving = Serving::kPrimary;
  RecoveryMode mode = RecoveryMode::kOnPrimary;
  std::uint8_t gt = 0;
  std::int8_t pred = -1;  // -1 when the method has no prediction
};

struct RateTrace {
  int drop_id = 0;
  int ue_id = 0;
  Method method = Method::kBf;
  std::vector<RateRecord> records;
};

RateTrace run_bf(const UeDropSeries& ue);

/// Switches to backup at onset + t_d1 + T_sweep + T_HO (rounded up to the
/// step grid) after SNR drops below Th1, and returns once SNR exceeds Th2,
/// delayed by max(0, T_HO - t_d2).
RateTrace run_br_det(const UeDropSeries& ue, const DetectorConfig& det, const NrTiming& timing,
                     int n_tx_beams = 64, int n_rx_beams = 16);

/// `predicted[k]` is the state for step k emitted at step k - eta; -1 marks a
/// step without a prediction (served on primary). An empty span means no
/// predictor exists for this UE's beam and BR-Det is used instead.
RateTrace run_br_pre(const UeDropSeries& ue, std::span<const std::int8_t> predicted, double eta,
                     const DetectorConfig& fallback, const NrTiming& timing, int n_tx_beams = 64,
                     int n_rx_beams = 16);

RateTrace run_gt(const UeDropSeries& ue);

}  // namespace mmbeam
