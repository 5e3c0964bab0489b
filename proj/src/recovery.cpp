#include "mmbeam/recovery.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace mmbeam {

std::string_view method_name(Method m) {
  switch (m) {
    case Method::kBf: return "BF";
    case Method::kBrDet: return "BR-Det";
    case Method::kBrPre: return "BR-Pre";
    case Method::kGt: return "GT";
  }
  return "?";
}

Method parse_method(std::string_view name) {
  if (name == "BF" || name == "bf") return Method::kBf;
  if (name == "BR-Det" || name == "br-det" || name == "brdet") return Method::kBrDet;
  if (name == "BR-Pre" || name == "br-pre" || name == "brpre") return Method::kBrPre;
  if (name == "GT" || name == "gt") return Method::kGt;
  throw std::invalid_argument("unknown method: " + std::string(name));
}

std::string_view serving_name(Serving s) { return s == Serving::kPrimary ? "primary" : "backup"; }

DetectorConfig make_detector(double snr_bar_db, double bl_max_db, double min_bl_max_db) {
  DetectorConfig d;
  d.snr_bar_db = snr_bar_db;
  d.bl_max_db = bl_max_db;
  d.th1_db = snr_bar_db - 0.7 * bl_max_db;
  d.th2_db = snr_bar_db - 0.3 * bl_max_db;
  d.armed = bl_max_db >= min_bl_max_db;
  return d;
}

namespace {

RateRecord make_record(const UeDropSeries& ue, int k, Serving s, RecoveryMode mode) {
  RateRecord r;
  r.step = k;
  r.t = k * ue.dt;
  r.serving = s;
  r.mode = mode;
  const auto i = static_cast<std::size_t>(k);
  r.rate_bps = s == Serving::kPrimary ? ue.rate_primary[i] : ue.rate_backup[i];
  r.snr_db = s == Serving::kPrimary ? ue.snr_primary_db[i] : ue.snr_backup_db[i];
  r.gt = ue.gt[i];
  return r;
}

void check_lengths(const UeDropSeries& ue) {
  const auto n = ue.rate_primary.size();
  if (ue.rate_backup.size() != n || ue.snr_primary_db.size() != n || ue.snr_backup_db.size() != n ||
      ue.gt.size() != n) {
    throw std::invalid_argument("UE drop series have inconsistent lengths");
  }
}

// First step whose start time is at or after `t`.
int step_at_or_after(double t, double dt) { return static_cast<int>(std::ceil(t / dt - 1e-9)); }

RateTrace trace_from_states(const UeDropSeries& ue, Method m, std::span<const std::int8_t> states) {
  RateTrace tr{ue.drop_id, ue.ue_id, m, {}};
  tr.records.reserve(static_cast<std::size_t>(ue.steps()));
  for (int k = 0; k < ue.steps(); ++k) {
    const std::int8_t s = states[static_cast<std::size_t>(k)];
    const Serving serving = s == 1 ? Serving::kBackup : Serving::kPrimary;
    RateRecord r = make_record(ue, k, serving,
                               serving == Serving::kBackup ? RecoveryMode::kOnBackup : RecoveryMode::kOnPrimary);
    r.pred = s;
    tr.records.push_back(r);
  }
  return tr;
}

}  // namespace

RateTrace run_bf(const UeDropSeries& ue) {
  check_lengths(ue);
  RateTrace tr{ue.drop_id, ue.ue_id, Method::kBf, {}};
  tr.records.reserve(static_cast<std::size_t>(ue.steps()));
  for (int k = 0; k < ue.steps(); ++k) tr.records.push_back(make_record(ue, k, Serving::kPrimary, RecoveryMode::kOnPrimary));
  return tr;
}

RateTrace run_br_det(const UeDropSeries& ue, const DetectorConfig& det, const NrTiming& timing, int n_tx_beams,
                     int n_rx_beams) {
  check_lengths(ue);
  const double sweep = t_sweep(n_tx_beams, n_rx_beams, timing);
  const double dt = ue.dt;

  RateTrace tr{ue.drop_id, ue.ue_id, Method::kBrDet, {}};
  tr.records.reserve(static_cast<std::size_t>(ue.steps()));

  RecoveryMode mode = RecoveryMode::kOnPrimary;
  int switch_step = 0;
  int return_step = 0;
  for (int k = 0; k < ue.steps(); ++k) {
    const auto i = static_cast<std::size_t>(k);
    const double t = k * dt;
    Serving serving = Serving::kPrimary;
    switch (mode) {
      case RecoveryMode::kOnPrimary:
        if (det.armed && ue.snr_primary_db[i] < det.th1_db) {
          // Onset of the GT blockage run containing this step; a detection
          // with no ongoing blockage has t_d1 = 0.
          int onset = k;
          if (ue.gt[i]) {
            while (onset > 0 && ue.gt[static_cast<std::size_t>(onset - 1)]) --onset;
          }
          const double t_bar = onset * dt;
          const double t_d1 = t - t_bar;
          switch_step = step_at_or_after(t_bar + t_d1 + sweep + timing.t_ho, dt);
          mode = RecoveryMode::kSweeping;
        }
        break;
      case RecoveryMode::kSweeping:
        if (k >= switch_step) {
          mode = RecoveryMode::kOnBackup;
          serving = Serving::kBackup;
        }
        break;
      case RecoveryMode::kOnBackup:
        serving = Serving::kBackup;
        if (ue.snr_primary_db[i] > det.th2_db) {
          // Start of the clear run containing this step (t_d2 = 0 while the
          // GT still reports a blockage).
          int end = k;
          if (!ue.gt[i]) {
            while (end > 0 && !ue.gt[static_cast<std::size_t>(end - 1)]) --end;
          }
          const double t_d2 = t - end * dt;
          const double beta2 = std::max(0.0, timing.t_ho - t_d2);
          return_step = step_at_or_after(t + beta2, dt);
          if (return_step <= k) {
            mode = RecoveryMode::kOnPrimary;
            serving = Serving::kPrimary;
          } else {
            mode = RecoveryMode::kReturning;
          }
        }
        break;
      case RecoveryMode::kReturning:
        serving = Serving::kBackup;
        if (k >= return_step) {
          mode = RecoveryMode::kOnPrimary;
          serving = Serving::kPrimary;
        }
        break;
    }
    tr.records.push_back(make_record(ue, k, serving, mode));
  }
  return tr;
}

RateTrace run_br_pre(const UeDropSeries& ue, std::span<const std::int8_t> predicted, double eta,
                     const DetectorConfig& fallback, const NrTiming& timing, int n_tx_beams, int n_rx_beams) {
  check_lengths(ue);
  if (eta < t_sweep(n_tx_beams, n_rx_beams, timing) + timing.t_ho) {
    throw std::invalid_argument("prediction window must cover the beam sweep and handover time");
  }
  if (predicted.empty()) {
    RateTrace tr = run_br_det(ue, fallback, timing, n_tx_beams, n_rx_beams);
    tr.method = Method::kBrPre;
    return tr;
  }
  if (static_cast<int>(predicted.size()) != ue.steps()) {
    throw std::invalid_argument("prediction series length does not match the drop");
  }
  return trace_from_states(ue, Method::kBrPre, predicted);
}

RateTrace run_gt(const UeDropSeries& ue) {
  check_lengths(ue);
  std::vector<std::int8_t> states(ue.gt.begin(), ue.gt.end());
  return trace_from_states(ue, Method::kGt, states);
}

}  // namespace mmbeam
