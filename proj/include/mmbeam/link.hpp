#pragma once

// Per-step link quantities: SNR, rates, interference, sweep timing and
// initial access.

#include <span>
#include <vector>

#include <Eigen/Dense>

#include "mmbeam/geometry.hpp"

namespace mmbeam {

struct NrTiming {
  double t_ss = 0.020;
  int l_ssb = 64;
  double tti = 0.000125;
  double t_ho = 0.050;
  double dt = 0.200;
  double drop_duration = 40.0;

  int steps_per_drop() const;
  void validate() const;
};

struct LinkBudget {
  double tx_power_dbm = 20.0;
  double bandwidth_hz = 396e6;
  double noise_psd_dbm_hz = -174.0;
  double noise_figure_db = 10.0;
  // Noise floor of the narrowband beam-quality measurement (RSRP reports).
  double rsrp_noise_dbm = -122.0;

  double noise_power_dbm() const;
  double noise_power_mw() const;
  double tx_power_mw() const;
};

inline constexpr double kSnrDisplayFloorDb = -60.0;

double db_to_linear(double db);
double linear_to_db(double lin);

/// P_b |b_rx^T H b_tx|^2 / sigma^2 in dB. A zero channel returns -infinity;
/// use display_snr_db for printing.
double effective_snr_db(const Eigen::MatrixXcd& h, const Eigen::VectorXcd& tx_beam,
                        const Eigen::VectorXcd& rx_beam, const LinkBudget& budget);

/// Same quantity from an already beamformed complex gain b_rx^T H b_tx.
double snr_db_from_gain(cplx gain, const LinkBudget& budget);

double display_snr_db(double snr_db);

/// RSRP that maps onto `snr_db` through the measurement noise floor.
double rsrp_dbm_from_snr(double snr_db, const LinkBudget& budget);
double snr_db_from_rsrp(double rsrp_dbm, const LinkBudget& budget);

/// Time to sweep n_tx x n_rx beam pairs over SS burst sets plus the average
/// wait for the next burst set.
double t_sweep(int n_tx, int n_rx, const NrTiming& timing);

struct SnrSample {
  int beam_id = 0;
  double t = 0.0;
  double snr_db = 0.0;
  double rsrp_dbm = 0.0;
};

struct Association {
  int ue_id = 0;
  int primary_bs = -1;
  int primary_tx_beam = 0;
  int primary_rx_beam = 0;
  int secondary_bs = -1;
  int backup_tx_beam = 0;
  int backup_rx_beam = 0;
  int k_primary = 1;    // UEs sharing the primary BS
  int k_secondary = 1;  // UEs sharing the secondary BS
};

/// RSRP table of one BS as seen by a UE: rows are Tx beam ids - 1, columns Rx
/// beam ids - 1.
using RsrpTable = Eigen::MatrixXd;

/// Primary = best (bs, tx, rx) triple; secondary = best triple on another BS.
/// Ties go to the lowest (bs, tx, rx) index.
Association initial_access(int ue_id, std::span<const RsrpTable> rsrp_per_bs);

/// (BW / K) log2(1 + P_b |g|^2 / (I + sigma^2)).
double link_rate_bps(cplx gain, double interference_mw, int users_sharing, const LinkBudget& budget);

/// Rate on the primary pair from a beamformed gain.
double rate_primary(cplx gain, const Association& assoc, double interference_mw, const LinkBudget& budget);

/// Rate on the backup pair towards the secondary BS.
double rate_backup(cplx gain, const Association& assoc, double interference_mw, const LinkBudget& budget);

struct InterferenceTerm {
  int bs = -1;
  cplx gain;  // b_rx^T H_{bs,ue} b_hat_tx with the interferer's scheduled beam
};

/// Sum of P_b |gain|^2 over all active interferers other than `serving_bs`.
double interference_mw(int serving_bs, std::span<const InterferenceTerm> active, const LinkBudget& budget);

}  // namespace mmbeam
