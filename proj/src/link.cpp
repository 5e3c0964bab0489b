#include "mmbeam/link.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <stdexcept>

namespace mmbeam {

int NrTiming::steps_per_drop() const { return static_cast<int>(std::lround(drop_duration / dt)); }

void NrTiming::validate() const {
  if (!(t_ss > 0.0) || l_ssb < 1 || !(tti > 0.0) || !(t_ho > 0.0) || !(dt > 0.0) || !(drop_duration > 0.0)) {
    throw ConfigError("NR timing constants must be positive");
  }
}

double db_to_linear(double db) { return std::pow(10.0, db / 10.0); }
double linear_to_db(double lin) { return 10.0 * std::log10(lin); }

double LinkBudget::noise_power_dbm() const {
  return noise_psd_dbm_hz + 10.0 * std::log10(bandwidth_hz) + noise_figure_db;
}
double LinkBudget::noise_power_mw() const { return db_to_linear(noise_power_dbm()); }
double LinkBudget::tx_power_mw() const { return db_to_linear(tx_power_dbm); }

double effective_snr_db(const Eigen::MatrixXcd& h, const Eigen::VectorXcd& tx_beam,
                        const Eigen::VectorXcd& rx_beam, const LinkBudget& budget) {
  if (h.rows() != rx_beam.size() || h.cols() != tx_beam.size()) {
    throw std::invalid_argument("beam dimensions do not match the channel matrix");
  }
  const cplx gain = rx_beam.transpose() * h * tx_beam;
  return snr_db_from_gain(gain, budget);
}

double snr_db_from_gain(cplx gain, const LinkBudget& budget) {
  const double power = std::norm(gain);
  if (power == 0.0) return -std::numeric_limits<double>::infinity();
  return budget.tx_power_dbm + linear_to_db(power) - budget.noise_power_dbm();
}

double display_snr_db(double snr_db) { return std::max(snr_db, kSnrDisplayFloorDb); }

double rsrp_dbm_from_snr(double snr_db, const LinkBudget& budget) { return snr_db + budget.rsrp_noise_dbm; }
double snr_db_from_rsrp(double rsrp_dbm, const LinkBudget& budget) { return rsrp_dbm - budget.rsrp_noise_dbm; }

double t_sweep(int n_tx, int n_rx, const NrTiming& timing) {
  if (n_tx < 1 || n_rx < 1) throw std::invalid_argument("t_sweep needs at least one Tx and one Rx beam");
  return timing.t_ss * (static_cast<double>(n_tx) * n_rx / timing.l_ssb) + timing.t_ss / 2.0;
}

namespace {

struct Best {
  int bs = -1, tx = -1, rx = -1;
  double rsrp = -std::numeric_limits<double>::infinity();
};

// Strictly-greater comparison while scanning in index order keeps the lowest
// index triple on ties.
Best best_triple(std::span<const RsrpTable> tables, int skip_bs) {
  Best best;
  for (int b = 0; b < static_cast<int>(tables.size()); ++b) {
    if (b == skip_bs) continue;
    const RsrpTable& t = tables[static_cast<std::size_t>(b)];
    for (int l = 0; l < t.rows(); ++l) {
      for (int q = 0; q < t.cols(); ++q) {
        if (best.bs < 0 || t(l, q) > best.rsrp) best = {b, l, q, t(l, q)};
      }
    }
  }
  return best;
}

}  // namespace

Association initial_access(int ue_id, std::span<const RsrpTable> rsrp_per_bs) {
  if (rsrp_per_bs.size() < 2) throw std::invalid_argument("initial access needs at least two base stations");
  const Best primary = best_triple(rsrp_per_bs, -1);
  const Best secondary = best_triple(rsrp_per_bs, primary.bs);
  Association a;
  a.ue_id = ue_id;
  a.primary_bs = primary.bs;
  a.primary_tx_beam = primary.tx + 1;
  a.primary_rx_beam = primary.rx + 1;
  a.secondary_bs = secondary.bs;
  a.backup_tx_beam = secondary.tx + 1;
  a.backup_rx_beam = secondary.rx + 1;
  return a;
}

double link_rate_bps(cplx gain, double interference, int users_sharing, const LinkBudget& budget) {
  const int k = std::max(users_sharing, 1);
  const double sinr = budget.tx_power_mw() * std::norm(gain) / (interference + budget.noise_power_mw());
  return budget.bandwidth_hz / k * std::log2(1.0 + sinr);
}

double rate_primary(cplx gain, const Association& assoc, double interference, const LinkBudget& budget) {
  return link_rate_bps(gain, interference, assoc.k_primary, budget);
}

double rate_backup(cplx gain, const Association& assoc, double interference, const LinkBudget& budget) {
  return link_rate_bps(gain, interference, assoc.k_secondary, budget);
}

double interference_mw(int serving_bs, std::span<const InterferenceTerm> active, const LinkBudget& budget) {
  double sum = 0.0;
  for (const auto& term : active) {
    if (term.bs == serving_bs) continue;
    sum += budget.tx_power_mw() * std::norm(term.gain);
  }
  return sum;
}

}  // namespace mmbeam
