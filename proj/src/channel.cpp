#include "mmbeam/channel.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <stdexcept>

namespace mmbeam {

double LargeScaleParams::rho() const {
  return std::sqrt(std::pow(10.0, -(pathloss_db + shadow_fading_db) / 10.0));
}

double inh_los_probability(double distance_2d) {
  if (distance_2d <= 5.0) return 1.0;
  if (distance_2d <= 49.0) return std::exp(-(distance_2d - 5.0) / 70.8);
  return std::exp(-(distance_2d - 49.0) / 211.7) * 0.54;
}

double inh_pathloss_db(double distance_3d, double carrier_hz, bool los) {
  const double fc_ghz = carrier_hz / 1e9;
  const double pl_los = 32.4 + 17.3 * std::log10(distance_3d) + 20.0 * std::log10(fc_ghz);
  if (los) return pl_los;
  const double pl_nlos = 38.3 * std::log10(distance_3d) + 17.30 + 24.9 * std::log10(fc_ghz);
  return std::max(pl_los, pl_nlos);
}

namespace {

double lognormal_spread(Rng& rng, double mu, double sigma, double cap) {
  std::normal_distribution<double> n(mu, sigma);
  return std::min(std::pow(10.0, n(rng)), cap);
}

double azimuth_of(const Eigen::Vector3d& u) { return std::atan2(u.y(), u.x()); }
double elevation_of(const Eigen::Vector3d& u) {
  return std::acos(std::clamp(u.z() / u.norm(), -1.0, 1.0));
}

double clamp_elevation(double el) { return std::clamp(el, 1e-6, kPi - 1e-6); }

}  // namespace

LargeScaleParams draw_lsps(const Position3D& bs, const Position3D& ue, Rng& rng,
                           const ChannelModelParams& params) {
  LargeScaleParams lsp;
  Eigen::Vector3d delta = ue - bs;
  if (delta.norm() < params.min_distance_m) {
    delta = delta.norm() > 0.0 ? Eigen::Vector3d(delta.normalized() * params.min_distance_m)
                               : Eigen::Vector3d(params.min_distance_m, 0.0, 0.0);
  }
  lsp.distance_3d = delta.norm();
  lsp.distance_2d = std::max(delta.head<2>().norm(), params.min_distance_m);
  lsp.wavelength_m = kSpeedOfLight / params.carrier_hz;
  lsp.los_departure = delta.normalized();
  lsp.los_arrival = -lsp.los_departure;

  std::uniform_real_distribution<double> u01(0.0, 1.0);
  lsp.los = u01(rng) < inh_los_probability(lsp.distance_2d);
  lsp.pathloss_db = inh_pathloss_db(lsp.distance_3d, params.carrier_hz, lsp.los);

  std::normal_distribution<double> sf(0.0, lsp.los ? params.sf_sigma_los_db : params.sf_sigma_nlos_db);
  lsp.shadow_fading_db = sf(rng);

  std::normal_distribution<double> kdb(params.k_mean_db, params.k_sigma_db);
  lsp.rician_k_linear = std::pow(10.0, kdb(rng) / 10.0);

  const double lf = std::log10(1.0 + params.carrier_hz / 1e9);
  if (lsp.los) {
    lsp.delay_spread_s = std::pow(10.0, std::normal_distribution<double>(-0.01 * lf - 7.692, 0.18)(rng));
    lsp.spreads.asd_deg = lognormal_spread(rng, 1.60, 0.18, 104.0);
    lsp.spreads.asa_deg = lognormal_spread(rng, -0.19 * lf + 1.781, 0.12 * lf + 0.119, 104.0);
    lsp.spreads.zsa_deg = lognormal_spread(rng, -0.26 * lf + 1.44, -0.04 * lf + 0.264, 52.0);
    lsp.spreads.zsd_deg = lognormal_spread(rng, -1.43 * lf + 2.228, 0.13 * lf + 0.30, 52.0);
  } else {
    lsp.delay_spread_s = std::pow(10.0, std::normal_distribution<double>(-0.28 * lf - 7.173, 0.10)(rng));
    lsp.spreads.asd_deg = lognormal_spread(rng, 1.62, 0.25, 104.0);
    lsp.spreads.asa_deg = lognormal_spread(rng, -0.11 * lf + 1.863, 0.12 * lf + 0.059, 104.0);
    lsp.spreads.zsa_deg = lognormal_spread(rng, -0.15 * lf + 1.387, -0.09 * lf + 0.746, 52.0);
    lsp.spreads.zsd_deg = lognormal_spread(rng, 1.08, 0.36, 52.0);
  }
  return lsp;
}

ClusterSet draw_ssps(const LargeScaleParams& lsp, int n_clusters, int n_subpaths, Rng& rng,
                     const ChannelModelParams& params) {
  if (n_clusters < 1 || n_subpaths < 1) throw ConfigError("need at least one cluster and sub-path");

  std::uniform_real_distribution<double> u01(0.0, 1.0);
  std::normal_distribution<double> n01(0.0, 1.0);

  const double r_tau = lsp.los ? 3.6 : 3.0;
  const double ds = lsp.delay_spread_s;

  std::vector<double> delays(static_cast<std::size_t>(n_clusters));
  for (auto& d : delays) d = -r_tau * ds * std::log(std::max(u01(rng), 1e-300));
  std::sort(delays.begin(), delays.end());
  const double first = delays.front();
  for (auto& d : delays) d -= first;

  std::vector<double> powers(delays.size());
  for (std::size_t c = 0; c < delays.size(); ++c) {
    const double decay = ds > 0.0 ? std::exp(-delays[c] * (r_tau - 1.0) / (r_tau * ds)) : 1.0;
    powers[c] = decay * std::pow(10.0, -params.cluster_shadowing_db * n01(rng) / 10.0);
  }
  const double total = std::accumulate(powers.begin(), powers.end(), 0.0);

  const double aod_az = azimuth_of(lsp.los_departure);
  const double aod_el = elevation_of(lsp.los_departure);
  const double aoa_az = azimuth_of(lsp.los_arrival);
  const double aoa_el = elevation_of(lsp.los_arrival);
  const AngleSpreads& s = lsp.spreads;
  const double frac = params.subpath_spread_fraction;

  ClusterSet set;
  set.n_clusters = n_clusters;
  set.n_subpaths = n_subpaths;
  set.paths.reserve(static_cast<std::size_t>(n_clusters * n_subpaths));
  for (int c = 0; c < n_clusters; ++c) {
    const double c_aod_az = aod_az + deg2rad(s.asd_deg) * n01(rng);
    const double c_aod_el = aod_el + deg2rad(s.zsd_deg) * n01(rng);
    const double c_aoa_az = aoa_az + deg2rad(s.asa_deg) * n01(rng);
    const double c_aoa_el = aoa_el + deg2rad(s.zsa_deg) * n01(rng);
    for (int p = 0; p < n_subpaths; ++p) {
      SubPath sp;
      sp.power = powers[static_cast<std::size_t>(c)] / total / n_subpaths;
      sp.delay_s = delays[static_cast<std::size_t>(c)] + p * 0.1 * ds / n_subpaths;
      sp.aod_azimuth = wrap_angle(c_aod_az + frac * deg2rad(s.asd_deg) * n01(rng));
      sp.aod_elevation = clamp_elevation(c_aod_el + frac * deg2rad(s.zsd_deg) * n01(rng));
      sp.aoa_azimuth = wrap_angle(c_aoa_az + frac * deg2rad(s.asa_deg) * n01(rng));
      sp.aoa_elevation = clamp_elevation(c_aoa_el + frac * deg2rad(s.zsa_deg) * n01(rng));
      set.paths.push_back(sp);
    }
  }
  redraw_phases(set, rng);
  return set;
}

void redraw_phases(ClusterSet& clusters, Rng& rng) {
  std::uniform_real_distribution<double> phase(0.0, 2.0 * kPi);
  for (auto& p : clusters.paths) p.phase = phase(rng);
}

std::vector<Ray> compose_rays(const LargeScaleParams& lsp, const ClusterSet& clusters,
                              const UpaConfig& tx_cfg, const UpaConfig& rx_cfg) {
  const ArrayFrame tx_frame(tx_cfg);
  const ArrayFrame rx_frame(rx_cfg);
  const double rho = lsp.rho();
  const double k = lsp.rician_k_linear;
  const double nlos_scale = lsp.los ? std::sqrt(1.0 / (k + 1.0)) : 1.0;

  std::vector<Ray> rays;
  rays.reserve(clusters.paths.size() + 1);
  for (const auto& sp : clusters.paths) {
    Ray r;
    r.tx = tx_frame.to_local(unit_direction(sp.aod_azimuth, sp.aod_elevation));
    r.arrival = unit_direction(sp.aoa_azimuth, sp.aoa_elevation);
    r.rx = rx_frame.to_local(r.arrival);
    r.amplitude = rho * nlos_scale * std::sqrt(sp.power) *
                  element_field_amplitude(tx_cfg, r.tx.azimuth, r.tx.elevation) *
                  element_field_amplitude(rx_cfg, r.rx.azimuth, r.rx.elevation);
    rays.push_back(r);
  }
  if (lsp.los) {
    Ray r;
    r.los = true;
    r.tx = tx_frame.to_local(lsp.los_departure);
    r.arrival = lsp.los_arrival;
    r.rx = rx_frame.to_local(lsp.los_arrival);
    r.fixed_phase = wrap_angle(-2.0 * kPi * lsp.distance_3d / lsp.wavelength_m);
    r.amplitude = rho * std::sqrt(k / (k + 1.0)) *
                  element_field_amplitude(tx_cfg, r.tx.azimuth, r.tx.elevation) *
                  element_field_amplitude(rx_cfg, r.rx.azimuth, r.rx.elevation);
    rays.push_back(r);
  }
  return rays;
}

cplx ray_coefficient(const Ray& ray, double phase, double blockage_loss_db) {
  return ray.amplitude * std::pow(10.0, -blockage_loss_db / 20.0) * std::polar(1.0, phase);
}

ChannelRealization channel_matrix(const LargeScaleParams& lsp, const ClusterSet& clusters,
                                  const UpaConfig& tx_cfg, const UpaConfig& rx_cfg,
                                  std::span<const double> blockage_loss_db, double t) {
  if (static_cast<int>(blockage_loss_db.size()) != ray_count(clusters)) {
    throw std::invalid_argument("blockage loss vector must hold one entry per sub-path plus the LoS ray");
  }
  const auto rays = compose_rays(lsp, clusters, tx_cfg, rx_cfg);

  ChannelRealization out;
  out.timestamp = t;
  out.h = Eigen::MatrixXcd::Zero(rx_cfg.elements(), tx_cfg.elements());
  for (std::size_t i = 0; i < rays.size(); ++i) {
    const Ray& r = rays[i];
    const double phase = r.los ? r.fixed_phase : clusters.paths[i].phase;
    const double bl = r.los ? blockage_loss_db.back() : blockage_loss_db[i];
    const cplx c = ray_coefficient(r, phase, bl);
    if (c == cplx{0.0, 0.0}) continue;
    const Eigen::VectorXcd a_rx = array_response(rx_cfg, r.rx.theta_cos, r.rx.phi_cos);
    const Eigen::VectorXcd a_tx = array_response(tx_cfg, r.tx.theta_cos, r.tx.phi_cos);
    out.h.noalias() += c * a_rx * a_tx.transpose();
  }
  return out;
}

}  // namespace mmbeam
