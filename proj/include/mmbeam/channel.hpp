#pragma once

// Desk-scale 3D geometry-based stochastic channel. Large-scale parameters are
// drawn once per link per drop; sub-path phases are redrawn every step.

#include <random>
#include <span>
#include <vector>

#include <Eigen/Dense>

#include "mmbeam/geometry.hpp"

namespace mmbeam {

using Rng = std::mt19937_64;

struct AngleSpreads {
  double asd_deg = 0.0;  // azimuth spread of departure
  double asa_deg = 0.0;  // azimuth spread of arrival
  double zsd_deg = 0.0;  // zenith spread of departure
  double zsa_deg = 0.0;  // zenith spread of arrival
};

struct LargeScaleParams {
  double pathloss_db = 0.0;
  double shadow_fading_db = 0.0;
  double rician_k_linear = 1.0;
  bool los = true;
  double delay_spread_s = 0.0;
  AngleSpreads spreads;

  double distance_3d = 0.0;
  double distance_2d = 0.0;
  double wavelength_m = kSpeedOfLight / 28e9;
  Eigen::Vector3d los_departure = Eigen::Vector3d::UnitX();  // tx -> rx
  Eigen::Vector3d los_arrival = -Eigen::Vector3d::UnitX();   // rx -> tx

  /// Slow channel gain sqrt(10^(-(PL + SF) / 10)).
  double rho() const;
};

struct SubPath {
  double power = 0.0;  // linear, sums to 1 over the set
  double delay_s = 0.0;
  double aod_azimuth = 0.0;  // global frame, radians
  double aod_elevation = 0.0;
  double aoa_azimuth = 0.0;
  double aoa_elevation = 0.0;
  double phase = 0.0;
};

struct ClusterSet {
  int n_clusters = 0;
  int n_subpaths = 0;
  std::vector<SubPath> paths;  // cluster-major: index = cluster * n_subpaths + subpath

  int size() const { return static_cast<int>(paths.size()); }
};

struct ChannelRealization {
  Eigen::MatrixXcd h;  // M_rx x M_tx
  double timestamp = 0.0;
};

struct ChannelModelParams {
  double carrier_hz = 28e9;
  double sf_sigma_los_db = 3.0;
  double sf_sigma_nlos_db = 8.0;
  double k_mean_db = 7.0;
  double k_sigma_db = 4.0;
  double min_distance_m = 0.1;
  double subpath_spread_fraction = 0.2;
  double cluster_shadowing_db = 3.0;
};

/// InH open-office line-of-sight probability for a 2D distance in metres.
double inh_los_probability(double distance_2d);

/// InH pathloss in dB (the NLoS value is floored by the LoS value).
double inh_pathloss_db(double distance_3d, double carrier_hz, bool los);

LargeScaleParams draw_lsps(const Position3D& bs, const Position3D& ue, Rng& rng,
                           const ChannelModelParams& params = {});

ClusterSet draw_ssps(const LargeScaleParams& lsp, int n_clusters, int n_subpaths, Rng& rng,
                     const ChannelModelParams& params = {});

/// Fresh uniform phases for every sub-path.
void redraw_phases(ClusterSet& clusters, Rng& rng);

/// One propagation ray with everything that stays fixed within a drop.
struct Ray {
  double amplitude = 0.0;  // rho * K-factor scaling * field patterns * sqrt(P)
  double fixed_phase = 0.0;
  LocalDirection tx;
  LocalDirection rx;
  Eigen::Vector3d arrival;  // global unit vector pointing from rx towards the incoming ray
  bool los = false;
};

/// Rays of a link: one per sub-path, followed by the LoS ray when lsp.los.
/// The NLoS amplitudes carry sqrt(1/(K+1)) and the LoS ray sqrt(K/(K+1)).
std::vector<Ray> compose_rays(const LargeScaleParams& lsp, const ClusterSet& clusters,
                              const UpaConfig& tx_cfg, const UpaConfig& rx_cfg);

/// Number of blockage-loss entries channel_matrix expects.
inline int ray_count(const ClusterSet& clusters) { return clusters.size() + 1; }

/// Narrowband channel matrix. `blockage_loss_db` has one entry per sub-path
/// followed by one for the LoS ray (ignored when the link is NLoS).
ChannelRealization channel_matrix(const LargeScaleParams& lsp, const ClusterSet& clusters,
                                  const UpaConfig& tx_cfg, const UpaConfig& rx_cfg,
                                  std::span<const double> blockage_loss_db, double t);

/// Complex ray coefficient for the current phase and blockage loss.
cplx ray_coefficient(const Ray& ray, double phase, double blockage_loss_db);

}  // namespace mmbeam
