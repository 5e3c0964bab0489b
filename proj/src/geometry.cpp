#include "mmbeam/geometry.hpp"

#include <algorithm>
#include <cmath>
#include <string>

namespace mmbeam {

double wrap_angle(double rad) {
  double w = std::fmod(rad + kPi, 2.0 * kPi);
  if (w < 0.0) w += 2.0 * kPi;
  return w - kPi;
}

void UpaConfig::validate() const {
  if (m_v < 1 || m_h < 1) throw ConfigError("UPA needs at least one element per axis");
  if (!(element_spacing > 0.0)) throw ConfigError("UPA element spacing must be positive");
  if (!(beamwidth_h_deg > 0.0) || !(beamwidth_v_deg > 0.0))
    throw ConfigError("element beamwidths must be positive");
  if (codebook_size < 1) throw ConfigError("codebook size must be positive");
}

UpaConfig UpaConfig::base_station(double boresight_deg) {
  UpaConfig cfg;
  cfg.m_v = 8;
  cfg.m_h = 8;
  cfg.boresight_azimuth_deg = boresight_deg;
  cfg.downtilt_deg = 20.0;
  cfg.codebook_size = 64;
  cfg.codebook_az_span_deg = 120.0;
  cfg.codebook_el_min_deg = 72.0;
  cfg.codebook_el_max_deg = 120.0;
  return cfg;
}

UpaConfig UpaConfig::user_equipment(double boresight_deg) {
  UpaConfig cfg;
  cfg.m_v = 4;
  cfg.m_h = 4;
  cfg.boresight_azimuth_deg = boresight_deg;
  cfg.downtilt_deg = 0.0;
  cfg.codebook_size = 16;
  cfg.codebook_az_span_deg = 180.0;
  cfg.codebook_el_min_deg = 50.0;
  cfg.codebook_el_max_deg = 90.0;
  return cfg;
}

Eigen::Vector3d unit_direction(double azimuth, double elevation) {
  const double s = std::sin(elevation);
  return {s * std::cos(azimuth), s * std::sin(azimuth), std::cos(elevation)};
}

ArrayFrame::ArrayFrame(const UpaConfig& cfg) {
  const double psi = deg2rad(cfg.boresight_azimuth_deg);
  const double tilt = deg2rad(cfg.downtilt_deg);
  // Rz(psi) * Ry(tilt): a positive tilt pushes the boresight below the horizon.
  Eigen::Matrix3d rz;
  rz << std::cos(psi), -std::sin(psi), 0.0, std::sin(psi), std::cos(psi), 0.0, 0.0, 0.0, 1.0;
  Eigen::Matrix3d ry;
  ry << std::cos(tilt), 0.0, std::sin(tilt), 0.0, 1.0, 0.0, -std::sin(tilt), 0.0, std::cos(tilt);
  rot_ = rz * ry;
}

LocalDirection ArrayFrame::to_local(const Eigen::Vector3d& dir) const {
  const Eigen::Vector3d u = (rot_.transpose() * dir).normalized();
  LocalDirection out{};
  out.azimuth = std::atan2(u.y(), u.x());
  out.elevation = std::acos(std::clamp(u.z(), -1.0, 1.0));
  out.theta_cos = u.y();
  out.phi_cos = u.z();
  return out;
}

Eigen::Vector3d ArrayFrame::to_global(double azimuth, double elevation) const {
  return rot_ * unit_direction(azimuth, elevation);
}

Eigen::VectorXcd steering_vector(const UpaConfig& cfg, double azimuth, double elevation) {
  const double theta = std::sin(elevation) * std::sin(azimuth);
  const double phi = std::cos(elevation);
  const double k = 2.0 * kPi * cfg.element_spacing;
  const double norm = 1.0 / std::sqrt(static_cast<double>(cfg.elements()));
  Eigen::VectorXcd v(cfg.elements());
  for (int b = 0; b < cfg.m_v; ++b) {
    for (int a = 0; a < cfg.m_h; ++a) {
      v(b * cfg.m_h + a) = norm * std::polar(1.0, -k * (a * theta + b * phi));
    }
  }
  return v;
}

Eigen::VectorXcd array_response(const UpaConfig& cfg, double theta_cos, double phi_cos) {
  const double k = 2.0 * kPi * cfg.element_spacing;
  Eigen::VectorXcd v(cfg.elements());
  for (int b = 0; b < cfg.m_v; ++b) {
    for (int a = 0; a < cfg.m_h; ++a) {
      v(b * cfg.m_h + a) = std::polar(1.0, k * (a * theta_cos + b * phi_cos));
    }
  }
  return v;
}

Codebook build_codebook(const UpaConfig& cfg, int n_az, int n_el) {
  cfg.validate();
  if (n_az < 1 || n_el < 1 || n_az * n_el != cfg.codebook_size) {
    throw ConfigError("codebook grid " + std::to_string(n_az) + "x" + std::to_string(n_el) +
                      " does not match codebook size " + std::to_string(cfg.codebook_size));
  }
  const double span = deg2rad(cfg.codebook_az_span_deg);
  const double el_lo = deg2rad(cfg.codebook_el_min_deg);
  const double el_hi = deg2rad(cfg.codebook_el_max_deg);

  Codebook cb;
  cb.beams.reserve(static_cast<std::size_t>(n_az * n_el));
  for (int e = 0; e < n_el; ++e) {
    const double el = el_lo + (el_hi - el_lo) * (e + 0.5) / n_el;
    for (int a = 0; a < n_az; ++a) {
      const double az = -0.5 * span + span * (a + 0.5) / n_az;
      Beam beam;
      beam.id = e * n_az + a + 1;
      beam.azimuth = az;
      beam.elevation = el;
      beam.weights = steering_vector(cfg, az, el);
      cb.beams.push_back(std::move(beam));
    }
  }
  return cb;
}

double element_gain_dbi(const UpaConfig& cfg, double azimuth, double elevation) {
  const double daz = rad2deg(wrap_angle(azimuth));
  const double del = rad2deg(elevation) - 90.0;
  const double att = 12.0 * (daz / cfg.beamwidth_h_deg) * (daz / cfg.beamwidth_h_deg) +
                     12.0 * (del / cfg.beamwidth_v_deg) * (del / cfg.beamwidth_v_deg);
  return cfg.element_gain_max_dbi - std::min(att, cfg.front_to_back_db);
}

double element_field_amplitude(const UpaConfig& cfg, double azimuth, double elevation) {
  return std::pow(10.0, element_gain_dbi(cfg, azimuth, elevation) / 20.0);
}

namespace {

// sum_{n=0}^{count-1} exp(j * x * n)
cplx phase_ramp_sum(int count, double x) {
  cplx acc{0.0, 0.0};
  const cplx step = std::polar(1.0, x);
  cplx term{1.0, 0.0};
  for (int n = 0; n < count; ++n) {
    acc += term;
    term *= step;
  }
  return acc;
}

}  // namespace

cplx beam_response(const UpaConfig& cfg, const Beam& beam, double theta_cos, double phi_cos) {
  const double k = 2.0 * kPi * cfg.element_spacing;
  const double beam_theta = std::sin(beam.elevation) * std::sin(beam.azimuth);
  const double beam_phi = std::cos(beam.elevation);
  const double norm = 1.0 / std::sqrt(static_cast<double>(cfg.elements()));
  return norm * phase_ramp_sum(cfg.m_h, k * (theta_cos - beam_theta)) *
         phase_ramp_sum(cfg.m_v, k * (phi_cos - beam_phi));
}

}  // namespace mmbeam
