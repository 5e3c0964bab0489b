#pragma once

// Antenna array geometry: coordinate frames, UPA steering vectors, codebooks
// and the single-element radiation pattern.
//
// Global frame is x-east, y-north, z-up. Each array has a local frame whose
// x' axis is the boresight. Azimuth is measured from x' in the x'-y' plane,
// elevation from z' (so boresight sits at elevation 90 deg).

#include <complex>
#include <stdexcept>
#include <vector>

#include <Eigen/Dense>

namespace mmbeam {

using Position3D = Eigen::Vector3d;
using cplx = std::complex<double>;

inline constexpr double kPi = 3.14159265358979323846;
inline constexpr double kSpeedOfLight = 299792458.0;

constexpr double deg2rad(double deg) { return deg * kPi / 180.0; }
constexpr double rad2deg(double rad) { return rad * 180.0 / kPi; }

/// Wrap an angle to [-pi, pi).
double wrap_angle(double rad);

class ConfigError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

struct UpaConfig {
  int m_v = 8;
  int m_h = 8;
  double element_spacing = 0.5;  // wavelengths
  double boresight_azimuth_deg = 0.0;
  double downtilt_deg = 0.0;
  double element_gain_max_dbi = 5.0;
  double beamwidth_h_deg = 90.0;
  double beamwidth_v_deg = 90.0;
  double front_to_back_db = 30.0;

  // Codebook tiling, in the local frame. Azimuth span is centred on boresight.
  int codebook_size = 64;
  double codebook_az_span_deg = 120.0;
  double codebook_el_min_deg = 72.0;
  double codebook_el_max_deg = 120.0;

  int elements() const { return m_v * m_h; }
  void validate() const;

  static UpaConfig base_station(double boresight_deg);
  static UpaConfig user_equipment(double boresight_deg);
};

/// Direction in an array's local frame.
struct LocalDirection {
  double azimuth;    // radians, from x'
  double elevation;  // radians, from z'
  double theta_cos;  // sin(el) * sin(az), the horizontal phase term
  double phi_cos;    // cos(el), the vertical phase term
};

/// Rotation between the global frame and an array's local frame.
class ArrayFrame {
 public:
  explicit ArrayFrame(const UpaConfig& cfg);

  /// `dir` need not be normalised.
  LocalDirection to_local(const Eigen::Vector3d& dir) const;
  Eigen::Vector3d to_global(double azimuth, double elevation) const;

 private:
  Eigen::Matrix3d rot_;  // columns are the local axes expressed globally
};

Eigen::Vector3d unit_direction(double azimuth, double elevation);

/// Unit-norm UPA beamforming vector. Element (a, b) sits at index b*m_h + a.
Eigen::VectorXcd steering_vector(const UpaConfig& cfg, double azimuth, double elevation);

/// Unnormalised array response to a plane wave with local direction cosines
/// (theta_cos, phi_cos). Matched against steering_vector it gives sqrt(M).
Eigen::VectorXcd array_response(const UpaConfig& cfg, double theta_cos, double phi_cos);

struct Beam {
  int id = 0;  // 1-based
  double azimuth = 0.0;
  double elevation = 0.0;
  Eigen::VectorXcd weights;
};

struct Codebook {
  std::vector<Beam> beams;
  int size() const { return static_cast<int>(beams.size()); }
  const Beam& beam(int id) const { return beams.at(static_cast<std::size_t>(id - 1)); }
};

/// Uniform n_az x n_el grid over the configured sector, ids assigned
/// elevation-major.
Codebook build_codebook(const UpaConfig& cfg, int n_az, int n_el);

/// Element gain in dBi for angles relative to the element boresight
/// (azimuth offset, elevation from z').
double element_gain_dbi(const UpaConfig& cfg, double azimuth, double elevation);

/// Linear amplitude of the element field pattern.
double element_field_amplitude(const UpaConfig& cfg, double azimuth, double elevation);

/// b^T a for a beam and a plane-wave response, evaluated in closed form
/// using the separability of the UPA phase profile.
cplx beam_response(const UpaConfig& cfg, const Beam& beam, double theta_cos, double phi_cos);

}  // namespace mmbeam
