#include "mmbeam/blockage.hpp"

#include <algorithm>
#include <cmath>

namespace mmbeam {

BlockerScreen Trajectory::initial(double width, double height, double speed) const {
  BlockerScreen s;
  s.width = width;
  s.height = height;
  s.speed = speed;
  s.center = Position3D(x_start, y, height / 2.0);
  s.facing = Eigen::Vector2d(1.0, 0.0);
  return s;
}

BlockerScreen advance_blocker(const BlockerScreen& screen, const Trajectory& traj, double dt) {
  BlockerScreen next = screen;
  next.center.x() += screen.speed * dt;
  if (traj.wrap && next.center.x() > traj.x_end + 1e-9) next.center.x() = traj.x_start;
  return next;
}

BlockerScreen facing_link(const BlockerScreen& screen, const Position3D& tx, const Position3D& rx) {
  BlockerScreen out = screen;
  const Eigen::Vector2d link = (rx - tx).head<2>();
  if (link.norm() > 1e-12) out.facing = link.normalized();
  return out;
}

bool segment_screen_intersect(const Position3D& tx, const Position3D& rx, const BlockerScreen& screen) {
  const Eigen::Vector3d normal(screen.facing.x(), screen.facing.y(), 0.0);
  const Eigen::Vector3d seg = rx - tx;
  const double denom = normal.dot(seg);
  if (std::abs(denom) < 1e-12) return false;
  const double t = normal.dot(screen.center - tx) / denom;
  if (!(t > 0.0 && t < 1.0)) return false;
  const Eigen::Vector3d hit = tx + t * seg;
  const Eigen::Vector3d lateral(-screen.facing.y(), screen.facing.x(), 0.0);
  const double u = lateral.dot(hit - screen.center);
  const double z = hit.z() - screen.center.z();
  return std::abs(u) < screen.width / 2.0 && std::abs(z) < screen.height / 2.0;
}

namespace {

double edge_term(double sign, double excess, double wavelength) {
  const double nu = (kPi / 2.0) * std::sqrt((kPi / wavelength) * std::max(excess, 0.0));
  return std::atan(sign * nu) / kPi;
}

}  // namespace

double knife_edge_loss(const Position3D& tx, const Position3D& rx, const BlockerScreen& screen,
                       PathKind kind, double wavelength) {
  const Eigen::Vector2d t2 = tx.head<2>();
  const Eigen::Vector2d r2 = rx.head<2>();
  const double d2 = (r2 - t2).norm();
  if (d2 < 1e-12) return 0.0;
  const Eigen::Vector2d n = (r2 - t2) / d2;
  const Eigen::Vector2d perp(-n.y(), n.x());
  const Eigen::Vector2d c2 = screen.center.head<2>();

  const double s_c = n.dot(c2 - t2);
  if (!(s_c > 0.0 && s_c < d2)) return 0.0;

  const bool los = kind == PathKind::kLos;

  // Top view: the screen is a segment across the link at distance s_c.
  const double half_w = screen.width / 2.0;
  const double path_lat = perp.dot(t2 - c2);
  double fw = 0.0;
  for (const double edge_lat : {half_w, -half_w}) {
    const Eigen::Vector2d edge = c2 + edge_lat * perp;
    const double excess = los ? (edge - t2).norm() + (r2 - edge).norm() - d2
                              : (edge - r2).norm() - (d2 - s_c);
    const bool inside = edge_lat > 0.0 ? path_lat < edge_lat : path_lat > edge_lat;
    fw += edge_term(inside ? 1.0 : -1.0, excess, wavelength);
  }

  // Side view: coordinates (along-link distance, height).
  const Eigen::Vector2d ts(0.0, tx.z());
  const Eigen::Vector2d rs(d2, rx.z());
  const double d_side = (rs - ts).norm();
  const double z_path = tx.z() + (rx.z() - tx.z()) * s_c / d2;
  const double z_bottom = screen.center.z() - screen.height / 2.0;
  const double z_top = screen.center.z() + screen.height / 2.0;
  const double d_prime = std::hypot(d2 - s_c, rx.z() - z_path);
  double fh = 0.0;
  for (const double edge_z : {z_top, z_bottom}) {
    const Eigen::Vector2d edge(s_c, edge_z);
    const double excess = los ? (edge - ts).norm() + (rs - edge).norm() - d_side
                              : (edge - rs).norm() - d_prime;
    const bool inside = edge_z == z_top ? z_path < z_top : z_path > z_bottom;
    fh += edge_term(inside ? 1.0 : -1.0, excess, wavelength);
  }

  const double transmitted = 1.0 - fh * fw;
  if (transmitted >= 1.0) return 0.0;
  return std::max(0.0, -20.0 * std::log10(transmitted));
}

std::uint8_t gt_beam_state(const Position3D& bs, const Position3D& ue, const BlockerScreen& screen) {
  return segment_screen_intersect(bs, ue, facing_link(screen, bs, ue)) ? 1 : 0;
}

}  // namespace mmbeam
