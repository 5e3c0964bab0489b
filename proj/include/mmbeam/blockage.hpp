#pragma once

// Moving rectangular-screen blocker with knife-edge diffraction loss.

#include <cstdint>

#include <Eigen/Dense>

#include "mmbeam/geometry.hpp"

namespace mmbeam {

struct BlockerScreen {
  double width = 2.0;
  double height = 3.0;
  Position3D center{-20.0, 0.0, 1.5};  // base on the floor: center.z = height / 2
  Eigen::Vector2d facing{1.0, 0.0};    // unit normal in the x-y plane
  double speed = 1.0;
};

struct Trajectory {
  double x_start = -20.0;
  double x_end = 20.0;
  double y = 0.0;
  bool wrap = true;

  BlockerScreen initial(double width, double height, double speed) const;
};

/// Moves the screen along +x by speed * dt and regenerates it at the start
/// once it passes the end of the trajectory.
BlockerScreen advance_blocker(const BlockerScreen& screen, const Trajectory& traj, double dt);

/// Copy of `screen` rotated so its normal is the top-view direction of the
/// tx->rx link. Used for every per-link evaluation.
BlockerScreen facing_link(const BlockerScreen& screen, const Position3D& tx, const Position3D& rx);

/// True iff the open segment (tx, rx) crosses the interior of the screen
/// rectangle. Grazing contact and in-plane segments count as not blocked.
bool segment_screen_intersect(const Position3D& tx, const Position3D& rx, const BlockerScreen& screen);

enum class PathKind { kLos, kNlos };

/// Knife-edge diffraction loss in dB (>= 0) for a path from `tx` to `rx`.
/// For kNlos, `tx` is a virtual point on the incoming ray and only the
/// receive-side leg enters the edge terms. The screen is evaluated facing the
/// link; a screen whose centre does not project between the endpoints gives 0.
double knife_edge_loss(const Position3D& tx, const Position3D& rx, const BlockerScreen& screen,
                       PathKind kind, double wavelength);

/// Ground-truth blocked state of a BS-UE link (1 blocked, 0 clear).
std::uint8_t gt_beam_state(const Position3D& bs, const Position3D& ue, const BlockerScreen& screen);

}  // namespace mmbeam
