#include <cmath>
#include <random>

#include "doctest.h"
#include "knife_edge_oracle.hpp"

#include "mmbeam/blockage.hpp"

using namespace mmbeam;

namespace {

constexpr double kLambda = 299792458.0 / 28e9;

oracle::P3 p3(const Position3D& p) { return {p.x(), p.y(), p.z()}; }

BlockerScreen screen_at(double x, double y, double w = 2.0, double h = 3.0) {
  BlockerScreen s;
  s.width = w;
  s.height = h;
  s.center = Position3D(x, y, h / 2.0);
  return s;
}

}  // namespace

TEST_CASE("blocker advances by v*dt and wraps at the end of the track") {
  Trajectory traj;
  BlockerScreen s = traj.initial(2.0, 3.0, 2.0);
  CHECK(s.center.x() == -20.0);
  CHECK(s.center.z() == 1.5);
  s.center.x() = 0.0;
  CHECK(advance_blocker(s, traj, 0.2).center.x() == doctest::Approx(0.4));

  s.center.x() = 19.9;
  CHECK(advance_blocker(s, traj, 0.2).center.x() == -20.0);

  s.speed = 0.0;
  s.center.x() = 3.0;
  CHECK(advance_blocker(s, traj, 0.2).center.x() == 3.0);
}

TEST_CASE("segment crossing the screen centre is blocked") {
  const Position3D tx(0, 0, 3), rx(10, 0, 1);
  CHECK(segment_screen_intersect(tx, rx, facing_link(screen_at(5, 0), tx, rx)));
  CHECK(gt_beam_state(tx, rx, screen_at(5, 0)) == 1);
}

TEST_CASE("screen far off the path, behind the transmitter or parallel is clear") {
  const Position3D tx(0, 0, 3), rx(10, 0, 1);
  CHECK(gt_beam_state(tx, rx, screen_at(5, 10)) == 0);
  CHECK(gt_beam_state(tx, rx, screen_at(-3, 0)) == 0);
  CHECK(gt_beam_state(tx, rx, screen_at(12, 0)) == 0);

  BlockerScreen side = screen_at(5, 0);
  side.facing = Eigen::Vector2d(0.0, 1.0);  // screen plane contains the link
  CHECK_FALSE(segment_screen_intersect(tx, rx, side));
}

TEST_CASE("segment above the screen top is clear") {
  const Position3D tx(0, 0, 3.5), rx(10, 0, 3.5);
  CHECK(gt_beam_state(tx, rx, screen_at(5, 0)) == 0);
}

TEST_CASE("centred screen loss matches the scalar reference and is large") {
  const Position3D tx(0, 0, 3), rx(10, 0, 1);
  const auto s = screen_at(5, 0, 2.0, 3.0);
  const double bl = knife_edge_loss(tx, rx, s, PathKind::kLos, kLambda);
  const double ref = oracle::knife_edge_db(p3(tx), p3(rx), p3(s.center), 2.0, 3.0, kLambda, false);
  CHECK(std::abs(bl - ref) < 1e-9);
  CHECK(bl > 20.0);
}

TEST_CASE("loss equals the scalar reference on random geometries") {
  std::mt19937_64 rng(17);
  std::uniform_real_distribution<double> xy(-15.0, 15.0), z(0.5, 3.0), u(0.0, 1.0);
  int nonzero = 0;
  for (int i = 0; i < 2000; ++i) {
    const Position3D tx(xy(rng), xy(rng), z(rng));
    const Position3D rx(xy(rng), xy(rng), z(rng));
    // Half of the screens sit near the link so the loss is exercised.
    const double a = u(rng);
    Position3D c = tx + a * (rx - tx);
    c.x() += 4.0 * (u(rng) - 0.5);
    c.y() += 4.0 * (u(rng) - 0.5);
    if (i % 2) c = Position3D(xy(rng), xy(rng), 0.0);
    const auto s = screen_at(c.x(), c.y(), 0.5 + 2.0 * u(rng), 1.0 + 2.0 * u(rng));
    const bool nlos = i % 3 == 0;
    const double got = knife_edge_loss(tx, rx, s, nlos ? PathKind::kNlos : PathKind::kLos, kLambda);
    const double ref = oracle::knife_edge_db(p3(tx), p3(rx), p3(s.center), s.width, s.height, kLambda, nlos);
    CHECK(std::abs(got - ref) < 1e-9);
    CHECK(got >= 0.0);
    nonzero += got > 0.0;
  }
  CHECK(nonzero > 200);
}

TEST_CASE("screen 30 m away from the link gives zero loss") {
  const Position3D tx(0, 0, 3), rx(10, 0, 1);
  CHECK(knife_edge_loss(tx, rx, screen_at(5, 30), PathKind::kLos, kLambda) < 1e-3);
  CHECK(knife_edge_loss(tx, rx, screen_at(-30, 0), PathKind::kLos, kLambda) == 0.0);
}

TEST_CASE("blocked steps form one contiguous run along a straight pass") {
  const Position3D bs(-10, -10, 3), ue(2, 3, 1);
  Trajectory traj;
  traj.y = -2.0;
  BlockerScreen s = traj.initial(2.0, 3.0, 1.0);
  int runs = 0;
  std::uint8_t prev = 0;
  for (int k = 0; k < 200; ++k) {
    const std::uint8_t g = gt_beam_state(bs, ue, s);
    runs += g == 1 && prev == 0;
    prev = g;
    s = advance_blocker(s, traj, 0.2);
  }
  CHECK(runs == 1);
}

TEST_CASE("loss peaks while the link is blocked and decays away from it") {
  const Position3D tx(0, 0, 3), rx(10, 0, 1);
  const double centre = knife_edge_loss(tx, rx, screen_at(5, 0), PathKind::kLos, kLambda);
  double prev = centre;
  for (double y = 0.5; y <= 6.0; y += 0.5) {
    const double bl = knife_edge_loss(tx, rx, screen_at(5, y), PathKind::kLos, kLambda);
    CHECK(bl <= prev + 1e-9);
    prev = bl;
  }
  CHECK(prev < 1.0);
}

TEST_CASE("lateral mirror symmetry of the loss") {
  const Position3D tx(0, 0, 3), rx(10, 0, 1);
  for (double y : {0.3, 0.9, 1.7, 3.0}) {
    const double a = knife_edge_loss(tx, rx, screen_at(4, y), PathKind::kLos, kLambda);
    const double b = knife_edge_loss(tx, rx, screen_at(4, -y), PathKind::kLos, kLambda);
    CHECK(a == doctest::Approx(b).epsilon(1e-9));
  }
}
