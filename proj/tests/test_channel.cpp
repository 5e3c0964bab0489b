#include <cmath>
#include <limits>
#include <vector>

#include "doctest.h"

#include "mmbeam/channel.hpp"

using namespace mmbeam;

namespace {

UpaConfig single() {
  UpaConfig c;
  c.m_v = 1;
  c.m_h = 1;
  c.beamwidth_h_deg = 1e9;  // flat pattern
  c.beamwidth_v_deg = 1e9;
  c.element_gain_max_dbi = 0.0;
  return c;
}

}  // namespace

TEST_CASE("LoS probability is one up to 5 m and decays on each branch") {
  for (double d = 0.1; d <= 5.0; d += 0.1) CHECK(inh_los_probability(d) == 1.0);
  double prev = 1.0;
  for (double d = 5.5; d <= 49.0; d += 0.5) {
    const double p = inh_los_probability(d);
    CHECK(p < prev);
    prev = p;
  }
  prev = 1.0;
  for (double d = 49.5; d < 80.0; d += 0.5) {
    const double p = inh_los_probability(d);
    CHECK(p < prev);
    prev = p;
  }
}

TEST_CASE("link at 4 m is always line of sight") {
  Rng rng(1);
  for (int i = 0; i < 500; ++i) {
    const auto lsp = draw_lsps({0, 0, 3}, {3.7, 0, 1.5}, rng);
    CHECK(lsp.los);
  }
}

TEST_CASE("LoS pathloss at 10 m and 28 GHz") {
  const double pl = inh_pathloss_db(10.0, 28e9, true);
  CHECK(pl == doctest::Approx(32.4 + 17.3 + 20.0 * std::log10(28.0)).epsilon(1e-12));
  CHECK(pl == doctest::Approx(78.6).epsilon(1e-3));
  CHECK(inh_pathloss_db(10.0, 28e9, false) >= pl);
}

TEST_CASE("LSP draws are deterministic and keep K positive") {
  Rng a(9), b(9);
  for (int i = 0; i < 50; ++i) {
    const auto la = draw_lsps({-10, 10, 3}, {5, -3, 1}, a);
    const auto lb = draw_lsps({-10, 10, 3}, {5, -3, 1}, b);
    CHECK(la.pathloss_db == lb.pathloss_db);
    CHECK(la.shadow_fading_db == lb.shadow_fading_db);
    CHECK(la.rician_k_linear == lb.rician_k_linear);
    CHECK(la.rician_k_linear > 0.0);
    CHECK(la.pathloss_db > 0.0);
  }
}

TEST_CASE("coincident endpoints use the distance floor") {
  Rng rng(2);
  const auto lsp = draw_lsps({1, 1, 1}, {1, 1, 1}, rng);
  CHECK(lsp.distance_3d == doctest::Approx(0.1));
  CHECK(std::isfinite(lsp.pathloss_db));
}

TEST_CASE("sub-path powers sum to one and delays are sorted per cluster") {
  Rng rng(4);
  for (int i = 0; i < 20; ++i) {
    const auto lsp = draw_lsps({0, 0, 3}, {12, 7, 1}, rng);
    const auto cs = draw_ssps(lsp, 8, 4, rng);
    double sum = 0.0;
    for (const auto& p : cs.paths) {
      sum += p.power;
      CHECK(p.delay_s >= 0.0);
    }
    CHECK(sum == doctest::Approx(1.0).epsilon(1e-9));
    for (int c = 0; c < cs.n_clusters; ++c)
      for (int p = 1; p < cs.n_subpaths; ++p)
        CHECK(cs.paths[static_cast<std::size_t>(c * 4 + p)].delay_s >= cs.paths[static_cast<std::size_t>(c * 4 + p - 1)].delay_s);
  }
}

TEST_CASE("single cluster with one sub-path carries all power") {
  Rng rng(5);
  const auto lsp = draw_lsps({0, 0, 3}, {12, 7, 1}, rng);
  const auto cs = draw_ssps(lsp, 1, 1, rng);
  REQUIRE(cs.size() == 1);
  CHECK(cs.paths[0].power == doctest::Approx(1.0));
}

TEST_CASE("zero angle spread collapses sub-paths onto the cluster angle") {
  Rng rng(6);
  auto lsp = draw_lsps({0, 0, 3}, {12, 7, 1}, rng);
  lsp.spreads = AngleSpreads{};
  const auto cs = draw_ssps(lsp, 3, 4, rng);
  for (int c = 0; c < 3; ++c) {
    const auto& first = cs.paths[static_cast<std::size_t>(c * 4)];
    for (int p = 1; p < 4; ++p) {
      CHECK(cs.paths[static_cast<std::size_t>(c * 4 + p)].aod_azimuth == first.aod_azimuth);
      CHECK(cs.paths[static_cast<std::size_t>(c * 4 + p)].aoa_elevation == first.aoa_elevation);
    }
  }
}

TEST_CASE("phases are redrawn between steps") {
  Rng rng(7);
  const auto lsp = draw_lsps({0, 0, 3}, {12, 7, 1}, rng);
  auto cs = draw_ssps(lsp, 8, 4, rng);
  const auto before = cs.paths;
  redraw_phases(cs, rng);
  int changed = 0;
  for (std::size_t i = 0; i < before.size(); ++i) {
    changed += before[i].phase != cs.paths[i].phase;
    CHECK(before[i].aod_azimuth == cs.paths[i].aod_azimuth);
    CHECK(before[i].power == cs.paths[i].power);
  }
  CHECK(changed == static_cast<int>(before.size()));
}

TEST_CASE("infinite blockage on every ray zeroes the channel") {
  Rng rng(8);
  const auto lsp = draw_lsps({0, 0, 3}, {4, 1, 1}, rng);
  const auto cs = draw_ssps(lsp, 8, 4, rng);
  std::vector<double> bl(static_cast<std::size_t>(ray_count(cs)), std::numeric_limits<double>::infinity());
  const auto h = channel_matrix(lsp, cs, UpaConfig::base_station(0), UpaConfig::user_equipment(180), bl, 0.0);
  CHECK(h.h.cwiseAbs().maxCoeff() == 0.0);
}

TEST_CASE("blockage vector of the wrong length is rejected") {
  Rng rng(8);
  const auto lsp = draw_lsps({0, 0, 3}, {4, 1, 1}, rng);
  const auto cs = draw_ssps(lsp, 8, 4, rng);
  std::vector<double> bl(3, 0.0);
  CHECK_THROWS(channel_matrix(lsp, cs, UpaConfig::base_station(0), UpaConfig::user_equipment(180), bl, 0.0));
}

TEST_CASE("single antenna, single sub-path: |H| equals rho") {
  LargeScaleParams lsp;
  lsp.los = false;
  lsp.pathloss_db = 70.0;
  lsp.shadow_fading_db = 2.0;
  ClusterSet cs;
  cs.n_clusters = 1;
  cs.n_subpaths = 1;
  cs.paths.push_back(SubPath{1.0, 0.0, 0.3, 1.2, 2.0, 1.4, 0.9});
  const std::vector<double> bl{0.0, 0.0};
  const auto h = channel_matrix(lsp, cs, single(), single(), bl, 0.0);
  CHECK(std::abs(h.h(0, 0)) == doctest::Approx(lsp.rho()).epsilon(1e-12));

  // With a single ray any loss strictly reduces |H|.
  const std::vector<double> bl3{3.0, 0.0};
  const auto h3 = channel_matrix(lsp, cs, single(), single(), bl3, 0.0);
  CHECK(std::abs(h3.h(0, 0)) < std::abs(h.h(0, 0)));
  CHECK(std::abs(h3.h(0, 0)) == doctest::Approx(lsp.rho() * std::pow(10.0, -3.0 / 20.0)));
}

TEST_CASE("very large K leaves a rank-one LoS channel with full array gain") {
  Rng rng(10);
  const Position3D bs{0, 0, 3}, ue{6, 0, 1};
  auto lsp = draw_lsps(bs, ue, rng);
  REQUIRE(lsp.los);
  lsp.rician_k_linear = 1e9;
  const auto cs = draw_ssps(lsp, 8, 4, rng);
  UpaConfig tx = UpaConfig::base_station(0.0);
  tx.downtilt_deg = 0.0;
  UpaConfig rx = UpaConfig::user_equipment(180.0);
  std::vector<double> bl(static_cast<std::size_t>(ray_count(cs)), 0.0);
  const auto h = channel_matrix(lsp, cs, tx, rx, bl, 0.0);

  const ArrayFrame ft(tx), fr(rx);
  const auto dt = ft.to_local(lsp.los_departure);
  const auto dr = fr.to_local(lsp.los_arrival);
  const auto bt = steering_vector(tx, dt.azimuth, dt.elevation);
  const auto br = steering_vector(rx, dr.azimuth, dr.elevation);
  const double g = std::abs(cplx(br.transpose() * h.h * bt));
  const double expect = lsp.rho() * std::sqrt(64.0 * 16.0) * element_field_amplitude(tx, dt.azimuth, dt.elevation) *
                        element_field_amplitude(rx, dr.azimuth, dr.elevation);
  CHECK(g == doctest::Approx(expect).epsilon(1e-3));

  Eigen::JacobiSVD<Eigen::MatrixXcd> svd(h.h);
  const auto s = svd.singularValues();
  CHECK(s(1) / s(0) < 1e-3);
}

TEST_CASE("Rician composition: mean power splits by K over random phases") {
  Rng rng(11);
  const Position3D bs{0, 0, 3}, ue{4, 2, 1};
  auto lsp = draw_lsps(bs, ue, rng);
  REQUIRE(lsp.los);
  lsp.rician_k_linear = 3.0;
  auto cs = draw_ssps(lsp, 8, 4, rng);
  UpaConfig tx = UpaConfig::base_station(30.0);
  tx.m_v = 2;
  tx.m_h = 2;
  UpaConfig rx = UpaConfig::user_equipment(200.0);
  rx.m_v = 1;
  rx.m_h = 2;
  std::vector<double> bl(static_cast<std::size_t>(ray_count(cs)), 0.0);

  auto nlos_only = lsp;
  nlos_only.los = false;
  const auto h_los = channel_matrix(lsp, ClusterSet{0, 0, {}}, tx, rx, std::vector<double>{0.0}, 0.0);
  // h_los holds only the LoS ray scaled by sqrt(K/(K+1)).

  const int draws = 100000;
  double e_mixed = 0.0, e_nlos = 0.0;
  for (int i = 0; i < draws; ++i) {
    redraw_phases(cs, rng);
    e_mixed += channel_matrix(lsp, cs, tx, rx, bl, 0.0).h.squaredNorm();
    std::vector<double> bl_n(static_cast<std::size_t>(ray_count(cs)), 0.0);
    e_nlos += channel_matrix(nlos_only, cs, tx, rx, bl_n, 0.0).h.squaredNorm();
  }
  e_mixed /= draws;
  e_nlos /= draws;
  const double k = lsp.rician_k_linear;
  const double expect = e_nlos / (k + 1.0) + h_los.h.squaredNorm();
  CHECK(e_mixed == doctest::Approx(expect).epsilon(0.02));
}
