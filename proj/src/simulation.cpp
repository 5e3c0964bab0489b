#include "mmbeam/simulation.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include <fmt/format.h>

namespace mmbeam {

using nlohmann::json;

ScenarioConfig ScenarioConfig::desk() {
  ScenarioConfig c;
  // A tenth of the per-beam samples; smaller batches keep the number of
  // optimiser updates per epoch comparable to the full-scale dataset.
  c.train.batch_size = 100;
  return c;
}

ScenarioConfig ScenarioConfig::full() {
  ScenarioConfig c;
  c.scale = "full";
  c.train.batch_size = 1000;
  c.dataset_drops = 100;
  c.eval_drops = 50;
  c.train_bs.resize(static_cast<std::size_t>(c.n_bs()));
  std::iota(c.train_bs.begin(), c.train_bs.end(), 0);
  return c;
}

WindowSpec ScenarioConfig::window() const {
  return {static_cast<int>(std::lround(eta_s / timing.dt)), static_cast<int>(std::lround(eps_s / timing.dt))};
}

void ScenarioConfig::validate() const {
  timing.validate();
  if (sector_boresights_deg.empty()) throw ConfigError("at least one sector per site is required");
  if (n_ues < 1) throw ConfigError("n_ues must be positive");
  if (n_clusters < 1 || n_subpaths < 1) throw ConfigError("cluster and sub-path counts must be positive");
  if (!(blocker_width > 0.0) || !(blocker_height > 0.0)) throw ConfigError("blocker dimensions must be positive");
  if (!(trajectory.x_end > trajectory.x_start)) throw ConfigError("blocker trajectory must run towards +x");
  const WindowSpec w = window();
  if (w.eta_steps < 1 || w.eps_steps < 1) throw ConfigError("prediction window and input span must cover a step");
  if (eta_s < t_sweep(bs_beams(), ue_beams(), timing) + timing.t_ho) {
    throw ConfigError("prediction window shorter than sweep plus handover time");
  }
  if (correlated_beams < 1 || correlated_beams >= total_beams()) throw ConfigError("bad correlated beam count");
  if (focus_bs < 0 || focus_bs >= n_bs()) throw ConfigError("focus_bs out of range");
  for (int b : train_bs)
    if (b < 0 || b >= n_bs()) throw ConfigError("train_bs entry out of range");
  if (dataset_drops < 2) throw ConfigError("dataset needs at least two drops for a train/validation split");
  if (eval_drops < 1) throw ConfigError("eval_drops must be positive");
  if (speeds.empty()) throw ConfigError("at least one blocker speed is required");
  for (double s : speeds)
    if (!(s > 0.0)) throw ConfigError("blocker speeds must be positive");
  if (train.batch_size < 1 || train.epochs < 1 || train.restarts < 1 || train.l2_grid.empty()) {
    throw ConfigError("bad training configuration");
  }
}

json to_json(const ScenarioConfig& c) {
  json j;
  j["scale"] = c.scale;
  j["room"] = {c.room_x, c.room_y, c.room_z};
  j["isd"] = c.isd;
  j["sector_boresights_deg"] = c.sector_boresights_deg;
  j["bs_height"] = c.bs_height;
  j["bs_downtilt_deg"] = c.bs_downtilt_deg;
  j["n_ues"] = c.n_ues;
  j["ue_height"] = c.ue_height;
  j["ue_x_half"] = c.ue_x_half;
  j["ue_y_half"] = c.ue_y_half;
  j["n_clusters"] = c.n_clusters;
  j["n_subpaths"] = c.n_subpaths;
  j["channel"] = {{"carrier_hz", c.channel.carrier_hz},
                  {"sf_sigma_los_db", c.channel.sf_sigma_los_db},
                  {"sf_sigma_nlos_db", c.channel.sf_sigma_nlos_db},
                  {"k_mean_db", c.channel.k_mean_db},
                  {"k_sigma_db", c.channel.k_sigma_db},
                  {"min_distance_m", c.channel.min_distance_m},
                  {"subpath_spread_fraction", c.channel.subpath_spread_fraction},
                  {"cluster_shadowing_db", c.channel.cluster_shadowing_db}};
  j["budget"] = {{"tx_power_dbm", c.budget.tx_power_dbm},
                 {"bandwidth_hz", c.budget.bandwidth_hz},
                 {"noise_psd_dbm_hz", c.budget.noise_psd_dbm_hz},
                 {"noise_figure_db", c.budget.noise_figure_db},
                 {"rsrp_noise_dbm", c.budget.rsrp_noise_dbm}};
  j["timing"] = {{"t_ss", c.timing.t_ss},   {"l_ssb", c.timing.l_ssb},
                 {"tti", c.timing.tti},     {"t_ho", c.timing.t_ho},
                 {"dt", c.timing.dt},       {"drop_duration", c.timing.drop_duration}};
  j["blocker"] = {{"width", c.blocker_width},
                  {"height", c.blocker_height},
                  {"x_start", c.trajectory.x_start},
                  {"x_end", c.trajectory.x_end},
                  {"y", c.trajectory.y},
                  {"wrap", c.trajectory.wrap}};
  j["eta_s"] = c.eta_s;
  j["eps_s"] = c.eps_s;
  j["correlated_beams"] = c.correlated_beams;
  j["min_bl_max_db"] = c.min_bl_max_db;
  j["focus_bs"] = c.focus_bs;
  j["train_bs"] = c.train_bs;
  j["dataset_drops"] = c.dataset_drops;
  j["eval_drops"] = c.eval_drops;
  j["speeds"] = c.speeds;
  j["train"] = {{"hidden", c.train.hidden},
                {"learning_rate", c.train.adam.learning_rate},
                {"beta1", c.train.adam.beta1},
                {"beta2", c.train.adam.beta2},
                {"epsilon", c.train.adam.epsilon},
                {"batch_size", c.train.batch_size},
                {"epochs", c.train.epochs},
                {"l2_grid", c.train.l2_grid},
                {"restarts", c.train.restarts},
                {"train_fraction", c.train.train_fraction},
                {"threshold", c.train.threshold}};
  return j;
}

ScenarioConfig config_from_json(const json& in) {
  const std::string scale = in.value("scale", std::string("desk"));
  ScenarioConfig base;
  if (scale == "desk") {
    base = ScenarioConfig::desk();
  } else if (scale == "full") {
    base = ScenarioConfig::full();
  } else {
    throw ConfigError("unknown scale: " + scale);
  }
  json j = to_json(base);
  j.merge_patch(in);

  ScenarioConfig c;
  try {
    c.scale = j.at("scale").get<std::string>();
    const auto room = j.at("room").get<std::vector<double>>();
    if (room.size() != 3) throw ConfigError("room needs three dimensions");
    c.room_x = room[0];
    c.room_y = room[1];
    c.room_z = room[2];
    c.isd = j.at("isd").get<double>();
    c.sector_boresights_deg = j.at("sector_boresights_deg").get<std::vector<double>>();
    c.bs_height = j.at("bs_height").get<double>();
    c.bs_downtilt_deg = j.at("bs_downtilt_deg").get<double>();
    c.n_ues = j.at("n_ues").get<int>();
    c.ue_height = j.at("ue_height").get<double>();
    c.ue_x_half = j.at("ue_x_half").get<double>();
    c.ue_y_half = j.at("ue_y_half").get<double>();
    c.n_clusters = j.at("n_clusters").get<int>();
    c.n_subpaths = j.at("n_subpaths").get<int>();
    const auto& ch = j.at("channel");
    c.channel.carrier_hz = ch.at("carrier_hz").get<double>();
    c.channel.sf_sigma_los_db = ch.at("sf_sigma_los_db").get<double>();
    c.channel.sf_sigma_nlos_db = ch.at("sf_sigma_nlos_db").get<double>();
    c.channel.k_mean_db = ch.at("k_mean_db").get<double>();
    c.channel.k_sigma_db = ch.at("k_sigma_db").get<double>();
    c.channel.min_distance_m = ch.at("min_distance_m").get<double>();
    c.channel.subpath_spread_fraction = ch.at("subpath_spread_fraction").get<double>();
    c.channel.cluster_shadowing_db = ch.at("cluster_shadowing_db").get<double>();
    const auto& bu = j.at("budget");
    c.budget.tx_power_dbm = bu.at("tx_power_dbm").get<double>();
    c.budget.bandwidth_hz = bu.at("bandwidth_hz").get<double>();
    c.budget.noise_psd_dbm_hz = bu.at("noise_psd_dbm_hz").get<double>();
    c.budget.noise_figure_db = bu.at("noise_figure_db").get<double>();
    c.budget.rsrp_noise_dbm = bu.at("rsrp_noise_dbm").get<double>();
    const auto& ti = j.at("timing");
    c.timing.t_ss = ti.at("t_ss").get<double>();
    c.timing.l_ssb = ti.at("l_ssb").get<int>();
    c.timing.tti = ti.at("tti").get<double>();
    c.timing.t_ho = ti.at("t_ho").get<double>();
    c.timing.dt = ti.at("dt").get<double>();
    c.timing.drop_duration = ti.at("drop_duration").get<double>();
    const auto& bl = j.at("blocker");
    c.blocker_width = bl.at("width").get<double>();
    c.blocker_height = bl.at("height").get<double>();
    c.trajectory.x_start = bl.at("x_start").get<double>();
    c.trajectory.x_end = bl.at("x_end").get<double>();
    c.trajectory.y = bl.at("y").get<double>();
    c.trajectory.wrap = bl.at("wrap").get<bool>();
    c.eta_s = j.at("eta_s").get<double>();
    c.eps_s = j.at("eps_s").get<double>();
    c.correlated_beams = j.at("correlated_beams").get<int>();
    c.min_bl_max_db = j.at("min_bl_max_db").get<double>();
    c.focus_bs = j.at("focus_bs").get<int>();
    c.train_bs = j.at("train_bs").get<std::vector<int>>();
    c.dataset_drops = j.at("dataset_drops").get<int>();
    c.eval_drops = j.at("eval_drops").get<int>();
    c.speeds = j.at("speeds").get<std::vector<double>>();
    const auto& tr = j.at("train");
    c.train.hidden = tr.at("hidden").get<std::vector<int>>();
    c.train.adam.learning_rate = tr.at("learning_rate").get<double>();
    c.train.adam.beta1 = tr.at("beta1").get<double>();
    c.train.adam.beta2 = tr.at("beta2").get<double>();
    c.train.adam.epsilon = tr.at("epsilon").get<double>();
    c.train.batch_size = tr.at("batch_size").get<int>();
    c.train.epochs = tr.at("epochs").get<int>();
    c.train.l2_grid = tr.at("l2_grid").get<std::vector<double>>();
    c.train.restarts = tr.at("restarts").get<int>();
    c.train.train_fraction = tr.at("train_fraction").get<double>();
    c.train.threshold = tr.at("threshold").get<double>();
  } catch (const json::exception& e) {
    throw ConfigError(std::string("invalid config: ") + e.what());
  }
  c.validate();
  return c;
}

std::string config_hash(const ScenarioConfig& cfg) {
  const std::string text = to_json(cfg).dump();
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char ch : text) {
    h ^= ch;
    h *= 0x100000001b3ULL;
  }
  return fmt::format("{:016x}", h);
}

std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

Rng stream_rng(std::uint64_t seed, std::uint64_t drop, std::uint64_t stream) {
  return Rng(splitmix64(splitmix64(splitmix64(seed) ^ drop) ^ (stream * 0x632be59bd9b4e019ULL)));
}

double dataset_drop_speed(const ScenarioConfig& cfg, int i) {
  return cfg.speeds[static_cast<std::size_t>(i) % cfg.speeds.size()];
}

int eval_drop_id(double speed, int i) { return 100000 + static_cast<int>(std::lround(speed * 10.0)) * 1000 + i; }

namespace {

constexpr std::uint64_t kLayoutDrop = 0xffffffffULL;
enum Stream : std::uint64_t { kLayout = 1, kLsp = 2, kPhase = 3, kSchedule = 4 };

}  // namespace

Scenario build_scenario(const ScenarioConfig& cfg, std::uint64_t seed) {
  cfg.validate();
  Scenario sc;
  sc.cfg = cfg;
  sc.seed = seed;
  const double h = cfg.isd / 2.0;
  const std::vector<Eigen::Vector2d> sites = {{-h, h}, {h, h}, {-h, -h}, {h, -h}};
  for (const auto& s : sites) {
    for (double bore : cfg.sector_boresights_deg) {
      sc.bs_pos.emplace_back(s.x(), s.y(), cfg.bs_height);
      UpaConfig u = UpaConfig::base_station(bore);
      u.downtilt_deg = cfg.bs_downtilt_deg;
      sc.bs_cfg.push_back(u);
    }
  }
  Rng rng = stream_rng(seed, kLayoutDrop, kLayout);
  std::uniform_real_distribution<double> ux(-cfg.ue_x_half, cfg.ue_x_half);
  std::uniform_real_distribution<double> uy(-cfg.ue_y_half, cfg.ue_y_half);
  std::uniform_real_distribution<double> ub(0.0, 360.0);
  for (int k = 0; k < cfg.n_ues; ++k) {
    const double x = ux(rng);
    const double y = uy(rng);
    sc.ue_pos.emplace_back(x, y, cfg.ue_height);
    sc.ue_cfg.push_back(UpaConfig::user_equipment(ub(rng)));
  }
  sc.bs_codebook = build_codebook(sc.bs_cfg.front(), 16, 4);
  sc.ue_codebook = build_codebook(sc.ue_cfg.front(), 8, 2);
  return sc;
}

namespace {

struct LinkState {
  LargeScaleParams lsp;
  ClusterSet clusters;
  std::vector<Ray> rays;
  std::vector<Position3D> origin;  // far end of each ray for the blockage test
  Eigen::VectorXcd coef;           // per-ray coefficient at the current step
  Eigen::VectorXcd coef_clear;     // same without blockage
  // Beam responses over the rays: rows follow tx_ids / rx ids.
  std::vector<int> tx_ids;
  Eigen::MatrixXcd tx_resp;
  Eigen::MatrixXcd rx_resp;  // row 0 primary rx beam, row 1 backup rx beam

  int tx_row(int beam_id) const {
    const auto it = std::find(tx_ids.begin(), tx_ids.end(), beam_id);
    return it == tx_ids.end() ? -1 : static_cast<int>(it - tx_ids.begin());
  }
};

void update_coefficients(LinkState& l, const BlockerScreen& screen, const Position3D& ue, bool need_clear) {
  const auto n = static_cast<Eigen::Index>(l.rays.size());
  if (l.coef.size() != n) {
    l.coef.resize(n);
    l.coef_clear.resize(n);
  }
  for (Eigen::Index r = 0; r < n; ++r) {
    const Ray& ray = l.rays[static_cast<std::size_t>(r)];
    const double phase = ray.los ? ray.fixed_phase : l.clusters.paths[static_cast<std::size_t>(r)].phase;
    const cplx c = ray.amplitude * std::polar(1.0, phase);
    const double bl = knife_edge_loss(l.origin[static_cast<std::size_t>(r)], ue, screen,
                                      ray.los ? PathKind::kLos : PathKind::kNlos, l.lsp.wavelength_m);
    l.coef(r) = bl > 0.0 ? c * std::pow(10.0, -bl / 20.0) : c;
    if (need_clear) l.coef_clear(r) = c;
  }
}

cplx pair_gain(const Eigen::VectorXcd& coef, const LinkState& l, int tx_row, int rx_row) {
  cplx g{0.0, 0.0};
  for (Eigen::Index r = 0; r < coef.size(); ++r) g += coef(r) * l.tx_resp(tx_row, r) * l.rx_resp(rx_row, r);
  return g;
}

}  // namespace

DropResult run_drop(const Scenario& sc, int drop_id, double speed) {
  const ScenarioConfig& cfg = sc.cfg;
  const int n_bs = cfg.n_bs();
  const int n_ue = cfg.n_ues;
  const int steps = cfg.timing.steps_per_drop();
  const double dt = cfg.timing.dt;
  const auto did = static_cast<std::uint64_t>(drop_id);

  Rng lsp_rng = stream_rng(sc.seed, did, kLsp);
  Rng phase_rng = stream_rng(sc.seed, did, kPhase);
  Rng sched_rng = stream_rng(sc.seed, did, kSchedule);

  // Links indexed [bs * n_ue + ue].
  std::vector<LinkState> links(static_cast<std::size_t>(n_bs * n_ue));
  for (int j = 0; j < n_bs; ++j) {
    for (int k = 0; k < n_ue; ++k) {
      LinkState& l = links[static_cast<std::size_t>(j * n_ue + k)];
      l.lsp = draw_lsps(sc.bs_pos[static_cast<std::size_t>(j)], sc.ue_pos[static_cast<std::size_t>(k)], lsp_rng,
                        cfg.channel);
      l.clusters = draw_ssps(l.lsp, cfg.n_clusters, cfg.n_subpaths, lsp_rng, cfg.channel);
      l.rays = compose_rays(l.lsp, l.clusters, sc.bs_cfg[static_cast<std::size_t>(j)],
                            sc.ue_cfg[static_cast<std::size_t>(k)]);
      for (const Ray& r : l.rays) {
        l.origin.push_back(r.los ? sc.bs_pos[static_cast<std::size_t>(j)]
                                 : Position3D(sc.ue_pos[static_cast<std::size_t>(k)] + r.arrival * l.lsp.distance_3d));
      }
    }
  }

  const Trajectory& traj = cfg.trajectory;
  BlockerScreen screen = traj.initial(cfg.blocker_width, cfg.blocker_height, speed);

  // Initial access on the step-0 channel.
  DropResult out;
  out.drop_id = drop_id;
  out.speed = speed;
  out.assoc.resize(static_cast<std::size_t>(n_ue));
  {
    std::vector<RsrpTable> tables(static_cast<std::size_t>(n_bs));
    for (int k = 0; k < n_ue; ++k) {
      for (int j = 0; j < n_bs; ++j) {
        LinkState& l = links[static_cast<std::size_t>(j * n_ue + k)];
        update_coefficients(l, screen, sc.ue_pos[static_cast<std::size_t>(k)], false);
        const auto R = static_cast<Eigen::Index>(l.rays.size());
        Eigen::MatrixXcd tx(cfg.bs_beams(), R), rx(cfg.ue_beams(), R);
        for (Eigen::Index r = 0; r < R; ++r) {
          const Ray& ray = l.rays[static_cast<std::size_t>(r)];
          for (int b = 0; b < cfg.bs_beams(); ++b)
            tx(b, r) = beam_response(sc.bs_cfg[static_cast<std::size_t>(j)], sc.bs_codebook.beams[static_cast<std::size_t>(b)],
                                     ray.tx.theta_cos, ray.tx.phi_cos) * l.coef(r);
          for (int q = 0; q < cfg.ue_beams(); ++q)
            rx(q, r) = beam_response(sc.ue_cfg[static_cast<std::size_t>(k)], sc.ue_codebook.beams[static_cast<std::size_t>(q)],
                                     ray.rx.theta_cos, ray.rx.phi_cos);
        }
        const Eigen::MatrixXcd g = tx * rx.transpose();
        RsrpTable t(g.rows(), g.cols());
        for (Eigen::Index a = 0; a < g.rows(); ++a)
          for (Eigen::Index b = 0; b < g.cols(); ++b)
            t(a, b) = rsrp_dbm_from_snr(snr_db_from_gain(g(a, b), cfg.budget), cfg.budget);
        tables[static_cast<std::size_t>(j)] = std::move(t);
      }
      out.assoc[static_cast<std::size_t>(k)] = initial_access(k, tables);
    }
  }

  std::vector<std::vector<int>> served(static_cast<std::size_t>(n_bs));
  for (int k = 0; k < n_ue; ++k) served[static_cast<std::size_t>(out.assoc[static_cast<std::size_t>(k)].primary_bs)].push_back(k);
  for (auto& a : out.assoc) {
    a.k_primary = static_cast<int>(served[static_cast<std::size_t>(a.primary_bs)].size());
    a.k_secondary = static_cast<int>(served[static_cast<std::size_t>(a.secondary_bs)].size()) + 1;
  }

  // Beam responses needed during the drop.
  for (int j = 0; j < n_bs; ++j) {
    std::vector<int> used;
    for (int k : served[static_cast<std::size_t>(j)]) used.push_back(out.assoc[static_cast<std::size_t>(k)].primary_tx_beam);
    std::sort(used.begin(), used.end());
    used.erase(std::unique(used.begin(), used.end()), used.end());
    for (int k = 0; k < n_ue; ++k) {
      LinkState& l = links[static_cast<std::size_t>(j * n_ue + k)];
      const Association& a = out.assoc[static_cast<std::size_t>(k)];
      l.tx_ids = used;
      if (a.secondary_bs == j && l.tx_row(a.backup_tx_beam) < 0) l.tx_ids.push_back(a.backup_tx_beam);
      const auto R = static_cast<Eigen::Index>(l.rays.size());
      l.tx_resp.resize(static_cast<Eigen::Index>(l.tx_ids.size()), R);
      l.rx_resp.resize(2, R);
      for (Eigen::Index r = 0; r < R; ++r) {
        const Ray& ray = l.rays[static_cast<std::size_t>(r)];
        for (std::size_t i = 0; i < l.tx_ids.size(); ++i)
          l.tx_resp(static_cast<Eigen::Index>(i), r) = beam_response(
              sc.bs_cfg[static_cast<std::size_t>(j)], sc.bs_codebook.beam(l.tx_ids[i]), ray.tx.theta_cos, ray.tx.phi_cos);
        const auto& ucfg = sc.ue_cfg[static_cast<std::size_t>(k)];
        l.rx_resp(0, r) = beam_response(ucfg, sc.ue_codebook.beam(a.primary_rx_beam), ray.rx.theta_cos, ray.rx.phi_cos);
        l.rx_resp(1, r) = beam_response(ucfg, sc.ue_codebook.beam(a.backup_rx_beam), ray.rx.theta_cos, ray.rx.phi_cos);
      }
    }
  }

  // Round-robin order per BS, drawn once per drop.
  std::vector<std::vector<int>> order = served;
  for (auto& o : order) std::shuffle(o.begin(), o.end(), sched_rng);

  out.ues.resize(static_cast<std::size_t>(n_ue));
  std::vector<std::vector<double>> snr_clear(static_cast<std::size_t>(n_ue));
  for (int k = 0; k < n_ue; ++k) {
    UeDropSeries& u = out.ues[static_cast<std::size_t>(k)];
    u.drop_id = drop_id;
    u.ue_id = k;
    u.dt = dt;
    u.rate_primary.reserve(static_cast<std::size_t>(steps));
  }

  out.traces = BeamTraceMatrix(cfg.total_beams(), steps);
  out.traces.drop_id = drop_id;

  for (int step = 0; step < steps; ++step) {
    if (step > 0) {
      screen = advance_blocker(screen, traj, dt);
      for (auto& l : links) redraw_phases(l.clusters, phase_rng);
    }
    for (int j = 0; j < n_bs; ++j) {
      for (int k = 0; k < n_ue; ++k) {
        const bool primary = out.assoc[static_cast<std::size_t>(k)].primary_bs == j;
        update_coefficients(links[static_cast<std::size_t>(j * n_ue + k)], screen,
                            sc.ue_pos[static_cast<std::size_t>(k)], primary);
      }
    }
    std::vector<int> sched_beam(static_cast<std::size_t>(n_bs), -1);
    for (int j = 0; j < n_bs; ++j) {
      const auto& o = order[static_cast<std::size_t>(j)];
      if (o.empty()) continue;
      const int ue = o[static_cast<std::size_t>(step) % o.size()];
      sched_beam[static_cast<std::size_t>(j)] = out.assoc[static_cast<std::size_t>(ue)].primary_tx_beam;
    }

    for (int k = 0; k < n_ue; ++k) {
      const Association& a = out.assoc[static_cast<std::size_t>(k)];
      UeDropSeries& u = out.ues[static_cast<std::size_t>(k)];
      const LinkState& lp = links[static_cast<std::size_t>(a.primary_bs * n_ue + k)];
      const LinkState& lb = links[static_cast<std::size_t>(a.secondary_bs * n_ue + k)];
      const int tp = lp.tx_row(a.primary_tx_beam);
      const int tb = lb.tx_row(a.backup_tx_beam);
      const cplx g_p = pair_gain(lp.coef, lp, tp, 0);
      const cplx g_p_clear = pair_gain(lp.coef_clear, lp, tp, 0);
      const cplx g_b = pair_gain(lb.coef, lb, tb, 1);

      std::vector<InterferenceTerm> terms_p, terms_b;
      for (int j = 0; j < n_bs; ++j) {
        const int beam = sched_beam[static_cast<std::size_t>(j)];
        if (beam < 0) continue;
        const LinkState& l = links[static_cast<std::size_t>(j * n_ue + k)];
        const int row = l.tx_row(beam);
        terms_p.push_back({j, pair_gain(l.coef, l, row, 0)});
        terms_b.push_back({j, pair_gain(l.coef, l, row, 1)});
      }
      const double i_p = interference_mw(a.primary_bs, terms_p, cfg.budget);
      const double i_b = interference_mw(a.secondary_bs, terms_b, cfg.budget);

      u.rate_primary.push_back(rate_primary(g_p, a, i_p, cfg.budget));
      u.rate_backup.push_back(rate_backup(g_b, a, i_b, cfg.budget));
      u.snr_primary_db.push_back(display_snr_db(snr_db_from_gain(g_p, cfg.budget)));
      u.snr_backup_db.push_back(display_snr_db(snr_db_from_gain(g_b, cfg.budget)));
      u.gt.push_back(gt_beam_state(sc.bs_pos[static_cast<std::size_t>(a.primary_bs)],
                                   sc.ue_pos[static_cast<std::size_t>(k)], screen));
      snr_clear[static_cast<std::size_t>(k)].push_back(display_snr_db(snr_db_from_gain(g_p_clear, cfg.budget)));
    }

    // Beam-level aggregation over the UEs sharing a primary beam.
    for (int j = 0; j < n_bs; ++j) {
      std::vector<std::pair<int, int>> by_beam;  // (global beam, ue)
      for (int k : served[static_cast<std::size_t>(j)])
        by_beam.emplace_back(global_beam(j, out.assoc[static_cast<std::size_t>(k)].primary_tx_beam), k);
      std::sort(by_beam.begin(), by_beam.end());
      for (std::size_t i = 0; i < by_beam.size();) {
        std::size_t e = i;
        std::vector<double> snrs;
        std::vector<std::uint8_t> gts;
        while (e < by_beam.size() && by_beam[e].first == by_beam[i].first) {
          const auto& u = out.ues[static_cast<std::size_t>(by_beam[e].second)];
          snrs.push_back(u.snr_primary_db.back());
          gts.push_back(u.gt.back());
          ++e;
        }
        const int gb = by_beam[i].first;
        out.traces.snr(gb, step) = aggregate_snr(snrs);
        out.traces.occupancy(gb, step) = static_cast<int>(snrs.size());
        out.traces.gt(gb, step) = aggregate_gt(gts);
        i = e;
      }
    }
  }

  out.snr_clear_mean_db.resize(static_cast<std::size_t>(n_ue));
  out.bl_max_db.resize(static_cast<std::size_t>(n_ue));
  for (int k = 0; k < n_ue; ++k) {
    const auto& clear = snr_clear[static_cast<std::size_t>(k)];
    const auto& actual = out.ues[static_cast<std::size_t>(k)].snr_primary_db;
    out.snr_clear_mean_db[static_cast<std::size_t>(k)] =
        std::accumulate(clear.begin(), clear.end(), 0.0) / static_cast<double>(clear.size());
    double worst = 0.0;
    for (std::size_t i = 0; i < clear.size(); ++i) worst = std::max(worst, clear[i] - actual[i]);
    out.bl_max_db[static_cast<std::size_t>(k)] = worst;
  }
  return out;
}

DetectorConfig detector_for(const DropResult& d, int ue, const ScenarioConfig& cfg) {
  return make_detector(d.snr_clear_mean_db[static_cast<std::size_t>(ue)], d.bl_max_db[static_cast<std::size_t>(ue)],
                       cfg.min_bl_max_db);
}

}  // namespace mmbeam
