// End-to-end acceptance checks. Usage: acceptance <mmbeam binary> <work dir>

#include <algorithm>
#include <chrono>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iostream>
#include <map>
#include <random>
#include <sstream>
#include <string>
#include <vector>

#include <fmt/format.h>

#include "knife_edge_oracle.hpp"
#include "mmbeam/pipeline.hpp"

using namespace mmbeam;
namespace fs = std::filesystem;
using Clock = std::chrono::steady_clock;

namespace {

double seconds_since(Clock::time_point t0) {
  return std::chrono::duration<double>(Clock::now() - t0).count();
}

struct Outcome {
  bool pass = false;
  std::string detail;
};

int failures = 0;

void report_line(int id, const Outcome& o, double secs) {
  std::cout << fmt::format("criterion {:>2}: {} ({:.1f} s) {}", id, o.pass ? "PASS" : "FAIL", secs, o.detail)
            << std::endl;
  if (!o.pass) ++failures;
}

void run(int id, const std::function<Outcome()>& f, double limit_s) {
  const auto t0 = Clock::now();
  Outcome o;
  try {
    o = f();
  } catch (const std::exception& e) {
    o = {false, std::string("exception: ") + e.what()};
  }
  const double secs = seconds_since(t0);
  if (o.pass && secs > limit_s) o = {false, fmt::format("{} but exceeded {:.0f} s", o.detail, limit_s)};
  report_line(id, o, secs);
}

using Row = std::map<std::string, std::string>;

std::vector<Row> read_csv(const fs::path& p) {
  std::ifstream f(p);
  if (!f) throw std::runtime_error("cannot read " + p.string());
  std::string line;
  std::vector<std::string> cols;
  std::vector<Row> rows;
  while (std::getline(f, line)) {
    if (line.empty() || line[0] == '#') continue;
    std::vector<std::string> cells;
    std::stringstream ss(line);
    std::string c;
    while (std::getline(ss, c, ',')) cells.push_back(c);
    if (cols.empty()) {
      cols = cells;
      continue;
    }
    Row r;
    for (std::size_t i = 0; i < cols.size() && i < cells.size(); ++i) r[cols[i]] = cells[i];
    rows.push_back(std::move(r));
  }
  return rows;
}

double p25_of(const std::vector<Row>& rep, const std::string& speed, const std::string& filter,
              const std::string& method, const std::string& col = "p25") {
  for (const auto& r : rep) {
    if (r.at("speed") == speed && r.at("filter") == filter && r.at("method") == method) {
      if (r.at(col) == "absent") throw std::runtime_error(method + " " + col + " absent");
      return std::stod(r.at(col));
    }
  }
  throw std::runtime_error("no report row for " + method + " at speed " + speed);
}

std::string slurp(const fs::path& p) {
  std::ifstream f(p, std::ios::binary);
  std::ostringstream ss;
  ss << f.rdbuf();
  return ss.str();
}

// ---- unit-level criteria -------------------------------------------------

Outcome sweep_timing() {
  const double t = t_sweep(64, 16, NrTiming{});
  return {t == 0.330, fmt::format("t_sweep = {:.17g} s", t)};
}

Outcome knife_edge_equivalence() {
  const double lambda = 299792458.0 / 28e9;
  std::mt19937_64 rng(2024);
  std::uniform_real_distribution<double> xy(-20.0, 20.0), z(0.5, 3.0), u(0.0, 1.0);
  double worst = 0.0;
  int los = 0, nlos = 0, lossy = 0;
  for (int i = 0; i < 1000; ++i) {
    const Position3D tx(xy(rng), xy(rng), z(rng)), rx(xy(rng), xy(rng), z(rng));
    Position3D c = tx + u(rng) * (rx - tx);
    c.x() += 3.0 * (u(rng) - 0.5);
    c.y() += 3.0 * (u(rng) - 0.5);
    BlockerScreen s;
    s.width = 0.5 + 2.0 * u(rng);
    s.height = 1.0 + 2.0 * u(rng);
    s.center = Position3D(c.x(), c.y(), s.height / 2.0);
    const bool is_nlos = u(rng) < 0.4;
    (is_nlos ? nlos : los)++;
    const double got = knife_edge_loss(tx, rx, s, is_nlos ? PathKind::kNlos : PathKind::kLos, lambda);
    const double ref = oracle::knife_edge_db({tx.x(), tx.y(), tx.z()}, {rx.x(), rx.y(), rx.z()},
                                             {s.center.x(), s.center.y(), s.center.z()}, s.width, s.height,
                                             lambda, is_nlos);
    worst = std::max(worst, std::abs(got - ref));
    lossy += got > 1.0;
  }
  // Screens beside or beyond the link.
  bool far_zero = true;
  for (int i = 0; i < 100; ++i) {
    const Position3D tx(0, 0, 3), rx(10, 0, 1);
    BlockerScreen s;
    s.center = Position3D(i % 2 ? -5.0 - i * 0.1 : 15.0 + i * 0.1, u(rng) * 4.0 - 2.0, 1.5);
    far_zero = far_zero && knife_edge_loss(tx, rx, s, PathKind::kLos, lambda) == 0.0;
  }
  return {worst <= 1e-9 && far_zero,
          fmt::format("max |diff| = {:.3g} dB over {} LoS / {} NLoS cases ({} above 1 dB), far screens zero: {}", worst,
                      los, nlos, lossy, far_zero)};
}

Outcome gradient_check() {
  double worst = 0.0;
  for (int model = 0; model < 3; ++model) {
    Rng rng(100 + model);
    Mlp net({60, 20, 20, 2});
    net.he_init(rng);
    std::normal_distribution<double> g;
    for (auto& b : net.biases())
      for (Eigen::Index i = 0; i < b.size(); ++i) b(i) = 0.1 * g(rng);
    Eigen::MatrixXd x(10, 60);
    Eigen::VectorXi y(10);
    for (int i = 0; i < 10; ++i) {
      for (int j = 0; j < 60; ++j) x(i, j) = g(rng);
      y(i) = i % 4 == 0;
    }
    const ClassWeights cw{1.0 / 0.7, 1.0 / 0.3};
    const double l2 = 1e-3;
    Mlp::Gradients grad;
    net.loss(x, y, cw, l2, &grad);
    const double h = 1e-5;
    auto probe = [&](double& p, double analytic) {
      const double keep = p;
      p = keep + h;
      const double lp = net.loss(x, y, cw, l2);
      p = keep - h;
      const double lm = net.loss(x, y, cw, l2);
      p = keep;
      const double num = (lp - lm) / (2.0 * h);
      const double denom = std::max(std::abs(num) + std::abs(analytic), 1e-8);
      worst = std::max(worst, std::abs(num - analytic) / denom);
    };
    for (std::size_t l = 0; l < net.layers(); ++l) {
      auto& w = net.weights()[l];
      for (Eigen::Index i = 0; i < w.rows(); ++i)
        for (Eigen::Index j = 0; j < w.cols(); ++j) probe(w(i, j), grad.weights[l](i, j));
      auto& b = net.biases()[l];
      for (Eigen::Index i = 0; i < b.size(); ++i) probe(b(i), grad.biases[l](i));
    }
  }
  return {worst < 1e-4, fmt::format("max relative error {:.3g}", worst)};
}

Outcome delay_recovery() {
  // Beam 0 is the target with an impulse at step 100; beam k has its impulse
  // s = k - 6 steps earlier, so s runs over -5..5.
  BeamTraceMatrix d(12, 200);
  d.snr.setConstant(30.0);
  d.occupancy.setOnes();
  d.snr(0, 100) = 0.0;
  for (int k = 1; k <= 11; ++k) d.snr(k, 100 - (k - 6)) = 0.0;
  const std::vector<BeamTraceMatrix> drops{d};
  const CorrelatedSet set = select_correlated_beams(drops, 0, 11);
  int ok = 0;
  for (std::size_t i = 0; i < set.members.size(); ++i) ok += set.delays[i] == set.members[i] - 6;
  return {ok == 11 && set.members.size() == 11u, fmt::format("{}/11 shifts recovered exactly", ok)};
}

Outcome toy_training() {
  Rng data(5);
  std::uniform_real_distribution<double> level(20.0, 80.0), noise(-1.0, 1.0);
  std::vector<DatasetSample> ds;
  for (int d = 0; d < 10; ++d) {
    for (int k = 0; k < 200; ++k) {
      DatasetSample s;
      s.drop_id = d;
      s.t_step = k;
      s.x.resize(60);
      double m = level(data);
      m += m < 50.0 ? -10.0 : 10.0;  // margin of 10 dB around the boundary
      double sum = 0.0;
      for (int r = 0; r < 10; ++r) {
        for (int c = 0; c < 6; ++c) s.x(r * 6 + c) = c == 0 ? m + noise(data) : level(data);
        sum += s.x(r * 6);
      }
      s.y = sum / 10.0 < 50.0;
      ds.push_back(std::move(s));
    }
  }
  TrainConfig cfg;
  cfg.batch_size = 100;
  cfg.epochs = 50;
  cfg.l2_grid = {1e-4};
  cfg.restarts = 1;
  Rng rng(6);
  const TrainResult r = train(ds, CorrelatedSet{0, {1, 2, 3, 4, 5}, {0, 0, 0, 0, 0}, {}}, WindowSpec{}, cfg, rng);
  return {r.validation.f1 >= 0.99, fmt::format("validation F1 {:.4f}", r.validation.f1)};
}

Outcome perfect_predictor() {
  const ScenarioConfig cfg = ScenarioConfig::desk();
  const Scenario sc = build_scenario(cfg, 42);
  long steps = 0, mismatched = 0;
  for (int i = 0; i < cfg.eval_drops; ++i) {
    const DropResult d = run_drop(sc, eval_drop_id(2.0, i), 2.0);
    for (int k = 0; k < cfg.n_ues; ++k) {
      const UeDropSeries& ue = d.ues[static_cast<std::size_t>(k)];
      const std::vector<std::int8_t> oracle(ue.gt.begin(), ue.gt.end());
      const RateTrace pre = run_br_pre(ue, oracle, cfg.eta_s, detector_for(d, k, cfg), cfg.timing);
      const RateTrace gt = run_gt(ue);
      for (std::size_t s = 0; s < gt.records.size(); ++s) {
        ++steps;
        mismatched += pre.records[s].rate_bps != gt.records[s].rate_bps || pre.records[s].serving != gt.records[s].serving;
      }
    }
  }
  return {mismatched == 0 && steps > 0, fmt::format("{} of {} UE-steps differ", mismatched, steps)};
}

// ---- campaign criteria ---------------------------------------------------

double run_compare(const std::string& cli, const fs::path& out) {
  fs::remove_all(out);
  const std::string cmd = fmt::format("\"{}\" compare --seed 42 --desk-scale -q --out \"{}\"", cli, out.string());
  const auto t0 = Clock::now();
  const int rc = std::system(cmd.c_str());
  if (rc != 0) throw std::runtime_error(fmt::format("'{}' exited with {}", cmd, rc));
  return seconds_since(t0);
}

Outcome dnn_quality(const fs::path& out) {
  const auto rows = read_csv(out / "training_metrics.csv");
  std::vector<const Row*> trained;
  for (const auto& r : rows)
    if (r.at("bs") == "2" && r.at("status") == "trained") trained.push_back(&r);
  if (trained.empty()) return {false, "no trained beams on BS-3"};
  std::vector<int> blocked;
  for (const auto* r : trained) blocked.push_back(std::stoi(r->at("train_blocked")));
  std::vector<int> sorted = blocked;
  std::sort(sorted.begin(), sorted.end());
  const int median = sorted[sorted.size() / 2];
  int frequent = 0, good = 0;
  double best_f1 = 0.0;
  std::string best_beam;
  for (const auto* r : trained) {
    if (std::stoi(r->at("train_blocked")) < median) continue;
    ++frequent;
    const double f1 = std::stod(r->at("f1"));
    const double p = std::stod(r->at("precision"));
    const double rc = std::stod(r->at("recall"));
    if (f1 >= 0.7 && rc >= p) ++good;
    if (f1 > best_f1) {
      best_f1 = f1;
      best_beam = r->at("beam_id");
    }
  }
  return {good > 0, fmt::format("{} of {} frequently-blocked BS-3 beams reach F1 >= 0.7 with R >= P (best F1 {:.3f} on beam {})",
                                good, frequent, best_f1, best_beam)};
}

Outcome method_ordering(const fs::path& out) {
  const auto rep = read_csv(out / "report_percentiles.csv");
  const double gt = p25_of(rep, "2", "blocked", "GT");
  const double pre = p25_of(rep, "2", "blocked", "BR-Pre");
  const double det = p25_of(rep, "2", "blocked", "BR-Det");
  const double bf = p25_of(rep, "2", "blocked", "BF");
  return {gt >= pre && pre > det && det > bf,
          fmt::format("p25 blocked at 2 m/s [Mbps]: GT {:.2f}, BR-Pre {:.2f}, BR-Det {:.2f}, BF {:.2f}", gt / 1e6,
                      pre / 1e6, det / 1e6, bf / 1e6)};
}

Outcome speed_sensitivity(const fs::path& out) {
  const auto rep = read_csv(out / "report_percentiles.csv");
  const double g1 = p25_of(rep, "1", "blocked", "BR-Pre/BR-Det");
  const double g2 = p25_of(rep, "2", "blocked", "BR-Pre/BR-Det");
  return {g2 > g1, fmt::format("BR-Pre over BR-Det p25 blocked gain: {:.1f}% at 1 m/s, {:.1f}% at 2 m/s", g1, g2)};
}

Outcome nonblocked_penalty(const fs::path& out) {
  const auto rep = read_csv(out / "report_percentiles.csv");
  bool ok = true;
  std::string detail;
  for (const std::string speed : {"1", "2"}) {
    const double pre = p25_of(rep, speed, "non-blocked", "BR-Pre", "p50");
    const double det = p25_of(rep, speed, "non-blocked", "BR-Det", "p50");
    const double rel = std::abs(pre / det - 1.0);
    ok = ok && rel <= 0.10;
    detail += fmt::format("{}median non-blocked BR-Pre/BR-Det - 1 = {:.2f}% at {} m/s", detail.empty() ? "" : "; ",
                          (pre / det - 1.0) * 100.0, speed);
  }
  return {ok, detail};
}

Outcome determinism(const fs::path& a, const fs::path& b, double ta, double tb) {
  int files = 0, differ = 0;
  std::string first_diff;
  for (const auto& e : fs::recursive_directory_iterator(a)) {
    if (!e.is_regular_file() || e.path().extension() != ".csv") continue;
    ++files;
    const fs::path other = b / fs::relative(e.path(), a);
    if (!fs::exists(other) || slurp(e.path()) != slurp(other)) {
      ++differ;
      if (first_diff.empty()) first_diff = fs::relative(e.path(), a).string();
    }
  }
  const bool ok = files > 0 && differ == 0 && tb < 2.0 * ta;
  return {ok, fmt::format("{} CSVs compared, {} differ{}; run times {:.0f} s and {:.0f} s", files, differ,
                          first_diff.empty() ? "" : " (first: " + first_diff + ")", ta, tb)};
}

}  // namespace

int main(int argc, char** argv) {
  if (argc < 3) {
    std::cerr << "usage: acceptance <mmbeam binary> <work dir>\n";
    return 2;
  }
  const std::string cli = argv[1];
  const fs::path work = argv[2];
  fs::create_directories(work);

  run(1, sweep_timing, 1.0);
  run(2, knife_edge_equivalence, 5.0);
  run(3, gradient_check, 10.0);
  run(4, delay_recovery, 5.0);
  run(5, toy_training, 60.0);

  const fs::path run_a = work / "run_a", run_b = work / "run_b";
  double ta = 0.0;
  bool have_a = false;
  try {
    ta = run_compare(cli, run_a);
    have_a = true;
  } catch (const std::exception& e) {
    std::cout << "compare run failed: " << e.what() << std::endl;
  }
  auto campaign = [&](int id, const std::function<Outcome()>& f, double limit) {
    if (!have_a) {
      report_line(id, {false, "compare run failed"}, 0.0);
      return;
    }
    // The whole campaign is the runtime that counts for these criteria.
    const auto t0 = Clock::now();
    Outcome o;
    try {
      o = f();
    } catch (const std::exception& e) {
      o = {false, std::string("exception: ") + e.what()};
    }
    if (o.pass && ta > limit) o = {false, fmt::format("{} but the campaign took {:.0f} s", o.detail, ta)};
    report_line(id, o, ta + seconds_since(t0));
  };
  campaign(6, [&] { return dnn_quality(run_a); }, 600.0);
  campaign(7, [&] { return method_ordering(run_a); }, 900.0);
  run(8, perfect_predictor, 120.0);
  campaign(9, [&] { return speed_sensitivity(run_a); }, 900.0);
  campaign(10, [&] { return nonblocked_penalty(run_a); }, 900.0);

  {
    const auto t0 = Clock::now();
    Outcome o;
    try {
      if (!have_a) throw std::runtime_error("first compare run failed");
      const double tb = run_compare(cli, run_b);
      o = determinism(run_a, run_b, ta, tb);
    } catch (const std::exception& e) {
      o = {false, std::string("exception: ") + e.what()};
    }
    report_line(11, o, seconds_since(t0));
  }

  std::cout << (failures == 0 ? "all criteria passed" : fmt::format("{} criteria failed", failures)) << std::endl;
  return failures == 0 ? 0 : 1;
}
