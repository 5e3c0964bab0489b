#include "mmbeam/pipeline.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <set>
#include <sstream>

#include <fmt/format.h>

#include "json.hpp"

namespace mmbeam {

namespace fs = std::filesystem;
using nlohmann::json;

std::string RunContext::header(std::string_view mode) const {
  return fmt::format("# mode={} seed={} config_hash={}", mode, seed, hash());
}

std::string fmt9(double v) { return fmt::format("{:.9g}", v); }

double percentile(const std::vector<double>& sorted, double pct) {
  if (sorted.empty()) throw std::invalid_argument("percentile of an empty set");
  const double rank = pct / 100.0 * static_cast<double>(sorted.size() - 1);
  const auto lo = static_cast<std::size_t>(std::floor(rank));
  const auto hi = std::min(lo + 1, sorted.size() - 1);
  return sorted[lo] + (rank - static_cast<double>(lo)) * (sorted[hi] - sorted[lo]);
}

void add_trace(RateBuckets& buckets, double speed, const RateTrace& trace) {
  const std::string m(method_name(trace.method));
  auto& blocked = buckets[{speed, "blocked", m}];
  auto& clear = buckets[{speed, "non-blocked", m}];
  for (const auto& r : trace.records) (r.gt ? blocked : clear).push_back(r.rate_bps);
}

std::vector<ReportRow> report(const RateBuckets& buckets, const std::vector<double>& pcts) {
  std::vector<ReportRow> rows;
  std::map<std::pair<double, std::string>, std::map<std::string, const ReportRow*>> index;
  for (const auto& [key, rates] : buckets) {
    const auto& [speed, filter, method] = key;
    ReportRow row{speed, filter, method, {}, static_cast<long>(rates.size())};
    std::vector<double> sorted = rates;
    std::sort(sorted.begin(), sorted.end());
    for (double p : pcts) {
      row.values.push_back(sorted.empty() ? std::nullopt : std::optional<double>(percentile(sorted, p)));
    }
    rows.push_back(std::move(row));
  }
  std::vector<ReportRow> gains;
  for (const auto& r : rows) index[{r.speed, r.filter}][r.method] = &r;
  for (const auto& [key, methods] : index) {
    const auto pre = methods.find("BR-Pre");
    const auto det = methods.find("BR-Det");
    if (pre == methods.end() || det == methods.end()) continue;
    ReportRow g{key.first, key.second, "BR-Pre/BR-Det", {}, 0};
    for (std::size_t i = 0; i < pcts.size(); ++i) {
      const auto& a = pre->second->values[i];
      const auto& b = det->second->values[i];
      if (a && b && *b != 0.0) {
        g.values.push_back((*a / *b - 1.0) * 100.0);
      } else {
        g.values.push_back(std::nullopt);
      }
    }
    gains.push_back(std::move(g));
  }
  rows.insert(rows.end(), gains.begin(), gains.end());
  return rows;
}

void write_traces_csv(const fs::path& path, const BeamTraceMatrix& t, const std::string& header) {
  std::ofstream f(path);
  if (!f) throw std::runtime_error("cannot write " + path.string());
  f << header << "\ndrop_id,beam_id,t_step,snr_db,occupancy,gt\n";
  for (int b = 0; b < t.beams(); ++b) {
    if (!t.occupied(b)) continue;
    for (int s = 0; s < t.steps(); ++s) {
      f << t.drop_id << ',' << b << ',' << s << ',' << fmt9(t.snr(b, s)) << ',' << t.occupancy(b, s) << ','
        << static_cast<int>(t.gt(b, s)) << '\n';
    }
  }
}

BeamTraceMatrix read_traces_csv(const fs::path& path, int n_beams, int n_steps) {
  std::ifstream f(path);
  if (!f) throw std::runtime_error("cannot read " + path.string());
  BeamTraceMatrix t(n_beams, n_steps);
  std::string line;
  bool header_seen = false;
  while (std::getline(f, line)) {
    if (line.empty() || line[0] == '#') continue;
    if (!header_seen) {
      header_seen = true;
      continue;
    }
    std::stringstream ss(line);
    std::string c[6];
    for (auto& cell : c) std::getline(ss, cell, ',');
    const int beam = std::stoi(c[1]);
    const int step = std::stoi(c[2]);
    if (beam < 0 || beam >= n_beams || step < 0 || step >= n_steps) {
      throw std::runtime_error("trace row out of range in " + path.string());
    }
    t.drop_id = std::stoi(c[0]);
    t.snr(beam, step) = std::stod(c[3]);
    t.occupancy(beam, step) = std::stoi(c[4]);
    t.gt(beam, step) = static_cast<std::uint8_t>(std::stoi(c[5]));
  }
  return t;
}

void write_rate_traces_csv(std::ostream& os, const RateTrace& tr) {
  for (const auto& r : tr.records) {
    os << tr.drop_id << ',' << tr.ue_id << ',' << fmt9(r.t) << ',' << method_name(tr.method) << ','
       << serving_name(r.serving) << ',' << static_cast<int>(r.gt) << ',' << static_cast<int>(r.pred) << ','
       << fmt9(r.rate_bps) << ',' << fmt9(r.snr_db) << '\n';
  }
}

namespace {

void log(const RunContext& ctx, const std::string& msg) {
  if (!ctx.quiet) fmt::print(stderr, "{}\n", msg);
}

struct DropIndexEntry {
  int drop_id;
  double speed;
};

std::vector<DropIndexEntry> read_drop_index(const RunContext& ctx) {
  const fs::path p = ctx.out / "traces" / "drops.csv";
  std::ifstream f(p);
  if (!f) throw std::runtime_error("missing " + p.string() + " (run simulate first)");
  std::string line;
  std::vector<DropIndexEntry> out;
  bool header_seen = false;
  while (std::getline(f, line)) {
    if (line.empty()) continue;
    if (line[0] == '#') {
      if (line.find("config_hash=" + ctx.hash()) == std::string::npos) {
        throw std::runtime_error("traces were produced with a different configuration");
      }
      continue;
    }
    if (!header_seen) {
      header_seen = true;
      continue;
    }
    const auto comma = line.find(',');
    out.push_back({std::stoi(line.substr(0, comma)), std::stod(line.substr(comma + 1))});
  }
  return out;
}

std::vector<BeamTraceMatrix> read_all_traces(const RunContext& ctx) {
  std::vector<BeamTraceMatrix> drops;
  for (const auto& e : read_drop_index(ctx)) {
    drops.push_back(read_traces_csv(ctx.out / "traces" / fmt::format("drop_{}.csv", e.drop_id),
                                    ctx.cfg.total_beams(), ctx.cfg.timing.steps_per_drop()));
    drops.back().drop_id = e.drop_id;
  }
  return drops;
}

json read_json(const fs::path& p) {
  std::ifstream f(p);
  if (!f) throw std::runtime_error("cannot read " + p.string());
  return json::parse(f);
}

CorrelatedSet corr_from_json(const json& j) {
  CorrelatedSet c;
  c.target = j.at("target").get<int>();
  c.members = j.at("members").get<std::vector<int>>();
  c.delays = j.at("delays").get<std::vector<int>>();
  c.peaks = j.at("peaks").get<std::vector<double>>();
  return c;
}

}  // namespace

void stage_simulate(const RunContext& ctx, std::optional<int> drops) {
  const int n = drops.value_or(ctx.cfg.dataset_drops);
  const Scenario sc = build_scenario(ctx.cfg, ctx.seed);
  fs::create_directories(ctx.out / "traces");
  std::ofstream idx(ctx.out / "traces" / "drops.csv");
  idx << ctx.header("simulate") << "\ndrop_id,speed\n";
  for (int i = 0; i < n; ++i) {
    const double speed = dataset_drop_speed(ctx.cfg, i);
    const DropResult d = run_drop(sc, i, speed);
    write_traces_csv(ctx.out / "traces" / fmt::format("drop_{}.csv", i), d.traces, ctx.header("simulate"));
    idx << i << ',' << fmt9(speed) << '\n';
    log(ctx, fmt::format("simulate: drop {}/{} (speed {} m/s)", i + 1, n, speed));
  }
}

void stage_select_beams(const RunContext& ctx) {
  const auto drops = read_all_traces(ctx);
  std::set<int> train_bs(ctx.cfg.train_bs.begin(), ctx.cfg.train_bs.end());
  json sets = json::array();
  for (int b = 0; b < ctx.cfg.total_beams(); ++b) {
    if (!train_bs.count(b / ctx.cfg.bs_beams())) continue;
    bool occupied = false, blocked = false;
    for (const auto& d : drops) {
      occupied = occupied || d.occupied(b);
      blocked = blocked || d.gt.row(b).any();
    }
    if (!occupied || !blocked) continue;
    const CorrelatedSet c = select_correlated_beams(drops, b, ctx.cfg.correlated_beams);
    if (static_cast<int>(c.members.size()) < ctx.cfg.correlated_beams) {
      log(ctx, fmt::format("select-beams: beam {} has only {} candidates, skipped", b, c.members.size()));
      continue;
    }
    sets.push_back({{"target", c.target}, {"members", c.members}, {"delays", c.delays}, {"peaks", c.peaks}});
  }
  json j{{"config_hash", ctx.hash()}, {"seed", ctx.seed}, {"sets", sets}};
  std::ofstream f(ctx.out / "correlated.json");
  f << j.dump(1) << '\n';
  log(ctx, fmt::format("select-beams: {} target beams", sets.size()));
}

void stage_build_dataset(const RunContext& ctx) {
  const json corr = read_json(ctx.out / "correlated.json");
  if (corr.at("config_hash").get<std::string>() != ctx.hash()) {
    throw std::runtime_error("correlated.json was produced with a different configuration");
  }
  const auto drops = read_all_traces(ctx);
  fs::create_directories(ctx.out / "dataset");
  const WindowSpec w = ctx.cfg.window();
  for (const auto& s : corr.at("sets")) {
    const CorrelatedSet c = corr_from_json(s);
    const auto samples = build_dataset(drops, c, w);
    write_dataset_csv(ctx.out / "dataset" / fmt::format("beam_{}.csv", c.target), samples, w,
                      1 + static_cast<int>(c.members.size()), ctx.header("build-dataset"));
  }
  log(ctx, fmt::format("build-dataset: {} beams", corr.at("sets").size()));
}

void stage_train(const RunContext& ctx) {
  const json corr = read_json(ctx.out / "correlated.json");
  if (corr.at("config_hash").get<std::string>() != ctx.hash()) {
    throw std::runtime_error("correlated.json was produced with a different configuration");
  }
  fs::create_directories(ctx.out / "models");
  std::ofstream m(ctx.out / "training_metrics.csv");
  m << ctx.header("train") << '\n'
    << "beam_id,bs,status,train_samples,train_blocked,val_samples,tp,fp,tn,fn,precision,recall,f1,l2\n";
  const WindowSpec w = ctx.cfg.window();
  for (const auto& s : corr.at("sets")) {
    const CorrelatedSet c = corr_from_json(s);
    const auto samples = read_dataset_csv(ctx.out / "dataset" / fmt::format("beam_{}.csv", c.target));
    Rng rng = stream_rng(ctx.seed, static_cast<std::uint64_t>(c.target), 7);
    const int bs = c.target / ctx.cfg.bs_beams();
    try {
      TrainResult r = train(samples, c, w, ctx.cfg.train, rng);
      r.model.config_hash = ctx.hash();
      r.model.seed = ctx.seed;
      write_model_json(ctx.out / "models" / fmt::format("beam_{}.json", c.target), r.model, ctx.cfg.train);
      const Metrics& v = r.validation;
      m << c.target << ',' << bs << ",trained," << r.train_samples << ',' << r.train_blocked << ','
        << r.validation_samples << ',' << v.tp << ',' << v.fp << ',' << v.tn << ',' << v.fn << ','
        << fmt9(v.precision) << ',' << fmt9(v.recall) << ',' << fmt9(v.f1) << ',' << fmt9(r.model.l2) << '\n';
      log(ctx, fmt::format("train: beam {} F1 {:.3f} P {:.3f} R {:.3f}", c.target, v.f1, v.precision, v.recall));
    } catch (const TrainingError& e) {
      m << c.target << ',' << bs << ",skipped,,,,,,,,,,,\n";
      log(ctx, fmt::format("train: beam {} skipped: {}", c.target, e.what()));
    }
  }
}

std::map<int, DnnModel> load_models(const RunContext& ctx, const fs::path& dir) {
  std::map<int, DnnModel> out;
  if (!fs::exists(dir)) return out;
  std::vector<fs::path> files;
  for (const auto& e : fs::directory_iterator(dir))
    if (e.path().extension() == ".json") files.push_back(e.path());
  std::sort(files.begin(), files.end());
  for (const auto& p : files) {
    DnnModel m = read_model_json(p);
    if (m.config_hash != ctx.hash() || m.seed != ctx.seed) {
      throw std::runtime_error(fmt::format("model {} was trained for config {} seed {}, not config {} seed {}",
                                           p.string(), m.config_hash, m.seed, ctx.hash(), ctx.seed));
    }
    out.emplace(m.beam, std::move(m));
  }
  return out;
}

std::vector<RateTrace> run_methods(const Scenario& sc, const DropResult& d, const std::vector<Method>& methods,
                                   const std::map<int, DnnModel>& models) {
  const ScenarioConfig& cfg = sc.cfg;
  std::map<int, std::vector<std::int8_t>> beam_predictions;
  std::vector<RateTrace> out;
  for (int k = 0; k < cfg.n_ues; ++k) {
    const Association& a = d.assoc[static_cast<std::size_t>(k)];
    if (a.primary_bs != cfg.focus_bs) continue;
    const UeDropSeries& ue = d.ues[static_cast<std::size_t>(k)];
    const DetectorConfig det = detector_for(d, k, cfg);
    for (Method m : methods) {
      switch (m) {
        case Method::kBf: out.push_back(run_bf(ue)); break;
        case Method::kBrDet: out.push_back(run_br_det(ue, det, cfg.timing, cfg.bs_beams(), cfg.ue_beams())); break;
        case Method::kGt: out.push_back(run_gt(ue)); break;
        case Method::kBrPre: {
          const int gb = global_beam(a.primary_bs, a.primary_tx_beam);
          std::span<const std::int8_t> pred;
          if (const auto it = models.find(gb); it != models.end()) {
            auto [pit, fresh] = beam_predictions.try_emplace(gb);
            if (fresh) pit->second = predict_series(it->second, d.traces);
            pred = pit->second;
          }
          out.push_back(run_br_pre(ue, pred, cfg.eta_s, det, cfg.timing, cfg.bs_beams(), cfg.ue_beams()));
          break;
        }
      }
    }
  }
  return out;
}

void stage_evaluate(const RunContext& ctx, const EvalOptions& opt) {
  const bool need_models = std::find(opt.methods.begin(), opt.methods.end(), Method::kBrPre) != opt.methods.end();
  std::map<int, DnnModel> models;
  if (need_models) {
    models = load_models(ctx, opt.models.empty() ? ctx.out / "models" : opt.models);
    log(ctx, fmt::format("evaluate: {} predictors loaded", models.size()));
  }
  const Scenario sc = build_scenario(ctx.cfg, ctx.seed);
  const int n = opt.drops.value_or(ctx.cfg.eval_drops);
  const auto speeds = opt.speeds.empty() ? ctx.cfg.speeds : opt.speeds;
  fs::create_directories(ctx.out / "eval");

  RateBuckets buckets;
  for (double speed : speeds) {
    std::ofstream rates(ctx.out / "eval" / fmt::format("rates_speed_{}.csv", fmt9(speed)));
    rates << ctx.header("evaluate") << "\ndrop_id,ue_id,t,method,serving,gt_state,pred_state,rate_bps,snr_db\n";
    for (int i = 0; i < n; ++i) {
      const DropResult d = run_drop(sc, eval_drop_id(speed, i), speed);
      for (const auto& tr : run_methods(sc, d, opt.methods, models)) {
        write_rate_traces_csv(rates, tr);
        add_trace(buckets, speed, tr);
      }
      log(ctx, fmt::format("evaluate: speed {} drop {}/{}", speed, i + 1, n));
    }
  }

  const std::vector<double> pcts{25.0, 50.0, 75.0};
  std::ofstream rep(ctx.out / "report_percentiles.csv");
  rep << ctx.header("evaluate") << "\nspeed,filter,method,p25,p50,p75,samples\n";
  for (const auto& row : report(buckets, pcts)) {
    rep << fmt9(row.speed) << ',' << row.filter << ',' << row.method;
    for (const auto& v : row.values) rep << ',' << (v ? fmt9(*v) : std::string("absent"));
    rep << ',' << row.samples << '\n';
  }

  std::ofstream cdf(ctx.out / "cdf_points.csv");
  cdf << ctx.header("evaluate") << "\nspeed,filter,method,rate_bps,probability\n";
  for (const auto& [key, rates] : buckets) {
    std::vector<double> sorted = rates;
    std::sort(sorted.begin(), sorted.end());
    const auto& [speed, filter, method] = key;
    for (std::size_t i = 0; i < sorted.size(); ++i) {
      cdf << fmt9(speed) << ',' << filter << ',' << method << ',' << fmt9(sorted[i]) << ','
          << fmt9(static_cast<double>(i + 1) / static_cast<double>(sorted.size())) << '\n';
    }
  }
}

void stage_compare(const RunContext& ctx, const EvalOptions& opt) {
  stage_simulate(ctx);
  stage_select_beams(ctx);
  stage_build_dataset(ctx);
  stage_train(ctx);
  stage_evaluate(ctx, opt);
}

}  // namespace mmbeam
