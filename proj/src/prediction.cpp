#include "mmbeam/prediction.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <map>
#include <numeric>
#include <set>
#include <sstream>

#include <fmt/format.h>

#include "json.hpp"

namespace mmbeam {

using nlohmann::json;

BeamTraceMatrix::BeamTraceMatrix(int n_beams, int n_steps)
    : snr(Eigen::MatrixXd::Constant(n_beams, n_steps, kFillerSnrDb)),
      occupancy(Eigen::MatrixXi::Zero(n_beams, n_steps)),
      gt(Eigen::Matrix<std::uint8_t, Eigen::Dynamic, Eigen::Dynamic>::Zero(n_beams, n_steps)) {}

double aggregate_snr(std::vector<double> snrs) {
  if (snrs.empty()) return kFillerSnrDb;
  std::sort(snrs.begin(), snrs.end());
  const std::size_t n = snrs.size();
  return n % 2 == 1 ? snrs[n / 2] : 0.5 * (snrs[n / 2 - 1] + snrs[n / 2]);
}

std::uint8_t aggregate_gt(std::span<const std::uint8_t> labels) {
  std::size_t blocked = 0;
  for (auto v : labels) blocked += v ? 1 : 0;
  if (labels.empty()) return 0;
  return 2 * blocked >= labels.size() ? 1 : 0;
}

std::vector<double> cross_correlation(std::span<const double> a, std::span<const double> b) {
  if (a.size() != b.size()) throw std::invalid_argument("cross-correlation needs equal-length series");
  const int n = static_cast<int>(a.size());
  std::vector<double> r(static_cast<std::size_t>(2 * n - 1), 0.0);
  for (int tau = -(n - 1); tau <= n - 1; ++tau) {
    double acc = 0.0;
    const int lo = std::max(0, tau);
    const int hi = std::min(n, n + tau);
    for (int t = lo; t < hi; ++t) acc += a[static_cast<std::size_t>(t)] * b[static_cast<std::size_t>(t - tau)];
    r[static_cast<std::size_t>(tau + n - 1)] = acc;
  }
  return r;
}

namespace {

std::vector<double> centred_row(const BeamTraceMatrix& d, int beam) {
  std::vector<double> v(static_cast<std::size_t>(d.steps()));
  double mean = 0.0;
  for (int t = 0; t < d.steps(); ++t) mean += d.snr(beam, t);
  mean /= d.steps();
  for (int t = 0; t < d.steps(); ++t) v[static_cast<std::size_t>(t)] = d.snr(beam, t) - mean;
  return v;
}

bool all_zero(const std::vector<double>& v) {
  return std::all_of(v.begin(), v.end(), [](double x) { return std::abs(x) < 1e-12; });
}

}  // namespace

CorrelatedSet select_correlated_beams(std::span<const BeamTraceMatrix> drops, int target, int count) {
  if (drops.empty()) throw std::invalid_argument("no drops to correlate");
  const int n_beams = drops.front().beams();
  const int n_steps = drops.front().steps();
  if (target < 0 || target >= n_beams) throw std::out_of_range("target beam out of range");
  if (count >= n_beams) throw std::invalid_argument("more correlated beams requested than exist");
  for (const auto& d : drops) {
    if (d.beams() != n_beams || d.steps() != n_steps) throw std::invalid_argument("drops have different shapes");
  }

  std::vector<std::vector<double>> target_rows;
  target_rows.reserve(drops.size());
  for (const auto& d : drops) target_rows.push_back(centred_row(d, target));

  struct Candidate {
    int beam;
    int delay;
    double peak;
  };
  std::vector<Candidate> cands;
  for (int b = 0; b < n_beams; ++b) {
    if (b == target) continue;
    std::vector<double> r(static_cast<std::size_t>(2 * n_steps - 1), 0.0);
    bool varies = false;
    for (std::size_t i = 0; i < drops.size(); ++i) {
      const auto& d = drops[i];
      // Unoccupied rows are pure filler and centre to zero.
      if (!d.occupancy.row(b).any()) continue;
      const auto row = centred_row(d, b);
      if (all_zero(row)) continue;
      varies = true;
      const auto ri = cross_correlation(target_rows[i], row);
      for (std::size_t k = 0; k < r.size(); ++k) r[k] += ri[k];
    }
    if (!varies) continue;
    // Argmax with ties going to the smallest |tau|, then the negative side.
    int best = 0;
    double peak = -std::numeric_limits<double>::infinity();
    for (int tau = -(n_steps - 1); tau <= n_steps - 1; ++tau) {
      const double v = r[static_cast<std::size_t>(tau + n_steps - 1)];
      if (v > peak || (v == peak && std::abs(tau) < std::abs(best))) {
        peak = v;
        best = tau;
      }
    }
    cands.push_back({b, best, peak});
  }
  std::sort(cands.begin(), cands.end(), [](const Candidate& a, const Candidate& b) {
    if (std::abs(a.delay) != std::abs(b.delay)) return std::abs(a.delay) < std::abs(b.delay);
    if (a.peak != b.peak) return a.peak > b.peak;
    return a.beam < b.beam;
  });
  CorrelatedSet out;
  out.target = target;
  for (int i = 0; i < std::min<int>(count, static_cast<int>(cands.size())); ++i) {
    out.members.push_back(cands[static_cast<std::size_t>(i)].beam);
    out.delays.push_back(cands[static_cast<std::size_t>(i)].delay);
    out.peaks.push_back(cands[static_cast<std::size_t>(i)].peak);
  }
  return out;
}

Eigen::RowVectorXd window_features(const BeamTraceMatrix& drop, const CorrelatedSet& corr, int t,
                                   const WindowSpec& w) {
  const int cols = 1 + static_cast<int>(corr.members.size());
  const int last = t - w.eta_steps;
  const int first = last - (w.eps_steps - 1);
  if (first < 0 || t >= drop.steps()) throw std::out_of_range("window does not fit in the drop");
  Eigen::RowVectorXd x(w.eps_steps * cols);
  for (int r = 0; r < w.eps_steps; ++r) {
    x(r * cols) = drop.snr(corr.target, first + r);
    for (int c = 1; c < cols; ++c) x(r * cols + c) = drop.snr(corr.members[static_cast<std::size_t>(c - 1)], first + r);
  }
  return x;
}

std::vector<DatasetSample> build_dataset(std::span<const BeamTraceMatrix> drops, const CorrelatedSet& corr,
                                         const WindowSpec& w) {
  std::vector<DatasetSample> out;
  for (const auto& d : drops) {
    for (int t = first_sample_step(w); t < d.steps(); ++t) {
      DatasetSample s;
      s.drop_id = d.drop_id;
      s.t_step = t;
      s.y = d.gt(corr.target, t);
      s.x = window_features(d, corr, t, w);
      out.push_back(std::move(s));
    }
  }
  return out;
}

Metrics metrics_from_counts(long tp, long fp, long tn, long fn) {
  Metrics m{tp, fp, tn, fn, 0.0, 0.0, 0.0};
  if (tp + fp > 0) m.precision = static_cast<double>(tp) / static_cast<double>(tp + fp);
  if (tp + fn > 0) m.recall = static_cast<double>(tp) / static_cast<double>(tp + fn);
  if (m.precision + m.recall > 0.0) m.f1 = 2.0 * m.precision * m.recall / (m.precision + m.recall);
  return m;
}

Metrics evaluate(std::span<const std::uint8_t> predicted, std::span<const std::uint8_t> labels) {
  if (predicted.size() != labels.size()) throw std::invalid_argument("prediction and label counts differ");
  long tp = 0, fp = 0, tn = 0, fn = 0;
  for (std::size_t i = 0; i < labels.size(); ++i) {
    const bool p = predicted[i] != 0;
    const bool y = labels[i] != 0;
    tp += p && y;
    fp += p && !y;
    tn += !p && !y;
    fn += !p && y;
  }
  return metrics_from_counts(tp, fp, tn, fn);
}

Eigen::VectorXd DnnModel::predict_proba(const Eigen::MatrixXd& x) const {
  Eigen::MatrixXd centred = x;
  centred.rowwise() -= mean;
  return net.predict_proba(centred).col(1);
}

Prediction predict(const DnnModel& model, const Eigen::RowVectorXd& x) {
  const double p = model.predict_proba(x)(0);
  return {static_cast<std::uint8_t>(p >= model.threshold ? 1 : 0), p};
}

std::vector<std::int8_t> predict_series(const DnnModel& model, const BeamTraceMatrix& drop) {
  std::vector<std::int8_t> out(static_cast<std::size_t>(drop.steps()), -1);
  const int first = first_sample_step(model.window);
  if (first >= drop.steps()) return out;
  const int n = drop.steps() - first;
  Eigen::MatrixXd x(n, model.mean.size());
  for (int t = first; t < drop.steps(); ++t) x.row(t - first) = window_features(drop, model.corr, t, model.window);
  const Eigen::VectorXd p = model.predict_proba(x);
  for (int i = 0; i < n; ++i) out[static_cast<std::size_t>(first + i)] = p(i) >= model.threshold ? 1 : 0;
  return out;
}

Mlp train_network(const Eigen::MatrixXd& x, const Eigen::VectorXi& y, const ClassWeights& cw, double l2,
                  const TrainConfig& cfg, Rng& rng) {
  std::vector<int> sizes{static_cast<int>(x.cols())};
  sizes.insert(sizes.end(), cfg.hidden.begin(), cfg.hidden.end());
  sizes.push_back(2);
  Mlp net(sizes);
  net.he_init(rng);
  AdamOptimizer opt(net, cfg.adam);

  const auto n = static_cast<int>(x.rows());
  std::vector<int> order(static_cast<std::size_t>(n));
  std::iota(order.begin(), order.end(), 0);
  Mlp::Gradients grad;
  for (int epoch = 0; epoch < cfg.epochs; ++epoch) {
    std::shuffle(order.begin(), order.end(), rng);
    for (int start = 0; start < n; start += cfg.batch_size) {
      const int m = std::min(cfg.batch_size, n - start);
      Eigen::MatrixXd xb(m, x.cols());
      Eigen::VectorXi yb(m);
      for (int i = 0; i < m; ++i) {
        const int idx = order[static_cast<std::size_t>(start + i)];
        xb.row(i) = x.row(idx);
        yb(i) = y(idx);
      }
      const double loss = net.loss(xb, yb, cw, l2, &grad);
      if (!std::isfinite(loss)) {
        throw TrainingError(fmt::format("loss became non-finite at epoch {} (l2 = {})", epoch, l2));
      }
      opt.step(net, grad);
    }
  }
  return net;
}

TrainResult train(const std::vector<DatasetSample>& samples, const CorrelatedSet& corr, const WindowSpec& w,
                  const TrainConfig& cfg, Rng& rng) {
  if (samples.empty()) throw TrainingError("empty dataset");
  std::set<int> drop_set;
  for (const auto& s : samples) drop_set.insert(s.drop_id);
  const std::vector<int> drop_ids(drop_set.begin(), drop_set.end());
  const auto n_train_drops =
      static_cast<std::size_t>(std::lround(cfg.train_fraction * static_cast<double>(drop_ids.size())));
  const std::set<int> train_drops(drop_ids.begin(), drop_ids.begin() + static_cast<long>(n_train_drops));

  std::vector<const DatasetSample*> tr, va;
  for (const auto& s : samples) (train_drops.count(s.drop_id) ? tr : va).push_back(&s);
  if (tr.empty()) throw TrainingError("no training samples after the split");

  const auto width = samples.front().x.size();
  auto to_matrix = [&](const std::vector<const DatasetSample*>& rows, Eigen::MatrixXd& x, Eigen::VectorXi& y) {
    x.resize(static_cast<Eigen::Index>(rows.size()), width);
    y.resize(static_cast<Eigen::Index>(rows.size()));
    for (std::size_t i = 0; i < rows.size(); ++i) {
      x.row(static_cast<Eigen::Index>(i)) = rows[i]->x;
      y(static_cast<Eigen::Index>(i)) = rows[i]->y;
    }
  };
  Eigen::MatrixXd x_tr, x_va;
  Eigen::VectorXi y_tr, y_va;
  to_matrix(tr, x_tr, y_tr);
  to_matrix(va, x_va, y_va);

  std::vector<int> labels(y_tr.data(), y_tr.data() + y_tr.size());
  ClassWeights cw;
  try {
    cw = class_weights(labels);
  } catch (const std::invalid_argument&) {
    throw TrainingError(fmt::format("beam {} has a single class in its training split", corr.target));
  }

  const Eigen::RowVectorXd mean = x_tr.colwise().mean();
  x_tr.rowwise() -= mean;
  x_va.rowwise() -= mean;

  std::vector<std::uint8_t> y_va_u8(static_cast<std::size_t>(y_va.size()));
  for (Eigen::Index i = 0; i < y_va.size(); ++i) y_va_u8[static_cast<std::size_t>(i)] = static_cast<std::uint8_t>(y_va(i));

  TrainResult best;
  bool have = false;
  for (double l2 : cfg.l2_grid) {
    for (int r = 0; r < cfg.restarts; ++r) {
      Mlp net = train_network(x_tr, y_tr, cw, l2, cfg, rng);
      Metrics m;
      if (x_va.rows() > 0) {
        const Eigen::VectorXd p = net.predict_proba(x_va).col(1);
        std::vector<std::uint8_t> pred(static_cast<std::size_t>(p.size()));
        for (Eigen::Index i = 0; i < p.size(); ++i) pred[static_cast<std::size_t>(i)] = p(i) >= cfg.threshold ? 1 : 0;
        m = evaluate(pred, y_va_u8);
      }
      if (!have || m.f1 > best.validation.f1) {
        have = true;
        best.validation = m;
        best.model.net = std::move(net);
        best.model.l2 = l2;
      }
    }
  }
  best.model.beam = corr.target;
  best.model.corr = corr;
  best.model.window = w;
  best.model.mean = mean;
  best.model.weights = cw;
  best.model.threshold = cfg.threshold;
  best.model.normalizer_rows = static_cast<long>(x_tr.rows());
  best.train_samples = static_cast<int>(x_tr.rows());
  best.validation_samples = static_cast<int>(x_va.rows());
  best.train_blocked = static_cast<int>(y_tr.sum());
  return best;
}

void write_dataset_csv(const std::filesystem::path& path, const std::vector<DatasetSample>& samples,
                       const WindowSpec& w, int n_cols, const std::string& header_comment) {
  std::ofstream f(path);
  if (!f) throw std::runtime_error("cannot write " + path.string());
  f << header_comment << '\n' << "drop_id,t_step,y";
  for (int r = 0; r < w.eps_steps; ++r)
    for (int c = 0; c < n_cols; ++c) f << ",x_" << r << '_' << c;
  f << '\n';
  for (const auto& s : samples) {
    f << s.drop_id << ',' << s.t_step << ',' << static_cast<int>(s.y);
    for (Eigen::Index i = 0; i < s.x.size(); ++i) f << ',' << fmt::format("{:.9g}", s.x(i));
    f << '\n';
  }
}

std::vector<DatasetSample> read_dataset_csv(const std::filesystem::path& path) {
  std::ifstream f(path);
  if (!f) throw std::runtime_error("cannot read " + path.string());
  std::string line;
  std::vector<DatasetSample> out;
  bool header_seen = false;
  while (std::getline(f, line)) {
    if (line.empty() || line[0] == '#') continue;
    if (!header_seen) {
      header_seen = true;
      continue;
    }
    std::stringstream ss(line);
    std::string cell;
    std::vector<double> vals;
    while (std::getline(ss, cell, ',')) vals.push_back(std::stod(cell));
    if (vals.size() < 4) throw std::runtime_error("malformed dataset row in " + path.string());
    DatasetSample s;
    s.drop_id = static_cast<int>(vals[0]);
    s.t_step = static_cast<int>(vals[1]);
    s.y = static_cast<std::uint8_t>(vals[2]);
    s.x = Eigen::Map<Eigen::RowVectorXd>(vals.data() + 3, static_cast<Eigen::Index>(vals.size() - 3));
    out.push_back(std::move(s));
  }
  return out;
}

namespace {

json matrix_json(const Eigen::MatrixXd& m) {
  json rows = json::array();
  for (Eigen::Index r = 0; r < m.rows(); ++r) {
    json row = json::array();
    for (Eigen::Index c = 0; c < m.cols(); ++c) row.push_back(m(r, c));
    rows.push_back(row);
  }
  return rows;
}

Eigen::MatrixXd json_matrix(const json& j) {
  const auto rows = static_cast<Eigen::Index>(j.size());
  const auto cols = rows > 0 ? static_cast<Eigen::Index>(j[0].size()) : 0;
  Eigen::MatrixXd m(rows, cols);
  for (Eigen::Index r = 0; r < rows; ++r)
    for (Eigen::Index c = 0; c < cols; ++c) m(r, c) = j[static_cast<std::size_t>(r)][static_cast<std::size_t>(c)].get<double>();
  return m;
}

}  // namespace

void write_model_json(const std::filesystem::path& path, const DnnModel& model, const TrainConfig& cfg) {
  json j;
  j["format_version"] = 1;
  j["beam"] = model.beam;
  j["config_hash"] = model.config_hash;
  j["seed"] = model.seed;
  j["layer_sizes"] = model.net.layer_sizes();
  j["correlated"] = {{"target", model.corr.target},
                     {"members", model.corr.members},
                     {"delays", model.corr.delays},
                     {"peaks", model.corr.peaks}};
  j["window"] = {{"eta_steps", model.window.eta_steps}, {"eps_steps", model.window.eps_steps}};
  j["mean"] = std::vector<double>(model.mean.data(), model.mean.data() + model.mean.size());
  j["class_weights"] = {{"mu1", model.weights.mu1}, {"mu2", model.weights.mu2}};
  j["l2"] = model.l2;
  j["threshold"] = model.threshold;
  j["normalizer_rows"] = model.normalizer_rows;
  j["train_config"] = {{"learning_rate", cfg.adam.learning_rate},
                       {"beta1", cfg.adam.beta1},
                       {"beta2", cfg.adam.beta2},
                       {"epsilon", cfg.adam.epsilon},
                       {"batch_size", cfg.batch_size},
                       {"epochs", cfg.epochs},
                       {"l2_grid", cfg.l2_grid},
                       {"restarts", cfg.restarts}};
  json layers = json::array();
  for (std::size_t i = 0; i < model.net.layers(); ++i) {
    const auto& b = model.net.biases()[i];
    layers.push_back({{"weights", matrix_json(model.net.weights()[i])},
                      {"biases", std::vector<double>(b.data(), b.data() + b.size())}});
  }
  j["layers"] = layers;
  std::ofstream f(path);
  if (!f) throw std::runtime_error("cannot write " + path.string());
  f << j.dump(1) << '\n';
}

DnnModel read_model_json(const std::filesystem::path& path) {
  std::ifstream f(path);
  if (!f) throw std::runtime_error("cannot read " + path.string());
  const json j = json::parse(f);
  if (j.at("format_version").get<int>() != 1) throw std::runtime_error("unsupported model format in " + path.string());
  DnnModel m;
  m.beam = j.at("beam").get<int>();
  m.config_hash = j.at("config_hash").get<std::string>();
  m.seed = j.at("seed").get<std::uint64_t>();
  const auto& c = j.at("correlated");
  m.corr.target = c.at("target").get<int>();
  m.corr.members = c.at("members").get<std::vector<int>>();
  m.corr.delays = c.at("delays").get<std::vector<int>>();
  m.corr.peaks = c.at("peaks").get<std::vector<double>>();
  m.window.eta_steps = j.at("window").at("eta_steps").get<int>();
  m.window.eps_steps = j.at("window").at("eps_steps").get<int>();
  const auto mean = j.at("mean").get<std::vector<double>>();
  m.mean = Eigen::Map<const Eigen::RowVectorXd>(mean.data(), static_cast<Eigen::Index>(mean.size()));
  m.weights.mu1 = j.at("class_weights").at("mu1").get<double>();
  m.weights.mu2 = j.at("class_weights").at("mu2").get<double>();
  m.l2 = j.at("l2").get<double>();
  m.threshold = j.at("threshold").get<double>();
  m.normalizer_rows = j.at("normalizer_rows").get<long>();
  m.net = Mlp(j.at("layer_sizes").get<std::vector<int>>());
  const auto& layers = j.at("layers");
  if (layers.size() != m.net.layers()) throw std::runtime_error("layer count mismatch in " + path.string());
  for (std::size_t i = 0; i < layers.size(); ++i) {
    Eigen::MatrixXd w = json_matrix(layers[i].at("weights"));
    const auto b = layers[i].at("biases").get<std::vector<double>>();
    if (w.rows() != m.net.weights()[i].rows() || w.cols() != m.net.weights()[i].cols() ||
        static_cast<Eigen::Index>(b.size()) != m.net.biases()[i].size()) {
      throw std::runtime_error("layer shape mismatch in " + path.string());
    }
    m.net.weights()[i] = w;
    m.net.biases()[i] = Eigen::Map<const Eigen::VectorXd>(b.data(), static_cast<Eigen::Index>(b.size()));
  }
  return m;
}

}  // namespace mmbeam
