#pragma once

// Blockage prediction: correlated-beam selection by cross-correlation lag,
// sliding-window dataset construction, per-beam MLP training and metrics.

#include <cstdint>
#include <filesystem>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "mmbeam/channel.hpp"
#include "mmbeam/mlp.hpp"

namespace mmbeam {

inline constexpr double kFillerSnrDb = 60.0;

/// Per-beam aggregated SNR and GT series of one drop.
struct BeamTraceMatrix {
  int drop_id = 0;
  Eigen::MatrixXd snr;        // beams x steps, dB; filler where unoccupied
  Eigen::MatrixXi occupancy;  // UE count per cell
  Eigen::Matrix<std::uint8_t, Eigen::Dynamic, Eigen::Dynamic> gt;

  BeamTraceMatrix() = default;
  BeamTraceMatrix(int n_beams, int n_steps);
  int beams() const { return static_cast<int>(snr.rows()); }
  int steps() const { return static_cast<int>(snr.cols()); }
  bool occupied(int beam) const { return occupancy.row(beam).any(); }
};

/// Median SNR of the UEs on a beam (mean of the two middle values for an even
/// count) and the majority GT label, ties counted as blocked.
double aggregate_snr(std::vector<double> snrs);
std::uint8_t aggregate_gt(std::span<const std::uint8_t> labels);

struct CorrelatedSet {
  int target = 0;
  std::vector<int> members;
  std::vector<int> delays;  // steps; positive when the member leads the target
  std::vector<double> peaks;
};

/// Full two-sided cross-correlation of two equal-length series:
/// R(tau) = sum_t a(t) b(t - tau), tau in [-(T-1), T-1]. Index tau + T - 1.
std::vector<double> cross_correlation(std::span<const double> a, std::span<const double> b);

/// Picks the `count` beams whose correlation peak lag is closest to zero.
/// Each beam series is zero-centred per drop and the correlations summed over
/// drops. Beams constant over every drop are not candidates. Ties on |delay|
/// go to the larger peak, then the lower beam id.
CorrelatedSet select_correlated_beams(std::span<const BeamTraceMatrix> drops, int target, int count);

struct DatasetSample {
  int drop_id = 0;
  int t_step = 0;
  std::uint8_t y = 0;
  Eigen::RowVectorXd x;  // window rows flattened row-major, column 0 = target
};

struct WindowSpec {
  int eta_steps = 2;
  int eps_steps = 10;
};

/// First step that has a full input window.
inline int first_sample_step(const WindowSpec& w) { return w.eta_steps + w.eps_steps - 1; }

/// Input window for predicting step `t`: rows t-eta-(eps-1) .. t-eta.
Eigen::RowVectorXd window_features(const BeamTraceMatrix& drop, const CorrelatedSet& corr, int t,
                                   const WindowSpec& w);

std::vector<DatasetSample> build_dataset(std::span<const BeamTraceMatrix> drops, const CorrelatedSet& corr,
                                         const WindowSpec& w);

struct Metrics {
  long tp = 0, fp = 0, tn = 0, fn = 0;
  double precision = 0.0, recall = 0.0, f1 = 0.0;
};

Metrics evaluate(std::span<const std::uint8_t> predicted, std::span<const std::uint8_t> labels);
Metrics metrics_from_counts(long tp, long fp, long tn, long fn);

struct TrainConfig {
  std::vector<int> hidden = {20, 20};
  AdamConfig adam;
  int batch_size = 1000;
  int epochs = 50;
  std::vector<double> l2_grid = {1e-5, 1e-4, 1e-3, 1e-2, 1e-1};
  int restarts = 5;
  double train_fraction = 0.8;
  double threshold = 0.5;
};

struct DnnModel {
  int beam = 0;
  CorrelatedSet corr;
  WindowSpec window;
  Mlp net;
  Eigen::RowVectorXd mean;  // zero-centre offsets
  ClassWeights weights;
  double l2 = 0.0;
  double threshold = 0.5;
  long normalizer_rows = 0;
  std::string config_hash;
  std::uint64_t seed = 0;

  /// P(blocked) for each row of raw (un-normalised) features.
  Eigen::VectorXd predict_proba(const Eigen::MatrixXd& x) const;
};

struct Prediction {
  std::uint8_t state = 0;
  double p_blocked = 0.0;
};

Prediction predict(const DnnModel& model, const Eigen::RowVectorXd& x);

/// Online predictions for every step of a drop; -1 where no full window
/// exists yet.
std::vector<std::int8_t> predict_series(const DnnModel& model, const BeamTraceMatrix& drop);

struct TrainResult {
  DnnModel model;
  Metrics validation;
  int train_samples = 0;
  int validation_samples = 0;
  int train_blocked = 0;
};

class TrainingError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Splits chronologically by drop (first round(f * drops) drops train),
/// zero-centres on the training rows, and keeps the best validation F1 over
/// the L2 grid and restarts. Throws TrainingError when a class is missing or
/// the loss turns NaN.
TrainResult train(const std::vector<DatasetSample>& samples, const CorrelatedSet& corr, const WindowSpec& w,
                  const TrainConfig& cfg, Rng& rng);

/// One Adam run on already-normalised data; returns the trained network.
Mlp train_network(const Eigen::MatrixXd& x, const Eigen::VectorXi& y, const ClassWeights& cw, double l2,
                  const TrainConfig& cfg, Rng& rng);

// File formats.
void write_dataset_csv(const std::filesystem::path& path, const std::vector<DatasetSample>& samples,
                       const WindowSpec& w, int n_cols, const std::string& header_comment);
std::vector<DatasetSample> read_dataset_csv(const std::filesystem::path& path);

void write_model_json(const std::filesystem::path& path, const DnnModel& model, const TrainConfig& cfg);
DnnModel read_model_json(const std::filesystem::path& path);

}  // namespace mmbeam
