#pragma once

// Experiment stages that read and write the on-disk artifacts under one
// output directory, plus the percentile report.

#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "mmbeam/prediction.hpp"
#include "mmbeam/recovery.hpp"
#include "mmbeam/simulation.hpp"

namespace mmbeam {

struct RunContext {
  ScenarioConfig cfg;
  std::uint64_t seed = 42;
  std::filesystem::path out = "out";
  bool quiet = false;

  std::string hash() const { return config_hash(cfg); }
  /// First line of every CSV: "# mode=<mode> seed=<seed> config_hash=<hash>".
  std::string header(std::string_view mode) const;
};

/// Formats a double with 9 significant digits.
std::string fmt9(double v);

/// Linear interpolation between closest ranks on sorted data.
double percentile(const std::vector<double>& sorted, double pct);

struct ReportRow {
  double speed = 0.0;
  std::string filter;  // "blocked" or "non-blocked"
  std::string method;
  std::vector<std::optional<double>> values;  // one per requested percentile
  long samples = 0;
};

/// Rates grouped by (speed, filter, method).
using RateBuckets = std::map<std::tuple<double, std::string, std::string>, std::vector<double>>;

void add_trace(RateBuckets& buckets, double speed, const RateTrace& trace);

/// Percentile rows for every bucket, followed by a "BR-Pre/BR-Det" gain row
/// in percent for each (speed, filter) where both methods are present.
std::vector<ReportRow> report(const RateBuckets& buckets, const std::vector<double>& pcts = {25.0, 50.0, 75.0});

void write_traces_csv(const std::filesystem::path& path, const BeamTraceMatrix& t, const std::string& header);
BeamTraceMatrix read_traces_csv(const std::filesystem::path& path, int n_beams, int n_steps);

void write_rate_traces_csv(std::ostream& os, const RateTrace& tr);

// Stages. Each reads what the previous one wrote under ctx.out.
void stage_simulate(const RunContext& ctx, std::optional<int> drops = std::nullopt);
void stage_select_beams(const RunContext& ctx);
void stage_build_dataset(const RunContext& ctx);
void stage_train(const RunContext& ctx);

struct EvalOptions {
  std::vector<double> speeds;
  std::vector<Method> methods = {Method::kBf, Method::kBrDet, Method::kBrPre, Method::kGt};
  std::optional<int> drops;
  std::filesystem::path models;  // defaults to <out>/models
};

/// Loads every model under `dir`; a model whose config hash or seed differs
/// from the context is a hard error.
std::map<int, DnnModel> load_models(const RunContext& ctx, const std::filesystem::path& dir);

void stage_evaluate(const RunContext& ctx, const EvalOptions& opt);
void stage_compare(const RunContext& ctx, const EvalOptions& opt);

/// Runs every method for the focus-BS UEs of one drop.
std::vector<RateTrace> run_methods(const Scenario& sc, const DropResult& d, const std::vector<Method>& methods,
                                   const std::map<int, DnnModel>& models);

}  // namespace mmbeam
