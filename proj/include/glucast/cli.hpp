#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include "glucast/baselines.hpp"
#include "glucast/model.hpp"
#include "glucast/report_io.hpp"
#include "glucast/training.hpp"

namespace glucast {

// Exit code 2 (flag/config mistakes); other exceptions exit 1.
struct UsageError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

struct RunConfig {
  std::uint64_t seed = 7;
  ModelConfig model;
  TrainConfig train;
  int ar_p = 10;
  int ar_d = 1;
  bool linseq_time_features = false;
  std::vector<int> horizons = {3, 6, 9, 12};
};

// Flat key-value file; requires 'version 1'; '#' comments and blank lines
// allowed; unknown keys rejected.
RunConfig load_config_file(const std::string& path);

// Flag values set on the command line; they override the config file.
struct ConfigOverrides {
  std::optional<std::uint64_t> seed;
  std::optional<int> t0, tau, enc_hidden, dec_hidden, embed_dim, attn_heads, attn_hidden,
      head_hidden;
  bool no_attention = false, no_embedding = false, no_time_features = false;
  bool cold_start = false;
  std::optional<double> beta, learning_rate, clip_init, clip_decay, teacher_forcing;
  std::optional<int> batch_size, max_epochs, patience;
  bool no_rectified = false;
  std::optional<int> ar_p, ar_d;
  std::optional<std::vector<int>> horizons;
};

RunConfig resolve_config(const std::string& config_path, const ConfigOverrides& flags);
KvList effective_config(const RunConfig& cfg);

// Shared pipeline: clean -> split -> windowize, pooled across patients.
struct Dataset {
  std::vector<std::string> patient_ids;  // sorted ids with at least one train window
  std::vector<WindowSample> train, val, test;
  std::vector<PatientSeries> cleaned;    // per retained patient
  std::vector<TemporalSplit> splits;     // aligned with `cleaned`
  std::vector<std::string> skipped;      // patients too short to split
};

Dataset build_dataset(const std::vector<PatientSeries>& raw, int t0, int tau);

// Pre-resolves each window's embedding row against the sorted id list
// (missing ids stay -1 and resolve lazily at forward time).
void assign_patient_indices(std::vector<WindowSample>& windows,
                            const std::vector<std::string>& sorted_ids);

std::vector<EvalSample> eval_model(const ModelParams& m, const std::vector<WindowSample>& test);
std::vector<EvalSample> eval_linear_seq(const LinearSeqParams& m,
                                        const std::vector<WindowSample>& test);
std::vector<EvalSample> eval_ar(const std::map<std::string, ArModel>& per_patient,
                                const std::vector<WindowSample>& test);
std::vector<EvalSample> eval_persistence(const std::vector<WindowSample>& test);

struct GenerateArgs {
  int patients = 8;
  int days = 30;
  std::uint64_t seed = 7;
  double outlier_rate = 0.0;
  std::string out;
};

struct AcfArgs {
  std::string input;
  int max_lag = 250;
  std::string out;  // empty = stdout
};

struct TrainArgs {
  std::string data;
  std::string config_path;  // empty = defaults
  std::string model_out;
  std::string report_out;  // empty = model_out + ".train.txt"
  ConfigOverrides flags;
};

struct EvaluateArgs {
  std::string model;
  std::string data;
  std::string out;  // empty = stdout (csv); text always on stdout
  ConfigOverrides flags;
};

struct CompareArgs {
  std::string data;
  std::string config_path;
  std::string out;
  ConfigOverrides flags;
};

struct ForecastArgs {
  std::string model;
  std::string data;
  std::string patient;
  std::string at;  // ISO-8601 anchor timestamp
  bool cold_start = false;
};

int cmd_generate(const GenerateArgs& args);
int cmd_analyze_acf(const AcfArgs& args);
int cmd_train(const TrainArgs& args);
int cmd_evaluate(const EvaluateArgs& args);
int cmd_compare(const CompareArgs& args);
int cmd_forecast(const ForecastArgs& args);

}  // namespace glucast
