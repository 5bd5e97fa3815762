#pragma once

#include "glucast/numerics.hpp"

#include <cstdint>
#include <memory>
#include <optional>
#include <span>
#include <string>
#include <vector>

namespace glucast {

// Timestamps are UTC epoch seconds. CGM cadence is nominally one sample
// every five minutes.
constexpr std::int64_t kCadenceSeconds = 300;
constexpr std::int64_t kGapToleranceSeconds = 60;
constexpr double kMaxPlausibleJumpMgdl = 40.0;

struct CgmRecord {
  std::int64_t timestamp = 0;
  double glucose_mgdl = 0.0;
};

struct PatientSeries {
  std::string patient_id;
  std::vector<CgmRecord> records;  // strictly increasing timestamps
};

struct TimeFeatures {
  double hour_frac = 0.0;  // hour of day / 24, minutes included
  double dow_frac = 0.0;   // day of week / 7, Monday = 0
  double weekend = 0.0;    // 1 on Saturday/Sunday
};

// ISO-8601 "YYYY-MM-DDTHH:MM:SSZ" <-> epoch seconds.
std::int64_t parse_iso8601(const std::string& text);
std::string format_iso8601(std::int64_t ts);

TimeFeatures extract_time_features(std::int64_t ts);

struct ParseError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// CSV with header "patient_id,timestamp,glucose_mgdl". Rows for one patient
// must already be in time order; series come back sorted by patient id.
std::vector<PatientSeries> load_csv(const std::string& path);
void save_csv(const std::vector<PatientSeries>& series, const std::string& path);

// Drops records whose jump from the previously retained record exceeds
// 40 mg/dl. No interpolation: a removed record leaves a gap.
PatientSeries clean(const PatientSeries& series);

struct TemporalSplit {
  PatientSeries train, val, test;
};

// Contiguous 20:1:1 split, training first, test most recent. Series shorter
// than 22 records cannot be split.
std::optional<TemporalSplit> split_temporal(const PatientSeries& series);

// One maximal gap-free run of records for one patient, with per-record time
// features precomputed. Windows reference these instead of copying values.
struct SegmentData {
  std::string patient_id;
  std::vector<std::int64_t> timestamps;
  Tensor1 glucose_raw;
  Tensor2 time_feats;  // rows = records, cols = {hour_frac, dow_frac, weekend}
};

struct WindowSample {
  std::shared_ptr<const SegmentData> seg;
  int offset = 0;  // index of the first encoder record within seg
  int t0 = 0;
  int tau = 0;
  int patient_index = -1;  // embedding row; assigned by the pipeline

  double input_raw(int i) const { return seg->glucose_raw[offset + i]; }
  double target_raw(int i) const { return seg->glucose_raw[offset + t0 + i]; }
  double anchor_raw() const { return input_raw(t0 - 1); }
  std::int64_t anchor_ts() const { return seg->timestamps[offset + t0 - 1]; }
  // step in [0, t0 + tau)
  Eigen::Vector3d time_feat(int step) const {
    return seg->time_feats.row(offset + step).transpose();
  }
  const std::string& patient_id() const { return seg->patient_id; }
};

// Stride-1 sliding windows of t0 + tau records. Windows containing an
// inter-record gap larger than cadence + tolerance are dropped.
std::vector<WindowSample> windowize(const PatientSeries& series, int t0, int tau,
                                    std::int64_t cadence = kCadenceSeconds,
                                    std::int64_t gap_tolerance = kGapToleranceSeconds);

struct Normalizer {
  double mean = 0.0;
  double std = 1.0;

  double apply(double x) const { return (x - mean) / std; }
  double invert(double z) const { return z * std + mean; }
};

// Window for inference at the end of a recorded history: the last t0 records
// form the model input, and tau future rows are synthesized at the nominal
// cadence past the anchor (their glucose values are placeholders, never
// read). Throws std::runtime_error when the history is too short or the last
// t0 records contain a gap.
WindowSample make_forecast_window(const std::string& patient_id,
                                  const std::vector<CgmRecord>& history, int t0, int tau,
                                  std::int64_t cadence = kCadenceSeconds,
                                  std::int64_t gap_tolerance = kGapToleranceSeconds);

// Population mean/std of the given glucose values.
Normalizer fit_normalizer(const std::vector<double>& values);
// Convenience: stats over the unique records covered by the given windows.
Normalizer fit_normalizer(const std::vector<WindowSample>& train_windows);

// ---------------------------------------------------------------------------
// Synthetic CGM population. Each patient mixes a personal baseline, a
// circadian sinusoid, scheduled meal bumps (weekend schedule shifted), AR(1)
// noise with a personal smoothness, and occasional unscheduled excursions.
// Sample-to-sample movement is rate-limited below the cleaning threshold, so
// generated series survive clean() intact.

struct PatientProfile {
  std::string id;
  double baseline_mgdl = 130.0;
  double circadian_amp = 10.0;
  double circadian_phase_h = 3.0;
  std::vector<double> meal_hours = {7.5, 12.5, 18.5};  // weekday schedule
  std::vector<double> meal_amp = {60.0, 60.0, 60.0};
  double weekend_shift_h = 1.5;   // meals move later on weekends
  double meal_rise_min = 30.0;
  double meal_decay_min = 90.0;
  double ar_smoothness = 0.9;     // AR(1) coefficient of the noise
  double noise_sigma = 0.0;       // stationary noise std, mg/dl
};

PatientProfile random_profile(const std::string& id, RngState& rng);

PatientSeries generate_patient(const PatientProfile& profile, int n_days,
                               std::int64_t start_ts, double outlier_rate, RngState& rng);

// start time fixed to 2026-03-02T00:00:00Z (a Monday)
std::vector<PatientSeries> generate_synthetic(int n_patients, int n_days, RngState& rng,
                                              double outlier_rate);

std::int64_t synthetic_start_ts();

}  // namespace glucast
