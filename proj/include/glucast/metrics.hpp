#pragma once

#include <array>
#include <string>
#include <vector>

#include "glucast/numerics.hpp"

namespace glucast {

// Membership is determined by the anchor value x_T alone, with strict
// thresholds: < 70 is Hypo, > 180 is Hyper; both are Events; everything is
// Full.
enum class Stratum { Full = 0, Event = 1, Hypo = 2, Hyper = 3 };
constexpr int kNumStrata = 4;

const char* stratum_label(Stratum s);
std::vector<Stratum> stratify(double anchor_mgdl);

// Mean over the points of |truth - pred| / truth, as a fraction (0.10 means
// ten percent). Throws when a truth value is non-positive; callers exclude
// such samples instead.
double ape_sample(const std::vector<double>& truth, const std::vector<double>& pred);

// Root of the mean over every squared error in every sample.
double rmse_pool(const std::vector<std::vector<double>>& squared_errors);

// q-quantile by linear interpolation between order statistics of a sorted
// sample: position q*(n-1), fractionally interpolated.
double quantile_linear(const std::vector<double>& sorted_values, double q);

struct EvalSample {
  double anchor_mgdl = 0.0;
  std::vector<double> truth;  // mg/dl, length >= max horizon
  std::vector<double> pred;
};

struct CellStats {
  long count = 0;     // samples in this stratum
  long excluded = 0;  // samples without a defined APE (non-positive truth)
  double median_ape = 0.0, ape_q1 = 0.0, ape_q3 = 0.0;
  double rmse = 0.0;  // pooled over samples and steps
  double rmse_q1 = 0.0, rmse_median = 0.0, rmse_q3 = 0.0;  // per-sample RMSE spread

  bool present() const { return count > 0; }
};

struct MetricsReport {
  std::vector<int> horizons;  // in steps
  std::vector<std::array<CellStats, kNumStrata>> cells;  // cells[h_index][stratum]

  const CellStats& cell(int h_index, Stratum s) const {
    return cells[h_index][static_cast<int>(s)];
  }
};

// Fills every horizon x stratum cell. Horizon h uses exactly the first h
// points of each sample. Throws on an empty sample set or a horizon longer
// than the forecasts.
MetricsReport build_report(const std::vector<EvalSample>& samples,
                           const std::vector<int>& horizons);

struct AcfResult {
  std::vector<double> r;  // r[lag], lag 0..max_lag; r[0] == 1
  double band95 = 0.0;    // +-1.96/sqrt(n)
  double band99 = 0.0;    // +-2.576/sqrt(n)
  long n = 0;
};

// Plug-in estimator: R(L) = ((1/(n-L)) * sum (x_t - mean)(x_{t+L} - mean))
// divided by the population variance. Throws on a constant series or when
// the series is not longer than max_lag + 1.
AcfResult autocorrelation(const std::vector<double>& x, int max_lag);

}  // namespace glucast
