#include "glucast/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace glucast {

const char* stratum_label(Stratum s) {
  switch (s) {
    case Stratum::Full: return "Full";
    case Stratum::Event: return "Event";
    case Stratum::Hypo: return "Hypo";
    case Stratum::Hyper: return "Hyper";
  }
  return "?";
}

std::vector<Stratum> stratify(double anchor_mgdl) {
  std::vector<Stratum> out{Stratum::Full};
  if (anchor_mgdl < 70.0) {
    out.push_back(Stratum::Event);
    out.push_back(Stratum::Hypo);
  } else if (anchor_mgdl > 180.0) {
    out.push_back(Stratum::Event);
    out.push_back(Stratum::Hyper);
  }
  return out;
}

double ape_sample(const std::vector<double>& truth, const std::vector<double>& pred) {
  if (truth.size() != pred.size()) throw std::invalid_argument("ape_sample: length mismatch");
  if (truth.empty()) throw std::invalid_argument("ape_sample: empty");
  double sum = 0.0;
  for (size_t i = 0; i < truth.size(); ++i) {
    if (truth[i] <= 0.0) throw std::invalid_argument("ape_sample: non-positive truth value");
    sum += std::abs(truth[i] - pred[i]) / truth[i];
  }
  return sum / static_cast<double>(truth.size());
}

double rmse_pool(const std::vector<std::vector<double>>& squared_errors) {
  if (squared_errors.empty()) throw std::invalid_argument("rmse_pool: empty");
  double sum = 0.0;
  long n = 0;
  for (const auto& sample : squared_errors) {
    for (double e : sample) {
      sum += e;
      ++n;
    }
  }
  if (n == 0) throw std::invalid_argument("rmse_pool: no error terms");
  return std::sqrt(sum / static_cast<double>(n));
}

double quantile_linear(const std::vector<double>& sorted_values, double q) {
  if (sorted_values.empty()) throw std::invalid_argument("quantile_linear: empty");
  if (!(q >= 0.0 && q <= 1.0)) throw std::invalid_argument("quantile_linear: q outside [0,1]");
  const size_t n = sorted_values.size();
  if (n == 1) return sorted_values[0];
  const double pos = q * static_cast<double>(n - 1);
  const size_t lo = static_cast<size_t>(pos);
  if (lo + 1 >= n) return sorted_values[n - 1];
  const double frac = pos - static_cast<double>(lo);
  return sorted_values[lo] * (1.0 - frac) + sorted_values[lo + 1] * frac;
}

MetricsReport build_report(const std::vector<EvalSample>& samples,
                           const std::vector<int>& horizons) {
  if (samples.empty()) throw std::invalid_argument("build_report: empty sample set");
  if (horizons.empty()) throw std::invalid_argument("build_report: no horizons");

  MetricsReport report;
  report.horizons = horizons;
  report.cells.resize(horizons.size());

  for (size_t hi = 0; hi < horizons.size(); ++hi) {
    const int h = horizons[hi];
    if (h < 1) throw std::invalid_argument("build_report: horizon must be >= 1");

    struct Acc {
      std::vector<double> apes, rmses;
      double sq_sum = 0.0;
      long sq_n = 0;
      long count = 0, excluded = 0;
    };
    std::array<Acc, kNumStrata> acc;

    for (const auto& s : samples) {
      if (static_cast<int>(s.truth.size()) < h || static_cast<int>(s.pred.size()) < h) {
        throw std::invalid_argument("build_report: forecast shorter than horizon " +
                                    std::to_string(h));
      }
      bool ape_ok = true;
      double ape_sum = 0.0, sq = 0.0;
      for (int i = 0; i < h; ++i) {
        const double diff = s.truth[i] - s.pred[i];
        sq += diff * diff;
        if (s.truth[i] <= 0.0) {
          ape_ok = false;
        } else {
          ape_sum += std::abs(diff) / s.truth[i];
        }
      }
      const double ape = ape_sum / h;
      const double rmse = std::sqrt(sq / h);

      for (const Stratum st : stratify(s.anchor_mgdl)) {
        Acc& a = acc[static_cast<int>(st)];
        ++a.count;
        a.sq_sum += sq;
        a.sq_n += h;
        a.rmses.push_back(rmse);
        if (ape_ok) {
          a.apes.push_back(ape);
        } else {
          ++a.excluded;
        }
      }
    }

    for (int st = 0; st < kNumStrata; ++st) {
      Acc& a = acc[st];
      CellStats& c = report.cells[hi][st];
      c.count = a.count;
      c.excluded = a.excluded;
      if (a.count == 0) continue;
      c.rmse = std::sqrt(a.sq_sum / static_cast<double>(a.sq_n));
      std::sort(a.rmses.begin(), a.rmses.end());
      c.rmse_q1 = quantile_linear(a.rmses, 0.25);
      c.rmse_median = quantile_linear(a.rmses, 0.5);
      c.rmse_q3 = quantile_linear(a.rmses, 0.75);
      if (!a.apes.empty()) {
        std::sort(a.apes.begin(), a.apes.end());
        c.ape_q1 = quantile_linear(a.apes, 0.25);
        c.median_ape = quantile_linear(a.apes, 0.5);
        c.ape_q3 = quantile_linear(a.apes, 0.75);
      }
    }
  }
  return report;
}

AcfResult autocorrelation(const std::vector<double>& x, int max_lag) {
  const long n = static_cast<long>(x.size());
  if (max_lag < 0) throw std::invalid_argument("autocorrelation: negative max_lag");
  if (n <= max_lag + 1) {
    throw std::invalid_argument("autocorrelation: series length " + std::to_string(n) +
                                " too short for max_lag " + std::to_string(max_lag));
  }

  double mean = 0.0;
  for (double v : x) mean += v;
  mean /= static_cast<double>(n);

  double var_sum = 0.0;
  for (double v : x) var_sum += (v - mean) * (v - mean);
  if (var_sum <= 0.0) throw std::invalid_argument("autocorrelation: constant series");
  const double variance = var_sum / static_cast<double>(n);

  AcfResult out;
  out.n = n;
  out.band95 = 1.96 / std::sqrt(static_cast<double>(n));
  out.band99 = 2.576 / std::sqrt(static_cast<double>(n));
  out.r.resize(max_lag + 1);
  for (int lag = 0; lag <= max_lag; ++lag) {
    double num = 0.0;
    for (long t = 0; t + lag < n; ++t) num += (x[t] - mean) * (x[t + lag] - mean);
    out.r[lag] = num / static_cast<double>(n - lag) / variance;
  }
  return out;
}

}  // namespace glucast
