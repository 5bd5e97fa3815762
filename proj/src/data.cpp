#include "glucast/data.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <map>
#include <sstream>

namespace glucast {

namespace {

std::int64_t floor_div(std::int64_t a, std::int64_t b) {
  return a >= 0 ? a / b : -((-a + b - 1) / b);
}

// Civil-calendar day arithmetic (proleptic Gregorian), epoch 1970-01-01.
std::int64_t days_from_civil(int y, int m, int d) {
  y -= m <= 2;
  const std::int64_t era = (y >= 0 ? y : y - 399) / 400;
  const unsigned yoe = static_cast<unsigned>(y - era * 400);
  const unsigned doy = (153u * static_cast<unsigned>(m + (m > 2 ? -3 : 9)) + 2u) / 5u +
                       static_cast<unsigned>(d) - 1u;
  const unsigned doe = yoe * 365 + yoe / 4 - yoe / 100 + doy;
  return era * 146097 + static_cast<std::int64_t>(doe) - 719468;
}

void civil_from_days(std::int64_t z, int& y, int& m, int& d) {
  z += 719468;
  const std::int64_t era = (z >= 0 ? z : z - 146096) / 146097;
  const unsigned doe = static_cast<unsigned>(z - era * 146097);
  const unsigned yoe = (doe - doe / 1460 + doe / 36524 - doe / 146096) / 365;
  const std::int64_t yy = static_cast<std::int64_t>(yoe) + era * 400;
  const unsigned doy = doe - (365 * yoe + yoe / 4 - yoe / 100);
  const unsigned mp = (5 * doy + 2) / 153;
  d = static_cast<int>(doy - (153 * mp + 2) / 5 + 1);
  m = static_cast<int>(mp < 10 ? mp + 3 : mp - 9);
  y = static_cast<int>(yy + (m <= 2));
}

int days_in_month(int y, int m) {
  static const int lens[] = {31, 28, 31, 30, 31, 30, 31, 31, 30, 31, 30, 31};
  if (m == 2) {
    const bool leap = (y % 4 == 0 && y % 100 != 0) || y % 400 == 0;
    return leap ? 29 : 28;
  }
  return lens[m - 1];
}

}  // namespace

std::int64_t parse_iso8601(const std::string& text) {
  int y, mo, d, h, mi, s;
  char tail;
  const int n = std::sscanf(text.c_str(), "%d-%d-%dT%d:%d:%d%c", &y, &mo, &d, &h, &mi, &s, &tail);
  if (n != 7 || tail != 'Z' || text.size() != 20) {
    throw ParseError("bad timestamp '" + text + "' (expected YYYY-MM-DDTHH:MM:SSZ)");
  }
  if (mo < 1 || mo > 12 || d < 1 || d > days_in_month(y, mo) || h < 0 || h > 23 || mi < 0 ||
      mi > 59 || s < 0 || s > 59) {
    throw ParseError("out-of-range timestamp '" + text + "'");
  }
  return days_from_civil(y, mo, d) * 86400 + h * 3600 + mi * 60 + s;
}

std::string format_iso8601(std::int64_t ts) {
  const std::int64_t days = floor_div(ts, 86400);
  std::int64_t rem = ts - days * 86400;
  int y, mo, d;
  civil_from_days(days, y, mo, d);
  char buf[32];
  std::snprintf(buf, sizeof(buf), "%04d-%02d-%02dT%02d:%02d:%02dZ", y, mo, d,
                static_cast<int>(rem / 3600), static_cast<int>((rem % 3600) / 60),
                static_cast<int>(rem % 60));
  return buf;
}

TimeFeatures extract_time_features(std::int64_t ts) {
  const std::int64_t days = floor_div(ts, 86400);
  const std::int64_t sec_of_day = ts - days * 86400;
  // epoch day 0 was a Thursday; index Monday = 0
  const int dow = static_cast<int>(((days % 7) + 7 + 3) % 7);
  TimeFeatures f;
  f.hour_frac = static_cast<double>(sec_of_day) / 86400.0;
  f.dow_frac = static_cast<double>(dow) / 7.0;
  f.weekend = dow >= 5 ? 1.0 : 0.0;
  return f;
}

std::vector<PatientSeries> load_csv(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ParseError("cannot open '" + path + "'");

  std::string line;
  if (!std::getline(in, line)) throw ParseError(path + ": empty file");
  if (!line.empty() && line.back() == '\r') line.pop_back();
  if (line != "patient_id,timestamp,glucose_mgdl") {
    throw ParseError(path + ": unexpected header '" + line + "'");
  }

  std::map<std::string, PatientSeries> by_id;
  long line_no = 1;
  while (std::getline(in, line)) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;

    const auto fail = [&](const std::string& why) {
      throw ParseError(path + ":" + std::to_string(line_no) + ": " + why);
    };

    const auto c1 = line.find(',');
    const auto c2 = c1 == std::string::npos ? std::string::npos : line.find(',', c1 + 1);
    if (c1 == std::string::npos || c2 == std::string::npos ||
        line.find(',', c2 + 1) != std::string::npos) {
      fail("expected 3 comma-separated fields");
    }
    const std::string id = line.substr(0, c1);
    const std::string ts_text = line.substr(c1 + 1, c2 - c1 - 1);
    const std::string val_text = line.substr(c2 + 1);
    if (id.empty()) fail("empty patient_id");

    std::int64_t ts;
    try {
      ts = parse_iso8601(ts_text);
    } catch (const ParseError& e) {
      fail(e.what());
      throw;  // unreachable
    }

    char* end = nullptr;
    const double value = std::strtod(val_text.c_str(), &end);
    if (end == val_text.c_str() || *end != '\0' || !std::isfinite(value)) {
      fail("bad glucose value '" + val_text + "'");
    }
    if (value <= 0.0) fail("non-positive glucose value");

    auto& series = by_id[id];
    series.patient_id = id;
    if (!series.records.empty() && ts <= series.records.back().timestamp) {
      fail("timestamps for patient '" + id + "' are not strictly increasing");
    }
    series.records.push_back({ts, value});
  }

  std::vector<PatientSeries> out;
  out.reserve(by_id.size());
  for (auto& [id, series] : by_id) out.push_back(std::move(series));
  return out;
}

void save_csv(const std::vector<PatientSeries>& series, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write '" + path + "'");
  out << "patient_id,timestamp,glucose_mgdl\n";
  char buf[64];
  for (const auto& p : series) {
    for (const auto& r : p.records) {
      std::snprintf(buf, sizeof(buf), "%.2f", r.glucose_mgdl);
      out << p.patient_id << ',' << format_iso8601(r.timestamp) << ',' << buf << '\n';
    }
  }
  if (!out.good()) throw std::runtime_error("write failed for '" + path + "'");
}

PatientSeries clean(const PatientSeries& series) {
  PatientSeries out;
  out.patient_id = series.patient_id;
  out.records.reserve(series.records.size());
  for (const auto& r : series.records) {
    if (out.records.empty() ||
        std::abs(r.glucose_mgdl - out.records.back().glucose_mgdl) <= kMaxPlausibleJumpMgdl) {
      out.records.push_back(r);
    }
  }
  return out;
}

std::optional<TemporalSplit> split_temporal(const PatientSeries& series) {
  const long n = static_cast<long>(series.records.size());
  if (n < 22) return std::nullopt;
  const long n_train = 20 * n / 22;
  const long n_val = n / 22;

  TemporalSplit split;
  split.train.patient_id = series.patient_id;
  split.val.patient_id = series.patient_id;
  split.test.patient_id = series.patient_id;
  split.train.records.assign(series.records.begin(), series.records.begin() + n_train);
  split.val.records.assign(series.records.begin() + n_train,
                           series.records.begin() + n_train + n_val);
  split.test.records.assign(series.records.begin() + n_train + n_val, series.records.end());
  return split;
}

std::vector<WindowSample> windowize(const PatientSeries& series, int t0, int tau,
                                    std::int64_t cadence, std::int64_t gap_tolerance) {
  if (t0 < 1 || tau < 1) throw std::invalid_argument("windowize: t0 and tau must be >= 1");
  std::vector<WindowSample> out;
  const auto& recs = series.records;
  const std::int64_t max_gap = cadence + gap_tolerance;

  size_t run_start = 0;
  while (run_start < recs.size()) {
    size_t run_end = run_start + 1;  // exclusive
    while (run_end < recs.size() &&
           recs[run_end].timestamp - recs[run_end - 1].timestamp <= max_gap) {
      ++run_end;
    }
    const long run_len = static_cast<long>(run_end - run_start);
    const long n_windows = run_len - t0 - tau + 1;
    if (n_windows > 0) {
      auto seg = std::make_shared<SegmentData>();
      seg->patient_id = series.patient_id;
      seg->timestamps.reserve(run_len);
      seg->glucose_raw.resize(run_len);
      seg->time_feats.resize(run_len, 3);
      for (long i = 0; i < run_len; ++i) {
        const auto& r = recs[run_start + i];
        seg->timestamps.push_back(r.timestamp);
        seg->glucose_raw[i] = r.glucose_mgdl;
        const TimeFeatures f = extract_time_features(r.timestamp);
        seg->time_feats(i, 0) = f.hour_frac;
        seg->time_feats(i, 1) = f.dow_frac;
        seg->time_feats(i, 2) = f.weekend;
      }
      for (long w = 0; w < n_windows; ++w) {
        WindowSample sample;
        sample.seg = seg;
        sample.offset = static_cast<int>(w);
        sample.t0 = t0;
        sample.tau = tau;
        out.push_back(std::move(sample));
      }
    }
    run_start = run_end;
  }
  return out;
}

WindowSample make_forecast_window(const std::string& patient_id,
                                  const std::vector<CgmRecord>& history, int t0, int tau,
                                  std::int64_t cadence, std::int64_t gap_tolerance) {
  if (static_cast<int>(history.size()) < t0) {
    throw std::runtime_error("insufficient history for patient '" + patient_id + "': need " +
                             std::to_string(t0) + " records, have " +
                             std::to_string(history.size()));
  }
  const size_t first = history.size() - static_cast<size_t>(t0);
  for (size_t i = first + 1; i < history.size(); ++i) {
    if (history[i].timestamp - history[i - 1].timestamp > cadence + gap_tolerance) {
      throw std::runtime_error("gap in the last " + std::to_string(t0) +
                               " records for patient '" + patient_id + "' at " +
                               format_iso8601(history[i].timestamp));
    }
  }

  auto seg = std::make_shared<SegmentData>();
  seg->patient_id = patient_id;
  const int len = t0 + tau;
  seg->timestamps.reserve(len);
  seg->glucose_raw.resize(len);
  seg->time_feats.resize(len, 3);
  const double anchor = history.back().glucose_mgdl;
  for (int i = 0; i < len; ++i) {
    const std::int64_t ts = i < t0 ? history[first + i].timestamp
                                   : history.back().timestamp + (i - t0 + 1) * cadence;
    seg->timestamps.push_back(ts);
    seg->glucose_raw[i] = i < t0 ? history[first + i].glucose_mgdl : anchor;
    const TimeFeatures f = extract_time_features(ts);
    seg->time_feats(i, 0) = f.hour_frac;
    seg->time_feats(i, 1) = f.dow_frac;
    seg->time_feats(i, 2) = f.weekend;
  }

  WindowSample w;
  w.seg = std::move(seg);
  w.offset = 0;
  w.t0 = t0;
  w.tau = tau;
  return w;
}

Normalizer fit_normalizer(const std::vector<double>& values) {
  if (values.empty()) throw std::invalid_argument("fit_normalizer: no values");
  double sum = 0.0;
  for (double v : values) sum += v;
  const double mean = sum / static_cast<double>(values.size());
  double ss = 0.0;
  for (double v : values) ss += (v - mean) * (v - mean);
  const double var = ss / static_cast<double>(values.size());
  if (var <= 0.0) throw std::invalid_argument("fit_normalizer: zero variance");
  return Normalizer{mean, std::sqrt(var)};
}

Normalizer fit_normalizer(const std::vector<WindowSample>& train_windows) {
  // Each underlying record counts once, however many windows cover it.
  std::map<const SegmentData*, std::vector<char>> covered;
  std::vector<const SegmentData*> order;
  for (const auto& w : train_windows) {
    auto [it, fresh] = covered.try_emplace(w.seg.get());
    if (fresh) {
      it->second.assign(w.seg->glucose_raw.size(), 0);
      order.push_back(w.seg.get());
    }
    for (int i = 0; i < w.t0 + w.tau; ++i) it->second[w.offset + i] = 1;
  }
  std::vector<double> values;
  for (const SegmentData* seg : order) {
    const auto& mask = covered[seg];
    for (size_t i = 0; i < mask.size(); ++i) {
      if (mask[i]) values.push_back(seg->glucose_raw[static_cast<Eigen::Index>(i)]);
    }
  }
  return fit_normalizer(values);
}

// ---------------------------------------------------------------------------
// Synthetic generator

namespace {

// Largest sample-to-sample move the generator will emit; must stay strictly
// below kMaxPlausibleJumpMgdl or clean() would shred synthetic series.
constexpr double kMaxStepMgdl = 35.0;

// Typical excursion footprint: ~4 rise steps plus a 0.65-decay tail.
constexpr double kExcursionMeanSteps = 16.0;

double meal_bump(double minutes_since, double amp, double rise_min, double decay_min) {
  if (minutes_since <= 0.0) return 0.0;
  return amp * (1.0 - std::exp(-minutes_since / rise_min)) * std::exp(-minutes_since / decay_min);
}

bool day_is_weekend(std::int64_t day) {
  return ((day % 7) + 7 + 3) % 7 >= 5;
}

}  // namespace

std::int64_t synthetic_start_ts() {
  return days_from_civil(2026, 3, 2) * 86400;  // Monday
}

PatientProfile random_profile(const std::string& id, RngState& rng) {
  PatientProfile p;
  p.id = id;
  p.baseline_mgdl = 115.0 + 50.0 * rng.uniform_half_open();
  p.circadian_amp = 6.0 + 10.0 * rng.uniform_half_open();
  p.circadian_phase_h = 24.0 * rng.uniform_half_open();
  const int n_meals = 2 + static_cast<int>(rng.uniform_half_open() * 3.0);
  static const double slots2[] = {8.0, 18.5};
  static const double slots3[] = {7.5, 12.5, 18.5};
  static const double slots4[] = {7.5, 12.0, 17.0, 21.0};
  const double* slots = n_meals == 2 ? slots2 : (n_meals == 3 ? slots3 : slots4);
  p.meal_hours.clear();
  p.meal_amp.clear();
  for (int m = 0; m < n_meals; ++m) {
    p.meal_hours.push_back(slots[m] + 3.0 * (rng.uniform_half_open() - 0.5));
    p.meal_amp.push_back(40.0 + 45.0 * rng.uniform_half_open());
  }
  p.weekend_shift_h = 0.75 + 1.75 * rng.uniform_half_open();
  p.meal_rise_min = 20.0 + 20.0 * rng.uniform_half_open();
  p.meal_decay_min = 60.0 + 70.0 * rng.uniform_half_open();
  p.ar_smoothness = 0.55 + 0.42 * rng.uniform_half_open();
  p.noise_sigma = 1.5 + 3.0 * rng.uniform_half_open();
  return p;
}

PatientSeries generate_patient(const PatientProfile& profile, int n_days, std::int64_t start_ts,
                               double outlier_rate, RngState& rng) {
  if (n_days < 1) throw std::invalid_argument("generate_patient: n_days must be >= 1");
  const int samples_per_day = 86400 / static_cast<int>(kCadenceSeconds);
  const int total = n_days * samples_per_day;

  PatientSeries series;
  series.patient_id = profile.id;
  series.records.reserve(total);

  double noise = 0.0;
  // Active unscheduled excursion, if any: remaining rise steps, then decay.
  double excursion = 0.0;
  int excursion_rise_left = 0;
  double excursion_step = 0.0;

  for (int k = 0; k < total; ++k) {
    const std::int64_t ts = start_ts + static_cast<std::int64_t>(k) * kCadenceSeconds;
    const std::int64_t day = floor_div(ts, 86400);
    const double minute_of_day = static_cast<double>(ts - day * 86400) / 60.0;
    const double hour = minute_of_day / 60.0;

    double value = profile.baseline_mgdl +
                   profile.circadian_amp *
                       std::sin(2.0 * M_PI * (hour - profile.circadian_phase_h) / 24.0);

    // Meals from today and yesterday (decay can cross midnight).
    for (int day_offset = 0; day_offset >= -1; --day_offset) {
      const double shift =
          day_is_weekend(day + day_offset) ? profile.weekend_shift_h : 0.0;
      for (size_t m = 0; m < profile.meal_hours.size(); ++m) {
        const double meal_minute =
            (profile.meal_hours[m] + shift) * 60.0 + day_offset * 1440.0;
        value += meal_bump(minute_of_day - meal_minute, profile.meal_amp[m],
                           profile.meal_rise_min, profile.meal_decay_min);
      }
    }

    // AR(1) noise with stationary std = noise_sigma.
    const double eps = rng.normal(0.0, 1.0);
    const double phi = profile.ar_smoothness;
    noise = phi * noise + std::sqrt(std::max(0.0, 1.0 - phi * phi)) * profile.noise_sigma * eps;
    value += noise;

    // Unscheduled excursions: ramp up in sub-threshold steps, then decay.
    const double u = rng.uniform_half_open();
    if (excursion_rise_left > 0) {
      excursion += excursion_step;
      --excursion_rise_left;
    } else {
      excursion *= 0.65;
    }
    // An excursion spans ~kExcursionMeanSteps samples, so the onset chance is
    // scaled down to make outlier_rate the approximate fraction of affected
    // samples rather than an onset-per-step probability.
    if (excursion_rise_left == 0 && std::abs(excursion) < 1.0 &&
        u < outlier_rate / kExcursionMeanSteps) {
      const double peak = 70.0 + 60.0 * rng.uniform_half_open();
      const double sign = rng.uniform_half_open() < 0.75 ? 1.0 : -1.0;
      excursion_rise_left = static_cast<int>(std::ceil(peak / 32.0));
      excursion_step = sign * peak / excursion_rise_left;
    }
    value += excursion;

    // Rate-limit emitted samples to stay under the cleaning threshold; the
    // envelope clamp below can only shrink the step further since the
    // previous sample already lies inside [40, 400].
    if (!series.records.empty()) {
      const double last = series.records.back().glucose_mgdl;
      value = std::min(last + kMaxStepMgdl, std::max(last - kMaxStepMgdl, value));
    }
    value = std::min(400.0, std::max(40.0, value));
    series.records.push_back({ts, value});
  }
  return series;
}

std::vector<PatientSeries> generate_synthetic(int n_patients, int n_days, RngState& rng,
                                              double outlier_rate) {
  if (n_patients < 1) throw std::invalid_argument("generate_synthetic: n_patients must be >= 1");
  std::vector<PatientSeries> out;
  out.reserve(n_patients);
  const std::int64_t start = synthetic_start_ts();
  for (int k = 0; k < n_patients; ++k) {
    char id[16];
    std::snprintf(id, sizeof(id), "p%03d", k);
    RngState child(rng.next_u64());
    const PatientProfile profile = random_profile(id, child);
    out.push_back(generate_patient(profile, n_days, start, outlier_rate, child));
  }
  return out;
}

}  // namespace glucast
