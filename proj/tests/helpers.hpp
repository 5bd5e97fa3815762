#pragma once

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <memory>
#include <string>
#include <vector>

#include "glucast/data.hpp"

namespace glucast::testing {

// Window over an in-memory gap-free segment starting at start_ts.
inline WindowSample make_window(const std::vector<double>& values, int t0, int tau,
                                std::int64_t start_ts = 0, int offset = 0,
                                int patient_index = -1,
                                const std::string& patient_id = "px") {
  auto seg = std::make_shared<SegmentData>();
  seg->patient_id = patient_id;
  const auto n = static_cast<Eigen::Index>(values.size());
  seg->glucose_raw.resize(n);
  seg->time_feats.resize(n, 3);
  for (Eigen::Index i = 0; i < n; ++i) {
    const std::int64_t ts = start_ts + i * kCadenceSeconds;
    seg->timestamps.push_back(ts);
    seg->glucose_raw[i] = values[i];
    const TimeFeatures f = extract_time_features(ts);
    seg->time_feats(i, 0) = f.hour_frac;
    seg->time_feats(i, 1) = f.dow_frac;
    seg->time_feats(i, 2) = f.weekend;
  }
  WindowSample w;
  w.seg = seg;
  w.offset = offset;
  w.t0 = t0;
  w.tau = tau;
  w.patient_index = patient_index;
  return w;
}

inline PatientSeries make_series(const std::string& id, const std::vector<double>& values,
                                 std::int64_t start_ts = 0,
                                 std::int64_t cadence = kCadenceSeconds) {
  PatientSeries s;
  s.patient_id = id;
  for (size_t i = 0; i < values.size(); ++i) {
    s.records.push_back({start_ts + static_cast<std::int64_t>(i) * cadence, values[i]});
  }
  return s;
}

// Self-cleaning temp directory for file round trips.
class TempDir {
public:
  TempDir() {
    base_ = std::filesystem::temp_directory_path() /
            ("glucast-test-" + std::to_string(reinterpret_cast<std::uintptr_t>(this)));
    std::filesystem::create_directories(base_);
  }
  ~TempDir() {
    std::error_code ec;
    std::filesystem::remove_all(base_, ec);
  }
  std::string path(const std::string& name) const { return (base_ / name).string(); }

private:
  std::filesystem::path base_;
};

inline void write_file(const std::string& path, const std::string& content) {
  std::ofstream f(path);
  f << content;
}

inline std::string read_file(const std::string& path) {
  std::ifstream f(path);
  return {std::istreambuf_iterator<char>(f), std::istreambuf_iterator<char>()};
}

}  // namespace glucast::testing
