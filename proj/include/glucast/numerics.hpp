#pragma once

#include <Eigen/Dense>

#include <cstdint>
#include <functional>
#include <random>
#include <stdexcept>
#include <string>
#include <vector>

namespace glucast {

// All math runs in 64-bit floats. Shapes are fixed at construction; every
// public operation keeps elements finite.
using Tensor1 = Eigen::VectorXd;
using Tensor2 = Eigen::MatrixXd;

// Deterministic random source. mt19937_64's bit stream is pinned by the
// standard, and the normal transform below is our own Box-Muller, so the
// same seed yields the same draws on every platform. Single-owner: never
// share one RngState across threads.
class RngState {
public:
  explicit RngState(std::uint64_t seed) : engine_(seed) {}

  std::uint64_t next_u64() { return engine_(); }

  // Uniform on (0, 1]: 53 mantissa bits, never exactly zero.
  double uniform() {
    return static_cast<double>((engine_() >> 11) + 1) * 0x1p-53;
  }

  // Uniform on [0, 1).
  double uniform_half_open() {
    return static_cast<double>(engine_() >> 11) * 0x1p-53;
  }

  double normal(double mean, double stddev);

  // Fisher-Yates over [0, n) index vector.
  std::vector<int> shuffled_indices(int n);

private:
  std::mt19937_64 engine_;
  bool have_spare_ = false;
  double spare_ = 0.0;
};

// Named handle on one parameter (or gradient) tensor. The optimizer, the
// clipper, the serializer, and the gradient checker all walk models through
// flat lists of these.
struct TensorSlot {
  std::string name;
  double* data = nullptr;
  Eigen::Index rows = 0;
  Eigen::Index cols = 0;  // 1 for vectors

  Eigen::Index size() const { return rows * cols; }
};

inline void add_slot(std::vector<TensorSlot>& out, const std::string& name, Tensor2& t) {
  out.push_back({name, t.data(), t.rows(), t.cols()});
}
inline void add_slot(std::vector<TensorSlot>& out, const std::string& name, Tensor1& t) {
  out.push_back({name, t.data(), t.size(), 1});
}
inline void add_slot(std::vector<TensorSlot>& out, const std::string& name, double& value) {
  out.push_back({name, &value, 1, 1});
}

Eigen::Index total_size(const std::vector<TensorSlot>& slots);
Tensor1 flatten(const std::vector<TensorSlot>& slots);
void unflatten(const Tensor1& flat, const std::vector<TensorSlot>& slots);
void zero_slots(const std::vector<TensorSlot>& slots);
bool slots_finite(const std::vector<TensorSlot>& slots);

// Softmax with max-shift so large inputs cannot overflow. Output is
// non-negative and sums to one.
Tensor1 stable_softmax(const Tensor1& v);

// i.i.d. N(0, stddev^2) entries, filled row-major so the layout is part of
// the reproducibility contract.
Tensor2 init_normal(Eigen::Index rows, Eigen::Index cols, RngState& rng, double stddev = 0.1);
Tensor1 init_normal_vec(Eigen::Index len, RngState& rng, double stddev = 0.1);

// Central-difference check of an analytic gradient. Returns
// max_i |g_num - g_ana| / max(1, |g_num|, |g_ana|).
double grad_check(const std::function<double(const Tensor1&)>& f, const Tensor1& p,
                  const Tensor1& analytic_grad, double eps = 1e-5);

}  // namespace glucast
