#include "glucast/numerics.hpp"

#include <cmath>

namespace glucast {

double RngState::normal(double mean, double stddev) {
  if (have_spare_) {
    have_spare_ = false;
    return mean + stddev * spare_;
  }
  const double u1 = uniform();  // (0, 1], log is safe
  const double u2 = uniform_half_open();
  const double radius = std::sqrt(-2.0 * std::log(u1));
  const double angle = 2.0 * M_PI * u2;
  spare_ = radius * std::sin(angle);
  have_spare_ = true;
  return mean + stddev * radius * std::cos(angle);
}

std::vector<int> RngState::shuffled_indices(int n) {
  std::vector<int> idx(n);
  for (int i = 0; i < n; ++i) idx[i] = i;
  for (int i = n - 1; i > 0; --i) {
    const int j = static_cast<int>(next_u64() % static_cast<std::uint64_t>(i + 1));
    std::swap(idx[i], idx[j]);
  }
  return idx;
}

Eigen::Index total_size(const std::vector<TensorSlot>& slots) {
  Eigen::Index n = 0;
  for (const auto& s : slots) n += s.size();
  return n;
}

Tensor1 flatten(const std::vector<TensorSlot>& slots) {
  Tensor1 out(total_size(slots));
  Eigen::Index at = 0;
  for (const auto& s : slots) {
    for (Eigen::Index i = 0; i < s.size(); ++i) out[at++] = s.data[i];
  }
  return out;
}

void unflatten(const Tensor1& flat, const std::vector<TensorSlot>& slots) {
  if (flat.size() != total_size(slots)) {
    throw std::invalid_argument("unflatten: size mismatch");
  }
  Eigen::Index at = 0;
  for (const auto& s : slots) {
    for (Eigen::Index i = 0; i < s.size(); ++i) s.data[i] = flat[at++];
  }
}

void zero_slots(const std::vector<TensorSlot>& slots) {
  for (const auto& s : slots) {
    for (Eigen::Index i = 0; i < s.size(); ++i) s.data[i] = 0.0;
  }
}

bool slots_finite(const std::vector<TensorSlot>& slots) {
  for (const auto& s : slots) {
    for (Eigen::Index i = 0; i < s.size(); ++i) {
      if (!std::isfinite(s.data[i])) return false;
    }
  }
  return true;
}

Tensor1 stable_softmax(const Tensor1& v) {
  if (v.size() == 0) throw std::invalid_argument("stable_softmax: empty input");
  const double shift = v.maxCoeff();
  Tensor1 e = (v.array() - shift).exp();
  return e / e.sum();
}

Tensor2 init_normal(Eigen::Index rows, Eigen::Index cols, RngState& rng, double stddev) {
  if (rows <= 0 || cols <= 0) throw std::invalid_argument("init_normal: non-positive shape");
  Tensor2 t(rows, cols);
  for (Eigen::Index i = 0; i < rows; ++i) {
    for (Eigen::Index j = 0; j < cols; ++j) t(i, j) = rng.normal(0.0, stddev);
  }
  return t;
}

Tensor1 init_normal_vec(Eigen::Index len, RngState& rng, double stddev) {
  if (len <= 0) throw std::invalid_argument("init_normal_vec: non-positive length");
  Tensor1 t(len);
  for (Eigen::Index i = 0; i < len; ++i) t[i] = rng.normal(0.0, stddev);
  return t;
}

double grad_check(const std::function<double(const Tensor1&)>& f, const Tensor1& p,
                  const Tensor1& analytic_grad, double eps) {
  if (p.size() != analytic_grad.size()) {
    throw std::invalid_argument("grad_check: gradient length mismatch");
  }
  Tensor1 probe = p;
  double worst = 0.0;
  for (Eigen::Index i = 0; i < p.size(); ++i) {
    probe[i] = p[i] + eps;
    const double up = f(probe);
    probe[i] = p[i] - eps;
    const double down = f(probe);
    probe[i] = p[i];
    if (!std::isfinite(up) || !std::isfinite(down)) {
      throw std::runtime_error("grad_check: non-finite function value");
    }
    const double numeric = (up - down) / (2.0 * eps);
    const double denom = std::max({1.0, std::abs(numeric), std::abs(analytic_grad[i])});
    worst = std::max(worst, std::abs(numeric - analytic_grad[i]) / denom);
  }
  return worst;
}

}  // namespace glucast
