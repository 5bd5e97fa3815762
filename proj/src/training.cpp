#include "glucast/training.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

namespace glucast {

double per_sample_loss(const Tensor1& pred, const Tensor1& target) {
  if (pred.size() != target.size()) {
    throw std::invalid_argument("per_sample_loss: length mismatch");
  }
  if (pred.size() == 0) throw std::invalid_argument("per_sample_loss: empty");
  return (pred - target).squaredNorm() / static_cast<double>(pred.size());
}

TrimResult trimmed_batch_loss(const std::vector<double>& losses, double beta) {
  if (losses.empty()) throw std::invalid_argument("trimmed_batch_loss: empty batch");
  if (!(beta > 0.0 && beta <= 1.0)) {
    throw std::invalid_argument("trimmed_batch_loss: beta must be in (0, 1]");
  }
  const int B = static_cast<int>(losses.size());
  const int keep = std::min(B, static_cast<int>(std::ceil(beta * B)));

  std::vector<int> idx(B);
  std::iota(idx.begin(), idx.end(), 0);
  std::stable_sort(idx.begin(), idx.end(),
                   [&](int a, int b) { return losses[a] < losses[b]; });
  idx.resize(keep);
  std::sort(idx.begin(), idx.end());

  double sum = 0.0;
  for (int i : idx) sum += losses[i];
  return {sum / keep, std::move(idx)};
}

double clip_threshold(const TrainConfig& tc, int epoch) {
  if (epoch < 0) throw std::invalid_argument("clip_threshold: negative epoch");
  return tc.clip_init * std::pow(tc.clip_decay, epoch);
}

void clip_gradients(const std::vector<TensorSlot>& grads, double threshold) {
  for (const auto& s : grads) {
    double* p = s.data;
    for (Eigen::Index i = 0; i < s.size(); ++i) {
      p[i] = std::clamp(p[i], -threshold, threshold);
    }
  }
}

void optimizer_step(const std::vector<TensorSlot>& params, const std::vector<TensorSlot>& grads,
                    OptimizerState& state, const TrainConfig& tc) {
  if (params.size() != grads.size()) {
    throw std::invalid_argument("optimizer_step: slot list mismatch");
  }
  const Eigen::Index n = state.m.size();
  if (total_size(params) != n || total_size(grads) != n) {
    throw std::invalid_argument("optimizer_step: state size mismatch");
  }
  if (!slots_finite(grads)) throw TrainError("optimizer_step: non-finite gradient");

  ++state.step;
  const double t = static_cast<double>(state.step);
  const double b1 = tc.beta1;
  const double b2 = tc.beta2;
  const double bc1 = 1.0 - std::pow(b1, t);
  const double bc2 = 1.0 - std::pow(b2, t);

  // Rectification terms, shared across all elements of this step.
  bool rect_ready = false;
  double rect_step = 0.0;
  if (tc.rectified) {
    const double rho_inf = 2.0 / (1.0 - b2) - 1.0;
    const double beta2_t = std::pow(b2, t);
    const double rho_t = rho_inf - 2.0 * t * beta2_t / (1.0 - beta2_t);
    if (rho_t >= 5.0) {
      rect_ready = true;
      const double r = std::sqrt(((rho_t - 4.0) * (rho_t - 2.0) * rho_inf) /
                                 ((rho_inf - 4.0) * (rho_inf - 2.0) * rho_t));
      // variance bias correction folded into the step size
      rect_step = tc.learning_rate * r * std::sqrt(bc2) / bc1;
    }
  }

  Eigen::Index cursor = 0;
  for (size_t k = 0; k < params.size(); ++k) {
    if (params[k].rows != grads[k].rows || params[k].cols != grads[k].cols) {
      throw std::invalid_argument("optimizer_step: shape mismatch in slot '" + params[k].name +
                                  "'");
    }
    double* p = params[k].data;
    const double* g = grads[k].data;
    for (Eigen::Index i = 0; i < params[k].size(); ++i, ++cursor) {
      double& m = state.m[cursor];
      double& v = state.v[cursor];
      m = b1 * m + (1.0 - b1) * g[i];
      v = b2 * v + (1.0 - b2) * g[i] * g[i];
      if (!tc.rectified) {
        const double m_hat = m / bc1;
        const double v_hat = v / bc2;
        p[i] -= tc.learning_rate * m_hat / (std::sqrt(v_hat) + tc.eps);
      } else if (rect_ready) {
        p[i] -= rect_step * m / (std::sqrt(v) + tc.eps);
      } else {
        p[i] -= tc.learning_rate * m / bc1;  // momentum-only fallback
      }
    }
  }
}

}  // namespace glucast
