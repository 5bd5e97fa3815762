#pragma once

#include <functional>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include "glucast/data.hpp"
#include "glucast/model.hpp"
#include "glucast/numerics.hpp"

namespace glucast {

struct TrainError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

struct TrainConfig {
  double beta = 0.9;  // kept fraction of per-sample losses; 1 = plain mean
  double clip_init = 2.0;
  double clip_decay = 0.99;  // multiplicative, per epoch
  double learning_rate = 1e-3;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
  bool rectified = true;  // variance rectification; off = plain adaptive moments
  int batch_size = 128;
  int max_epochs = 200;
  int patience = 10;  // epochs without validation improvement before stopping
  double teacher_forcing_prob = 0.0;
  // Optional schedule; overrides teacher_forcing_prob when set.
  std::function<double(int epoch)> teacher_forcing;
};

inline double effective_teacher_prob(const TrainConfig& tc, int epoch) {
  return tc.teacher_forcing ? tc.teacher_forcing(epoch) : tc.teacher_forcing_prob;
}

struct OptimizerState {
  Tensor1 m, v;  // flat, in slot order
  long step = 0;

  void init(Eigen::Index n) {
    m = Tensor1::Zero(n);
    v = Tensor1::Zero(n);
    step = 0;
  }
};

struct TrainReport {
  std::vector<double> train_loss;  // per epoch: mean trimmed batch loss
  std::vector<double> val_loss;    // per epoch: untrimmed
  std::vector<double> clip_used;   // threshold in effect per epoch
  int epochs_run = 0;
  int best_epoch = -1;
  double best_val = 0.0;
};

// Mean over the steps of squared error, in normalized space.
double per_sample_loss(const Tensor1& pred, const Tensor1& target);

struct TrimResult {
  double loss = 0.0;
  std::vector<int> kept;  // ascending sample indices
};

// Keeps the ceil(beta*B) smallest losses (ties broken by lower index) and
// returns their mean.
TrimResult trimmed_batch_loss(const std::vector<double>& losses, double beta);

double clip_threshold(const TrainConfig& tc, int epoch);
void clip_gradients(const std::vector<TensorSlot>& grads, double threshold);

// One adaptive-moment update. With rectification on, uses momentum-only
// steps while the variance-rectification term is undefined and the rectified
// denominator afterwards; with it off, plain bias-corrected adaptive moments.
void optimizer_step(const std::vector<TensorSlot>& params, const std::vector<TensorSlot>& grads,
                    OptimizerState& state, const TrainConfig& tc);

namespace detail {

template <class Driver>
Tensor1 normalized_target(const typename Driver::Params& params, const WindowSample& w) {
  const Normalizer& norm = Driver::norm(params);
  Tensor1 t(w.tau);
  for (int i = 0; i < w.tau; ++i) t[i] = norm.apply(w.target_raw(i));
  return t;
}

}  // namespace detail

// One full mini-batch step: forward everything, trim, backprop the kept
// samples in ascending index order, check gradient finiteness, clip, update.
// teacher_masks, when given, has one tau-length mask per batch sample. No
// randomness is consumed here. Returns the trimmed batch loss.
template <class Driver>
double batch_update(typename Driver::Params& params, typename Driver::Params& grads,
                    const std::vector<WindowSample>& batch, const TrainConfig& tc, int epoch,
                    OptimizerState& opt,
                    const std::vector<std::vector<char>>* teacher_masks = nullptr) {
  if (batch.empty()) throw std::invalid_argument("batch_update: empty batch");
  const int B = static_cast<int>(batch.size());
  const int tau = batch.front().tau;

  std::vector<double> losses(B);
  std::vector<Tensor1> targets(B);
  for (int b = 0; b < B; ++b) {
    targets[b] = detail::normalized_target<Driver>(params, batch[b]);
    const std::vector<char>* mask = teacher_masks ? &(*teacher_masks)[b] : nullptr;
    const Tensor1 pred = Driver::forward(params, batch[b], nullptr, mask, &targets[b]);
    losses[b] = per_sample_loss(pred, targets[b]);
  }

  const TrimResult trim = trimmed_batch_loss(losses, tc.beta);

  auto grad_slots = grads.slots();
  zero_slots(grad_slots);
  const double scale = 2.0 / (static_cast<double>(tau) * static_cast<double>(trim.kept.size()));
  typename Driver::Cache cache;
  for (const int b : trim.kept) {
    const std::vector<char>* mask = teacher_masks ? &(*teacher_masks)[b] : nullptr;
    const Tensor1 pred = Driver::forward(params, batch[b], &cache, mask, &targets[b]);
    const Tensor1 d_pred = scale * (pred - targets[b]);
    Driver::backward(params, batch[b], cache, d_pred, grads);
  }

  if (!slots_finite(grad_slots)) {
    throw TrainError("non-finite gradient at epoch " + std::to_string(epoch));
  }
  clip_gradients(grad_slots, clip_threshold(tc, epoch));

  auto param_slots = params.slots();
  optimizer_step(param_slots, grad_slots, opt, tc);
  return trim.loss;
}

// Shuffled mini-batch training with early stopping on untrimmed validation
// loss. Returns the parameters of the best validation epoch.
template <class Driver>
std::pair<typename Driver::Params, TrainReport> fit(typename Driver::Params params,
                                                    const std::vector<WindowSample>& train_windows,
                                                    const std::vector<WindowSample>& val_windows,
                                                    const TrainConfig& tc, RngState& rng) {
  if (train_windows.empty()) throw std::invalid_argument("fit: empty training split");
  if (val_windows.empty()) throw std::invalid_argument("fit: empty validation split");
  if (tc.batch_size < 1) throw std::invalid_argument("fit: batch_size must be >= 1");

  typename Driver::Params grads = params;
  zero_slots(grads.slots());
  OptimizerState opt;
  opt.init(total_size(params.slots()));

  TrainReport report;
  typename Driver::Params best = params;
  double best_val = std::numeric_limits<double>::infinity();
  int stale = 0;

  const int n = static_cast<int>(train_windows.size());
  const int tau = train_windows.front().tau;

  for (int epoch = 0; epoch < tc.max_epochs; ++epoch) {
    const double teach = effective_teacher_prob(tc, epoch);
    const std::vector<int> order = rng.shuffled_indices(n);

    double loss_sum = 0.0;
    int n_batches = 0;
    std::vector<WindowSample> batch;
    std::vector<std::vector<char>> masks;
    for (int start = 0; start < n; start += tc.batch_size) {
      const int stop = std::min(n, start + tc.batch_size);
      batch.clear();
      for (int k = start; k < stop; ++k) batch.push_back(train_windows[order[k]]);

      const std::vector<std::vector<char>>* mask_ptr = nullptr;
      if (teach > 0.0) {
        masks.assign(batch.size(), std::vector<char>(tau, 0));
        for (auto& m : masks) {
          for (int i = 1; i < tau; ++i) m[i] = rng.uniform_half_open() < teach ? 1 : 0;
        }
        mask_ptr = &masks;
      }
      loss_sum += batch_update<Driver>(params, grads, batch, tc, epoch, opt, mask_ptr);
      ++n_batches;
    }

    double val_sum = 0.0;
    for (const auto& w : val_windows) {
      const Tensor1 target = detail::normalized_target<Driver>(params, w);
      const Tensor1 pred = Driver::forward(params, w, nullptr, nullptr, nullptr);
      val_sum += per_sample_loss(pred, target);
    }
    const double val = val_sum / static_cast<double>(val_windows.size());

    report.train_loss.push_back(loss_sum / n_batches);
    report.val_loss.push_back(val);
    report.clip_used.push_back(clip_threshold(tc, epoch));
    report.epochs_run = epoch + 1;

    if (val < best_val) {
      best_val = val;
      best = params;
      report.best_epoch = epoch;
      stale = 0;
    } else {
      ++stale;
    }
    if (stale >= tc.patience) break;
  }

  report.best_val = best_val;
  return {std::move(best), report};
}

// Adapters binding the generic trainer to the forecaster.
struct FullModelDriver {
  using Params = ModelParams;
  using Cache = ForwardCache;
  static Tensor1 forward(const Params& p, const WindowSample& w, Cache* c,
                         const std::vector<char>* mask, const Tensor1* target) {
    return model_forward(p, w, c, mask, target);
  }
  static void backward(const Params& p, const WindowSample& w, const Cache& c, const Tensor1& d,
                       Params& g) {
    model_backward(p, w, c, d, g);
  }
  static const Normalizer& norm(const Params& p) { return p.cfg.norm; }
};

}  // namespace glucast
