#pragma once

#include <string>
#include <vector>

#include "glucast/data.hpp"
#include "glucast/layers.hpp"
#include "glucast/numerics.hpp"

namespace glucast {

// Autoregression on the (optionally once-differenced) series, fit by least
// squares. The moving-average term of a full ARIMA is deliberately absent.
struct ArModel {
  int p = 10;
  int d = 1;  // 0 or 1
  Tensor1 coef;       // length p, coef[0] multiplies the most recent value
  double intercept = 0.0;
};

// Minimum-norm least squares on lagged rows of the series; a rank-deficient
// design (e.g. a constant differenced series) resolves to the minimum-norm
// solution rather than an error. Throws on insufficient data.
ArModel fit_ar(const std::vector<double>& values, int p, int d);

// Recursive multi-step forecast from the last p+d values of `recent`; with
// d=1 the differenced predictions are accumulated back onto the last level.
std::vector<double> forecast_ar(const ArModel& m, const std::vector<double>& recent, int tau);

std::vector<double> persistence_forecast(const std::vector<double>& recent, int tau);

// Recurrent linear-trend forecaster: the shared bidirectional encoder and
// summary projection feed a linear head that emits an intercept and a slope;
// the forecast is a + b*i for step i = 1..tau. No attention, no embeddings;
// trained with plain (untrimmed) squared error.
struct LinearSeqConfig {
  int t0 = 190;
  int tau = 12;
  int enc_hidden = 120;  // per direction
  int summary_dim = 30;
  bool use_time_features = false;
  Normalizer norm;

  int enc_input_dim() const { return 1 + (use_time_features ? 3 : 0); }
  int enc_out_dim() const { return 2 * enc_hidden; }
};

struct LinearSeqParams {
  LinearSeqConfig cfg;
  GruParams enc_fwd, enc_bwd;
  SummaryParams summary;
  LinearParams head;  // 2 outputs: intercept, slope

  void init(const LinearSeqConfig& config, RngState& rng);
  std::vector<TensorSlot> slots();
  long param_count();
};

struct LinearSeqCache {
  Tensor2 X;
  BiGruCache enc;
  Tensor2 H;
  Tensor1 h_last;
  SummaryCache summary;
  Tensor1 ab;  // (intercept, slope)
  Tensor1 pred;
};

// Normalized forecast; teacher forcing does not apply (no autoregressive
// feedback), so the mask/target arguments of the trainer interface are
// accepted and ignored.
Tensor1 linear_seq_forward(const LinearSeqParams& m, const WindowSample& w,
                           LinearSeqCache* cache = nullptr,
                           const std::vector<char>* teacher_mask = nullptr,
                           const Tensor1* target_norm = nullptr);

void linear_seq_backward(const LinearSeqParams& m, const WindowSample& w,
                         const LinearSeqCache& cache, const Tensor1& d_pred, LinearSeqParams& g);

struct LinearSeqDriver {
  using Params = LinearSeqParams;
  using Cache = LinearSeqCache;
  static Tensor1 forward(const Params& p, const WindowSample& w, Cache* c,
                         const std::vector<char>* mask, const Tensor1* target) {
    return linear_seq_forward(p, w, c, mask, target);
  }
  static void backward(const Params& p, const WindowSample& w, const Cache& c, const Tensor1& d,
                       Params& g) {
    linear_seq_backward(p, w, c, d, g);
  }
  static const Normalizer& norm(const Params& p) { return p.cfg.norm; }
};

}  // namespace glucast
