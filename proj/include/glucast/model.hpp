#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "glucast/data.hpp"
#include "glucast/layers.hpp"

namespace glucast {

struct ModelConfig {
  int t0 = 190;          // encoder length
  int tau = 12;          // forecast steps
  int enc_hidden = 120;  // per direction
  int dec_hidden = 30;
  int embed_dim = 5;
  int attn_heads = 4;
  int attn_hidden = 64;
  int head_hidden = 60;
  bool use_attention = true;
  bool use_embedding = true;
  bool use_time_features = true;
  bool cold_start_mean = false;  // unseen patient -> mean embedding row instead of error
  Normalizer norm;

  int time_dim() const { return use_time_features ? 3 : 0; }
  int embed_in() const { return use_embedding ? embed_dim : 0; }
  int enc_out_dim() const { return 2 * enc_hidden; }
  int enc_input_dim() const { return 1 + embed_in() + time_dim(); }
  int dec_input_dim() const {
    return (use_attention ? enc_out_dim() : 0) + embed_in() + 1 + time_dim();
  }
  int head_input_dim() const {
    return (use_attention ? enc_out_dim() : 0) + dec_hidden + embed_in() + 1 + time_dim();
  }
};

struct ModelParams {
  ModelConfig cfg;
  GruParams enc_fwd, enc_bwd;
  SummaryParams summary;
  EmbeddingTable embed;
  AttentionParams attn;
  GruParams dec;
  MlpParams head;

  void init(const ModelConfig& config, const std::vector<std::string>& patient_ids,
            RngState& rng);
  std::vector<TensorSlot> slots();
  long param_count();
};

// Copy of m with every parameter zeroed; used as a gradient accumulator.
ModelParams zeros_like(const ModelParams& m);

struct DecoderStepCache {
  AttentionCache attn;
  GruCache gru;
  MlpCache head;
  double x_prev = 0.0;        // normalized previous value consumed by this step
  bool used_teacher = false;  // x_prev came from the target rather than the prediction
};

// Every intermediate needed for the backward pass; also serves as the
// roll-out instrumentation (one entry per decoder step, in call order).
struct ForwardCache {
  Tensor2 X;  // encoder inputs, t0 x enc_input_dim
  BiGruCache enc;
  Tensor2 H;
  Tensor1 h_last;
  SummaryCache summary;
  int patient_index = -1;  // -1 when embeddings are off
  std::vector<DecoderStepCache> steps;
  Tensor1 pred;  // normalized, length tau
};

// Normalized tau-step forecast for one window. When teacher_mask is non-null
// it has tau entries; a nonzero entry at i >= 1 makes step i consume the true
// normalized target of step i-1 instead of the model's own prediction
// (target_norm must then be provided). Entry 0 is ignored: the first step
// always consumes the anchor record.
Tensor1 model_forward(const ModelParams& m, const WindowSample& w, ForwardCache* cache = nullptr,
                      const std::vector<char>* teacher_mask = nullptr,
                      const Tensor1* target_norm = nullptr);

// d_pred is the loss gradient w.r.t. the normalized predictions. Parameter
// gradients accumulate into g (shapes must match m; see zeros_like).
void model_backward(const ModelParams& m, const WindowSample& w, const ForwardCache& cache,
                    const Tensor1& d_pred, ModelParams& g);

struct Forecast {
  std::string patient_id;
  std::int64_t anchor_ts = 0;
  std::vector<double> values_mgdl;  // length tau
  std::vector<Tensor2> attention;   // per step: heads x t0; empty when attention is off
};

Forecast forecast(const ModelParams& m, const WindowSample& w);

void save_model(ModelParams& m, const std::string& path);
ModelParams load_model(const std::string& path);

}  // namespace glucast
