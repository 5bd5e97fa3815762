#pragma once

#include <stdexcept>
#include <string>
#include <vector>

#include "glucast/numerics.hpp"

namespace glucast {

// Gated recurrent cell. The update gate scales the candidate:
//   u = sigmoid(W_u x + U_u h + b_u)
//   r = sigmoid(W_r x + U_r h + b_r)
//   c = tanh(W_c x + U_c (r ⊙ h) + b_c)
//   h' = (1 - u) ⊙ h + u ⊙ c
struct GruParams {
  Tensor2 W_u, U_u;
  Tensor1 b_u;
  Tensor2 W_r, U_r;
  Tensor1 b_r;
  Tensor2 W_c, U_c;
  Tensor1 b_c;

  int input_dim() const { return static_cast<int>(W_u.cols()); }
  int hidden_dim() const { return static_cast<int>(W_u.rows()); }

  void init(int in_dim, int hid_dim, RngState& rng, double stddev = 0.1);
  void collect(const std::string& prefix, std::vector<TensorSlot>& out);
};

struct GruCache {
  Tensor1 x, h_prev, u, r, c, h;
};

Tensor1 gru_cell_forward(const GruParams& p, const Tensor1& x, const Tensor1& h_prev,
                         GruCache* cache = nullptr);

// dh is the loss gradient w.r.t. the cell output. Parameter gradients
// accumulate into gp; dx and dh_prev are overwritten.
void gru_cell_backward(const GruParams& p, const GruCache& cache, const Tensor1& dh,
                       GruParams& gp, Tensor1& dx, Tensor1& dh_prev);

struct BiGruCache {
  std::vector<GruCache> fwd, bwd;
};

// X holds one input row per step. Row j of the result is
// [forward state after steps 0..j || backward state after steps T-1..j],
// so the forward-final state lives in the left half of the last row and the
// backward-final state in the right half of the first row.
Tensor2 bigru_encode(const GruParams& fwd, const GruParams& bwd, const Tensor2& X,
                     BiGruCache* cache = nullptr);

// dH matches the shape of the encoding. Returns dX.
Tensor2 bigru_backward(const GruParams& fwd, const GruParams& bwd, const BiGruCache& cache,
                       const Tensor2& dH, GruParams& gfwd, GruParams& gbwd);

// Projects the concatenated final encoder states into the decoder state
// space: z = tanh(W h_last).
struct SummaryParams {
  Tensor2 W;

  void init(int out_dim, int in_dim, RngState& rng, double stddev = 0.1);
  void collect(const std::string& prefix, std::vector<TensorSlot>& out);
};

struct SummaryCache {
  Tensor1 h_last, z;
};

Tensor1 summary_forward(const SummaryParams& p, const Tensor1& h_last,
                        SummaryCache* cache = nullptr);
void summary_backward(const SummaryParams& p, const SummaryCache& cache, const Tensor1& dz,
                      SummaryParams& gp, Tensor1& dh_last);

struct UnknownPatient : std::runtime_error {
  explicit UnknownPatient(const std::string& id)
      : std::runtime_error("unknown patient '" + id + "'") {}
};

// One learned vector per patient seen at training time.
struct EmbeddingTable {
  std::vector<std::string> ids;  // sorted, unique
  Tensor2 E;                     // one row per id

  int embed_dim() const { return static_cast<int>(E.cols()); }
  int size() const { return static_cast<int>(E.rows()); }
  int index_of(const std::string& id) const;  // throws UnknownPatient

  void init(std::vector<std::string> patient_ids, int dim, RngState& rng, double stddev = 0.1);
  void collect(const std::string& prefix, std::vector<TensorSlot>& out);
};

// Additive multi-head attention over encoder rows. For head k and encoder
// row h_j, the score is e_j = tanh(r_k · (W_k [h_j || s_prev])); scores are
// softmax-normalized per head and the context is
// a = tanh(mean_k sum_j alpha_j^k h_j).
struct AttentionParams {
  std::vector<Tensor2> W;  // per head: attn_hidden x (enc_dim + dec_dim)
  std::vector<Tensor1> r;  // per head: attn_hidden

  int heads() const { return static_cast<int>(W.size()); }

  void init(int heads, int attn_hidden, int enc_dim, int dec_dim, RngState& rng,
            double stddev = 0.1);
  void collect(const std::string& prefix, std::vector<TensorSlot>& out);
};

struct AttentionCache {
  std::vector<Tensor2> P;      // per head: t0 x attn_hidden, p_j = W [h_j || s_prev]
  std::vector<Tensor1> e;      // per head: pre-softmax scores
  std::vector<Tensor1> alpha;  // per head: softmax weights
  Tensor1 s_prev;
  Tensor1 a;
};

Tensor1 attention_forward(const AttentionParams& p, const Tensor2& H, const Tensor1& s_prev,
                          AttentionCache* cache = nullptr);

// Accumulates into gp, dH and ds_prev (callers zero them beforehand).
void attention_backward(const AttentionParams& p, const Tensor2& H, const AttentionCache& cache,
                        const Tensor1& da, AttentionParams& gp, Tensor2& dH, Tensor1& ds_prev);

// Single-hidden-layer readout with tanh units and a scalar linear output.
struct MlpParams {
  Tensor2 W1;
  Tensor1 b1;
  Tensor1 w2;
  double b2 = 0.0;

  int input_dim() const { return static_cast<int>(W1.cols()); }

  void init(int in_dim, int hidden, RngState& rng, double stddev = 0.1);
  void collect(const std::string& prefix, std::vector<TensorSlot>& out);
};

struct MlpCache {
  Tensor1 x, hid;
};

double mlp_forward(const MlpParams& p, const Tensor1& x, MlpCache* cache = nullptr);
void mlp_backward(const MlpParams& p, const MlpCache& cache, double dy, MlpParams& gp,
                  Tensor1& dx);

// Plain affine map, used by the linear sequence baseline head.
struct LinearParams {
  Tensor2 W;
  Tensor1 b;

  void init(int out_dim, int in_dim, RngState& rng, double stddev = 0.1);
  void collect(const std::string& prefix, std::vector<TensorSlot>& out);
};

Tensor1 linear_forward(const LinearParams& p, const Tensor1& x);
void linear_backward(const LinearParams& p, const Tensor1& x, const Tensor1& dy, LinearParams& gp,
                     Tensor1& dx);

}  // namespace glucast
