#include "glucast/layers.hpp"

#include <algorithm>
#include <cmath>

namespace glucast {

namespace {

Tensor1 sigmoid(const Tensor1& a) {
  return a.unaryExpr([](double v) { return 1.0 / (1.0 + std::exp(-v)); });
}

}  // namespace

// ---------------------------------------------------------------------------
// GRU cell

void GruParams::init(int in_dim, int hid_dim, RngState& rng, double stddev) {
  W_u = init_normal(hid_dim, in_dim, rng, stddev);
  U_u = init_normal(hid_dim, hid_dim, rng, stddev);
  b_u = init_normal_vec(hid_dim, rng, stddev);
  W_r = init_normal(hid_dim, in_dim, rng, stddev);
  U_r = init_normal(hid_dim, hid_dim, rng, stddev);
  b_r = init_normal_vec(hid_dim, rng, stddev);
  W_c = init_normal(hid_dim, in_dim, rng, stddev);
  U_c = init_normal(hid_dim, hid_dim, rng, stddev);
  b_c = init_normal_vec(hid_dim, rng, stddev);
}

void GruParams::collect(const std::string& prefix, std::vector<TensorSlot>& out) {
  add_slot(out, prefix + ".W_u", W_u);
  add_slot(out, prefix + ".U_u", U_u);
  add_slot(out, prefix + ".b_u", b_u);
  add_slot(out, prefix + ".W_r", W_r);
  add_slot(out, prefix + ".U_r", U_r);
  add_slot(out, prefix + ".b_r", b_r);
  add_slot(out, prefix + ".W_c", W_c);
  add_slot(out, prefix + ".U_c", U_c);
  add_slot(out, prefix + ".b_c", b_c);
}

Tensor1 gru_cell_forward(const GruParams& p, const Tensor1& x, const Tensor1& h_prev,
                         GruCache* cache) {
  const Tensor1 u = sigmoid(p.W_u * x + p.U_u * h_prev + p.b_u);
  const Tensor1 r = sigmoid(p.W_r * x + p.U_r * h_prev + p.b_r);
  const Tensor1 c = (p.W_c * x + p.U_c * (r.cwiseProduct(h_prev)) + p.b_c)
                        .unaryExpr([](double v) { return std::tanh(v); });
  Tensor1 h = (1.0 - u.array()) * h_prev.array() + u.array() * c.array();
  if (cache) {
    cache->x = x;
    cache->h_prev = h_prev;
    cache->u = u;
    cache->r = r;
    cache->c = c;
    cache->h = h;
  }
  return h;
}

void gru_cell_backward(const GruParams& p, const GruCache& cache, const Tensor1& dh,
                       GruParams& gp, Tensor1& dx, Tensor1& dh_prev) {
  const Tensor1& u = cache.u;
  const Tensor1& r = cache.r;
  const Tensor1& c = cache.c;
  const Tensor1& h_prev = cache.h_prev;

  const Tensor1 du = dh.cwiseProduct(c - h_prev);
  const Tensor1 dc = dh.cwiseProduct(u);
  dh_prev = dh.cwiseProduct(Tensor1::Ones(u.size()) - u);

  const Tensor1 da_c = dc.array() * (1.0 - c.array().square());
  const Tensor1 drh = p.U_c.transpose() * da_c;  // grad w.r.t. r ⊙ h_prev
  const Tensor1 dr = drh.cwiseProduct(h_prev);
  dh_prev += drh.cwiseProduct(r);

  const Tensor1 da_u = du.array() * u.array() * (1.0 - u.array());
  const Tensor1 da_r = dr.array() * r.array() * (1.0 - r.array());

  dx = p.W_c.transpose() * da_c + p.W_r.transpose() * da_r + p.W_u.transpose() * da_u;
  dh_prev += p.U_r.transpose() * da_r + p.U_u.transpose() * da_u;

  const Tensor1 rh = r.cwiseProduct(h_prev);
  gp.W_u += da_u * cache.x.transpose();
  gp.U_u += da_u * h_prev.transpose();
  gp.b_u += da_u;
  gp.W_r += da_r * cache.x.transpose();
  gp.U_r += da_r * h_prev.transpose();
  gp.b_r += da_r;
  gp.W_c += da_c * cache.x.transpose();
  gp.U_c += da_c * rh.transpose();
  gp.b_c += da_c;
}

// ---------------------------------------------------------------------------
// Bidirectional encoder

Tensor2 bigru_encode(const GruParams& fwd, const GruParams& bwd, const Tensor2& X,
                     BiGruCache* cache) {
  const Eigen::Index T = X.rows();
  const int hid = fwd.hidden_dim();
  Tensor2 H(T, 2 * hid);
  if (cache) {
    cache->fwd.resize(T);
    cache->bwd.resize(T);
  }

  Tensor1 h = Tensor1::Zero(hid);
  for (Eigen::Index j = 0; j < T; ++j) {
    h = gru_cell_forward(fwd, X.row(j).transpose(), h, cache ? &cache->fwd[j] : nullptr);
    H.row(j).head(hid) = h.transpose();
  }

  h = Tensor1::Zero(hid);
  for (Eigen::Index j = T - 1; j >= 0; --j) {
    h = gru_cell_forward(bwd, X.row(j).transpose(), h, cache ? &cache->bwd[j] : nullptr);
    H.row(j).tail(hid) = h.transpose();
  }
  return H;
}

Tensor2 bigru_backward(const GruParams& fwd, const GruParams& bwd, const BiGruCache& cache,
                       const Tensor2& dH, GruParams& gfwd, GruParams& gbwd) {
  const Eigen::Index T = dH.rows();
  const int hid = fwd.hidden_dim();
  Tensor2 dX = Tensor2::Zero(T, fwd.input_dim());

  Tensor1 dx(fwd.input_dim()), dh_prev(hid);
  Tensor1 carry = Tensor1::Zero(hid);
  for (Eigen::Index j = T - 1; j >= 0; --j) {
    const Tensor1 dh = dH.row(j).head(hid).transpose() + carry;
    gru_cell_backward(fwd, cache.fwd[j], dh, gfwd, dx, dh_prev);
    dX.row(j) += dx.transpose();
    carry = dh_prev;
  }

  // The backward chain consumed rows T-1..0, so its last step is row 0.
  carry.setZero();
  for (Eigen::Index j = 0; j < T; ++j) {
    const Tensor1 dh = dH.row(j).tail(hid).transpose() + carry;
    gru_cell_backward(bwd, cache.bwd[j], dh, gbwd, dx, dh_prev);
    dX.row(j) += dx.transpose();
    carry = dh_prev;
  }
  return dX;
}

// ---------------------------------------------------------------------------
// Summary projection

void SummaryParams::init(int out_dim, int in_dim, RngState& rng, double stddev) {
  W = init_normal(out_dim, in_dim, rng, stddev);
}

void SummaryParams::collect(const std::string& prefix, std::vector<TensorSlot>& out) {
  add_slot(out, prefix + ".W", W);
}

Tensor1 summary_forward(const SummaryParams& p, const Tensor1& h_last, SummaryCache* cache) {
  Tensor1 z = (p.W * h_last).unaryExpr([](double v) { return std::tanh(v); });
  if (cache) {
    cache->h_last = h_last;
    cache->z = z;
  }
  return z;
}

void summary_backward(const SummaryParams& p, const SummaryCache& cache, const Tensor1& dz,
                      SummaryParams& gp, Tensor1& dh_last) {
  const Tensor1 da = dz.array() * (1.0 - cache.z.array().square());
  gp.W += da * cache.h_last.transpose();
  dh_last = p.W.transpose() * da;
}

// ---------------------------------------------------------------------------
// Patient embeddings

int EmbeddingTable::index_of(const std::string& id) const {
  const auto it = std::lower_bound(ids.begin(), ids.end(), id);
  if (it == ids.end() || *it != id) throw UnknownPatient(id);
  return static_cast<int>(it - ids.begin());
}

void EmbeddingTable::init(std::vector<std::string> patient_ids, int dim, RngState& rng,
                          double stddev) {
  std::sort(patient_ids.begin(), patient_ids.end());
  patient_ids.erase(std::unique(patient_ids.begin(), patient_ids.end()), patient_ids.end());
  ids = std::move(patient_ids);
  E = init_normal(static_cast<int>(ids.size()), dim, rng, stddev);
}

void EmbeddingTable::collect(const std::string& prefix, std::vector<TensorSlot>& out) {
  add_slot(out, prefix + ".E", E);
}

// ---------------------------------------------------------------------------
// Attention

void AttentionParams::init(int heads, int attn_hidden, int enc_dim, int dec_dim, RngState& rng,
                           double stddev) {
  W.clear();
  r.clear();
  for (int k = 0; k < heads; ++k) {
    W.push_back(init_normal(attn_hidden, enc_dim + dec_dim, rng, stddev));
    r.push_back(init_normal_vec(attn_hidden, rng, stddev));
  }
}

void AttentionParams::collect(const std::string& prefix, std::vector<TensorSlot>& out) {
  for (size_t k = 0; k < W.size(); ++k) {
    add_slot(out, prefix + ".W." + std::to_string(k), W[k]);
    add_slot(out, prefix + ".r." + std::to_string(k), r[k]);
  }
}

namespace {

Tensor2 concat_rows(const Tensor2& H, const Tensor1& s_prev) {
  Tensor2 cat(H.rows(), H.cols() + s_prev.size());
  cat.leftCols(H.cols()) = H;
  cat.rightCols(s_prev.size()).rowwise() = s_prev.transpose();
  return cat;
}

}  // namespace

Tensor1 attention_forward(const AttentionParams& p, const Tensor2& H, const Tensor1& s_prev,
                          AttentionCache* cache) {
  const int K = p.heads();
  const Tensor2 cat = concat_rows(H, s_prev);
  Tensor1 ctx = Tensor1::Zero(H.cols());
  if (cache) {
    cache->P.resize(K);
    cache->e.resize(K);
    cache->alpha.resize(K);
    cache->s_prev = s_prev;
  }
  for (int k = 0; k < K; ++k) {
    const Tensor2 P = cat * p.W[k].transpose();  // t0 x attn_hidden
    const Tensor1 e = (P * p.r[k]).unaryExpr([](double v) { return std::tanh(v); });
    const Tensor1 alpha = stable_softmax(e);
    ctx += (H.transpose() * alpha) / static_cast<double>(K);
    if (cache) {
      cache->P[k] = P;
      cache->e[k] = e;
      cache->alpha[k] = alpha;
    }
  }
  Tensor1 a = ctx.unaryExpr([](double v) { return std::tanh(v); });
  if (cache) cache->a = a;
  return a;
}

void attention_backward(const AttentionParams& p, const Tensor2& H, const AttentionCache& cache,
                        const Tensor1& da, AttentionParams& gp, Tensor2& dH, Tensor1& ds_prev) {
  const int K = p.heads();
  const Eigen::Index enc_dim = H.cols();
  const Tensor2 cat = concat_rows(H, cache.s_prev);
  const Tensor1 dctx = da.array() * (1.0 - cache.a.array().square());

  for (int k = 0; k < K; ++k) {
    const Tensor1& alpha = cache.alpha[k];
    const Tensor1& e = cache.e[k];
    const Tensor1 dc = dctx / static_cast<double>(K);

    const Tensor1 dalpha = H * dc;
    dH += alpha * dc.transpose();

    const double dot = alpha.dot(dalpha);
    const Tensor1 de = alpha.array() * (dalpha.array() - dot);
    const Tensor1 dq = de.array() * (1.0 - e.array().square());

    gp.r[k] += cache.P[k].transpose() * dq;
    const Tensor2 dP = dq * p.r[k].transpose();  // t0 x attn_hidden
    gp.W[k] += dP.transpose() * cat;
    const Tensor2 dcat = dP * p.W[k];
    dH += dcat.leftCols(enc_dim);
    ds_prev += dcat.rightCols(cache.s_prev.size()).colwise().sum().transpose();
  }
}

// ---------------------------------------------------------------------------
// Readout heads

void MlpParams::init(int in_dim, int hidden, RngState& rng, double stddev) {
  W1 = init_normal(hidden, in_dim, rng, stddev);
  b1 = init_normal_vec(hidden, rng, stddev);
  w2 = init_normal_vec(hidden, rng, stddev);
  b2 = rng.normal(0.0, stddev);
}

void MlpParams::collect(const std::string& prefix, std::vector<TensorSlot>& out) {
  add_slot(out, prefix + ".W1", W1);
  add_slot(out, prefix + ".b1", b1);
  add_slot(out, prefix + ".w2", w2);
  add_slot(out, prefix + ".b2", b2);
}

double mlp_forward(const MlpParams& p, const Tensor1& x, MlpCache* cache) {
  const Tensor1 hid =
      (p.W1 * x + p.b1).unaryExpr([](double v) { return std::tanh(v); });
  const double y = p.w2.dot(hid) + p.b2;
  if (cache) {
    cache->x = x;
    cache->hid = hid;
  }
  return y;
}

void mlp_backward(const MlpParams& p, const MlpCache& cache, double dy, MlpParams& gp,
                  Tensor1& dx) {
  const Tensor1 dhid = dy * p.w2;
  const Tensor1 da1 = dhid.array() * (1.0 - cache.hid.array().square());
  gp.W1 += da1 * cache.x.transpose();
  gp.b1 += da1;
  gp.w2 += dy * cache.hid;
  gp.b2 += dy;
  dx = p.W1.transpose() * da1;
}

void LinearParams::init(int out_dim, int in_dim, RngState& rng, double stddev) {
  W = init_normal(out_dim, in_dim, rng, stddev);
  b = init_normal_vec(out_dim, rng, stddev);
}

void LinearParams::collect(const std::string& prefix, std::vector<TensorSlot>& out) {
  add_slot(out, prefix + ".W", W);
  add_slot(out, prefix + ".b", b);
}

Tensor1 linear_forward(const LinearParams& p, const Tensor1& x) {
  return p.W * x + p.b;
}

void linear_backward(const LinearParams& p, const Tensor1& x, const Tensor1& dy, LinearParams& gp,
                     Tensor1& dx) {
  gp.W += dy * x.transpose();
  gp.b += dy;
  dx = p.W.transpose() * dy;
}

}  // namespace glucast
