#include "glucast/baselines.hpp"

#include <Eigen/QR>
#include <stdexcept>

namespace glucast {

namespace {

std::vector<double> difference(const std::vector<double>& x) {
  std::vector<double> w(x.size() - 1);
  for (size_t i = 1; i < x.size(); ++i) w[i - 1] = x[i] - x[i - 1];
  return w;
}

}  // namespace

ArModel fit_ar(const std::vector<double>& values, int p, int d) {
  if (p < 1) throw std::invalid_argument("fit_ar: p must be >= 1");
  if (d != 0 && d != 1) throw std::invalid_argument("fit_ar: d must be 0 or 1");
  const long n = static_cast<long>(values.size());
  if (n <= p + d + 1) {
    throw std::invalid_argument("fit_ar: need more than " + std::to_string(p + d + 1) +
                                " values, have " + std::to_string(n));
  }

  const std::vector<double> w = d == 1 ? difference(values) : values;
  const long m = static_cast<long>(w.size()) - p;  // regression rows

  Tensor2 X(m, p + 1);
  Tensor1 y(m);
  for (long i = 0; i < m; ++i) {
    // row i predicts w[p+i] from the p values before it, most recent first
    for (int j = 0; j < p; ++j) X(i, j) = w[p + i - 1 - j];
    X(i, p) = 1.0;
    y[i] = w[p + i];
  }

  const Tensor1 sol = X.completeOrthogonalDecomposition().solve(y);

  ArModel model;
  model.p = p;
  model.d = d;
  model.coef = sol.head(p);
  model.intercept = sol[p];
  if (!model.coef.allFinite() || !std::isfinite(model.intercept)) {
    throw std::runtime_error("fit_ar: non-finite coefficients");
  }
  return model;
}

std::vector<double> forecast_ar(const ArModel& m, const std::vector<double>& recent, int tau) {
  if (tau < 1) throw std::invalid_argument("forecast_ar: tau must be >= 1");
  if (static_cast<long>(recent.size()) < m.p + m.d) {
    throw std::invalid_argument("forecast_ar: need at least " + std::to_string(m.p + m.d) +
                                " recent values, have " + std::to_string(recent.size()));
  }

  std::vector<double> w = m.d == 1 ? difference(recent) : recent;
  double level = recent.back();

  std::vector<double> out;
  out.reserve(tau);
  for (int step = 0; step < tau; ++step) {
    double next = m.intercept;
    for (int j = 0; j < m.p; ++j) next += m.coef[j] * w[w.size() - 1 - j];
    w.push_back(next);
    if (m.d == 1) {
      level += next;
      out.push_back(level);
    } else {
      out.push_back(next);
    }
  }
  return out;
}

std::vector<double> persistence_forecast(const std::vector<double>& recent, int tau) {
  if (recent.empty()) throw std::invalid_argument("persistence_forecast: empty history");
  if (tau < 1) throw std::invalid_argument("persistence_forecast: tau must be >= 1");
  return std::vector<double>(tau, recent.back());
}

// ---------------------------------------------------------------------------
// Linear-trend sequence model

void LinearSeqParams::init(const LinearSeqConfig& config, RngState& rng) {
  cfg = config;
  enc_fwd.init(cfg.enc_input_dim(), cfg.enc_hidden, rng);
  enc_bwd.init(cfg.enc_input_dim(), cfg.enc_hidden, rng);
  summary.init(cfg.summary_dim, cfg.enc_out_dim(), rng);
  head.init(2, cfg.summary_dim, rng);
}

std::vector<TensorSlot> LinearSeqParams::slots() {
  std::vector<TensorSlot> out;
  enc_fwd.collect("enc_fwd", out);
  enc_bwd.collect("enc_bwd", out);
  summary.collect("summary", out);
  head.collect("head", out);
  return out;
}

long LinearSeqParams::param_count() {
  return static_cast<long>(total_size(slots()));
}

Tensor1 linear_seq_forward(const LinearSeqParams& m, const WindowSample& w, LinearSeqCache* cache,
                           const std::vector<char>*, const Tensor1*) {
  const LinearSeqConfig& cfg = m.cfg;
  if (w.t0 != cfg.t0 || w.tau != cfg.tau) {
    throw std::invalid_argument("linear_seq_forward: window does not match model t0/tau");
  }

  Tensor2 X(cfg.t0, cfg.enc_input_dim());
  for (int j = 0; j < cfg.t0; ++j) {
    X(j, 0) = cfg.norm.apply(w.input_raw(j));
    if (cfg.use_time_features) X.row(j).segment(1, 3) = w.time_feat(j).transpose();
  }

  const Tensor2 H = bigru_encode(m.enc_fwd, m.enc_bwd, X, cache ? &cache->enc : nullptr);
  Tensor1 h_last(cfg.enc_out_dim());
  h_last.head(cfg.enc_hidden) = H.row(cfg.t0 - 1).head(cfg.enc_hidden).transpose();
  h_last.tail(cfg.enc_hidden) = H.row(0).tail(cfg.enc_hidden).transpose();

  const Tensor1 z = summary_forward(m.summary, h_last, cache ? &cache->summary : nullptr);
  const Tensor1 ab = linear_forward(m.head, z);

  Tensor1 pred(cfg.tau);
  for (int i = 0; i < cfg.tau; ++i) pred[i] = ab[0] + ab[1] * (i + 1);

  if (cache) {
    cache->X = X;
    cache->H = H;
    cache->h_last = h_last;
    cache->ab = ab;
    cache->pred = pred;
  }
  return pred;
}

void linear_seq_backward(const LinearSeqParams& m, const WindowSample&,
                         const LinearSeqCache& cache, const Tensor1& d_pred, LinearSeqParams& g) {
  const LinearSeqConfig& cfg = m.cfg;

  Tensor1 dab = Tensor1::Zero(2);
  for (int i = 0; i < cfg.tau; ++i) {
    dab[0] += d_pred[i];
    dab[1] += d_pred[i] * (i + 1);
  }

  Tensor1 dz;
  linear_backward(m.head, cache.summary.z, dab, g.head, dz);

  Tensor1 dh_last;
  summary_backward(m.summary, cache.summary, dz, g.summary, dh_last);

  Tensor2 dH = Tensor2::Zero(cfg.t0, cfg.enc_out_dim());
  dH.row(cfg.t0 - 1).head(cfg.enc_hidden) += dh_last.head(cfg.enc_hidden).transpose();
  dH.row(0).tail(cfg.enc_hidden) += dh_last.tail(cfg.enc_hidden).transpose();

  bigru_backward(m.enc_fwd, m.enc_bwd, cache.enc, dH, g.enc_fwd, g.enc_bwd);
}

}  // namespace glucast
