#include "glucast/model.hpp"

#include <algorithm>
#include <cstdio>
#include <fstream>
#include <map>
#include <sstream>

namespace glucast {

void ModelParams::init(const ModelConfig& config, const std::vector<std::string>& patient_ids,
                       RngState& rng) {
  cfg = config;
  enc_fwd.init(cfg.enc_input_dim(), cfg.enc_hidden, rng);
  enc_bwd.init(cfg.enc_input_dim(), cfg.enc_hidden, rng);
  summary.init(cfg.dec_hidden, cfg.enc_out_dim(), rng);
  if (cfg.use_embedding) {
    embed.init(patient_ids, cfg.embed_dim, rng);
  } else {
    embed.ids.clear();
    embed.E.resize(0, 0);
  }
  if (cfg.use_attention) {
    attn.init(cfg.attn_heads, cfg.attn_hidden, cfg.enc_out_dim(), cfg.dec_hidden, rng);
  } else {
    attn.W.clear();
    attn.r.clear();
  }
  dec.init(cfg.dec_input_dim(), cfg.dec_hidden, rng);
  head.init(cfg.head_input_dim(), cfg.head_hidden, rng);
}

std::vector<TensorSlot> ModelParams::slots() {
  std::vector<TensorSlot> out;
  enc_fwd.collect("enc_fwd", out);
  enc_bwd.collect("enc_bwd", out);
  summary.collect("summary", out);
  if (cfg.use_embedding) embed.collect("embed", out);
  if (cfg.use_attention) attn.collect("attn", out);
  dec.collect("dec", out);
  head.collect("head", out);
  return out;
}

long ModelParams::param_count() {
  return static_cast<long>(total_size(slots()));
}

ModelParams zeros_like(const ModelParams& m) {
  ModelParams g = m;
  zero_slots(g.slots());
  return g;
}

namespace {

// Embedding row for the window's patient: the cached index, a table lookup,
// or (cold start) the mean row, encoded as index -1 with use_embedding on.
int resolve_embedding(const ModelParams& m, const WindowSample& w, Tensor1& g) {
  const ModelConfig& cfg = m.cfg;
  if (!cfg.use_embedding) return -1;
  if (m.embed.size() == 0) throw UnknownPatient(w.patient_id());
  int idx = w.patient_index;
  if (idx < 0) {
    const auto& ids = m.embed.ids;
    const auto it = std::lower_bound(ids.begin(), ids.end(), w.patient_id());
    if (it != ids.end() && *it == w.patient_id()) {
      idx = static_cast<int>(it - ids.begin());
    } else if (!cfg.cold_start_mean) {
      throw UnknownPatient(w.patient_id());
    }
  }
  g = idx >= 0 ? Tensor1(m.embed.E.row(idx).transpose())
               : Tensor1(m.embed.E.colwise().mean().transpose());
  return idx;
}

}  // namespace

Tensor1 model_forward(const ModelParams& m, const WindowSample& w, ForwardCache* cache,
                      const std::vector<char>* teacher_mask, const Tensor1* target_norm) {
  const ModelConfig& cfg = m.cfg;
  if (w.t0 != cfg.t0 || w.tau != cfg.tau) {
    throw std::invalid_argument("model_forward: window does not match model t0/tau");
  }
  if (teacher_mask && !target_norm) {
    throw std::invalid_argument("model_forward: teacher_mask requires target_norm");
  }

  Tensor1 g;
  const int gidx = resolve_embedding(m, w, g);

  const int t0 = cfg.t0;
  const int tau = cfg.tau;

  Tensor2 X(t0, cfg.enc_input_dim());
  for (int j = 0; j < t0; ++j) {
    int c = 0;
    X(j, c++) = cfg.norm.apply(w.input_raw(j));
    if (cfg.use_embedding) {
      X.row(j).segment(c, cfg.embed_dim) = g.transpose();
      c += cfg.embed_dim;
    }
    if (cfg.use_time_features) {
      X.row(j).segment(c, 3) = w.time_feat(j).transpose();
    }
  }

  const Tensor2 H = bigru_encode(m.enc_fwd, m.enc_bwd, X, cache ? &cache->enc : nullptr);

  Tensor1 h_last(cfg.enc_out_dim());
  h_last.head(cfg.enc_hidden) = H.row(t0 - 1).head(cfg.enc_hidden).transpose();
  h_last.tail(cfg.enc_hidden) = H.row(0).tail(cfg.enc_hidden).transpose();

  Tensor1 s = summary_forward(m.summary, h_last, cache ? &cache->summary : nullptr);

  if (cache) {
    cache->X = X;
    cache->H = H;
    cache->h_last = h_last;
    cache->patient_index = gidx;
    cache->steps.assign(tau, DecoderStepCache{});
    cache->pred.resize(tau);
  }

  Tensor1 pred(tau);
  double x_prev = cfg.norm.apply(w.anchor_raw());
  bool x_prev_from_target = false;

  for (int i = 0; i < tau; ++i) {
    DecoderStepCache* sc = cache ? &cache->steps[i] : nullptr;
    const Eigen::Vector3d tf = w.time_feat(t0 + i);

    Tensor1 a;
    if (cfg.use_attention) {
      a = attention_forward(m.attn, H, s, sc ? &sc->attn : nullptr);
    }

    Tensor1 dec_in(cfg.dec_input_dim());
    int c = 0;
    if (cfg.use_attention) {
      dec_in.segment(c, cfg.enc_out_dim()) = a;
      c += cfg.enc_out_dim();
    }
    if (cfg.use_embedding) {
      dec_in.segment(c, cfg.embed_dim) = g;
      c += cfg.embed_dim;
    }
    dec_in[c++] = x_prev;
    if (cfg.use_time_features) dec_in.segment(c, 3) = tf;

    s = gru_cell_forward(m.dec, dec_in, s, sc ? &sc->gru : nullptr);

    Tensor1 head_in(cfg.head_input_dim());
    c = 0;
    if (cfg.use_attention) {
      head_in.segment(c, cfg.enc_out_dim()) = a;
      c += cfg.enc_out_dim();
    }
    head_in.segment(c, cfg.dec_hidden) = s;
    c += cfg.dec_hidden;
    if (cfg.use_embedding) {
      head_in.segment(c, cfg.embed_dim) = g;
      c += cfg.embed_dim;
    }
    head_in[c++] = x_prev;
    if (cfg.use_time_features) head_in.segment(c, 3) = tf;

    const double y = mlp_forward(m.head, head_in, sc ? &sc->head : nullptr);
    pred[i] = y;

    if (sc) {
      sc->x_prev = x_prev;
      sc->used_teacher = x_prev_from_target;
    }

    const bool teach = teacher_mask && i + 1 < static_cast<int>(teacher_mask->size()) &&
                       (*teacher_mask)[i + 1] != 0;
    x_prev = teach ? (*target_norm)[i] : y;
    x_prev_from_target = teach;
  }

  if (cache) cache->pred = pred;
  return pred;
}

void model_backward(const ModelParams& m, const WindowSample& w, const ForwardCache& cache,
                    const Tensor1& d_pred, ModelParams& g_out) {
  const ModelConfig& cfg = m.cfg;
  const int t0 = cfg.t0;
  const int tau = cfg.tau;
  const int E2 = cfg.enc_out_dim();

  if (cfg.use_embedding && cache.patient_index < 0) {
    throw std::logic_error("model_backward: window has no resolved embedding row");
  }

  Tensor1 dpred = d_pred;
  Tensor2 dH = Tensor2::Zero(t0, E2);
  Tensor1 dg;
  if (cfg.use_embedding) dg = Tensor1::Zero(cfg.embed_dim);
  Tensor1 ds = Tensor1::Zero(cfg.dec_hidden);  // grad w.r.t. s_i entering step i's outputs

  Tensor1 dx_head, dx_dec;
  for (int i = tau - 1; i >= 0; --i) {
    const DecoderStepCache& sc = cache.steps[i];

    mlp_backward(m.head, sc.head, dpred[i], g_out.head, dx_head);

    int c = 0;
    Tensor1 da;
    if (cfg.use_attention) {
      da = dx_head.segment(c, E2);
      c += E2;
    }
    Tensor1 ds_total = ds + dx_head.segment(c, cfg.dec_hidden);
    c += cfg.dec_hidden;
    if (cfg.use_embedding) {
      dg += dx_head.segment(c, cfg.embed_dim);
      c += cfg.embed_dim;
    }
    double d_xprev = dx_head[c];

    Tensor1 ds_prev;
    gru_cell_backward(m.dec, sc.gru, ds_total, g_out.dec, dx_dec, ds_prev);

    c = 0;
    if (cfg.use_attention) {
      da += dx_dec.segment(c, E2);
      c += E2;
    }
    if (cfg.use_embedding) {
      dg += dx_dec.segment(c, cfg.embed_dim);
      c += cfg.embed_dim;
    }
    d_xprev += dx_dec[c];

    if (cfg.use_attention) {
      attention_backward(m.attn, cache.H, sc.attn, da, g_out.attn, dH, ds_prev);
    }

    if (i > 0 && !sc.used_teacher) dpred[i - 1] += d_xprev;
    ds = ds_prev;
  }

  // ds now holds the gradient w.r.t. s_0 = z.
  Tensor1 dh_last;
  summary_backward(m.summary, cache.summary, ds, g_out.summary, dh_last);
  dH.row(t0 - 1).head(cfg.enc_hidden) += dh_last.head(cfg.enc_hidden).transpose();
  dH.row(0).tail(cfg.enc_hidden) += dh_last.tail(cfg.enc_hidden).transpose();

  const Tensor2 dX = bigru_backward(m.enc_fwd, m.enc_bwd, cache.enc, dH, g_out.enc_fwd,
                                    g_out.enc_bwd);

  if (cfg.use_embedding) {
    dg += dX.middleCols(1, cfg.embed_dim).colwise().sum().transpose();
    g_out.embed.E.row(cache.patient_index) += dg.transpose();
  }
}

Forecast forecast(const ModelParams& m, const WindowSample& w) {
  ForwardCache cache;
  const Tensor1 pred = model_forward(m, w, &cache);

  Forecast out;
  out.patient_id = w.patient_id();
  out.anchor_ts = w.anchor_ts();
  out.values_mgdl.resize(pred.size());
  for (Eigen::Index i = 0; i < pred.size(); ++i) {
    out.values_mgdl[i] = m.cfg.norm.invert(pred[i]);
    if (!std::isfinite(out.values_mgdl[i])) {
      throw std::runtime_error("forecast produced a non-finite value");
    }
  }
  if (m.cfg.use_attention) {
    out.attention.reserve(cache.steps.size());
    for (const auto& sc : cache.steps) {
      Tensor2 A(m.cfg.attn_heads, m.cfg.t0);
      for (int k = 0; k < m.cfg.attn_heads; ++k) A.row(k) = sc.attn.alpha[k].transpose();
      out.attention.push_back(std::move(A));
    }
  }
  return out;
}

// ---------------------------------------------------------------------------
// Serialization: versioned text, one key per line, tensors as row-major rows
// of hexfloats. Hexfloats round-trip bit-exactly and resave byte-identically.

namespace {

constexpr const char* kMagic = "glucast-model v1";

std::string hexd(double v) {
  char buf[40];
  std::snprintf(buf, sizeof(buf), "%a", v);
  return buf;
}

[[noreturn]] void load_fail(const std::string& path, const std::string& why) {
  throw std::runtime_error("load_model: " + path + ": " + why);
}

}  // namespace

void save_model(ModelParams& m, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("save_model: cannot write '" + path + "'");
  const ModelConfig& c = m.cfg;
  out << kMagic << "\n";
  out << "t0 " << c.t0 << "\n";
  out << "tau " << c.tau << "\n";
  out << "enc_hidden " << c.enc_hidden << "\n";
  out << "dec_hidden " << c.dec_hidden << "\n";
  out << "embed_dim " << c.embed_dim << "\n";
  out << "attn_heads " << c.attn_heads << "\n";
  out << "attn_hidden " << c.attn_hidden << "\n";
  out << "head_hidden " << c.head_hidden << "\n";
  out << "use_attention " << (c.use_attention ? 1 : 0) << "\n";
  out << "use_embedding " << (c.use_embedding ? 1 : 0) << "\n";
  out << "use_time_features " << (c.use_time_features ? 1 : 0) << "\n";
  out << "cold_start_mean " << (c.cold_start_mean ? 1 : 0) << "\n";
  out << "norm_mean " << hexd(c.norm.mean) << "\n";
  out << "norm_std " << hexd(c.norm.std) << "\n";
  out << "patients " << m.embed.ids.size() << "\n";
  for (const auto& id : m.embed.ids) out << id << "\n";

  const auto slots = m.slots();
  out << "tensors " << slots.size() << "\n";
  for (const auto& s : slots) {
    out << "tensor " << s.name << " " << s.rows << " " << s.cols << "\n";
    for (Eigen::Index r = 0; r < s.rows; ++r) {
      for (Eigen::Index cc = 0; cc < s.cols; ++cc) {
        if (cc) out << ' ';
        // slots alias Eigen storage, which is column-major
        out << hexd(s.data[cc * s.rows + r]);
      }
      out << "\n";
    }
  }
  out << "end\n";
  if (!out.good()) throw std::runtime_error("save_model: write failed for '" + path + "'");
}

ModelParams load_model(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("load_model: cannot open '" + path + "'");

  std::string line;
  if (!std::getline(in, line) || line != kMagic) {
    load_fail(path, "bad or missing version line (expected '" + std::string(kMagic) + "')");
  }

  ModelConfig cfg;
  std::vector<std::string> ids;
  long n_tensors = -1;

  const auto next_line = [&](const std::string& what) {
    if (!std::getline(in, line)) load_fail(path, "unexpected end of file in " + what);
    return line;
  };

  // Header keys, in any order, until the tensor count.
  while (true) {
    next_line("header");
    std::istringstream ls(line);
    std::string key;
    ls >> key;
    if (key == "tensors") {
      if (!(ls >> n_tensors) || n_tensors < 0) load_fail(path, "bad tensor count");
      break;
    } else if (key == "t0") {
      ls >> cfg.t0;
    } else if (key == "tau") {
      ls >> cfg.tau;
    } else if (key == "enc_hidden") {
      ls >> cfg.enc_hidden;
    } else if (key == "dec_hidden") {
      ls >> cfg.dec_hidden;
    } else if (key == "embed_dim") {
      ls >> cfg.embed_dim;
    } else if (key == "attn_heads") {
      ls >> cfg.attn_heads;
    } else if (key == "attn_hidden") {
      ls >> cfg.attn_hidden;
    } else if (key == "head_hidden") {
      ls >> cfg.head_hidden;
    } else if (key == "use_attention" || key == "use_embedding" || key == "use_time_features" ||
               key == "cold_start_mean") {
      int v = 0;
      ls >> v;
      if (key == "use_attention") cfg.use_attention = v != 0;
      if (key == "use_embedding") cfg.use_embedding = v != 0;
      if (key == "use_time_features") cfg.use_time_features = v != 0;
      if (key == "cold_start_mean") cfg.cold_start_mean = v != 0;
    } else if (key == "norm_mean" || key == "norm_std") {
      // hexfloat values; istream double extraction stops at the 'x'
      std::string tok;
      ls >> tok;
      char* end = nullptr;
      const double v = std::strtod(tok.c_str(), &end);
      if (tok.empty() || end == tok.c_str() || *end != '\0') {
        load_fail(path, "bad value for header key '" + key + "'");
      }
      (key == "norm_mean" ? cfg.norm.mean : cfg.norm.std) = v;
    } else if (key == "patients") {
      long n = 0;
      if (!(ls >> n) || n < 0) load_fail(path, "bad patient count");
      ids.clear();
      for (long i = 0; i < n; ++i) ids.push_back(next_line("patient-id list"));
    } else {
      load_fail(path, "unknown header key '" + key + "'");
    }
    if (ls.fail()) load_fail(path, "bad value for header key '" + key + "'");
  }

  ModelParams m;
  RngState scratch_rng(0);
  m.init(cfg, ids, scratch_rng);
  if (cfg.use_embedding && m.embed.ids != ids) {
    load_fail(path, "patient-id list is not sorted and unique");
  }

  auto slots = m.slots();
  if (static_cast<long>(slots.size()) != n_tensors) {
    load_fail(path, "tensor count " + std::to_string(n_tensors) + " does not match config (" +
                        std::to_string(slots.size()) + " expected)");
  }
  std::map<std::string, const TensorSlot*> by_name;
  for (const auto& s : slots) by_name[s.name] = &s;

  std::vector<std::string> seen;
  for (long t = 0; t < n_tensors; ++t) {
    std::istringstream ls(next_line("tensor list"));
    std::string word, name;
    Eigen::Index rows = 0, cols = 0;
    ls >> word >> name >> rows >> cols;
    if (word != "tensor" || ls.fail()) load_fail(path, "bad tensor header '" + line + "'");
    const auto it = by_name.find(name);
    if (it == by_name.end()) load_fail(path, "unknown tensor '" + name + "'");
    const TensorSlot& s = *it->second;
    if (rows != s.rows || cols != s.cols) {
      load_fail(path, "tensor '" + name + "' has shape " + std::to_string(rows) + "x" +
                          std::to_string(cols) + ", expected " + std::to_string(s.rows) + "x" +
                          std::to_string(s.cols));
    }
    for (Eigen::Index r = 0; r < rows; ++r) {
      std::istringstream rs(next_line("tensor '" + name + "'"));
      for (Eigen::Index cc = 0; cc < cols; ++cc) {
        std::string tok;
        if (!(rs >> tok)) load_fail(path, "short row in tensor '" + name + "'");
        char* end = nullptr;
        const double v = std::strtod(tok.c_str(), &end);
        if (end == tok.c_str() || *end != '\0') {
          load_fail(path, "bad value '" + tok + "' in tensor '" + name + "'");
        }
        s.data[cc * rows + r] = v;
      }
      std::string extra;
      if (rs >> extra) load_fail(path, "long row in tensor '" + name + "'");
    }
    seen.push_back(name);
  }
  if (next_line("trailer") != "end") load_fail(path, "missing 'end' trailer");

  std::sort(seen.begin(), seen.end());
  if (std::unique(seen.begin(), seen.end()) != seen.end()) {
    load_fail(path, "duplicate tensor block");
  }
  return m;
}

}  // namespace glucast
