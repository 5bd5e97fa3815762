// Acceptance gate: one check per release criterion, printed as a single
// PASS/FAIL line each. Exit status is 0 only when every line passes.
// Tolerances are pinned here on purpose; loosening them is a release decision,
// not a test fix.

#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iostream>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include "glucast/baselines.hpp"
#include "glucast/cli.hpp"
#include "glucast/data.hpp"
#include "glucast/layers.hpp"
#include "glucast/metrics.hpp"
#include "glucast/model.hpp"
#include "glucast/numerics.hpp"
#include "glucast/training.hpp"

using namespace glucast;

namespace {

struct Outcome {
  bool pass = false;
  std::string detail;
};

std::string fmt(const char* format, double v) {
  char buf[64];
  std::snprintf(buf, sizeof(buf), format, v);
  return buf;
}

// ---------------------------------------------------------------------------
// shared fixtures

WindowSample sample_window(const std::string& patient_id, const std::vector<double>& values,
                           int t0, int tau, int patient_index) {
  PatientSeries s;
  s.patient_id = patient_id;
  std::int64_t ts = synthetic_start_ts();
  for (double v : values) {
    s.records.push_back({ts, v});
    ts += kCadenceSeconds;
  }
  auto ws = windowize(s, t0, tau);
  WindowSample w = ws.at(0);
  w.patient_index = patient_index;
  return w;
}

std::vector<WindowSample> stride_windows(const std::vector<WindowSample>& w, size_t k) {
  std::vector<WindowSample> out;
  for (size_t i = 0; i < w.size(); i += k) out.push_back(w[i]);
  return out;
}

std::string read_all(const std::string& path) {
  std::ifstream f(path, std::ios::binary);
  std::ostringstream ss;
  ss << f.rdbuf();
  return ss.str();
}

struct TempDir {
  std::filesystem::path dir;
  TempDir() {
    dir = std::filesystem::temp_directory_path() /
          ("glucast-accept-" + std::to_string(reinterpret_cast<std::uintptr_t>(this)));
    std::filesystem::create_directories(dir);
  }
  ~TempDir() {
    std::error_code ec;
    std::filesystem::remove_all(dir, ec);
  }
  std::string path(const std::string& name) const { return (dir / name).string(); }
};

// ---------------------------------------------------------------------------
// 1. gradients

// Runs grad_check on `project(forward())` against the analytic gradient
// assembled in the same slot order; both closures see the live objects.
double check_slots(const std::vector<TensorSlot>& slots,
                   const std::function<double()>& loss,
                   const std::function<Tensor1()>& analytic) {
  const Tensor1 p0 = flatten(slots);
  const Tensor1 g = analytic();
  unflatten(p0, slots);
  const auto f = [&](const Tensor1& flat) {
    unflatten(flat, slots);
    return loss();
  };
  const double err = grad_check(f, p0, g);
  unflatten(p0, slots);
  return err;
}

double gru_grad_err(std::uint64_t seed) {
  RngState rng(seed);
  GruParams p;
  p.init(3, 2, rng);
  Tensor1 x = init_normal_vec(3, rng, 1.0);
  Tensor1 h = init_normal_vec(2, rng, 1.0);
  const Tensor1 w = init_normal_vec(2, rng, 1.0);

  std::vector<TensorSlot> slots;
  p.collect("p", slots);
  add_slot(slots, "x", x);
  add_slot(slots, "h", h);

  GruCache cache;
  return check_slots(
      slots, [&] { return w.dot(gru_cell_forward(p, x, h, nullptr)); },
      [&] {
        gru_cell_forward(p, x, h, &cache);
        GruParams gp;
        gp.init(3, 2, rng);
        std::vector<TensorSlot> gs;
        gp.collect("g", gs);
        zero_slots(gs);
        Tensor1 dx(3), dh(2);
        gru_cell_backward(p, cache, w, gp, dx, dh);
        std::vector<TensorSlot> all;
        gp.collect("g", all);
        add_slot(all, "dx", dx);
        add_slot(all, "dh", dh);
        return flatten(all);
      });
}

double bigru_grad_err(std::uint64_t seed) {
  RngState rng(seed);
  const int T = 5, in = 2, hid = 2;
  GruParams fwd, bwd;
  fwd.init(in, hid, rng);
  bwd.init(in, hid, rng);
  Tensor2 X = init_normal(T, in, rng, 1.0);
  const Tensor2 W = init_normal(T, 2 * hid, rng, 1.0);

  std::vector<TensorSlot> slots;
  fwd.collect("f", slots);
  bwd.collect("b", slots);
  add_slot(slots, "X", X);

  return check_slots(
      slots, [&] { return (bigru_encode(fwd, bwd, X).array() * W.array()).sum(); },
      [&] {
        BiGruCache cache;
        bigru_encode(fwd, bwd, X, &cache);
        GruParams gf, gb;
        gf.init(in, hid, rng);
        gb.init(in, hid, rng);
        std::vector<TensorSlot> gs;
        gf.collect("f", gs);
        gb.collect("b", gs);
        zero_slots(gs);
        Tensor2 dX = bigru_backward(fwd, bwd, cache, W, gf, gb);
        std::vector<TensorSlot> all;
        gf.collect("f", all);
        gb.collect("b", all);
        add_slot(all, "dX", dX);
        return flatten(all);
      });
}

double summary_grad_err(std::uint64_t seed) {
  RngState rng(seed);
  SummaryParams p;
  p.init(2, 4, rng);
  Tensor1 h = init_normal_vec(4, rng, 1.0);
  const Tensor1 w = init_normal_vec(2, rng, 1.0);

  std::vector<TensorSlot> slots;
  p.collect("p", slots);
  add_slot(slots, "h", h);

  return check_slots(
      slots, [&] { return w.dot(summary_forward(p, h, nullptr)); },
      [&] {
        SummaryCache cache;
        summary_forward(p, h, &cache);
        SummaryParams gp;
        gp.init(2, 4, rng);
        std::vector<TensorSlot> gs;
        gp.collect("g", gs);
        zero_slots(gs);
        Tensor1 dh(4);
        summary_backward(p, cache, w, gp, dh);
        std::vector<TensorSlot> all;
        gp.collect("g", all);
        add_slot(all, "dh", dh);
        return flatten(all);
      });
}

double attention_grad_err(std::uint64_t seed) {
  RngState rng(seed);
  const int t0 = 5, enc = 4, dec = 2, heads = 2, hid = 3;
  AttentionParams p;
  p.init(heads, hid, enc, dec, rng);
  Tensor2 H = init_normal(t0, enc, rng, 1.0);
  Tensor1 s = init_normal_vec(dec, rng, 1.0);
  const Tensor1 w = init_normal_vec(enc, rng, 1.0);

  std::vector<TensorSlot> slots;
  p.collect("p", slots);
  add_slot(slots, "H", H);
  add_slot(slots, "s", s);

  return check_slots(
      slots, [&] { return w.dot(attention_forward(p, H, s, nullptr)); },
      [&] {
        AttentionCache cache;
        attention_forward(p, H, s, &cache);
        AttentionParams gp;
        gp.init(heads, hid, enc, dec, rng);
        std::vector<TensorSlot> gs;
        gp.collect("g", gs);
        zero_slots(gs);
        Tensor2 dH = Tensor2::Zero(t0, enc);
        Tensor1 ds = Tensor1::Zero(dec);
        attention_backward(p, H, cache, w, gp, dH, ds);
        std::vector<TensorSlot> all;
        gp.collect("g", all);
        add_slot(all, "dH", dH);
        add_slot(all, "ds", ds);
        return flatten(all);
      });
}

double mlp_grad_err(std::uint64_t seed) {
  RngState rng(seed);
  MlpParams p;
  p.init(4, 3, rng);
  Tensor1 x = init_normal_vec(4, rng, 1.0);

  std::vector<TensorSlot> slots;
  p.collect("p", slots);
  add_slot(slots, "x", x);

  return check_slots(
      slots, [&] { return mlp_forward(p, x, nullptr); },
      [&] {
        MlpCache cache;
        mlp_forward(p, x, &cache);
        MlpParams gp;
        gp.init(4, 3, rng);
        std::vector<TensorSlot> gs;
        gp.collect("g", gs);
        zero_slots(gs);
        Tensor1 dx(4);
        mlp_backward(p, cache, 1.0, gp, dx);
        std::vector<TensorSlot> all;
        gp.collect("g", all);
        add_slot(all, "dx", dx);
        return flatten(all);
      });
}

double linear_grad_err(std::uint64_t seed) {
  RngState rng(seed);
  LinearParams p;
  p.init(3, 2, rng);
  Tensor1 x = init_normal_vec(2, rng, 1.0);
  const Tensor1 w = init_normal_vec(3, rng, 1.0);

  std::vector<TensorSlot> slots;
  p.collect("p", slots);
  add_slot(slots, "x", x);

  return check_slots(
      slots, [&] { return w.dot(linear_forward(p, x)); },
      [&] {
        LinearParams gp;
        gp.init(3, 2, rng);
        std::vector<TensorSlot> gs;
        gp.collect("g", gs);
        zero_slots(gs);
        Tensor1 dx(2);
        linear_backward(p, x, w, gp, dx);
        std::vector<TensorSlot> all;
        gp.collect("g", all);
        add_slot(all, "dx", dx);
        return flatten(all);
      });
}

double model_grad_err(std::uint64_t seed, int variant) {
  ModelConfig cfg;
  cfg.t0 = 8;
  cfg.tau = 3;
  cfg.enc_hidden = 3;
  cfg.dec_hidden = 2;
  cfg.embed_dim = 2;
  cfg.attn_heads = 2;
  cfg.attn_hidden = 2;
  cfg.head_hidden = 3;
  cfg.norm = {100.0, 20.0};
  if (variant == 1) cfg.use_attention = false;
  if (variant == 2) cfg.use_embedding = false;
  if (variant == 3) cfg.use_time_features = false;

  RngState rng(seed);
  std::vector<double> values;
  for (int i = 0; i < cfg.t0 + cfg.tau; ++i) values.push_back(100.0 + rng.normal(0.0, 15.0));
  const WindowSample w =
      sample_window("pa", values, cfg.t0, cfg.tau, cfg.use_embedding ? 0 : -1);

  ModelParams m;
  m.init(cfg, {"pa", "pb"}, rng);
  const Tensor1 proj = init_normal_vec(cfg.tau, rng, 1.0);

  const auto slots = m.slots();
  return check_slots(
      slots, [&] { return proj.dot(model_forward(m, w)); },
      [&] {
        ForwardCache cache;
        model_forward(m, w, &cache);
        ModelParams g = zeros_like(m);
        model_backward(m, w, cache, proj, g);
        return flatten(g.slots());
      });
}

Outcome criterion_gradients() {
  const auto t_start = std::chrono::steady_clock::now();
  double worst = 0.0;
  int checks = 0;
  const auto track = [&](double err) {
    worst = std::max(worst, err);
    ++checks;
  };
  for (std::uint64_t s = 1; s <= 20; ++s) {
    track(gru_grad_err(s));
    track(bigru_grad_err(100 + s));
    track(summary_grad_err(200 + s));
    track(attention_grad_err(300 + s));
    track(mlp_grad_err(400 + s));
    track(linear_grad_err(500 + s));
  }
  for (int variant = 0; variant < 4; ++variant) {
    for (std::uint64_t s = 1; s <= 5; ++s) track(model_grad_err(600 + 10 * s + variant, variant));
  }
  const double elapsed =
      std::chrono::duration<double>(std::chrono::steady_clock::now() - t_start).count();
  const bool pass = worst < 1e-4 && elapsed < 60.0;
  return {pass, "max rel err " + fmt("%.2e", worst) + " over " + std::to_string(checks) +
                    " checks, " + fmt("%.1f", elapsed) + "s (limit 60s)"};
}

// ---------------------------------------------------------------------------
// 2. attention invariants

Outcome criterion_attention() {
  int failures = 0;
  double worst_sum = 0.0, worst_uniform = 0.0, worst_shift = 0.0;

  for (std::uint64_t trial = 1; trial <= 100; ++trial) {
    RngState rng(trial);
    const int t0 = 3 + static_cast<int>(rng.next_u64() % 8);
    const int enc = 2 + 2 * static_cast<int>(rng.next_u64() % 2);
    const int dec = 2 + static_cast<int>(rng.next_u64() % 2);
    const int heads = 1 + static_cast<int>(rng.next_u64() % 4);
    AttentionParams p;
    p.init(heads, 3, enc, dec, rng);
    const Tensor2 H = init_normal(t0, enc, rng, 2.0);
    const Tensor1 s = init_normal_vec(dec, rng, 2.0);

    AttentionCache cache;
    attention_forward(p, H, s, &cache);
    for (const auto& alpha : cache.alpha) {
      worst_sum = std::max(worst_sum, std::abs(alpha.sum() - 1.0));
      if (std::abs(alpha.sum() - 1.0) > 1e-10) ++failures;
      if (alpha.minCoeff() < 0.0) ++failures;
    }

    // identical encoder rows force uniform weights
    Tensor2 Hc = H;
    for (int j = 0; j < t0; ++j) Hc.row(j) = H.row(0);
    AttentionCache cache_c;
    attention_forward(p, Hc, s, &cache_c);
    for (const auto& alpha : cache_c.alpha) {
      const double dev = (alpha.array() - 1.0 / t0).abs().maxCoeff();
      worst_uniform = std::max(worst_uniform, dev);
      if (dev > 1e-12) ++failures;
    }

    // softmax ignores a constant shift of the scores
    const int n = 2 + static_cast<int>(rng.next_u64() % 49);
    Tensor1 scores = init_normal_vec(n, rng, 5.0);
    const double c = rng.normal(0.0, 400.0);
    const Tensor1 a = stable_softmax(scores);
    const Tensor1 b = stable_softmax(scores.array() + c);
    const double dev = (a - b).cwiseAbs().maxCoeff();
    worst_shift = std::max(worst_shift, dev);
    if (dev > 1e-12) ++failures;
  }

  const bool pass = failures == 0;
  return {pass, "trials 100, violations " + std::to_string(failures) + "; worst sum dev " +
                    fmt("%.1e", worst_sum) + ", uniform dev " + fmt("%.1e", worst_uniform) +
                    ", shift dev " + fmt("%.1e", worst_shift)};
}

// ---------------------------------------------------------------------------
// 3. trimmed loss semantics

Outcome criterion_trimmed_loss() {
  const TrimResult fixed = trimmed_batch_loss({1.0, 2.0, 3.0, 100.0}, 0.75);
  if (fixed.loss != 2.0 || fixed.kept != std::vector<int>{0, 1, 2}) {
    return {false, "fixture loss " + fmt("%.17g", fixed.loss) + " (want exactly 2)"};
  }

  for (std::uint64_t trial = 1; trial <= 50; ++trial) {
    RngState rng(trial);
    const int n = 1 + static_cast<int>(rng.next_u64() % 40);
    std::vector<double> losses(n);
    for (auto& v : losses) v = std::exp(rng.normal(0.0, 2.0));
    double sum = 0.0;
    for (double v : losses) sum += v;
    const double plain = sum / n;
    if (trimmed_batch_loss(losses, 1.0).loss != plain) {
      return {false, "beta=1 differs from the plain mean on trial " + std::to_string(trial)};
    }
  }

  // Dropped samples leave no trace: updating on the full batch with trimming
  // must match updating on the kept subset alone, bit for bit, step by step.
  ModelConfig cfg;
  cfg.t0 = 6;
  cfg.tau = 3;
  cfg.enc_hidden = 3;
  cfg.dec_hidden = 2;
  cfg.embed_dim = 2;
  cfg.attn_heads = 2;
  cfg.attn_hidden = 2;
  cfg.head_hidden = 3;
  cfg.norm = {100.0, 20.0};

  RngState rng(9);
  std::vector<WindowSample> batch;
  for (int i = 0; i < 6; ++i) {
    std::vector<double> values;
    for (int k = 0; k < cfg.t0 + cfg.tau; ++k) {
      double v = 100.0 + 2.0 * std::sin(0.3 * k + i);
      if (i >= 4 && k >= cfg.t0) v += 250.0;  // absurd target: always trimmed
      values.push_back(v);
    }
    batch.push_back(sample_window("pa", values, cfg.t0, cfg.tau, 0));
  }

  ModelParams full;
  full.init(cfg, {"pa"}, rng);
  ModelParams deleted = full;
  ModelParams gf = zeros_like(full), gd = zeros_like(full);
  OptimizerState of, od;
  of.init(total_size(full.slots()));
  od.init(total_size(deleted.slots()));
  TrainConfig tc_trim;
  tc_trim.beta = 0.6;  // ceil(0.6 * 6) = 4 kept
  TrainConfig tc_all = tc_trim;
  tc_all.beta = 1.0;

  for (int step = 0; step < 5; ++step) {
    std::vector<double> losses;
    for (const auto& w : batch) {
      Tensor1 target(cfg.tau);
      for (int i = 0; i < cfg.tau; ++i) target[i] = cfg.norm.apply(w.target_raw(i));
      losses.push_back(per_sample_loss(model_forward(full, w), target));
    }
    const TrimResult trim = trimmed_batch_loss(losses, tc_trim.beta);
    std::vector<WindowSample> kept;
    for (int b : trim.kept) kept.push_back(batch[b]);
    if (kept.size() != 4) return {false, "poisoned fixture kept wrong subset"};

    batch_update<FullModelDriver>(full, gf, batch, tc_trim, step, of);
    batch_update<FullModelDriver>(deleted, gd, kept, tc_all, step, od);
    if (flatten(full.slots()) != flatten(deleted.slots())) {
      return {false, "trajectories diverged at step " + std::to_string(step)};
    }
  }

  return {true, "fixture exact, beta=1 == mean on 50 trials, deleted-batch bit-exact for 5 steps"};
}

// ---------------------------------------------------------------------------
// 4. clip schedule

Outcome criterion_clip() {
  TrainConfig tc;
  double worst = 0.0;
  for (int e = 0; e <= 200; ++e) {
    worst = std::max(worst, std::abs(clip_threshold(tc, e) - 2.0 * std::pow(0.99, e)));
  }
  if (worst > 1e-12) return {false, "schedule drift " + fmt("%.2e", worst)};

  for (std::uint64_t trial = 1; trial <= 50; ++trial) {
    RngState rng(trial);
    Tensor2 a = init_normal(4, 3, rng, 8.0);
    Tensor1 b = init_normal_vec(5, rng, 8.0);
    std::vector<TensorSlot> slots;
    add_slot(slots, "a", a);
    add_slot(slots, "b", b);
    const double thr = clip_threshold(tc, static_cast<int>(rng.next_u64() % 100));

    clip_gradients(slots, thr);
    const Tensor1 once = flatten(slots);
    if (once.cwiseAbs().maxCoeff() > thr) {
      return {false, "element above threshold after clipping (trial " + std::to_string(trial) +
                         ")"};
    }
    clip_gradients(slots, thr);
    if (flatten(slots) != once) {
      return {false, "clipping not idempotent (trial " + std::to_string(trial) + ")"};
    }
  }
  return {true, "schedule drift " + fmt("%.2e", worst) +
                    " (limit 1e-12); bounded and idempotent on 50 trials"};
}

// ---------------------------------------------------------------------------
// 5. noiseless overfit

Outcome criterion_overfit() {
  const auto t_start = std::chrono::steady_clock::now();

  const int days = 2, per_day = 288;
  std::vector<PatientSeries> series(2);
  series[0].patient_id = "pa";
  series[1].patient_id = "pb";
  const std::int64_t start = synthetic_start_ts();
  for (int k = 0; k < days * per_day; ++k) {
    const std::int64_t ts = start + static_cast<std::int64_t>(k) * kCadenceSeconds;
    const double u = 2.0 * M_PI * k;
    series[0].records.push_back({ts, 130.0 + 25.0 * std::sin(u / 288.0) + 8.0 * std::sin(u / 48.0)});
    series[1].records.push_back(
        {ts, 150.0 + 20.0 * std::cos(u / 288.0) + 6.0 * std::sin(u / 36.0 + 0.7)});
  }

  ModelConfig cfg;
  cfg.t0 = 24;
  cfg.tau = 6;
  cfg.enc_hidden = 24;
  cfg.dec_hidden = 12;
  cfg.embed_dim = 2;
  cfg.attn_heads = 2;
  cfg.attn_hidden = 12;
  cfg.head_hidden = 24;

  std::vector<WindowSample> windows;
  for (const auto& s : series) {
    auto ws = windowize(s, cfg.t0, cfg.tau);
    windows.insert(windows.end(), ws.begin(), ws.end());
  }
  assign_patient_indices(windows, {"pa", "pb"});
  cfg.norm = fit_normalizer(windows);

  TrainConfig tc;
  tc.beta = 1.0;
  tc.learning_rate = 3e-3;
  tc.max_epochs = 200;
  tc.patience = 200;  // run the full budget; the data is noiseless
  tc.teacher_forcing = [](int epoch) { return epoch < 40 ? 0.5 : 0.0; };

  RngState rng(17);
  ModelParams m;
  m.init(cfg, {"pa", "pb"}, rng);
  auto [best, report] = fit<FullModelDriver>(std::move(m), windows, windows, tc, rng);

  const double first = report.train_loss.front();
  double lowest = first;
  for (double v : report.train_loss) lowest = std::min(lowest, v);
  const double drop = 1.0 - lowest / first;

  double worst_abs = 0.0;
  for (const auto& w : windows) {
    const Tensor1 pred = model_forward(best, w);
    for (int i = 0; i < cfg.tau; ++i) {
      worst_abs = std::max(worst_abs,
                           std::abs(best.cfg.norm.invert(pred[i]) - w.target_raw(i)));
    }
  }

  const double elapsed =
      std::chrono::duration<double>(std::chrono::steady_clock::now() - t_start).count();
  const bool pass = drop > 0.90 && worst_abs <= 2.0 && elapsed < 300.0;
  return {pass, "loss drop " + fmt("%.1f", 100.0 * drop) + "% (need >90%), worst |err| " +
                    fmt("%.2f", worst_abs) + " mg/dl (limit 2), " + std::to_string(report.epochs_run) +
                    " epochs, " + fmt("%.0f", elapsed) + "s (limit 300s)"};
}

// ---------------------------------------------------------------------------
// 6. robust vs mse under outliers / 7. ablations

MetricsReport train_and_score(const ModelConfig& cfg, const TrainConfig& tc, const Dataset& ds,
                              const std::vector<WindowSample>& train,
                              const std::vector<WindowSample>& val,
                              const std::vector<int>& horizons, std::uint64_t seed) {
  RngState rng(seed);
  ModelParams m;
  m.init(cfg, ds.patient_ids, rng);
  auto [best, rep] = fit<FullModelDriver>(std::move(m), train, val, tc, rng);
  return build_report(eval_model(best, ds.test), horizons);
}

Outcome criterion_robust_vs_mse() {
  const auto t_start = std::chrono::steady_clock::now();

  RngState data_rng(11);
  const auto series = generate_synthetic(8, 30, data_rng, 0.05);

  ModelConfig cfg;
  cfg.t0 = 36;
  cfg.tau = 6;
  cfg.enc_hidden = 24;
  cfg.dec_hidden = 12;
  cfg.embed_dim = 3;
  cfg.attn_heads = 2;
  cfg.attn_hidden = 16;
  cfg.head_hidden = 20;

  Dataset ds = build_dataset(series, cfg.t0, cfg.tau);
  auto train = stride_windows(ds.train, 8);
  auto val = stride_windows(ds.val, 8);
  assign_patient_indices(train, ds.patient_ids);
  assign_patient_indices(val, ds.patient_ids);
  assign_patient_indices(ds.test, ds.patient_ids);
  cfg.norm = fit_normalizer(train);

  TrainConfig tc;
  tc.learning_rate = 1e-3;
  tc.max_epochs = 12;
  tc.patience = 12;

  TrainConfig robust = tc;
  robust.beta = 0.9;
  TrainConfig mse = tc;
  mse.beta = 1.0;

  const MetricsReport rep_robust = train_and_score(cfg, robust, ds, train, val, {6}, 101);
  const MetricsReport rep_mse = train_and_score(cfg, mse, ds, train, val, {6}, 101);

  const double ape_robust = rep_robust.cell(0, Stratum::Full).median_ape;
  const double ape_mse = rep_mse.cell(0, Stratum::Full).median_ape;

  const double elapsed =
      std::chrono::duration<double>(std::chrono::steady_clock::now() - t_start).count();
  const bool pass = ape_robust <= ape_mse && elapsed < 1800.0;
  return {pass, "30-min median APE: trimmed " + fmt("%.4f", ape_robust) + " vs mean " +
                    fmt("%.4f", ape_mse) + ", " + fmt("%.0f", elapsed) + "s (limit 1800s)"};
}

Outcome criterion_ablations() {
  const auto t_start = std::chrono::steady_clock::now();

  RngState data_rng(31);
  const auto series = generate_synthetic(6, 12, data_rng, 0.0);

  ModelConfig cfg;
  cfg.t0 = 36;
  cfg.tau = 12;
  cfg.enc_hidden = 24;
  cfg.dec_hidden = 12;
  cfg.embed_dim = 3;
  cfg.attn_heads = 2;
  cfg.attn_hidden = 16;
  cfg.head_hidden = 20;

  Dataset ds = build_dataset(series, cfg.t0, cfg.tau);
  auto train = stride_windows(ds.train, 8);
  auto val = stride_windows(ds.val, 8);
  assign_patient_indices(train, ds.patient_ids);
  assign_patient_indices(val, ds.patient_ids);
  assign_patient_indices(ds.test, ds.patient_ids);
  cfg.norm = fit_normalizer(train);

  TrainConfig tc;
  tc.beta = 0.9;
  tc.learning_rate = 1e-3;
  tc.max_epochs = 8;
  tc.patience = 8;

  ModelConfig no_attn = cfg;
  no_attn.use_attention = false;
  ModelConfig no_embed = cfg;
  no_embed.use_embedding = false;

  const std::vector<int> horizons = {6, 12};
  const MetricsReport full = train_and_score(cfg, tc, ds, train, val, horizons, 51);
  const MetricsReport wo_attn = train_and_score(no_attn, tc, ds, train, val, horizons, 51);
  const MetricsReport wo_embed = train_and_score(no_embed, tc, ds, train, val, horizons, 51);

  std::string detail;
  bool ordered = true;
  for (int h = 0; h < 2; ++h) {
    const double f = full.cell(h, Stratum::Full).median_ape;
    const double a = wo_attn.cell(h, Stratum::Full).median_ape;
    const double e = wo_embed.cell(h, Stratum::Full).median_ape;
    ordered = ordered && f <= a && f <= e;
    detail += std::string(h == 0 ? "30min" : " 60min") + " APE full " + fmt("%.4f", f) +
              " / no-attn " + fmt("%.4f", a) + " / no-embed " + fmt("%.4f", e) + ";";
  }

  const double elapsed =
      std::chrono::duration<double>(std::chrono::steady_clock::now() - t_start).count();
  const bool pass = ordered && elapsed < 2700.0;
  return {pass, detail + " " + fmt("%.0f", elapsed) + "s (limit 2700s)"};
}

// ---------------------------------------------------------------------------
// 8. metric protocol

Outcome criterion_metrics() {
  if (ape_sample({100.0, 200.0}, {110.0, 180.0}) != 0.10) {
    return {false, "ape fixture is not exactly 0.10"};
  }

  const auto as_set = [](const std::vector<Stratum>& v) {
    return std::set<Stratum>(v.begin(), v.end());
  };
  if (as_set(stratify(65.0)) != std::set<Stratum>{Stratum::Full, Stratum::Event, Stratum::Hypo}) {
    return {false, "65 mg/dl stratifies wrong"};
  }
  if (as_set(stratify(120.0)) != std::set<Stratum>{Stratum::Full}) {
    return {false, "120 mg/dl stratifies wrong"};
  }
  if (as_set(stratify(200.0)) != std::set<Stratum>{Stratum::Full, Stratum::Event, Stratum::Hyper}) {
    return {false, "200 mg/dl stratifies wrong"};
  }

  // horizon h reads exactly the first h points: corrupting point 2 must not
  // move any horizon-1 number
  std::vector<EvalSample> a = {{100.0, {100.0, 50.0}, {110.0, 49.0}},
                               {150.0, {120.0, 130.0}, {114.0, 128.0}}};
  std::vector<EvalSample> b = a;
  b[0].truth[1] = 9999.0;
  b[0].pred[1] = -777.0;
  b[1].pred[1] = 1e6;
  const MetricsReport ra = build_report(a, {1, 2});
  const MetricsReport rb = build_report(b, {1, 2});
  const CellStats& ca = ra.cell(0, Stratum::Full);
  const CellStats& cb = rb.cell(0, Stratum::Full);
  if (ca.median_ape != cb.median_ape || ca.rmse != cb.rmse || ca.count != cb.count) {
    return {false, "horizon 1 numbers moved when point 2 changed"};
  }
  const double want_ape = 0.5 * (10.0 / 100.0 + 6.0 / 120.0);
  if (std::abs(ca.median_ape - want_ape) > 1e-15) {
    return {false, "horizon 1 median APE " + fmt("%.17g", ca.median_ape)};
  }
  if (ra.cell(1, Stratum::Full).median_ape == rb.cell(1, Stratum::Full).median_ape) {
    return {false, "horizon 2 ignored its second point"};
  }

  return {true, "ape fixture exact; strata exact; horizon h reads exactly h points"};
}

// ---------------------------------------------------------------------------
// 9. autocorrelation estimator and generator shape

Outcome criterion_autocorrelation() {
  for (std::uint64_t trial = 1; trial <= 20; ++trial) {
    RngState rng(trial);
    const int n = 400;
    std::vector<double> x(n);
    double prev = 0.0;
    for (int i = 0; i < n; ++i) {
      prev = 0.7 * prev + rng.normal(0.0, 1.0);
      x[i] = prev + 2.0 * std::sin(2.0 * M_PI * i / 40.0);
    }
    const int max_lag = 120;
    const AcfResult got = autocorrelation(x, max_lag);
    if (got.r[0] != 1.0) return {false, "r[0] not exactly 1"};

    // independent naive estimator
    double mean = 0.0;
    for (double v : x) mean += v;
    mean /= n;
    double var = 0.0;
    for (double v : x) var += (v - mean) * (v - mean);
    var /= n;
    for (int lag = 0; lag <= max_lag; ++lag) {
      double acc = 0.0;
      for (int i = 0; i + lag < n; ++i) acc += (x[i] - mean) * (x[i + lag] - mean);
      const double naive = acc / (n - lag) / var;
      if (std::abs(got.r[lag] - naive) > 1e-12) {
        return {false, "estimator deviates " + fmt("%.2e", std::abs(got.r[lag] - naive)) +
                           " at lag " + std::to_string(lag)};
      }
    }
  }

  RngState rng(7);
  const auto series = generate_synthetic(4, 30, rng, 0.0);
  std::string dips;
  for (const auto& s : series) {
    std::vector<double> values;
    for (const auto& r : s.records) values.push_back(r.glucose_mgdl);
    const AcfResult acf = autocorrelation(values, 250);
    for (int lag = 1; lag <= 3; ++lag) {
      if (acf.r[lag] <= acf.band95) {
        return {false, s.patient_id + ": small-lag correlation not significant"};
      }
    }
    double lowest = 0.0;
    int at = 0;
    for (int lag = 1; lag <= 250; ++lag) {
      if (acf.r[lag] < lowest) {
        lowest = acf.r[lag];
        at = lag;
      }
    }
    if (lowest >= -acf.band95) {
      return {false, s.patient_id + ": no significant negative dip within 250 lags (min r " +
                         fmt("%.3f", lowest) + ")"};
    }
    dips += " " + std::to_string(at);
  }

  return {true, "estimator matches the naive oracle to 1e-12 on 20 series; dips at lags" + dips};
}

// ---------------------------------------------------------------------------
// 10. pipeline determinism

Outcome criterion_determinism() {
  // window and split fixtures
  {
    PatientSeries s;
    s.patient_id = "pa";
    std::int64_t ts = synthetic_start_ts();
    for (int i = 0; i < 203; ++i) {
      s.records.push_back({ts, 100.0 + std::sin(0.05 * i)});
      ts += kCadenceSeconds;
    }
    if (windowize(s, 190, 12).size() != 2) return {false, "203-record series != 2 windows"};

    PatientSeries longer = s;
    for (int i = 203; i < 220; ++i) {
      longer.records.push_back({ts, 100.0});
      ts += kCadenceSeconds;
    }
    const auto split = split_temporal(longer);
    if (!split || split->train.records.size() != 200 || split->val.records.size() != 10 ||
        split->test.records.size() != 10) {
      return {false, "220-record split is not 200/10/10"};
    }
    if (split->train.records.back().timestamp >= split->val.records.front().timestamp ||
        split->val.records.back().timestamp >= split->test.records.front().timestamp) {
      return {false, "split pieces out of order"};
    }
  }

  TempDir tmp;

  // save/load round trip
  {
    ModelConfig cfg;
    cfg.t0 = 8;
    cfg.tau = 3;
    cfg.enc_hidden = 3;
    cfg.dec_hidden = 2;
    cfg.embed_dim = 2;
    cfg.attn_heads = 2;
    cfg.attn_hidden = 2;
    cfg.head_hidden = 3;
    cfg.norm = {113.7, 21.3};
    RngState rng(23);
    ModelParams m;
    m.init(cfg, {"pa", "pb"}, rng);

    const std::string path = tmp.path("round.model");
    save_model(m, path);
    ModelParams loaded = load_model(path);
    if (flatten(m.slots()) != flatten(loaded.slots())) {
      return {false, "save/load changed parameter bits"};
    }
    const std::string path2 = tmp.path("round2.model");
    save_model(loaded, path2);
    if (read_all(path) != read_all(path2)) return {false, "resave not byte-identical"};

    std::vector<double> values;
    for (int i = 0; i < cfg.t0 + cfg.tau; ++i) values.push_back(100.0 + 3.0 * std::sin(0.4 * i));
    const WindowSample w = sample_window("pa", values, cfg.t0, cfg.tau, 0);
    const Forecast fa = forecast(m, w);
    const Forecast fb = forecast(loaded, w);
    if (fa.values_mgdl != fb.values_mgdl) return {false, "loaded model forecasts differently"};
  }

  // identical seeds give identical comparison tables
  {
    RngState rng(7);
    const auto series = generate_synthetic(2, 5, rng, 0.0);
    const std::string data = tmp.path("cmp.csv");
    save_csv(series, data);

    CompareArgs args;
    args.data = data;
    args.flags.t0 = 12;
    args.flags.tau = 4;
    args.flags.enc_hidden = 4;
    args.flags.dec_hidden = 3;
    args.flags.embed_dim = 2;
    args.flags.attn_heads = 2;
    args.flags.attn_hidden = 3;
    args.flags.head_hidden = 4;
    args.flags.max_epochs = 2;
    args.flags.horizons = std::vector<int>{2, 4};

    std::ostringstream sink;
    auto* old = std::cout.rdbuf(sink.rdbuf());
    args.out = tmp.path("cmp1.csv");
    const int rc1 = cmd_compare(args);
    args.out = tmp.path("cmp2.csv");
    const int rc2 = cmd_compare(args);
    std::cout.rdbuf(old);

    if (rc1 != 0 || rc2 != 0) return {false, "comparison run failed"};
    const std::string t1 = read_all(tmp.path("cmp1.csv"));
    if (t1 != read_all(tmp.path("cmp2.csv"))) return {false, "comparison tables differ"};
    for (const char* name : {"Ours-Robust", "Ours-MSE", "LinearSeq", "AR-I", "Persistence"}) {
      if (t1.find(name) == std::string::npos) {
        return {false, std::string("comparison table lacks ") + name};
      }
    }
  }

  return {true, "window and split fixtures exact; save/load bit-exact; repeated comparison"
                " byte-identical"};
}

}  // namespace

int main(int argc, char** argv) {
  struct Entry {
    int id;
    const char* name;
    Outcome (*fn)();
  };
  const std::vector<Entry> entries = {
      {1, "layer and model gradients", criterion_gradients},
      {2, "attention weight invariants", criterion_attention},
      {3, "trimmed loss semantics", criterion_trimmed_loss},
      {4, "gradient clip schedule", criterion_clip},
      {5, "noiseless overfit", criterion_overfit},
      {6, "robust vs mean loss under outliers", criterion_robust_vs_mse},
      {7, "attention and embedding ablations", criterion_ablations},
      {8, "error metric protocol", criterion_metrics},
      {9, "autocorrelation estimator and generator shape", criterion_autocorrelation},
      {10, "pipeline determinism", criterion_determinism},
  };

  std::set<int> selected;
  for (int i = 1; i < argc; ++i) selected.insert(std::atoi(argv[i]));

  int failed = 0, ran = 0;
  for (const auto& entry : entries) {
    if (!selected.empty() && !selected.count(entry.id)) continue;
    ++ran;
    Outcome outcome;
    const auto t0 = std::chrono::steady_clock::now();
    try {
      outcome = entry.fn();
    } catch (const std::exception& e) {
      outcome = {false, std::string("exception: ") + e.what()};
    }
    const double elapsed =
        std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    std::printf("%s %2d %-46s %s [%.1fs]\n", outcome.pass ? "PASS" : "FAIL", entry.id, entry.name,
                outcome.detail.c_str(), elapsed);
    std::fflush(stdout);
    if (!outcome.pass) ++failed;
  }
  std::printf("%d/%d criteria passed\n", ran - failed, ran);
  return failed == 0 ? 0 : 1;
}
