#include "glucast/cli.hpp"

#include <algorithm>
#include <cstdio>
#include <fstream>
#include <iostream>
#include <sstream>

namespace glucast {

namespace {

bool parse_int(const std::string& s, long& out) {
  char* end = nullptr;
  out = std::strtol(s.c_str(), &end, 10);
  return end != s.c_str() && *end == '\0';
}

bool parse_double(const std::string& s, double& out) {
  char* end = nullptr;
  out = std::strtod(s.c_str(), &end);
  return end != s.c_str() && *end == '\0' && std::isfinite(out);
}

std::vector<int> parse_horizons(const std::string& s) {
  std::vector<int> out;
  std::stringstream ss(s);
  std::string tok;
  while (std::getline(ss, tok, ',')) {
    long v;
    if (!parse_int(tok, v) || v < 1) throw UsageError("bad horizon list '" + s + "'");
    out.push_back(static_cast<int>(v));
  }
  if (out.empty()) throw UsageError("empty horizon list");
  return out;
}

// One config key applied to the run config; returns false for unknown keys.
bool apply_kv(RunConfig& cfg, const std::string& key, const std::string& value) {
  long i;
  double d;
  const auto want_int = [&](int& field, long lo = -1000000000L) {
    if (!parse_int(value, i) || i < lo) throw UsageError("bad value for '" + key + "'");
    field = static_cast<int>(i);
  };
  const auto want_bool = [&](bool& field) {
    if (!parse_int(value, i) || (i != 0 && i != 1)) {
      throw UsageError("bad value for '" + key + "' (use 0 or 1)");
    }
    field = i != 0;
  };
  const auto want_double = [&](double& field) {
    if (!parse_double(value, d)) throw UsageError("bad value for '" + key + "'");
    field = d;
  };

  if (key == "seed") {
    if (!parse_int(value, i) || i < 0) throw UsageError("bad value for 'seed'");
    cfg.seed = static_cast<std::uint64_t>(i);
  } else if (key == "t0") {
    want_int(cfg.model.t0);
  } else if (key == "tau") {
    want_int(cfg.model.tau);
  } else if (key == "enc_hidden") {
    want_int(cfg.model.enc_hidden);
  } else if (key == "dec_hidden") {
    want_int(cfg.model.dec_hidden);
  } else if (key == "embed_dim") {
    want_int(cfg.model.embed_dim);
  } else if (key == "attn_heads") {
    want_int(cfg.model.attn_heads);
  } else if (key == "attn_hidden") {
    want_int(cfg.model.attn_hidden);
  } else if (key == "head_hidden") {
    want_int(cfg.model.head_hidden);
  } else if (key == "use_attention") {
    want_bool(cfg.model.use_attention);
  } else if (key == "use_embedding") {
    want_bool(cfg.model.use_embedding);
  } else if (key == "use_time_features") {
    want_bool(cfg.model.use_time_features);
  } else if (key == "cold_start_mean") {
    want_bool(cfg.model.cold_start_mean);
  } else if (key == "beta") {
    want_double(cfg.train.beta);
  } else if (key == "clip_init") {
    want_double(cfg.train.clip_init);
  } else if (key == "clip_decay") {
    want_double(cfg.train.clip_decay);
  } else if (key == "learning_rate") {
    want_double(cfg.train.learning_rate);
  } else if (key == "batch_size") {
    want_int(cfg.train.batch_size);
  } else if (key == "max_epochs") {
    want_int(cfg.train.max_epochs);
  } else if (key == "patience") {
    want_int(cfg.train.patience);
  } else if (key == "teacher_forcing") {
    want_double(cfg.train.teacher_forcing_prob);
  } else if (key == "rectified") {
    want_bool(cfg.train.rectified);
  } else if (key == "ar_p") {
    want_int(cfg.ar_p);
  } else if (key == "ar_d") {
    want_int(cfg.ar_d);
  } else if (key == "linseq_time_features") {
    want_bool(cfg.linseq_time_features);
  } else if (key == "horizons") {
    cfg.horizons = parse_horizons(value);
  } else {
    return false;
  }
  return true;
}

void validate_config(const RunConfig& cfg) {
  const ModelConfig& m = cfg.model;
  const TrainConfig& t = cfg.train;
  const auto fail = [](const std::string& why) { throw UsageError("config: " + why); };
  if (m.t0 < 1) fail("t0 must be >= 1");
  if (m.tau < 1) fail("tau must be >= 1");
  if (m.enc_hidden < 1 || m.dec_hidden < 1 || m.head_hidden < 1) fail("hidden dims must be >= 1");
  if (m.use_embedding && m.embed_dim < 1) fail("embed_dim must be >= 1");
  if (m.use_attention && (m.attn_heads < 1 || m.attn_hidden < 1)) {
    fail("attention dims must be >= 1");
  }
  if (!(t.beta > 0.0 && t.beta <= 1.0)) fail("beta must be in (0, 1]");
  if (!(t.clip_init > 0.0)) fail("clip_init must be > 0");
  if (!(t.clip_decay > 0.0 && t.clip_decay <= 1.0)) fail("clip_decay must be in (0, 1]");
  if (!(t.learning_rate > 0.0)) fail("learning_rate must be > 0");
  if (t.batch_size < 1) fail("batch_size must be >= 1");
  if (t.max_epochs < 1) fail("max_epochs must be >= 1");
  if (t.patience < 1) fail("patience must be >= 1");
  if (!(t.teacher_forcing_prob >= 0.0 && t.teacher_forcing_prob <= 1.0)) {
    fail("teacher_forcing must be in [0, 1]");
  }
  if (cfg.ar_p < 1) fail("ar_p must be >= 1");
  if (cfg.ar_d != 0 && cfg.ar_d != 1) fail("ar_d must be 0 or 1");
  for (int h : cfg.horizons) {
    if (h < 1) fail("horizons must be >= 1");
  }
}

// Only evaluation-style commands consume horizons, so tau bounds are theirs to check.
void check_horizons(const std::vector<int>& horizons, int tau) {
  for (int h : horizons) {
    if (h > tau) {
      throw UsageError("horizon " + std::to_string(h) + " exceeds tau " + std::to_string(tau));
    }
  }
}

}  // namespace

RunConfig load_config_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw UsageError("cannot open config file '" + path + "'");

  RunConfig cfg;
  bool version_seen = false;
  std::string line;
  long line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    const auto first = line.find_first_not_of(" \t");
    if (first == std::string::npos || line[first] == '#') continue;

    std::istringstream ls(line);
    std::string key, value, extra;
    ls >> key >> value;
    if (value.empty() || (ls >> extra)) {
      throw UsageError(path + ":" + std::to_string(line_no) + ": expected 'key value'");
    }
    if (key == "version") {
      if (value != "1") throw UsageError(path + ": unsupported config version '" + value + "'");
      version_seen = true;
      continue;
    }
    try {
      if (!apply_kv(cfg, key, value)) {
        throw UsageError(path + ":" + std::to_string(line_no) + ": unknown key '" + key + "'");
      }
    } catch (const UsageError& e) {
      throw UsageError(path + ":" + std::to_string(line_no) + ": " + e.what());
    }
  }
  if (!version_seen) throw UsageError(path + ": missing 'version' key");
  return cfg;
}

RunConfig resolve_config(const std::string& config_path, const ConfigOverrides& f) {
  RunConfig cfg = config_path.empty() ? RunConfig{} : load_config_file(config_path);

  if (f.seed) cfg.seed = *f.seed;
  if (f.t0) cfg.model.t0 = *f.t0;
  if (f.tau) cfg.model.tau = *f.tau;
  if (f.enc_hidden) cfg.model.enc_hidden = *f.enc_hidden;
  if (f.dec_hidden) cfg.model.dec_hidden = *f.dec_hidden;
  if (f.embed_dim) cfg.model.embed_dim = *f.embed_dim;
  if (f.attn_heads) cfg.model.attn_heads = *f.attn_heads;
  if (f.attn_hidden) cfg.model.attn_hidden = *f.attn_hidden;
  if (f.head_hidden) cfg.model.head_hidden = *f.head_hidden;
  if (f.no_attention) cfg.model.use_attention = false;
  if (f.no_embedding) cfg.model.use_embedding = false;
  if (f.no_time_features) cfg.model.use_time_features = false;
  if (f.cold_start) cfg.model.cold_start_mean = true;
  if (f.beta) cfg.train.beta = *f.beta;
  if (f.learning_rate) cfg.train.learning_rate = *f.learning_rate;
  if (f.clip_init) cfg.train.clip_init = *f.clip_init;
  if (f.clip_decay) cfg.train.clip_decay = *f.clip_decay;
  if (f.teacher_forcing) cfg.train.teacher_forcing_prob = *f.teacher_forcing;
  if (f.batch_size) cfg.train.batch_size = *f.batch_size;
  if (f.max_epochs) cfg.train.max_epochs = *f.max_epochs;
  if (f.patience) cfg.train.patience = *f.patience;
  if (f.no_rectified) cfg.train.rectified = false;
  if (f.ar_p) cfg.ar_p = *f.ar_p;
  if (f.ar_d) cfg.ar_d = *f.ar_d;
  if (f.horizons) cfg.horizons = *f.horizons;

  validate_config(cfg);
  return cfg;
}

KvList effective_config(const RunConfig& cfg) {
  KvList kv;
  const auto add = [&](const std::string& k, const std::string& v) { kv.emplace_back(k, v); };
  char buf[64];
  const auto num = [&](double v) {
    std::snprintf(buf, sizeof(buf), "%g", v);
    return std::string(buf);
  };
  add("seed", std::to_string(cfg.seed));
  add("t0", std::to_string(cfg.model.t0));
  add("tau", std::to_string(cfg.model.tau));
  add("enc_hidden", std::to_string(cfg.model.enc_hidden));
  add("dec_hidden", std::to_string(cfg.model.dec_hidden));
  add("embed_dim", std::to_string(cfg.model.embed_dim));
  add("attn_heads", std::to_string(cfg.model.attn_heads));
  add("attn_hidden", std::to_string(cfg.model.attn_hidden));
  add("head_hidden", std::to_string(cfg.model.head_hidden));
  add("use_attention", cfg.model.use_attention ? "1" : "0");
  add("use_embedding", cfg.model.use_embedding ? "1" : "0");
  add("use_time_features", cfg.model.use_time_features ? "1" : "0");
  add("cold_start_mean", cfg.model.cold_start_mean ? "1" : "0");
  add("beta", num(cfg.train.beta));
  add("clip_init", num(cfg.train.clip_init));
  add("clip_decay", num(cfg.train.clip_decay));
  add("learning_rate", num(cfg.train.learning_rate));
  add("batch_size", std::to_string(cfg.train.batch_size));
  add("max_epochs", std::to_string(cfg.train.max_epochs));
  add("patience", std::to_string(cfg.train.patience));
  add("teacher_forcing", num(cfg.train.teacher_forcing_prob));
  add("rectified", cfg.train.rectified ? "1" : "0");
  add("ar_p", std::to_string(cfg.ar_p));
  add("ar_d", std::to_string(cfg.ar_d));
  add("linseq_time_features", cfg.linseq_time_features ? "1" : "0");
  std::string hs;
  for (size_t i = 0; i < cfg.horizons.size(); ++i) {
    if (i) hs += ",";
    hs += std::to_string(cfg.horizons[i]);
  }
  add("horizons", hs);
  return kv;
}

Dataset build_dataset(const std::vector<PatientSeries>& raw, int t0, int tau) {
  Dataset ds;
  for (const auto& series : raw) {
    PatientSeries cleaned = clean(series);
    const auto split = split_temporal(cleaned);
    if (!split) {
      ds.skipped.push_back(series.patient_id);
      continue;
    }
    auto tr = windowize(split->train, t0, tau);
    auto va = windowize(split->val, t0, tau);
    auto te = windowize(split->test, t0, tau);
    if (!tr.empty()) ds.patient_ids.push_back(series.patient_id);
    ds.train.insert(ds.train.end(), tr.begin(), tr.end());
    ds.val.insert(ds.val.end(), va.begin(), va.end());
    ds.test.insert(ds.test.end(), te.begin(), te.end());
    ds.cleaned.push_back(std::move(cleaned));
    ds.splits.push_back(std::move(*split));
  }
  std::sort(ds.patient_ids.begin(), ds.patient_ids.end());
  ds.patient_ids.erase(std::unique(ds.patient_ids.begin(), ds.patient_ids.end()),
                       ds.patient_ids.end());
  return ds;
}

void assign_patient_indices(std::vector<WindowSample>& windows,
                            const std::vector<std::string>& sorted_ids) {
  for (auto& w : windows) {
    const auto it =
        std::lower_bound(sorted_ids.begin(), sorted_ids.end(), w.patient_id());
    w.patient_index = (it != sorted_ids.end() && *it == w.patient_id())
                          ? static_cast<int>(it - sorted_ids.begin())
                          : -1;
  }
}

std::vector<EvalSample> eval_model(const ModelParams& m, const std::vector<WindowSample>& test) {
  std::vector<EvalSample> out;
  out.reserve(test.size());
  for (const auto& w : test) {
    const Tensor1 pred = model_forward(m, w);
    EvalSample es;
    es.anchor_mgdl = w.anchor_raw();
    es.truth.resize(w.tau);
    es.pred.resize(w.tau);
    for (int i = 0; i < w.tau; ++i) {
      es.truth[i] = w.target_raw(i);
      es.pred[i] = m.cfg.norm.invert(pred[i]);
    }
    out.push_back(std::move(es));
  }
  return out;
}

std::vector<EvalSample> eval_linear_seq(const LinearSeqParams& m,
                                        const std::vector<WindowSample>& test) {
  std::vector<EvalSample> out;
  out.reserve(test.size());
  for (const auto& w : test) {
    const Tensor1 pred = linear_seq_forward(m, w);
    EvalSample es;
    es.anchor_mgdl = w.anchor_raw();
    es.truth.resize(w.tau);
    es.pred.resize(w.tau);
    for (int i = 0; i < w.tau; ++i) {
      es.truth[i] = w.target_raw(i);
      es.pred[i] = m.cfg.norm.invert(pred[i]);
    }
    out.push_back(std::move(es));
  }
  return out;
}

std::vector<EvalSample> eval_ar(const std::map<std::string, ArModel>& per_patient,
                                const std::vector<WindowSample>& test) {
  std::vector<EvalSample> out;
  out.reserve(test.size());
  for (const auto& w : test) {
    const auto it = per_patient.find(w.patient_id());
    if (it == per_patient.end()) {
      throw std::runtime_error("no AR model for patient '" + w.patient_id() + "'");
    }
    const ArModel& m = it->second;
    std::vector<double> recent(m.p + m.d);
    for (int i = 0; i < m.p + m.d; ++i) {
      recent[i] = w.input_raw(w.t0 - (m.p + m.d) + i);
    }
    EvalSample es;
    es.anchor_mgdl = w.anchor_raw();
    es.pred = forecast_ar(m, recent, w.tau);
    es.truth.resize(w.tau);
    for (int i = 0; i < w.tau; ++i) es.truth[i] = w.target_raw(i);
    out.push_back(std::move(es));
  }
  return out;
}

std::vector<EvalSample> eval_persistence(const std::vector<WindowSample>& test) {
  std::vector<EvalSample> out;
  out.reserve(test.size());
  for (const auto& w : test) {
    EvalSample es;
    es.anchor_mgdl = w.anchor_raw();
    es.pred = persistence_forecast({w.anchor_raw()}, w.tau);
    es.truth.resize(w.tau);
    for (int i = 0; i < w.tau; ++i) es.truth[i] = w.target_raw(i);
    out.push_back(std::move(es));
  }
  return out;
}

// ---------------------------------------------------------------------------
// Commands

namespace {

void warn_skipped(const Dataset& ds) {
  for (const auto& id : ds.skipped) {
    std::cerr << "warning: patient '" << id << "' has fewer than 22 records, excluded\n";
  }
}

Normalizer fit_norm_or_fail(const std::vector<WindowSample>& train) {
  try {
    return fit_normalizer(train);
  } catch (const std::invalid_argument& e) {
    throw std::runtime_error(std::string("cannot normalize training data: ") + e.what());
  }
}

std::ofstream open_out(const std::string& path) {
  std::ofstream f(path);
  if (!f) throw std::runtime_error("cannot write '" + path + "'");
  return f;
}

void write_train_report(std::ostream& out, const TrainReport& rep, const KvList& kv,
                        long param_count) {
  write_provenance(out, "train-report", kv);
  out << "# param_count " << param_count << "\n";
  out << "epoch,train_loss,val_loss,clip\n";
  char buf[128];
  for (size_t e = 0; e < rep.train_loss.size(); ++e) {
    std::snprintf(buf, sizeof(buf), "%zu,%.8f,%.8f,%.6f", e, rep.train_loss[e], rep.val_loss[e],
                  rep.clip_used[e]);
    out << buf << "\n";
  }
  out << "# best_epoch " << rep.best_epoch << "\n";
  std::snprintf(buf, sizeof(buf), "%.8f", rep.best_val);
  out << "# best_val " << buf << "\n";
}

KvList model_provenance(const ModelParams& m) {
  RunConfig rc;
  rc.model = m.cfg;
  KvList kv = effective_config(rc);
  // training keys do not describe a loaded model; keep the model block only
  KvList out;
  for (auto& [k, v] : kv) {
    if (k == "beta" || k == "clip_init" || k == "clip_decay" || k == "learning_rate" ||
        k == "batch_size" || k == "max_epochs" || k == "patience" || k == "teacher_forcing" ||
        k == "rectified" || k == "seed" || k == "ar_p" || k == "ar_d" ||
        k == "linseq_time_features" || k == "horizons") {
      continue;
    }
    out.emplace_back(k, v);
  }
  return out;
}

}  // namespace

int cmd_generate(const GenerateArgs& args) {
  if (args.patients < 1) throw UsageError("--patients must be >= 1");
  if (args.days < 1) throw UsageError("--days must be >= 1");
  if (!(args.outlier_rate >= 0.0 && args.outlier_rate < 1.0)) {
    throw UsageError("--outlier-rate must be in [0, 1)");
  }
  if (args.out.empty()) throw UsageError("--out is required");

  RngState rng(args.seed);
  const auto series = generate_synthetic(args.patients, args.days, rng, args.outlier_rate);
  try {
    save_csv(series, args.out);
  } catch (const std::exception& e) {
    throw UsageError(e.what());
  }
  long total = 0;
  for (const auto& p : series) total += static_cast<long>(p.records.size());
  std::cout << "wrote " << total << " records for " << series.size() << " patients to "
            << args.out << "\n";
  return 0;
}

int cmd_analyze_acf(const AcfArgs& args) {
  if (args.max_lag < 1) throw UsageError("--max-lag must be >= 1");
  const auto series = load_csv(args.input);

  std::vector<std::pair<std::string, AcfResult>> rows;
  for (const auto& p : series) {
    std::vector<double> values;
    values.reserve(p.records.size());
    for (const auto& r : p.records) values.push_back(r.glucose_mgdl);
    try {
      rows.emplace_back(p.patient_id, autocorrelation(values, args.max_lag));
    } catch (const std::invalid_argument& e) {
      std::cerr << "warning: patient '" << p.patient_id << "' skipped: " << e.what() << "\n";
    }
  }

  KvList kv{{"input", args.input},
            {"max_lag", std::to_string(args.max_lag)},
            {"patients", std::to_string(rows.size())}};
  if (args.out.empty()) {
    write_acf_csv(std::cout, rows, kv);
  } else {
    auto f = open_out(args.out);
    write_acf_csv(f, rows, kv);
  }
  return 0;
}

int cmd_train(const TrainArgs& args) {
  RunConfig cfg = resolve_config(args.config_path, args.flags);
  if (args.data.empty()) throw UsageError("--data is required");
  if (args.model_out.empty()) throw UsageError("--model-out is required");

  const auto raw = load_csv(args.data);
  Dataset ds = build_dataset(raw, cfg.model.t0, cfg.model.tau);
  warn_skipped(ds);
  if (ds.train.empty()) {
    throw std::runtime_error("no training windows (series shorter than t0 + tau after split?)");
  }
  if (ds.val.empty()) {
    throw std::runtime_error("no validation windows; validation splits are shorter than t0 + tau");
  }

  cfg.model.norm = fit_norm_or_fail(ds.train);
  assign_patient_indices(ds.train, ds.patient_ids);
  assign_patient_indices(ds.val, ds.patient_ids);

  RngState rng(cfg.seed);
  ModelParams model;
  model.init(cfg.model, ds.patient_ids, rng);
  const long n_params = model.param_count();
  std::cout << "training on " << ds.train.size() << " windows (" << ds.patient_ids.size()
            << " patients), validating on " << ds.val.size() << " windows; " << n_params
            << " parameters\n";

  auto [best, report] = fit<FullModelDriver>(std::move(model), ds.train, ds.val, cfg.train, rng);

  save_model(best, args.model_out);
  const std::string report_path =
      args.report_out.empty() ? args.model_out + ".train.txt" : args.report_out;
  {
    auto f = open_out(report_path);
    write_train_report(f, report, effective_config(cfg), n_params);
  }
  std::cout << "ran " << report.epochs_run << " epochs; best epoch " << report.best_epoch
            << " (val loss " << report.best_val << ")\n";
  std::cout << "model written to " << args.model_out << ", report to " << report_path << "\n";
  return 0;
}

int cmd_evaluate(const EvaluateArgs& args) {
  if (args.model.empty()) throw UsageError("--model is required");
  if (args.data.empty()) throw UsageError("--data is required");

  ModelParams m = load_model(args.model);
  if (args.flags.cold_start) m.cfg.cold_start_mean = true;

  std::vector<int> horizons = args.flags.horizons ? *args.flags.horizons
                                                  : std::vector<int>{3, 6, 9, 12};
  for (int h : horizons) {
    if (h < 1) throw UsageError("horizons must be >= 1");
  }
  check_horizons(horizons, m.cfg.tau);

  const auto raw = load_csv(args.data);
  Dataset ds = build_dataset(raw, m.cfg.t0, m.cfg.tau);
  warn_skipped(ds);
  if (ds.test.empty()) throw std::runtime_error("no test windows in '" + args.data + "'");
  assign_patient_indices(ds.test, m.embed.ids);

  const auto samples = eval_model(m, ds.test);
  const MetricsReport report = build_report(samples, horizons);

  KvList kv = model_provenance(m);
  kv.emplace_back("model", args.model);
  kv.emplace_back("data", args.data);
  kv.emplace_back("test_windows", std::to_string(ds.test.size()));

  if (!args.out.empty()) {
    auto f = open_out(args.out);
    write_report_csv(f, report, kv);
  } else {
    write_report_csv(std::cout, report, kv);
  }
  std::cout << render_report_text(report);
  return 0;
}

int cmd_compare(const CompareArgs& args) {
  RunConfig cfg = resolve_config(args.config_path, args.flags);
  if (args.data.empty()) throw UsageError("--data is required");
  check_horizons(cfg.horizons, cfg.model.tau);

  const auto raw = load_csv(args.data);
  Dataset ds = build_dataset(raw, cfg.model.t0, cfg.model.tau);
  warn_skipped(ds);
  if (ds.train.empty() || ds.val.empty() || ds.test.empty()) {
    throw std::runtime_error("compare needs non-empty train/val/test window sets");
  }

  const Normalizer norm = fit_norm_or_fail(ds.train);
  cfg.model.norm = norm;
  assign_patient_indices(ds.train, ds.patient_ids);
  assign_patient_indices(ds.val, ds.patient_ids);
  assign_patient_indices(ds.test, ds.patient_ids);

  RngState master(cfg.seed);
  const std::uint64_t seed_pair = master.next_u64();  // shared: paired robust/mse runs
  const std::uint64_t seed_lin = master.next_u64();

  std::vector<std::string> methods;
  std::vector<MetricsReport> reports;
  std::vector<std::string> failures;

  const auto add_method = [&](const std::string& name, auto&& samples_fn) {
    try {
      const std::vector<EvalSample> samples = samples_fn();
      reports.push_back(build_report(samples, cfg.horizons));
      methods.push_back(name);
      std::cout << name << ": done\n";
    } catch (const std::exception& e) {
      failures.push_back(name + ": " + e.what());
      std::cerr << "warning: " << name << " failed: " << e.what() << "\n";
    }
  };

  add_method("Ours-Robust", [&] {
    RngState rng(seed_pair);
    ModelParams m;
    m.init(cfg.model, ds.patient_ids, rng);
    auto [best, rep] = fit<FullModelDriver>(std::move(m), ds.train, ds.val, cfg.train, rng);
    return eval_model(best, ds.test);
  });

  add_method("Ours-MSE", [&] {
    RngState rng(seed_pair);
    ModelParams m;
    m.init(cfg.model, ds.patient_ids, rng);
    TrainConfig tc = cfg.train;
    tc.beta = 1.0;
    auto [best, rep] = fit<FullModelDriver>(std::move(m), ds.train, ds.val, tc, rng);
    return eval_model(best, ds.test);
  });

  add_method("LinearSeq", [&] {
    LinearSeqConfig lc;
    lc.t0 = cfg.model.t0;
    lc.tau = cfg.model.tau;
    lc.enc_hidden = cfg.model.enc_hidden;
    lc.summary_dim = cfg.model.dec_hidden;
    lc.use_time_features = cfg.linseq_time_features;
    lc.norm = norm;
    RngState rng(seed_lin);
    LinearSeqParams m;
    m.init(lc, rng);
    TrainConfig tc = cfg.train;
    tc.beta = 1.0;  // mirrors its non-robust origin
    auto [best, rep] = fit<LinearSeqDriver>(std::move(m), ds.train, ds.val, tc, rng);
    return eval_linear_seq(best, ds.test);
  });

  add_method("AR-I", [&] {
    std::map<std::string, ArModel> per_patient;
    for (size_t i = 0; i < ds.splits.size(); ++i) {
      std::vector<double> values;
      values.reserve(ds.splits[i].train.records.size());
      for (const auto& r : ds.splits[i].train.records) values.push_back(r.glucose_mgdl);
      per_patient[ds.splits[i].train.patient_id] = fit_ar(values, cfg.ar_p, cfg.ar_d);
    }
    return eval_ar(per_patient, ds.test);
  });

  add_method("Persistence", [&] { return eval_persistence(ds.test); });

  KvList kv = effective_config(cfg);
  kv.emplace_back("data", args.data);
  kv.emplace_back("test_windows", std::to_string(ds.test.size()));

  if (!args.out.empty()) {
    auto f = open_out(args.out);
    write_compare_csv(f, methods, reports, kv, failures);
  } else {
    write_compare_csv(std::cout, methods, reports, kv, failures);
  }
  std::cout << render_compare_text(methods, reports, failures);
  return failures.empty() ? 0 : 1;
}

int cmd_forecast(const ForecastArgs& args) {
  if (args.model.empty()) throw UsageError("--model is required");
  if (args.data.empty()) throw UsageError("--data is required");
  if (args.patient.empty()) throw UsageError("--patient is required");
  if (args.at.empty()) throw UsageError("--at is required");

  std::int64_t at;
  try {
    at = parse_iso8601(args.at);
  } catch (const ParseError& e) {
    throw UsageError(e.what());
  }

  ModelParams m = load_model(args.model);
  if (args.cold_start) m.cfg.cold_start_mean = true;

  const auto all = load_csv(args.data);
  const PatientSeries* found = nullptr;
  for (const auto& p : all) {
    if (p.patient_id == args.patient) {
      found = &p;
      break;
    }
  }
  if (!found) {
    throw std::runtime_error("patient '" + args.patient + "' not present in '" + args.data + "'");
  }

  const PatientSeries cleaned = clean(*found);
  std::vector<CgmRecord> history;
  for (const auto& r : cleaned.records) {
    if (r.timestamp <= at) history.push_back(r);
  }

  const WindowSample w =
      make_forecast_window(args.patient, history, m.cfg.t0, m.cfg.tau);
  const Forecast fc = forecast(m, w);

  KvList kv = model_provenance(m);
  kv.emplace_back("patient", fc.patient_id);
  kv.emplace_back("anchor", format_iso8601(fc.anchor_ts));
  write_provenance(std::cout, "forecast", kv);
  std::cout << "step,timestamp,pred_mgdl\n";
  char buf[64];
  for (size_t i = 0; i < fc.values_mgdl.size(); ++i) {
    const std::int64_t ts = fc.anchor_ts + static_cast<std::int64_t>(i + 1) * kCadenceSeconds;
    std::snprintf(buf, sizeof(buf), "%.2f", fc.values_mgdl[i]);
    std::cout << (i + 1) << "," << format_iso8601(ts) << "," << buf << "\n";
  }
  if (!fc.attention.empty()) {
    std::cout << "attention,step,head,encoder_index,weight\n";
    for (size_t i = 0; i < fc.attention.size(); ++i) {
      const Tensor2& A = fc.attention[i];
      for (Eigen::Index k = 0; k < A.rows(); ++k) {
        for (Eigen::Index j = 0; j < A.cols(); ++j) {
          std::snprintf(buf, sizeof(buf), "%.6f", A(k, j));
          std::cout << "attention," << (i + 1) << "," << k << "," << j << "," << buf << "\n";
        }
      }
    }
  }
  return 0;
}

}  // namespace glucast
