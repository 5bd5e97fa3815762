#include <iostream>
#include <vector>

#include "CLI11.hpp"
#include "glucast/cli.hpp"

namespace {

// Flags shared by train/compare. Help strings carry the effective defaults
// because the bound fields are optional overrides with no value of their own.
void add_override_flags(CLI::App* cmd, glucast::ConfigOverrides& f,
                        std::vector<int>& horizons_tmp) {
  cmd->add_option("--seed", f.seed, "rng seed (default 7)");
  cmd->add_option("--t0", f.t0, "history window length in steps (default 190)");
  cmd->add_option("--tau", f.tau, "forecast length in steps (default 12)");
  cmd->add_option("--enc-hidden", f.enc_hidden,
                  "encoder hidden units per direction (default 120)");
  cmd->add_option("--dec-hidden", f.dec_hidden, "decoder hidden units (default 30)");
  cmd->add_option("--embed-dim", f.embed_dim, "patient embedding width (default 5)");
  cmd->add_option("--attn-heads", f.attn_heads, "attention heads (default 4)");
  cmd->add_option("--attn-hidden", f.attn_hidden, "attention scoring width (default 64)");
  cmd->add_option("--head-hidden", f.head_hidden, "output head hidden units (default 60)");
  cmd->add_flag("--no-attention", f.no_attention, "drop the attention context input");
  cmd->add_flag("--no-embedding", f.no_embedding, "drop the patient embedding input");
  cmd->add_flag("--no-time-features", f.no_time_features, "drop clock/calendar inputs");
  cmd->add_flag("--cold-start", f.cold_start,
                "map unknown patients to the mean embedding row instead of failing");
  cmd->add_option("--beta", f.beta, "kept fraction per batch; 1 disables trimming (default 0.9)");
  cmd->add_option("--learning-rate", f.learning_rate, "optimizer step size (default 0.001)");
  cmd->add_option("--clip-init", f.clip_init, "epoch-0 gradient clip bound (default 2)");
  cmd->add_option("--clip-decay", f.clip_decay, "per-epoch clip decay factor (default 0.99)");
  cmd->add_option("--teacher-forcing", f.teacher_forcing,
                  "probability a decoder step sees the true previous value (default 0)");
  cmd->add_option("--batch-size", f.batch_size, "windows per update (default 128)");
  cmd->add_option("--max-epochs", f.max_epochs, "epoch cap (default 200)");
  cmd->add_option("--patience", f.patience,
                  "epochs without validation improvement before stopping (default 10)");
  cmd->add_flag("--no-rectified", f.no_rectified, "plain Adam updates instead of rectified");
  cmd->add_option("--ar-p", f.ar_p, "autoregressive order for the AR baseline (default 10)");
  cmd->add_option("--ar-d", f.ar_d, "differencing order for the AR baseline, 0 or 1 (default 1)");
  cmd->add_option("--horizons", horizons_tmp, "evaluation horizons in steps (default 3,6,9,12)")
      ->delimiter(',');
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"personalized blood glucose trajectory forecasting"};
  app.require_subcommand(1);

  glucast::GenerateArgs gen;
  auto* g = app.add_subcommand("generate", "write a synthetic CGM dataset");
  g->add_option("--patients", gen.patients, "number of patients (default 8)");
  g->add_option("--days", gen.days, "days of data per patient (default 30)");
  g->add_option("--seed", gen.seed, "rng seed (default 7)");
  g->add_option("--outlier-rate", gen.outlier_rate,
                "approximate fraction of samples inside an excursion (default 0)");
  g->add_option("--out", gen.out, "output CSV path")->required();

  glucast::AcfArgs acf;
  auto* a = app.add_subcommand("analyze-acf", "per-patient autocorrelation of a CGM CSV");
  a->add_option("--input", acf.input, "input CSV path")->required();
  a->add_option("--max-lag", acf.max_lag, "largest lag in steps (default 250)");
  a->add_option("--out", acf.out, "output CSV path (default: stdout)");

  glucast::TrainArgs train;
  std::vector<int> train_hz;
  auto* t = app.add_subcommand("train", "fit the forecaster on a CGM CSV");
  t->add_option("--data", train.data, "training CSV path")->required();
  t->add_option("--config", train.config_path, "key-value config file");
  t->add_option("--model-out", train.model_out, "where to write the fitted model")->required();
  t->add_option("--report-out", train.report_out,
                "training curve path (default: <model-out>.train.txt)");
  add_override_flags(t, train.flags, train_hz);

  glucast::EvaluateArgs ev;
  std::vector<int> ev_hz;
  auto* e = app.add_subcommand("evaluate", "stratified test-set metrics for a fitted model");
  e->add_option("--model", ev.model, "fitted model path")->required();
  e->add_option("--data", ev.data, "CSV to evaluate on")->required();
  e->add_option("--out", ev.out, "metrics CSV path (default: stdout)");
  e->add_option("--horizons", ev_hz, "evaluation horizons in steps (default 3,6,9,12)")
      ->delimiter(',');
  e->add_flag("--cold-start", ev.flags.cold_start,
              "map unknown patients to the mean embedding row instead of failing");

  glucast::CompareArgs cmp;
  std::vector<int> cmp_hz;
  auto* c = app.add_subcommand("compare", "train and score all methods on one dataset");
  c->add_option("--data", cmp.data, "CSV used for the whole comparison")->required();
  c->add_option("--config", cmp.config_path, "key-value config file");
  c->add_option("--out", cmp.out, "comparison CSV path (default: stdout)");
  add_override_flags(c, cmp.flags, cmp_hz);

  glucast::ForecastArgs fc;
  auto* f = app.add_subcommand("forecast", "one forecast for a patient at a timestamp");
  f->add_option("--model", fc.model, "fitted model path")->required();
  f->add_option("--data", fc.data, "CSV holding the patient's history")->required();
  f->add_option("--patient", fc.patient, "patient id")->required();
  f->add_option("--at", fc.at, "anchor timestamp, e.g. 2026-03-29T12:00:00Z")->required();
  f->add_flag("--cold-start", fc.cold_start,
              "map unknown patients to the mean embedding row instead of failing");

  int rc = 0;
  g->callback([&] { rc = glucast::cmd_generate(gen); });
  a->callback([&] { rc = glucast::cmd_analyze_acf(acf); });
  t->callback([&] {
    if (!train_hz.empty()) train.flags.horizons = train_hz;
    rc = glucast::cmd_train(train);
  });
  e->callback([&] {
    if (!ev_hz.empty()) ev.flags.horizons = ev_hz;
    rc = glucast::cmd_evaluate(ev);
  });
  c->callback([&] {
    if (!cmp_hz.empty()) cmp.flags.horizons = cmp_hz;
    rc = glucast::cmd_compare(cmp);
  });
  f->callback([&] { rc = glucast::cmd_forecast(fc); });

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& err) {
    const int code = app.exit(err);
    return code == 0 ? 0 : 2;
  } catch (const glucast::UsageError& err) {
    std::cerr << "error: " << err.what() << "\n";
    return 2;
  } catch (const std::exception& err) {
    std::cerr << "error: " << err.what() << "\n";
    return 1;
  }
  return rc;
}
