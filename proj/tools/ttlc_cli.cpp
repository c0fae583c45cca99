// ttlc — time-to-lane-change prediction toolkit.
//
// Subcommands wire the library end to end:
//   generate -> prepare -> gridsearch -> train -> evaluate -> importance,
// plus one-shot `predict` on a single feature window.

#include <cstdio>
#include <string>

#include <CLI11.hpp>

#include "ttlc/cli.hpp"

namespace {

int exit_code_for(ttlc::ErrorCategory c) {
  switch (c) {
    case ttlc::ErrorCategory::Config: return 2;
    case ttlc::ErrorCategory::Input: return 3;
    case ttlc::ErrorCategory::Data: return 4;
    case ttlc::ErrorCategory::Parse: return 5;
    case ttlc::ErrorCategory::Training: return 6;
    case ttlc::ErrorCategory::Pipeline: return 7;
    case ttlc::ErrorCategory::Io: return 8;
  }
  return 1;
}

void add_train_flags(CLI::App* cmd, ttlc::TrainConfig& cfg) {
  cmd->add_option("--batch", cfg.batch_size, "Mini-batch size");
  cmd->add_option("--epochs", cfg.max_epochs, "Maximum training epochs");
  cmd->add_option("--patience", cfg.early_stop_patience, "Early stopping patience (epochs)");
  cmd->add_option("--threads", cfg.threads, "Worker threads for gradient shards");
  cmd->add_option("--clip-norm", cfg.clip_norm, "Global gradient norm clip (0 = off)");
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"time-to-lane-change prediction toolkit"};
  app.require_subcommand(1);

  std::string state_dir = ".";
  app.add_option("--state-dir", state_dir, "Pipeline state directory")->capture_default_str();

  // generate
  auto* gen = app.add_subcommand("generate", "Create a synthetic highway recording");
  ttlc::GenerateOptions gen_opt;
  std::string gen_config;
  gen->add_option("--seed", gen_opt.seed, "RNG seed")->required();
  gen->add_option("--vehicles", gen_opt.scenario.num_vehicles, "Number of vehicles");
  gen->add_option("--lanes", gen_opt.scenario.num_lanes, "Number of lanes");
  gen->add_option("--duration", gen_opt.scenario.duration_s, "Scenario length in seconds");
  gen->add_option("--rate", gen_opt.scenario.lane_change_rate_per_min,
                  "Lane changes per vehicle per minute");
  gen->add_option("--config", gen_config, "Scenario config JSON (overrides other flags)");

  // prepare
  auto* prep = app.add_subcommand("prepare", "Extract features and labels into a dataset cache");
  ttlc::PrepareOptions prep_opt;
  std::vector<std::string> prep_inputs;
  prep->add_option("--seed", prep_opt.seed, "RNG seed")->required();
  prep->add_option("--t-h", prep_opt.t_h, "Default feature history in seconds")
      ->capture_default_str();
  prep->add_option("--input", prep_inputs, "Recording CSVs (default: recordings/*.csv)");

  // gridsearch
  auto* gs = app.add_subcommand("gridsearch", "Cross-validated hyperparameter grid search");
  ttlc::GridSearchOptions gs_opt;
  std::string gs_grid;
  gs->add_option("--seed", gs_opt.seed, "RNG seed")->required();
  gs->add_option("--grid", gs_grid, "Grid config JSON (default: the full built-in grid)");
  gs->add_option("--folds", gs_opt.folds, "Cross-validation folds")->capture_default_str();
  gs->add_option("--test-fold", gs_opt.test_fold, "Reserved outer test fold")
      ->capture_default_str();
  add_train_flags(gs, gs_opt.train);

  // train
  auto* tr = app.add_subcommand("train", "Train the final model");
  ttlc::TrainOptions tr_opt;
  int tr_n_lstm = 0, tr_n_dense = 0;
  double tr_t_h = -1.0, tr_alpha = 0.0;
  tr->add_option("--seed", tr_opt.seed, "RNG seed")->required();
  tr->add_option("--n-lstm", tr_n_lstm, "LSTM layer width");
  tr->add_option("--n-dense", tr_n_dense, "Dense layer width");
  tr->add_option("--t-h", tr_t_h, "Feature history in seconds");
  tr->add_option("--alpha", tr_alpha, "Adam learning rate");
  tr->add_option("--folds", tr_opt.folds, "Outer folds")->capture_default_str();
  tr->add_option("--test-fold", tr_opt.test_fold, "Reserved outer test fold")
      ->capture_default_str();
  add_train_flags(tr, tr_opt.train);

  // evaluate
  auto* ev = app.add_subcommand("evaluate", "Evaluate the model on the untouched test fold");
  ttlc::EvaluateOptions ev_opt;
  bool ev_balanced = false, ev_undersampled = false;
  std::string ev_mode = "absolute";
  ev->add_option("--seed", ev_opt.seed, "RNG seed")->required();
  ev->add_option("--folds", ev_opt.folds, "Outer folds")->capture_default_str();
  ev->add_option("--test-fold", ev_opt.test_fold, "Test fold index")->capture_default_str();
  ev->add_flag("--balanced", ev_balanced, "Only the class-balanced evaluation");
  ev->add_flag("--undersampled", ev_undersampled, "Only the undersampled evaluation");
  ev->add_option("--horizon", ev_opt.horizon, "Classification horizon in seconds")
      ->capture_default_str();
  ev->add_option("--bin-width", ev_opt.bin_width, "TTLC bin width in seconds")
      ->capture_default_str();
  ev->add_option("--importance-mode", ev_mode, "absolute|signed")->capture_default_str();

  // importance
  auto* im = app.add_subcommand("importance", "Feature importance of a trained model");
  ttlc::ImportanceOptions im_opt;
  std::string im_model, im_mode = "absolute";
  im->add_option("--model", im_model, "Model file (default: <state>/model.json)");
  im->add_option("--importance-mode", im_mode, "absolute|signed")->capture_default_str();

  // predict
  auto* pr = app.add_subcommand("predict", "Predict TTLC for one feature window");
  std::string pr_model, pr_window;
  pr->add_option("--model", pr_model, "Model JSON file")->required();
  pr->add_option("--window", pr_window, "Window CSV (feature header + T rows)")->required();

  CLI11_PARSE(app, argc, argv);

  auto parse_mode = [](const std::string& s) {
    if (s == "absolute") return ttlc::ImportanceMode::Absolute;
    if (s == "signed") return ttlc::ImportanceMode::Signed;
    throw ttlc::ConfigError("importance mode must be 'absolute' or 'signed'");
  };

  try {
    if (gen->parsed()) {
      gen_opt.state_dir = state_dir;
      if (!gen_config.empty())
        gen_opt.scenario = ttlc::scenario_from_json(ttlc::load_json(gen_config), gen_opt.scenario);
      ttlc::cmd_generate(gen_opt);
    } else if (prep->parsed()) {
      prep_opt.state_dir = state_dir;
      for (const std::string& p : prep_inputs) prep_opt.inputs.emplace_back(p);
      ttlc::cmd_prepare(prep_opt);
    } else if (gs->parsed()) {
      gs_opt.state_dir = state_dir;
      if (!gs_grid.empty()) gs_opt.grid_file = gs_grid;
      ttlc::cmd_gridsearch(gs_opt);
    } else if (tr->parsed()) {
      tr_opt.state_dir = state_dir;
      if (tr_n_lstm > 0 || tr_n_dense > 0 || tr_t_h > 0.0 || tr_alpha > 0.0) {
        ttlc::Hyperparams hp;
        hp.n_lstm = tr_n_lstm > 0 ? tr_n_lstm : 64;
        hp.n_dense = tr_n_dense > 0 ? tr_n_dense : 32;
        hp.t_h = tr_t_h;  // <= 0 means: use the dataset default
        hp.alpha = tr_alpha > 0.0 ? tr_alpha : 0.0003;
        tr_opt.hyper = hp;
      }
      ttlc::cmd_train(tr_opt);
    } else if (ev->parsed()) {
      ev_opt.state_dir = state_dir;
      if (ev_balanced || ev_undersampled) {
        ev_opt.balanced = ev_balanced;
        ev_opt.undersampled = ev_undersampled;
      }
      ev_opt.importance_mode = parse_mode(ev_mode);
      ttlc::cmd_evaluate(ev_opt);
    } else if (im->parsed()) {
      im_opt.state_dir = state_dir;
      if (!im_model.empty()) im_opt.model_path = im_model;
      im_opt.mode = parse_mode(im_mode);
      ttlc::cmd_importance(im_opt);
    } else if (pr->parsed()) {
      ttlc::cmd_predict(ttlc::PredictOptions{pr_model, pr_window});
    }
  } catch (const ttlc::Error& e) {
    std::fprintf(stderr, "error: %s: %s\n", ttlc::to_string(e.category()), e.what());
    return exit_code_for(e.category());
  } catch (const std::exception& e) {
    std::fprintf(stderr, "error: internal: %s\n", e.what());
    return 1;
  }
  return 0;
}
