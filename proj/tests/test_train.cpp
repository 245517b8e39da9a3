#include "cropnet/train.hpp"

#include <gtest/gtest.h>

#include <algorithm>
#include <cmath>

#include "cropnet/errors.hpp"
#include "test_support.hpp"

using namespace cropnet;
using testsupport::TempDir;

namespace {

bool params_equal(const ModelParams& a, const ModelParams& b) {
  if (a.blocks.size() != b.blocks.size()) return false;
  for (std::size_t i = 0; i < a.blocks.size(); ++i) {
    if (a.blocks[i].name != b.blocks[i].name) return false;
    if (a.blocks[i].value.values != b.blocks[i].value.values) return false;
  }
  return true;
}

}  // namespace

TEST(TrainConfig, DefaultsAreValid) {
  EXPECT_NO_THROW(validate_train_config(TrainConfig{}));
}

TEST(TrainConfig, ZeroLearningRateIsTheNullStep) {
  TrainConfig cfg;
  cfg.learning_rate = 0.0;
  EXPECT_NO_THROW(validate_train_config(cfg));
}

TEST(TrainConfig, RejectsOutOfRangeFields) {
  const auto expect_bad = [](auto mutate) {
    TrainConfig cfg;
    mutate(cfg);
    EXPECT_THROW(validate_train_config(cfg), ConfigError);
  };
  expect_bad([](TrainConfig& c) { c.learning_rate = -1e-4; });
  expect_bad([](TrainConfig& c) { c.epochs = 0; });
  expect_bad([](TrainConfig& c) { c.batch_size = 0; });
  expect_bad([](TrainConfig& c) { c.attention_dropout = 1.0; });
  expect_bad([](TrainConfig& c) { c.attention_dropout = -0.1; });
  expect_bad([](TrainConfig& c) { c.beta1 = 1.0; });
  expect_bad([](TrainConfig& c) { c.beta2 = 1.5; });
  expect_bad([](TrainConfig& c) { c.epsilon = 0.0; });
}

TEST(TrainConfig, JsonRoundTrip) {
  TrainConfig cfg;
  cfg.learning_rate = 3e-3;
  cfg.epochs = 7;
  cfg.batch_size = 4;
  cfg.attention_dropout = 0.25;
  cfg.seed = 99;
  const TrainConfig back = train_config_from_json(train_config_to_json(cfg));
  EXPECT_EQ(back.learning_rate, cfg.learning_rate);
  EXPECT_EQ(back.epochs, cfg.epochs);
  EXPECT_EQ(back.batch_size, cfg.batch_size);
  EXPECT_EQ(back.attention_dropout, cfg.attention_dropout);
  EXPECT_EQ(back.seed, cfg.seed);
}

TEST(MseLoss, PerfectPredictionIsZero) {
  EXPECT_DOUBLE_EQ(mse_loss({1.0, 2.0, 3.0}, {1.0, 2.0, 3.0}), 0.0);
}

TEST(MseLoss, HandWorkedCase) {
  // residuals 3 and 4 -> (9 + 16) / 2
  EXPECT_DOUBLE_EQ(mse_loss({0.0, 0.0}, {3.0, 4.0}), 12.5);
}

TEST(MseLoss, RejectsMismatchAndEmpty) {
  EXPECT_THROW(mse_loss({1.0}, {1.0, 2.0}), DataError);
  EXPECT_THROW(mse_loss({}, {}), DataError);
}

TEST(OptimizerStep, ZeroGradientLeavesParamsUnchanged) {
  const auto cfg = testsupport::tiny_model();
  ModelParams p = init_params(cfg, 7);
  const ModelParams before = p;
  ModelParams grads = zero_like(p);
  AdamState st = init_adam_state(p);
  TrainConfig tc;
  optimizer_step(p, grads, st, tc, 1);
  optimizer_step(p, grads, st, tc, 2);
  EXPECT_TRUE(params_equal(p, before));
}

TEST(OptimizerStep, FirstStepMovesByAboutTheLearningRate) {
  // After bias correction, step 1 gives m_hat = g and v_hat = g^2, so the
  // update is lr * g / (|g| + eps) — the learning rate, against the gradient.
  const auto cfg = testsupport::tiny_model();
  ModelParams p = init_params(cfg, 7);
  ModelParams grads = zero_like(p);
  const double g = 0.5;
  const double before = p.at("head.b2").values[0];
  grads.at("head.b2").values[0] = g;
  AdamState st = init_adam_state(p);
  TrainConfig tc;
  tc.learning_rate = 1e-3;
  optimizer_step(p, grads, st, tc, 1);
  const double delta = p.at("head.b2").values[0] - before;
  EXPECT_NEAR(delta, -tc.learning_rate, tc.learning_rate * 1e-6);
}

TEST(OptimizerStep, DeterministicAcrossRuns) {
  const auto cfg = testsupport::tiny_model();
  const auto run = [&] {
    ModelParams p = init_params(cfg, 3);
    AdamState st = init_adam_state(p);
    TrainConfig tc;
    tc.learning_rate = 1e-2;
    Rng rng(11);
    for (std::size_t step = 1; step <= 20; ++step) {
      ModelParams grads = zero_like(p);
      for (auto& b : grads.blocks) {
        for (auto& v : b.value.values) v = rng.normal(0.0, 1.0);
      }
      optimizer_step(p, grads, st, tc, step);
    }
    return p;
  };
  const ModelParams a = run();
  const ModelParams b = run();
  EXPECT_TRUE(params_equal(a, b));
}

TEST(OptimizerStep, RejectsMismatchedBlocksAndZeroStep) {
  const auto cfg = testsupport::tiny_model();
  ModelParams p = init_params(cfg, 7);
  ModelParams grads = zero_like(p);
  AdamState st = init_adam_state(p);
  TrainConfig tc;
  EXPECT_THROW(optimizer_step(p, grads, st, tc, 0), DataError);
  grads.blocks.pop_back();
  EXPECT_THROW(optimizer_step(p, grads, st, tc, 1), DataError);
}

// --- full loop ----------------------------------------------------------------

namespace {

const testsupport::SyntheticData& small_noiseless() {
  static TempDir dir("train_data");
  static testsupport::SyntheticData data = testsupport::make_synthetic(
      testsupport::tiny_gen(6, {2020, 2021, 2022}, 0.0, 0.0, 41), 1,
      dir.path());
  return data;
}

}  // namespace

TEST(Train, ReportsOneLossPerEpoch) {
  TrainConfig tc;
  tc.epochs = 3;
  tc.batch_size = 4;
  tc.attention_dropout = 0.0;
  tc.learning_rate = 1e-3;
  const auto [params, report] = train(small_noiseless().normalized, tc,
                                      testsupport::tiny_model());
  ASSERT_EQ(report.epoch_loss.size(), 3u);
  EXPECT_GT(report.wall_time_seconds, 0.0);
  EXPECT_EQ(report.train_config.epochs, 3u);
}

TEST(Train, DeterministicGivenSeed) {
  TrainConfig tc;
  tc.epochs = 4;
  tc.batch_size = 4;
  tc.attention_dropout = 0.2;
  tc.learning_rate = 1e-3;
  tc.seed = 5;
  const auto& data = small_noiseless();
  const auto a = train(data.normalized, tc, testsupport::tiny_model());
  const auto b = train(data.normalized, tc, testsupport::tiny_model());
  EXPECT_TRUE(params_equal(a.first, b.first));
  EXPECT_EQ(a.second.epoch_loss, b.second.epoch_loss);
}

TEST(Train, DifferentSeedsDiverge) {
  TrainConfig tc;
  tc.epochs = 2;
  tc.batch_size = 4;
  tc.learning_rate = 1e-3;
  const auto& data = small_noiseless();
  tc.seed = 1;
  const auto a = train(data.normalized, tc, testsupport::tiny_model());
  tc.seed = 2;
  const auto b = train(data.normalized, tc, testsupport::tiny_model());
  EXPECT_FALSE(params_equal(a.first, b.first));
}

TEST(Train, ZeroLearningRateKeepsInitialParams) {
  TrainConfig tc;
  tc.learning_rate = 0.0;
  tc.epochs = 3;
  tc.batch_size = 4;
  tc.attention_dropout = 0.0;
  tc.seed = 9;
  const auto& data = small_noiseless();
  const auto model_cfg = testsupport::tiny_model();
  const auto [params, report] = train(data.normalized, tc, model_cfg);

  ModelConfig eff = model_cfg;
  eff.attention_dropout = tc.attention_dropout;
  const ModelParams init = init_params(eff, derive_seed(tc.seed, "init"));
  EXPECT_TRUE(params_equal(params, init));
  // With no dropout and frozen params, every epoch sees the same loss up to
  // summation order.
  for (double l : report.epoch_loss) {
    EXPECT_NEAR(l, report.epoch_loss.front(),
                1e-12 * (1.0 + std::abs(report.epoch_loss.front())));
  }
}

TEST(Train, TrainingDropoutOverridesModelConfig) {
  TrainConfig tc;
  tc.epochs = 1;
  tc.attention_dropout = 0.25;
  tc.learning_rate = 1e-3;
  auto model_cfg = testsupport::tiny_model();
  model_cfg.attention_dropout = 0.0;
  const auto [params, report] =
      train(small_noiseless().normalized, tc, model_cfg);
  EXPECT_DOUBLE_EQ(params.cfg.attention_dropout, 0.25);
  EXPECT_DOUBLE_EQ(report.model_config.attention_dropout, 0.25);
}

TEST(Train, LossEnvelopeDecreasesOnNoiselessData) {
  TrainConfig tc;
  tc.epochs = 60;
  tc.batch_size = 4;
  tc.learning_rate = 2e-2;
  tc.attention_dropout = 0.0;
  tc.seed = 2;
  const auto [params, report] =
      train(small_noiseless().normalized, tc, testsupport::tiny_model());
  std::vector<double> envelope(report.epoch_loss.size());
  double best = report.epoch_loss.front();
  for (std::size_t i = 0; i < report.epoch_loss.size(); ++i) {
    best = std::min(best, report.epoch_loss[i]);
    envelope[i] = best;
  }
  for (std::size_t i = 1; i < envelope.size(); ++i) {
    EXPECT_LE(envelope[i], envelope[i - 1]);
  }
  EXPECT_LT(envelope.back(), 0.5 * envelope.front());
}

TEST(Train, RejectsEmptySampleSet) {
  TrainConfig tc;
  EXPECT_THROW(train({}, tc, testsupport::tiny_model()), DataError);
}

// --- report artifacts ------------------------------------------------------------

TEST(TrainArtifacts, LossCsvFormat) {
  TempDir dir("losscsv");
  const auto path = dir.path() / "loss.csv";
  write_loss_csv(path.string(), {1.5, 0.75, 0.5});
  const std::string text = read_text_file(path);
  EXPECT_EQ(text, "epoch,loss\n0,1.5\n1,0.75\n2,0.5\n");
}

TEST(TrainArtifacts, ReportJsonRoundTripsViaParser) {
  TempDir dir("report");
  TrainReport report;
  report.epoch_loss = {2.0, 1.0};
  report.wall_time_seconds = 0.125;
  report.checkpoint_path = "model.json";
  report.train_config.epochs = 2;
  report.model_config = testsupport::tiny_model();
  const auto path = dir.path() / "train_report.json";
  write_train_report(path.string(), report);
  const auto j = parse_json_text(read_text_file(path), path.string());
  EXPECT_EQ(j.at("epoch_loss").size(), 2u);
  EXPECT_DOUBLE_EQ(j.at("epoch_loss")[0].get<double>(), 2.0);
  // wall time is in-memory only; the file must be identical across reruns
  EXPECT_FALSE(j.contains("wall_time_seconds"));
  EXPECT_EQ(j.at("checkpoint").get<std::string>(), "model.json");
  EXPECT_EQ(j.at("train_config").at("epochs").get<std::size_t>(), 2u);
  EXPECT_EQ(j.at("model_config").at("patch_h").get<std::size_t>(), 4u);
}

// --- sensitivity grid -------------------------------------------------------------

TEST(SensitivityGrid, EnumeratesAllCellsInOrder) {
  TrainConfig base;
  base.seed = 77;
  base.epochs = 5;
  std::vector<std::pair<double, double>> seen;
  const auto cells = sensitivity_grid(
      {1e-4, 1e-3, 1e-2}, {0.0, 0.1, 0.2}, base,
      [&](const TrainConfig& cfg) -> std::array<double, 3> {
        EXPECT_EQ(cfg.seed, 77u);  // identical seeds across cells
        EXPECT_EQ(cfg.epochs, 5u);
        seen.emplace_back(cfg.learning_rate, cfg.attention_dropout);
        return {cfg.learning_rate * 10.0, 1.0, 2.0};
      });
  ASSERT_EQ(cells.size(), 9u);
  ASSERT_EQ(seen.size(), 9u);
  EXPECT_EQ(seen.front(), (std::pair<double, double>{1e-4, 0.0}));
  EXPECT_EQ(seen.back(), (std::pair<double, double>{1e-2, 0.2}));
  EXPECT_DOUBLE_EQ(cells[0].mean_r2, 1e-3);
  EXPECT_DOUBLE_EQ(cells[4].learning_rate, 1e-3);
  EXPECT_DOUBLE_EQ(cells[4].dropout, 0.1);
}

TEST(SensitivityGrid, RejectsEmptyAxes) {
  TrainConfig base;
  const auto noop = [](const TrainConfig&) -> std::array<double, 3> {
    return {0, 0, 0};
  };
  EXPECT_THROW(sensitivity_grid({}, {0.1}, base, noop), ConfigError);
  EXPECT_THROW(sensitivity_grid({1e-3}, {}, base, noop), ConfigError);
}

TEST(SensitivityGrid, CsvFormat) {
  TempDir dir("sensecsv");
  const auto path = dir.path() / "sensitivity.csv";
  write_sensitivity_csv(path.string(),
                        {{1e-3, 0.1, 0.5, 0.25, 0.125}});
  const std::string text = read_text_file(path);
  EXPECT_EQ(text, "lr,dropout,mean_r2,mean_rmse,mean_mae\n0.001,0.1,0.5,0.25,0.125\n");
}
