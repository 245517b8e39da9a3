#pragma once

// Mini-batch Adam training loop over the fused attention model, plus the
// hyper-parameter sensitivity grid scaffolding.

#include <array>
#include <chrono>
#include <cmath>
#include <cstdint>
#include <functional>
#include <numeric>
#include <string>
#include <vector>

#include "cropnet/checkpoint.hpp"
#include "cropnet/errors.hpp"
#include "cropnet/ingest.hpp"
#include "cropnet/model.hpp"
#include "cropnet/rng.hpp"
#include "cropnet/tensor.hpp"

namespace cropnet {

struct TrainConfig {
  double learning_rate = 1e-4;
  std::size_t epochs = 100;
  std::size_t batch_size = 16;
  double attention_dropout = 0.1;
  std::uint64_t seed = 1;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double epsilon = 1e-8;
};

// learning_rate 0 is accepted as an explicit "null step": the loop runs but
// parameters stay at their initial values. Negative rates are rejected.
inline void validate_train_config(const TrainConfig& cfg) {
  if (!(cfg.learning_rate >= 0.0)) {
    throw ConfigError("learning_rate must be >= 0");
  }
  if (cfg.epochs < 1) {
    throw ConfigError("epochs must be >= 1");
  }
  if (cfg.batch_size < 1) {
    throw ConfigError("batch_size must be >= 1");
  }
  if (!(cfg.attention_dropout >= 0.0 && cfg.attention_dropout < 1.0)) {
    throw ConfigError("attention_dropout must be in [0, 1)");
  }
  if (!(cfg.beta1 >= 0.0 && cfg.beta1 < 1.0) ||
      !(cfg.beta2 >= 0.0 && cfg.beta2 < 1.0)) {
    throw ConfigError("adam betas must be in [0, 1)");
  }
  if (!(cfg.epsilon > 0.0)) {
    throw ConfigError("epsilon must be > 0");
  }
}

inline nlohmann::json train_config_to_json(const TrainConfig& cfg) {
  return nlohmann::json{{"learning_rate", cfg.learning_rate},
                        {"epochs", cfg.epochs},
                        {"batch_size", cfg.batch_size},
                        {"attention_dropout", cfg.attention_dropout},
                        {"seed", cfg.seed},
                        {"beta1", cfg.beta1},
                        {"beta2", cfg.beta2},
                        {"epsilon", cfg.epsilon}};
}

inline TrainConfig train_config_from_json(const nlohmann::json& j) {
  TrainConfig cfg;
  if (j.contains("learning_rate")) cfg.learning_rate = j.at("learning_rate").get<double>();
  if (j.contains("epochs")) cfg.epochs = j.at("epochs").get<std::size_t>();
  if (j.contains("batch_size")) cfg.batch_size = j.at("batch_size").get<std::size_t>();
  if (j.contains("attention_dropout")) cfg.attention_dropout = j.at("attention_dropout").get<double>();
  if (j.contains("seed")) cfg.seed = j.at("seed").get<std::uint64_t>();
  if (j.contains("beta1")) cfg.beta1 = j.at("beta1").get<double>();
  if (j.contains("beta2")) cfg.beta2 = j.at("beta2").get<double>();
  if (j.contains("epsilon")) cfg.epsilon = j.at("epsilon").get<double>();
  validate_train_config(cfg);
  return cfg;
}

inline double mse_loss(const std::vector<double>& y,
                       const std::vector<double>& y_hat) {
  if (y.empty()) {
    throw DataError("mse_loss: empty input");
  }
  if (y.size() != y_hat.size()) {
    throw DataError("mse_loss: size mismatch");
  }
  double acc = 0.0;
  for (std::size_t i = 0; i < y.size(); ++i) {
    const double r = y_hat[i] - y[i];
    acc += r * r;
  }
  return acc / static_cast<double>(y.size());
}

// First and second moment estimates, one tensor per parameter block.
struct AdamState {
  std::vector<Tensor> m;
  std::vector<Tensor> v;
};

inline AdamState init_adam_state(const ModelParams& params) {
  AdamState st;
  st.m.reserve(params.blocks.size());
  st.v.reserve(params.blocks.size());
  for (const auto& b : params.blocks) {
    st.m.push_back(Tensor(b.value.shape));
    st.v.push_back(Tensor(b.value.shape));
  }
  return st;
}

// Bias-corrected Adam update, applied in place. step_index counts from 1.
inline void optimizer_step(ModelParams& params, const ModelParams& grads,
                           AdamState& state, const TrainConfig& cfg,
                           std::size_t step_index) {
  if (step_index < 1) {
    throw DataError("optimizer_step: step_index counts from 1");
  }
  if (grads.blocks.size() != params.blocks.size() ||
      state.m.size() != params.blocks.size()) {
    throw DataError("optimizer_step: block count mismatch");
  }
  const double bc1 = 1.0 - std::pow(cfg.beta1, static_cast<double>(step_index));
  const double bc2 = 1.0 - std::pow(cfg.beta2, static_cast<double>(step_index));
  for (std::size_t i = 0; i < params.blocks.size(); ++i) {
    auto& p = params.blocks[i].value;
    const auto& g = grads.blocks[i].value;
    if (grads.blocks[i].name != params.blocks[i].name ||
        g.shape != p.shape) {
      throw DataError("optimizer_step: gradient block mismatch at " +
                      params.blocks[i].name);
    }
    auto& m = state.m[i].values;
    auto& v = state.v[i].values;
    for (std::size_t k = 0; k < p.values.size(); ++k) {
      m[k] = cfg.beta1 * m[k] + (1.0 - cfg.beta1) * g.values[k];
      v[k] = cfg.beta2 * v[k] + (1.0 - cfg.beta2) * g.values[k] * g.values[k];
      const double m_hat = m[k] / bc1;
      const double v_hat = v[k] / bc2;
      p.values[k] -= cfg.learning_rate * m_hat / (std::sqrt(v_hat) + cfg.epsilon);
    }
  }
}

struct TrainReport {
  std::vector<double> epoch_loss;  // mean training loss per epoch, pre-update
  double wall_time_seconds = 0.0;
  std::string checkpoint_path;  // filled by callers that persist the weights
  TrainConfig train_config;
  ModelConfig model_config;
};

// Trains from a fresh Glorot init. The training dropout rate overrides
// whatever the model config carried, so one knob governs regularisation.
inline std::pair<ModelParams, TrainReport> train(
    const std::vector<FieldSample>& samples, const TrainConfig& cfg,
    const ModelConfig& model_cfg) {
  validate_train_config(cfg);
  if (samples.empty()) {
    throw DataError("train: no samples");
  }
  ModelConfig eff = model_cfg;
  eff.attention_dropout = cfg.attention_dropout;
  validate_model_config(eff);

  const auto t0 = std::chrono::steady_clock::now();
  ModelParams params = init_params(eff, derive_seed(cfg.seed, "init"));
  AdamState state = init_adam_state(params);
  Rng shuffle_rng(derive_seed(cfg.seed, "shuffle"));
  Rng dropout_rng(derive_seed(cfg.seed, "dropout"));
  const ModelDims dims = derived_dims(eff);

  TrainReport report;
  report.train_config = cfg;
  report.model_config = eff;
  report.epoch_loss.reserve(cfg.epochs);

  std::vector<std::size_t> order(samples.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::size_t step = 0;

  for (std::size_t epoch = 0; epoch < cfg.epochs; ++epoch) {
    shuffle_rng.shuffle(order);
    double loss_sum = 0.0;
    for (std::size_t start = 0; start < order.size(); start += cfg.batch_size) {
      const std::size_t end = std::min(order.size(), start + cfg.batch_size);
      std::vector<FieldSample> batch;
      batch.reserve(end - start);
      for (std::size_t i = start; i < end; ++i) {
        batch.push_back(samples[order[i]]);
      }
      std::vector<Tensor> masks;
      if (eff.attention_dropout > 0.0) {
        masks.reserve(batch.size());
        for (const auto& s : batch) {
          masks.push_back(dropout_mask({s.timesteps.size(), dims.d_h},
                                       eff.attention_dropout, dropout_rng));
        }
      }
      const auto [batch_loss, grads] = gradients(params, batch, masks);
      loss_sum += batch_loss * static_cast<double>(batch.size());
      ++step;
      optimizer_step(params, grads, state, cfg, step);
    }
    report.epoch_loss.push_back(loss_sum / static_cast<double>(order.size()));
  }

  const auto t1 = std::chrono::steady_clock::now();
  report.wall_time_seconds =
      std::chrono::duration<double>(t1 - t0).count();
  return {std::move(params), std::move(report)};
}

inline void write_loss_csv(const std::string& path,
                           const std::vector<double>& epoch_loss) {
  std::string out = "epoch,loss\n";
  for (std::size_t i = 0; i < epoch_loss.size(); ++i) {
    out += std::to_string(i);
    out += ',';
    out += fmt_double(epoch_loss[i]);
    out += '\n';
  }
  atomic_write_file(path, out);
}

// Wall time stays out of the file on purpose: reruns with the same config
// must serialize identically, byte for byte.
inline void write_train_report(const std::string& path,
                               const TrainReport& report) {
  nlohmann::json j{{"epoch_loss", report.epoch_loss},
                   {"checkpoint", report.checkpoint_path},
                   {"train_config", train_config_to_json(report.train_config)},
                   {"model_config", model_config_to_json(report.model_config)}};
  atomic_write_file(path, j.dump(2) + "\n");
}

// One hyper-parameter grid cell: the configuration tried and the mean
// held-out metrics produced by whatever evaluation protocol the caller wired.
struct SensitivityCell {
  double learning_rate = 0.0;
  double dropout = 0.0;
  double mean_r2 = 0.0;
  double mean_rmse = 0.0;
  double mean_mae = 0.0;
};

// Returns (mean_r2, mean_rmse, mean_mae) for a candidate configuration. The
// protocol (fold layout, seeds) must be identical across calls so that cells
// are comparable.
using CellEvaluator = std::function<std::array<double, 3>(const TrainConfig&)>;

inline std::vector<SensitivityCell> sensitivity_grid(
    const std::vector<double>& learning_rates,
    const std::vector<double>& dropouts, const TrainConfig& base,
    const CellEvaluator& evaluate) {
  if (learning_rates.empty() || dropouts.empty()) {
    throw ConfigError("sensitivity_grid: grid axes must be non-empty");
  }
  std::vector<SensitivityCell> cells;
  cells.reserve(learning_rates.size() * dropouts.size());
  for (const double lr : learning_rates) {
    for (const double d : dropouts) {
      TrainConfig cfg = base;
      cfg.learning_rate = lr;
      cfg.attention_dropout = d;
      validate_train_config(cfg);
      const auto metrics = evaluate(cfg);
      cells.push_back({lr, d, metrics[0], metrics[1], metrics[2]});
    }
  }
  return cells;
}

inline void write_sensitivity_csv(const std::string& path,
                                  const std::vector<SensitivityCell>& cells) {
  std::string out = "lr,dropout,mean_r2,mean_rmse,mean_mae\n";
  for (const auto& c : cells) {
    out += fmt_double(c.learning_rate);
    out += ',';
    out += fmt_double(c.dropout);
    out += ',';
    out += fmt_double(c.mean_r2);
    out += ',';
    out += fmt_double(c.mean_rmse);
    out += ',';
    out += fmt_double(c.mean_mae);
    out += '\n';
  }
  atomic_write_file(path, out);
}

}  // namespace cropnet
