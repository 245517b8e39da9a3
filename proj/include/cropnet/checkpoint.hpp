#pragma once

// Parameter checkpoint: model config, fitted normalizer, and every parameter
// block as a shape-tagged flat array. JSON for inspectability; numeric values
// round-trip exactly.

#include "cropnet/ingest.hpp"
#include "cropnet/model.hpp"

namespace cropnet {

inline json model_config_to_json(const ModelConfig& cfg) {
  json j;
  j["patch_h"] = cfg.patch_h;
  j["patch_w"] = cfg.patch_w;
  j["conv_channels"] = cfg.conv_channels;
  j["mlp_hidden"] = cfg.mlp_hidden;
  j["embed_structured"] = cfg.embed_structured;
  j["attention_dim"] = cfg.attention_dim;
  j["head_hidden"] = cfg.head_hidden;
  j["attention_dropout"] = cfg.attention_dropout;
  j["use_satellite"] = cfg.use_satellite;
  j["use_climate"] = cfg.use_climate;
  j["use_soil"] = cfg.use_soil;
  return j;
}

inline ModelConfig model_config_from_json(const json& j, const std::string& context) {
  ModelConfig cfg;
  cfg.patch_h = detail::require_key(j, "patch_h", context).get<std::size_t>();
  cfg.patch_w = detail::require_key(j, "patch_w", context).get<std::size_t>();
  cfg.conv_channels =
      detail::require_key(j, "conv_channels", context).get<std::array<std::size_t, 3>>();
  cfg.mlp_hidden = detail::require_key(j, "mlp_hidden", context).get<std::array<std::size_t, 2>>();
  cfg.embed_structured = detail::require_key(j, "embed_structured", context).get<std::size_t>();
  cfg.attention_dim = detail::require_key(j, "attention_dim", context).get<std::size_t>();
  cfg.head_hidden = detail::require_key(j, "head_hidden", context).get<std::size_t>();
  cfg.attention_dropout = detail::require_key(j, "attention_dropout", context).get<double>();
  cfg.use_satellite = detail::require_key(j, "use_satellite", context).get<bool>();
  cfg.use_climate = detail::require_key(j, "use_climate", context).get<bool>();
  cfg.use_soil = detail::require_key(j, "use_soil", context).get<bool>();
  validate_model_config(cfg);
  return cfg;
}

inline json normalizer_to_json(const Normalizer& norm) {
  json j = json::object();
  for (const auto& [name, range] : norm.ranges) {
    j[name] = {{"min", range.min}, {"max", range.max}};
  }
  return j;
}

inline Normalizer normalizer_from_json(const json& j, const std::string& context) {
  Normalizer norm;
  for (auto it = j.begin(); it != j.end(); ++it) {
    FeatureRange r;
    r.min = detail::require_key(it.value(), "min", context).get<double>();
    r.max = detail::require_key(it.value(), "max", context).get<double>();
    if (r.min > r.max) throw DataError("feature '" + it.key() + "' has min > max in " + context);
    norm.ranges[it.key()] = r;
  }
  return norm;
}

struct Checkpoint {
  ModelParams params;  // carries the ModelConfig
  Normalizer normalizer;
};

inline void write_checkpoint(const std::filesystem::path& path, const Checkpoint& ckpt) {
  json j;
  j["model"] = model_config_to_json(ckpt.params.cfg);
  j["normalizer"] = normalizer_to_json(ckpt.normalizer);
  json blocks = json::array();
  for (const auto& b : ckpt.params.blocks) {
    blocks.push_back({{"name", b.name}, {"shape", b.value.shape}, {"values", b.value.values}});
  }
  j["params"] = blocks;
  atomic_write_file(path, j.dump() + "\n");
}

inline Checkpoint parse_checkpoint(const std::filesystem::path& path) {
  const std::string context = path.string();
  const json j = parse_json_text(read_text_file(path), context);
  Checkpoint ckpt;
  ckpt.params.cfg = model_config_from_json(detail::require_key(j, "model", context), context);
  ckpt.normalizer = normalizer_from_json(detail::require_key(j, "normalizer", context), context);
  for (const json& b : detail::require_key(j, "params", context)) {
    ParamBlock block;
    block.name = detail::require_key(b, "name", context).get<std::string>();
    auto shape = detail::require_key(b, "shape", context).get<std::vector<std::size_t>>();
    auto values = detail::require_key(b, "values", context).get<std::vector<double>>();
    block.value = Tensor(std::move(shape), std::move(values));  // validates the count
    if (!block.value.all_finite()) {
      throw DataError("non-finite values in block '" + block.name + "' of " + context);
    }
    ckpt.params.blocks.push_back(std::move(block));
  }
  // structural consistency with the config
  const ModelParams reference = init_params(ckpt.params.cfg, 0);
  if (reference.blocks.size() != ckpt.params.blocks.size()) {
    throw DataError("checkpoint has " + std::to_string(ckpt.params.blocks.size()) +
                    " blocks, config implies " + std::to_string(reference.blocks.size()) + " in " +
                    context);
  }
  for (std::size_t i = 0; i < reference.blocks.size(); ++i) {
    if (reference.blocks[i].name != ckpt.params.blocks[i].name ||
        reference.blocks[i].value.shape != ckpt.params.blocks[i].value.shape) {
      throw DataError("checkpoint block '" + ckpt.params.blocks[i].name +
                      "' does not match the model config in " + context);
    }
  }
  return ckpt;
}

}  // namespace cropnet
