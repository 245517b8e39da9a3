#pragma once

// The network: per-timestep CNN over satellite patches and MLP over
// structured (climate+soil) features, concatenated into h_t, scored by a
// tanh/context-vector temporal attention, fused as sum_t alpha_t * h_t, and
// regressed to yield by a small head. Every gradient is analytic.

#include <array>
#include <optional>
#include <string_view>

#include "cropnet/errors.hpp"
#include "cropnet/ingest.hpp"
#include "cropnet/rng.hpp"
#include "cropnet/tensor.hpp"

namespace cropnet {

struct ModelConfig {
  std::size_t patch_h = 8;
  std::size_t patch_w = 8;
  std::array<std::size_t, 3> conv_channels = {8, 16, 32};  // 3x3 same, relu, maxpool each
  std::array<std::size_t, 2> mlp_hidden = {32, 32};
  std::size_t embed_structured = 16;  // d_e
  std::size_t attention_dim = 32;     // d_a
  std::size_t head_hidden = 32;
  double attention_dropout = 0.1;
  // modality switches (ablation support)
  bool use_satellite = true;
  bool use_climate = true;
  bool use_soil = true;
};

/// Widths implied by a config: d_s (satellite embedding), the structured
/// input width, d_e, and d_h = d_s + d_e.
struct ModelDims {
  std::size_t d_s = 0;
  std::size_t structured_in = 0;
  std::size_t d_e = 0;
  std::size_t d_h = 0;
};

inline ModelDims derived_dims(const ModelConfig& cfg) {
  ModelDims d;
  if (cfg.use_satellite) d.d_s = cfg.conv_channels[2];
  d.structured_in = (cfg.use_climate ? 3 : 0) + (cfg.use_soil ? 3 : 0);
  if (d.structured_in > 0) d.d_e = cfg.embed_structured;
  d.d_h = d.d_s + d.d_e;
  return d;
}

inline void validate_model_config(const ModelConfig& cfg) {
  if (cfg.patch_h < 2 || cfg.patch_w < 2) throw ConfigError("patch dims must be >= 2");
  for (std::size_t c : cfg.conv_channels) {
    if (c == 0) throw ConfigError("conv channels must be positive");
  }
  for (std::size_t hdim : cfg.mlp_hidden) {
    if (hdim == 0) throw ConfigError("mlp hidden dims must be positive");
  }
  if (cfg.embed_structured == 0 || cfg.attention_dim == 0 || cfg.head_hidden == 0) {
    throw ConfigError("embedding, attention and head dims must be positive");
  }
  if (cfg.attention_dropout < 0.0 || cfg.attention_dropout >= 1.0) {
    throw ConfigError("attention_dropout must be in [0,1)");
  }
  if (derived_dims(cfg).d_h == 0) {
    throw ConfigError("at least one modality must be enabled");
  }
}

struct ParamBlock {
  std::string name;
  Tensor value;
};

struct ModelParams {
  ModelConfig cfg;
  std::vector<ParamBlock> blocks;

  bool has(std::string_view name) const {
    for (const auto& b : blocks) {
      if (b.name == name) return true;
    }
    return false;
  }
  Tensor& at(std::string_view name) {
    for (auto& b : blocks) {
      if (b.name == name) return b.value;
    }
    throw DataError("unknown parameter block '" + std::string(name) + "'");
  }
  const Tensor& at(std::string_view name) const {
    for (const auto& b : blocks) {
      if (b.name == name) return b.value;
    }
    throw DataError("unknown parameter block '" + std::string(name) + "'");
  }
};

/// Glorot-uniform weights (±sqrt(6/(fan_in+fan_out))), zero biases. Each block
/// draws from its own seed stream, so block values depend only on (seed, name).
inline ModelParams init_params(const ModelConfig& cfg, std::uint64_t seed) {
  validate_model_config(cfg);
  const ModelDims dims = derived_dims(cfg);
  ModelParams p;
  p.cfg = cfg;
  auto add_uniform = [&](const std::string& name, std::vector<std::size_t> shape,
                         std::size_t fan_in, std::size_t fan_out) {
    Tensor t(std::move(shape));
    Rng rng(derive_seed(seed, name));
    const double bound = std::sqrt(6.0 / static_cast<double>(fan_in + fan_out));
    for (double& v : t.values) v = rng.uniform(-bound, bound);
    p.blocks.push_back({name, std::move(t)});
  };
  auto add_zeros = [&](const std::string& name, std::vector<std::size_t> shape) {
    p.blocks.push_back({name, Tensor(std::move(shape))});
  };

  if (cfg.use_satellite) {
    std::size_t cin = 3;
    for (std::size_t i = 0; i < 3; ++i) {
      const std::size_t cout = cfg.conv_channels[i];
      const std::string tag = "conv" + std::to_string(i + 1);
      add_uniform(tag + ".kernels", {3, 3, cin, cout}, 9 * cin, 9 * cout);
      add_zeros(tag + ".bias", {cout});
      cin = cout;
    }
  }
  if (dims.structured_in > 0) {
    add_uniform("mlp.w1", {cfg.mlp_hidden[0], dims.structured_in}, dims.structured_in,
                cfg.mlp_hidden[0]);
    add_zeros("mlp.b1", {cfg.mlp_hidden[0]});
    add_uniform("mlp.w2", {cfg.mlp_hidden[1], cfg.mlp_hidden[0]}, cfg.mlp_hidden[0],
                cfg.mlp_hidden[1]);
    add_zeros("mlp.b2", {cfg.mlp_hidden[1]});
    add_uniform("mlp.w3", {dims.d_e, cfg.mlp_hidden[1]}, cfg.mlp_hidden[1], dims.d_e);
    add_zeros("mlp.b3", {dims.d_e});
  }
  add_uniform("attn.W", {cfg.attention_dim, dims.d_h}, dims.d_h, cfg.attention_dim);
  add_zeros("attn.b", {cfg.attention_dim});
  add_uniform("attn.u", {cfg.attention_dim}, cfg.attention_dim, 1);
  add_uniform("head.w1", {cfg.head_hidden, dims.d_h}, dims.d_h, cfg.head_hidden);
  add_zeros("head.b1", {cfg.head_hidden});
  add_uniform("head.w2", {1, cfg.head_hidden}, cfg.head_hidden, 1);
  add_zeros("head.b2", {1});
  return p;
}

/// Same block structure as `p`, all values zero.
inline ModelParams zero_like(const ModelParams& p) {
  ModelParams z;
  z.cfg = p.cfg;
  z.blocks.reserve(p.blocks.size());
  for (const auto& b : p.blocks) z.blocks.push_back({b.name, Tensor(b.value.shape)});
  return z;
}

// --- dense layer helpers --------------------------------------------------------

/// y = W x + b with W [out x in].
inline Tensor dense(const Tensor& W, const Tensor& b, const Tensor& x) {
  require_rank(W, 2, "dense weight");
  require_rank(x, 1, "dense input");
  const std::size_t out = W.shape[0], in = W.shape[1];
  if (x.numel() != in || b.numel() != out) {
    throw DataError("dense shape mismatch: W " + shape_to_string(W.shape) + ", x " +
                    shape_to_string(x.shape));
  }
  Tensor y({out});
  for (std::size_t o = 0; o < out; ++o) {
    double acc = b.values[o];
    const double* wrow = W.values.data() + o * in;
    for (std::size_t i = 0; i < in; ++i) acc += wrow[i] * x.values[i];
    y.values[o] = acc;
  }
  return y;
}

/// Accumulates gW and gb, returns grad w.r.t. x.
inline Tensor dense_backward(const Tensor& W, const Tensor& x, const Tensor& gout, Tensor& gW,
                             Tensor& gb) {
  const std::size_t out = W.shape[0], in = W.shape[1];
  Tensor gx({in});
  for (std::size_t o = 0; o < out; ++o) {
    const double g = gout.values[o];
    gb.values[o] += g;
    const double* wrow = W.values.data() + o * in;
    double* gwrow = gW.values.data() + o * in;
    for (std::size_t i = 0; i < in; ++i) {
      gwrow[i] += g * x.values[i];
      gx.values[i] += g * wrow[i];
    }
  }
  return gx;
}

// --- branches ----------------------------------------------------------------------

struct ConvLayerCache {
  Tensor input;      // layer input
  Tensor pre_act;    // conv output before relu
  Tensor post_act;   // after relu, before pooling
  Tensor pooled;
  std::vector<std::size_t> argmax;
};

struct CnnCache {
  std::array<ConvLayerCache, 3> layers;
};

/// conv3x3(same) -> relu -> maxpool2x2, three times, then global average
/// pooling to a [d_s] embedding.
inline Tensor cnn_branch(const ModelParams& p, const Tensor& patch, CnnCache* cache = nullptr) {
  require_rank(patch, 3, "cnn_branch patch");
  if (patch.shape[0] != p.cfg.patch_h || patch.shape[1] != p.cfg.patch_w ||
      patch.shape[2] != 3) {
    throw DataError("patch shape " + shape_to_string(patch.shape) + " does not match model (" +
                    std::to_string(p.cfg.patch_h) + "x" + std::to_string(p.cfg.patch_w) + "x3)");
  }
  Tensor x = patch;
  for (std::size_t i = 0; i < 3; ++i) {
    const std::string tag = "conv" + std::to_string(i + 1);
    Tensor pre = conv2d(x, p.at(tag + ".kernels"), p.at(tag + ".bias"), Padding::Same);
    Tensor post = activation(pre, Act::Relu);
    std::vector<std::size_t> argmax;
    Tensor pooled = maxpool2x2_with_argmax(post, argmax);
    if (cache) {
      cache->layers[i] = {std::move(x), std::move(pre), post, pooled, std::move(argmax)};
    }
    x = std::move(pooled);
  }
  return global_avg_pool(x);
}

inline void cnn_branch_backward(const ModelParams& p, const CnnCache& cache,
                                const Tensor& g_embed, ModelParams& grads) {
  Tensor g = global_avg_pool_backward(cache.layers[2].pooled.shape, g_embed);
  for (std::size_t i = 3; i-- > 0;) {
    const ConvLayerCache& layer = cache.layers[i];
    g = maxpool2x2_backward(layer.post_act.shape, layer.argmax, g);
    g = activation_backward(layer.pre_act, layer.post_act, Act::Relu, g);
    const std::string tag = "conv" + std::to_string(i + 1);
    auto [gin, gk, gb] = conv2d_backward(layer.input, p.at(tag + ".kernels"), g, Padding::Same);
    Tensor& gkdst = grads.at(tag + ".kernels");
    for (std::size_t j = 0; j < gk.numel(); ++j) gkdst.values[j] += gk.values[j];
    Tensor& gbdst = grads.at(tag + ".bias");
    for (std::size_t j = 0; j < gb.numel(); ++j) gbdst.values[j] += gb.values[j];
    g = std::move(gin);
  }
}

struct MlpCache {
  Tensor x, z1, a1, z2, a2;
};

/// Two relu hidden layers then a linear projection to d_e.
inline Tensor mlp_branch(const ModelParams& p, const Tensor& env, MlpCache* cache = nullptr) {
  require_rank(env, 1, "mlp_branch input");
  const std::size_t want = derived_dims(p.cfg).structured_in;
  if (env.numel() != want) {
    throw DataError("structured input width " + std::to_string(env.numel()) + " != expected " +
                    std::to_string(want));
  }
  Tensor z1 = dense(p.at("mlp.w1"), p.at("mlp.b1"), env);
  Tensor a1 = activation(z1, Act::Relu);
  Tensor z2 = dense(p.at("mlp.w2"), p.at("mlp.b2"), a1);
  Tensor a2 = activation(z2, Act::Relu);
  Tensor out = dense(p.at("mlp.w3"), p.at("mlp.b3"), a2);
  if (cache) *cache = {env, std::move(z1), a1, std::move(z2), a2};
  return out;
}

inline void mlp_branch_backward(const ModelParams& p, const MlpCache& c, const Tensor& g_embed,
                                ModelParams& grads) {
  Tensor ga2 = dense_backward(p.at("mlp.w3"), c.a2, g_embed, grads.at("mlp.w3"),
                              grads.at("mlp.b3"));
  Tensor gz2 = activation_backward(c.z2, c.a2, Act::Relu, ga2);
  Tensor ga1 = dense_backward(p.at("mlp.w2"), c.a1, gz2, grads.at("mlp.w2"), grads.at("mlp.b2"));
  Tensor gz1 = activation_backward(c.z1, c.a1, Act::Relu, ga1);
  dense_backward(p.at("mlp.w1"), c.x, gz1, grads.at("mlp.w1"), grads.at("mlp.b1"));
}

// --- attention and fusion -------------------------------------------------------------

struct AttentionTrace {
  Tensor alpha;             // [T], positive, sums to 1
  std::vector<int> months;  // calendar month per timestep (when known)
};

struct AttentionCache {
  Tensor h_used;            // rows after dropout scaling (equals h when no mask)
  std::vector<Tensor> e;    // per-t tanh(W h_t + b)
  Tensor scores;            // [T]
  Tensor alpha;             // [T]
};

/// e_t = tanh(W h_t + b); score_t = e_t . u; alpha = softmax(scores).
/// `mask` (inverted-dropout scaling, [T x d_h]) is applied to the rows used
/// for scoring only.
inline Tensor attention(const ModelParams& p, const Tensor& h, const Tensor* mask = nullptr,
                        AttentionCache* cache = nullptr) {
  require_rank(h, 2, "attention input");
  const std::size_t T = h.shape[0], dh = h.shape[1];
  if (T == 0) throw DataError("attention needs at least one timestep");
  if (mask && mask->shape != h.shape) {
    throw DataError("dropout mask shape " + shape_to_string(mask->shape) + " != h " +
                    shape_to_string(h.shape));
  }
  Tensor h_used = h;
  if (mask) {
    for (std::size_t i = 0; i < h_used.numel(); ++i) h_used.values[i] *= mask->values[i];
  }
  const Tensor& W = p.at("attn.W");
  const Tensor& b = p.at("attn.b");
  const Tensor& u = p.at("attn.u");
  if (W.shape[1] != dh) {
    throw DataError("attention expects width " + std::to_string(W.shape[1]) + ", got " +
                    std::to_string(dh));
  }
  Tensor scores({T});
  std::vector<Tensor> es;
  es.reserve(T);
  for (std::size_t t = 0; t < T; ++t) {
    Tensor row({dh});
    std::copy_n(h_used.values.data() + t * dh, dh, row.values.data());
    Tensor e = activation(dense(W, b, row), Act::Tanh);
    double s = 0.0;
    for (std::size_t k = 0; k < e.numel(); ++k) s += e.values[k] * u.values[k];
    scores.values[t] = s;
    es.push_back(std::move(e));
  }
  Tensor alpha = softmax(scores);
  if (cache) *cache = {std::move(h_used), std::move(es), std::move(scores), alpha};
  return alpha;
}

/// Returns grad w.r.t. h (the clean, pre-dropout rows).
inline Tensor attention_backward(const ModelParams& p, const AttentionCache& c,
                                 const Tensor* mask, const Tensor& g_alpha, ModelParams& grads) {
  const std::size_t T = c.h_used.shape[0], dh = c.h_used.shape[1];
  const Tensor& W = p.at("attn.W");
  const Tensor& u = p.at("attn.u");
  Tensor gscores = softmax_backward(c.alpha, g_alpha);
  Tensor gh({T, dh});
  Tensor& gW = grads.at("attn.W");
  Tensor& gb = grads.at("attn.b");
  Tensor& gu = grads.at("attn.u");
  for (std::size_t t = 0; t < T; ++t) {
    const double gs = gscores.values[t];
    const Tensor& e = c.e[t];
    Tensor ge({e.numel()});
    for (std::size_t k = 0; k < e.numel(); ++k) {
      gu.values[k] += gs * e.values[k];
      ge.values[k] = gs * u.values[k];
    }
    // tanh backward via its output
    Tensor gz = activation_backward(e, e, Act::Tanh, ge);
    Tensor row({dh});
    std::copy_n(c.h_used.values.data() + t * dh, dh, row.values.data());
    Tensor grow = dense_backward(W, row, gz, gW, gb);
    for (std::size_t i = 0; i < dh; ++i) {
      const double scale = mask ? mask->values[t * dh + i] : 1.0;
      gh.values[t * dh + i] = grow.values[i] * scale;
    }
  }
  return gh;
}

/// V = sum_t alpha_t * h_t.
inline Tensor fuse(const Tensor& h, const Tensor& alpha) {
  require_rank(h, 2, "fuse input");
  require_rank(alpha, 1, "fuse weights");
  const std::size_t T = h.shape[0], dh = h.shape[1];
  if (alpha.numel() != T) {
    throw DataError("fuse: " + std::to_string(alpha.numel()) + " weights for " +
                    std::to_string(T) + " timesteps");
  }
  Tensor v({dh});
  for (std::size_t t = 0; t < T; ++t) {
    const double a = alpha.values[t];
    for (std::size_t i = 0; i < dh; ++i) v.values[i] += a * h.values[t * dh + i];
  }
  return v;
}

inline std::pair<Tensor, Tensor> fuse_backward(const Tensor& h, const Tensor& alpha,
                                               const Tensor& gv) {
  const std::size_t T = h.shape[0], dh = h.shape[1];
  Tensor gh({T, dh});
  Tensor galpha({T});
  for (std::size_t t = 0; t < T; ++t) {
    double acc = 0.0;
    for (std::size_t i = 0; i < dh; ++i) {
      gh.values[t * dh + i] = alpha.values[t] * gv.values[i];
      acc += h.values[t * dh + i] * gv.values[i];
    }
    galpha.values[t] = acc;
  }
  return {std::move(gh), std::move(galpha)};
}

// --- full forward / backward ------------------------------------------------------------

enum class Mode { Train, Infer };

namespace detail {

/// Structured features of one timestep under the config's modality switches.
inline Tensor env_vector(const ModelConfig& cfg, const Timestep& t) {
  if (t.env.size() != 6) {
    throw DataError("timestep environment vector must have 6 entries, got " +
                    std::to_string(t.env.size()));
  }
  std::vector<double> vals;
  if (cfg.use_climate) vals.insert(vals.end(), t.env.begin(), t.env.begin() + 3);
  if (cfg.use_soil) vals.insert(vals.end(), t.env.begin() + 3, t.env.end());
  const std::size_t n = vals.size();
  return Tensor({n}, std::move(vals));
}

struct ForwardCache {
  std::vector<CnnCache> cnn;
  std::vector<MlpCache> mlp;
  Tensor h;  // [T x d_h]
  AttentionCache attn;
  Tensor fused;
  Tensor head_z1, head_a1;
  double y_hat = 0.0;
};

inline double forward_sample(const ModelParams& p, const FieldSample& sample, const Tensor* mask,
                             ForwardCache* cache) {
  const ModelDims dims = derived_dims(p.cfg);
  const std::size_t T = sample.timesteps.size();
  if (T == 0) throw DataError("sample has no timesteps");
  Tensor h({T, dims.d_h});
  if (cache) {
    cache->cnn.resize(p.cfg.use_satellite ? T : 0);
    cache->mlp.resize(dims.structured_in > 0 ? T : 0);
  }
  for (std::size_t t = 0; t < T; ++t) {
    std::size_t off = 0;
    if (p.cfg.use_satellite) {
      Tensor emb = cnn_branch(p, sample.timesteps[t].patch.bands,
                              cache ? &cache->cnn[t] : nullptr);
      std::copy_n(emb.values.data(), dims.d_s, h.values.data() + t * dims.d_h);
      off = dims.d_s;
    }
    if (dims.structured_in > 0) {
      Tensor env = env_vector(p.cfg, sample.timesteps[t]);
      Tensor emb = mlp_branch(p, env, cache ? &cache->mlp[t] : nullptr);
      std::copy_n(emb.values.data(), dims.d_e, h.values.data() + t * dims.d_h + off);
    }
  }
  AttentionCache attn_cache;
  Tensor alpha = attention(p, h, mask, &attn_cache);
  Tensor fused = fuse(h, alpha);
  Tensor z1 = dense(p.at("head.w1"), p.at("head.b1"), fused);
  Tensor a1 = activation(z1, Act::Relu);
  const double y_hat = dense(p.at("head.w2"), p.at("head.b2"), a1).values[0];
  if (cache) {
    cache->h = std::move(h);
    cache->attn = std::move(attn_cache);
    cache->fused = std::move(fused);
    cache->head_z1 = std::move(z1);
    cache->head_a1 = std::move(a1);
    cache->y_hat = y_hat;
  }
  return y_hat;
}

inline void backward_sample(const ModelParams& p, const FieldSample& sample,
                            const ForwardCache& cache, const Tensor* mask, double g_yhat,
                            ModelParams& grads) {
  const ModelDims dims = derived_dims(p.cfg);
  const std::size_t T = sample.timesteps.size();
  // head
  Tensor gy({1});
  gy.values[0] = g_yhat;
  Tensor ga1 = dense_backward(p.at("head.w2"), cache.head_a1, gy, grads.at("head.w2"),
                              grads.at("head.b2"));
  Tensor gz1 = activation_backward(cache.head_z1, cache.head_a1, Act::Relu, ga1);
  Tensor gfused = dense_backward(p.at("head.w1"), cache.fused, gz1, grads.at("head.w1"),
                                 grads.at("head.b1"));
  // fusion and attention
  auto [gh, galpha] = fuse_backward(cache.h, cache.attn.alpha, gfused);
  Tensor gh_attn = attention_backward(p, cache.attn, mask, galpha, grads);
  for (std::size_t i = 0; i < gh.numel(); ++i) gh.values[i] += gh_attn.values[i];
  // branches
  for (std::size_t t = 0; t < T; ++t) {
    if (p.cfg.use_satellite) {
      Tensor g({dims.d_s});
      std::copy_n(gh.values.data() + t * dims.d_h, dims.d_s, g.values.data());
      cnn_branch_backward(p, cache.cnn[t], g, grads);
    }
    if (dims.structured_in > 0) {
      Tensor g({dims.d_e});
      std::copy_n(gh.values.data() + t * dims.d_h + dims.d_s, dims.d_e, g.values.data());
      mlp_branch_backward(p, cache.mlp[t], g, grads);
    }
  }
}

}  // namespace detail

/// Full forward pass. Train mode draws an inverted-dropout mask over the
/// attention input rows from `rng`; infer mode is a pure function of
/// (params, sample).
inline std::pair<double, AttentionTrace> predict(const ModelParams& p, const FieldSample& sample,
                                                 Mode mode, Rng* rng = nullptr) {
  std::optional<Tensor> mask;
  if (mode == Mode::Train && p.cfg.attention_dropout > 0.0) {
    if (!rng) throw DataError("train-mode predict with dropout requires an rng");
    const ModelDims dims = derived_dims(p.cfg);
    mask = dropout_mask({sample.timesteps.size(), dims.d_h}, p.cfg.attention_dropout, *rng);
  }
  detail::ForwardCache cache;
  const double y_hat =
      detail::forward_sample(p, sample, mask ? &*mask : nullptr, &cache);
  AttentionTrace trace;
  trace.alpha = cache.attn.alpha;
  trace.months.reserve(sample.timesteps.size());
  for (const auto& t : sample.timesteps) trace.months.push_back(t.month);
  return {y_hat, std::move(trace)};
}

/// Mean squared error over the batch and exact analytic gradients for every
/// parameter block. `dropout_masks` holds one [T x d_h] mask per sample (empty
/// for none) so callers — including finite-difference checks — control the
/// stochasticity.
inline std::pair<double, ModelParams> gradients(const ModelParams& p,
                                                const std::vector<FieldSample>& batch,
                                                const std::vector<Tensor>& dropout_masks = {}) {
  if (batch.empty()) throw DataError("gradients: empty batch");
  if (!dropout_masks.empty() && dropout_masks.size() != batch.size()) {
    throw DataError("gradients: " + std::to_string(dropout_masks.size()) + " masks for " +
                    std::to_string(batch.size()) + " samples");
  }
  ModelParams grads = zero_like(p);
  double loss = 0.0;
  const double inv_n = 1.0 / static_cast<double>(batch.size());
  for (std::size_t i = 0; i < batch.size(); ++i) {
    const Tensor* mask = dropout_masks.empty() ? nullptr : &dropout_masks[i];
    detail::ForwardCache cache;
    const double y_hat = detail::forward_sample(p, batch[i], mask, &cache);
    const double residual = y_hat - batch[i].yield_t_ha;
    loss += residual * residual * inv_n;
    detail::backward_sample(p, batch[i], cache, mask, 2.0 * residual * inv_n, grads);
  }
  return {loss, std::move(grads)};
}

}  // namespace cropnet
