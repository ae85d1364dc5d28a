#include "schemex/model.hpp"

#include <cmath>
#include <random>
#include <stdexcept>

namespace schemex {

namespace {

std::string layer_prefix(std::size_t layer) {
  return "encoder.layers." + std::to_string(layer) + ".";
}

}  // namespace

void ModelConfig::validate() const {
  if (vocab_size < special::kCount) throw std::invalid_argument("vocab_size below special count");
  if (hidden_dim == 0 || heads == 0 || hidden_dim % heads != 0) {
    throw std::invalid_argument("hidden_dim must be a positive multiple of heads");
  }
  if (layers == 0 || ffn_dim == 0) throw std::invalid_argument("layers and ffn_dim must be > 0");
  if (max_span_width < 1) throw std::invalid_argument("max_span_width must be >= 1");
  if (max_positions < 1) throw std::invalid_argument("max_positions must be >= 1");
  if (max_count != kMaxCount) throw std::invalid_argument("max_count must be 20");
}

TensorMap init_params(const ModelConfig& cfg) {
  cfg.validate();
  const std::size_t d = cfg.hidden_dim;
  std::mt19937_64 rng(cfg.seed);
  std::normal_distribution<double> normal(0.0, 1.0 / std::sqrt(static_cast<double>(d)));

  TensorMap p;
  // Insertion order fixes the RNG stream; keep it stable.
  auto weight = [&](const std::string& name, std::vector<std::size_t> shape) {
    Tensor t(std::move(shape));
    for (double& x : t.data) x = normal(rng);
    p.emplace(name, std::move(t));
  };
  auto constant = [&](const std::string& name, std::size_t n, double value) {
    p.emplace(name, Tensor::vector(n, value));
  };

  weight("encoder.tok_emb", {cfg.vocab_size, d});
  weight("encoder.pos_emb", {cfg.max_positions, d});
  for (std::size_t l = 0; l < cfg.layers; ++l) {
    const std::string pre = layer_prefix(l);
    constant(pre + "ln1.gain", d, 1.0);
    constant(pre + "ln1.bias", d, 0.0);
    for (const char* proj : {"q", "k", "v", "o"}) {
      weight(pre + "attn.w" + proj, {d, d});
      constant(pre + "attn.b" + proj, d, 0.0);
    }
    constant(pre + "ln2.gain", d, 1.0);
    constant(pre + "ln2.bias", d, 0.0);
    weight(pre + "ffn.w1", {d, cfg.ffn_dim});
    constant(pre + "ffn.b1", cfg.ffn_dim, 0.0);
    weight(pre + "ffn.w2", {cfg.ffn_dim, d});
    constant(pre + "ffn.b2", d, 0.0);
  }
  constant("encoder.ln_final.gain", d, 1.0);
  constant("encoder.ln_final.bias", d, 0.0);

  weight("heads.span.w1", {2 * d, d});
  constant("heads.span.b1", d, 0.0);
  weight("heads.span.w2", {d, d});
  constant("heads.span.b2", d, 0.0);

  weight("heads.count.w1", {d, d});
  constant("heads.count.b1", d, 0.0);
  weight("heads.count.w2", {d, cfg.max_count});
  constant("heads.count.b2", cfg.max_count, 0.0);

  weight("heads.occurrence.table", {cfg.max_count, d});
  weight("heads.occurrence.w1", {d, d});
  constant("heads.occurrence.b1", d, 0.0);
  weight("heads.occurrence.w2", {d, d});
  constant("heads.occurrence.b2", d, 0.0);

  weight("heads.cls.w1", {d, d});
  constant("heads.cls.b1", d, 0.0);
  weight("heads.cls.w2", {d, 1});
  constant("heads.cls.b2", 1, 0.0);
  return p;
}

Model make_model(ModelConfig cfg, Vocabulary vocab) {
  cfg.vocab_size = vocab.size();
  Model model{cfg, std::move(vocab), {}};
  model.params = init_params(cfg);
  return model;
}

bool is_head_parameter(const std::string& name) { return name.starts_with("heads."); }

Var encode(Graph& g, const Model& model, const PromptPlan& plan, PassCounter* counter) {
  const ModelConfig& cfg = model.config;
  const std::size_t len = plan.ids.size();
  if (len > cfg.max_positions) {
    throw Error("SequenceTooLong", "sequence of " + std::to_string(len) +
                                       " tokens exceeds max_positions " +
                                       std::to_string(cfg.max_positions));
  }
  if (counter != nullptr) counter->increment();

  auto param = [&](const std::string& name) { return g.parameter(name, model.params.at(name)); };

  std::vector<std::size_t> ids(plan.ids.size());
  std::vector<std::size_t> positions(len);
  for (std::size_t i = 0; i < len; ++i) {
    if (plan.ids[i] < 0 || static_cast<std::size_t>(plan.ids[i]) >= cfg.vocab_size) {
      throw std::out_of_range("token id outside the vocabulary");
    }
    ids[i] = static_cast<std::size_t>(plan.ids[i]);
    positions[i] = i;
  }
  Var x = ops::add(g, ops::gather_rows(g, param("encoder.tok_emb"), ids),
                   ops::gather_rows(g, param("encoder.pos_emb"), positions));

  for (std::size_t l = 0; l < cfg.layers; ++l) {
    const std::string pre = layer_prefix(l);
    const Var a = ops::layer_norm(g, x, param(pre + "ln1.gain"), param(pre + "ln1.bias"),
                                  kLayerNormEps);
    const Var q = ops::linear(g, a, param(pre + "attn.wq"), param(pre + "attn.bq"));
    const Var k = ops::linear(g, a, param(pre + "attn.wk"), param(pre + "attn.bk"));
    const Var v = ops::linear(g, a, param(pre + "attn.wv"), param(pre + "attn.bv"));
    const Var attended = ops::attention(g, q, k, v, cfg.heads);
    x = ops::add(g, x, ops::linear(g, attended, param(pre + "attn.wo"), param(pre + "attn.bo")));

    const Var b = ops::layer_norm(g, x, param(pre + "ln2.gain"), param(pre + "ln2.bias"),
                                  kLayerNormEps);
    const Var hidden = ops::gelu(g, ops::linear(g, b, param(pre + "ffn.w1"), param(pre + "ffn.b1")));
    x = ops::add(g, x, ops::linear(g, hidden, param(pre + "ffn.w2"), param(pre + "ffn.b2")));
  }
  return ops::layer_norm(g, x, param("encoder.ln_final.gain"), param("encoder.ln_final.bias"),
                         kLayerNormEps);
}

Tensor encode(const Model& model, const PromptPlan& plan, PassCounter* counter) {
  Graph g(false);
  return g.value(encode(g, model, plan, counter));
}

}  // namespace schemex
