#include "wmg/denoiser.hpp"

namespace wmg {

void DenoiserConfig::validate() const {
  if (layers <= 0 || channels <= 0 || heads <= 0 || embed_dim <= 0 || cluster_count <= 0 ||
      cluster_embed_dim <= 0)
    throw ArgumentError("denoiser config entries must be positive");
  if (channels % heads != 0) throw ArgumentError("channels must be divisible by heads");
  if (embed_dim % 2 != 0) throw ArgumentError("embed_dim must be even");
}

ParameterLayout::ParameterLayout(const DenoiserConfig& cfg) {
  cfg.validate();
  const Eigen::Index ch = cfg.channels;
  const Eigen::Index e = cfg.embed_dim;
  in_w = add("input.weight", kInputChannels, ch);
  in_b = add("input.bias", 1, ch);
  cluster_emb = add("cluster_embedding", cfg.cluster_count, cfg.cluster_embed_dim);
  side_w = add("cluster_embedding.projection", cfg.cluster_embed_dim, ch);
  step_w1 = add("step_embedding.weight", e, e);
  step_b1 = add("step_embedding.bias", 1, e);
  for (int l = 0; l < cfg.layers; ++l) {
    const std::string pre = "block" + std::to_string(l) + ".";
    Layer L{};
    L.step_w = add(pre + "step.weight", e, ch);
    L.step_b = add(pre + "step.bias", 1, ch);
    L.q_w = add(pre + "attn.q.weight", ch, ch);
    L.q_b = add(pre + "attn.q.bias", 1, ch);
    L.k_w = add(pre + "attn.k.weight", ch, ch);
    L.k_b = add(pre + "attn.k.bias", 1, ch);
    L.v_w = add(pre + "attn.v.weight", ch, ch);
    L.v_b = add(pre + "attn.v.bias", 1, ch);
    L.o_w = add(pre + "attn.out.weight", ch, ch);
    L.o_b = add(pre + "attn.out.bias", 1, ch);
    L.mid_w = add(pre + "gate.weight", ch, 2 * ch);
    L.mid_b = add(pre + "gate.bias", 1, 2 * ch);
    L.out_w = add(pre + "output.weight", ch, 2 * ch);
    L.out_b = add(pre + "output.bias", 1, 2 * ch);
    layers.push_back(L);
  }
  head_w1 = add("head.hidden.weight", ch, ch);
  head_b1 = add("head.hidden.bias", 1, ch);
  head_w2 = add("head.output.weight", ch, 1);
  head_b2 = add("head.output.bias", 1, 1);
}

std::size_t ParameterLayout::add(std::string name, Eigen::Index rows, Eigen::Index cols) {
  tensors_.push_back(TensorInfo{std::move(name), rows, cols, total_});
  total_ += static_cast<std::size_t>(rows * cols);
  return tensors_.size() - 1;
}

std::vector<float> init_denoiser_params(const DenoiserConfig& cfg, std::uint64_t seed) {
  const ParameterLayout layout(cfg);
  std::vector<float> params(layout.total_size(), 0.0f);
  auto rng = Rng::stream(seed, "denoiser-init");
  auto fill_uniform = [&](std::size_t slot, double bound) {
    const auto& ti = layout.info(slot);
    for (std::size_t i = 0; i < ti.size(); ++i)
      params[ti.offset + i] = static_cast<float>(rng.uniform(-bound, bound));
  };
  auto fan_in = [&](std::size_t slot) {
    return 1.0 / std::sqrt(static_cast<double>(layout.info(slot).rows));
  };
  fill_uniform(layout.in_w, fan_in(layout.in_w));
  fill_uniform(layout.cluster_emb, 1.0);
  fill_uniform(layout.side_w, fan_in(layout.side_w));
  fill_uniform(layout.step_w1, fan_in(layout.step_w1));
  for (const auto& L : layout.layers) {
    for (const auto slot : {L.step_w, L.q_w, L.k_w, L.v_w, L.o_w, L.mid_w, L.out_w})
      fill_uniform(slot, fan_in(slot));
  }
  fill_uniform(layout.head_w1, fan_in(layout.head_w1));
  // head.output stays zero: the untrained model predicts zero noise.
  return params;
}

}  // namespace wmg
