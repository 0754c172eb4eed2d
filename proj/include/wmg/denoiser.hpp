#pragma once

#include <Eigen/Dense>

#include <cmath>
#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "wmg/error.hpp"
#include "wmg/rng.hpp"

namespace wmg {

struct DenoiserConfig {
  int layers = 4;
  int channels = 64;
  int heads = 2;
  int embed_dim = 128;
  int cluster_count = 0;
  int cluster_embed_dim = 16;

  void validate() const;
  bool operator==(const DenoiserConfig&) const = default;
};

struct TensorInfo {
  std::string name;
  Eigen::Index rows = 0;
  Eigen::Index cols = 0;
  std::size_t offset = 0;  // in elements, into the flat parameter vector

  std::size_t size() const { return static_cast<std::size_t>(rows * cols); }
};

/// Names, shapes and flat offsets of every denoiser weight, in a fixed order
/// determined by the config. Matrices are column-major; biases are 1 x n.
class ParameterLayout {
 public:
  struct Layer {
    std::size_t step_w, step_b;
    std::size_t q_w, q_b, k_w, k_b, v_w, v_b, o_w, o_b;
    std::size_t mid_w, mid_b, out_w, out_b;
  };

  explicit ParameterLayout(const DenoiserConfig& cfg);

  const std::vector<TensorInfo>& tensors() const { return tensors_; }
  const TensorInfo& info(std::size_t slot) const { return tensors_.at(slot); }
  std::size_t total_size() const { return total_; }

  std::size_t in_w, in_b, cluster_emb, side_w;
  std::size_t step_w1, step_b1;
  std::vector<Layer> layers;
  std::size_t head_w1, head_b1, head_w2, head_b2;

 private:
  std::size_t add(std::string name, Eigen::Index rows, Eigen::Index cols);

  std::vector<TensorInfo> tensors_;
  std::size_t total_ = 0;
};

/// Per-token input channels: conditioning value, noisy target value and the
/// conditioning indicator.
constexpr int kInputChannels = 3;

/// Fan-in scaled uniform init for projections, zero biases, zero output head
/// (so the initial prediction is identically zero).
std::vector<float> init_denoiser_params(const DenoiserConfig& cfg, std::uint64_t seed);

/// Conditional epsilon-prediction network over the cluster axis:
/// token = silu(W_in [cond, noisy, mask]) + cluster embedding; each residual
/// block adds a projected step embedding, applies multi-head self-attention
/// and a tanh/sigmoid gated pointwise layer, and emits residual + skip
/// halves; the head maps the summed skips to one value per cluster.
template <class T>
class Denoiser {
 public:
  using Mat = Eigen::Matrix<T, Eigen::Dynamic, Eigen::Dynamic>;
  using Row = Eigen::Matrix<T, 1, Eigen::Dynamic>;

  /// Batch of B subjects. Matrices are B x C; values outside their mask must
  /// already be zero. steps are 1-based diffusion steps.
  struct Input {
    Mat cond_values;
    Mat cond_mask;
    Mat noisy;
    std::vector<int> steps;
  };

  explicit Denoiser(const DenoiserConfig& cfg) : cfg_(cfg), layout_(cfg) { cfg_.validate(); }

  const DenoiserConfig& config() const { return cfg_; }
  const ParameterLayout& layout() const { return layout_; }

  /// Returns B x C predicted noise and keeps activations for backward().
  Mat forward(std::span<const T> params, const Input& in);

  /// Accumulates d(loss)/d(params) into grad given d(loss)/d(output) for the
  /// batch of the most recent forward() call.
  void backward(std::span<const T> params, const Mat& d_out, std::span<T> grad) const;

 private:
  using Map = Eigen::Map<const Mat>;
  using MutMap = Eigen::Map<Mat>;

  Map weight(std::span<const T> p, std::size_t slot) const {
    const auto& ti = layout_.info(slot);
    return Map(p.data() + ti.offset, ti.rows, ti.cols);
  }
  MutMap weight(std::span<T> p, std::size_t slot) const {
    const auto& ti = layout_.info(slot);
    return MutMap(p.data() + ti.offset, ti.rows, ti.cols);
  }

  template <class M>
  static Mat sigmoid(const M& x) {
    return ((-x.array()).exp() + T(1)).inverse().matrix();
  }
  static Mat silu(const Mat& x) { return x.cwiseProduct(sigmoid(x)); }
  static Mat silu_grad(const Mat& x) {
    const Mat s = sigmoid(x);
    return (s.array() * (T(1) + x.array() * (T(1) - s.array()))).matrix();
  }

  Mat step_features(const std::vector<int>& steps) const;

  struct LayerCache {
    Mat y, q, k, v, attn;   // n x ch
    std::vector<Mat> probs; // per (row, head): C x C, column i = weights of query i
    Mat z, gate, filt, zg;  // n x ch
  };

  DenoiserConfig cfg_;
  ParameterLayout layout_;

  // Activations of the last forward pass.
  Eigen::Index batch_ = 0;
  Mat feat_, a0_, steps_, u1_, g1_, skip_, ah_, hh_;
  std::vector<LayerCache> cache_;
};

// ---------------------------------------------------------------------------

template <class T>
typename Denoiser<T>::Mat Denoiser<T>::step_features(const std::vector<int>& steps) const {
  const int half = cfg_.embed_dim / 2;
  Mat s(static_cast<Eigen::Index>(steps.size()), cfg_.embed_dim);
  for (std::size_t r = 0; r < steps.size(); ++r) {
    for (int i = 0; i < half; ++i) {
      const double freq =
          half > 1 ? std::pow(10.0, 4.0 * static_cast<double>(i) / (half - 1)) : 1.0;
      const double arg = static_cast<double>(steps[r]) * freq;
      s(static_cast<Eigen::Index>(r), i) = static_cast<T>(std::sin(arg));
      s(static_cast<Eigen::Index>(r), half + i) = static_cast<T>(std::cos(arg));
    }
  }
  return s;
}

template <class T>
typename Denoiser<T>::Mat Denoiser<T>::forward(std::span<const T> p, const Input& in) {
  if (p.size() != layout_.total_size())
    throw ArgumentError("parameter vector does not match the denoiser layout");
  const Eigen::Index b = in.cond_values.rows();
  const Eigen::Index c = cfg_.cluster_count;
  if (in.cond_values.cols() != c || in.cond_mask.rows() != b || in.cond_mask.cols() != c ||
      in.noisy.rows() != b || in.noisy.cols() != c ||
      static_cast<Eigen::Index>(in.steps.size()) != b)
    throw ArgumentError("denoiser input shape does not match the config");

  const Eigen::Index ch = cfg_.channels;
  const Eigen::Index heads = cfg_.heads;
  const Eigen::Index dh = ch / heads;
  const Eigen::Index n = b * c;
  const T inv_sqrt_dh = T(1) / std::sqrt(static_cast<T>(dh));
  const T inv_sqrt2 = T(1) / std::sqrt(T(2));
  batch_ = b;

  feat_.resize(n, kInputChannels);
  for (Eigen::Index r = 0; r < b; ++r)
    for (Eigen::Index j = 0; j < c; ++j) {
      feat_(r * c + j, 0) = in.cond_values(r, j);
      feat_(r * c + j, 1) = in.noisy(r, j);
      feat_(r * c + j, 2) = in.cond_mask(r, j);
    }

  a0_.noalias() = feat_ * weight(p, layout_.in_w);
  a0_.rowwise() += Row(weight(p, layout_.in_b));
  const Mat side = weight(p, layout_.cluster_emb) * weight(p, layout_.side_w);  // C x ch
  Mat x = silu(a0_);
  for (Eigen::Index r = 0; r < b; ++r) x.middleRows(r * c, c) += side;

  steps_ = step_features(in.steps);
  u1_.noalias() = steps_ * weight(p, layout_.step_w1);
  u1_.rowwise() += Row(weight(p, layout_.step_b1));
  g1_ = silu(u1_);

  cache_.resize(layout_.layers.size());
  skip_ = Mat::Zero(n, ch);
  for (std::size_t l = 0; l < layout_.layers.size(); ++l) {
    const auto& ls = layout_.layers[l];
    auto& lc = cache_[l];
    Mat d = g1_ * weight(p, ls.step_w);
    d.rowwise() += Row(weight(p, ls.step_b));
    lc.y = x;
    for (Eigen::Index r = 0; r < b; ++r) lc.y.middleRows(r * c, c).rowwise() += d.row(r);

    lc.q.noalias() = lc.y * weight(p, ls.q_w);
    lc.q.rowwise() += Row(weight(p, ls.q_b));
    lc.k.noalias() = lc.y * weight(p, ls.k_w);
    lc.k.rowwise() += Row(weight(p, ls.k_b));
    lc.v.noalias() = lc.y * weight(p, ls.v_w);
    lc.v.rowwise() += Row(weight(p, ls.v_b));

    Mat o(n, ch);
    lc.probs.resize(static_cast<std::size_t>(b * heads));
    for (Eigen::Index r = 0; r < b; ++r) {
      for (Eigen::Index h = 0; h < heads; ++h) {
        auto& prob = lc.probs[static_cast<std::size_t>(r * heads + h)];
        prob.noalias() = lc.k.block(r * c, h * dh, c, dh) *
                         lc.q.block(r * c, h * dh, c, dh).transpose();
        // column softmax; exp over the whole contiguous block
        for (Eigen::Index i = 0; i < c; ++i) prob.col(i).array() -= prob.col(i).maxCoeff();
        prob = (prob.array() * inv_sqrt_dh).exp().matrix();
        for (Eigen::Index i = 0; i < c; ++i) prob.col(i) *= T(1) / prob.col(i).sum();
        o.block(r * c, h * dh, c, dh).noalias() =
            prob.transpose() * lc.v.block(r * c, h * dh, c, dh);
      }
    }
    lc.attn = std::move(o);
    lc.z.noalias() = lc.attn * weight(p, ls.o_w);
    lc.z.rowwise() += Row(weight(p, ls.o_b));
    lc.z += lc.y;

    Mat gm = lc.z * weight(p, ls.mid_w);
    gm.rowwise() += Row(weight(p, ls.mid_b));
    lc.gate = sigmoid(gm.leftCols(ch));
    lc.filt = gm.rightCols(ch).array().tanh().matrix();
    lc.zg = lc.gate.cwiseProduct(lc.filt);

    Mat out = lc.zg * weight(p, ls.out_w);
    out.rowwise() += Row(weight(p, ls.out_b));
    x = (x + out.leftCols(ch)) * inv_sqrt2;
    skip_ += out.rightCols(ch);
  }
  skip_ *= T(1) / std::sqrt(static_cast<T>(layout_.layers.size()));

  ah_.noalias() = skip_ * weight(p, layout_.head_w1);
  ah_.rowwise() += Row(weight(p, layout_.head_b1));
  hh_ = silu(ah_);
  Mat eps = hh_ * weight(p, layout_.head_w2);  // n x 1
  eps.array() += weight(p, layout_.head_b2)(0, 0);

  Mat result(b, c);
  for (Eigen::Index r = 0; r < b; ++r)
    for (Eigen::Index j = 0; j < c; ++j) result(r, j) = eps(r * c + j, 0);
  return result;
}

template <class T>
void Denoiser<T>::backward(std::span<const T> p, const Mat& d_out, std::span<T> grad) const {
  if (grad.size() != layout_.total_size())
    throw ArgumentError("gradient vector does not match the denoiser layout");
  const Eigen::Index b = batch_;
  const Eigen::Index c = cfg_.cluster_count;
  if (d_out.rows() != b || d_out.cols() != c)
    throw ArgumentError("output gradient shape does not match the last forward pass");
  const Eigen::Index ch = cfg_.channels;
  const Eigen::Index heads = cfg_.heads;
  const Eigen::Index dh = ch / heads;
  const Eigen::Index n = b * c;
  const T inv_sqrt_dh = T(1) / std::sqrt(static_cast<T>(dh));
  const T inv_sqrt2 = T(1) / std::sqrt(T(2));

  Mat d_eps(n, 1);
  for (Eigen::Index r = 0; r < b; ++r)
    for (Eigen::Index j = 0; j < c; ++j) d_eps(r * c + j, 0) = d_out(r, j);

  weight(grad, layout_.head_w2).noalias() += hh_.transpose() * d_eps;
  weight(grad, layout_.head_b2)(0, 0) += d_eps.sum();
  Mat d_ah = (d_eps * weight(p, layout_.head_w2).transpose())
                 .cwiseProduct(silu_grad(ah_));
  weight(grad, layout_.head_w1).noalias() += skip_.transpose() * d_ah;
  weight(grad, layout_.head_b1) += d_ah.colwise().sum();
  const Mat d_skip = (d_ah * weight(p, layout_.head_w1).transpose()) *
                     (T(1) / std::sqrt(static_cast<T>(layout_.layers.size())));

  Mat d_x = Mat::Zero(n, ch);
  Mat d_g1 = Mat::Zero(b, cfg_.embed_dim);
  for (std::size_t li = layout_.layers.size(); li-- > 0;) {
    const auto& ls = layout_.layers[li];
    const auto& lc = cache_[li];

    Mat d_outl(n, 2 * ch);
    d_outl.leftCols(ch) = d_x * inv_sqrt2;
    d_outl.rightCols(ch) = d_skip;
    Mat d_xprev = d_x * inv_sqrt2;

    weight(grad, ls.out_w).noalias() += lc.zg.transpose() * d_outl;
    weight(grad, ls.out_b) += d_outl.colwise().sum();
    const Mat d_zg = d_outl * weight(p, ls.out_w).transpose();

    Mat d_gm(n, 2 * ch);
    d_gm.leftCols(ch) = d_zg.cwiseProduct(lc.filt).cwiseProduct(
        lc.gate.cwiseProduct((Mat::Ones(n, ch) - lc.gate)));
    d_gm.rightCols(ch) = d_zg.cwiseProduct(lc.gate).cwiseProduct(
        (Mat::Ones(n, ch) - lc.filt.cwiseProduct(lc.filt)));
    weight(grad, ls.mid_w).noalias() += lc.z.transpose() * d_gm;
    weight(grad, ls.mid_b) += d_gm.colwise().sum();
    const Mat d_z = d_gm * weight(p, ls.mid_w).transpose();

    weight(grad, ls.o_w).noalias() += lc.attn.transpose() * d_z;
    weight(grad, ls.o_b) += d_z.colwise().sum();
    const Mat d_attn = d_z * weight(p, ls.o_w).transpose();

    Mat d_q(n, ch), d_k(n, ch), d_v(n, ch);
    for (Eigen::Index r = 0; r < b; ++r) {
      for (Eigen::Index h = 0; h < heads; ++h) {
        const auto& prob = lc.probs[static_cast<std::size_t>(r * heads + h)];
        const auto d_o = d_attn.block(r * c, h * dh, c, dh);
        // transposed layout: (key, query)
        const Mat d_prob = lc.v.block(r * c, h * dh, c, dh) * d_o.transpose();
        d_v.block(r * c, h * dh, c, dh).noalias() = prob * d_o;
        Mat d_score(c, c);
        for (Eigen::Index i = 0; i < c; ++i) {
          const T inner = d_prob.col(i).dot(prob.col(i));
          d_score.col(i) = (prob.col(i).array() * (d_prob.col(i).array() - inner)) * inv_sqrt_dh;
        }
        d_q.block(r * c, h * dh, c, dh).noalias() =
            d_score.transpose() * lc.k.block(r * c, h * dh, c, dh);
        d_k.block(r * c, h * dh, c, dh).noalias() = d_score * lc.q.block(r * c, h * dh, c, dh);
      }
    }
    weight(grad, ls.q_w).noalias() += lc.y.transpose() * d_q;
    weight(grad, ls.q_b) += d_q.colwise().sum();
    weight(grad, ls.k_w).noalias() += lc.y.transpose() * d_k;
    weight(grad, ls.k_b) += d_k.colwise().sum();
    weight(grad, ls.v_w).noalias() += lc.y.transpose() * d_v;
    weight(grad, ls.v_b) += d_v.colwise().sum();

    Mat d_y = d_z;
    d_y.noalias() += d_q * weight(p, ls.q_w).transpose();
    d_y.noalias() += d_k * weight(p, ls.k_w).transpose();
    d_y.noalias() += d_v * weight(p, ls.v_w).transpose();

    Mat d_d(b, ch);
    for (Eigen::Index r = 0; r < b; ++r) d_d.row(r) = d_y.middleRows(r * c, c).colwise().sum();
    weight(grad, ls.step_w).noalias() += g1_.transpose() * d_d;
    weight(grad, ls.step_b) += d_d.colwise().sum();
    d_g1.noalias() += d_d * weight(p, ls.step_w).transpose();

    d_x = d_xprev + d_y;
  }

  Mat d_side = Mat::Zero(c, ch);
  for (Eigen::Index r = 0; r < b; ++r) d_side += d_x.middleRows(r * c, c);
  weight(grad, layout_.side_w).noalias() += weight(p, layout_.cluster_emb).transpose() * d_side;
  weight(grad, layout_.cluster_emb).noalias() += d_side * weight(p, layout_.side_w).transpose();
  const Mat d_a0 = d_x.cwiseProduct(silu_grad(a0_));
  weight(grad, layout_.in_w).noalias() += feat_.transpose() * d_a0;
  weight(grad, layout_.in_b) += d_a0.colwise().sum();

  const Mat d_u1 = d_g1.cwiseProduct(silu_grad(u1_));
  weight(grad, layout_.step_w1).noalias() += steps_.transpose() * d_u1;
  weight(grad, layout_.step_b1) += d_u1.colwise().sum();
}

}  // namespace wmg
