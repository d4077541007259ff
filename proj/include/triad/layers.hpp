#pragma once

#include <cmath>
#include <string>
#include <vector>

#include "triad/rng.hpp"
#include "triad/tensor.hpp"

namespace triad {

/// y = x W + b with W stored [in x out].
template <typename T>
struct LinearT {
  TensorT<T> W, b;

  void init(int in, int out, Rng rng) {
    W = TensorT<T>::randn({in, out}, rng, 1.0 / std::sqrt(static_cast<double>(in)));
    W.set_requires_grad();
    b = TensorT<T>::zeros({out});
    b.set_requires_grad();
  }

  TensorT<T> operator()(const TensorT<T>& x) const { return add_rowvec(matmul(x, W), b); }

  template <typename V>
  void visit(const std::string& prefix, V&& v) {
    v(prefix + ".W", W);
    v(prefix + ".b", b);
  }
};

template <typename T>
struct LayerNormT {
  TensorT<T> gain, bias;
  T eps = static_cast<T>(1e-5);

  void init(int width) {
    gain = TensorT<T>::full({width}, T(1));
    gain.set_requires_grad();
    bias = TensorT<T>::zeros({width});
    bias.set_requires_grad();
  }

  TensorT<T> operator()(const TensorT<T>& x) const { return layer_norm_rows(x, gain, bias, eps); }

  template <typename V>
  void visit(const std::string& prefix, V&& v) {
    v(prefix + ".gain", gain);
    v(prefix + ".bias", bias);
  }
};

/// Post-norm transformer block: masked multi-head self-attention with learned
/// q/k/v/out projections, then a two-layer feed-forward, each behind a
/// residual connection and layer norm.
template <typename T>
struct TransformerLayerT {
  LinearT<T> wq, wk, wv, wo, ff1, ff2;
  LayerNormT<T> ln_attn, ln_ff;
  int heads = 1;

  void init(int e, int heads_, int ff_width, Rng rng) {
    heads = heads_;
    wq.init(e, e, rng.fork("wq"));
    wk.init(e, e, rng.fork("wk"));
    wv.init(e, e, rng.fork("wv"));
    wo.init(e, e, rng.fork("wo"));
    ff1.init(e, ff_width, rng.fork("ff1"));
    ff2.init(ff_width, e, rng.fork("ff2"));
    ln_attn.init(e);
    ln_ff.init(e);
  }

  TensorT<T> operator()(const TensorT<T>& x, const AttnMask& mask) const {
    TensorT<T> attn = multi_head_attention(wq(x), wk(x), wv(x), mask, heads);
    TensorT<T> h = ln_attn(add(x, wo(attn)));
    TensorT<T> f = ff2(relu(ff1(h)));
    return ln_ff(add(h, f));
  }

  template <typename V>
  void visit(const std::string& prefix, V&& v) {
    wq.visit(prefix + ".wq", v);
    wk.visit(prefix + ".wk", v);
    wv.visit(prefix + ".wv", v);
    wo.visit(prefix + ".wo", v);
    ff1.visit(prefix + ".ff1", v);
    ff2.visit(prefix + ".ff2", v);
    ln_attn.visit(prefix + ".ln_attn", v);
    ln_ff.visit(prefix + ".ln_ff", v);
  }
};

/// A stack of transformer layers sharing one attention mask.
template <typename T>
struct LayerStackT {
  std::vector<TransformerLayerT<T>> layers;

  void init(int n_layers, int e, int heads, int ff_width, Rng rng) {
    layers.resize(static_cast<std::size_t>(n_layers));
    for (int i = 0; i < n_layers; ++i)
      layers[static_cast<std::size_t>(i)].init(e, heads, ff_width, rng.fork(static_cast<std::uint64_t>(i)));
  }

  TensorT<T> operator()(TensorT<T> x, const AttnMask& mask) const {
    for (const auto& layer : layers) x = layer(x, mask);
    return x;
  }

  template <typename V>
  void visit(const std::string& prefix, V&& v) {
    for (std::size_t i = 0; i < layers.size(); ++i)
      layers[i].visit(prefix + ".layer" + std::to_string(i), v);
  }
};

}  // namespace triad
