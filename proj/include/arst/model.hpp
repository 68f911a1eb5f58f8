#pragma once

#include <cmath>
#include <cstddef>
#include <cstdint>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include "arst/layers.hpp"
#include "arst/mask.hpp"
#include "arst/numerics.hpp"

namespace arst {

class ConfigError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

struct ModelConfig {
  std::size_t d_model = 512;
  std::size_t n_heads = 8;
  std::size_t width = 5;  // band width W
  std::size_t n_classes = 7;
  std::size_t d_ffn = 2048;
  std::size_t d_feat = 512;
  double ln_eps = 1e-5;
  double pe_base = 10000.0;

  std::size_t d_head() const { return d_model / n_heads; }

  // Throws ConfigError naming the violated field.
  void validate() const;

  friend bool operator==(const ModelConfig&, const ModelConfig&) = default;
};

// Desk-scale profile used by the tests and the synthetic experiments.
ModelConfig desk_model_config();

// Decoder input token: 0 is BOS, 1..c are phases.
struct PhaseToken {
  int value = 0;

  static constexpr PhaseToken bos() { return PhaseToken{0}; }
  static constexpr PhaseToken phase(int id) { return PhaseToken{id}; }
  constexpr bool is_bos() const { return value == 0; }

  friend constexpr bool operator==(PhaseToken, PhaseToken) = default;
};

// [begin, end) of the embedding segment owned by a 1-based phase id. The first
// d_model mod c segments are one element longer.
std::pair<std::size_t, std::size_t> phase_segment(int phase, std::size_t d_model,
                                                  std::size_t n_classes);

std::vector<double> phase_embed(PhaseToken token, const ModelConfig& cfg);

std::vector<double> positional_encoding(std::size_t position, const ModelConfig& cfg);

// Closed-form count of learnable scalars for a configuration.
std::size_t parameter_count(const ModelConfig& cfg);

// Shifted decoder inputs for teacher forcing: [BOS, y_1, ..., y_{T-1}].
std::vector<PhaseToken> shift_labels(std::span<const int> labels);

template <typename Scalar>
class ArstModel {
 public:
  struct EncoderBlock {
    BandedAttention<Scalar> self_attn;
    LayerNorm<Scalar> ln1;
    FeedForward<Scalar> ffn;
    LayerNorm<Scalar> ln2;
  };
  struct DecoderBlock {
    BandedAttention<Scalar> self_attn;
    LayerNorm<Scalar> ln1;
    BandedAttention<Scalar> cross_attn;
    LayerNorm<Scalar> ln2;
    FeedForward<Scalar> ffn;
    LayerNorm<Scalar> ln3;
  };

  struct ForwardCache {
    Matrix<Scalar> features;
    typename BandedAttention<Scalar>::Cache enc_attn;
    typename LayerNorm<Scalar>::Cache enc_ln1;
    typename FeedForward<Scalar>::Cache enc_ffn;
    typename LayerNorm<Scalar>::Cache enc_ln2;
    Matrix<Scalar> enc_out;
    typename BandedAttention<Scalar>::Cache dec_self;
    typename LayerNorm<Scalar>::Cache dec_ln1;
    typename BandedAttention<Scalar>::Cache dec_cross;
    typename LayerNorm<Scalar>::Cache dec_ln2;
    typename FeedForward<Scalar>::Cache dec_ffn;
    typename LayerNorm<Scalar>::Cache dec_ln3;
    Matrix<Scalar> dec_out;
  };

  ModelConfig cfg;
  Linear<Scalar> input_proj;
  EncoderBlock enc;
  DecoderBlock dec;
  Linear<Scalar> head;

  ArstModel() = default;

  explicit ArstModel(const ModelConfig& config) : cfg(config) {
    cfg.validate();
    const auto d = cfg.d_model;
    const auto h = cfg.n_heads;
    const auto eps = static_cast<Scalar>(cfg.ln_eps);
    input_proj = Linear<Scalar>("input_proj", cfg.d_feat, d);
    enc.self_attn = BandedAttention<Scalar>("enc.self_attn", d, h);
    enc.ln1 = LayerNorm<Scalar>("enc.ln1", d, eps);
    enc.ffn = FeedForward<Scalar>("enc.ffn", d, cfg.d_ffn);
    enc.ln2 = LayerNorm<Scalar>("enc.ln2", d, eps);
    dec.self_attn = BandedAttention<Scalar>("dec.self_attn", d, h);
    dec.ln1 = LayerNorm<Scalar>("dec.ln1", d, eps);
    dec.cross_attn = BandedAttention<Scalar>("dec.cross_attn", d, h);
    dec.ln2 = LayerNorm<Scalar>("dec.ln2", d, eps);
    dec.ffn = FeedForward<Scalar>("dec.ffn", d, cfg.d_ffn);
    dec.ln3 = LayerNorm<Scalar>("dec.ln3", d, eps);
    head = Linear<Scalar>("head", d, cfg.n_classes);
  }

  // Glorot-uniform weights, zero biases, unit LN gains.
  void init(std::uint64_t seed) {
    SeededRng rng(seed);
    for (Parameter<Scalar>* p : parameters()) {
      const std::string& n = p->name;
      const bool is_weight = n.size() > 7 && n.compare(n.size() - 7, 7, ".weight") == 0;
      if (is_weight) {
        const double fan_in = static_cast<double>(p->value.rows());
        const double fan_out = static_cast<double>(p->value.cols());
        const double a = std::sqrt(6.0 / (fan_in + fan_out));
        for (auto& v : p->value.data()) v = static_cast<Scalar>(rng.uniform(-a, a));
      } else if (n.size() > 6 && n.compare(n.size() - 6, 6, ".gamma") == 0) {
        p->value.fill(Scalar(1));
      } else {
        p->value.fill(Scalar(0));
      }
      p->zero_grad();
    }
  }

  // Stable order; names are unique.
  std::vector<Parameter<Scalar>*> parameters() {
    std::vector<Parameter<Scalar>*> out;
    input_proj.collect(out);
    enc.self_attn.collect(out);
    enc.ln1.collect(out);
    enc.ffn.collect(out);
    enc.ln2.collect(out);
    dec.self_attn.collect(out);
    dec.ln1.collect(out);
    dec.cross_attn.collect(out);
    dec.ln2.collect(out);
    dec.ffn.collect(out);
    dec.ln3.collect(out);
    head.collect(out);
    return out;
  }

  std::vector<const Parameter<Scalar>*> parameters() const {
    auto ps = const_cast<ArstModel*>(this)->parameters();
    return {ps.begin(), ps.end()};
  }

  std::size_t num_scalars() const {
    std::size_t n = 0;
    for (const auto* p : parameters()) n += p->value.size();
    return n;
  }

  void zero_grad() {
    for (auto* p : parameters()) p->zero_grad();
  }

  std::vector<Scalar> encoder_input_row(std::span<const Scalar> feature, std::size_t position) const {
    std::vector<Scalar> x = input_proj.forward_row(feature);
    const auto pe = positional_encoding(position, cfg);
    for (std::size_t j = 0; j < x.size(); ++j) x[j] += static_cast<Scalar>(pe[j]);
    return x;
  }

  std::vector<Scalar> decoder_input_row(PhaseToken token, std::size_t position) const {
    const auto e = phase_embed(token, cfg);
    const auto pe = positional_encoding(position, cfg);
    std::vector<Scalar> x(cfg.d_model);
    for (std::size_t j = 0; j < x.size(); ++j) x[j] = static_cast<Scalar>(e[j]) + static_cast<Scalar>(pe[j]);
    return x;
  }

  // T x c logits; row t is the prediction for frame t given features 0..t and
  // decoder tokens 0..t.
  Matrix<Scalar> forward_teacher_forced(const Matrix<Scalar>& features,
                                        std::span<const PhaseToken> tokens,
                                        ForwardCache* cache = nullptr) const {
    const std::size_t T = features.rows();
    if (features.cols() != cfg.d_feat) {
      throw DimensionError("forward_teacher_forced: feature dim " + std::to_string(features.cols()) +
                           " != d_feat " + std::to_string(cfg.d_feat));
    }
    if (tokens.size() != T) {
      throw DimensionError("forward_teacher_forced: " + std::to_string(tokens.size()) +
                           " tokens for " + std::to_string(T) + " frames");
    }
    if (T == 0) throw DimensionError("forward_teacher_forced: empty sequence");
    if (!tokens[0].is_bos()) throw InvariantError("forward_teacher_forced: first token must be BOS");
    for (std::size_t t = 1; t < T; ++t) {
      if (tokens[t].value < 1 || tokens[t].value > static_cast<int>(cfg.n_classes)) {
        throw std::domain_error("forward_teacher_forced: token " + std::to_string(tokens[t].value) +
                                " at position " + std::to_string(t) + " is not a phase id");
      }
    }
    const std::size_t W = cfg.width;

    Matrix<Scalar> x0 = input_proj.forward(features);
    for (std::size_t t = 0; t < T; ++t) {
      const auto pe = positional_encoding(t, cfg);
      auto r = x0.row(t);
      for (std::size_t j = 0; j < r.size(); ++j) r[j] += static_cast<Scalar>(pe[j]);
    }

    Matrix<Scalar> a = enc.self_attn.forward(x0, x0, W, cache ? &cache->enc_attn : nullptr);
    add_inplace(a, x0);
    Matrix<Scalar> h1 = enc.ln1.forward(a, cache ? &cache->enc_ln1 : nullptr);
    Matrix<Scalar> g = enc.ffn.forward(h1, cache ? &cache->enc_ffn : nullptr);
    add_inplace(g, h1);
    Matrix<Scalar> e = enc.ln2.forward(g, cache ? &cache->enc_ln2 : nullptr);

    Matrix<Scalar> y0(T, cfg.d_model);
    for (std::size_t t = 0; t < T; ++t) {
      const auto row = decoder_input_row(tokens[t], t);
      std::copy(row.begin(), row.end(), y0.row(t).begin());
    }
    Matrix<Scalar> b1 = dec.self_attn.forward(y0, y0, W, cache ? &cache->dec_self : nullptr);
    add_inplace(b1, y0);
    Matrix<Scalar> z1 = dec.ln1.forward(b1, cache ? &cache->dec_ln1 : nullptr);
    Matrix<Scalar> b2 = dec.cross_attn.forward(z1, e, W, cache ? &cache->dec_cross : nullptr);
    add_inplace(b2, z1);
    Matrix<Scalar> z2 = dec.ln2.forward(b2, cache ? &cache->dec_ln2 : nullptr);
    Matrix<Scalar> g2 = dec.ffn.forward(z2, cache ? &cache->dec_ffn : nullptr);
    add_inplace(g2, z2);
    Matrix<Scalar> z3 = dec.ln3.forward(g2, cache ? &cache->dec_ln3 : nullptr);

    Matrix<Scalar> logits = head.forward(z3);
    if (cache) {
      cache->features = features;
      cache->enc_out = std::move(e);
      cache->dec_out = std::move(z3);
    }
    return logits;
  }

  // Accumulates parameter grads given dL/dlogits.
  void backward(const ForwardCache& c, const Matrix<Scalar>& dlogits) {
    Matrix<Scalar> dz3 = head.backward(c.dec_out, dlogits);
    Matrix<Scalar> dsum = dec.ln3.backward(c.dec_ln3, dz3);
    Matrix<Scalar> dz2 = dec.ffn.backward(c.dec_ffn, dsum);
    add_inplace(dz2, dsum);
    dsum = dec.ln2.backward(c.dec_ln2, dz2);
    auto [dz1, de] = dec.cross_attn.backward(c.dec_cross, dsum);
    add_inplace(dz1, dsum);
    dsum = dec.ln1.backward(c.dec_ln1, dz1);
    auto [dy0q, dy0kv] = dec.self_attn.backward(c.dec_self, dsum);
    (void)dy0q;
    (void)dy0kv;  // decoder inputs are constant embeddings

    Matrix<Scalar> dg = enc.ln2.backward(c.enc_ln2, de);
    Matrix<Scalar> dh1 = enc.ffn.backward(c.enc_ffn, dg);
    add_inplace(dh1, dg);
    Matrix<Scalar> da = enc.ln1.backward(c.enc_ln1, dh1);
    auto [dx0q, dx0kv] = enc.self_attn.backward(c.enc_attn, da);
    add_inplace(dx0q, dx0kv);
    add_inplace(dx0q, da);
    input_proj.backward(c.features, dx0q);
  }
};

template <typename Scalar>
std::vector<Scalar> logits_to_probs(std::span<const Scalar> logits) {
  return softmax<Scalar>(logits);
}

// Copies every tensor of `src` into `dst` with a scalar conversion.
template <typename To, typename From>
void copy_parameters(const ArstModel<From>& src, ArstModel<To>& dst) {
  auto s = src.parameters();
  auto d = dst.parameters();
  if (s.size() != d.size()) throw DimensionError("copy_parameters: tensor count mismatch");
  for (std::size_t i = 0; i < s.size(); ++i) {
    if (s[i]->value.rows() != d[i]->value.rows() || s[i]->value.cols() != d[i]->value.cols()) {
      throw DimensionError("copy_parameters: shape mismatch for " + s[i]->name);
    }
    d[i]->value = matrix_cast<To>(s[i]->value);
  }
}

}  // namespace arst
