#pragma once

#include <memory>
#include <string>

#include "slnl/dft.hpp"
#include "slnl/ops.hpp"

namespace slnl {

enum class FAVariant { none, afa, sfa, dfa, rfa };

std::string fa_variant_name(FAVariant v);
FAVariant fa_variant_from_string(const std::string& s);

/// Two dense layers (bottleneck then expansion) plus sigmoid; produces one
/// per-frequency weight map shared across channels.
struct AttnMlp {
  Tensor w2, b1;  // bottleneck: (H, T*N), (H)
  Tensor w1, b2;  // expansion:  (T*N, H), (T*N)
  static AttnMlp init(std::size_t t_frames, std::size_t n_joints, std::size_t lambda,
                      Rng& rng);
};

/// Frequency-attention parameters. The shared variant aliases one MLP for
/// both components; the amplitude variant uses a single MLP driven by the
/// amplitude spectrum.
struct FreqAttentionParams {
  FAVariant variant = FAVariant::rfa;
  std::size_t lambda = 4;
  std::shared_ptr<AttnMlp> cos_mlp;
  std::shared_ptr<AttnMlp> sin_mlp;

  static FreqAttentionParams init(FAVariant v, std::size_t t_frames, std::size_t n_joints,
                                  std::size_t lambda, Rng& rng);
};

/// Test hooks: when set, the corresponding learned mask is replaced by the
/// given (T,N) map. Not part of the training path.
struct ForcedMasks {
  const Tensor* cos = nullptr;
  const Tensor* sin = nullptr;
  const Tensor* amplitude = nullptr;
};

/// Bottleneck width: ceil(T*N / lambda).
std::size_t fa_hidden_width(std::size_t t_frames, std::size_t n_joints, std::size_t lambda);

/// Mask from one component stack f (C,T,N): channel average, two dense
/// layers, sigmoid; result (T,N).
Value attention_mask_node(Tape& t, Value f, Value w2, Value b1, Value w1, Value b2);

/// Spec-facing form of the mask with the duplication across channels
/// materialized: returns a (C,T,N) weight tensor.
Tensor attention_weights(const Tensor& f, const AttnMlp& mlp);

struct FAValues {
  FAVariant variant = FAVariant::none;
  Value cos_w2, cos_b1, cos_w1, cos_b2;
  Value sin_w2, sin_b1, sin_w1, sin_b2;  // aliases of cos_* for sfa; unused for afa
};

/// Full attention block on a (C,T,N) value. none: identity. rfa/dfa/sfa:
/// per-component masks on the cosine and sinusoidal parts, inverse
/// transform, plus the input itself for rfa. afa: one mask computed from and
/// applied to the amplitude spectrum, reconstructed with the original phase.
Value fa_forward_node(Tape& t, Value x, const FAValues& vals,
                      const ForcedMasks* forced = nullptr);

Tensor fa_forward(const Tensor& x, const FreqAttentionParams& params,
                  const ForcedMasks* forced = nullptr);

}  // namespace slnl
