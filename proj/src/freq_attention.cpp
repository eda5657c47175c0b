#include "slnl/freq_attention.hpp"

#include <cmath>

namespace slnl {

std::string fa_variant_name(FAVariant v) {
  switch (v) {
    case FAVariant::none: return "none";
    case FAVariant::afa: return "afa";
    case FAVariant::sfa: return "sfa";
    case FAVariant::dfa: return "dfa";
    case FAVariant::rfa: return "rfa";
  }
  fail("fa_variant_name: bad variant");
}

FAVariant fa_variant_from_string(const std::string& s) {
  if (s == "none") return FAVariant::none;
  if (s == "afa") return FAVariant::afa;
  if (s == "sfa") return FAVariant::sfa;
  if (s == "dfa") return FAVariant::dfa;
  if (s == "rfa") return FAVariant::rfa;
  fail("attention.variant: unknown value '" + s + "' (expected none, afa, sfa, dfa or rfa)");
}

std::size_t fa_hidden_width(std::size_t t_frames, std::size_t n_joints, std::size_t lambda) {
  check(lambda >= 1, "attention: lambda must be >= 1");
  const std::size_t full = t_frames * n_joints;
  return (full + lambda - 1) / lambda;
}

AttnMlp AttnMlp::init(std::size_t t_frames, std::size_t n_joints, std::size_t lambda,
                      Rng& rng) {
  const std::size_t full = t_frames * n_joints;
  const std::size_t hidden = fa_hidden_width(t_frames, n_joints, lambda);
  AttnMlp m;
  const double s2 = 1.0 / std::sqrt(static_cast<double>(full));
  const double s1 = 1.0 / std::sqrt(static_cast<double>(hidden));
  m.w2 = random_uniform({hidden, full}, rng, -s2, s2);
  m.b1 = Tensor::zeros({hidden});
  m.w1 = random_uniform({full, hidden}, rng, -s1, s1);
  m.b2 = Tensor::zeros({full});
  return m;
}

FreqAttentionParams FreqAttentionParams::init(FAVariant v, std::size_t t_frames,
                                              std::size_t n_joints, std::size_t lambda,
                                              Rng& rng) {
  FreqAttentionParams p;
  p.variant = v;
  p.lambda = lambda;
  if (v == FAVariant::none) return p;
  p.cos_mlp = std::make_shared<AttnMlp>(AttnMlp::init(t_frames, n_joints, lambda, rng));
  if (v == FAVariant::sfa)
    p.sin_mlp = p.cos_mlp;  // shared storage
  else if (v == FAVariant::dfa || v == FAVariant::rfa)
    p.sin_mlp = std::make_shared<AttnMlp>(AttnMlp::init(t_frames, n_joints, lambda, rng));
  return p;  // afa keeps a single MLP on the amplitude spectrum
}

Value attention_mask_node(Tape& t, Value f, Value w2, Value b1, Value w1, Value b2) {
  const Tensor& fv = t.value(f);
  require_rank(fv, 3, "attention_mask");
  const std::size_t T = fv.shape[1], N = fv.shape[2];
  Value avg = mean_axis0(t, f);                    // (T,N)
  Value flat = reshape(t, avg, {T * N});
  Value hidden = dense(t, flat, w2, b1);           // bottleneck first
  Value out = dense(t, hidden, w1, b2);
  return reshape(t, sigmoid(t, out), {T, N});
}

Tensor attention_weights(const Tensor& f, const AttnMlp& mlp) {
  Tape t;
  Value v = attention_mask_node(t, t.leaf(f), t.leaf(mlp.w2), t.leaf(mlp.b1), t.leaf(mlp.w1),
                                t.leaf(mlp.b2));
  const Tensor& mask = t.value(v);
  const std::size_t C = f.shape[0];
  Tensor out(f.shape);
  for (std::size_t c = 0; c < C; ++c)
    std::copy(mask.data.begin(), mask.data.end(),
              out.data.begin() + static_cast<std::ptrdiff_t>(c * mask.numel()));
  return out;
}

namespace {

Value forced_or_mask(Tape& t, Value f, Value w2, Value b1, Value w1, Value b2,
                     const Tensor* forced) {
  if (!forced) return attention_mask_node(t, f, w2, b1, w1, b2);
  const Tensor& fv = t.value(f);
  require_shape(*forced, {fv.shape[1], fv.shape[2]}, "forced mask");
  return t.leaf(*forced);
}

}  // namespace

Value fa_forward_node(Tape& t, Value x, const FAValues& vals, const ForcedMasks* forced) {
  if (vals.variant == FAVariant::none) return x;
  const Tensor& xv = t.value(x);
  require_rank(xv, 3, "fa_forward");
  const std::size_t C = xv.shape[0];

  Value packed = dft2_packed(t, x);
  Value f_cos = slice_axis0(t, packed, 0, C);
  Value f_sin = slice_axis0(t, packed, C, 2 * C);

  Value masked_cos{}, masked_sin{};
  if (vals.variant == FAVariant::afa) {
    // one mask from the amplitude spectrum; applying it to both components
    // keeps the original phase and scales the amplitude elementwise
    Value amp = hypot_ew(t, f_cos, f_sin);
    Value m = forced_or_mask(t, amp, vals.cos_w2, vals.cos_b1, vals.cos_w1, vals.cos_b2,
                             forced ? forced->amplitude : nullptr);
    masked_cos = mul_bcast0(t, f_cos, m);
    masked_sin = mul_bcast0(t, f_sin, m);
  } else {
    Value m_cos = forced_or_mask(t, f_cos, vals.cos_w2, vals.cos_b1, vals.cos_w1, vals.cos_b2,
                                 forced ? forced->cos : nullptr);
    Value m_sin = forced_or_mask(t, f_sin, vals.sin_w2, vals.sin_b1, vals.sin_w1, vals.sin_b2,
                                 forced ? forced->sin : nullptr);
    masked_cos = mul_bcast0(t, f_cos, m_cos);
    masked_sin = mul_bcast0(t, f_sin, m_sin);
  }
  Value back = idft2_packed(t, concat_axis0(t, masked_cos, masked_sin));
  if (vals.variant == FAVariant::rfa) return add(t, x, back);
  return back;
}

Tensor fa_forward(const Tensor& x, const FreqAttentionParams& params,
                  const ForcedMasks* forced) {
  Tape t;
  FAValues vals;
  vals.variant = params.variant;
  if (params.variant != FAVariant::none) {
    check(params.cos_mlp != nullptr, "fa_forward: missing attention parameters");
    vals.cos_w2 = t.leaf(params.cos_mlp->w2);
    vals.cos_b1 = t.leaf(params.cos_mlp->b1);
    vals.cos_w1 = t.leaf(params.cos_mlp->w1);
    vals.cos_b2 = t.leaf(params.cos_mlp->b2);
    if (params.variant == FAVariant::sfa || params.variant == FAVariant::dfa ||
        params.variant == FAVariant::rfa) {
      check(params.sin_mlp != nullptr, "fa_forward: missing sinusoidal parameters");
      if (params.sin_mlp == params.cos_mlp) {
        vals.sin_w2 = vals.cos_w2;
        vals.sin_b1 = vals.cos_b1;
        vals.sin_w1 = vals.cos_w1;
        vals.sin_b2 = vals.cos_b2;
      } else {
        vals.sin_w2 = t.leaf(params.sin_mlp->w2);
        vals.sin_b1 = t.leaf(params.sin_mlp->b1);
        vals.sin_w1 = t.leaf(params.sin_mlp->w1);
        vals.sin_b2 = t.leaf(params.sin_mlp->b2);
      }
    }
  }
  return t.value(fa_forward_node(t, t.leaf(x), vals, forced));
}

}  // namespace slnl
