#include "slnl/model.hpp"

#include <cmath>

namespace slnl {

ModelConfig ModelConfig::paper_reference() {
  ModelConfig c;
  c.m1 = 3;
  c.m2 = 3;
  c.channels = {64, 64, 128, 128, 256, 256};
  c.kernels = {3};
  c.pool_every = 2;
  c.k_systems = 10;
  c.joints_out = 64;
  c.t_frames = 64;
  c.coord_dim = 3;
  c.joints_in = 25;
  c.num_classes = 60;
  return c;
}

std::size_t ModelConfig::kernel_of(std::size_t block) const {
  if (kernels.size() == 1) return kernels[0];
  check(block < kernels.size(), "model: block index out of kernel list");
  return kernels[block];
}

void ModelConfig::validate() const {
  check(m1 + m2 == channels.size(),
        "model: m1 + m2 = " + std::to_string(m1 + m2) + " must equal the channel count " +
            std::to_string(channels.size()));
  check(!channels.empty(), "model: at least one block required");
  check(kernels.size() == 1 || kernels.size() == channels.size(),
        "model: kernel list must have one entry or one per block");
  for (std::size_t b = 0; b < blocks(); ++b)
    check(kernel_of(b) % 2 == 1 && kernel_of(b) >= 1, "model: kernels must be odd");
  check(k_systems >= 1, "model: k_systems must be >= 1");
  check(joints_out >= 1 && joints_in >= 1, "model: joint counts must be >= 1");
  check(t_frames >= 2, "model: t_frames must be >= 2");
  check(coord_dim >= 1, "model: coord_dim must be >= 1");
  check(num_classes >= 2, "model: num_classes must be >= 2");
  check(dropout_rate >= 0.0 && dropout_rate < 1.0, "model: dropout rate must be in [0,1)");
  check(attention_lambda >= 1, "model: attention lambda must be >= 1");
  loss.validate();
  // pooling plan must stay feasible
  std::size_t t = t_frames, n = joints_out;
  for (std::size_t b = 0; b < blocks(); ++b) {
    if (pool_every && (b + 1) % pool_every == 0) {
      check(t >= 2 && n >= 2, "model: pooling after block " + std::to_string(b) +
                                  " would empty the feature map");
      t /= 2;
      n /= 2;
    }
  }
}

ConfigMap ModelConfig::to_config() const {
  ConfigMap m;
  auto num = [](double v) {
    char buf[40];
    std::snprintf(buf, sizeof(buf), "%.17g", v);
    return std::string(buf);
  };
  auto list = [](const std::vector<std::size_t>& xs) {
    std::string s;
    for (std::size_t i = 0; i < xs.size(); ++i)
      s += (i ? "," : "") + std::to_string(xs[i]);
    return s;
  };
  m["model.m1"] = std::to_string(m1);
  m["model.m2"] = std::to_string(m2);
  m["model.channels"] = list(channels);
  m["model.kernels"] = list(kernels);
  m["model.pool_every"] = std::to_string(pool_every);
  m["model.k_systems"] = std::to_string(k_systems);
  m["model.joints_out"] = std::to_string(joints_out);
  m["model.t_frames"] = std::to_string(t_frames);
  m["model.coord_dim"] = std::to_string(coord_dim);
  m["model.joints_in"] = std::to_string(joints_in);
  m["model.num_classes"] = std::to_string(num_classes);
  m["model.dropout"] = num(dropout_rate);
  m["model.seed"] = std::to_string(seed);
  m["attention.variant"] = fa_variant_name(attention);
  m["attention.lambda"] = std::to_string(attention_lambda);
  m["loss.kind"] = loss_kind_name(loss.kind);
  m["loss.gamma"] = num(loss.gamma);
  m["loss.margin"] = num(loss.margin);
  m["loss.epsilon"] = num(loss.epsilon);
  return m;
}

ModelConfig ModelConfig::from_config(ConfigReader& r) {
  ModelConfig c;
  c.m1 = r.get_size("model.m1", c.m1);
  c.m2 = r.get_size("model.m2", c.m2);
  c.channels = r.get_size_list("model.channels", c.channels);
  c.kernels = r.get_size_list("model.kernels", c.kernels);
  c.pool_every = r.get_size("model.pool_every", c.pool_every);
  c.k_systems = r.get_size("model.k_systems", c.k_systems);
  c.joints_out = r.get_size("model.joints_out", c.joints_out);
  c.t_frames = r.get_size("model.t_frames", c.t_frames);
  c.coord_dim = r.get_size("model.coord_dim", c.coord_dim);
  c.joints_in = r.get_size("model.joints_in", c.joints_in);
  c.num_classes = r.get_size("model.num_classes", c.num_classes);
  c.dropout_rate = r.get_double("model.dropout", c.dropout_rate);
  c.seed = r.get_u64("model.seed", c.seed);
  c.attention = fa_variant_from_string(r.get_string("attention.variant", "rfa"));
  c.attention_lambda = r.get_size("attention.lambda", c.attention_lambda);
  c.loss.kind = loss_kind_from_string(r.get_string("loss.kind", "SMFL"));
  c.loss.gamma = r.get_double("loss.gamma", c.loss.kind == LossKind::FL ||
                                                    c.loss.kind == LossKind::SMFL
                                                ? 2.0
                                                : 0.0);
  c.loss.margin = r.get_double("loss.margin", c.loss.kind == LossKind::SMCE ||
                                                      c.loss.kind == LossKind::SMFL
                                                  ? 0.4
                                                  : 0.0);
  c.loss.epsilon = r.get_double("loss.epsilon", c.loss.epsilon);
  r.reject_unconsumed("model.");
  r.reject_unconsumed("attention.");
  r.reject_unconsumed("loss.");
  c.validate();
  return c;
}

Tensor velocity_of(const Tensor& position) {
  require_rank(position, 3, "velocity_of");
  const std::size_t d = position.shape[0], T = position.shape[1], N = position.shape[2];
  Tensor v({d, T, N});
  for (std::size_t c = 0; c < d; ++c)
    for (std::size_t t = 1; t < T; ++t)
      for (std::size_t n = 0; n < N; ++n)
        v.at3(c, t, n) = position.at3(c, t, n) - position.at3(c, t - 1, n);
  return v;
}

namespace {

BNIds add_bn(ParamStore& s, const std::string& prefix, std::size_t c) {
  BNIds ids;
  ids.gamma = s.add(prefix + ".gamma", Tensor::ones({c}));
  ids.beta = s.add(prefix + ".beta", Tensor::zeros({c}));
  ids.run_mean = s.add(prefix + ".run_mean", Tensor::zeros({c}), false);
  ids.run_var = s.add(prefix + ".run_var", Tensor::ones({c}), false);
  return ids;
}

ConvIds add_conv(ParamStore& s, const std::string& prefix, std::size_t c_in, std::size_t c_out,
                 std::size_t kt, std::size_t kn, Rng& rng) {
  const double fan_in = static_cast<double>(c_in * kt * kn);
  const double fan_out = static_cast<double>(c_out * kt * kn);
  const double a = std::sqrt(6.0 / (fan_in + fan_out));
  ConvIds ids;
  ids.kernel = s.add(prefix + ".k", random_uniform({c_out, c_in, kt, kn}, rng, -a, a));
  ids.bias = s.add(prefix + ".b", Tensor::zeros({c_out}));
  return ids;
}

DenseIds add_dense(ParamStore& s, const std::string& prefix, std::size_t in, std::size_t out,
                   Rng& rng) {
  const double a = std::sqrt(6.0 / static_cast<double>(in + out));
  DenseIds ids;
  ids.w = s.add(prefix + ".w", random_uniform({out, in}, rng, -a, a));
  ids.b = s.add(prefix + ".b", Tensor::zeros({out}));
  return ids;
}

AttnIds add_attn(ParamStore& s, const std::string& prefix, std::size_t t_frames,
                 std::size_t joints, std::size_t lambda, Rng& rng) {
  AttnMlp mlp = AttnMlp::init(t_frames, joints, lambda, rng);
  AttnIds ids;
  ids.w2 = s.add(prefix + ".w2", std::move(mlp.w2));
  ids.b1 = s.add(prefix + ".b1", std::move(mlp.b1));
  ids.w1 = s.add(prefix + ".w1", std::move(mlp.w1));
  ids.b2 = s.add(prefix + ".b2", std::move(mlp.b2));
  return ids;
}

NonLocalIds add_nl(ParamStore& s, const std::string& prefix, std::size_t p, std::size_t q,
                   Rng& rng) {
  NonLocalParams nl = NonLocalParams::init(p, q, std::max<std::size_t>(1, q / 2), rng);
  NonLocalIds ids;
  ids.wg = s.add(prefix + ".wg", std::move(nl.w_g));
  ids.wphi = s.add(prefix + ".wphi", std::move(nl.w_phi));
  ids.wpsi = s.add(prefix + ".wpsi", std::move(nl.w_psi));
  ids.ww = s.add(prefix + ".ww", std::move(nl.w_w));
  return ids;
}

BNValues bind_bn(Tape& t, BoundParams& bound, ParamStore& s, const BNIds& ids) {
  return BNValues{bound.bind(t, s, ids.gamma), bound.bind(t, s, ids.beta),
                  &s.value(ids.run_mean), &s.value(ids.run_var)};
}

NonLocalValues bind_nl(Tape& t, BoundParams& bound, ParamStore& s, const NonLocalIds& ids) {
  return NonLocalValues{bound.bind(t, s, ids.wg), bound.bind(t, s, ids.wphi),
                        bound.bind(t, s, ids.wpsi), bound.bind(t, s, ids.ww)};
}

}  // namespace

Model::Model(ModelConfig cfg) : cfg_(std::move(cfg)) {
  cfg_.validate();
  Rng rng(cfg_.seed);
  pos_ = init_stream("pos", rng);
  vel_ = init_stream("vel", rng);
  cat_classifier_ =
      add_dense(store_, "cat.cls", 2 * cfg_.channels.back(), cfg_.num_classes, rng);
}

StreamIds Model::init_stream(const std::string& prefix, Rng& rng) {
  StreamIds ids;
  ids.input_bn = add_bn(store_, prefix + ".input_bn", cfg_.coord_dim);

  TransformParams tp = TransformParams::init(cfg_.joints_in, cfg_.joints_out, cfg_.coord_dim,
                                             cfg_.k_systems, rng);
  ids.joint_map.w = store_.add(prefix + ".joint.w", std::move(tp.joint_w));
  ids.joint_map.b = store_.add(prefix + ".joint.b", std::move(tp.joint_b));
  for (std::size_t k = 0; k < cfg_.k_systems; ++k)
    ids.coord_maps.push_back(
        store_.add(prefix + ".coord." + std::to_string(k), std::move(tp.coord_maps[k])));

  if (cfg_.attention != FAVariant::none) {
    ids.fa_cos = add_attn(store_, prefix + ".fa.cos", cfg_.t_frames, cfg_.joints_out,
                          cfg_.attention_lambda, rng);
    if (cfg_.attention == FAVariant::sfa || cfg_.attention == FAVariant::afa)
      ids.fa_sin = ids.fa_cos;  // shared storage (afa only uses the one set)
    else
      ids.fa_sin = add_attn(store_, prefix + ".fa.sin", cfg_.t_frames, cfg_.joints_out,
                            cfg_.attention_lambda, rng);
  }

  std::size_t c_in = cfg_.coord_dim * cfg_.k_systems;
  for (std::size_t b = 0; b < cfg_.blocks(); ++b) {
    const std::size_t c_out = cfg_.channels[b];
    const std::size_t k = cfg_.kernel_of(b);
    const std::string bp = prefix + ".block" + std::to_string(b);
    BlockIds block;
    block.tconv = add_conv(store_, bp + ".tconv", c_in, c_out, k, 1, rng);
    block.sconv = add_conv(store_, bp + ".sconv", c_in, c_out, 1, k, rng);
    block.stconv = add_conv(store_, bp + ".stconv", c_in, c_out, k, k, rng);
    if (c_in != c_out) {
      block.proj = add_conv(store_, bp + ".proj", c_in, c_out, 1, 1, rng);
      block.has_proj = true;
    }
    block.bn = add_bn(store_, bp + ".bn", c_out);
    if (b < cfg_.m1) {
      block.has_nl = true;
      block.nl_t = add_nl(store_, bp + ".nl.t", c_in, c_out, rng);
      block.nl_s = add_nl(store_, bp + ".nl.s", c_in, c_out, rng);
      block.nl_st = add_nl(store_, bp + ".nl.st", c_in, c_out, rng);
    }
    ids.blocks.push_back(block);
    c_in = c_out;
  }
  ids.classifier = add_dense(store_, prefix + ".cls", cfg_.channels.back(), cfg_.num_classes, rng);
  return ids;
}

Value Model::stream_features(Tape& t, BoundParams& bound, const StreamIds& ids,
                             const Tensor& input, Mode mode, std::uint64_t dropout_seed) {
  Value x = t.leaf(input);
  x = batchnorm(t, x, bound.bind(t, store_, ids.input_bn.gamma),
                bound.bind(t, store_, ids.input_bn.beta), &store_.value(ids.input_bn.run_mean),
                &store_.value(ids.input_bn.run_var), mode);

  std::vector<Value> maps;
  maps.reserve(ids.coord_maps.size());
  for (int id : ids.coord_maps) maps.push_back(bound.bind(t, store_, id));
  x = transform_forward_node(t, x, bound.bind(t, store_, ids.joint_map.w),
                             bound.bind(t, store_, ids.joint_map.b), maps);

  if (cfg_.attention != FAVariant::none) {
    FAValues fa;
    fa.variant = cfg_.attention;
    fa.cos_w2 = bound.bind(t, store_, ids.fa_cos.w2);
    fa.cos_b1 = bound.bind(t, store_, ids.fa_cos.b1);
    fa.cos_w1 = bound.bind(t, store_, ids.fa_cos.w1);
    fa.cos_b2 = bound.bind(t, store_, ids.fa_cos.b2);
    if (ids.fa_sin.w2 == ids.fa_cos.w2) {
      fa.sin_w2 = fa.cos_w2;
      fa.sin_b1 = fa.cos_b1;
      fa.sin_w1 = fa.cos_w1;
      fa.sin_b2 = fa.cos_b2;
    } else {
      fa.sin_w2 = bound.bind(t, store_, ids.fa_sin.w2);
      fa.sin_b1 = bound.bind(t, store_, ids.fa_sin.b1);
      fa.sin_w1 = bound.bind(t, store_, ids.fa_sin.w1);
      fa.sin_b2 = bound.bind(t, store_, ids.fa_sin.b2);
    }
    x = fa_forward_node(t, x, fa);
  }

  std::size_t th = cfg_.t_frames, nh = cfg_.joints_out;
  for (std::size_t b = 0; b < cfg_.blocks(); ++b) {
    const BlockIds& bi = ids.blocks[b];
    BlockValues bv;
    bv.tconv = ConvValues{bound.bind(t, store_, bi.tconv.kernel),
                          bound.bind(t, store_, bi.tconv.bias)};
    bv.sconv = ConvValues{bound.bind(t, store_, bi.sconv.kernel),
                          bound.bind(t, store_, bi.sconv.bias)};
    bv.stconv = ConvValues{bound.bind(t, store_, bi.stconv.kernel),
                           bound.bind(t, store_, bi.stconv.bias)};
    if (bi.has_proj)
      bv.proj = ConvValues{bound.bind(t, store_, bi.proj.kernel),
                           bound.bind(t, store_, bi.proj.bias)};
    bv.bn = bind_bn(t, bound, store_, bi.bn);
    if (bi.has_nl)
      bv.nl = std::array<NonLocalValues, 3>{bind_nl(t, bound, store_, bi.nl_t),
                                            bind_nl(t, bound, store_, bi.nl_s),
                                            bind_nl(t, bound, store_, bi.nl_st)};
    x = block_node(t, x, bv, mode);
    if (cfg_.dropout_rate > 0.0)
      x = dropout(t, x, cfg_.dropout_rate, mode, mix_seed(dropout_seed, b));
    if (cfg_.pool_every && (b + 1) % cfg_.pool_every == 0 && th >= 2 && nh >= 2) {
      x = maxpool2(t, x);
      th /= 2;
      nh /= 2;
    }
  }
  return global_avg_pool(t, x);
}

Model::Heads Model::build_heads(Tape& t, BoundParams& bound, const Tensor& position,
                                Mode mode, std::uint64_t dropout_seed) {
  require_shape(position, {cfg_.coord_dim, cfg_.t_frames, cfg_.joints_in},
                "model input");
  const Tensor velocity = velocity_of(position);

  Value feat_pos =
      stream_features(t, bound, pos_, position, mode, mix_seed(dropout_seed, 0x706f73));
  Value feat_vel =
      stream_features(t, bound, vel_, velocity, mode, mix_seed(dropout_seed, 0x76656c));

  Heads h;
  h.z_pos = dense(t, feat_pos, bound.bind(t, store_, pos_.classifier.w),
                  bound.bind(t, store_, pos_.classifier.b));
  h.z_vel = dense(t, feat_vel, bound.bind(t, store_, vel_.classifier.w),
                  bound.bind(t, store_, vel_.classifier.b));
  Value cat = concat_axis0(t, feat_pos, feat_vel);
  h.z_cat = dense(t, cat, bound.bind(t, store_, cat_classifier_.w),
                  bound.bind(t, store_, cat_classifier_.b));
  h.p_pos = softmax_lastaxis(t, h.z_pos);
  h.p_vel = softmax_lastaxis(t, h.z_vel);
  h.p_cat = softmax_lastaxis(t, h.z_cat);
  return h;
}

Value Model::build_loss(Tape& t, const Heads& heads, std::size_t label) const {
  check(label < cfg_.num_classes, "model: label out of range");
  Value lp = loss_node(t, heads.p_pos, label, cfg_.loss);
  Value lv = loss_node(t, heads.p_vel, label, cfg_.loss);
  Value lc = loss_node(t, heads.p_cat, label, cfg_.loss);
  return add(t, add(t, lp, lv), lc);
}

Model::Output Model::forward(const Tensor& position, Mode mode, std::uint64_t dropout_seed) {
  Tape t;
  BoundParams bound;
  Heads h = build_heads(t, bound, position, mode, dropout_seed);
  return Output{t.value(h.p_pos), t.value(h.p_vel), t.value(h.p_cat),
                t.value(h.z_pos), t.value(h.z_vel), t.value(h.z_cat)};
}

}  // namespace slnl
