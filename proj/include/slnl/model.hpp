#pragma once

#include "slnl/config.hpp"
#include "slnl/freq_attention.hpp"
#include "slnl/losses.hpp"
#include "slnl/nonlocal.hpp"
#include "slnl/params.hpp"
#include "slnl/transform_net.hpp"

namespace slnl {

/// Two-stream model layout: per stream an input BN, the transform network,
/// one frequency-attention block, m1 SLnL blocks, m2 local blocks with
/// max-pooling every pool_every blocks, then three classifiers (position,
/// velocity, concatenated features).
struct ModelConfig {
  std::size_t m1 = 2;
  std::size_t m2 = 2;
  std::vector<std::size_t> channels = {8, 8, 16, 16};
  std::vector<std::size_t> kernels = {3};  // single value broadcasts to all blocks
  std::size_t pool_every = 2;              // 0 disables pooling
  std::size_t k_systems = 2;               // K coordinate systems
  std::size_t joints_out = 16;             // N'
  std::size_t t_frames = 16;
  std::size_t coord_dim = 2;   // d
  std::size_t joints_in = 16;  // N
  std::size_t num_classes = 4;
  FAVariant attention = FAVariant::rfa;
  std::size_t attention_lambda = 4;
  LossConfig loss = LossConfig::smfl(2.0, 0.4);
  double dropout_rate = 0.2;
  std::uint64_t seed = 42;

  static ModelConfig desk_default() { return ModelConfig{}; }
  /// Full-scale reference from the original recipe: 6 blocks of channels
  /// 64..256, kernel 3, pooling every 2 blocks, K = 10, N' = 64. Recorded
  /// for documentation; far beyond desk-scale budgets.
  static ModelConfig paper_reference();

  std::size_t blocks() const { return m1 + m2; }
  std::size_t kernel_of(std::size_t block) const;
  void validate() const;
  ConfigMap to_config() const;
  static ModelConfig from_config(ConfigReader& reader);
};

struct ConvIds {
  int kernel = -1, bias = -1;
};
struct BNIds {
  int gamma = -1, beta = -1, run_mean = -1, run_var = -1;
};
struct DenseIds {
  int w = -1, b = -1;
};
struct AttnIds {
  int w2 = -1, b1 = -1, w1 = -1, b2 = -1;
};
struct NonLocalIds {
  int wg = -1, wphi = -1, wpsi = -1, ww = -1;
};
struct BlockIds {
  ConvIds tconv, sconv, stconv, proj;
  bool has_proj = false;
  BNIds bn;
  bool has_nl = false;
  NonLocalIds nl_t, nl_s, nl_st;
};
struct StreamIds {
  BNIds input_bn;
  DenseIds joint_map;
  std::vector<int> coord_maps;
  AttnIds fa_cos, fa_sin;  // fa_sin aliases fa_cos for the shared variant
  std::vector<BlockIds> blocks;
  DenseIds classifier;
};

class Model {
 public:
  explicit Model(ModelConfig cfg);

  const ModelConfig& config() const { return cfg_; }
  ParamStore& params() { return store_; }
  const ParamStore& params() const { return store_; }

  struct Heads {
    Value p_pos, p_vel, p_cat;
    Value z_pos, z_vel, z_cat;
  };

  /// Records the full two-stream forward pass on the tape. The velocity
  /// stream input is the front-padded first temporal difference of the
  /// position input. dropout_seed only matters in train mode.
  Heads build_heads(Tape& t, BoundParams& bound, const Tensor& position, Mode mode,
                    std::uint64_t dropout_seed = 0);

  /// Sum of the three per-classifier losses.
  Value build_loss(Tape& t, const Heads& heads, std::size_t label) const;

  struct Output {
    Tensor p_pos, p_vel, p_cat;
    Tensor z_pos, z_vel, z_cat;
  };
  Output forward(const Tensor& position, Mode mode, std::uint64_t dropout_seed = 0);

 private:
  StreamIds init_stream(const std::string& prefix, Rng& rng);
  Value stream_features(Tape& t, BoundParams& bound, const StreamIds& ids,
                        const Tensor& input, Mode mode, std::uint64_t dropout_seed);

  ModelConfig cfg_;
  ParamStore store_;
  StreamIds pos_, vel_;
  DenseIds cat_classifier_;
};

/// Front-padded first temporal difference.
Tensor velocity_of(const Tensor& position);

}  // namespace slnl
