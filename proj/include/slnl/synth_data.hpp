#pragma once

#include <string>
#include <vector>

#include "slnl/config.hpp"
#include "slnl/ops.hpp"

namespace slnl {

/// One action sample: joint positions over time plus its class label.
struct SkeletonSequence {
  std::size_t label = 0;
  Tensor positions;  // (d, T_raw, N)
};

/// Per-class generator. Joints oscillate around a shared base pose along
/// per-joint directions; freqs cycles over the joint index. phase_jitter
/// scales per-joint phase scatter around a per-sample common phase: 1 means
/// independent joints, near 0 means long-range phase locking.
struct ClassSpec {
  std::vector<double> freqs = {2.0};
  double amplitude = 1.0;
  double phase_jitter = 1.0;
  double noise_sigma = 0.1;
};

struct SyntheticSpec {
  std::size_t d = 2;
  std::size_t joints = 16;
  std::size_t t_raw = 80;
  std::size_t t_frames = 16;
  std::size_t train_per_class = 200;
  std::size_t test_per_class = 50;
  std::uint64_t seed = 42;
  std::vector<ClassSpec> classes;

  /// Four classes on a 2x2 grid of (frequency, phase coupling): classes 0/1
  /// and 2/3 differ only in oscillation frequency, classes 0/2 and 1/3 only
  /// in long-range joint correlation.
  static SyntheticSpec desk_default();
  void validate() const;

  ConfigMap to_config() const;
  /// Reads data.* and class.<i>.* keys; missing keys fall back to the desk
  /// default.
  static SyntheticSpec from_config(ConfigReader& reader);
};

std::vector<SkeletonSequence> generate(const SyntheticSpec& spec, std::size_t per_class,
                                       std::uint64_t split_salt);
std::vector<SkeletonSequence> generate_train(const SyntheticSpec& spec);
std::vector<SkeletonSequence> generate_test(const SyntheticSpec& spec);

/// Contiguous temporal window [start, start+len) resized to t_frames with
/// endpoint-aligned linear interpolation (affine-in-time signals survive
/// exactly).
Tensor crop_resize(const Tensor& x, std::size_t start, std::size_t len,
                   std::size_t t_frames);

/// Temporal crop + linear resize to t_frames. Train mode crops a random
/// contiguous window with ratio U[0.5,1]; eval mode crops the central 95%.
/// Degenerate crops (< 2 frames) fall back to the full sequence.
Tensor preprocess(const SkeletonSequence& sample, Mode mode, std::size_t t_frames,
                  std::uint64_t seed = 0);

// Dataset file: magic "SKDS", u32 version = 1, u32 sample count; per sample
// u32 label, u32 d, T, N, then the f64 payload; little-endian throughout.
void save_dataset(const std::string& path, const std::vector<SkeletonSequence>& samples);
std::vector<SkeletonSequence> load_dataset(const std::string& path);

std::size_t class_count(const std::vector<SkeletonSequence>& samples);

}  // namespace slnl
