#include "slnl/synth_data.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <cstring>
#include <fstream>
#include <numbers>

namespace slnl {

SyntheticSpec SyntheticSpec::desk_default() {
  SyntheticSpec s;
  s.classes = {
      ClassSpec{{2.0}, 1.0, 1.0, 0.1},
      ClassSpec{{5.0}, 1.0, 1.0, 0.1},
      ClassSpec{{2.0}, 1.0, 0.05, 0.1},
      ClassSpec{{5.0}, 1.0, 0.05, 0.1},
  };
  return s;
}

ConfigMap SyntheticSpec::to_config() const {
  ConfigMap m;
  auto num = [](double v) {
    char buf[40];
    std::snprintf(buf, sizeof(buf), "%.17g", v);
    return std::string(buf);
  };
  m["data.d"] = std::to_string(d);
  m["data.joints"] = std::to_string(joints);
  m["data.t_raw"] = std::to_string(t_raw);
  m["data.t_frames"] = std::to_string(t_frames);
  m["data.train_per_class"] = std::to_string(train_per_class);
  m["data.test_per_class"] = std::to_string(test_per_class);
  m["data.seed"] = std::to_string(seed);
  m["data.classes"] = std::to_string(classes.size());
  for (std::size_t i = 0; i < classes.size(); ++i) {
    const std::string p = "class." + std::to_string(i) + ".";
    std::string freqs;
    for (std::size_t k = 0; k < classes[i].freqs.size(); ++k)
      freqs += (k ? "," : "") + num(classes[i].freqs[k]);
    m[p + "freqs"] = freqs;
    m[p + "amplitude"] = num(classes[i].amplitude);
    m[p + "phase_jitter"] = num(classes[i].phase_jitter);
    m[p + "noise_sigma"] = num(classes[i].noise_sigma);
  }
  return m;
}

SyntheticSpec SyntheticSpec::from_config(ConfigReader& r) {
  SyntheticSpec s = desk_default();
  s.d = r.get_size("data.d", s.d);
  s.joints = r.get_size("data.joints", s.joints);
  s.t_raw = r.get_size("data.t_raw", s.t_raw);
  s.t_frames = r.get_size("data.t_frames", s.t_frames);
  s.train_per_class = r.get_size("data.train_per_class", s.train_per_class);
  s.test_per_class = r.get_size("data.test_per_class", s.test_per_class);
  s.seed = r.get_u64("data.seed", s.seed);
  const std::size_t n_classes = r.get_size("data.classes", s.classes.size());
  if (n_classes != s.classes.size()) s.classes.resize(n_classes);
  for (std::size_t i = 0; i < s.classes.size(); ++i) {
    const std::string p = "class." + std::to_string(i) + ".";
    ClassSpec& c = s.classes[i];
    c.freqs = r.get_double_list(p + "freqs", c.freqs.empty() ? std::vector<double>{2.0}
                                                             : c.freqs);
    c.amplitude = r.get_double(p + "amplitude", c.amplitude);
    c.phase_jitter = r.get_double(p + "phase_jitter", c.phase_jitter);
    c.noise_sigma = r.get_double(p + "noise_sigma", c.noise_sigma);
  }
  r.reject_unconsumed("data.");
  r.reject_unconsumed("class.");
  s.validate();
  return s;
}

void SyntheticSpec::validate() const {
  check(!classes.empty(), "synthetic spec: at least one class required");
  check(d >= 1 && joints >= 1, "synthetic spec: bad dimensions");
  check(t_raw >= 4, "synthetic spec: t_raw must be >= 4");
  check(t_frames >= 2 && t_frames <= t_raw, "synthetic spec: t_frames out of range");
  for (const ClassSpec& c : classes) {
    check(!c.freqs.empty(), "synthetic spec: class frequency set empty");
    check(c.noise_sigma >= 0.0 && c.amplitude >= 0.0 && c.phase_jitter >= 0.0,
          "synthetic spec: negative class parameter");
  }
}

namespace {

constexpr double kTwoPi = 2.0 * std::numbers::pi;

SkeletonSequence generate_one(const SyntheticSpec& spec, std::size_t cls, std::uint64_t seed) {
  const ClassSpec& c = spec.classes[cls];
  Rng rng(seed);
  const std::size_t d = spec.d, N = spec.joints, T = spec.t_raw;

  const double theta = uniform(rng, 0.0, kTwoPi);
  std::vector<double> joint_phase(N);
  for (std::size_t j = 0; j < N; ++j)
    joint_phase[j] = theta + c.phase_jitter * uniform(rng, -std::numbers::pi, std::numbers::pi);

  SkeletonSequence out;
  out.label = cls;
  out.positions = Tensor({d, T, N});
  for (std::size_t j = 0; j < N; ++j) {
    const double ring = kTwoPi * static_cast<double>(j) / static_cast<double>(N);
    const double f = c.freqs[j % c.freqs.size()];
    for (std::size_t t = 0; t < T; ++t) {
      const double osc =
          c.amplitude * std::sin(kTwoPi * f * static_cast<double>(t) / static_cast<double>(T) +
                                 joint_phase[j]);
      for (std::size_t cd = 0; cd < d; ++cd) {
        double base = 0.0, dir = 1.0;
        if (cd == 0) {
          base = std::cos(ring);
          dir = std::cos(ring + std::numbers::pi / 2.0);
        } else if (cd == 1) {
          base = std::sin(ring);
          dir = std::sin(ring + std::numbers::pi / 2.0);
        }
        out.positions.at3(cd, t, j) = base + osc * dir + gaussian(rng, 0.0, c.noise_sigma);
      }
    }
  }
  return out;
}

}  // namespace

std::vector<SkeletonSequence> generate(const SyntheticSpec& spec, std::size_t per_class,
                                       std::uint64_t split_salt) {
  spec.validate();
  std::vector<SkeletonSequence> out;
  out.reserve(per_class * spec.classes.size());
  for (std::size_t cls = 0; cls < spec.classes.size(); ++cls)
    for (std::size_t i = 0; i < per_class; ++i)
      out.push_back(generate_one(
          spec, cls, mix_seed(mix_seed(spec.seed, split_salt * 1000003 + cls), i)));
  return out;
}

std::vector<SkeletonSequence> generate_train(const SyntheticSpec& spec) {
  return generate(spec, spec.train_per_class, 0);
}

std::vector<SkeletonSequence> generate_test(const SyntheticSpec& spec) {
  return generate(spec, spec.test_per_class, 1);
}

Tensor crop_resize(const Tensor& x, std::size_t start, std::size_t len,
                   std::size_t t_frames) {
  require_rank(x, 3, "crop_resize");
  const std::size_t d = x.shape[0], T = x.shape[1], N = x.shape[2];
  check(len >= 1 && start + len <= T, "crop_resize: window out of bounds");
  check(t_frames >= 1, "crop_resize: t_frames must be >= 1");
  Tensor out({d, t_frames, N});
  // endpoint-aligned linear interpolation preserves affine-in-time signals
  const double scale =
      t_frames > 1 ? static_cast<double>(len - 1) / static_cast<double>(t_frames - 1) : 0.0;
  for (std::size_t tf = 0; tf < t_frames; ++tf) {
    const double u = static_cast<double>(tf) * scale;
    const std::size_t lo = std::min(static_cast<std::size_t>(u), len - 1);
    const std::size_t hi = std::min(lo + 1, len - 1);
    const double w = u - static_cast<double>(lo);
    for (std::size_t c = 0; c < d; ++c)
      for (std::size_t j = 0; j < N; ++j)
        out.at3(c, tf, j) = (1.0 - w) * x.at3(c, start + lo, j) + w * x.at3(c, start + hi, j);
  }
  return out;
}

Tensor preprocess(const SkeletonSequence& sample, Mode mode, std::size_t t_frames,
                  std::uint64_t seed) {
  const Tensor& x = sample.positions;
  require_rank(x, 3, "preprocess");
  const std::size_t T = x.shape[1];
  check(T >= 4, "preprocess: sequence must have at least 4 frames");
  check(t_frames >= 2, "preprocess: t_frames must be >= 2");

  std::size_t start = 0, len = T;
  if (mode == Mode::train) {
    Rng rng(seed);
    const double ratio = uniform(rng, 0.5, 1.0);
    len = static_cast<std::size_t>(std::lround(ratio * static_cast<double>(T)));
    if (len < 2) len = T;  // degenerate crop falls back to the full sequence
    if (len > T) len = T;
    start = len == T ? 0 : rng() % (T - len + 1);
  } else {
    len = static_cast<std::size_t>(std::lround(0.95 * static_cast<double>(T)));
    if (len < 2) len = T;
    if (len > T) len = T;
    start = (T - len) / 2;
  }
  return crop_resize(x, start, len, t_frames);
}

namespace {

void put_u32(std::ostream& out, std::uint32_t v) {
  unsigned char b[4] = {static_cast<unsigned char>(v & 0xff),
                        static_cast<unsigned char>((v >> 8) & 0xff),
                        static_cast<unsigned char>((v >> 16) & 0xff),
                        static_cast<unsigned char>((v >> 24) & 0xff)};
  out.write(reinterpret_cast<const char*>(b), 4);
}

void put_f64(std::ostream& out, double v) {
  std::uint64_t u = std::bit_cast<std::uint64_t>(v);
  unsigned char b[8];
  for (int i = 0; i < 8; ++i) b[i] = static_cast<unsigned char>((u >> (8 * i)) & 0xff);
  out.write(reinterpret_cast<const char*>(b), 8);
}

[[noreturn]] void io_fail(const std::string& what, std::size_t offset) {
  throw std::runtime_error(what + " at byte offset " + std::to_string(offset));
}

void get_bytes(std::istream& in, unsigned char* dst, std::size_t n, std::size_t* offset,
               const std::string& what) {
  in.read(reinterpret_cast<char*>(dst), static_cast<std::streamsize>(n));
  if (static_cast<std::size_t>(in.gcount()) != n)
    io_fail("truncated dataset while reading " + what, *offset);
  *offset += n;
}

std::uint32_t get_u32(std::istream& in, std::size_t* offset, const std::string& what) {
  unsigned char b[4];
  get_bytes(in, b, 4, offset, what);
  return std::uint32_t(b[0]) | (std::uint32_t(b[1]) << 8) | (std::uint32_t(b[2]) << 16) |
         (std::uint32_t(b[3]) << 24);
}

constexpr char kMagic[4] = {'S', 'K', 'D', 'S'};

}  // namespace

void save_dataset(const std::string& path, const std::vector<SkeletonSequence>& samples) {
  std::ofstream out(path, std::ios::binary);
  check(out.good(), "save_dataset: cannot open " + path);
  out.write(kMagic, 4);
  put_u32(out, 1);  // version
  put_u32(out, static_cast<std::uint32_t>(samples.size()));
  for (const SkeletonSequence& s : samples) {
    require_rank(s.positions, 3, "save_dataset sample");
    put_u32(out, static_cast<std::uint32_t>(s.label));
    for (std::size_t axis = 0; axis < 3; ++axis)
      put_u32(out, static_cast<std::uint32_t>(s.positions.shape[axis]));
    for (double v : s.positions.data) put_f64(out, v);
  }
  check(out.good(), "save_dataset: write failed for " + path);
}

std::vector<SkeletonSequence> load_dataset(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in.good()) throw std::runtime_error("load_dataset: cannot open " + path);
  std::size_t offset = 0;
  unsigned char magic[4];
  get_bytes(in, magic, 4, &offset, "magic");
  if (std::memcmp(magic, kMagic, 4) != 0) io_fail("bad dataset magic", 0);
  const std::uint32_t version = get_u32(in, &offset, "version");
  if (version != 1) io_fail("unsupported dataset version " + std::to_string(version), 4);
  const std::uint32_t count = get_u32(in, &offset, "sample count");
  std::vector<SkeletonSequence> out;
  out.reserve(count);
  for (std::uint32_t i = 0; i < count; ++i) {
    SkeletonSequence s;
    s.label = get_u32(in, &offset, "label");
    std::size_t d = get_u32(in, &offset, "extent");
    std::size_t T = get_u32(in, &offset, "extent");
    std::size_t N = get_u32(in, &offset, "extent");
    if (d == 0 || T == 0 || N == 0) io_fail("zero extent in sample", offset - 4);
    s.positions = Tensor({d, T, N});
    unsigned char b[8];
    for (double& v : s.positions.data) {
      get_bytes(in, b, 8, &offset, "payload");
      std::uint64_t u = 0;
      for (int k = 0; k < 8; ++k) u |= std::uint64_t(b[k]) << (8 * k);
      v = std::bit_cast<double>(u);
    }
    out.push_back(std::move(s));
  }
  return out;
}

std::size_t class_count(const std::vector<SkeletonSequence>& samples) {
  std::size_t c = 0;
  for (const SkeletonSequence& s : samples) c = std::max(c, s.label + 1);
  return c;
}

}  // namespace slnl
