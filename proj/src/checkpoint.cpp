#include "slnl/checkpoint.hpp"

#include <cstring>
#include <fstream>

namespace slnl {

namespace {

constexpr char kMagic[4] = {'C', 'K', 'P', 'T'};

void put_u32(std::ostream& out, std::uint32_t v) {
  unsigned char b[4] = {static_cast<unsigned char>(v & 0xff),
                        static_cast<unsigned char>((v >> 8) & 0xff),
                        static_cast<unsigned char>((v >> 16) & 0xff),
                        static_cast<unsigned char>((v >> 24) & 0xff)};
  out.write(reinterpret_cast<const char*>(b), 4);
}

std::uint32_t get_u32(std::istream& in, std::size_t* offset, const std::string& what) {
  unsigned char b[4];
  in.read(reinterpret_cast<char*>(b), 4);
  if (in.gcount() != 4)
    throw std::runtime_error("checkpoint: truncated while reading " + what +
                             " at byte offset " + std::to_string(*offset));
  *offset += 4;
  return std::uint32_t(b[0]) | (std::uint32_t(b[1]) << 8) | (std::uint32_t(b[2]) << 16) |
         (std::uint32_t(b[3]) << 24);
}

std::string get_blob(std::istream& in, std::size_t n, std::size_t* offset,
                     const std::string& what) {
  std::string s(n, '\0');
  in.read(s.data(), static_cast<std::streamsize>(n));
  if (static_cast<std::size_t>(in.gcount()) != n)
    throw std::runtime_error("checkpoint: truncated while reading " + what +
                             " at byte offset " + std::to_string(*offset));
  *offset += n;
  return s;
}

}  // namespace

void save_checkpoint(const std::string& path, const Model& model) {
  std::ofstream out(path, std::ios::binary);
  check(out.good(), "checkpoint: cannot open " + path);
  const std::string config = serialize_config(model.config().to_config());
  out.write(kMagic, 4);
  put_u32(out, 1);
  put_u32(out, static_cast<std::uint32_t>(config.size()));
  out.write(config.data(), static_cast<std::streamsize>(config.size()));
  const ParamStore& store = model.params();
  put_u32(out, static_cast<std::uint32_t>(store.size()));
  for (std::size_t i = 0; i < store.size(); ++i) {
    const auto& e = store.entry(static_cast<int>(i));
    put_u32(out, static_cast<std::uint32_t>(e.name.size()));
    out.write(e.name.data(), static_cast<std::streamsize>(e.name.size()));
    write_tensor(out, e.value);
  }
  check(out.good(), "checkpoint: write failed for " + path);
}

Model load_checkpoint(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in.good()) throw std::runtime_error("checkpoint: cannot open " + path);
  std::size_t offset = 0;
  unsigned char magic[4];
  in.read(reinterpret_cast<char*>(magic), 4);
  if (in.gcount() != 4 || std::memcmp(magic, kMagic, 4) != 0)
    throw std::runtime_error("checkpoint: bad magic at byte offset 0");
  offset = 4;
  const std::uint32_t version = get_u32(in, &offset, "version");
  if (version != 1)
    throw std::runtime_error("checkpoint: unsupported version " + std::to_string(version));
  const std::uint32_t config_len = get_u32(in, &offset, "config length");
  const std::string config_text = get_blob(in, config_len, &offset, "config");
  ConfigReader reader(parse_config(config_text));
  Model model(ModelConfig::from_config(reader));

  const std::uint32_t count = get_u32(in, &offset, "record count");
  check(count == model.params().size(),
        "checkpoint: record count " + std::to_string(count) + " does not match the model (" +
            std::to_string(model.params().size()) + ")");
  for (std::uint32_t i = 0; i < count; ++i) {
    const std::uint32_t name_len = get_u32(in, &offset, "name length");
    const std::string name = get_blob(in, name_len, &offset, "name");
    Tensor value = read_tensor(in, &offset);
    const int id = model.params().find(name);
    check(id >= 0, "checkpoint: unknown parameter '" + name + "'");
    require_shape(value, model.params().value(id).shape, "checkpoint " + name);
    model.params().value(id) = std::move(value);
  }
  return model;
}

}  // namespace slnl
