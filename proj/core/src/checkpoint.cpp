#include "s2h/checkpoint.hpp"

#include <algorithm>
#include <array>
#include <bit>
#include <cstring>
#include <fstream>
#include <vector>

namespace s2h {

namespace {

constexpr std::array<char, 8> kMagic = {'S', '2', 'H', 'C', 'K', 'P', 'T', '\0'};

template <class T>
T swap_bytes(T v) {
  auto bytes = std::bit_cast<std::array<unsigned char, sizeof(T)>>(v);
  std::reverse(bytes.begin(), bytes.end());
  return std::bit_cast<T>(bytes);
}

template <class T>
void put(std::ostream& os, T value) {
  if constexpr (std::endian::native == std::endian::big) value = swap_bytes(value);
  os.write(reinterpret_cast<const char*>(&value), sizeof(T));
}

void put_f64(std::ostream& os, double v) { put(os, std::bit_cast<std::uint64_t>(v)); }

template <class T>
T get(std::istream& is) {
  T value{};
  is.read(reinterpret_cast<char*>(&value), sizeof(T));
  require(static_cast<bool>(is), ErrorCode::Io, "checkpoint is truncated");
  if constexpr (std::endian::native == std::endian::big) value = swap_bytes(value);
  return value;
}

std::string get_string(std::istream& is, std::uint64_t n) {
  require(n < (1ULL << 32), ErrorCode::Io, "checkpoint string length is implausible");
  std::string s(n, '\0');
  is.read(s.data(), static_cast<std::streamsize>(n));
  require(static_cast<bool>(is), ErrorCode::Io, "checkpoint is truncated");
  return s;
}

}  // namespace

void write_checkpoint(const std::filesystem::path& path, const Checkpoint& ckpt) {
  std::ofstream os(path, std::ios::binary | std::ios::trunc);
  require(static_cast<bool>(os), ErrorCode::Io, "cannot open " + path.string() + " for writing");
  os.write(kMagic.data(), kMagic.size());
  put<std::uint32_t>(os, kCheckpointVersion);
  const std::string text = ckpt.config.to_string();
  put<std::uint64_t>(os, text.size());
  os.write(text.data(), static_cast<std::streamsize>(text.size()));
  put<std::uint64_t>(os, ckpt.tensors.size());
  for (const auto& [name, t] : ckpt.tensors) {
    put<std::uint32_t>(os, static_cast<std::uint32_t>(name.size()));
    os.write(name.data(), static_cast<std::streamsize>(name.size()));
    put<std::uint32_t>(os, 2);
    put<std::uint64_t>(os, static_cast<std::uint64_t>(t.rows()));
    put<std::uint64_t>(os, static_cast<std::uint64_t>(t.cols()));
    for (Eigen::Index i = 0; i < t.size(); ++i) put_f64(os, t.data()[i]);
  }
  require(static_cast<bool>(os), ErrorCode::Io, "failed writing " + path.string());
}

Checkpoint read_checkpoint(const std::filesystem::path& path) {
  std::ifstream is(path, std::ios::binary);
  require(static_cast<bool>(is), ErrorCode::Io, "cannot open " + path.string());
  std::array<char, 8> magic{};
  is.read(magic.data(), magic.size());
  require(static_cast<bool>(is) && magic == kMagic, ErrorCode::Io, path.string() + " is not a checkpoint");
  const auto version = get<std::uint32_t>(is);
  require(version == kCheckpointVersion, ErrorCode::Io,
          "unsupported checkpoint version " + std::to_string(version));
  Checkpoint ckpt;
  ckpt.config = KvConfig::parse(get_string(is, get<std::uint64_t>(is)));
  const auto count = get<std::uint64_t>(is);
  for (std::uint64_t k = 0; k < count; ++k) {
    std::string name = get_string(is, get<std::uint32_t>(is));
    const auto rank = get<std::uint32_t>(is);
    require(rank >= 1 && rank <= 2, ErrorCode::Io, "tensor " + name + " has unsupported rank");
    std::uint64_t dims[2] = {1, 1};
    for (std::uint32_t r = 0; r < rank; ++r) dims[r] = get<std::uint64_t>(is);
    require(dims[0] < (1ULL << 31) && dims[1] < (1ULL << 31), ErrorCode::Io, "tensor " + name + " is too large");
    Matrix t(static_cast<Eigen::Index>(dims[0]), static_cast<Eigen::Index>(dims[1]));
    for (Eigen::Index i = 0; i < t.size(); ++i) t.data()[i] = std::bit_cast<double>(get<std::uint64_t>(is));
    ckpt.tensors.emplace(std::move(name), std::move(t));
  }
  return ckpt;
}

void save_pipeline(const std::filesystem::path& path, const PipelineConfig& cfg, const PipelineParams& params,
                   const KvConfig& extra) {
  Checkpoint ckpt;
  ckpt.config = extra;
  cfg.to_config(ckpt.config);
  params.visit([&](const std::string& name, const Matrix& t) { ckpt.tensors.emplace(name, t); });
  write_checkpoint(path, ckpt);
}

LoadedPipeline load_pipeline(const std::filesystem::path& path) {
  Checkpoint ckpt = read_checkpoint(path);
  LoadedPipeline out;
  out.raw_config = ckpt.config;
  out.config = PipelineConfig::from_config(ckpt.config);
  // Shapes come from the configuration; values from the file.
  out.params = init_pipeline(out.config, nullptr, 0);
  std::size_t used = 0;
  out.params.visit([&](const std::string& name, Matrix& t) {
    const auto it = ckpt.tensors.find(name);
    require(it != ckpt.tensors.end(), ErrorCode::ShapeMismatch, "checkpoint lacks tensor " + name);
    require(it->second.rows() == t.rows() && it->second.cols() == t.cols(), ErrorCode::ShapeMismatch,
            "tensor " + name + " has the wrong shape");
    t = it->second;
    ++used;
  });
  require(used == ckpt.tensors.size(), ErrorCode::ShapeMismatch, "checkpoint has tensors the model does not use");
  return out;
}

}  // namespace s2h
