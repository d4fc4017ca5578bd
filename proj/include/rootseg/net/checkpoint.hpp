#pragma once

#include <cstdint>
#include <cstdio>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <iterator>
#include <map>
#include <stdexcept>
#include <string>
#include <vector>

#include "rootseg/net/unet.hpp"

namespace rootseg::net {

class CheckpointError : public std::runtime_error {
 public:
  CheckpointError(const std::string& path, const std::string& what) : std::runtime_error(path + ": " + what) {}
};

inline constexpr char kCheckpointMagic[8] = {'R', 'S', 'E', 'G', 'C', 'K', 'P', 'T'};
inline constexpr std::uint32_t kCheckpointVersion = 1;

struct NamedTensor {
  std::string name;
  std::vector<int> shape;
  std::vector<float> data;
};

// Raw container contents; layout in docs/checkpoint_format.md.
struct Checkpoint {
  ArchSpec arch;
  std::map<std::string, double> metadata;
  std::vector<NamedTensor> tensors;

  const NamedTensor* find(const std::string& name) const {
    for (const auto& t : tensors)
      if (t.name == name) return &t;
    return nullptr;
  }
};

namespace detail {

template <typename U>
void put(std::string& buf, U v) {
  std::uint64_t bits = 0;
  static_assert(sizeof(U) <= 8);
  std::memcpy(&bits, &v, sizeof(U));
  for (std::size_t i = 0; i < sizeof(U); ++i) buf.push_back(static_cast<char>((bits >> (8 * i)) & 0xFF));
}

inline void put_string(std::string& buf, const std::string& s) {
  put<std::uint32_t>(buf, static_cast<std::uint32_t>(s.size()));
  buf += s;
}

class Reader {
 public:
  Reader(std::string data, std::string path) : data_(std::move(data)), path_(std::move(path)) {}

  template <typename U>
  U get() {
    need(sizeof(U));
    std::uint64_t bits = 0;
    for (std::size_t i = 0; i < sizeof(U); ++i)
      bits |= static_cast<std::uint64_t>(static_cast<unsigned char>(data_[pos_ + i])) << (8 * i);
    pos_ += sizeof(U);
    U v;
    std::memcpy(&v, &bits, sizeof(U));
    return v;
  }

  std::string get_string() {
    const auto n = get<std::uint32_t>();
    need(n);
    std::string s = data_.substr(pos_, n);
    pos_ += n;
    return s;
  }

  void need(std::size_t n) const {
    if (data_.size() - pos_ < n) throw CheckpointError(path_, "truncated checkpoint");
  }
  bool done() const { return pos_ == data_.size(); }

 private:
  std::string data_;
  std::string path_;
  std::size_t pos_ = 0;
};

}  // namespace detail

inline std::string encode_checkpoint(const Checkpoint& ck) {
  std::string buf(kCheckpointMagic, 8);
  detail::put<std::uint32_t>(buf, kCheckpointVersion);
  for (int v : {ck.arch.depth, ck.arch.base_channels, ck.arch.in_channels, ck.arch.out_channels, ck.arch.norm_groups})
    detail::put<std::int32_t>(buf, v);
  detail::put<std::uint32_t>(buf, static_cast<std::uint32_t>(ck.metadata.size()));
  for (const auto& [k, v] : ck.metadata) {
    detail::put_string(buf, k);
    detail::put<double>(buf, v);
  }
  detail::put<std::uint32_t>(buf, static_cast<std::uint32_t>(ck.tensors.size()));
  for (const auto& t : ck.tensors) {
    detail::put_string(buf, t.name);
    detail::put<std::uint32_t>(buf, static_cast<std::uint32_t>(t.shape.size()));
    std::uint64_t count = 1;
    for (int d : t.shape) {
      detail::put<std::int32_t>(buf, d);
      count *= static_cast<std::uint64_t>(d);
    }
    if (count != t.data.size()) throw std::invalid_argument("checkpoint: tensor " + t.name + " shape/data mismatch");
    detail::put<std::uint64_t>(buf, count);
    for (float f : t.data) detail::put<float>(buf, f);
  }
  return buf;
}

inline Checkpoint decode_checkpoint(std::string bytes, const std::string& path = "<memory>") {
  detail::Reader rd(std::move(bytes), path);
  rd.need(8);
  for (char m : kCheckpointMagic)
    if (rd.get<char>() != m) throw CheckpointError(path, "not a checkpoint (bad magic)");
  const auto version = rd.get<std::uint32_t>();
  if (version != kCheckpointVersion)
    throw CheckpointError(path, "unsupported checkpoint version " + std::to_string(version));
  Checkpoint ck;
  ck.arch.depth = rd.get<std::int32_t>();
  ck.arch.base_channels = rd.get<std::int32_t>();
  ck.arch.in_channels = rd.get<std::int32_t>();
  ck.arch.out_channels = rd.get<std::int32_t>();
  ck.arch.norm_groups = rd.get<std::int32_t>();
  const auto nmeta = rd.get<std::uint32_t>();
  for (std::uint32_t i = 0; i < nmeta; ++i) {
    std::string k = rd.get_string();
    ck.metadata[k] = rd.get<double>();
  }
  const auto ntensors = rd.get<std::uint32_t>();
  for (std::uint32_t i = 0; i < ntensors; ++i) {
    NamedTensor t;
    t.name = rd.get_string();
    const auto nd = rd.get<std::uint32_t>();
    std::uint64_t expect = 1;
    for (std::uint32_t d = 0; d < nd; ++d) {
      const int v = rd.get<std::int32_t>();
      if (v < 0) throw CheckpointError(path, "negative dimension in " + t.name);
      t.shape.push_back(v);
      expect *= static_cast<std::uint64_t>(v);
    }
    const auto count = rd.get<std::uint64_t>();
    if (count != expect) throw CheckpointError(path, "element count does not match shape in " + t.name);
    rd.need(count * 4);
    t.data.resize(count);
    for (auto& f : t.data) f = rd.get<float>();
    ck.tensors.push_back(std::move(t));
  }
  if (!rd.done()) throw CheckpointError(path, "trailing bytes after last tensor");
  return ck;
}

// Written to a sibling temporary and renamed, so readers never see half a file.
inline void write_checkpoint(const std::filesystem::path& path, const Checkpoint& ck) {
  const std::string bytes = encode_checkpoint(ck);
  const std::filesystem::path tmp = path.string() + ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw CheckpointError(path.string(), "cannot open for writing");
    out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
    if (!out) throw CheckpointError(path.string(), "write failed");
  }
  std::error_code ec;
  std::filesystem::rename(tmp, path, ec);
  if (ec) {
    std::filesystem::remove(tmp, ec);
    throw CheckpointError(path.string(), "cannot rename temporary file");
  }
}

inline Checkpoint read_checkpoint(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw CheckpointError(path.string(), "cannot open");
  std::string bytes((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  return decode_checkpoint(std::move(bytes), path.string());
}

// Adds every parameter tensor under `prefix`+name.
inline void put_params(Checkpoint& ck, const NetworkParams<float>& p, const std::string& prefix = "") {
  for (const auto& t : p.tensors) ck.tensors.push_back({prefix + t.name, t.shape, std::vector<float>(t.data.begin(), t.data.end())});
}

// Rebuilds a parameter set for ck.arch from tensors named `prefix`+name;
// every expected tensor must be present with the expected shape.
inline NetworkParams<float> get_params(const Checkpoint& ck, const std::string& prefix = "",
                                       const std::string& path = "<checkpoint>") {
  try {
    ck.arch.validate();
  } catch (const std::invalid_argument& e) {
    throw CheckpointError(path, e.what());
  }
  NetworkParams<float> p = make_params<float>(ck.arch);
  for (auto& t : p.tensors) {
    const NamedTensor* src = ck.find(prefix + t.name);
    if (!src) throw CheckpointError(path, "missing tensor " + prefix + t.name);
    if (src->shape != t.shape) throw CheckpointError(path, "shape mismatch for " + prefix + t.name);
    t.data.assign(src->data.begin(), src->data.end());
  }
  return p;
}

inline Checkpoint model_checkpoint(const NetworkParams<float>& p, std::map<std::string, double> metadata = {}) {
  Checkpoint ck;
  ck.arch = p.arch;
  ck.metadata = std::move(metadata);
  put_params(ck, p);
  return ck;
}

inline NetworkParams<float> load_model(const std::filesystem::path& path) {
  return get_params(read_checkpoint(path), "", path.string());
}

}  // namespace rootseg::net
