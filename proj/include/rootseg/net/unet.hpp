#pragma once

#include <cmath>
#include <cstdint>
#include <optional>
#include <stdexcept>
#include <string>
#include <unordered_map>
#include <utility>
#include <vector>

#include "rootseg/net/layers.hpp"
#include "rootseg/raster.hpp"
#include "rootseg/rng.hpp"

namespace rootseg::net {

// U-Net layout: `depth` resolution levels, channels doubling per level.
// Down levels run conv3x3 -> ReLU -> GroupNorm twice, then 2x2 max pool.
// Up levels run a 2x2 transposed conv, concatenate the centre-cropped skip and
// repeat the double conv block. A 1x1 conv + logistic gives the root probability.
struct ArchSpec {
  int depth = 3;
  int base_channels = 8;
  int in_channels = 3;
  int out_channels = 1;
  int norm_groups = 4;

  int channels_at(int level) const { return base_channels << level; }

  void validate() const {
    if (depth < 1) throw std::invalid_argument("ArchSpec: depth must be >= 1");
    if (base_channels < 1 || in_channels < 1 || out_channels < 1)
      throw std::invalid_argument("ArchSpec: channel counts must be positive");
    if (norm_groups < 1) throw std::invalid_argument("ArchSpec: norm_groups must be >= 1");
    for (int l = 0; l < depth; ++l)
      if (channels_at(l) % norm_groups != 0)
        throw std::invalid_argument("ArchSpec: norm_groups " + std::to_string(norm_groups) +
                                    " does not divide " + std::to_string(channels_at(l)) + " channels");
  }

  static ArchSpec original() { return ArchSpec{5, 64, 3, 1, 4}; }
  friend bool operator==(const ArchSpec&, const ArchSpec&) = default;
};

class GeometryError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

// Output side length for a square input, following every valid conv, pool and
// up-sampling step. Throws naming the level where the size becomes invalid.
inline int output_geometry(const ArchSpec& arch, int input_size) {
  auto fail = [&](const std::string& where, int size) {
    throw GeometryError("input " + std::to_string(input_size) + ": size " + std::to_string(size) + " at " +
                        where + " is invalid");
  };
  int s = input_size;
  auto convs = [&](const std::string& where) {
    if (s <= 4) fail(where, s);
    s -= 4;
  };
  for (int l = 0; l < arch.depth - 1; ++l) {
    convs("down level " + std::to_string(l));
    if (s % 2 != 0) fail("pooling after down level " + std::to_string(l), s);
    s /= 2;
  }
  convs("bottom level " + std::to_string(arch.depth - 1));
  for (int l = arch.depth - 2; l >= 0; --l) {
    s *= 2;
    convs("up level " + std::to_string(l));
  }
  return s;
}

template <typename T>
struct ParamTensor {
  std::string name;
  std::vector<int> shape;
  Buffer<T> data;
  bool is_norm = false;  // group-norm scale/shift: exempt from weight decay
};

template <typename T>
struct NetworkParams {
  ArchSpec arch;
  std::vector<ParamTensor<T>> tensors;

  ParamTensor<T>& operator[](const std::string& name) { return tensors[index_of(name)]; }
  const ParamTensor<T>& operator[](const std::string& name) const { return tensors[index_of(name)]; }

  std::size_t index_of(const std::string& name) const {
    if (lookup_.size() != tensors.size()) {
      lookup_.clear();
      for (std::size_t i = 0; i < tensors.size(); ++i) lookup_[tensors[i].name] = i;
    }
    auto it = lookup_.find(name);
    if (it == lookup_.end()) throw std::out_of_range("NetworkParams: no tensor '" + name + "'");
    return it->second;
  }

  std::size_t parameter_count() const {
    std::size_t n = 0;
    for (const auto& t : tensors) n += t.data.size();
    return n;
  }

  // Same names and shapes, zero-filled.
  NetworkParams zeros_like() const {
    NetworkParams z;
    z.arch = arch;
    z.tensors = tensors;
    for (auto& t : z.tensors) std::fill(t.data.begin(), t.data.end(), T(0));
    return z;
  }

  template <typename U>
  NetworkParams<U> cast() const {
    NetworkParams<U> out;
    out.arch = arch;
    for (const auto& t : tensors)
      out.tensors.push_back({t.name, t.shape, std::vector<U>(t.data.begin(), t.data.end()), t.is_norm});
    return out;
  }

 private:
  mutable std::unordered_map<std::string, std::size_t> lookup_;
};

namespace detail {

inline std::string block_name(int level, bool up) {
  if (up) return "up" + std::to_string(level);
  return "down" + std::to_string(level);
}

template <typename T>
void add_conv(NetworkParams<T>& p, const std::string& name, int cin, int cout, int k) {
  p.tensors.push_back({name + ".weight", {cout, cin, k, k}, Buffer<T>(static_cast<std::size_t>(cout) * cin * k * k), false});
  p.tensors.push_back({name + ".bias", {cout}, Buffer<T>(cout), false});
}

template <typename T>
void add_norm(NetworkParams<T>& p, const std::string& name, int ch) {
  p.tensors.push_back({name + ".scale", {ch}, Buffer<T>(ch, T(1)), true});
  p.tensors.push_back({name + ".shift", {ch}, Buffer<T>(ch, T(0)), true});
}

template <typename T>
void add_block(NetworkParams<T>& p, const std::string& name, int cin, int cout) {
  add_conv(p, name + ".conv0", cin, cout, 3);
  add_norm(p, name + ".norm0", cout);
  add_conv(p, name + ".conv1", cout, cout, 3);
  add_norm(p, name + ".norm1", cout);
}

}  // namespace detail

// Parameter layout with zero weights, unit norm scales.
template <typename T>
NetworkParams<T> make_params(const ArchSpec& arch) {
  arch.validate();
  NetworkParams<T> p;
  p.arch = arch;
  int cin = arch.in_channels;
  for (int l = 0; l < arch.depth; ++l) {
    detail::add_block(p, detail::block_name(l, false), cin, arch.channels_at(l));
    cin = arch.channels_at(l);
  }
  for (int l = arch.depth - 2; l >= 0; --l) {
    const std::string n = detail::block_name(l, true);
    const int c = arch.channels_at(l);
    // Transposed conv weight stored as (Cout*4) x Cin.
    p.tensors.push_back({n + ".upconv.weight", {c, 2, 2, arch.channels_at(l + 1)},
                         Buffer<T>(static_cast<std::size_t>(c) * 4 * arch.channels_at(l + 1)), false});
    p.tensors.push_back({n + ".upconv.bias", {c}, Buffer<T>(c), false});
    detail::add_block(p, n, 2 * c, c);
  }
  detail::add_conv(p, "head", arch.channels_at(0), arch.out_channels, 1);
  return p;
}

inline int fan_in(const std::string& name, const std::vector<int>& shape) {
  if (name.find(".upconv.") != std::string::npos) return shape[3];  // one tap per input channel
  return shape[1] * shape[2] * shape[3];
}

// He initialisation: weights ~ N(0, 2 / fan_in), biases 0, norm scale 1 / shift 0.
template <typename T>
NetworkParams<T> he_init(const ArchSpec& arch, std::uint64_t seed) {
  NetworkParams<T> p = make_params<T>(arch);
  Rng rng(seed);
  for (auto& t : p.tensors) {
    if (t.is_norm || t.shape.size() != 4) continue;
    const double sd = std::sqrt(2.0 / fan_in(t.name, t.shape));
    for (auto& v : t.data) v = static_cast<T>(rng.normal(0.0, sd));
  }
  return p;
}

template <typename T>
struct BlockCache {
  Tensor<T> input;
  Tensor<T> relu0, relu1;
  GroupNormCache<T> norm0, norm1;
  Tensor<T> mid;  // output of the first norm, input to conv1
};

template <typename T>
struct ForwardCache {
  std::vector<BlockCache<T>> down;  // depth entries (last is the bottom)
  std::vector<Tensor<T>> skips;
  std::vector<std::vector<unsigned char>> pool_argmax;
  std::vector<Tensor<T>> up_inputs;  // inputs to each transposed conv, indexed by level
  std::vector<int> skip_channels;
  std::vector<BlockCache<T>> up;  // indexed by level
  Tensor<T> head_input;
  Tensor<T> prob;
};

template <typename T>
struct ForwardResult {
  Tensor<T> prob;
  std::optional<ForwardCache<T>> cache;
};

namespace detail {

constexpr double kNormEps = 1e-5;

template <typename T>
Tensor<T> block_forward(const NetworkParams<T>& p, const std::string& name, const Tensor<T>& x,
                        BlockCache<T>* cache, Buffer<T>& scratch) {
  const int groups = p.arch.norm_groups;
  const auto& w0 = p[name + ".conv0.weight"];
  Tensor<T> a = conv_forward(x, w0.data, p[name + ".conv0.bias"].data, w0.shape[0], 3, scratch);
  relu_inplace(a);
  Tensor<T> m = group_norm_forward(a, groups, p[name + ".norm0.scale"].data, p[name + ".norm0.shift"].data,
                                   T(kNormEps), cache ? &cache->norm0 : nullptr);
  const auto& w1 = p[name + ".conv1.weight"];
  Tensor<T> b = conv_forward(m, w1.data, p[name + ".conv1.bias"].data, w1.shape[0], 3, scratch);
  relu_inplace(b);
  Tensor<T> y = group_norm_forward(b, groups, p[name + ".norm1.scale"].data, p[name + ".norm1.shift"].data,
                                   T(kNormEps), cache ? &cache->norm1 : nullptr);
  if (cache) {
    cache->input = x;
    cache->relu0 = std::move(a);
    cache->relu1 = std::move(b);
    cache->mid = std::move(m);
  }
  return y;
}

template <typename T>
Tensor<T> block_backward(const NetworkParams<T>& p, NetworkParams<T>& g, const std::string& name,
                         const BlockCache<T>& cache, const Tensor<T>& dY, Buffer<T>& scratch) {
  const int groups = p.arch.norm_groups;
  Tensor<T> d = group_norm_backward(cache.norm1, groups, p[name + ".norm1.scale"].data, dY,
                                    g[name + ".norm1.scale"].data, g[name + ".norm1.shift"].data);
  relu_backward_inplace(cache.relu1, d);
  d = conv_backward(cache.mid, p[name + ".conv1.weight"].data, d, 3, g[name + ".conv1.weight"].data,
                    g[name + ".conv1.bias"].data, scratch);
  d = group_norm_backward(cache.norm0, groups, p[name + ".norm0.scale"].data, d, g[name + ".norm0.scale"].data,
                          g[name + ".norm0.shift"].data);
  relu_backward_inplace(cache.relu0, d);
  return conv_backward(cache.input, p[name + ".conv0.weight"].data, d, 3, g[name + ".conv0.weight"].data,
                       g[name + ".conv0.bias"].data, scratch);
}

template <typename T>
T logistic(T z) {
  return T(1) / (T(1) + std::exp(-z));
}

}  // namespace detail

// Interleaved H x W x C raster to channel-major tensor.
template <typename T>
Tensor<T> to_tensor(const RasterImage& img) {
  Tensor<T> t(img.channels(), img.height(), img.width());
  for (int r = 0; r < img.height(); ++r)
    for (int c = 0; c < img.width(); ++c)
      for (int k = 0; k < img.channels(); ++k) t.at(k, r, c) = static_cast<T>(img(r, c, k));
  return t;
}

template <typename T>
RasterImage to_raster(const Tensor<T>& t) {
  RasterImage img(t.h, t.w, t.c);
  for (int r = 0; r < t.h; ++r)
    for (int c = 0; c < t.w; ++c)
      for (int k = 0; k < t.c; ++k) img(r, c, k) = static_cast<float>(t.at(k, r, c));
  return img;
}

template <typename T>
ForwardResult<T> forward(const NetworkParams<T>& p, const Tensor<T>& x, bool training) {
  const ArchSpec& arch = p.arch;
  if (x.h != x.w) throw GeometryError("forward: input tile must be square");
  if (x.c != arch.in_channels)
    throw std::invalid_argument("forward: expected " + std::to_string(arch.in_channels) + " input channels");
  output_geometry(arch, x.h);

  ForwardResult<T> res;
  ForwardCache<T> cache;
  ForwardCache<T>* cp = training ? &cache : nullptr;
  if (cp) {
    cp->down.resize(arch.depth);
    cp->up.resize(arch.depth);
    cp->up_inputs.resize(arch.depth);
    cp->pool_argmax.resize(arch.depth);
  }
  Buffer<T> scratch;
  std::vector<Tensor<T>> skips(arch.depth);
  Tensor<T> cur = x;
  for (int l = 0; l < arch.depth; ++l) {
    Tensor<T> y = detail::block_forward(p, detail::block_name(l, false), cur, cp ? &cp->down[l] : nullptr, scratch);
    if (l == arch.depth - 1) {
      cur = std::move(y);
      break;
    }
    cur = maxpool_forward(y, cp ? &cp->pool_argmax[l] : nullptr);
    skips[l] = std::move(y);
  }
  for (int l = arch.depth - 2; l >= 0; --l) {
    const std::string n = detail::block_name(l, true);
    const auto& w = p[n + ".upconv.weight"];
    Tensor<T> up = upconv_forward(cur, w.data, p[n + ".upconv.bias"].data, w.shape[0], scratch);
    if (cp) cp->up_inputs[l] = std::move(cur);
    Tensor<T> cat = crop_concat(skips[l], up);
    cur = detail::block_forward(p, n, cat, cp ? &cp->up[l] : nullptr, scratch);
  }
  const auto& hw = p["head.weight"];
  Tensor<T> logits = conv_forward(cur, hw.data, p["head.bias"].data, hw.shape[0], 1, scratch);
  for (auto& v : logits.data) v = detail::logistic(v);
  if (cp) {
    cp->head_input = std::move(cur);
    cp->prob = logits;
    cp->skips = std::move(skips);
    res.cache = std::move(cache);
  }
  res.prob = std::move(logits);
  return res;
}

// Gradient of a scalar loss with respect to every parameter, given dLoss/dprob.
template <typename T>
NetworkParams<T> backward(const NetworkParams<T>& p, const std::optional<ForwardCache<T>>& cache,
                          const Tensor<T>& upstream) {
  if (!cache) throw std::logic_error("backward: no forward cache (run forward in training mode)");
  NetworkParams<T> g = p.zeros_like();
  backward_accumulate(p, *cache, upstream, g);
  return g;
}

// As backward, adding into an existing gradient set (for mini-batches).
template <typename T>
void backward_accumulate(const NetworkParams<T>& p, const ForwardCache<T>& c, const Tensor<T>& upstream,
                         NetworkParams<T>& g) {
  const ArchSpec& arch = p.arch;
  if (upstream.c != c.prob.c || upstream.h != c.prob.h || upstream.w != c.prob.w)
    throw std::invalid_argument("backward: upstream gradient shape does not match output");
  Buffer<T> scratch;
  Tensor<T> d(upstream.c, upstream.h, upstream.w);
  for (std::size_t i = 0; i < d.data.size(); ++i) {
    const T pr = c.prob.data[i];
    d.data[i] = upstream.data[i] * pr * (T(1) - pr);
  }
  d = conv_backward(c.head_input, p["head.weight"].data, d, 1, g["head.weight"].data, g["head.bias"].data, scratch);

  std::vector<Tensor<T>> dskips(arch.depth);
  for (int l = 0; l < arch.depth - 1; ++l) dskips[l] = Tensor<T>(c.skips[l].c, c.skips[l].h, c.skips[l].w);
  for (int l = 0; l <= arch.depth - 2; ++l) {
    const std::string n = detail::block_name(l, true);
    d = detail::block_backward(p, g, n, c.up[l], d, scratch);
    Tensor<T> dup = crop_concat_backward(d, c.skips[l].c, dskips[l]);
    d = upconv_backward(c.up_inputs[l], p[n + ".upconv.weight"].data, dup, g[n + ".upconv.weight"].data,
                        g[n + ".upconv.bias"].data, scratch);
  }
  for (int l = arch.depth - 1; l >= 0; --l) {
    if (l < arch.depth - 1) {
      Tensor<T> dpre = maxpool_backward(c.pool_argmax[l], c.skips[l].h, c.skips[l].w, d);
      for (std::size_t i = 0; i < dpre.data.size(); ++i) dpre.data[i] += dskips[l].data[i];
      d = std::move(dpre);
    }
    d = detail::block_backward(p, g, detail::block_name(l, false), c.down[l], d, scratch);
  }
}

}  // namespace rootseg::net
