#pragma once

#include <Eigen/Core>

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <stdexcept>
#include <string>
#include <vector>

namespace rootseg::net {

// Storage for anything Eigen maps. Vectorised kernels peel unaligned heads, so
// a fixed alignment keeps float rounding independent of where the heap put a buffer.
template <typename T>
using Buffer = std::vector<T, Eigen::aligned_allocator<T>>;

// Channel-major activation (C x H x W) for a single sample.
template <typename T>
struct Tensor {
  int c = 0, h = 0, w = 0;
  Buffer<T> data;

  Tensor() = default;
  Tensor(int channels, int height, int width, T fill = T{})
      : c(channels), h(height), w(width), data(static_cast<std::size_t>(channels) * height * width, fill) {}

  std::size_t plane() const { return static_cast<std::size_t>(h) * w; }
  T* channel(int k) { return data.data() + plane() * k; }
  const T* channel(int k) const { return data.data() + plane() * k; }
  T& at(int k, int r, int col) { return data[plane() * k + static_cast<std::size_t>(r) * w + col]; }
  const T& at(int k, int r, int col) const { return data[plane() * k + static_cast<std::size_t>(r) * w + col]; }
};

template <typename T>
using RowMat = Eigen::Matrix<T, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
template <typename T>
using MatMap = Eigen::Map<RowMat<T>>;
template <typename T>
using CMatMap = Eigen::Map<const RowMat<T>>;

// (Cin*k*k) x (Ho*Wo) patch matrix for a valid k x k convolution.
template <typename T>
void im2col(const Tensor<T>& in, int k, Buffer<T>& col) {
  const int ho = in.h - k + 1, wo = in.w - k + 1;
  col.resize(static_cast<std::size_t>(in.c) * k * k * ho * wo);
  T* dst = col.data();
  for (int ci = 0; ci < in.c; ++ci)
    for (int ky = 0; ky < k; ++ky)
      for (int kx = 0; kx < k; ++kx)
        for (int oy = 0; oy < ho; ++oy) {
          const T* src = &in.at(ci, oy + ky, kx);
          std::copy(src, src + wo, dst);
          dst += wo;
        }
}

template <typename T>
void col2im_add(const Buffer<T>& col, int k, Tensor<T>& dIn) {
  const int ho = dIn.h - k + 1, wo = dIn.w - k + 1;
  const T* src = col.data();
  for (int ci = 0; ci < dIn.c; ++ci)
    for (int ky = 0; ky < k; ++ky)
      for (int kx = 0; kx < k; ++kx)
        for (int oy = 0; oy < ho; ++oy) {
          T* dst = &dIn.at(ci, oy + ky, kx);
          for (int ox = 0; ox < wo; ++ox) dst[ox] += src[ox];
          src += wo;
        }
}

// Valid k x k convolution. weight is Cout x (Cin*k*k) row-major.
template <typename T>
Tensor<T> conv_forward(const Tensor<T>& in, const Buffer<T>& weight, const Buffer<T>& bias,
                       int cout, int k, Buffer<T>& scratch) {
  const int ho = in.h - k + 1, wo = in.w - k + 1;
  const int K = in.c * k * k;
  Tensor<T> out(cout, ho, wo);
  CMatMap<T> W(weight.data(), cout, K);
  MatMap<T> O(out.data.data(), cout, static_cast<Eigen::Index>(ho) * wo);
  if (k == 1) {
    CMatMap<T> X(in.data.data(), K, static_cast<Eigen::Index>(ho) * wo);
    O.noalias() = W * X;
  } else {
    im2col(in, k, scratch);
    CMatMap<T> X(scratch.data(), K, static_cast<Eigen::Index>(ho) * wo);
    O.noalias() = W * X;
  }
  for (int co = 0; co < cout; ++co) O.row(co).array() += bias[co];
  return out;
}

// Accumulates dW, db; returns dIn.
template <typename T>
Tensor<T> conv_backward(const Tensor<T>& in, const Buffer<T>& weight, const Tensor<T>& dOut, int k,
                        Buffer<T>& dW, Buffer<T>& db, Buffer<T>& scratch) {
  const int K = in.c * k * k;
  const Eigen::Index n = static_cast<Eigen::Index>(dOut.h) * dOut.w;
  CMatMap<T> W(weight.data(), dOut.c, K);
  CMatMap<T> G(dOut.data.data(), dOut.c, n);
  MatMap<T> dWm(dW.data(), dOut.c, K);
  for (int co = 0; co < dOut.c; ++co) db[co] += G.row(co).sum();
  Tensor<T> dIn(in.c, in.h, in.w);
  if (k == 1) {
    CMatMap<T> X(in.data.data(), K, n);
    dWm.noalias() += G * X.transpose();
    MatMap<T> dX(dIn.data.data(), K, n);
    dX.noalias() = W.transpose() * G;
  } else {
    im2col(in, k, scratch);
    CMatMap<T> X(scratch.data(), K, n);
    dWm.noalias() += G * X.transpose();
    MatMap<T> dX(scratch.data(), K, n);
    dX.noalias() = W.transpose() * G;
    col2im_add(scratch, k, dIn);
  }
  return dIn;
}

template <typename T>
void relu_inplace(Tensor<T>& x) {
  for (auto& v : x.data) v = v > T(0) ? v : T(0);
}

// Gradient through ReLU given its output.
template <typename T>
void relu_backward_inplace(const Tensor<T>& out, Tensor<T>& grad) {
  for (std::size_t i = 0; i < grad.data.size(); ++i)
    if (!(out.data[i] > T(0))) grad.data[i] = T(0);
}

template <typename T>
struct GroupNormCache {
  Tensor<T> xhat;
  Buffer<T> inv_std;  // per group
};

// Per-sample group normalisation followed by a per-channel affine map.
template <typename T>
Tensor<T> group_norm_forward(const Tensor<T>& x, int groups, const Buffer<T>& scale,
                             const Buffer<T>& shift, T eps, GroupNormCache<T>* cache) {
  if (groups <= 0 || x.c % groups != 0)
    throw std::invalid_argument("group_norm: " + std::to_string(x.c) + " channels not divisible by " +
                                std::to_string(groups) + " groups");
  const int cpg = x.c / groups;
  const std::size_t n = x.plane() * cpg;
  Tensor<T> y(x.c, x.h, x.w);
  Tensor<T> xhat(x.c, x.h, x.w);
  Buffer<T> inv(groups);
  for (int g = 0; g < groups; ++g) {
    const T* src = x.channel(g * cpg);
    double mean = 0;
    for (std::size_t i = 0; i < n; ++i) mean += src[i];
    mean /= static_cast<double>(n);
    double var = 0;
    for (std::size_t i = 0; i < n; ++i) var += (src[i] - mean) * (src[i] - mean);
    var /= static_cast<double>(n);
    const double is = 1.0 / std::sqrt(var + static_cast<double>(eps));
    inv[g] = static_cast<T>(is);
    T* xh = xhat.channel(g * cpg);
    for (std::size_t i = 0; i < n; ++i) xh[i] = static_cast<T>((src[i] - mean) * is);
    for (int k = 0; k < cpg; ++k) {
      const int ch = g * cpg + k;
      const T* a = xhat.channel(ch);
      T* b = y.channel(ch);
      for (std::size_t i = 0; i < x.plane(); ++i) b[i] = a[i] * scale[ch] + shift[ch];
    }
  }
  if (cache) {
    cache->xhat = std::move(xhat);
    cache->inv_std = std::move(inv);
  }
  return y;
}

template <typename T>
Tensor<T> group_norm_backward(const GroupNormCache<T>& cache, int groups, const Buffer<T>& scale,
                              const Tensor<T>& dY, Buffer<T>& dscale, Buffer<T>& dshift) {
  const Tensor<T>& xhat = cache.xhat;
  const int cpg = xhat.c / groups;
  const std::size_t plane = xhat.plane(), n = plane * cpg;
  Tensor<T> dX(xhat.c, xhat.h, xhat.w);
  Buffer<T> dxhat(n);
  for (int g = 0; g < groups; ++g) {
    double sum_d = 0, sum_dx = 0;
    for (int k = 0; k < cpg; ++k) {
      const int ch = g * cpg + k;
      const T* dy = dY.channel(ch);
      const T* xh = xhat.channel(ch);
      double ds = 0, dsh = 0;
      for (std::size_t i = 0; i < plane; ++i) {
        ds += static_cast<double>(dy[i]) * xh[i];
        dsh += dy[i];
        const T d = dy[i] * scale[ch];
        dxhat[k * plane + i] = d;
        sum_d += d;
        sum_dx += static_cast<double>(d) * xh[i];
      }
      dscale[ch] += static_cast<T>(ds);
      dshift[ch] += static_cast<T>(dsh);
    }
    const double inv_n = 1.0 / static_cast<double>(n);
    const T* xh = xhat.channel(g * cpg);
    T* dx = dX.channel(g * cpg);
    const double is = cache.inv_std[g];
    for (std::size_t i = 0; i < n; ++i)
      dx[i] = static_cast<T>(is * (dxhat[i] - sum_d * inv_n - xh[i] * sum_dx * inv_n));
  }
  return dX;
}

// 2x2 max pool, stride 2. argmax stores the winning offset (0..3) per output.
template <typename T>
Tensor<T> maxpool_forward(const Tensor<T>& x, std::vector<unsigned char>* argmax) {
  Tensor<T> y(x.c, x.h / 2, x.w / 2);
  if (argmax) argmax->resize(y.data.size());
  std::size_t o = 0;
  for (int ch = 0; ch < x.c; ++ch)
    for (int r = 0; r < y.h; ++r)
      for (int c = 0; c < y.w; ++c, ++o) {
        T best = x.at(ch, 2 * r, 2 * c);
        unsigned char arg = 0;
        for (unsigned char k = 1; k < 4; ++k) {
          const T v = x.at(ch, 2 * r + (k >> 1), 2 * c + (k & 1));
          if (v > best) {
            best = v;
            arg = k;
          }
        }
        y.data[o] = best;
        if (argmax) (*argmax)[o] = arg;
      }
  return y;
}

template <typename T>
Tensor<T> maxpool_backward(const std::vector<unsigned char>& argmax, int in_h, int in_w, const Tensor<T>& dY) {
  Tensor<T> dX(dY.c, in_h, in_w);
  std::size_t o = 0;
  for (int ch = 0; ch < dY.c; ++ch)
    for (int r = 0; r < dY.h; ++r)
      for (int c = 0; c < dY.w; ++c, ++o) {
        const unsigned char k = argmax[o];
        dX.at(ch, 2 * r + (k >> 1), 2 * c + (k & 1)) += dY.data[o];
      }
  return dX;
}

// 2x2 transposed convolution, stride 2. weight is (Cout*4) x Cin row-major,
// row index co*4 + dy*2 + dx.
template <typename T>
Tensor<T> upconv_forward(const Tensor<T>& x, const Buffer<T>& weight, const Buffer<T>& bias, int cout,
                         Buffer<T>& scratch) {
  const Eigen::Index n = static_cast<Eigen::Index>(x.plane());
  scratch.resize(static_cast<std::size_t>(cout) * 4 * n);
  CMatMap<T> W(weight.data(), cout * 4, x.c);
  CMatMap<T> X(x.data.data(), x.c, n);
  MatMap<T> M(scratch.data(), cout * 4, n);
  M.noalias() = W * X;
  Tensor<T> y(cout, 2 * x.h, 2 * x.w);
  for (int co = 0; co < cout; ++co)
    for (int q = 0; q < 4; ++q) {
      const T* src = scratch.data() + (static_cast<std::size_t>(co) * 4 + q) * n;
      const int dy = q >> 1, dx = q & 1;
      for (int r = 0; r < x.h; ++r)
        for (int c = 0; c < x.w; ++c) y.at(co, 2 * r + dy, 2 * c + dx) = src[r * x.w + c] + bias[co];
    }
  return y;
}

template <typename T>
Tensor<T> upconv_backward(const Tensor<T>& x, const Buffer<T>& weight, const Tensor<T>& dY,
                          Buffer<T>& dW, Buffer<T>& db, Buffer<T>& scratch) {
  const int cout = dY.c;
  const Eigen::Index n = static_cast<Eigen::Index>(x.plane());
  scratch.resize(static_cast<std::size_t>(cout) * 4 * n);
  for (int co = 0; co < cout; ++co) {
    double s = 0;
    for (int q = 0; q < 4; ++q) {
      T* dst = scratch.data() + (static_cast<std::size_t>(co) * 4 + q) * n;
      const int dy = q >> 1, dx = q & 1;
      for (int r = 0; r < x.h; ++r)
        for (int c = 0; c < x.w; ++c) {
          const T g = dY.at(co, 2 * r + dy, 2 * c + dx);
          dst[r * x.w + c] = g;
          s += g;
        }
    }
    db[co] += static_cast<T>(s);
  }
  CMatMap<T> G(scratch.data(), cout * 4, n);
  CMatMap<T> W(weight.data(), cout * 4, x.c);
  CMatMap<T> X(x.data.data(), x.c, n);
  MatMap<T> dWm(dW.data(), cout * 4, x.c);
  dWm.noalias() += G * X.transpose();
  Tensor<T> dX(x.c, x.h, x.w);
  MatMap<T> dXm(dX.data.data(), x.c, n);
  dXm.noalias() = W.transpose() * G;
  return dX;
}

// Centre crop of `skip` to h x w, then channel concatenation [skip, up].
template <typename T>
Tensor<T> crop_concat(const Tensor<T>& skip, const Tensor<T>& up) {
  const int oy = (skip.h - up.h) / 2, ox = (skip.w - up.w) / 2;
  Tensor<T> out(skip.c + up.c, up.h, up.w);
  for (int ch = 0; ch < skip.c; ++ch)
    for (int r = 0; r < up.h; ++r) {
      const T* src = &skip.at(ch, r + oy, ox);
      std::copy(src, src + up.w, &out.at(ch, r, 0));
    }
  std::copy(up.data.begin(), up.data.end(), out.data.begin() + static_cast<std::ptrdiff_t>(skip.c * up.plane()));
  return out;
}

// Splits the concat gradient; the skip part is scattered into dSkip (accumulated).
template <typename T>
Tensor<T> crop_concat_backward(const Tensor<T>& dOut, int skip_c, Tensor<T>& dSkip) {
  const int oy = (dSkip.h - dOut.h) / 2, ox = (dSkip.w - dOut.w) / 2;
  for (int ch = 0; ch < skip_c; ++ch)
    for (int r = 0; r < dOut.h; ++r) {
      const T* src = &dOut.at(ch, r, 0);
      T* dst = &dSkip.at(ch, r + oy, ox);
      for (int c = 0; c < dOut.w; ++c) dst[c] += src[c];
    }
  Tensor<T> dUp(dOut.c - skip_c, dOut.h, dOut.w);
  std::copy(dOut.data.begin() + static_cast<std::ptrdiff_t>(skip_c * dOut.plane()), dOut.data.end(),
            dUp.data.begin());
  return dUp;
}

}  // namespace rootseg::net
