/* Copyright 2026 The tinyfuse Authors. All Rights Reserved.

Licensed under the Apache License, Version 2.0 (the "License");
you may not use this file except in compliance with the License.
You may obtain a copy of the License at

    http://www.apache.org/licenses/LICENSE-2.0

Unless required by applicable law or agreed to in writing, software
distributed under the License is distributed on an "AS IS" BASIS,
WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
See the License for the specific language governing permissions and
limitations under the License.
==============================================================================*/

#ifndef TINYFUSE_KERNELS_HPP_
#define TINYFUSE_KERNELS_HPP_

#include <algorithm>
#include <cstdint>
#include <span>

#include "tinyfuse/graph.hpp"

// Reference float kernels, channels-last. Templated on the scalar so the
// same code runs in float for training and in double for gradient checks.
namespace tinyfuse::kernels {

struct WindowOp {
  std::int64_t in_h = 0, in_w = 0, in_c = 0;
  std::int64_t out_h = 0, out_w = 0, out_c = 0;
  std::int64_t kernel = 1, stride = 1;
  std::int64_t pad_top = 0, pad_left = 0;
};

inline WindowOp window_op(const TensorShape& in, const TensorShape& out,
                          int kernel, int stride, Padding padding) {
  WindowOp op;
  op.in_h = in.height();
  op.in_w = in.width();
  op.in_c = in.channels();
  op.out_h = out.height();
  op.out_w = out.width();
  op.out_c = out.channels();
  op.kernel = kernel;
  op.stride = stride;
  op.pad_top = window_geometry(in.height(), kernel, stride, padding).pad_before;
  op.pad_left = window_geometry(in.width(), kernel, stride, padding).pad_before;
  return op;
}

// weight: [k, k, in_c, out_c]
template <typename T>
void conv2d_forward(std::span<const T> in, std::span<const T> weight,
                    std::span<const T> bias, std::span<T> out,
                    const WindowOp& op) {
  const std::int64_t cin = op.in_c, cout = op.out_c;
  for (std::int64_t oy = 0; oy < op.out_h; ++oy) {
    for (std::int64_t ox = 0; ox < op.out_w; ++ox) {
      T* o = out.data() + (oy * op.out_w + ox) * cout;
      std::copy(bias.begin(), bias.end(), o);
      for (std::int64_t ky = 0; ky < op.kernel; ++ky) {
        const std::int64_t iy = oy * op.stride - op.pad_top + ky;
        if (iy < 0 || iy >= op.in_h) continue;
        for (std::int64_t kx = 0; kx < op.kernel; ++kx) {
          const std::int64_t ix = ox * op.stride - op.pad_left + kx;
          if (ix < 0 || ix >= op.in_w) continue;
          const T* x = in.data() + (iy * op.in_w + ix) * cin;
          const T* w = weight.data() + (ky * op.kernel + kx) * cin * cout;
          for (std::int64_t ci = 0; ci < cin; ++ci) {
            const T xv = x[ci];
            const T* wr = w + ci * cout;
            for (std::int64_t co = 0; co < cout; ++co) o[co] += xv * wr[co];
          }
        }
      }
    }
  }
}

// Accumulates into grad_weight / grad_bias; grad_in (if non-empty) is
// accumulated as well.
template <typename T>
void conv2d_backward(std::span<const T> in, std::span<const T> weight,
                     std::span<const T> grad_out, std::span<T> grad_in,
                     std::span<T> grad_weight, std::span<T> grad_bias,
                     const WindowOp& op) {
  const std::int64_t cin = op.in_c, cout = op.out_c;
  for (std::int64_t oy = 0; oy < op.out_h; ++oy) {
    for (std::int64_t ox = 0; ox < op.out_w; ++ox) {
      const T* g = grad_out.data() + (oy * op.out_w + ox) * cout;
      for (std::int64_t co = 0; co < cout; ++co) grad_bias[co] += g[co];
      for (std::int64_t ky = 0; ky < op.kernel; ++ky) {
        const std::int64_t iy = oy * op.stride - op.pad_top + ky;
        if (iy < 0 || iy >= op.in_h) continue;
        for (std::int64_t kx = 0; kx < op.kernel; ++kx) {
          const std::int64_t ix = ox * op.stride - op.pad_left + kx;
          if (ix < 0 || ix >= op.in_w) continue;
          const std::int64_t pixel = (iy * op.in_w + ix) * cin;
          const T* x = in.data() + pixel;
          const std::int64_t tap = (ky * op.kernel + kx) * cin * cout;
          for (std::int64_t ci = 0; ci < cin; ++ci) {
            const T xv = x[ci];
            T* gw = grad_weight.data() + tap + ci * cout;
            for (std::int64_t co = 0; co < cout; ++co) gw[co] += xv * g[co];
          }
          if (!grad_in.empty()) {
            T* gi = grad_in.data() + pixel;
            const T* w = weight.data() + tap;
            for (std::int64_t ci = 0; ci < cin; ++ci) {
              const T* wr = w + ci * cout;
              T acc = 0;
              for (std::int64_t co = 0; co < cout; ++co) acc += wr[co] * g[co];
              gi[ci] += acc;
            }
          }
        }
      }
    }
  }
}

// weight: [k, k, c]; one filter per channel.
template <typename T>
void depthwise_forward(std::span<const T> in, std::span<const T> weight,
                       std::span<const T> bias, std::span<T> out,
                       const WindowOp& op) {
  const std::int64_t c = op.in_c;
  for (std::int64_t oy = 0; oy < op.out_h; ++oy) {
    for (std::int64_t ox = 0; ox < op.out_w; ++ox) {
      T* o = out.data() + (oy * op.out_w + ox) * c;
      std::copy(bias.begin(), bias.end(), o);
      for (std::int64_t ky = 0; ky < op.kernel; ++ky) {
        const std::int64_t iy = oy * op.stride - op.pad_top + ky;
        if (iy < 0 || iy >= op.in_h) continue;
        for (std::int64_t kx = 0; kx < op.kernel; ++kx) {
          const std::int64_t ix = ox * op.stride - op.pad_left + kx;
          if (ix < 0 || ix >= op.in_w) continue;
          const T* x = in.data() + (iy * op.in_w + ix) * c;
          const T* w = weight.data() + (ky * op.kernel + kx) * c;
          for (std::int64_t ch = 0; ch < c; ++ch) o[ch] += x[ch] * w[ch];
        }
      }
    }
  }
}

template <typename T>
void depthwise_backward(std::span<const T> in, std::span<const T> weight,
                        std::span<const T> grad_out, std::span<T> grad_in,
                        std::span<T> grad_weight, std::span<T> grad_bias,
                        const WindowOp& op) {
  const std::int64_t c = op.in_c;
  for (std::int64_t oy = 0; oy < op.out_h; ++oy) {
    for (std::int64_t ox = 0; ox < op.out_w; ++ox) {
      const T* g = grad_out.data() + (oy * op.out_w + ox) * c;
      for (std::int64_t ch = 0; ch < c; ++ch) grad_bias[ch] += g[ch];
      for (std::int64_t ky = 0; ky < op.kernel; ++ky) {
        const std::int64_t iy = oy * op.stride - op.pad_top + ky;
        if (iy < 0 || iy >= op.in_h) continue;
        for (std::int64_t kx = 0; kx < op.kernel; ++kx) {
          const std::int64_t ix = ox * op.stride - op.pad_left + kx;
          if (ix < 0 || ix >= op.in_w) continue;
          const std::int64_t pixel = (iy * op.in_w + ix) * c;
          const std::int64_t tap = (ky * op.kernel + kx) * c;
          const T* x = in.data() + pixel;
          T* gw = grad_weight.data() + tap;
          for (std::int64_t ch = 0; ch < c; ++ch) gw[ch] += x[ch] * g[ch];
          if (!grad_in.empty()) {
            const T* w = weight.data() + tap;
            T* gi = grad_in.data() + pixel;
            for (std::int64_t ch = 0; ch < c; ++ch) gi[ch] += w[ch] * g[ch];
          }
        }
      }
    }
  }
}

// weight: [in, out]
template <typename T>
void dense_forward(std::span<const T> in, std::span<const T> weight,
                   std::span<const T> bias, std::span<T> out) {
  const std::size_t n_out = out.size();
  std::copy(bias.begin(), bias.end(), out.begin());
  for (std::size_t i = 0; i < in.size(); ++i) {
    const T xv = in[i];
    if (xv == T(0)) continue;
    const T* wr = weight.data() + i * n_out;
    for (std::size_t j = 0; j < n_out; ++j) out[j] += xv * wr[j];
  }
}

template <typename T>
void dense_backward(std::span<const T> in, std::span<const T> weight,
                    std::span<const T> grad_out, std::span<T> grad_in,
                    std::span<T> grad_weight, std::span<T> grad_bias) {
  const std::size_t n_out = grad_out.size();
  for (std::size_t j = 0; j < n_out; ++j) grad_bias[j] += grad_out[j];
  for (std::size_t i = 0; i < in.size(); ++i) {
    const T xv = in[i];
    const T* wr = weight.data() + i * n_out;
    if (xv != T(0)) {
      T* gw = grad_weight.data() + i * n_out;
      for (std::size_t j = 0; j < n_out; ++j) gw[j] += xv * grad_out[j];
    }
    if (!grad_in.empty()) {
      T acc = 0;
      for (std::size_t j = 0; j < n_out; ++j) acc += wr[j] * grad_out[j];
      grad_in[i] += acc;
    }
  }
}

// Max over in-bounds window positions; ties resolve to the first position in
// row-major window order (forward and backward agree).
template <typename T>
void max_pool_forward(std::span<const T> in, std::span<T> out,
                      const WindowOp& op) {
  const std::int64_t c = op.in_c;
  for (std::int64_t oy = 0; oy < op.out_h; ++oy) {
    for (std::int64_t ox = 0; ox < op.out_w; ++ox) {
      T* o = out.data() + (oy * op.out_w + ox) * c;
      bool first = true;
      for (std::int64_t ky = 0; ky < op.kernel; ++ky) {
        const std::int64_t iy = oy * op.stride - op.pad_top + ky;
        if (iy < 0 || iy >= op.in_h) continue;
        for (std::int64_t kx = 0; kx < op.kernel; ++kx) {
          const std::int64_t ix = ox * op.stride - op.pad_left + kx;
          if (ix < 0 || ix >= op.in_w) continue;
          const T* x = in.data() + (iy * op.in_w + ix) * c;
          if (first) {
            std::copy(x, x + c, o);
            first = false;
          } else {
            for (std::int64_t ch = 0; ch < c; ++ch) o[ch] = std::max(o[ch], x[ch]);
          }
        }
      }
    }
  }
}

template <typename T>
void max_pool_backward(std::span<const T> in, std::span<const T> out,
                       std::span<const T> grad_out, std::span<T> grad_in,
                       const WindowOp& op) {
  const std::int64_t c = op.in_c;
  for (std::int64_t oy = 0; oy < op.out_h; ++oy) {
    for (std::int64_t ox = 0; ox < op.out_w; ++ox) {
      const std::int64_t o = (oy * op.out_w + ox) * c;
      for (std::int64_t ch = 0; ch < c; ++ch) {
        bool done = false;
        for (std::int64_t ky = 0; ky < op.kernel && !done; ++ky) {
          const std::int64_t iy = oy * op.stride - op.pad_top + ky;
          if (iy < 0 || iy >= op.in_h) continue;
          for (std::int64_t kx = 0; kx < op.kernel; ++kx) {
            const std::int64_t ix = ox * op.stride - op.pad_left + kx;
            if (ix < 0 || ix >= op.in_w) continue;
            const std::int64_t at = (iy * op.in_w + ix) * c + ch;
            if (in[at] == out[o + ch]) {
              grad_in[at] += grad_out[o + ch];
              done = true;
              break;
            }
          }
        }
      }
    }
  }
}

// Mean over in-bounds window positions (padding excluded from the count).
template <typename T>
void avg_pool_forward(std::span<const T> in, std::span<T> out,
                      const WindowOp& op) {
  const std::int64_t c = op.in_c;
  for (std::int64_t oy = 0; oy < op.out_h; ++oy) {
    for (std::int64_t ox = 0; ox < op.out_w; ++ox) {
      T* o = out.data() + (oy * op.out_w + ox) * c;
      std::fill(o, o + c, T(0));
      std::int64_t count = 0;
      for (std::int64_t ky = 0; ky < op.kernel; ++ky) {
        const std::int64_t iy = oy * op.stride - op.pad_top + ky;
        if (iy < 0 || iy >= op.in_h) continue;
        for (std::int64_t kx = 0; kx < op.kernel; ++kx) {
          const std::int64_t ix = ox * op.stride - op.pad_left + kx;
          if (ix < 0 || ix >= op.in_w) continue;
          const T* x = in.data() + (iy * op.in_w + ix) * c;
          for (std::int64_t ch = 0; ch < c; ++ch) o[ch] += x[ch];
          ++count;
        }
      }
      const T inv = T(1) / static_cast<T>(count);
      for (std::int64_t ch = 0; ch < c; ++ch) o[ch] *= inv;
    }
  }
}

template <typename T>
void avg_pool_backward(std::span<const T> grad_out, std::span<T> grad_in,
                       const WindowOp& op) {
  const std::int64_t c = op.in_c;
  for (std::int64_t oy = 0; oy < op.out_h; ++oy) {
    for (std::int64_t ox = 0; ox < op.out_w; ++ox) {
      std::int64_t count = 0;
      for (std::int64_t ky = 0; ky < op.kernel; ++ky) {
        const std::int64_t iy = oy * op.stride - op.pad_top + ky;
        if (iy < 0 || iy >= op.in_h) continue;
        for (std::int64_t kx = 0; kx < op.kernel; ++kx) {
          const std::int64_t ix = ox * op.stride - op.pad_left + kx;
          if (ix >= 0 && ix < op.in_w) ++count;
        }
      }
      const T inv = T(1) / static_cast<T>(count);
      const T* g = grad_out.data() + (oy * op.out_w + ox) * c;
      for (std::int64_t ky = 0; ky < op.kernel; ++ky) {
        const std::int64_t iy = oy * op.stride - op.pad_top + ky;
        if (iy < 0 || iy >= op.in_h) continue;
        for (std::int64_t kx = 0; kx < op.kernel; ++kx) {
          const std::int64_t ix = ox * op.stride - op.pad_left + kx;
          if (ix < 0 || ix >= op.in_w) continue;
          T* gi = grad_in.data() + (iy * op.in_w + ix) * c;
          for (std::int64_t ch = 0; ch < c; ++ch) gi[ch] += g[ch] * inv;
        }
      }
    }
  }
}

}  // namespace tinyfuse::kernels

#endif  // TINYFUSE_KERNELS_HPP_
