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

#include "reference.hpp"

#include <algorithm>
#include <cmath>
#include <map>

namespace oracle {
namespace {

using tinyfuse::LayerKind;
using tinyfuse::Padding;

struct Dims {
  long h = 1, w = 1, c = 1;
};

Dims dims_of(const std::vector<std::int64_t>& s) {
  if (s.size() == 1) return {1, 1, static_cast<long>(s[0])};
  return {static_cast<long>(s[0]), static_cast<long>(s[1]), static_cast<long>(s[2])};
}

Dims dims_of(const tinyfuse::TensorShape& s) { return dims_of(s.dims()); }

// Output extent and leading pad, written out directly from the padding rules.
void geometry(long in, long k, long s, Padding p, long& out, long& pad) {
  if (p == Padding::kValid) {
    out = (in - k) / s + 1;
    pad = 0;
  } else {
    out = (in + s - 1) / s;
    const long total = std::max((out - 1) * s + k - in, 0L);
    pad = total / 2;
  }
}

}  // namespace

std::vector<std::vector<long double>> float_forward(
    const tinyfuse::FloatModel& model, const std::vector<std::vector<float>>& inputs) {
  const Graph& g = model.graph;
  const auto shapes = tinyfuse::infer_shapes(g);
  std::vector<std::vector<long double>> act(g.nodes.size());
  std::size_t next_input = 0;
  for (std::size_t id = 0; id < g.nodes.size(); ++id) {
    const auto& node = g.nodes[id];
    const auto& spec = node.spec;
    auto& out = act[id];
    out.assign(shapes[id].element_count(), 0.0L);
    if (spec.kind == LayerKind::kInput) {
      const auto& x = inputs[next_input++];
      for (std::size_t i = 0; i < x.size(); ++i) out[i] = x[i];
      continue;
    }
    const auto& x = act[node.inputs[0]];
    const Dims in = dims_of(shapes[node.inputs[0]]);
    const Dims od = dims_of(shapes[id]);
    const auto& p = model.params[id];
    long pad_h = 0, pad_w = 0, oh = 0, ow = 0;
    if (spec.kind == LayerKind::kConv2D || spec.kind == LayerKind::kSeparableConv2D ||
        spec.kind == LayerKind::kMaxPool2D || spec.kind == LayerKind::kAvgPool2D) {
      geometry(in.h, spec.kernel, spec.stride, spec.padding, oh, pad_h);
      geometry(in.w, spec.kernel, spec.stride, spec.padding, ow, pad_w);
    }
    const long k = spec.kernel;
    switch (spec.kind) {
      case LayerKind::kConv2D:
        for (long oy = 0; oy < oh; ++oy)
          for (long ox = 0; ox < ow; ++ox)
            for (long co = 0; co < od.c; ++co) {
              long double s = p[1].data[co];
              for (long ky = 0; ky < k; ++ky)
                for (long kx = 0; kx < k; ++kx) {
                  const long iy = oy * spec.stride + ky - pad_h;
                  const long ix = ox * spec.stride + kx - pad_w;
                  if (iy < 0 || ix < 0 || iy >= in.h || ix >= in.w) continue;
                  for (long ci = 0; ci < in.c; ++ci)
                    s += x[(iy * in.w + ix) * in.c + ci] *
                         (long double)p[0].data[((ky * k + kx) * in.c + ci) * od.c + co];
                }
              out[(oy * ow + ox) * od.c + co] = s;
            }
        break;
      case LayerKind::kSeparableConv2D: {
        std::vector<long double> mid(oh * ow * in.c);
        for (long oy = 0; oy < oh; ++oy)
          for (long ox = 0; ox < ow; ++ox)
            for (long c = 0; c < in.c; ++c) {
              long double s = p[1].data[c];
              for (long ky = 0; ky < k; ++ky)
                for (long kx = 0; kx < k; ++kx) {
                  const long iy = oy * spec.stride + ky - pad_h;
                  const long ix = ox * spec.stride + kx - pad_w;
                  if (iy < 0 || ix < 0 || iy >= in.h || ix >= in.w) continue;
                  s += x[(iy * in.w + ix) * in.c + c] *
                       (long double)p[0].data[(ky * k + kx) * in.c + c];
                }
              mid[(oy * ow + ox) * in.c + c] = s;
            }
        for (long px = 0; px < oh * ow; ++px)
          for (long co = 0; co < od.c; ++co) {
            long double s = p[3].data[co];
            for (long c = 0; c < in.c; ++c)
              s += mid[px * in.c + c] * (long double)p[2].data[c * od.c + co];
            out[px * od.c + co] = s;
          }
        break;
      }
      case LayerKind::kDense:
        for (long o = 0; o < od.c; ++o) {
          long double s = p[1].data[o];
          for (long i = 0; i < in.c; ++i) s += x[i] * (long double)p[0].data[i * od.c + o];
          out[o] = s;
        }
        break;
      case LayerKind::kMaxPool2D:
      case LayerKind::kAvgPool2D:
        for (long oy = 0; oy < oh; ++oy)
          for (long ox = 0; ox < ow; ++ox)
            for (long c = 0; c < in.c; ++c) {
              long double best = -INFINITY, sum = 0;
              long n = 0;
              for (long ky = 0; ky < k; ++ky)
                for (long kx = 0; kx < k; ++kx) {
                  const long iy = oy * spec.stride + ky - pad_h;
                  const long ix = ox * spec.stride + kx - pad_w;
                  if (iy < 0 || ix < 0 || iy >= in.h || ix >= in.w) continue;
                  const long double v = x[(iy * in.w + ix) * in.c + c];
                  best = std::max(best, v);
                  sum += v;
                  ++n;
                }
              out[(oy * ow + ox) * in.c + c] =
                  spec.kind == LayerKind::kMaxPool2D ? best : sum / n;
            }
        break;
      case LayerKind::kFlatten:
        out = x;
        break;
      case LayerKind::kReLU:
        for (std::size_t i = 0; i < x.size(); ++i) out[i] = x[i] > 0 ? x[i] : 0;
        break;
      case LayerKind::kConcat: {
        const long rows = od.h * od.w;
        long off = 0;
        for (std::size_t pred : node.inputs) {
          const long c = dims_of(shapes[pred]).c;
          for (long r = 0; r < rows; ++r)
            for (long j = 0; j < c; ++j) out[r * od.c + off + j] = act[pred][r * c + j];
          off += c;
        }
        break;
      }
      case LayerKind::kSoftmax: {
        long double m = *std::max_element(x.begin(), x.end()), z = 0;
        for (std::size_t i = 0; i < x.size(); ++i) z += std::exp(x[i] - m);
        for (std::size_t i = 0; i < x.size(); ++i) out[i] = std::exp(x[i] - m) / z;
        break;
      }
      case LayerKind::kInput:
        break;
    }
  }
  return act;
}

std::int32_t requantize_exact(std::int64_t acc, std::int32_t m0, int shift, std::int32_t zp) {
  const __int128 num = static_cast<__int128>(acc) * m0;
  const __int128 den = static_cast<__int128>(1) << (31 + shift);
  const __int128 mag = num < 0 ? -num : num;
  __int128 q = mag / den;
  if (2 * (mag % den) >= den) ++q;
  if (num < 0) q = -q;
  __int128 r = q + zp;
  if (r < -128) r = -128;
  if (r > 127) r = 127;
  return static_cast<std::int32_t>(r);
}

std::vector<std::vector<std::int32_t>> int8_forward(
    const tinyfuse::QuantizedModel& model, const std::vector<std::vector<std::int8_t>>& inputs) {
  const Graph& g = model.graph;
  const auto& shapes = model.shapes;
  std::vector<std::vector<std::int32_t>> act(g.nodes.size());
  std::size_t next_input = 0;
  auto zp_of = [&](std::size_t id) { return model.activations[id].zero_point; };
  for (std::size_t id = 0; id < g.nodes.size(); ++id) {
    const auto& node = g.nodes[id];
    const auto& spec = node.spec;
    auto& out = act[id];
    out.assign(shapes[id].element_count(), 0);
    if (spec.kind == LayerKind::kInput) {
      const auto& x = inputs[next_input++];
      for (std::size_t i = 0; i < x.size(); ++i) out[i] = x[i];
      continue;
    }
    if (spec.kind == LayerKind::kSoftmax) continue;
    const std::size_t src = node.inputs[0];
    const auto& x = act[src];
    const std::int32_t zx = zp_of(src);
    const Dims in = dims_of(shapes[src]);
    const Dims od = dims_of(shapes[id]);
    const auto& p = model.params[id];
    const auto& mult = model.multipliers[id];
    const std::int32_t zo = zp_of(id);
    long pad_h = 0, pad_w = 0, oh = 0, ow = 0;
    if (spec.kind == LayerKind::kConv2D || spec.kind == LayerKind::kSeparableConv2D ||
        spec.kind == LayerKind::kMaxPool2D || spec.kind == LayerKind::kAvgPool2D) {
      geometry(in.h, spec.kernel, spec.stride, spec.padding, oh, pad_h);
      geometry(in.w, spec.kernel, spec.stride, spec.padding, ow, pad_w);
    }
    const long k = spec.kernel;
    switch (spec.kind) {
      case LayerKind::kConv2D:
        for (long oy = 0; oy < oh; ++oy)
          for (long ox = 0; ox < ow; ++ox)
            for (long co = 0; co < od.c; ++co) {
              std::int64_t s = p[1].q32[co];
              for (long ky = 0; ky < k; ++ky)
                for (long kx = 0; kx < k; ++kx) {
                  const long iy = oy * spec.stride + ky - pad_h;
                  const long ix = ox * spec.stride + kx - pad_w;
                  if (iy < 0 || ix < 0 || iy >= in.h || ix >= in.w) continue;
                  for (long ci = 0; ci < in.c; ++ci)
                    s += static_cast<std::int64_t>(x[(iy * in.w + ix) * in.c + ci] - zx) *
                         p[0].q8[((ky * k + kx) * in.c + ci) * od.c + co];
                }
              out[(oy * ow + ox) * od.c + co] = requantize_exact(s, mult[0].m0, mult[0].shift, zo);
            }
        break;
      case LayerKind::kSeparableConv2D: {
        const std::int32_t zm = model.depthwise[id]->zero_point;
        std::vector<std::int32_t> mid(oh * ow * in.c);
        for (long oy = 0; oy < oh; ++oy)
          for (long ox = 0; ox < ow; ++ox)
            for (long c = 0; c < in.c; ++c) {
              std::int64_t s = p[1].q32[c];
              for (long ky = 0; ky < k; ++ky)
                for (long kx = 0; kx < k; ++kx) {
                  const long iy = oy * spec.stride + ky - pad_h;
                  const long ix = ox * spec.stride + kx - pad_w;
                  if (iy < 0 || ix < 0 || iy >= in.h || ix >= in.w) continue;
                  s += static_cast<std::int64_t>(x[(iy * in.w + ix) * in.c + c] - zx) *
                       p[0].q8[(ky * k + kx) * in.c + c];
                }
              mid[(oy * ow + ox) * in.c + c] = requantize_exact(s, mult[0].m0, mult[0].shift, zm);
            }
        for (long px = 0; px < oh * ow; ++px)
          for (long co = 0; co < od.c; ++co) {
            std::int64_t s = p[3].q32[co];
            for (long c = 0; c < in.c; ++c)
              s += static_cast<std::int64_t>(mid[px * in.c + c] - zm) * p[2].q8[c * od.c + co];
            out[px * od.c + co] = requantize_exact(s, mult[1].m0, mult[1].shift, zo);
          }
        break;
      }
      case LayerKind::kDense:
        for (long o = 0; o < od.c; ++o) {
          std::int64_t s = p[1].q32[o];
          for (long i = 0; i < in.c; ++i)
            s += static_cast<std::int64_t>(x[i] - zx) * p[0].q8[i * od.c + o];
          out[o] = requantize_exact(s, mult[0].m0, mult[0].shift, zo);
        }
        break;
      case LayerKind::kMaxPool2D:
      case LayerKind::kAvgPool2D:
        for (long oy = 0; oy < oh; ++oy)
          for (long ox = 0; ox < ow; ++ox)
            for (long c = 0; c < in.c; ++c) {
              std::int32_t best = -1000;
              std::int64_t sum = 0, n = 0;
              for (long ky = 0; ky < k; ++ky)
                for (long kx = 0; kx < k; ++kx) {
                  const long iy = oy * spec.stride + ky - pad_h;
                  const long ix = ox * spec.stride + kx - pad_w;
                  if (iy < 0 || ix < 0 || iy >= in.h || ix >= in.w) continue;
                  const std::int32_t v = x[(iy * in.w + ix) * in.c + c];
                  best = std::max(best, v);
                  sum += v - zx;
                  ++n;
                }
              std::int32_t r = best;
              if (spec.kind == LayerKind::kAvgPool2D) {
                // round half away from zero of sum / n, via long double.
                const long double q = std::round(static_cast<long double>(sum) / n);
                r = std::clamp<std::int32_t>(static_cast<std::int32_t>(q) + zx, -128, 127);
              }
              out[(oy * ow + ox) * in.c + c] = r;
            }
        break;
      case LayerKind::kFlatten:
        out = x;
        break;
      case LayerKind::kReLU:
        for (std::size_t i = 0; i < x.size(); ++i) out[i] = std::max(x[i], zx);
        break;
      case LayerKind::kConcat: {
        const long rows = od.h * od.w;
        long off = 0;
        const auto& target = model.activations[id];
        for (std::size_t j = 0; j < node.inputs.size(); ++j) {
          const std::size_t pred = node.inputs[j];
          const auto& qp = model.activations[pred];
          const bool same = qp.scale == target.scale && qp.zero_point == target.zero_point;
          const long c = dims_of(shapes[pred]).c;
          for (long r = 0; r < rows; ++r)
            for (long t = 0; t < c; ++t) {
              const std::int32_t v = act[pred][r * c + t];
              out[r * od.c + off + t] =
                  same ? v
                       : requantize_exact(v - qp.zero_point, mult[j].m0, mult[j].shift,
                                          target.zero_point);
            }
          off += c;
        }
        break;
      }
      case LayerKind::kInput:
      case LayerKind::kSoftmax:
        break;
    }
  }
  return act;
}

std::vector<std::vector<std::int64_t>> brute_shapes(const Graph& g) {
  std::vector<std::vector<std::int64_t>> out(g.nodes.size());
  auto positions = [](std::int64_t in, int k, int s, Padding p) {
    std::int64_t count = 0;
    if (p == Padding::kValid) {
      for (std::int64_t start = 0; start + k <= in; start += s) ++count;
    } else {
      for (std::int64_t anchor = 0; anchor < in; anchor += s) ++count;
    }
    return count;
  };
  for (std::size_t id = 0; id < g.nodes.size(); ++id) {
    const auto& node = g.nodes[id];
    const auto& spec = node.spec;
    if (spec.kind == LayerKind::kInput) {
      out[id] = spec.input_shape.dims();
      continue;
    }
    const auto& in = out[node.inputs[0]];
    switch (spec.kind) {
      case LayerKind::kConv2D:
      case LayerKind::kSeparableConv2D:
        out[id] = {positions(in[0], spec.kernel, spec.stride, spec.padding),
                   positions(in[1], spec.kernel, spec.stride, spec.padding), spec.filters};
        break;
      case LayerKind::kMaxPool2D:
      case LayerKind::kAvgPool2D:
        out[id] = {positions(in[0], spec.kernel, spec.stride, spec.padding),
                   positions(in[1], spec.kernel, spec.stride, spec.padding), in[2]};
        break;
      case LayerKind::kDense:
        out[id] = {spec.units};
        break;
      case LayerKind::kFlatten: {
        std::int64_t n = 1;
        for (auto d : in) n *= d;
        out[id] = {n};
        break;
      }
      case LayerKind::kConcat: {
        out[id] = in;
        out[id].back() = 0;
        for (std::size_t p : node.inputs) out[id].back() += out[p].back();
        break;
      }
      default:
        out[id] = in;
    }
  }
  return out;
}

std::uint64_t brute_param_count(const Graph& g) {
  const auto shapes = brute_shapes(g);
  std::uint64_t n = 0;
  for (std::size_t id = 0; id < g.nodes.size(); ++id) {
    const auto& node = g.nodes[id];
    if (node.inputs.empty()) continue;
    const Dims in = dims_of(shapes[node.inputs[0]]);
    const long k = node.spec.kernel;
    switch (node.spec.kind) {
      case LayerKind::kConv2D:
        for (long a = 0; a < k * k; ++a)
          for (long ci = 0; ci < in.c; ++ci)
            for (long co = 0; co < node.spec.filters; ++co) ++n;
        for (long co = 0; co < node.spec.filters; ++co) ++n;
        break;
      case LayerKind::kSeparableConv2D:
        for (long a = 0; a < k * k; ++a)
          for (long ci = 0; ci < in.c; ++ci) ++n;
        for (long ci = 0; ci < in.c; ++ci) ++n;
        for (long ci = 0; ci < in.c; ++ci)
          for (long co = 0; co < node.spec.filters; ++co) ++n;
        for (long co = 0; co < node.spec.filters; ++co) ++n;
        break;
      case LayerKind::kDense:
        for (long i = 0; i < in.c; ++i)
          for (long o = 0; o < node.spec.units; ++o) ++n;
        for (long o = 0; o < node.spec.units; ++o) ++n;
        break;
      default:
        break;
    }
  }
  return n;
}

std::uint64_t brute_op_count(const Graph& g) {
  const auto shapes = brute_shapes(g);
  std::uint64_t macs = 0;
  for (std::size_t id = 0; id < g.nodes.size(); ++id) {
    const auto& node = g.nodes[id];
    if (node.inputs.empty()) continue;
    const Dims in = dims_of(shapes[node.inputs[0]]);
    const Dims out = dims_of(shapes[id]);
    const long k = node.spec.kernel;
    switch (node.spec.kind) {
      case LayerKind::kConv2D:
        // Every output element takes one multiply per kernel tap and input
        // channel, padded taps included.
        for (long px = 0; px < out.h * out.w; ++px)
          for (long co = 0; co < out.c; ++co)
            for (long a = 0; a < k * k * in.c; ++a) ++macs;
        break;
      case LayerKind::kSeparableConv2D:
        for (long px = 0; px < out.h * out.w; ++px) {
          for (long c = 0; c < in.c; ++c)
            for (long a = 0; a < k * k; ++a) ++macs;
          for (long co = 0; co < out.c; ++co)
            for (long c = 0; c < in.c; ++c) ++macs;
        }
        break;
      case LayerKind::kDense:
        for (long o = 0; o < out.c; ++o)
          for (long i = 0; i < in.c; ++i) ++macs;
        break;
      default:
        break;
    }
  }
  return 2 * macs;
}

Simulation simulate_execution(const std::vector<std::vector<std::size_t>>& preds,
                              const std::vector<std::uint64_t>& bytes) {
  const std::size_t n = preds.size();
  std::vector<int> readers_left(n, 0);
  for (const auto& p : preds)
    for (std::size_t q : p) ++readers_left[q];
  Simulation sim;
  sim.first_live.assign(n, 0);
  sim.last_live.assign(n, 0);
  std::map<std::size_t, std::uint64_t> live;
  for (std::size_t step = 0; step < n; ++step) {
    live[step] = bytes[step];
    sim.first_live[step] = step;
    std::uint64_t total = 0;
    for (const auto& [id, b] : live) {
      total += b;
      sim.last_live[id] = step;
    }
    sim.live_bytes.push_back(total);
    for (std::size_t q : preds[step]) {
      if (--readers_left[q] == 0) live.erase(q);
    }
    if (readers_left[step] == 0) live.erase(step);
  }
  return sim;
}

}  // namespace oracle
