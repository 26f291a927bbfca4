// Copyright 2026 The GeoConv Authors.
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//      http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#include "geoconv/conv.hpp"

#include <algorithm>
#include <string>

#include "geoconv/errors.hpp"

namespace geoconv {

void ConvKernel::validate() const {
  if (weight.empty()) throw ShapeError("convolution kernel is empty");
  if (weight.height() != weight.width()) throw ShapeError("convolution kernel must be square");
  if (weight.height() % 2 == 0) throw ShapeError("convolution kernel size must be odd");
  if (bias.size() != weight.batch()) throw ShapeError("bias length must equal the output channel count");
}

namespace {

const LayerWeights* sliceFor(GeoSlices g, std::size_t n) {
  if (g.empty()) return nullptr;
  return g.size() == 1 ? g[0] : g[n];
}

void checkShapes(const Tensor4& input, const ConvKernel& kernel, GeoSlices g) {
  kernel.validate();
  if (input.empty()) throw ShapeError("convolution input is empty");
  if (input.channels() != kernel.inChannels())
    throw ShapeError("input has " + std::to_string(input.channels()) + " channels, kernel expects " +
                     std::to_string(kernel.inChannels()));
  if (g.empty()) return;
  if (g.size() != 1 && g.size() != input.batch())
    throw ShapeError("need one weight slice per sample or one shared slice");
  for (const auto* s : g) {
    if (!s) throw ValidationError("missing geodesic weight slice");
    const auto& geo = s->geometry;
    if (static_cast<std::size_t>(geo.height) != input.height() ||
        static_cast<std::size_t>(geo.width) != input.width() ||
        static_cast<std::size_t>(geo.kernel) != kernel.size())
      throw ShapeError("geodesic weight slice " + std::to_string(geo.height) + "x" + std::to_string(geo.width) +
                       "x" + std::to_string(geo.kernel) + " does not match the layer");
    if (s->g.size() != static_cast<std::size_t>(geo.height) * geo.width * geo.kernel * geo.kernel)
      throw ShapeError("geodesic weight slice has the wrong element count");
  }
}

// Valid output columns [lo, hi) for kernel column kx on a row of width w.
inline void tapRange(std::size_t kx, std::size_t half, std::size_t w, std::size_t& lo, std::size_t& hi) {
  lo = kx < half ? half - kx : 0;
  hi = kx > half ? w - (kx - half) : w;
}

// Column matrix of one sample: rows (ci, ky, kx), columns output pixels.
// Taps are scaled by g when a slice is given; padded taps stay 0.
void im2col(const double* x, std::size_t c, std::size_t h, std::size_t w, std::size_t k, const LayerWeights* g,
            std::vector<double>& col) {
  const std::size_t hw = h * w, kk = k * k, half = k / 2;
  col.assign(c * kk * hw, 0.0);
  for (std::size_t ci = 0; ci < c; ++ci)
    for (std::size_t ky = 0; ky < k; ++ky)
      for (std::size_t kx = 0; kx < k; ++kx) {
        double* row = col.data() + ((ci * k + ky) * k + kx) * hw;
        const double* plane = x + ci * hw;
        std::size_t lo, hi;
        tapRange(kx, half, w, lo, hi);
        for (std::size_t y = 0; y < h; ++y) {
          if (y + ky < half || y + ky - half >= h) continue;
          const double* src = plane + (y + ky - half) * w + lo + kx - half;
          double* dst = row + y * w + lo;
          const std::size_t n = hi - lo;
          if (g) {
            const float* gy = g->g.data() + (y * w + lo) * kk + ky * k + kx;
            for (std::size_t i = 0; i < n; ++i) dst[i] = src[i] * static_cast<double>(gy[i * kk]);
          } else {
            for (std::size_t i = 0; i < n; ++i) dst[i] = src[i];
          }
        }
      }
}

// Scatter-add of a column-matrix gradient back onto the input plane.
void col2im(const std::vector<double>& col, std::size_t c, std::size_t h, std::size_t w, std::size_t k,
            const LayerWeights* g, double* x) {
  const std::size_t hw = h * w, kk = k * k, half = k / 2;
  for (std::size_t ci = 0; ci < c; ++ci)
    for (std::size_t ky = 0; ky < k; ++ky)
      for (std::size_t kx = 0; kx < k; ++kx) {
        const double* row = col.data() + ((ci * k + ky) * k + kx) * hw;
        double* plane = x + ci * hw;
        std::size_t lo, hi;
        tapRange(kx, half, w, lo, hi);
        for (std::size_t y = 0; y < h; ++y) {
          if (y + ky < half || y + ky - half >= h) continue;
          double* dst = plane + (y + ky - half) * w + lo + kx - half;
          const double* src = row + y * w + lo;
          const std::size_t n = hi - lo;
          if (g) {
            const float* gy = g->g.data() + (y * w + lo) * kk + ky * k + kx;
            for (std::size_t i = 0; i < n; ++i) dst[i] += src[i] * static_cast<double>(gy[i * kk]);
          } else {
            for (std::size_t i = 0; i < n; ++i) dst[i] += src[i];
          }
        }
      }
}

Tensor4 forward(const Tensor4& input, const ConvKernel& kernel, GeoSlices g) {
  checkShapes(input, kernel, g);
  const std::size_t n = input.batch(), c = input.channels(), h = input.height(), w = input.width();
  const std::size_t oc = kernel.outChannels(), k = kernel.size(), hw = h * w, rows = c * k * k;
  Tensor4 out(n, oc, h, w);
  std::vector<double> col;
  for (std::size_t s = 0; s < n; ++s) {
    im2col(input.sample(s), c, h, w, k, sliceFor(g, s), col);
    double* y = out.sample(s);
    for (std::size_t o = 0; o < oc; ++o) std::fill(y + o * hw, y + (o + 1) * hw, kernel.bias[o]);
    // Four output channels per pass over the column matrix; each output still
    // accumulates over rows in order.
    std::size_t o = 0;
    for (; o + 4 <= oc; o += 4) {
      double *y0 = y + o * hw, *y1 = y0 + hw, *y2 = y1 + hw, *y3 = y2 + hw;
      const double* w0 = kernel.weight.data() + o * rows;
      for (std::size_t j = 0; j < rows; ++j) {
        const double a = w0[j], b = w0[rows + j], c2 = w0[2 * rows + j], d = w0[3 * rows + j];
        const double* cj = col.data() + j * hw;
        for (std::size_t p = 0; p < hw; ++p) {
          const double v = cj[p];
          y0[p] += a * v;
          y1[p] += b * v;
          y2[p] += c2 * v;
          y3[p] += d * v;
        }
      }
    }
    for (; o < oc; ++o) {
      double* yo = y + o * hw;
      const double* wo = kernel.weight.data() + o * rows;
      for (std::size_t j = 0; j < rows; ++j) {
        const double wj = wo[j];
        const double* cj = col.data() + j * hw;
        for (std::size_t p = 0; p < hw; ++p) yo[p] += wj * cj[p];
      }
    }
  }
  return out;
}

ConvGradients backward(const Tensor4& gradOut, const Tensor4& input, const ConvKernel& kernel, GeoSlices g) {
  checkShapes(input, kernel, g);
  const std::size_t n = input.batch(), c = input.channels(), h = input.height(), w = input.width();
  const std::size_t oc = kernel.outChannels(), k = kernel.size(), hw = h * w, rows = c * k * k;
  if (gradOut.shape() != Tensor4::Shape{n, oc, h, w})
    throw ShapeError("output gradient has shape " + Tensor4::describe(gradOut.shape()));
  ConvGradients grads{Tensor4(input.shape()), Tensor4(kernel.weight.shape()), std::vector<double>(oc, 0.0)};
  std::vector<double> col, gcol(rows * hw);
  for (std::size_t s = 0; s < n; ++s) {
    const LayerWeights* slice = sliceFor(g, s);
    im2col(input.sample(s), c, h, w, k, slice, col);
    const double* go = gradOut.sample(s);
    std::fill(gcol.begin(), gcol.end(), 0.0);
    for (std::size_t o = 0; o < oc; ++o) {
      const double* gop = go + o * hw;
      double b = 0;
      for (std::size_t p = 0; p < hw; ++p) b += gop[p];
      grads.bias[o] += b;
    }
    for (std::size_t j = 0; j < rows; ++j) {
      const double* cj = col.data() + j * hw;
      double* gj = gcol.data() + j * hw;
      std::size_t o = 0;
      for (; o + 4 <= oc; o += 4) {
        const double *g0 = go + o * hw, *g1 = g0 + hw, *g2 = g1 + hw, *g3 = g2 + hw;
        double a0 = 0, a1 = 0, a2 = 0, a3 = 0;
        for (std::size_t p = 0; p < hw; ++p) {
          const double v = cj[p];
          a0 += g0[p] * v;
          a1 += g1[p] * v;
          a2 += g2[p] * v;
          a3 += g3[p] * v;
        }
        grads.weight.data()[o * rows + j] += a0;
        grads.weight.data()[(o + 1) * rows + j] += a1;
        grads.weight.data()[(o + 2) * rows + j] += a2;
        grads.weight.data()[(o + 3) * rows + j] += a3;
        const double* wk = kernel.weight.data() + o * rows + j;
        const double w0 = wk[0], w1 = wk[rows], w2 = wk[2 * rows], w3 = wk[3 * rows];
        for (std::size_t p = 0; p < hw; ++p) {
          double t = gj[p];
          t += w0 * g0[p];
          t += w1 * g1[p];
          t += w2 * g2[p];
          t += w3 * g3[p];
          gj[p] = t;
        }
      }
      for (; o < oc; ++o) {
        const double* gop = go + o * hw;
        double acc = 0;
        for (std::size_t p = 0; p < hw; ++p) acc += gop[p] * cj[p];
        grads.weight.data()[o * rows + j] += acc;
        const double wj = kernel.weight.data()[o * rows + j];
        for (std::size_t p = 0; p < hw; ++p) gj[p] += wj * gop[p];
      }
    }
    col2im(gcol, c, h, w, k, slice, grads.input.sample(s));
  }
  return grads;
}

}  // namespace

Tensor4 conv2dForward(const Tensor4& input, const ConvKernel& kernel) { return forward(input, kernel, {}); }

Tensor4 geoConvForward(const Tensor4& input, const ConvKernel& kernel, GeoSlices g) {
  if (g.empty()) throw ValidationError("missing geodesic weight stack");
  return forward(input, kernel, g);
}

ConvGradients conv2dBackward(const Tensor4& gradOut, const Tensor4& input, const ConvKernel& kernel) {
  return backward(gradOut, input, kernel, {});
}

ConvGradients geoConvBackward(const Tensor4& gradOut, const Tensor4& input, const ConvKernel& kernel,
                              GeoSlices g) {
  if (g.empty()) throw ValidationError("missing geodesic weight stack");
  return backward(gradOut, input, kernel, g);
}

}  // namespace geoconv
