/*
 * Copyright 2026 The heresnet Authors
 *
 * Licensed under the Apache License, Version 2.0 (the "License");
 * you may not use this file except in compliance with the License.
 * You may obtain a copy of the License at
 *
 *     http://www.apache.org/licenses/LICENSE-2.0
 *
 * Unless required by applicable law or agreed to in writing, software
 * distributed under the License is distributed on an "AS IS" BASIS,
 * WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
 * See the License for the specific language governing permissions and
 * limitations under the License.
 *
 * SPDX-License-Identifier: Apache-2.0
 */

#pragma once

#include <algorithm>
#include <cmath>
#include <string>
#include <utility>
#include <vector>

#include "heresnet/common/errors.hpp"
#include "heresnet/resnet/activations.hpp"
#include "heresnet/resnet/graph.hpp"
#include "heresnet/resnet/image.hpp"
#include "heresnet/resnet/weights.hpp"

// Plain floating-point ResNet-20: the reference the cipher path is compared against.

namespace heresnet::resnet {

/// C x size x size feature map, channel-major.
struct Tensor {
    int channels = 0, size = 0;
    std::vector<double> v;

    Tensor() = default;
    Tensor(int c, int n) : channels(c), size(n), v(static_cast<std::size_t>(c * n * n), 0.0) {}

    double at(int c, int i, int j) const { return v[static_cast<std::size_t>((c * size + i) * size + j)]; }
    double& at(int c, int i, int j) { return v[static_cast<std::size_t>((c * size + i) * size + j)]; }
    double max_abs() const {
        double m = 0.0;
        for (double x : v)
            m = std::max(m, std::fabs(x));
        return m;
    }
};

inline Tensor to_tensor(const Image& img) {
    Tensor t(3, 32);
    t.v = img.data;
    return t;
}

/// Direct nested-loop convolution, zero padding k / 2.
inline Tensor conv2d(const Tensor& x, const ConvWeights& w, int stride) {
    if (x.channels != w.in_ch)
        throw StructuralError("conv2d: channel mismatch");
    const int n = x.size / stride, r = w.k / 2;
    Tensor y(w.out_ch, n);
    for (int o = 0; o < w.out_ch; ++o)
        for (int i = 0; i < n; ++i)
            for (int j = 0; j < n; ++j) {
                double s = 0.0;
                for (int c = 0; c < w.in_ch; ++c)
                    for (int ky = 0; ky < w.k; ++ky)
                        for (int kx = 0; kx < w.k; ++kx) {
                            const int si = stride * i + ky - r, sj = stride * j + kx - r;
                            if (si >= 0 && si < x.size && sj >= 0 && sj < x.size)
                                s += w.at(o, c, ky, kx) * x.at(c, si, sj);
                        }
                y.at(o, i, j) = s;
            }
    return y;
}

inline Tensor affine(Tensor x, const Affine& a) {
    for (int c = 0; c < x.channels; ++c)
        for (int k = 0; k < x.size * x.size; ++k)
            x.v[static_cast<std::size_t>(c * x.size * x.size + k)] =
                a.scale[static_cast<std::size_t>(c)] * x.v[static_cast<std::size_t>(c * x.size * x.size + k)] +
                a.shift[static_cast<std::size_t>(c)];
    return x;
}

inline Tensor relu(Tensor x) {
    for (auto& v : x.v)
        v = std::max(v, 0.0);
    return x;
}

inline Tensor add(Tensor a, const Tensor& b) {
    if (a.v.size() != b.v.size())
        throw StructuralError("add: shape mismatch");
    for (std::size_t i = 0; i < a.v.size(); ++i)
        a.v[i] += b.v[i];
    return a;
}

/// Per-channel mean.
inline std::vector<double> global_avg_pool(const Tensor& x) {
    std::vector<double> out;
    const int m = x.size * x.size;
    for (int c = 0; c < x.channels; ++c) {
        double s = 0.0;
        for (int k = 0; k < m; ++k)
            s += x.v[static_cast<std::size_t>(c * m + k)];
        out.push_back(s / m);
    }
    return out;
}

inline std::vector<double> dense(const std::vector<double>& x, const std::vector<double>& W,
                                 const std::vector<double>& b) {
    std::vector<double> out;
    for (std::size_t j = 0; j < b.size(); ++j) {
        double s = b[j];
        for (std::size_t c = 0; c < x.size(); ++c)
            s += W[j * x.size() + c] * x[c];
        out.push_back(s);
    }
    return out;
}

/// Output of one graph layer. Pooling produces a 64 x 1 x 1 tensor, fc and softmax 10 x 1 x 1.
inline Tensor eval_layer_float(const NetworkGraph& g, const WeightSet& ws, std::size_t idx,
                               const std::vector<Tensor>& outs, const Tensor& input) {
    const auto& l = g.layers[idx];
    const Tensor& x = l.src < 0 ? input : outs[static_cast<std::size_t>(l.src)];
    switch (l.kind) {
    case LayerKind::conv: return conv2d(x, ws.conv.at(l.params), l.stride);
    case LayerKind::bn: return affine(x, ws.bn.at(l.params).fold());
    case LayerKind::relu: return relu(x);
    case LayerKind::add: return add(x, outs[static_cast<std::size_t>(l.src2)]);
    case LayerKind::avgpool: {
        Tensor t(x.channels, 1);
        t.v = global_avg_pool(x);
        return t;
    }
    case LayerKind::fc: {
        Tensor t(10, 1);
        t.v = dense(x.v, ws.fc_w, ws.fc_b);
        return t;
    }
    case LayerKind::softmax: {
        Tensor t(10, 1);
        t.v = tempered_softmax(x.v);
        return t;
    }
    }
    throw StructuralError("unknown layer kind");
}

struct FloatResult {
    std::vector<double> logits, probs;
    int label = -1;
    std::vector<std::pair<std::string, double>> layer_max;
};

inline int argmax(const std::vector<double>& v) {
    return static_cast<int>(std::max_element(v.begin(), v.end()) - v.begin());
}

inline FloatResult infer_float(const Image& img, const WeightSet& ws, const NetworkGraph& g) {
    const Tensor in = to_tensor(img);
    std::vector<Tensor> outs;
    FloatResult r;
    for (std::size_t i = 0; i < g.layers.size(); ++i) {
        outs.push_back(eval_layer_float(g, ws, i, outs, in));
        r.layer_max.emplace_back(g.layers[i].name, outs.back().max_abs());
        if (g.layers[i].kind == LayerKind::fc)
            r.logits = outs.back().v;
        if (g.layers[i].kind == LayerKind::softmax)
            r.probs = outs.back().v;
    }
    r.label = argmax(r.logits);
    return r;
}

/// Layer-wise rescaling of random weights so activations stay inside the ReLU bound.
///
/// Walking the graph over a calibration batch, each BN's gamma and beta are scaled so its largest
/// output reaches `margin * B` if it feeds a ReLU directly, and `margin * B / 4` if it feeds the
/// residual stream (a stage's stream is a sum of at most four such terms). The FC layer is scaled
/// so the largest logit reaches `logit_target`; with 0 it is only scaled down, and only if a logit
/// exceeds `margin * B`. Returns the scale factors.
inline std::vector<std::pair<std::string, double>> calibrate(const NetworkGraph& g, WeightSet& ws,
                                                             const std::vector<Image>& batch, double B,
                                                             double margin = 0.9, double logit_target = 0.0) {
    if (batch.empty())
        throw DomainError("calibration needs at least one image");
    std::vector<std::vector<Tensor>> outs(batch.size());
    std::vector<std::pair<std::string, double>> factors;
    for (std::size_t i = 0; i < g.layers.size(); ++i) {
        const auto& l = g.layers[i];
        auto run = [&] {
            double m = 0.0;
            for (std::size_t b = 0; b < batch.size(); ++b) {
                if (outs[b].size() == i)
                    outs[b].push_back({});
                outs[b][i] = eval_layer_float(g, ws, i, outs[b], to_tensor(batch[b]));
                m = std::max(m, outs[b][i].max_abs());
            }
            return m;
        };
        const double m = run();
        double target = 0.0;
        if (l.kind == LayerKind::bn)
            target = l.on_stream ? margin * B / 4.0 : margin * B;
        else if (l.kind == LayerKind::fc)
            target = logit_target > 0.0 ? logit_target : (m > margin * B ? margin * B : 0.0);
        if (target <= 0.0 || !(m > 0.0))
            continue;
        const double f = target / m;
        if (l.kind == LayerKind::bn) {
            auto& bn = ws.bn.at(l.params);
            for (auto& v : bn.gamma)
                v = to_f32(v * f);
            for (auto& v : bn.beta)
                v = to_f32(v * f);
        } else {
            for (auto& v : ws.fc_w)
                v = to_f32(v * f);
            for (auto& v : ws.fc_b)
                v = to_f32(v * f);
        }
        factors.emplace_back(l.params, f);
        run();
    }
    return factors;
}

} // namespace heresnet::resnet
