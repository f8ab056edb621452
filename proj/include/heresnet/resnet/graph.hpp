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

#include <string>
#include <vector>

#include "heresnet/common/errors.hpp"
#include "heresnet/resnet/layout.hpp"

namespace heresnet::resnet {

enum class LayerKind { conv, bn, relu, add, avgpool, fc, softmax };

inline const char* to_string(LayerKind k) {
    switch (k) {
    case LayerKind::conv: return "conv";
    case LayerKind::bn: return "bn";
    case LayerKind::relu: return "relu";
    case LayerKind::add: return "add";
    case LayerKind::avgpool: return "avgpool";
    case LayerKind::fc: return "fc";
    case LayerKind::softmax: return "softmax";
    }
    return "?";
}

struct LayerSpec {
    std::string name;
    LayerKind kind = LayerKind::conv;
    int in_ch = 0, out_ch = 0;
    int k = 0, stride = 1, pad = 0;
    Layout in_layout, out_layout;
    int src = -1;  // producing layer index, -1 for the image
    int src2 = -1; // second operand of an add
    /// Weight key: the convolution name for conv and bn layers.
    std::string params;
    /// For bn layers: the output feeds the residual stream (directly or through an add).
    bool on_stream = false;
};

struct NetworkGraph {
    std::vector<LayerSpec> layers;

    int find(const std::string& name) const {
        for (std::size_t i = 0; i < layers.size(); ++i)
            if (layers[i].name == name)
                return static_cast<int>(i);
        throw StructuralError("graph has no layer '" + name + "'");
    }

    std::vector<const LayerSpec*> convs() const {
        std::vector<const LayerSpec*> out;
        for (const auto& l : layers)
            if (l.kind == LayerKind::conv)
                out.push_back(&l);
        return out;
    }

    /// Checks that every layer's operands exist, come earlier and agree on shape.
    void validate() const {
        for (std::size_t i = 0; i < layers.size(); ++i) {
            const auto& l = layers[i];
            auto check_src = [&](int s) {
                if (s >= static_cast<int>(i) || s < -1)
                    throw StructuralError("layer '" + l.name + "' reads a later or missing layer");
                const int ch = s < 0 ? 3 : layers[static_cast<std::size_t>(s)].out_ch;
                const Layout lay = s < 0 ? Layout::image() : layers[static_cast<std::size_t>(s)].out_layout;
                if (ch != l.in_ch || !(lay == l.in_layout))
                    throw StructuralError("layer '" + l.name + "' does not match its input shape");
            };
            check_src(l.src);
            if (l.kind == LayerKind::add)
                check_src(l.src2);
            if (l.kind == LayerKind::conv && !(l.out_layout == l.in_layout.after_stride(l.stride)))
                throw StructuralError("layer '" + l.name + "' has an inconsistent output layout");
        }
    }

    /// ResNet-20 for 32 x 32 x 3 input: conv1, three stages of three residual blocks (16, 32, 64
    /// channels, stages 3 and 4 open with stride 2 and a 1x1 projection shortcut), 8x8 average
    /// pooling, a 64 -> 10 fully connected layer and softmax. Block b of stage s holds convolutions
    /// conv{s}_{b}_1 and conv{s}_{b}_2; the projections are conv3_1_s and conv4_1_s.
    static NetworkGraph resnet20() {
        NetworkGraph g;
        auto add = [&](LayerSpec l) {
            g.layers.push_back(std::move(l));
            return static_cast<int>(g.layers.size()) - 1;
        };
        auto conv = [&](const std::string& name, int src, int in_ch, int out_ch, int k, int stride) {
            const Layout in = src < 0 ? Layout::image() : g.layers[static_cast<std::size_t>(src)].out_layout;
            LayerSpec l;
            l.name = name;
            l.kind = LayerKind::conv;
            l.in_ch = in_ch;
            l.out_ch = out_ch;
            l.k = k;
            l.stride = stride;
            l.pad = k / 2;
            l.in_layout = in;
            l.out_layout = in.after_stride(stride);
            l.src = src;
            l.params = name;
            return add(l);
        };
        auto unary = [&](const std::string& name, LayerKind kind, int src, const std::string& params = {},
                         bool stream = false) {
            const auto& s = g.layers[static_cast<std::size_t>(src)];
            LayerSpec l;
            l.name = name;
            l.kind = kind;
            l.in_ch = l.out_ch = s.out_ch;
            l.in_layout = l.out_layout = s.out_layout;
            l.src = src;
            l.params = params;
            l.on_stream = stream;
            return add(l);
        };

        int x = conv("conv1", -1, 3, 16, 3, 1);
        x = unary("conv1.bn", LayerKind::bn, x, "conv1", true);
        x = unary("conv1.relu", LayerKind::relu, x);
        const int widths[3] = {16, 32, 64};
        for (int s = 0; s < 3; ++s) {
            const int ch = widths[s];
            for (int b = 1; b <= 3; ++b) {
                const std::string blk = "conv" + std::to_string(s + 2) + "_" + std::to_string(b);
                const bool down = s > 0 && b == 1;
                const int in_ch = down ? ch / 2 : ch;
                const int stride = down ? 2 : 1;
                int shortcut = x;
                if (down) {
                    const std::string p = blk + "_s";
                    shortcut = conv(p, x, in_ch, ch, 1, 2);
                    shortcut = unary(p + ".bn", LayerKind::bn, shortcut, p, true);
                }
                int y = conv(blk + "_1", x, in_ch, ch, 3, stride);
                y = unary(blk + "_1.bn", LayerKind::bn, y, blk + "_1");
                y = unary(blk + "_1.relu", LayerKind::relu, y);
                y = conv(blk + "_2", y, ch, ch, 3, 1);
                y = unary(blk + "_2.bn", LayerKind::bn, y, blk + "_2", true);
                LayerSpec a;
                a.name = blk + ".add";
                a.kind = LayerKind::add;
                a.in_ch = a.out_ch = ch;
                a.in_layout = a.out_layout = g.layers[static_cast<std::size_t>(y)].out_layout;
                a.src = y;
                a.src2 = shortcut;
                y = add(a);
                x = unary(blk + ".relu", LayerKind::relu, y);
            }
        }
        const int pool = unary("avgpool", LayerKind::avgpool, x);
        LayerSpec fc;
        fc.name = "fc";
        fc.kind = LayerKind::fc;
        fc.in_ch = 64;
        fc.out_ch = 1;
        fc.in_layout = g.layers[static_cast<std::size_t>(pool)].out_layout;
        fc.out_layout = fc.in_layout;
        fc.src = pool;
        fc.params = "fc";
        const int f = add(fc);
        unary("softmax", LayerKind::softmax, f);
        g.validate();
        return g;
    }
};

} // namespace heresnet::resnet
