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

#include <cstddef>
#include <string>
#include <vector>

#include "heresnet/common/errors.hpp"

namespace heresnet::resnet {

inline constexpr int kImageSide = 32;
inline constexpr std::size_t kBlock = 1024; // 32 x 32 slots

/// Where a channel's values sit in the 1024-slot block. A feature map of side `size` keeps pixel
/// (i, j) at slot (gap i) * 32 + gap j; stride-2 layers double the gap instead of compacting.
struct Layout {
    int gap = 1;
    int size = kImageSide;

    static Layout image() { return {1, kImageSide}; }

    std::size_t slot(int i, int j) const {
        return static_cast<std::size_t>(gap * i) * kImageSide + static_cast<std::size_t>(gap * j);
    }

    /// The layout after a convolution with this stride.
    Layout after_stride(int stride) const {
        if (stride == 1)
            return *this;
        if (stride != 2 || size % 2 != 0)
            throw StructuralError("layout: only stride 1 or 2 on an even size is supported");
        return {gap * 2, size / 2};
    }

    /// Rotation step that brings logical neighbour (i + dy, j + dx) onto (i, j).
    long long offset(int dy, int dx) const {
        return static_cast<long long>(gap) * (static_cast<long long>(dy) * kImageSide + dx);
    }

    /// 1 at valid slots, 0 elsewhere.
    std::vector<double> valid_mask() const {
        std::vector<double> m(kBlock, 0.0);
        for (int i = 0; i < size; ++i)
            for (int j = 0; j < size; ++j)
                m[slot(i, j)] = 1.0;
        return m;
    }

    std::vector<std::size_t> valid_slots() const {
        std::vector<std::size_t> s;
        for (int i = 0; i < size; ++i)
            for (int j = 0; j < size; ++j)
                s.push_back(slot(i, j));
        return s;
    }

    bool operator==(const Layout&) const = default;

    std::string describe() const {
        return std::to_string(size) + "x" + std::to_string(size) + " (gap " + std::to_string(gap) + ")";
    }
};

/// Plaintext mask for tap (dy, dx) of a convolution from `in` to `out` (= in.after_stride(stride)):
/// 1 at every valid output slot whose source pixel lies inside the input, 0 elsewhere. Folding it
/// into the filter clears both the wrapped-around border and the slots a stride-2 layer drops.
inline std::vector<double> tap_mask(const Layout& in, int stride, int dy, int dx) {
    const Layout out = in.after_stride(stride);
    std::vector<double> m(kBlock, 0.0);
    for (int i = 0; i < out.size; ++i)
        for (int j = 0; j < out.size; ++j) {
            const int si = stride * i + dy, sj = stride * j + dx;
            if (si >= 0 && si < in.size && sj >= 0 && sj < in.size)
                m[out.slot(i, j)] = 1.0;
        }
    return m;
}

} // namespace heresnet::resnet
