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
#include <cstddef>
#include <vector>

#include "heresnet/common/errors.hpp"

namespace heresnet::approx {

struct Interval {
    double lo = 0.0;
    double hi = 0.0;

    double length() const noexcept { return hi - lo; }
    double mid() const noexcept { return 0.5 * (lo + hi); }
    bool degenerate() const noexcept { return lo == hi; }
    bool contains(double x) const noexcept { return lo <= x && x <= hi; }

    friend bool operator==(const Interval&, const Interval&) = default;
};

/// Ordered union of pairwise disjoint closed intervals.
class IntervalUnion {
public:
    IntervalUnion() = default;

    explicit IntervalUnion(std::vector<Interval> intervals) : intervals_(std::move(intervals)) {
        if (intervals_.empty())
            throw DomainError("interval union must not be empty");
        for (std::size_t i = 0; i < intervals_.size(); ++i) {
            const auto& iv = intervals_[i];
            if (!(iv.lo <= iv.hi) || !std::isfinite(iv.lo) || !std::isfinite(iv.hi))
                throw DomainError("interval bounds must be finite with lo <= hi");
            if (i > 0 && !(intervals_[i - 1].hi < iv.lo))
                throw DomainError("intervals must be sorted and pairwise disjoint");
        }
    }

    /// [-hi, -lo] U [lo, hi]; collapses to [-hi, hi] when lo == 0.
    static IntervalUnion symmetric_pair(double lo, double hi) {
        if (!(0.0 <= lo && lo <= hi))
            throw DomainError("symmetric_pair requires 0 <= lo <= hi");
        if (lo == 0.0)
            return IntervalUnion({{-hi, hi}});
        return IntervalUnion({{-hi, -lo}, {lo, hi}});
    }

    /// Union over i in [-(K-1), K-1] of [i - eps, i + eps].
    static IntervalUnion integer_neighborhoods(int K, double eps) {
        if (K < 1)
            throw DomainError("K must be at least 1");
        if (!(eps > 0.0 && eps < 0.5))
            throw DomainError("eps must lie in (0, 1/2)");
        std::vector<Interval> ivs;
        for (int i = -(K - 1); i <= K - 1; ++i)
            ivs.push_back({i - eps, i + eps});
        return IntervalUnion(std::move(ivs));
    }

    const std::vector<Interval>& intervals() const noexcept { return intervals_; }
    std::size_t size() const noexcept { return intervals_.size(); }

    Interval hull() const { return {intervals_.front().lo, intervals_.back().hi}; }

    bool contains(double x) const noexcept {
        return std::any_of(intervals_.begin(), intervals_.end(),
                           [x](const Interval& iv) { return iv.contains(x); });
    }

    bool is_symmetric() const noexcept {
        const std::size_t n = intervals_.size();
        for (std::size_t i = 0; i < n; ++i) {
            const auto& a = intervals_[i];
            const auto& b = intervals_[n - 1 - i];
            if (a.lo != -b.hi || a.hi != -b.lo)
                return false;
        }
        return true;
    }

    /// Intersection with [0, inf). Empty result is an error.
    IntervalUnion nonnegative_part() const {
        std::vector<Interval> out;
        for (const auto& iv : intervals_) {
            if (iv.hi < 0.0)
                continue;
            out.push_back({std::max(iv.lo, 0.0), iv.hi});
        }
        return IntervalUnion(std::move(out));
    }

    double total_length() const noexcept {
        double s = 0.0;
        for (const auto& iv : intervals_)
            s += iv.length();
        return s;
    }

    friend bool operator==(const IntervalUnion&, const IntervalUnion&) = default;

private:
    std::vector<Interval> intervals_;
};

} // namespace heresnet::approx
