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
#include <limits>
#include <map>
#include <mutex>
#include <vector>

#include "heresnet/approx/chebyshev.hpp"
#include "heresnet/approx/inverse.hpp"
#include "heresnet/approx/lsq.hpp"
#include "heresnet/approx/sign.hpp"
#include "heresnet/common/errors.hpp"
#include "heresnet/polyeval/polyeval.hpp"

namespace heresnet::resnet {

/// A composite sign prepared for evaluation on ciphertexts.
///
/// Stage i+1 of a composite sign is fitted on a hull of +-(1 + d_i). Evaluating it directly would
/// spend a level on the input map, so each later stage is re-expressed on [-1, 1] (same Chebyshev
/// coefficients, domain divided by 1 + d_i) and the factor 1 / (1 + d_i) is folded into the
/// previous stage's output scale. The last stage carries the 1/2 of x (1 + g) / 2.
struct ReluApprox {
    approx::CompositeSign sign;
    std::vector<approx::MinimaxPoly> stages;
    std::vector<double> out_scale;
    std::vector<int> depth;
    /// Stages evaluated before the middle bootstrap.
    int split = 1;

    /// Levels the input must hold: the 1/B scaling plus the stages before the split.
    int prefix_levels() const {
        int d = 1;
        for (int i = 0; i < split; ++i)
            d += depth[static_cast<std::size_t>(i)];
        return d;
    }
    /// Levels used after the middle bootstrap, including the final product with x.
    int tail_levels() const {
        int d = 1;
        for (std::size_t i = static_cast<std::size_t>(split); i < stages.size(); ++i)
            d += depth[i];
        return d;
    }

    /// (1 + g(u)) / 2 as the cipher path computes it, in double arithmetic.
    double half_gate(double u) const {
        for (std::size_t i = 0; i < stages.size(); ++i)
            u = out_scale[i] * approx::eval_poly_reference(stages[i], u);
        return u + 0.5;
    }
    /// Approximate ReLU at bound B.
    double operator()(double x, double B) const { return x * half_gate(x / B); }
};

inline ReluApprox make_relu_approx(const approx::CompositeSign& sign, int L_eval) {
    if (sign.stages.size() < 2)
        throw DomainError("relu approximation needs at least two sign stages for the middle bootstrap");
    ReluApprox r;
    r.sign = sign;
    const std::size_t n = sign.stages.size();
    for (std::size_t i = 0; i < n; ++i) {
        approx::MinimaxPoly p = sign.stages[i];
        const double h = p.hull().hi;
        if (i > 0) {
            std::vector<approx::Interval> ivs;
            for (const auto& iv : p.domain.intervals())
                ivs.push_back({iv.lo / h, iv.hi / h});
            p.domain = approx::IntervalUnion(std::move(ivs));
        } else if (h != 1.0 || p.hull().lo != -1.0) {
            throw DomainError("first sign stage must be fitted inside [-1, 1]");
        }
        r.stages.push_back(std::move(p));
        r.depth.push_back(polyeval::plan(r.stages.back()).depth);
    }
    for (std::size_t i = 0; i + 1 < n; ++i)
        r.out_scale.push_back(1.0 / sign.stages[i + 1].hull().hi);
    r.out_scale.push_back(0.5);
    // Balance the two halves; ties go to the shorter prefix.
    int best = -1, best_cost = std::numeric_limits<int>::max();
    for (int s = 1; s < static_cast<int>(n); ++s) {
        r.split = s;
        if (r.tail_levels() > L_eval || r.prefix_levels() > L_eval)
            continue;
        const int cost = std::max(r.prefix_levels(), r.tail_levels());
        if (cost < best_cost) {
            best_cost = cost;
            best = s;
        }
    }
    if (best < 0)
        throw DomainError("relu approximation does not fit in " + std::to_string(L_eval) +
                          " levels with one middle bootstrap");
    r.split = best;
    return r;
}

/// compose_sign(13), built once per process.
inline const approx::CompositeSign& default_sign() {
    static const approx::CompositeSign s = approx::compose_sign(13);
    return s;
}

inline const ReluApprox& default_relu_approx(int L_eval) {
    static std::mutex mu;
    static std::map<int, ReluApprox> cache;
    std::lock_guard<std::mutex> lock(mu);
    auto it = cache.find(L_eval);
    if (it == cache.end())
        it = cache.emplace(L_eval, make_relu_approx(default_sign(), L_eval)).first;
    return it->second;
}

/// Degree-12 least-squares e^x on [-1, 1].
inline const approx::MinimaxPoly& default_exp_poly() {
    static const approx::MinimaxPoly p = approx::exp_poly(12);
    return p;
}

/// e^(x/4) / sum_j e^(x_j/4) over 10 logits. The exponential is p(x/64)^16; the sum is scaled by
/// `prescale` into the inverse's domain (0, 2).
struct SoftmaxParams {
    /// Bound on |logit|.
    double bound = 40.0;
    /// 0 selects 1 / (10 e^(bound/4)), which maps every possible sum into (0, 1].
    double prescale = 0.0;
    /// Target relative error of the inverse at the smallest possible scaled sum.
    double inverse_rel_err = 0x1p-20;
    /// 0 derives the count from inverse_rel_err.
    int inverse_iterations = 0;

    double scale() const { return prescale > 0.0 ? prescale : 1.0 / (10.0 * std::exp(bound / 4.0)); }
    /// Smallest scaled sum: all logits at -bound.
    double min_scaled_sum() const { return scale() * 10.0 * std::exp(-bound / 4.0); }
    int iterations() const {
        if (inverse_iterations > 0)
            return inverse_iterations;
        const double a = std::min(min_scaled_sum(), 0.5);
        return approx::inverse_iterations_for(a, inverse_rel_err);
    }
    void validate() const {
        if (!(bound > 0.0))
            throw DomainError("softmax bound must be positive");
        if (prescale < 0.0 || inverse_iterations < 0)
            throw DomainError("softmax prescale and iteration count must be non-negative");
        if (!(inverse_rel_err > 0.0 && inverse_rel_err < 1.0))
            throw DomainError("softmax inverse error target must lie in (0, 1)");
    }
};

/// Exact e^(x/4) / sum e^(x_j/4), computed with the maximum subtracted.
inline std::vector<double> tempered_softmax(const std::vector<double>& logits, double temperature = 4.0) {
    if (logits.empty())
        return {};
    const double m = *std::max_element(logits.begin(), logits.end());
    std::vector<double> p;
    double s = 0.0;
    for (double x : logits) {
        p.push_back(std::exp((x - m) / temperature));
        s += p.back();
    }
    for (auto& v : p)
        v /= s;
    return p;
}

} // namespace heresnet::resnet
