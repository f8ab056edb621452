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
#include <sstream>
#include <string>
#include <vector>

#include "heresnet/approx/chebyshev.hpp"
#include "heresnet/approx/interval.hpp"
#include "heresnet/approx/remez.hpp"
#include "heresnet/common/errors.hpp"

namespace heresnet::approx {

/// Levels needed to evaluate a degree-d polynomial on [-1, 1].
inline int poly_depth(int degree) {
    int d = 0;
    while ((1 << d) < degree + 1)
        ++d;
    return d;
}

/// sign(x) as p_k o ... o p_1, each stage an odd minimax polynomial.
struct CompositeSign {
    std::vector<MinimaxPoly> stages;
    int alpha = 0;
    /// Smallest |x| the first stage was fitted on.
    double gap = 0.0;

    std::vector<int> degrees() const {
        std::vector<int> d;
        for (const auto& s : stages)
            d.push_back(s.degree);
        return d;
    }
    int depth() const {
        int d = 0;
        for (const auto& s : stages)
            d += poly_depth(s.degree);
        return d;
    }
    double operator()(double x) const {
        for (const auto& s : stages)
            x = eval_poly_reference(s, x);
        return x;
    }
    long double eval_extended(long double x) const {
        for (const auto& s : stages)
            x = eval_poly_extended(s, x);
        return x;
    }
};

/// x (1 + g(x)) / 2 for |x| <= 1.
inline double relu_from_sign(const CompositeSign& sign, double x) {
    return 0.5 * x * (1.0 + sign(x));
}

struct SignQuality {
    /// max |g(x) - 1| on [lo, 1].
    double max_sign_error = 0.0;
    /// mean |relu_from_sign(x) - max(x, 0)| for x uniform on [-1, 1].
    double mean_relu_error = 0.0;
    /// max |relu_from_sign(x) - max(x, 0)| on [-1, 1].
    double max_relu_error = 0.0;
};

/// Grid measurement; by oddness only x >= 0 is visited.
inline SignQuality measure_sign(const CompositeSign& s, double lo, std::size_t grid = std::size_t{1} << 21) {
    SignQuality q;
    const std::size_t g = std::max<std::size_t>(grid, 2);
    for (std::size_t i = 0; i < g; ++i) {
        const double x = (i + 1 == g) ? 1.0 : lo + (1.0 - lo) * static_cast<double>(i) / static_cast<double>(g - 1);
        q.max_sign_error = std::max(q.max_sign_error, std::fabs(s(x) - 1.0));
    }
    // midpoint rule for int_0^1 x |1 - g| / 2 dx, which equals the mean over [-1, 1]
    long double acc = 0;
    for (std::size_t i = 0; i < g; ++i) {
        const double x = (static_cast<double>(i) + 0.5) / static_cast<double>(g);
        const double e = 0.5 * x * std::fabs(1.0 - s(x));
        acc += e;
        q.max_relu_error = std::max(q.max_relu_error, e);
    }
    q.mean_relu_error = static_cast<double>(acc / g);
    return q;
}

namespace detail {

inline long double sign_target(long double x) { return x > 0 ? 1.0L : (x < 0 ? -1.0L : 0.0L); }

/// Fits one odd stage for sign on +-[a, b].
inline MinimaxPoly fit_sign_stage(double a, double b, int degree, const RemezOptions& opt) {
    return remez(sign_target, IntervalUnion::symmetric_pair(a, b), degree, Parity::odd, opt);
}

/// log2(r / (1 - r)), the progress measure for the input ratio r = a / b.
inline double logit2(double r) { return std::log2(r / (1.0 - r)); }

} // namespace detail

/// Chains minimax stages: stage 1 on +-[gap, 1], stage i+1 on the image band +-[1 - d_i, 1 + d_i].
inline CompositeSign compose_stages(const std::vector<int>& degrees, double gap, int alpha,
                                    const RemezOptions& opt = {}) {
    if (degrees.empty())
        throw DomainError("composite sign needs at least one stage");
    if (!(gap > 0.0 && gap < 1.0))
        throw DomainError("sign gap must lie in (0, 1)");
    CompositeSign out;
    out.alpha = alpha;
    out.gap = gap;
    double a = gap, b = 1.0;
    for (int d : degrees) {
        if (d < 1 || d % 2 == 0)
            throw DomainError("sign stages must have odd degree");
        out.stages.push_back(detail::fit_sign_stage(a, b, d, opt));
        const double delta = out.stages.back().achieved_error;
        if (!(delta < 1.0))
            throw ConvergenceError("sign stage error reached 1; the gap is too small");
        a = 1.0 - delta;
        b = 1.0 + delta;
    }
    return out;
}

struct SignOptions {
    RemezOptions remez{};
    /// Grid used for quality checks while searching.
    std::size_t check_grid = std::size_t{1} << 18;
    /// Stage-count cap for the degree search.
    int max_stages = 10;
};

/// Stage degrees for alpha = 13.
inline const std::vector<int>& alpha13_degrees() {
    static const std::vector<int> d{15, 15, 27};
    return d;
}

/// Builds the composite sign for precision alpha.
///
/// For alpha = 13 the stage degrees are (15, 15, 27). These cannot reach 2^-13 at an input gap of
/// 2^-13, so the fitted gap is the smallest one (bisected in 1/64 octave) whose sign error on
/// [gap, 1] is at most 2^-13 while the mean ReLU error stays at most 2^-16. The worst-case ReLU
/// error grows with the gap, so the smallest feasible gap is also best for it. Other alphas use gap
/// 2^-alpha and a greedy degree search that maximises logit progress per level.
inline CompositeSign compose_sign(int alpha, const SignOptions& opt = {}) {
    if (alpha < 1 || alpha > 40)
        throw DomainError("alpha must lie in [1, 40]");
    const double target = std::ldexp(1.0, -alpha);

    if (alpha == 13) {
        const double mean_target = std::ldexp(1.0, -16);
        auto feasible = [&](double log2gap, CompositeSign& cs) {
            try {
                cs = compose_stages(alpha13_degrees(), std::exp2(log2gap), alpha, opt.remez);
            } catch (const ConvergenceError&) {
                return false;
            }
            const auto q = measure_sign(cs, cs.gap, opt.check_grid);
            return q.max_sign_error <= target && q.mean_relu_error <= mean_target;
        };
        // larger gaps are easier; find the smallest feasible one
        double lo = -13.0, hi = -6.0;
        CompositeSign best, probe;
        if (!feasible(hi, best))
            throw ConvergenceError("alpha 13: no feasible gap with degrees (15, 15, 27)");
        if (feasible(lo, probe))
            return probe;
        while (hi - lo > 1.0 / 64) {
            const double mid = 0.5 * (lo + hi);
            if (feasible(mid, probe)) {
                hi = mid;
                best = probe;
            } else {
                lo = mid;
            }
        }
        return best;
    }

    // greedy degree search at gap 2^-alpha
    std::vector<int> chosen;
    double a = target, b = 1.0;
    double best_delta = 1.0;
    for (int stage = 0; stage < opt.max_stages; ++stage) {
        const double r = a / b;
        int pick = -1;
        double pick_rate = -1e300, pick_delta = 1.0;
        int finish = -1;
        for (int d = 3; d <= 31; d += 2) {
            MinimaxPoly p;
            try {
                p = detail::fit_sign_stage(a, b, d, opt.remez);
            } catch (const ConvergenceError&) {
                continue;
            }
            const double delta = p.achieved_error;
            if (!(delta < 1.0))
                continue;
            if (delta <= target && finish < 0)
                finish = d;
            const double rate = (detail::logit2((1.0 - delta) / (1.0 + delta)) - detail::logit2(r)) /
                                poly_depth(d);
            if (rate > pick_rate) {
                pick_rate = rate;
                pick = d;
                pick_delta = delta;
            }
        }
        if (finish > 0) {
            chosen.push_back(finish);
            return compose_stages(chosen, target, alpha, opt.remez);
        }
        if (pick < 0 || pick_rate <= 0)
            break;
        chosen.push_back(pick);
        best_delta = pick_delta;
        a = 1.0 - pick_delta;
        b = 1.0 + pick_delta;
    }
    std::ostringstream os;
    os << "compose_sign: alpha " << alpha << " not reached; best precision 2^"
       << std::log2(best_delta) << " after " << chosen.size() << " stages";
    throw ConvergenceError(os.str());
}

} // namespace heresnet::approx
