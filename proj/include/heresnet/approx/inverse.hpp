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

#include "heresnet/common/errors.hpp"

namespace heresnet::approx {

/// prod_{i < iterations} (1 + (1 - a)^(2^i)), which tends to 1 / a for a in (0, 2).
inline double inverse_approx(double a, int iterations = 13) {
    if (!(a > 0.0 && a < 2.0))
        throw DomainError("inverse_approx needs a in (0, 2)");
    if (iterations < 1)
        throw DomainError("inverse_approx needs at least one iteration");
    double v = 1.0 - a;
    double r = 1.0;
    for (int i = 0; i < iterations; ++i) {
        r *= 1.0 + v;
        v *= v;
    }
    return r;
}

/// Absolute error bound |1 - a|^(2^iterations) / a of inverse_approx.
inline double inverse_error_bound(double a, int iterations) {
    return std::pow(std::fabs(1.0 - a), std::ldexp(1.0, iterations)) / a;
}

/// Smallest iteration count whose relative error |1 - a|^(2^n) is below rel_err for all a >= a_min.
inline int inverse_iterations_for(double a_min, double rel_err) {
    if (!(a_min > 0.0 && a_min < 1.0) || !(rel_err > 0.0 && rel_err < 1.0))
        throw DomainError("inverse_iterations_for needs a_min, rel_err in (0, 1)");
    // (1 - a)^(2^n) <= rel_err  <=>  2^n >= ln(rel_err) / ln(1 - a)
    const double need = std::log(rel_err) / std::log1p(-a_min);
    int n = 0;
    while (std::ldexp(1.0, n) < need)
        ++n;
    return std::max(n, 1);
}

} // namespace heresnet::approx
