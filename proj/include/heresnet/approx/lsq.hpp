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

#include <cmath>
#include <cstddef>
#include <vector>

#include <boost/math/quadrature/gauss.hpp>
#include <boost/math/special_functions/legendre.hpp>

#include "heresnet/approx/chebyshev.hpp"
#include "heresnet/approx/interval.hpp"
#include "heresnet/approx/remez.hpp"
#include "heresnet/common/errors.hpp"

namespace heresnet::approx {

/// Uniform-weight L2 projection of f onto degree-`degree` polynomials over [a, b].
///
/// Legendre coefficients come from 128-point Gauss-Legendre quadrature; the projection is then
/// resampled at Chebyshev points and returned in the Chebyshev basis of [a, b].
template <class F>
MinimaxPoly least_squares_poly(const F& f, double a, double b, int degree) {
    if (degree < 0)
        throw DomainError("degree must be non-negative");
    if (!(a < b))
        throw DomainError("least squares interval needs a < b");
    constexpr int nodes = 128;
    if (degree >= nodes)
        throw DomainError("least squares degree too large for the quadrature rule");
    using G = boost::math::quadrature::gauss<double, nodes>;
    const auto& xs = G::abscissa();
    const auto& ws = G::weights();

    const double half = 0.5 * (b - a), mid = 0.5 * (a + b);
    std::vector<double> leg(static_cast<std::size_t>(degree) + 1, 0.0);
    for (std::size_t i = 0; i < xs.size(); ++i) {
        for (double t : {xs[i], -xs[i]}) {
            const double fx = static_cast<double>(f(mid + half * t));
            for (int k = 0; k <= degree; ++k)
                leg[static_cast<std::size_t>(k)] += ws[i] * fx * boost::math::legendre_p(k, t);
            if (xs[i] == 0.0)
                break; // the centre node is counted once
        }
    }
    for (int k = 0; k <= degree; ++k)
        leg[static_cast<std::size_t>(k)] *= (2.0 * k + 1.0) / 2.0;

    // exact change of basis: sample at degree+1 Chebyshev points and apply the discrete transform
    const int n = degree + 1;
    const double pi = 3.141592653589793238462643383279502884;
    std::vector<double> vals(static_cast<std::size_t>(n));
    for (int j = 0; j < n; ++j) {
        const double t = std::cos(pi * (j + 0.5) / n);
        double s = 0.0;
        for (int k = 0; k <= degree; ++k)
            s += leg[static_cast<std::size_t>(k)] * boost::math::legendre_p(k, t);
        vals[static_cast<std::size_t>(j)] = s;
    }
    MinimaxPoly p;
    p.domain = IntervalUnion({{a, b}});
    p.degree = degree;
    p.parity = Parity::none;
    p.coeffs.assign(static_cast<std::size_t>(n), 0.0);
    for (int k = 0; k < n; ++k) {
        double s = 0.0;
        for (int j = 0; j < n; ++j)
            s += vals[static_cast<std::size_t>(j)] * std::cos(pi * k * (j + 0.5) / n);
        p.coeffs[static_cast<std::size_t>(k)] = (k == 0 ? 1.0 : 2.0) * s / n;
    }
    RemezOptions grid;
    grid.grid_per_interval = std::size_t{1} << 14;
    p.achieved_error = measure_max_error(p, f, grid);
    return p;
}

/// Degree-12 least-squares exponential on [-1, 1] used by softmax.
inline MinimaxPoly exp_poly(int degree = 12) {
    return least_squares_poly([](long double x) { return std::exp(x); }, -1.0, 1.0, degree);
}

} // namespace heresnet::approx
