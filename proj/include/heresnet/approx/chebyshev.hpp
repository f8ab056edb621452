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
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "heresnet/approx/interval.hpp"
#include "heresnet/common/errors.hpp"

namespace heresnet::approx {

enum class Parity { odd, even, none };

inline std::string_view to_string(Parity p) noexcept {
    switch (p) {
    case Parity::odd: return "odd";
    case Parity::even: return "even";
    case Parity::none: return "none";
    }
    return "none";
}

inline Parity parse_parity(std::string_view s) {
    if (s == "odd") return Parity::odd;
    if (s == "even") return Parity::even;
    if (s == "none") return Parity::none;
    throw DomainError("unknown parity '" + std::string(s) + "'");
}

/// True when basis index k is allowed under parity p.
constexpr bool parity_admits(Parity p, int k) noexcept {
    switch (p) {
    case Parity::odd: return k % 2 == 1;
    case Parity::even: return k % 2 == 0;
    case Parity::none: return true;
    }
    return true;
}

/// Clenshaw summation of sum_k c[k] T_k(t).
template <class T, class C>
T clenshaw(std::span<const C> c, T t) {
    if (c.empty())
        return T(0);
    T b1 = 0, b2 = 0;
    const T two_t = t + t;
    for (std::size_t k = c.size() - 1; k >= 1; --k) {
        const T b0 = two_t * b1 - b2 + static_cast<T>(c[k]);
        b2 = b1;
        b1 = b0;
    }
    return t * b1 - b2 + static_cast<T>(c[0]);
}

/// Affine map of the hull [lo, hi] onto [-1, 1]. Exactly odd when lo == -hi.
template <class T>
T to_unit(T x, T lo, T hi) {
    return (x + x - (lo + hi)) / (hi - lo);
}

/// A polynomial in the Chebyshev basis of its domain hull, plus the error it achieved
/// against the function it approximates.
struct MinimaxPoly {
    IntervalUnion domain;
    int degree = 0;
    std::vector<double> coeffs;
    double achieved_error = 0.0;
    Parity parity = Parity::none;
    /// Levelled reference set of the final exchange step. Empty for non-Remez polynomials and for
    /// fits that stopped at the double rounding floor.
    std::vector<double> reference;

    Interval hull() const { return domain.hull(); }

    /// Checks the structural invariants; parity zeros must be exact.
    void check_invariants() const {
        if (degree < 0)
            throw DomainError("polynomial degree must be non-negative");
        if (coeffs.size() != static_cast<std::size_t>(degree) + 1)
            throw DomainError("coefficient count must equal degree + 1");
        for (int k = 0; k <= degree; ++k)
            if (!parity_admits(parity, k) && coeffs[static_cast<std::size_t>(k)] != 0.0)
                throw DomainError("parity violated at coefficient " + std::to_string(k));
        if (!(achieved_error >= 0.0) && !std::isnan(achieved_error))
            throw DomainError("achieved error must be non-negative");
    }

    /// Multiplies every coefficient by s (the polynomial becomes s * p).
    MinimaxPoly scaled(double s) const {
        MinimaxPoly out = *this;
        for (auto& c : out.coeffs)
            c *= s;
        out.achieved_error *= std::abs(s);
        return out;
    }
};

/// Clenshaw evaluation of p at x. Points outside the hull extrapolate.
inline double eval_poly_reference(const MinimaxPoly& p, double x) {
    const Interval h = p.hull();
    if (h.lo == h.hi)
        return p.coeffs.empty() ? 0.0 : p.coeffs[0];
    const double t = to_unit(x, h.lo, h.hi);
    return clenshaw<double, double>(p.coeffs, t);
}

/// Long-double evaluation, used where the error level sits near double rounding.
inline long double eval_poly_extended(const MinimaxPoly& p, long double x) {
    const Interval h = p.hull();
    if (h.lo == h.hi)
        return p.coeffs.empty() ? 0.0L : p.coeffs[0];
    const long double t = to_unit<long double>(x, h.lo, h.hi);
    return clenshaw<long double, double>(p.coeffs, t);
}

/// Whether x lies within the hull (callers flag extrapolation with this).
inline bool in_hull(const MinimaxPoly& p, double x) {
    const Interval h = p.hull();
    return h.lo <= x && x <= h.hi;
}

} // namespace heresnet::approx
