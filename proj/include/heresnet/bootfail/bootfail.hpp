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
#include <string>

#include <boost/multiprecision/cpp_bin_float.hpp>
#include <boost/multiprecision/cpp_int.hpp>

#include "heresnet/common/errors.hpp"

// Failure probability of the modular-reduction step. The mod-raise overflow I is round(S), where S
// is a sum of h+1 independent uniforms on (-1/2, 1/2].
namespace heresnet::bootfail {

/// Which event counts as a failure for boundary K.
///   rounded: |round(S)| >= K, i.e. |S| >= K - 1/2.
///   exceed:  |round(S)| >  K, i.e. |S| >= K + 1/2.
enum class TailModel { rounded, exceed };

inline TailModel parse_tail_model(const std::string& s) {
    if (s == "rounded")
        return TailModel::rounded;
    if (s == "exceed")
        return TailModel::exceed;
    throw DomainError("unknown tail model '" + s + "' (expected rounded or exceed)");
}

inline const char* to_string(TailModel m) { return m == TailModel::rounded ? "rounded" : "exceed"; }

namespace detail {

namespace mp = boost::multiprecision;

/// Irwin-Hall CDF of n uniforms on [0,1] at x = m/2, evaluated exactly:
///   F(x) = sum_{k <= x} (-1)^k C(n,k) (2x - 2k)^n / (2^n n!).
/// The numerator is an exact integer, so the alternating sum has no cancellation error.
inline double irwin_hall_cdf_half(int n, long m) {
    if (m <= 0)
        return 0.0;
    if (m >= 2L * n)
        return 1.0;
    mp::cpp_int num = 0;
    mp::cpp_int binom = 1;
    for (long k = 0; 2 * k <= m; ++k) {
        mp::cpp_int term = binom * mp::pow(mp::cpp_int(m - 2 * k), static_cast<unsigned>(n));
        if (k % 2 == 0)
            num += term;
        else
            num -= term;
        binom = binom * (n - k) / (k + 1);
    }
    mp::cpp_int den = mp::cpp_int(1) << n;
    for (int k = 2; k <= n; ++k)
        den *= k;
    using F = mp::cpp_bin_float_50;
    return static_cast<double>(F(num) / F(den));
}

} // namespace detail

/// Pr(failure) for Hamming weight h and boundary K. Exactly 0 once the boundary is beyond the support.
inline double tail_prob(int h, int K, TailModel model = TailModel::rounded) {
    if (h < 1)
        throw DomainError("tail_prob: h must be >= 1, got " + std::to_string(h));
    if (K < 1)
        throw DomainError("tail_prob: K must be >= 1, got " + std::to_string(K));
    const int n = h + 1;
    // Pr(|S| >= c) = 2 Pr(U <= n/2 - c) with U = S + n/2 Irwin-Hall; 2c = 2K -+ 1.
    const long two_c = model == TailModel::rounded ? 2L * K - 1 : 2L * K + 1;
    const long m = n - two_c;
    const double p = 2.0 * detail::irwin_hall_cdf_half(n, m);
    return p > 1.0 ? 1.0 : p;
}

/// Smallest K with tail_prob(h, K) <= target_p.
inline int choose_K(int h, double target_p, TailModel model = TailModel::rounded) {
    if (!(target_p > 0.0 && target_p <= 1.0))
        throw DomainError("choose_K: target probability must lie in (0, 1]");
    for (int K = 1;; ++K)
        if (tail_prob(h, K, model) <= target_p)
            return K;
}

/// 1 - (1 - p)^(2n): one bootstrap fails if any of its 2n coefficients does.
inline double single_boot_failure(double p, long n) {
    if (!(p >= 0.0 && p <= 1.0) || n < 1)
        throw DomainError("single_boot_failure: need 0 <= p <= 1 and n >= 1");
    if (p == 1.0)
        return 1.0;
    return -std::expm1(2.0 * static_cast<double>(n) * std::log1p(-p));
}

struct NetworkFailure {
    double exact = 0;  // 1 - (1 - p)^(2 n N_b)
    double linear = 0; // 2 N_b n p
    double difference() const { return linear - exact; }
    double relative_difference() const { return exact == 0.0 ? 0.0 : (linear - exact) / exact; }
};

inline NetworkFailure network_failure(double p, long n, long n_boot) {
    if (!(p >= 0.0 && p <= 1.0) || n < 1 || n_boot < 1)
        throw DomainError("network_failure: need 0 <= p <= 1 and n, N_b >= 1");
    const double trials = 2.0 * static_cast<double>(n) * static_cast<double>(n_boot);
    NetworkFailure r;
    r.exact = p == 1.0 ? 1.0 : -std::expm1(trials * std::log1p(-p));
    r.linear = trials * p;
    return r;
}

} // namespace heresnet::bootfail
