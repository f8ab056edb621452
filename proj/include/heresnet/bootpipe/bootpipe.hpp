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
#include <complex>
#include <cstdint>
#include <cstdlib>
#include <map>
#include <memory>
#include <mutex>
#include <numbers>
#include <random>
#include <string>
#include <tuple>
#include <utility>
#include <vector>

#include <Eigen/Dense>

#include "heresnet/approx/remez.hpp"
#include "heresnet/common/errors.hpp"

// Numeric model of CKKS bootstrapping: mod raise, the slot/coefficient transforms and the
// approximate modular reduction. Values are in units of q0 (a coefficient m reads m / q0).
namespace heresnet::bootpipe {

using approx::MinimaxPoly;
using cvec = std::vector<std::complex<double>>;

struct BootParams {
    int K = 17;
    int eps_exp = 6;
    int h = 64;
    int cos_degree = 54;
    int asin_degree = 5;
    int double_angles = 2;
    int q0_exp = 60;
    int msg_scale_exp = 50; // message scale Delta = 2^msg_scale_exp
    std::size_t n_coeff = 2048;

    double eps() const { return std::ldexp(1.0, -eps_exp); }
    /// Delta / q0: a unit message in a slot becomes this much in q0 units.
    double msg_ratio() const { return std::ldexp(1.0, msg_scale_exp - q0_exp); }

    void validate() const {
        if (K < 1)
            throw DomainError("K must be >= 1");
        if (eps_exp < 2)
            throw DomainError("eps = 2^-eps_exp must be below 1/2");
        if (h < 1)
            throw DomainError("Hamming weight must be >= 1");
        if (double_angles < 0)
            throw DomainError("double_angles must be >= 0");
        if (cos_degree < 1 || asin_degree < 1 || asin_degree % 2 == 0)
            throw DomainError("cos degree must be >= 1 and asin degree odd");
        if (msg_scale_exp >= q0_exp)
            throw DomainError("message scale must be below q0");
        if (n_coeff < 2 || (n_coeff & (n_coeff - 1)) != 0)
            throw DomainError("n_coeff must be a power of two >= 2");
    }

    auto key() const {
        return std::make_tuple(K, eps_exp, cos_degree, asin_degree, double_angles);
    }
};

// ---------------------------------------------------------------------------------------------
// Mod raise

namespace detail {

/// Sum of n uniforms on (-1/2, 1/2], rounded to the nearest integer (ties away from zero).
/// Uniforms are 16-bit, u = (k + 1) / 2^16 - 1/2, four per generator output; the sum is exact in
/// integer arithmetic and the boundaries K - 1/2 lie on its grid.
class IrwinHallSampler {
public:
    IrwinHallSampler(int n, std::uint64_t seed) : n_(n), rng_(seed) {}

    double continuous() { return static_cast<double>(raw()) * 0x1p-16; }

    long rounded() {
        const std::int64_t s = raw();
        const std::int64_t half = std::int64_t{1} << 15;
        return s >= 0 ? static_cast<long>((s + half) >> 16) : -static_cast<long>((-s + half) >> 16);
    }

private:
    std::int64_t raw() {
        std::int64_t acc = 0;
        int left = n_;
        for (; left >= 4; left -= 4) {
            const std::uint64_t r = rng_();
            acc += static_cast<std::int64_t>((r & 0xffff) + ((r >> 16) & 0xffff) + ((r >> 32) & 0xffff) + (r >> 48));
        }
        if (left > 0) {
            std::uint64_t r = rng_();
            for (; left > 0; --left, r >>= 16)
                acc += static_cast<std::int64_t>(r & 0xffff);
        }
        // each term contributes k + 1 - 2^15
        return acc + static_cast<std::int64_t>(n_) * (1 - (std::int64_t{1} << 15));
    }

    int n_;
    std::mt19937_64 rng_;
};

} // namespace detail

struct ModRaise {
    std::vector<double> t;       // msg + I
    std::vector<long> overflow;  // I
    std::size_t failures = 0;    // coefficients with |I| >= K
};

/// t[j] = msg[j] + I[j], I[j] = round of a sum of h + 1 uniforms on (-1/2, 1/2].
inline ModRaise simulate_mod_raise(const std::vector<double>& msg, const BootParams& params,
                                   std::uint64_t seed) {
    params.validate();
    detail::IrwinHallSampler s(params.h + 1, seed);
    ModRaise out;
    out.t.resize(msg.size());
    out.overflow.resize(msg.size());
    for (std::size_t j = 0; j < msg.size(); ++j) {
        const long I = s.rounded();
        out.overflow[j] = I;
        out.t[j] = msg[j] + static_cast<double>(I);
        if (std::labs(I) >= params.K)
            ++out.failures;
    }
    return out;
}

/// Histogram of |I| over `draws` samples for Hamming weight h.
inline std::vector<std::uint64_t> overflow_histogram(int h, std::uint64_t draws, std::uint64_t seed) {
    if (h < 1)
        throw DomainError("Hamming weight must be >= 1");
    std::vector<std::uint64_t> hist(static_cast<std::size_t>(h / 2 + 2), 0);
    detail::IrwinHallSampler s(h + 1, seed);
    for (std::uint64_t i = 0; i < draws; ++i)
        ++hist[static_cast<std::size_t>(std::labs(s.rounded()))];
    return hist;
}

/// Fraction of draws with |I| >= K, from a histogram.
inline double tail_fraction(const std::vector<std::uint64_t>& hist, int K) {
    std::uint64_t total = 0, tail = 0;
    for (std::size_t i = 0; i < hist.size(); ++i) {
        total += hist[i];
        if (static_cast<int>(i) >= K)
            tail += hist[i];
    }
    return total == 0 ? 0.0 : static_cast<double>(tail) / static_cast<double>(total);
}

// ---------------------------------------------------------------------------------------------
// Canonical embedding

/// Exponents of the evaluation roots: slot j < n/2 evaluates at zeta^(5^j), slot n/2 + j at its
/// conjugate zeta^(-5^j), with zeta = exp(i pi / n).
inline std::vector<std::uint64_t> root_exponents(std::size_t n) {
    const std::uint64_t m = 2 * n;
    std::vector<std::uint64_t> e(n);
    std::uint64_t g = 1;
    for (std::size_t j = 0; j < n / 2; ++j) {
        e[j] = g;
        e[n / 2 + j] = (m - g) % m;
        g = g * 5 % m;
    }
    if (n == 1)
        e[0] = 1;
    return e;
}

/// The dense n x n embedding matrix V: slots = V * coeffs. V V^H = n I.
inline Eigen::MatrixXcd embedding_matrix(std::size_t n) {
    if (n < 2 || (n & (n - 1)) != 0)
        throw DomainError("transform size must be a power of two >= 2, got " + std::to_string(n));
    const auto e = root_exponents(n);
    const std::uint64_t m = 2 * n;
    Eigen::MatrixXcd V(static_cast<Eigen::Index>(n), static_cast<Eigen::Index>(n));
    for (std::size_t j = 0; j < n; ++j)
        for (std::size_t k = 0; k < n; ++k) {
            const std::uint64_t ex = e[j] * k % m;
            V(static_cast<Eigen::Index>(j), static_cast<Eigen::Index>(k)) =
                std::polar(1.0, std::numbers::pi * static_cast<double>(ex) / static_cast<double>(n));
        }
    return V;
}

namespace detail {

inline const Eigen::MatrixXcd& cached_embedding(std::size_t n) {
    static std::mutex mu;
    static std::map<std::size_t, std::unique_ptr<Eigen::MatrixXcd>> cache;
    std::lock_guard<std::mutex> lock(mu);
    auto& slot = cache[n];
    if (!slot)
        slot = std::make_unique<Eigen::MatrixXcd>(embedding_matrix(n));
    return *slot;
}

/// Real form for real coefficient vectors: W = [Re V_half; Im V_half] (n x n), where V_half is the
/// first n/2 rows. y = W t stacks (Re z, Im z) of the n/2 independent slots, and t = (2/n) W^T y.
inline const Eigen::MatrixXd& cached_real_embedding(std::size_t n) {
    static std::mutex mu;
    static std::map<std::size_t, std::unique_ptr<Eigen::MatrixXd>> cache;
    std::lock_guard<std::mutex> lock(mu);
    auto& slot = cache[n];
    if (!slot) {
        const auto e = root_exponents(n);
        const std::uint64_t m = 2 * n;
        const auto ni = static_cast<Eigen::Index>(n), h = ni / 2;
        auto W = std::make_unique<Eigen::MatrixXd>(ni, ni);
        for (Eigen::Index j = 0; j < h; ++j)
            for (Eigen::Index k = 0; k < ni; ++k) {
                const std::uint64_t ex = e[static_cast<std::size_t>(j)] * static_cast<std::uint64_t>(k) % m;
                const double a = std::numbers::pi * static_cast<double>(ex) / static_cast<double>(n);
                (*W)(j, k) = std::cos(a);
                (*W)(h + j, k) = std::sin(a);
            }
        slot = std::move(W);
    }
    return *slot;
}

} // namespace detail

/// Coefficients -> slot values under the canonical embedding. The result is split in the slots at
/// the roots zeta^(5^j) and at their conjugates; for real input the second half is the conjugate
/// of the first. A delta at coefficient 0 maps to all ones.
inline std::pair<cvec, cvec> coeff_to_slot(const cvec& v, std::size_t n) {
    if (v.size() != n)
        throw DomainError("coeff_to_slot: vector has " + std::to_string(v.size()) + " entries, expected " +
                          std::to_string(n));
    const auto& V = detail::cached_embedding(n);
    const Eigen::Map<const Eigen::VectorXcd> x(v.data(), static_cast<Eigen::Index>(n));
    const Eigen::VectorXcd z = V * x;
    cvec a(z.data(), z.data() + n / 2), b(z.data() + n / 2, z.data() + n);
    return {std::move(a), std::move(b)};
}

/// Inverse of coeff_to_slot: coeffs = V^H z / n.
inline cvec slot_to_coeff(const std::pair<cvec, cvec>& z, std::size_t n) {
    if (z.first.size() != n / 2 || z.second.size() != n / 2)
        throw DomainError("slot_to_coeff: expected two halves of " + std::to_string(n / 2) + " slots");
    const auto& V = detail::cached_embedding(n);
    Eigen::VectorXcd s(static_cast<Eigen::Index>(n));
    for (std::size_t j = 0; j < n / 2; ++j) {
        s(static_cast<Eigen::Index>(j)) = z.first[j];
        s(static_cast<Eigen::Index>(n / 2 + j)) = z.second[j];
    }
    const Eigen::VectorXcd c = V.adjoint() * s / static_cast<double>(n);
    return cvec(c.data(), c.data() + n);
}

/// Cost of the collapsed-FFT factorization of the transform into `depth` sparse stages (reported only;
/// the numeric model uses the dense matrix). Each stage merges ceil or floor of log2(n/2)/depth radix-2
/// levels and needs 2^(r+1) - 1 diagonals, all but one of them rotations.
struct TransformCost {
    int depth = 0;
    int rotations = 0;
    int diagonals = 0;
};

inline TransformCost collapsed_fft_cost(std::size_t n, int depth = 2) {
    if (n < 4 || (n & (n - 1)) != 0 || depth < 1)
        throw DomainError("collapsed_fft_cost needs n a power of two >= 4 and depth >= 1");
    int levels = 0;
    while ((std::size_t{1} << levels) < n / 2)
        ++levels;
    depth = std::min(depth, levels);
    TransformCost c;
    c.depth = depth;
    for (int s = 0; s < depth; ++s) {
        const int r = levels / depth + (s < levels % depth ? 1 : 0);
        const int diag = (1 << (r + 1)) - 1;
        c.diagonals += diag;
        c.rotations += diag - 1;
    }
    return c;
}

// ---------------------------------------------------------------------------------------------
// Approximate modular reduction

/// cos(2 pi (t - 1/4) / 2^l), the function the cosine polynomial approximates. After l double-angle
/// steps it becomes cos(2 pi (t - 1/4)) = sin(2 pi t).
inline long double shifted_cosine(long double t, int double_angles) {
    const long double pi = std::numbers::pi_v<long double>;
    return std::cos(2 * pi * (t - 0.25L) / std::ldexp(1.0L, double_angles));
}

inline MinimaxPoly build_cos_poly(const BootParams& p, const approx::RemezOptions& opt = {}) {
    p.validate();
    const int l = p.double_angles;
    return approx::remez([l](long double t) { return shifted_cosine(t, l); },
                         approx::IntervalUnion::integer_neighborhoods(p.K, p.eps()), p.cos_degree,
                         approx::Parity::none, opt);
}

/// Odd fit of arcsin(y) / (2 pi) on [-sin(2 pi eps), sin(2 pi eps)].
inline MinimaxPoly build_asin_poly(const BootParams& p, const approx::RemezOptions& opt = {}) {
    p.validate();
    const long double pi = std::numbers::pi_v<long double>;
    const double ymax = static_cast<double>(std::sin(2 * pi * static_cast<long double>(p.eps())));
    return approx::remez([pi](long double y) { return std::asin(y) / (2 * pi); },
                         approx::IntervalUnion({{-ymax, ymax}}), p.asin_degree, approx::Parity::odd, opt);
}

class ModReducer {
public:
    struct Checked {
        double value = 0;
        bool flagged = false;
    };

    explicit ModReducer(const BootParams& p) : params_(p) {
        cos_ = build_cos_poly(p);
        asin_ = build_asin_poly(p);
        max_error_ = measure_max_error();
    }

    ModReducer(const BootParams& p, MinimaxPoly cos_poly, MinimaxPoly asin_poly)
        : params_(p), cos_(std::move(cos_poly)), asin_(std::move(asin_poly)) {
        max_error_ = measure_max_error();
    }

    /// One pass: cosine polynomial, l double angles, arcsine polynomial.
    double raw(double t) const {
        double c = approx::eval_poly_reference(cos_, t);
        for (int i = 0; i < params_.double_angles; ++i)
            c = 2.0 * c * c - 1.0;
        return approx::eval_poly_reference(asin_, c);
    }

    /// Odd by construction: (raw(t) - raw(-t)) / 2.
    double operator()(double t) const { return 0.5 * (raw(t) - raw(-t)); }

    /// Results above eps + max_error in magnitude cannot come from an in-region input.
    Checked checked(double t) const {
        const double v = (*this)(t);
        return {v, std::fabs(v) > params_.eps() + max_error_};
    }

    /// Max |f(t) - (t - round(t))| over the region, on `per_interval` + 1 points per interval.
    double measure_max_error(std::size_t per_interval = 1u << 14) const {
        const auto dom = approx::IntervalUnion::integer_neighborhoods(params_.K, params_.eps());
        double worst = 0.0;
        for (const auto& iv : dom.intervals()) {
            const double mid = std::round(0.5 * (iv.lo + iv.hi));
            for (std::size_t i = 0; i <= per_interval; ++i) {
                const double t = iv.lo + (iv.hi - iv.lo) * static_cast<double>(i) / static_cast<double>(per_interval);
                worst = std::max(worst, std::fabs((*this)(t) - (t - mid)));
            }
        }
        return worst;
    }

    double max_error() const { return max_error_; }
    const MinimaxPoly& cos_poly() const { return cos_; }
    const MinimaxPoly& asin_poly() const { return asin_; }
    const BootParams& params() const { return params_; }

private:
    BootParams params_;
    MinimaxPoly cos_, asin_;
    double max_error_ = 0;
};

/// Shared reducer for the given parameters (built once per parameter set).
inline std::shared_ptr<const ModReducer> mod_reducer(const BootParams& p) {
    static std::mutex mu;
    static std::map<decltype(p.key()), std::shared_ptr<const ModReducer>> cache;
    std::lock_guard<std::mutex> lock(mu);
    auto& slot = cache[p.key()];
    if (!slot)
        slot = std::make_shared<const ModReducer>(p);
    return slot;
}

/// Approximately t - round(t) for t in the union of [i - eps, i + eps], |i| < K.
inline double approx_mod_reduction(double t, const BootParams& p) { return (*mod_reducer(p))(t); }

// ---------------------------------------------------------------------------------------------
// End-to-end precision

struct PrecisionReport {
    std::size_t trials = 0;
    std::size_t slots = 0;
    double mean_abs_error = 0; // in message units (slot values of magnitude <= 1)
    double max_abs_error = 0;
    double mean_bits = 0;      // -log2(mean_abs_error)
    double min_bits = 0;       // -log2(max_abs_error)
    std::size_t raise_failures = 0;
    std::size_t flagged = 0;
    double mod_reduction_error = 0; // grid-measured, q0 units
};

struct PrecisionOptions {
    bool zero_message = false;
    std::size_t batch = 32;
};

/// Per trial: real slot message x in [-1,1]^(n/2), coefficients m = (Delta/q0) V^-1 x, mod raise,
/// CoeffToSlot (inverse embedding of the raised slots), mod reduction per coefficient, SlotToCoeff
/// (embedding), comparison with x. Trial i uses seed + i.
inline PrecisionReport bootstrap_precision(const BootParams& p, std::size_t trials, std::uint64_t seed,
                                           const PrecisionOptions& opt = {}) {
    p.validate();
    if (trials < 1)
        throw DomainError("bootstrap_precision needs trials >= 1");
    const auto red = mod_reducer(p);
    const std::size_t n = p.n_coeff, half = n / 2;
    const auto& W = detail::cached_real_embedding(n);
    const double ratio = p.msg_ratio();
    const auto ni = static_cast<Eigen::Index>(n);

    PrecisionReport rep;
    rep.trials = trials;
    rep.slots = half;
    rep.mod_reduction_error = red->max_error();
    double sum = 0.0;
    for (std::size_t first = 0; first < trials; first += opt.batch) {
        const std::size_t B = std::min(opt.batch, trials - first);
        const auto bi = static_cast<Eigen::Index>(B);
        Eigen::MatrixXd X = Eigen::MatrixXd::Zero(ni, bi); // stacked (Re x, Im x)
        Eigen::MatrixXd I(ni, bi);
        for (std::size_t b = 0; b < B; ++b) {
            const std::uint64_t s = seed + first + b;
            std::mt19937_64 rng(s);
            std::uniform_real_distribution<double> u(-1.0, 1.0);
            if (!opt.zero_message)
                for (std::size_t j = 0; j < half; ++j)
                    X(static_cast<Eigen::Index>(j), static_cast<Eigen::Index>(b)) = u(rng);
            detail::IrwinHallSampler ih(p.h + 1, s ^ 0x9e3779b97f4a7c15ULL);
            for (Eigen::Index k = 0; k < ni; ++k) {
                const long v = ih.rounded();
                if (std::labs(v) >= p.K)
                    ++rep.raise_failures;
                I(k, static_cast<Eigen::Index>(b)) = static_cast<double>(v);
            }
        }
        const double inv = 2.0 / static_cast<double>(n);
        const Eigen::MatrixXd M = (inv * ratio) * (W.transpose() * X); // message coefficients
        const Eigen::MatrixXd Z = W * (M + I);                         // raised slots
        Eigen::MatrixXd T = inv * (W.transpose() * Z);                 // CoeffToSlot
        for (Eigen::Index b = 0; b < bi; ++b)
            for (Eigen::Index k = 0; k < ni; ++k) {
                const auto c = red->checked(T(k, b));
                if (c.flagged)
                    ++rep.flagged;
                T(k, b) = c.value;
            }
        const Eigen::MatrixXd Y = W * T; // SlotToCoeff
        for (Eigen::Index b = 0; b < bi; ++b)
            for (std::size_t j = 0; j < half; ++j) {
                const auto jr = static_cast<Eigen::Index>(j), ji = static_cast<Eigen::Index>(half + j);
                const double er = Y(jr, b) / ratio - X(jr, b);
                const double ei = Y(ji, b) / ratio - X(ji, b);
                const double e = std::hypot(er, ei);
                sum += e;
                rep.max_abs_error = std::max(rep.max_abs_error, e);
            }
    }
    rep.mean_abs_error = sum / static_cast<double>(trials * half);
    rep.mean_bits = -std::log2(rep.mean_abs_error);
    rep.min_bits = -std::log2(rep.max_abs_error);
    return rep;
}

} // namespace heresnet::bootpipe
