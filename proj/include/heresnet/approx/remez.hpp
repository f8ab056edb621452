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
#include <functional>
#include <numeric>
#include <sstream>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "heresnet/approx/chebyshev.hpp"
#include "heresnet/approx/interval.hpp"
#include "heresnet/common/errors.hpp"

namespace heresnet::approx {

struct RemezOptions {
    /// Uniform scan points per interval before local refinement.
    std::size_t grid_per_interval = std::size_t{1} << 17;
    /// Stop once the relative spread of the alternating extrema drops below this.
    double tolerance = 1e-4;
    int max_iterations = 100;
    /// Golden-section steps used to polish each grid extremum.
    int refine_steps = 40;
    /// Reweighting passes of the discrete seed fit used on multi-interval domains.
    int lawson_iterations = 200;
    /// Called after each exchange step with (iteration, max |error|, relative spread, extrema found).
    std::function<void(int, double, double, std::size_t)> on_iteration;
};

/// Remez failure carrying the magnitudes of the last alternating extrema.
class RemezError : public ConvergenceError {
public:
    RemezError(const std::string& what, std::vector<double> profile)
        : ConvergenceError(what), profile_(std::move(profile)) {}
    const std::vector<double>& error_profile() const noexcept { return profile_; }

private:
    std::vector<double> profile_;
};

namespace detail {

struct Extremum {
    long double x;
    long double e;
    /// Bracket for local refinement.
    long double l;
    long double r;
};

inline int sign_of(long double v) { return v > 0 ? 1 : (v < 0 ? -1 : 0); }

/// Grid pass: the point of largest |err| within every run of constant sign, with its bracket.
template <class Err>
std::vector<Extremum> scan_extrema(const Err& err, const IntervalUnion& work, std::size_t grid) {
    std::vector<Extremum> out;
    for (const auto& iv : work.intervals()) {
        if (iv.degenerate()) {
            const long double x = iv.lo;
            const long double e = err(x);
            if (e != 0)
                out.push_back({x, e, x, x});
            continue;
        }
        const std::size_t g = std::max<std::size_t>(grid, 3);
        const long double lo = iv.lo, hi = iv.hi;
        auto at = [&](std::size_t i) {
            return (i + 1 == g) ? hi : lo + (hi - lo) * static_cast<long double>(i) / (g - 1);
        };
        bool open = false;
        for (std::size_t i = 0; i < g; ++i) {
            const long double x = at(i);
            const long double e = err(x);
            const int s = sign_of(e);
            const Extremum cand{x, e, at(i == 0 ? 0 : i - 1), at(i + 1 == g ? i : i + 1)};
            if (s == 0) {
                open = false;
            } else if (open && sign_of(out.back().e) == s) {
                if (std::fabs(e) > std::fabs(out.back().e))
                    out.back() = cand;
            } else {
                out.push_back(cand);
                open = true;
            }
        }
    }
    std::sort(out.begin(), out.end(), [](const Extremum& a, const Extremum& b) { return a.x < b.x; });
    return out;
}

/// Golden-section polish of an extremum within its bracket.
template <class Err>
void refine_extremum(const Err& err, Extremum& ex, int steps) {
    if (!(ex.l < ex.r))
        return;
    const int s = sign_of(ex.e);
    const long double phi = 0.6180339887498948482L;
    long double l = ex.l, r = ex.r;
    long double c = r - phi * (r - l), d = l + phi * (r - l);
    long double fc = s * err(c), fd = s * err(d);
    for (int k = 0; k < steps; ++k) {
        if (fc > fd) {
            r = d; d = c; fd = fc;
            c = r - phi * (r - l);
            fc = s * err(c);
        } else {
            l = c; c = d; fc = fd;
            d = l + phi * (r - l);
            fd = s * err(d);
        }
    }
    const long double xm = fc > fd ? c : d;
    const long double em = err(xm);
    if (s * em > s * ex.e) {
        ex.x = xm;
        ex.e = em;
    }
}

/// Reduces sorted extrema to at most `count` points of alternating sign, keeping large errors.
inline std::vector<Extremum> select_alternating(const std::vector<Extremum>& ex, std::size_t count) {
    std::vector<Extremum> alt;
    for (const auto& p : ex) {
        if (sign_of(p.e) == 0)
            continue;
        if (!alt.empty() && sign_of(alt.back().e) == sign_of(p.e)) {
            if (std::fabs(p.e) > std::fabs(alt.back().e))
                alt.back() = p;
        } else {
            alt.push_back(p);
        }
    }
    while (alt.size() > count) {
        std::size_t j = 0;
        for (std::size_t i = 1; i < alt.size(); ++i)
            if (std::fabs(alt[i].e) < std::fabs(alt[j].e))
                j = i;
        const bool at_end = j == 0 || j + 1 == alt.size();
        if (at_end || alt.size() - count == 1) {
            if (at_end) {
                alt.erase(alt.begin() + static_cast<std::ptrdiff_t>(j));
            } else {
                // one excess point left: drop whichever end is smaller
                if (std::fabs(alt.front().e) < std::fabs(alt.back().e))
                    alt.erase(alt.begin());
                else
                    alt.pop_back();
            }
        } else {
            const std::size_t k = std::fabs(alt[j - 1].e) < std::fabs(alt[j + 1].e) ? j - 1 : j;
            alt.erase(alt.begin() + static_cast<std::ptrdiff_t>(k),
                      alt.begin() + static_cast<std::ptrdiff_t>(k + 2));
        }
    }
    return alt;
}

/// Initial reference: Chebyshev extrema spread over intervals in proportion to length.
inline std::vector<long double> initial_reference(const IntervalUnion& work, std::size_t count,
                                                  bool avoid_zero) {
    const auto& ivs = work.intervals();
    const std::size_t n = ivs.size();
    std::vector<std::size_t> cnt(n, 0);
    std::vector<std::size_t> proper;
    std::size_t remaining = count;
    for (std::size_t i = 0; i < n; ++i) {
        if (ivs[i].degenerate()) {
            if (remaining > 0) {
                cnt[i] = 1;
                --remaining;
            }
        } else {
            proper.push_back(i);
        }
    }
    const long double center = 0.5L * (static_cast<long double>(ivs.front().lo) + ivs.back().hi);
    // outermost intervals first when breaking ties
    std::vector<std::size_t> order = proper;
    std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
        return std::fabs(ivs[a].mid() - center) > std::fabs(ivs[b].mid() - center);
    });
    const std::size_t np = proper.size();
    if (np > 0) {
        std::size_t floor_each = remaining >= 2 * np ? 2 : (remaining >= np ? 1 : 0);
        for (auto i : proper)
            cnt[i] = floor_each;
        remaining -= floor_each * np;
        long double total = 0;
        for (auto i : proper)
            total += ivs[i].length();
        std::vector<long double> frac(n, 0);
        std::size_t given = 0;
        const std::size_t extra = remaining;
        for (auto i : proper) {
            const long double share = extra * ivs[i].length() / total;
            const auto whole = static_cast<std::size_t>(std::floor(share));
            cnt[i] += whole;
            given += whole;
            frac[i] = share - whole;
        }
        std::vector<std::size_t> by_frac = order;
        std::stable_sort(by_frac.begin(), by_frac.end(),
                         [&](std::size_t a, std::size_t b) { return frac[a] > frac[b]; });
        for (std::size_t k = 0; given < extra; ++k, ++given)
            ++cnt[by_frac[k % by_frac.size()]];
    }
    std::vector<long double> pts;
    const long double pi = 3.141592653589793238462643383279502884L;
    for (std::size_t i = 0; i < n; ++i) {
        const long double lo = ivs[i].lo, hi = ivs[i].hi;
        const std::size_t q = cnt[i];
        if (q == 0)
            continue;
        const bool skip_zero = avoid_zero && lo == 0;
        if (q == 1) {
            pts.push_back(ivs[i].degenerate() ? lo : 0.5L * (lo + hi));
            continue;
        }
        for (std::size_t j = 0; j < q; ++j) {
            const long double u = skip_zero ? static_cast<long double>(j + 1) / q
                                            : static_cast<long double>(j) / (q - 1);
            pts.push_back(lo + (hi - lo) * (1 - std::cos(pi * u)) / 2);
        }
    }
    std::sort(pts.begin(), pts.end());
    return pts;
}

/// Discrete near-minimax fit by Lawson's reweighted least squares on Chebyshev points of every
/// interval. Returns the full coefficient vector on the hull [lo, hi].
template <class F>
std::vector<long double> lawson_fit(const F& f, const IntervalUnion& work, const std::vector<int>& basis,
                                    int degree, long double lo, long double hi, int iterations) {
    using Mat = Eigen::Matrix<long double, Eigen::Dynamic, Eigen::Dynamic>;
    using Vec = Eigen::Matrix<long double, Eigen::Dynamic, 1>;
    const long double pi = 3.141592653589793238462643383279502884L;
    const std::size_t m = basis.size();
    const std::size_t per = std::max<std::size_t>(32, 8 * (m + 1) / work.size() + 1);
    std::vector<long double> xs;
    for (const auto& iv : work.intervals()) {
        if (iv.degenerate()) {
            xs.push_back(iv.lo);
            continue;
        }
        for (std::size_t j = 0; j < per; ++j)
            xs.push_back(iv.lo + (static_cast<long double>(iv.hi) - iv.lo) *
                                     (1 - std::cos(pi * static_cast<long double>(j) / (per - 1))) / 2);
    }
    const std::size_t n = xs.size();
    Mat A(n, m);
    Vec b(n);
    for (std::size_t i = 0; i < n; ++i) {
        const long double t = (xs[i] + xs[i] - (lo + hi)) / (hi - lo);
        // T_k(t) by recurrence, keeping only admitted indices
        long double t0 = 1, t1 = t;
        std::size_t col = 0;
        for (int k = 0; k <= degree && col < m; ++k) {
            const long double tk = k == 0 ? t0 : (k == 1 ? t1 : 0);
            long double v = tk;
            if (k >= 2) {
                v = 2 * t * t1 - t0;
                t0 = t1;
                t1 = v;
            }
            if (basis[col] == k)
                A(i, col++) = v;
        }
        b(i) = static_cast<long double>(f(xs[i]));
    }
    Vec w = Vec::Constant(n, 1.0L / n);
    Vec c(m);
    const long double floor = 1e-15L * std::max(b.cwiseAbs().maxCoeff(), 1e-300L);
    for (int it = 0; it < iterations; ++it) {
        const Vec sw = w.cwiseSqrt();
        c = (sw.asDiagonal() * A).householderQr().solve(sw.asDiagonal() * b);
        const Vec r = (A * c - b).cwiseAbs();
        if (r.maxCoeff() <= floor)
            break;
        Vec nw = w.cwiseProduct(r);
        const long double s = nw.sum();
        if (!(s > 0))
            break;
        w = nw / s;
    }
    std::vector<long double> full(static_cast<std::size_t>(degree) + 1, 0);
    for (std::size_t j = 0; j < m; ++j)
        full[static_cast<std::size_t>(basis[j])] = c(j);
    return full;
}

inline IntervalUnion working_domain(const IntervalUnion& domain, Parity parity) {
    if (parity == Parity::none)
        return domain;
    if (!domain.is_symmetric())
        throw DomainError("odd/even parity requires a domain symmetric about zero");
    return domain.nonnegative_part();
}

/// T_k(t) by the three-term recurrence.
inline long double chebyshev_t(int k, long double t) {
    if (k == 0)
        return 1;
    long double a = 1, b = t;
    for (int i = 1; i < k; ++i) {
        const long double c = 2 * t * b - a;
        a = b;
        b = c;
    }
    return b;
}

} // namespace detail

/// Maximum of |p - f| over the domain: grid scan plus local refinement.
template <class F>
double measure_max_error(const MinimaxPoly& p, const F& f, const RemezOptions& opt = {}) {
    const IntervalUnion work = detail::working_domain(p.domain, p.parity);
    auto err = [&](long double x) { return eval_poly_extended(p, x) - static_cast<long double>(f(x)); };
    auto ex = detail::scan_extrema(err, work, opt.grid_per_interval);
    // only the largest candidates can set the maximum
    const std::size_t top = std::min<std::size_t>(ex.size(), 64);
    std::partial_sort(ex.begin(), ex.begin() + static_cast<std::ptrdiff_t>(top), ex.end(),
                      [](const auto& a, const auto& b) { return std::fabs(a.e) > std::fabs(b.e); });
    long double m = 0;
    for (std::size_t i = 0; i < ex.size(); ++i) {
        if (i < top)
            detail::refine_extremum(err, ex[i], opt.refine_steps);
        m = std::max(m, std::fabs(ex[i].e));
    }
    return static_cast<double>(m);
}

/// Multi-interval Remez exchange for the best uniform approximation of f on `domain`.
///
/// With odd or even parity the domain must be symmetric; only admissible Chebyshev terms
/// are fitted and the exchange runs on the non-negative half. `f` is called with long double.
template <class F>
MinimaxPoly remez(const F& f, const IntervalUnion& domain, int degree, Parity parity,
                  const RemezOptions& opt = {}) {
    using Mat = Eigen::Matrix<long double, Eigen::Dynamic, Eigen::Dynamic>;
    using Vec = Eigen::Matrix<long double, Eigen::Dynamic, 1>;

    if (degree < 0)
        throw DomainError("degree must be non-negative");
    const IntervalUnion work = detail::working_domain(domain, parity);
    const Interval hull = domain.hull();

    std::vector<int> basis;
    for (int k = 0; k <= degree; ++k)
        if (parity_admits(parity, k))
            basis.push_back(k);
    const std::size_t m = basis.size();
    const std::size_t R = m + 1;

    std::size_t available = 0;
    for (const auto& iv : work.intervals())
        available += iv.degenerate() ? 1 : R;
    if (hull.lo == hull.hi && degree > 0)
        throw DomainError("degenerate domain: single point cannot support degree > 0");
    if (available < R)
        throw DomainError("domain has fewer representable reference points than degree + 2");

    MinimaxPoly out;
    out.domain = domain;
    out.degree = degree;
    out.parity = parity;
    out.coeffs.assign(static_cast<std::size_t>(degree) + 1, 0.0);
    if (m == 0) {
        out.achieved_error = measure_max_error(out, f, opt);
        return out;
    }

    const long double lo = hull.lo, hi = hull.hi;
    auto unit = [&](long double x) { return to_unit<long double>(x, lo, hi); };

    std::vector<long double> ref = detail::initial_reference(work, R, parity == Parity::odd);
    std::vector<long double> full(static_cast<std::size_t>(degree) + 1, 0);
    bool seed_at_floor = false;
    if (work.size() > 1) {
        // a near-minimax seed keeps every interval represented in the first exchange
        const auto seed = detail::lawson_fit(f, work, basis, degree, lo, hi, opt.lawson_iterations);
        auto seed_err = [&](long double x) {
            return clenshaw<long double, long double>(seed, unit(x)) - static_cast<long double>(f(x));
        };
        const auto ex = detail::scan_extrema(seed_err, work, opt.grid_per_interval);
        long double seed_max = 0, fscale = 0;
        for (const auto& e : ex)
            seed_max = std::max(seed_max, std::fabs(e.e));
        for (const auto& iv : work.intervals())
            fscale = std::max({fscale, std::fabs(static_cast<long double>(f(iv.lo))),
                               std::fabs(static_cast<long double>(f(iv.hi)))});
        if (seed_max <= 1e-15L * std::max(fscale, 1e-300L)) {
            // already at double rounding: no exchange can improve on it
            seed_at_floor = true;
            full = seed;
        } else {
            const auto sel = detail::select_alternating(ex, R);
            if (sel.size() == R)
                for (std::size_t i = 0; i < R; ++i)
                    ref[i] = sel[i].x;
        }
    }
    std::vector<double> profile;
    bool converged = seed_at_floor;
    bool levelled = false;

    for (int iter = 0; !converged && iter < opt.max_iterations; ++iter) {
        Mat A(R, R);
        Vec b(R);
        long double fscale = 0;
        for (std::size_t i = 0; i < R; ++i) {
            const long double t = unit(ref[i]);
            for (std::size_t j = 0; j < m; ++j)
                A(i, j) = detail::chebyshev_t(basis[j], t);
            A(i, m) = (i % 2 == 0) ? 1 : -1;
            b(i) = static_cast<long double>(f(ref[i]));
            fscale = std::max(fscale, std::fabs(b(i)));
        }
        const Vec sol = A.partialPivLu().solve(b);
        std::fill(full.begin(), full.end(), 0);
        for (std::size_t j = 0; j < m; ++j)
            full[static_cast<std::size_t>(basis[j])] = sol(j);

        auto err = [&](long double x) {
            return clenshaw<long double, long double>(full, unit(x)) - static_cast<long double>(f(x));
        };
        const auto ex = detail::scan_extrema(err, work, opt.grid_per_interval);
        long double maxabs = 0;
        for (const auto& e : ex)
            maxabs = std::max(maxabs, std::fabs(e.e));
        // below double rounding there is nothing left to level
        if (maxabs <= 1e-15L * std::max(fscale, 1e-300L)) {
            converged = true;
            break;
        }
        auto sel = detail::select_alternating(ex, R);
        for (auto& e : sel) {
            detail::refine_extremum(err, e, opt.refine_steps);
            maxabs = std::max(maxabs, std::fabs(e.e));
        }
        if (opt.on_iteration) {
            long double lo_e = sel.empty() ? 0 : std::fabs(sel[0].e);
            for (const auto& e : sel)
                lo_e = std::min(lo_e, std::fabs(e.e));
            opt.on_iteration(iter, static_cast<double>(maxabs),
                             static_cast<double>((maxabs - lo_e) / maxabs), sel.size());
        }
        profile.clear();
        for (const auto& e : sel)
            profile.push_back(static_cast<double>(e.e));
        if (sel.size() < R) {
            std::ostringstream os;
            os << "remez: only " << sel.size() << " alternating extrema, need " << R
               << " (degree " << degree << ", iteration " << iter << ")";
            throw RemezError(os.str(), profile);
        }
        long double emax = 0, emin = std::fabs(sel[0].e);
        for (const auto& e : sel) {
            emax = std::max(emax, std::fabs(e.e));
            emin = std::min(emin, std::fabs(e.e));
        }
        if ((emax - emin) / emax < opt.tolerance) {
            converged = levelled = true;
            break;
        }
        for (std::size_t i = 0; i < R; ++i)
            ref[i] = sel[i].x;
    }
    if (!converged) {
        std::ostringstream os;
        os << "remez: no convergence after " << opt.max_iterations << " iterations (degree "
           << degree << ")";
        throw RemezError(os.str(), profile);
    }

    for (int k = 0; k <= degree; ++k)
        out.coeffs[static_cast<std::size_t>(k)] =
            parity_admits(parity, k) ? static_cast<double>(full[static_cast<std::size_t>(k)]) : 0.0;
    // left empty when the fit stopped at the rounding floor, where no levelled reference exists
    if (levelled)
        out.reference.assign(ref.begin(), ref.end());
    out.achieved_error = measure_max_error(out, f, opt);
    return out;
}

/// Recomputes the grid error and compares it with the stored value.
template <class F>
bool validate_minimax(const MinimaxPoly& p, const F& f, const RemezOptions& opt = {},
                      double rel_tol = 1e-12) {
    p.check_invariants();
    const double e = measure_max_error(p, f, opt);
    return std::fabs(e - p.achieved_error) <= rel_tol * std::max(e, p.achieved_error);
}

} // namespace heresnet::approx
