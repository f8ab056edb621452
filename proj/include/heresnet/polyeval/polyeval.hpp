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
#include <map>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "heresnet/approx/chebyshev.hpp"
#include "heresnet/common/errors.hpp"
#include "heresnet/heslots/heslots.hpp"

namespace heresnet::polyeval {

using approx::MinimaxPoly;
using approx::Parity;
using heslots::CipherVec;
using heslots::Evaluator;

/// Smallest j with 2^j >= n (0 for n <= 1).
inline int clog2(long long n) {
    int j = 0;
    while ((1LL << j) < n)
        ++j;
    return j;
}

/// Baby-step count: ceil(sqrt(d + 1)) rounded up to a power of two.
inline int baby_step_count(int degree) {
    const auto r = static_cast<long long>(std::ceil(std::sqrt(static_cast<double>(degree) + 1.0)));
    return 1 << clog2(r);
}

struct EvalPlan {
    int degree = 0;
    Parity parity = Parity::none;
    int baby_steps = 0;
    /// Distinct T_{k 2^j} (j >= 0) used as split points.
    int giant_steps = 0;
    /// Levels consumed, including the affine map onto [-1, 1] when the hull is not [-1, 1].
    int depth = 0;
    /// Depth of plain baby-step giant-step where every leaf pays a full scalar-product level.
    int naive_depth = 0;
    /// Ciphertext-ciphertext multiplications.
    int mult_count = 0;
    /// Plaintext scalar multiplications (each consumes a level).
    int scalar_mults = 0;
    bool normalizes = false;
    /// Chebyshev indices materialised, ascending.
    std::vector<int> powers;

    std::string explain() const {
        std::ostringstream os;
        os << "degree " << degree << " parity " << approx::to_string(parity) << "\n"
           << "  baby steps k = " << baby_steps << ", giant steps " << giant_steps << "\n"
           << "  depth " << depth << " (naive " << naive_depth << ")" << (normalizes ? ", incl. input map" : "")
           << "\n"
           << "  ciphertext mults " << mult_count << ", scalar mults " << scalar_mults << "\n"
           << "  powers T_i built:";
        for (int p : powers)
            os << ' ' << p;
        os << '\n';
        return os.str();
    }
};

/// Affine map x -> a x + b taking the hull onto [-1, 1].
struct InputMap {
    double a = 1.0;
    double b = 0.0;
    bool identity() const { return a == 1.0 && b == 0.0; }
};

inline InputMap input_map(const MinimaxPoly& p) {
    const auto h = p.hull();
    if (h.lo == -1.0 && h.hi == 1.0)
        return {};
    if (!(h.lo < h.hi))
        throw DomainError("polynomial hull is degenerate");
    return {2.0 / (h.hi - h.lo), -(h.lo + h.hi) / (h.hi - h.lo)};
}

namespace detail {

/// Level-only stand-in for ciphertexts; counts what the real evaluator would do.
struct CountingBackend {
    struct Value {
        int level = 0;
    };
    int mults = 0;
    int scalars = 0;

    static int level(const Value& v) { return v.level; }
    Value mul(Value a, Value b) {
        if (a.level != b.level)
            throw StructuralError("polyeval plan: level mismatch");
        ++mults;
        return {a.level - 1};
    }
    Value mul_scalar(Value a, double) {
        ++scalars;
        return {a.level - 1};
    }
    Value mul_int(Value a, long long) { return a; }
    Value add(Value a, Value b) {
        if (a.level != b.level)
            throw StructuralError("polyeval plan: level mismatch");
        return a;
    }
    Value sub(Value a, Value b) { return add(a, b); }
    Value add_const(Value a, double) { return a; }
    Value level_down(Value a, int l) {
        if (l > a.level)
            throw StructuralError("polyeval plan: level_down above current level");
        return {l};
    }
};

/// Adapter over the simulator.
struct CipherBackend {
    using Value = CipherVec;
    Evaluator& ev;

    static int level(const Value& v) { return v.level(); }
    Value mul(const Value& a, const Value& b) { return ev.mul(a, b); }
    Value mul_scalar(const Value& a, double c) { return ev.mul_plain(a, c); }
    Value mul_int(const Value& a, long long k) { return ev.mul_int(a, k); }
    Value add(const Value& a, const Value& b) { return ev.add(a, b); }
    Value sub(const Value& a, const Value& b) { return ev.sub(a, b); }
    Value add_const(const Value& a, double c) { return ev.add_plain(a, c); }
    Value level_down(const Value& a, int l) { return ev.level_down(a, l); }
};

/// Chebyshev evaluation by recursive division p = q T_G + r with G a power of two.
///
/// eval(c, target) returns a value at exactly level `target`. A node is a leaf (linear
/// combination of baby powers, one scalar level) when its degree is at most k and every power
/// it needs sits at least one level above the target; otherwise it splits at the largest power
/// of two G <= degree. Splitting at 2^(h-1) for h = ceil(log2(D + 1)) always succeeds, so the
/// depth is ceil(log2(D + 1)).
template <class B>
class Engine {
public:
    using V = typename B::Value;

    Engine(B& backend, V t, int k) : b_(backend), k_(k), top_(B::level(t)) { pow_.emplace(1, std::move(t)); }

    V eval_exact(std::vector<double> c) {
        const int d = effective_degree(c);
        const int target = top_ - std::max(clog2(d + 1), 1);
        Node n = eval(std::move(c), target);
        if (n.is_const) {
            // constant result still has to come out as a ciphertext at the target level
            V z = b_.mul_scalar(b_.level_down(power(1), target + 1), 0.0);
            return b_.add_const(z, n.c);
        }
        return b_.level_down(*n.v, target);
    }

    /// Result level of textbook BSGS: leaves below k, splits at k 2^j, no level targeting.
    int naive_level(std::vector<double> c) { return naive(std::move(c)).level; }

    std::vector<int> powers() const {
        std::vector<int> out;
        for (const auto& [i, v] : pow_)
            out.push_back(i);
        return out;
    }
    int giant_steps() const { return static_cast<int>(giants_.size()); }

private:
    struct Node {
        bool is_const = true;
        double c = 0.0;
        std::optional<V> v;
    };

    static int effective_degree(const std::vector<double>& c) {
        int d = static_cast<int>(c.size()) - 1;
        while (d > 0 && c[static_cast<std::size_t>(d)] == 0.0)
            --d;
        return std::max(d, 0);
    }

    int power_level(int i) const { return top_ - clog2(i); }

    V aligned(const V& v, int l) { return B::level(v) == l ? v : b_.level_down(v, l); }

    const V& power(int i) {
        if (auto it = pow_.find(i); it != pow_.end())
            return it->second;
        V out{};
        if ((i & (i - 1)) == 0) {
            // T_2m = 2 T_m^2 - 1
            const V h = power(i / 2);
            out = b_.add_const(b_.mul_int(b_.mul(h, h), 2), -1.0);
        } else {
            // T_{a+b} = 2 T_a T_b - T_{a-b}, a the largest power of two below i
            const int a = 1 << (clog2(i) - 1);
            const int rest = i - a;
            const V ta = power(a);
            const V tb = power(rest);
            const int l = std::min(B::level(ta), B::level(tb));
            V prod = b_.mul_int(b_.mul(aligned(ta, l), aligned(tb, l)), 2);
            if (a == rest)
                prod = b_.add_const(prod, -1.0);
            else
                prod = b_.sub(prod, aligned(power(a - rest), B::level(prod)));
            out = prod;
        }
        return pow_.emplace(i, std::move(out)).first->second;
    }

    /// Splits c at G: returns (q, r) with p = q T_G + r.
    static std::pair<std::vector<double>, std::vector<double>> divide(const std::vector<double>& c, int d, int G) {
        std::vector<double> q(static_cast<std::size_t>(d - G) + 1, 0.0);
        std::vector<double> r(c.begin(), c.begin() + G);
        q[0] = c[static_cast<std::size_t>(G)];
        for (int j = 1; j <= d - G; ++j) {
            const double cj = c[static_cast<std::size_t>(G + j)];
            q[static_cast<std::size_t>(j)] = 2.0 * cj;
            r[static_cast<std::size_t>(G - j)] -= cj;
        }
        return {std::move(q), std::move(r)};
    }

    Node eval(std::vector<double> c, int target) {
        const int d = effective_degree(c);
        if (d == 0)
            return {true, c.empty() ? 0.0 : c[0], std::nullopt};
        if (d <= k_ && power_level(d) - 1 >= target) {
            std::optional<V> acc;
            for (int i = 1; i <= d; ++i) {
                const double ci = c[static_cast<std::size_t>(i)];
                if (ci == 0.0)
                    continue;
                V term = b_.mul_scalar(aligned(power(i), target + 1), ci);
                acc = acc ? b_.add(*acc, term) : term;
            }
            if (c[0] != 0.0)
                acc = b_.add_const(*acc, c[0]);
            return {false, 0.0, std::move(acc)};
        }
        const int G = 1 << (clog2(d + 1) - 1);
        if (G < 2 || power_level(G) < target + 1)
            throw StructuralError("polyeval: level target unreachable for degree " + std::to_string(d));
        if (G >= k_)
            giants_.push_back(G);
        std::sort(giants_.begin(), giants_.end());
        giants_.erase(std::unique(giants_.begin(), giants_.end()), giants_.end());
        auto [q, r] = divide(c, d, G);
        Node qn = eval(std::move(q), target + 1);
        Node rn = eval(std::move(r), target);
        const V tg = aligned(power(G), target + 1);
        std::optional<V> prod;
        if (qn.is_const) {
            if (qn.c != 0.0)
                prod = b_.mul_scalar(tg, qn.c);
        } else {
            prod = b_.mul(aligned(*qn.v, target + 1), tg);
        }
        if (!prod) {
            if (rn.is_const)
                return rn;
            return {false, 0.0, aligned(*rn.v, target)};
        }
        if (rn.is_const)
            return {false, 0.0, rn.c != 0.0 ? b_.add_const(*prod, rn.c) : *prod};
        return {false, 0.0, b_.add(*prod, aligned(*rn.v, target))};
    }

    // level bookkeeping for the textbook variant
    struct Lv {
        bool is_const;
        int level;
    };
    Lv naive(std::vector<double> c) {
        const int d = effective_degree(c);
        if (d == 0)
            return {true, 0};
        if (d < k_) {
            int l = 1 << 30;
            for (int i = 1; i <= d; ++i)
                if (c[static_cast<std::size_t>(i)] != 0.0)
                    l = std::min(l, power_level(i) - 1);
            return {false, l};
        }
        int G = k_;
        while (2 * G <= d)
            G *= 2;
        auto [q, r] = divide(c, d, G);
        const Lv ql = naive(std::move(q));
        const Lv rl = naive(std::move(r));
        const int prod = ql.is_const ? power_level(G) - 1 : std::min(ql.level, power_level(G)) - 1;
        return {false, rl.is_const ? prod : std::min(prod, rl.level)};
    }

    B& b_;
    int k_;
    int top_;
    std::map<int, V> pow_;
    std::vector<int> giants_;
};

inline std::vector<double> unit_coeffs(const MinimaxPoly& p, double out_scale) {
    std::vector<double> c = p.coeffs;
    for (auto& v : c)
        v *= out_scale;
    return c;
}

} // namespace detail

/// Plan for the actual coefficients of p (zero coefficients are skipped, as in execution).
inline EvalPlan plan(const MinimaxPoly& p, double out_scale = 1.0) {
    p.check_invariants();
    const auto map = input_map(p);
    const auto c = detail::unit_coeffs(p, out_scale);
    detail::CountingBackend cb;
    EvalPlan pl;
    pl.degree = p.degree;
    pl.parity = p.parity;
    pl.normalizes = !map.identity();
    pl.baby_steps = baby_step_count(std::max(p.degree, 1));
    const int top = 0;
    detail::CountingBackend::Value t{top};
    if (pl.normalizes)
        t = cb.mul_scalar(t, map.a);
    detail::Engine<detail::CountingBackend> eng(cb, t, pl.baby_steps);
    const auto out = eng.eval_exact(c);
    pl.depth = top - out.level;
    pl.mult_count = cb.mults;
    pl.scalar_mults = cb.scalars;
    pl.powers = eng.powers();
    pl.giant_steps = eng.giant_steps();
    detail::CountingBackend nb;
    detail::Engine<detail::CountingBackend> naive(nb, {pl.normalizes ? top - 1 : top}, pl.baby_steps);
    pl.naive_depth = top - naive.naive_level(c);
    return pl;
}

/// Plan for a generic polynomial of the given degree on [-1, 1]. Coefficients are fixed, nonzero and
/// chosen so that no quotient or remainder term cancels.
inline EvalPlan plan(int degree, Parity parity) {
    if (degree < 1)
        throw DomainError("plan needs degree >= 1");
    MinimaxPoly p;
    p.domain = approx::IntervalUnion({{-1.0, 1.0}});
    p.degree = degree;
    p.parity = parity;
    p.coeffs.assign(static_cast<std::size_t>(degree) + 1, 0.0);
    for (int k = 0; k <= degree; ++k)
        if (approx::parity_admits(parity, k))
            p.coeffs[static_cast<std::size_t>(k)] = 1.0 + std::sin(0.7 * k + 0.3) / 3.0;
    return plan(p);
}

/// Evaluates out_scale * p(x) slot-wise. The result sits exactly plan(p).depth levels below x.
inline CipherVec bsgs_eval(Evaluator& ev, const MinimaxPoly& p, const CipherVec& x, double out_scale = 1.0) {
    const EvalPlan pl = plan(p, out_scale);
    if (x.level() < pl.depth)
        throw LevelUnderflow((ev.scope().empty() ? std::string("polyeval") : ev.scope()) + " (degree " +
                                 std::to_string(p.degree) + " polynomial)",
                             x.level(), pl.depth);
    const auto map = input_map(p);
    CipherVec t = x;
    if (!map.identity()) {
        t = ev.mul_plain(t, map.a);
        if (map.b != 0.0)
            t = ev.add_plain(t, map.b);
    }
    detail::CipherBackend cb{ev};
    detail::Engine<detail::CipherBackend> eng(cb, t, pl.baby_steps);
    CipherVec out = eng.eval_exact(detail::unit_coeffs(p, out_scale));
    return ev.level_down(out, x.level() - pl.depth);
}

} // namespace heresnet::polyeval
