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
#include <exception>
#include <sstream>
#include <string>
#include <thread>
#include <vector>

#include "heresnet/common/errors.hpp"
#include "heresnet/heslots/heslots.hpp"
#include "heresnet/polyeval/polyeval.hpp"
#include "heresnet/resnet/activations.hpp"
#include "heresnet/resnet/layout.hpp"
#include "heresnet/resnet/weights.hpp"

namespace heresnet::resnet {

using heslots::CipherVec;
using heslots::Evaluator;

struct BootstrapPlacement {
    std::string layer;
    std::string tag;
    int level_before = 0;
    double bound = 0.0;
};

/// Bootstraps x when it holds fewer than `need` levels and records where.
inline CipherVec ensure_level(Evaluator& ev, CipherVec x, int need, double bound,
                              std::vector<BootstrapPlacement>* log = nullptr) {
    if (x.level() >= need)
        return x;
    if (log)
        log->push_back({ev.scope(), x.tag(), x.level(), bound});
    return ev.bootstrap(std::move(x), bound);
}

namespace detail {

inline std::string scope_of(const Evaluator& ev, const char* fallback) {
    return ev.scope().empty() ? std::string(fallback) : ev.scope();
}

/// Runs body(child, o) for o in [0, count) on per-channel child contexts, then merges the
/// children in index order. Children are forked up front, so results do not depend on threads.
template <class F>
void per_channel(Evaluator& ev, int count, int threads, F&& body) {
    std::vector<Evaluator> kids;
    kids.reserve(static_cast<std::size_t>(count));
    for (int o = 0; o < count; ++o)
        kids.push_back(ev.fork());
    const int t = std::clamp(threads, 1, std::max(count, 1));
    if (t == 1) {
        for (int o = 0; o < count; ++o)
            body(kids[static_cast<std::size_t>(o)], o);
    } else {
        std::vector<std::exception_ptr> errs(static_cast<std::size_t>(count));
        std::vector<std::thread> pool;
        for (int w = 0; w < t; ++w)
            pool.emplace_back([&, w] {
                for (int o = w; o < count; o += t) {
                    try {
                        body(kids[static_cast<std::size_t>(o)], o);
                    } catch (...) {
                        errs[static_cast<std::size_t>(o)] = std::current_exception();
                    }
                }
            });
        for (auto& th : pool)
            th.join();
        for (auto& e : errs)
            if (e)
                std::rethrow_exception(e);
    }
    for (const auto& k : kids)
        ev.merge(k);
}

inline const std::vector<double>& mask10() {
    static const std::vector<double> m = [] {
        std::vector<double> v(kBlock, 0.0);
        std::fill(v.begin(), v.begin() + 10, 1.0);
        return v;
    }();
    return m;
}

} // namespace detail

// ---------------------------------------------------------------------------------------------
// Convolution

/// Packed single-input single-output convolution with zero padding k / 2.
///
/// Each input channel is rotated once per tap (k^2 - 1 rotations, shared by all outputs). Output
/// o accumulates mul_plain(rot_t(x_i), w[o][i][t] * mask_t) over channels and taps, where mask_t
/// clears wrapped-around border slots and, for stride 2, the slots the output layout drops. The
/// result therefore sits one level below the input and stride 2 needs no extra rotation.
inline std::vector<CipherVec> conv_siso(Evaluator& ev, const std::vector<CipherVec>& in, const ConvWeights& w,
                                        const Layout& in_layout, int stride, int threads = 1,
                                        const std::string& name = "conv") {
    if (static_cast<int>(in.size()) != w.in_ch)
        throw StructuralError(detail::scope_of(ev, "conv") + ": expected " + std::to_string(w.in_ch) +
                              " input channels, got " + std::to_string(in.size()));
    if (w.k % 2 != 1 || w.w.size() != static_cast<std::size_t>(w.out_ch * w.in_ch * w.k * w.k))
        throw StructuralError(detail::scope_of(ev, "conv") + ": filter must be odd-sized and complete");
    (void)in_layout.after_stride(stride); // rejects unsupported strides
    for (const auto& x : in) {
        if (x.block() != kBlock)
            throw StructuralError(detail::scope_of(ev, "conv") + ": sparse block must be 1024 slots");
        if (x.level() < 1)
            throw LevelUnderflow(detail::scope_of(ev, "conv") + (x.tag().empty() ? "" : " [" + x.tag() + "]"),
                                 x.level(), 1);
        if (x.level() != in.front().level())
            throw StructuralError(detail::scope_of(ev, "conv") + ": input channels at different levels");
    }
    const int r = w.k / 2;
    struct Tap {
        int ky, kx;
        std::vector<double> mask;
    };
    std::vector<Tap> taps;
    for (int ky = 0; ky < w.k; ++ky)
        for (int kx = 0; kx < w.k; ++kx)
            taps.push_back({ky, kx, tap_mask(in_layout, stride, ky - r, kx - r)});

    // Hoisted rotations, counted once on the parent context.
    std::vector<std::vector<CipherVec>> rot(in.size());
    for (std::size_t i = 0; i < in.size(); ++i)
        for (const auto& t : taps)
            rot[i].push_back(ev.rotate(in[i], in_layout.offset(t.ky - r, t.kx - r)));

    std::vector<CipherVec> out(static_cast<std::size_t>(w.out_ch));
    detail::per_channel(ev, w.out_ch, threads, [&](Evaluator& child, int o) {
        std::vector<double> pt(kBlock);
        CipherVec acc;
        bool first = true;
        for (int i = 0; i < w.in_ch; ++i)
            for (std::size_t t = 0; t < taps.size(); ++t) {
                const double c = w.at(o, i, taps[t].ky, taps[t].kx);
                for (std::size_t s = 0; s < kBlock; ++s)
                    pt[s] = c * taps[t].mask[s];
                CipherVec term = child.mul_plain(rot[static_cast<std::size_t>(i)][t], pt);
                acc = first ? std::move(term) : child.add(std::move(acc), std::move(term));
                first = false;
            }
        acc.set_tag(name + ".c" + std::to_string(o));
        out[static_cast<std::size_t>(o)] = std::move(acc);
    });
    return out;
}

// ---------------------------------------------------------------------------------------------
// Batch norm

/// scale * x + shift on the valid slots; invalid slots stay zero. One level.
inline CipherVec batch_norm(Evaluator& ev, const CipherVec& x, double scale, double shift, const Layout& layout) {
    CipherVec y = ev.mul_plain(x, scale);
    if (shift != 0.0) {
        auto m = layout.valid_mask();
        for (auto& v : m)
            v *= shift;
        y = ev.add_plain(std::move(y), m);
    }
    return y;
}

// ---------------------------------------------------------------------------------------------
// ReLU

inline void check_range(Evaluator& ev, const CipherVec& x, double bound, const char* what) {
    const double m = x.max_abs();
    if (m > bound) {
        std::ostringstream os;
        os.precision(6);
        os << what << ": " << detail::scope_of(ev, "?") << (x.tag().empty() ? "" : " [" + x.tag() + "]")
           << " max|x|/B = " << m / bound;
        ev.warn(os.str());
    }
}

/// x (1 + g(x / B)) / 2 with g the composite sign. Stages before ra.split run first, then a
/// bootstrap (bound 1), the remaining stages, the product with x and a final bootstrap (bound
/// B). Exactly two bootstraps per call; the output is at the top level.
inline CipherVec relu_layer(Evaluator& ev, const CipherVec& x, const ReluApprox& ra, double B) {
    if (!(B > 0.0))
        throw DomainError("relu bound must be positive");
    const int need = ra.prefix_levels();
    if (x.level() < need)
        throw LevelUnderflow(detail::scope_of(ev, "relu") + (x.tag().empty() ? "" : " [" + x.tag() + "]"),
                             x.level(), need);
    if (ra.tail_levels() > ev.config().L_eval)
        throw LevelUnderflow(detail::scope_of(ev, "relu") + " (after middle bootstrap)", ev.config().L_eval,
                             ra.tail_levels());
    check_range(ev, x, B, "relu-range");
    CipherVec u = ev.mul_plain(x, 1.0 / B);
    for (int i = 0; i < ra.split; ++i)
        u = polyeval::bsgs_eval(ev, ra.stages[static_cast<std::size_t>(i)], u,
                                ra.out_scale[static_cast<std::size_t>(i)]);
    u = ev.bootstrap(std::move(u), 1.0);
    for (std::size_t i = static_cast<std::size_t>(ra.split); i < ra.stages.size(); ++i)
        u = polyeval::bsgs_eval(ev, ra.stages[i], u, ra.out_scale[i]);
    CipherVec h = ev.add_plain(std::move(u), 0.5);
    CipherVec y = ev.mul(ev.level_down(x, h.level()), std::move(h));
    y = ev.bootstrap(std::move(y), B);
    y.set_tag(x.tag());
    return y;
}

/// Diagnostic: max(x, 0) computed on decrypted slots. Keeps the level requirement and the two
/// bootstraps of relu_layer so level planning and counters match the approximate path.
inline CipherVec relu_exact(Evaluator& ev, const CipherVec& x, const ReluApprox& ra, double B) {
    const int need = ra.prefix_levels();
    if (x.level() < need)
        throw LevelUnderflow(detail::scope_of(ev, "relu") + (x.tag().empty() ? "" : " [" + x.tag() + "]"),
                             x.level(), need);
    check_range(ev, x, B, "relu-range");
    auto v = ev.decrypt(x);
    for (auto& s : v)
        s = std::max(s, 0.0);
    CipherVec y = ev.encrypt(v, 0, x.tag());
    y = ev.bootstrap(std::move(y), B);
    y = ev.bootstrap(ev.level_down(std::move(y), 0), B);
    return y;
}

// ---------------------------------------------------------------------------------------------
// Average pooling and the fully connected layer

/// Mean over the size x size valid positions, left in slot 0 (other slots zero). The sum takes
/// log2(size) rotations along rows and as many along columns; the 1/size^2 factor and the slot-0
/// mask are one plaintext product.
inline CipherVec avg_pool(Evaluator& ev, const CipherVec& x, const Layout& layout) {
    const int n = layout.size;
    if (n < 1 || (n & (n - 1)) != 0)
        throw StructuralError(detail::scope_of(ev, "avgpool") + ": pooled size must be a power of two");
    if (x.block() != kBlock)
        throw StructuralError(detail::scope_of(ev, "avgpool") + ": sparse block must be 1024 slots");
    if (x.level() < 1)
        throw LevelUnderflow(detail::scope_of(ev, "avgpool"), x.level(), 1);
    CipherVec t = x;
    for (int s = 1; s < n; s *= 2)
        t = ev.add(t, ev.rotate(t, layout.offset(0, s)));
    for (int s = 1; s < n; s *= 2)
        t = ev.add(t, ev.rotate(t, layout.offset(s, 0)));
    std::vector<double> m(kBlock, 0.0);
    m[0] = 1.0 / (static_cast<double>(n) * n);
    t = ev.mul_plain(std::move(t), m);
    t.set_tag(x.tag());
    return t;
}

inline std::vector<CipherVec> avg_pool(Evaluator& ev, const std::vector<CipherVec>& xs, const Layout& layout) {
    std::vector<CipherVec> out;
    for (const auto& x : xs)
        out.push_back(avg_pool(ev, x, layout));
    return out;
}

/// Logit j = sum_c W[j][c] pooled_c + b_j in slot j. Inputs hold their value in slot 0 only and
/// stay separate ciphertexts; each logit is a scalar-weighted sum rotated into place.
inline CipherVec fully_connected(Evaluator& ev, const std::vector<CipherVec>& pooled, const std::vector<double>& W,
                                 const std::vector<double>& b) {
    const std::size_t in = pooled.size();
    if (in == 0 || b.empty() || W.size() != b.size() * in)
        throw StructuralError(detail::scope_of(ev, "fc") + ": weight matrix does not match " +
                              std::to_string(b.size()) + " x " + std::to_string(in));
    if (b.size() > kBlock)
        throw StructuralError(detail::scope_of(ev, "fc") + ": too many outputs for one block");
    for (const auto& p : pooled)
        if (p.level() < 1)
            throw LevelUnderflow(detail::scope_of(ev, "fc"), p.level(), 1);
    CipherVec out;
    for (std::size_t j = 0; j < b.size(); ++j) {
        CipherVec z;
        for (std::size_t c = 0; c < in; ++c) {
            CipherVec t = ev.mul_plain(pooled[c], W[j * in + c]);
            z = c == 0 ? std::move(t) : ev.add(std::move(z), std::move(t));
        }
        z = ev.rotate(std::move(z), -static_cast<long long>(j));
        out = j == 0 ? std::move(z) : ev.add(std::move(out), std::move(z));
    }
    std::vector<double> bias(kBlock, 0.0);
    std::copy(b.begin(), b.end(), bias.begin());
    out = ev.add_plain(std::move(out), bias);
    out.set_tag("logits");
    return out;
}

// ---------------------------------------------------------------------------------------------
// Softmax

/// Tempered softmax of the logits in slots 0..9; other slots come out zero.
///
/// e^(x/4) = p(x/64)^16 with p the degree-12 least-squares exponential. The ten values are scaled
/// by params.scale() and summed into every logit slot with ten rotations; the inverse of the
/// scaled sum a is prod_i (1 + (1 - a)^(2^i)). Bootstraps are inserted whenever a value runs out
/// of levels, with the tightest bound known at that point.
inline CipherVec softmax(Evaluator& ev, const CipherVec& logits, const SoftmaxParams& params,
                         std::vector<BootstrapPlacement>* log = nullptr) {
    params.validate();
    const double B = params.bound;
    check_range(ev, logits, B, "softmax-range");
    const auto& ep = default_exp_poly();
    const int exp_depth = polyeval::plan(ep).depth;
    CipherVec x = ensure_level(ev, logits, exp_depth + 1, B, log);
    CipherVec e = polyeval::bsgs_eval(ev, ep, ev.mul_plain(x, 1.0 / 64.0));
    double bound = std::exp(B / 64.0);
    for (int k = 0; k < 4; ++k) {
        e = ensure_level(ev, std::move(e), 1, bound, log);
        e = ev.square(e);
        bound *= bound;
    }
    const double s = params.scale();
    e = ensure_level(ev, std::move(e), 1, bound, log);
    auto sm = detail::mask10();
    for (auto& v : sm)
        v *= s;
    CipherVec E = ev.mul_plain(std::move(e), sm);
    const double e_bound = s * bound;

    // E' repeats the ten values with period 10 over slots 0..19, so ten left shifts sum a full
    // period into each of slots 0..9.
    CipherVec Ep = ev.add(E, ev.rotate(E, -10));
    CipherVec S = Ep;
    for (int k = 1; k < 10; ++k)
        S = ev.add(std::move(S), ev.rotate(Ep, k));
    S = ensure_level(ev, std::move(S), 1, 10.0 * e_bound, log);
    CipherVec a = ev.mul_plain(std::move(S), detail::mask10());
    {
        const auto av = ev.decrypt(a);
        for (int j = 0; j < 10; ++j)
            if (!(av[static_cast<std::size_t>(j)] > 0.0 && av[static_cast<std::size_t>(j)] < 2.0)) {
                std::ostringstream os;
                os.precision(6);
                os << "softmax-inverse-domain: " << detail::scope_of(ev, "softmax") << " scaled sum "
                   << av[static_cast<std::size_t>(j)] << " outside (0, 2)";
                ev.warn(os.str());
                break;
            }
    }

    const int n = params.iterations();
    const double a_min = std::min(params.min_scaled_sum(), 0.5);
    CipherVec v = ev.add_plain(ev.negate(std::move(a)), detail::mask10()); // 1 - a
    CipherVec r = ev.add_plain(v, detail::mask10());                       // 1 + v
    for (int i = 1; i < n; ++i) {
        // Two levels: one for the square, one for the product with r.
        v = ensure_level(ev, std::move(v), 2, 1.0, log);
        v = ev.square(v);
        CipherVec f = ev.add_plain(v, detail::mask10());
        // Running product bound: prod_{k<i} (1 + (1 - a_min)^(2^k)) = (1 - (1 - a_min)^(2^i)) / a_min.
        const double r_bound = -std::expm1(std::ldexp(1.0, i) * std::log1p(-a_min)) / a_min;
        r = ensure_level(ev, std::move(r), 1, r_bound, log);
        const int lvl = std::min(r.level(), f.level());
        r = ev.mul(ev.level_down(std::move(r), lvl), ev.level_down(std::move(f), lvl));
    }
    const double r_bound = -std::expm1(std::ldexp(1.0, n) * std::log1p(-a_min)) / a_min;
    // The lower operand is refreshed first; the other only if it is still out of levels.
    for (int pass = 0; pass < 2 && std::min(r.level(), E.level()) < 1; ++pass) {
        if (r.level() <= E.level())
            r = ensure_level(ev, std::move(r), 1, r_bound, log);
        else
            E = ensure_level(ev, std::move(E), 1, e_bound, log);
    }
    const int l2 = std::min(r.level(), E.level());
    CipherVec p = ev.mul(ev.level_down(std::move(E), l2), ev.level_down(std::move(r), l2));
    p.set_tag("softmax");
    return p;
}

/// Diagnostic: exact tempered softmax on decrypted slots 0..9, at the input level.
inline CipherVec softmax_exact(Evaluator& ev, const CipherVec& logits, const SoftmaxParams& params) {
    check_range(ev, logits, params.bound, "softmax-range");
    auto v = ev.decrypt(logits);
    const auto p = tempered_softmax(std::vector<double>(v.begin(), v.begin() + 10));
    std::fill(v.begin(), v.end(), 0.0);
    std::copy(p.begin(), p.end(), v.begin());
    return ev.encrypt(v, logits.level(), "softmax");
}

} // namespace heresnet::resnet
