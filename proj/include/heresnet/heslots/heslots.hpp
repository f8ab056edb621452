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
#include <cstdint>
#include <ostream>
#include <random>
#include <sstream>
#include <string>
#include <utility>
#include <vector>

#include "heresnet/common/errors.hpp"

namespace heresnet::heslots {

enum class Fidelity { exact, quantized };

inline const char* to_string(Fidelity f) noexcept { return f == Fidelity::exact ? "exact" : "quantized"; }

inline Fidelity parse_fidelity(const std::string& s) {
    if (s == "exact") return Fidelity::exact;
    if (s == "quantized") return Fidelity::quantized;
    throw DomainError("unknown fidelity mode '" + s + "'");
}

inline bool is_pow2(std::size_t v) noexcept { return v != 0 && (v & (v - 1)) == 0; }

struct SimConfig {
    std::size_t n_slots = std::size_t{1} << 15;
    std::size_t sparse_block = std::size_t{1} << 10;
    int scale_exp = 50;
    int L_eval = 11;
    int L_boot = 18;
    Fidelity fidelity = Fidelity::exact;
    int quantize_bits = 30;
    int bootstrap_noise_bits = 19;
    /// Seed of the bootstrap noise generator (quantized mode only).
    std::uint64_t seed = 0;

    void validate() const {
        if (!is_pow2(n_slots) || !is_pow2(sparse_block))
            throw DomainError("n_slots and sparse_block must be powers of two");
        if (sparse_block > n_slots)
            throw DomainError("sparse_block must divide n_slots");
        if (L_eval < 1)
            throw DomainError("L_eval must be at least 1");
        if (L_boot < 0)
            throw DomainError("L_boot must be non-negative");
        if (quantize_bits >= scale_exp || quantize_bits < 1)
            throw DomainError("quantize_bits must lie in [1, scale_exp)");
        if (bootstrap_noise_bits < 1 || bootstrap_noise_bits > 60)
            throw DomainError("bootstrap_noise_bits must lie in [1, 60]");
    }
};

struct EvalCounter {
    std::uint64_t mults_cipher = 0;
    std::uint64_t mults_plain = 0;
    std::uint64_t rotations = 0;
    std::uint64_t conjugations = 0;
    std::uint64_t rescalings = 0;
    std::uint64_t relinearizations = 0;
    /// Relinearizations avoided by summing degree-2 ciphertexts before relinearizing.
    std::uint64_t relinearizations_deferred = 0;
    std::uint64_t bootstraps = 0;

    EvalCounter& operator+=(const EvalCounter& o) {
        mults_cipher += o.mults_cipher;
        mults_plain += o.mults_plain;
        rotations += o.rotations;
        conjugations += o.conjugations;
        rescalings += o.rescalings;
        relinearizations += o.relinearizations;
        relinearizations_deferred += o.relinearizations_deferred;
        bootstraps += o.bootstraps;
        return *this;
    }
    friend EvalCounter operator-(EvalCounter a, const EvalCounter& b) {
        a.mults_cipher -= b.mults_cipher;
        a.mults_plain -= b.mults_plain;
        a.rotations -= b.rotations;
        a.conjugations -= b.conjugations;
        a.rescalings -= b.rescalings;
        a.relinearizations -= b.relinearizations;
        a.relinearizations_deferred -= b.relinearizations_deferred;
        a.bootstraps -= b.bootstraps;
        return a;
    }
    friend bool operator==(const EvalCounter&, const EvalCounter&) = default;
};

/// Simulated ciphertext. Only the sparse block is stored; slot i of the full vector is
/// block[i mod sparse_block], so replication holds by construction.
class CipherVec {
public:
    CipherVec() = default;

    const std::vector<double>& slots() const noexcept { return slots_; }
    double operator[](std::size_t i) const { return slots_[i % slots_.size()]; }
    std::size_t block() const noexcept { return slots_.size(); }
    std::size_t n_slots() const noexcept { return n_slots_; }
    int level() const noexcept { return level_; }
    int scale_exp() const noexcept { return scale_exp_; }
    bool rescale_pending() const noexcept { return rescale_pending_; }
    bool relin_pending() const noexcept { return relin_pending_; }
    const std::string& tag() const noexcept { return tag_; }
    void set_tag(std::string t) { tag_ = std::move(t); }

    /// Full replicated slot vector.
    std::vector<double> expand() const {
        std::vector<double> out(n_slots_);
        for (std::size_t i = 0; i < n_slots_; ++i)
            out[i] = slots_[i % slots_.size()];
        return out;
    }

    double max_abs() const {
        double m = 0.0;
        for (double v : slots_)
            m = std::max(m, std::fabs(v));
        return m;
    }

private:
    friend class Evaluator;
    std::vector<double> slots_;
    std::size_t n_slots_ = 0;
    int level_ = 0;
    int scale_exp_ = 0;
    bool rescale_pending_ = false;
    bool relin_pending_ = false;
    std::string tag_;
};

/// Evaluation context: applies CKKS level/scale rules and owns the counters, warnings and trace.
/// A context is used by one thread at a time; fork() gives per-channel children that merge()
/// folds back in a fixed order.
class Evaluator {
public:
    explicit Evaluator(SimConfig cfg = {}) : cfg_(std::move(cfg)), rng_(cfg_.seed) { cfg_.validate(); }

    const SimConfig& config() const noexcept { return cfg_; }
    const EvalCounter& counters() const noexcept { return counters_; }
    const std::vector<std::string>& warnings() const noexcept { return warnings_; }
    void warn(std::string w) { warnings_.push_back(std::move(w)); }

    /// Sink for one line per operation; nullptr disables tracing.
    void set_trace(std::ostream* os) { trace_ = os; }
    bool tracing() const noexcept { return trace_ != nullptr || buffer_trace_; }
    const std::string& trace_buffer() const noexcept { return trace_buf_; }

    /// Name of the layer currently executing, used in error messages and trace lines.
    const std::string& scope() const noexcept { return scope_; }
    void set_scope(std::string s) { scope_ = std::move(s); }

    /// Encodes a block (or a full vector whose length is a multiple of the block) at `level`.
    CipherVec encrypt(const std::vector<double>& values, int level, std::string tag = {}) const {
        const std::size_t b = cfg_.sparse_block;
        if (values.empty() || (values.size() != b && values.size() % b != 0))
            throw StructuralError("encrypt: value count must equal or be a multiple of the sparse block");
        if (level < 0 || level > cfg_.L_eval)
            throw StructuralError("encrypt: level out of range");
        CipherVec c;
        c.slots_.assign(values.begin(), values.begin() + static_cast<std::ptrdiff_t>(b));
        c.n_slots_ = cfg_.n_slots;
        c.level_ = level;
        c.scale_exp_ = cfg_.scale_exp;
        c.tag_ = std::move(tag);
        return c;
    }
    CipherVec encrypt(const std::vector<double>& values, std::string tag = {}) const {
        return encrypt(values, cfg_.L_eval, std::move(tag));
    }

    /// Slot block after resolving pending rescales.
    std::vector<double> decrypt(CipherVec a) {
        resolve(a);
        return a.slots_;
    }

    /// Performs any deferred rescale and relinearization.
    void resolve(CipherVec& a) {
        relinearize(a);
        if (a.rescale_pending_) {
            a.rescale_pending_ = false;
            a.scale_exp_ -= cfg_.scale_exp;
            ++counters_.rescalings;
            if (cfg_.fidelity == Fidelity::quantized) {
                const double q = std::ldexp(1.0, cfg_.quantize_bits);
                for (auto& v : a.slots_)
                    v = std::nearbyint(v * q) / q;
            }
        }
    }

    CipherVec add(CipherVec a, CipherVec b) {
        align(a, b, "add");
        const int lb = a.level_;
        for (std::size_t i = 0; i < a.slots_.size(); ++i)
            a.slots_[i] += b.slots_[i];
        merge_pending(a, b);
        trace("add", a, lb);
        return a;
    }

    CipherVec sub(CipherVec a, CipherVec b) {
        align(a, b, "sub");
        const int lb = a.level_;
        for (std::size_t i = 0; i < a.slots_.size(); ++i)
            a.slots_[i] -= b.slots_[i];
        merge_pending(a, b);
        trace("sub", a, lb);
        return a;
    }

    CipherVec negate(CipherVec a) {
        for (auto& v : a.slots_)
            v = -v;
        trace("negate", a, a.level_);
        return a;
    }

    CipherVec mul(CipherVec a, CipherVec b) {
        resolve(a);
        resolve(b);
        same_block(a, b, "mul");
        if (a.level_ != b.level_)
            throw StructuralError(where("mul") + ": level mismatch " + std::to_string(a.level_) + " vs " +
                                  std::to_string(b.level_));
        need_level(a, 1, "mul");
        const int lb = a.level_;
        for (std::size_t i = 0; i < a.slots_.size(); ++i)
            a.slots_[i] *= b.slots_[i];
        ++counters_.mults_cipher;
        a.scale_exp_ += b.scale_exp_;
        a.level_ -= 1;
        a.rescale_pending_ = true;
        a.relin_pending_ = true;
        trace("mul", a, lb);
        return a;
    }

    CipherVec square(const CipherVec& a) { return mul(a, a); }

    /// Plaintext product with a block-length vector; consumes one level.
    CipherVec mul_plain(CipherVec a, const std::vector<double>& m) {
        resolve_rescale(a);
        if (m.size() != a.slots_.size())
            throw StructuralError(where("mul_plain") + ": plaintext length must equal the sparse block");
        need_level(a, 1, "mul_plain");
        const int lb = a.level_;
        for (std::size_t i = 0; i < a.slots_.size(); ++i)
            a.slots_[i] *= m[i];
        finish_plain_mul(a, lb);
        return a;
    }

    /// Scalar plaintext product; consumes one level.
    CipherVec mul_plain(CipherVec a, double s) {
        resolve_rescale(a);
        need_level(a, 1, "mul_plain");
        const int lb = a.level_;
        for (auto& v : a.slots_)
            v *= s;
        finish_plain_mul(a, lb);
        return a;
    }

    /// Integer product; needs no rescale, so no level is consumed.
    CipherVec mul_int(CipherVec a, long long k) {
        const double s = static_cast<double>(k);
        for (auto& v : a.slots_)
            v *= s;
        trace("mul_int", a, a.level_);
        return a;
    }

    CipherVec add_plain(CipherVec a, const std::vector<double>& m) {
        if (m.size() != a.slots_.size())
            throw StructuralError(where("add_plain") + ": plaintext length must equal the sparse block");
        for (std::size_t i = 0; i < a.slots_.size(); ++i)
            a.slots_[i] += m[i];
        trace("add_plain", a, a.level_);
        return a;
    }

    CipherVec add_plain(CipherVec a, double s) {
        for (auto& v : a.slots_)
            v += s;
        trace("add_plain", a, a.level_);
        return a;
    }

    /// 0/1 mask; a plaintext product, so one level.
    CipherVec mask(CipherVec a, const std::vector<double>& m) {
        for (double v : m)
            if (v != 0.0 && v != 1.0)
                throw DomainError(where("mask") + ": mask entries must be 0 or 1");
        return mul_plain(std::move(a), m);
    }

    /// Cyclic left shift within the sparse block: out[i] = a[i + step].
    CipherVec rotate(CipherVec a, long long step) {
        const auto b = static_cast<long long>(a.slots_.size());
        const long long s = ((step % b) + b) % b;
        if (s == 0)
            return a;
        relinearize(a);
        std::rotate(a.slots_.begin(), a.slots_.begin() + s, a.slots_.end());
        ++counters_.rotations;
        trace("rotate", a, a.level_);
        return a;
    }

    /// Complex conjugation; the identity on real slot data.
    CipherVec conjugate(CipherVec a) {
        relinearize(a);
        ++counters_.conjugations;
        trace("conjugate", a, a.level_);
        return a;
    }

    /// Drops to a lower level without rescaling; free.
    CipherVec level_down(CipherVec a, int target) {
        if (target > a.level_)
            throw StructuralError(where("level_down") + ": target level above current level");
        if (target < 0)
            throw LevelUnderflow(where("level_down") + tag_suffix(a), a.level_, 0);
        const int lb = a.level_;
        a.level_ = target;
        if (lb != target)
            trace("level_down", a, lb);
        return a;
    }

    /// Refresh to L_eval. `bound` is the magnitude the caller guarantees; the transform folds the
    /// 1/bound and bound scalings in, so slots need only satisfy |x| <= bound.
    CipherVec bootstrap(CipherVec a, double bound = 1.0) {
        if (!(bound > 0.0))
            throw DomainError(where("bootstrap") + ": bound must be positive");
        resolve(a);
        if (a.level_ < 0)
            throw LevelUnderflow(where("bootstrap") + tag_suffix(a), a.level_, 0);
        const int lb = a.level_;
        const double ratio = a.max_abs() / bound;
        if (ratio > 1.0 + std::ldexp(1.0, -6)) {
            std::ostringstream os;
            os.precision(6);
            os << "bootstrap-range: " << (scope_.empty() ? std::string("?") : scope_) << tag_suffix(a)
               << " max|x|/B = " << ratio;
            warnings_.push_back(os.str());
        }
        if (cfg_.fidelity == Fidelity::quantized) {
            const double amp = std::ldexp(bound, -cfg_.bootstrap_noise_bits);
            for (auto& v : a.slots_)
                v += amp * uniform_pm1();
        }
        a.level_ = cfg_.L_eval;
        ++counters_.bootstraps;
        trace("bootstrap", a, lb);
        return a;
    }

    /// Child context for independent work (one channel). Its generator is derived from this
    /// context's seed and the fork index, so results do not depend on scheduling.
    Evaluator fork() {
        SimConfig c = cfg_;
        c.seed = splitmix(cfg_.seed ^ splitmix(++forks_));
        Evaluator child(c);
        child.scope_ = scope_;
        child.buffer_trace_ = tracing();
        return child;
    }

    /// Folds a child's counters, warnings and trace into this context.
    void merge(const Evaluator& child) {
        counters_ += child.counters_;
        warnings_.insert(warnings_.end(), child.warnings_.begin(), child.warnings_.end());
        if (!child.trace_buf_.empty())
            emit(child.trace_buf_);
    }

private:
    std::string where(const char* op) const {
        return scope_.empty() ? std::string(op) : scope_ + "/" + op;
    }
    static std::string tag_suffix(const CipherVec& a) { return a.tag_.empty() ? std::string() : " [" + a.tag_ + "]"; }

    void need_level(const CipherVec& a, int need, const char* op) const {
        if (a.level_ < need)
            throw LevelUnderflow(where(op) + tag_suffix(a), a.level_, need);
    }

    static void same_block(const CipherVec& a, const CipherVec& b, const char* op) {
        if (a.slots_.size() != b.slots_.size() || a.slots_.empty())
            throw StructuralError(std::string(op) + ": sparse block mismatch");
    }

    void align(CipherVec& a, CipherVec& b, const char* op) {
        same_block(a, b, op);
        if (a.level_ != b.level_)
            throw StructuralError(where(op) + ": level mismatch " + std::to_string(a.level_) + " vs " +
                                  std::to_string(b.level_));
        if (a.rescale_pending_ != b.rescale_pending_) {
            resolve_rescale(a);
            resolve_rescale(b);
        }
        if (a.scale_exp_ != b.scale_exp_)
            throw StructuralError(where(op) + ": scale mismatch 2^" + std::to_string(a.scale_exp_) +
                                  " vs 2^" + std::to_string(b.scale_exp_));
    }

    void merge_pending(CipherVec& a, const CipherVec& b) {
        if (a.relin_pending_ && b.relin_pending_)
            ++counters_.relinearizations_deferred;
        a.relin_pending_ = a.relin_pending_ || b.relin_pending_;
    }

    void relinearize(CipherVec& a) {
        if (a.relin_pending_) {
            a.relin_pending_ = false;
            ++counters_.relinearizations;
        }
    }

    void resolve_rescale(CipherVec& a) {
        if (a.rescale_pending_) {
            const bool relin = a.relin_pending_;
            a.relin_pending_ = false;
            resolve(a);
            a.relin_pending_ = relin;
        }
    }

    void finish_plain_mul(CipherVec& a, int level_before) {
        ++counters_.mults_plain;
        a.scale_exp_ += cfg_.scale_exp;
        a.level_ -= 1;
        a.rescale_pending_ = true;
        trace("mul_plain", a, level_before);
    }

    double uniform_pm1() {
        const double u = static_cast<double>(rng_() >> 11) * 0x1.0p-53;
        return 2.0 * u - 1.0;
    }

    static std::uint64_t splitmix(std::uint64_t x) {
        x += 0x9e3779b97f4a7c15ULL;
        x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
        x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
        return x ^ (x >> 31);
    }

    void trace(const char* op, const CipherVec& a, int level_before) {
        if (!tracing())
            return;
        std::ostringstream os;
        os << op << " scope=" << (scope_.empty() ? "-" : scope_) << " tag=" << (a.tag_.empty() ? "-" : a.tag_)
           << " level=" << level_before << "->" << a.level_ << " scale=2^" << a.scale_exp_
           << (a.rescale_pending_ ? " pending" : "") << '\n';
        emit(os.str());
    }

    void emit(const std::string& s) {
        if (buffer_trace_)
            trace_buf_ += s;
        else if (trace_)
            *trace_ << s;
    }

    SimConfig cfg_;
    EvalCounter counters_;
    std::vector<std::string> warnings_;
    std::mt19937_64 rng_;
    std::uint64_t forks_ = 0;
    std::ostream* trace_ = nullptr;
    bool buffer_trace_ = false;
    std::string trace_buf_;
    std::string scope_;
};

/// Sets the evaluator scope for the lifetime of the guard.
class ScopeGuard {
public:
    ScopeGuard(Evaluator& ev, std::string name) : ev_(ev), saved_(ev.scope()) { ev_.set_scope(std::move(name)); }
    ~ScopeGuard() { ev_.set_scope(saved_); }
    ScopeGuard(const ScopeGuard&) = delete;
    ScopeGuard& operator=(const ScopeGuard&) = delete;

private:
    Evaluator& ev_;
    std::string saved_;
};

} // namespace heresnet::heslots
