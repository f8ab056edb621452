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

#include <gtest/gtest.h>

#include <cmath>
#include <random>
#include <sstream>
#include <vector>

#include "heresnet/heslots/heslots.hpp"

using namespace heresnet;
using namespace heresnet::heslots;

namespace {

SimConfig small_config(Fidelity f = Fidelity::exact) {
    SimConfig c;
    c.fidelity = f;
    c.seed = 99;
    return c;
}

std::vector<double> random_block(std::mt19937_64& rng, std::size_t n = 1024, double lo = -1.0, double hi = 1.0) {
    std::uniform_real_distribution<double> u(lo, hi);
    std::vector<double> v(n);
    for (auto& x : v)
        x = u(rng);
    return v;
}

} // namespace

TEST(SimConfig, Validation) {
    SimConfig c;
    EXPECT_NO_THROW(c.validate());
    c.sparse_block = 1000;
    EXPECT_THROW(c.validate(), DomainError);
    c = SimConfig{};
    c.sparse_block = c.n_slots * 2;
    EXPECT_THROW(c.validate(), DomainError);
    c = SimConfig{};
    c.quantize_bits = 50;
    EXPECT_THROW(c.validate(), DomainError);
    c = SimConfig{};
    c.L_eval = 0;
    EXPECT_THROW(c.validate(), DomainError);
}

TEST(CipherVec, EncryptReplicatesBlock) {
    Evaluator ev(small_config());
    std::mt19937_64 rng(1);
    const auto v = random_block(rng);
    const auto c = ev.encrypt(v, "x");
    EXPECT_EQ(c.level(), 11);
    EXPECT_EQ(c.scale_exp(), 50);
    EXPECT_EQ(c.n_slots(), std::size_t{1} << 15);
    const auto full = c.expand();
    for (std::size_t i = 0; i < full.size(); ++i)
        ASSERT_EQ(full[i], v[i % 1024]);
    EXPECT_THROW(ev.encrypt(std::vector<double>(100, 0.0)), StructuralError);
    EXPECT_THROW(ev.encrypt(v, 12, ""), StructuralError);
}

TEST(Add, IdentitiesAndOracle) {
    Evaluator ev(small_config());
    std::mt19937_64 rng(2);
    const auto a = random_block(rng), b = random_block(rng);
    const auto ca = ev.encrypt(a), cb = ev.encrypt(b), zero = ev.encrypt(std::vector<double>(1024, 0.0));
    EXPECT_EQ(ev.decrypt(ev.add(ca, zero)), a);
    const auto diff = ev.decrypt(ev.add(ca, ev.mul_int(ca, -1)));
    for (double v : diff)
        EXPECT_EQ(v, 0.0);
    const auto s = ev.decrypt(ev.add(ca, cb));
    for (std::size_t i = 0; i < a.size(); ++i)
        EXPECT_EQ(s[i], a[i] + b[i]);
    EXPECT_EQ(ev.add(ca, cb).level(), 11);
}

TEST(Add, LevelAndScaleMismatchRejected) {
    Evaluator ev(small_config());
    const auto a = ev.encrypt(std::vector<double>(1024, 1.0), 11, "a");
    const auto b = ev.encrypt(std::vector<double>(1024, 1.0), 10, "b");
    EXPECT_THROW(ev.add(a, b), StructuralError);
    SimConfig other = small_config();
    other.scale_exp = 40;
    Evaluator ev2(other);
    const auto c = ev2.encrypt(std::vector<double>(1024, 1.0), 11, "c");
    EXPECT_THROW(ev.add(a, c), StructuralError);
}

TEST(Mul, ExamplesAndLevels) {
    Evaluator ev(small_config());
    std::mt19937_64 rng(3);
    const auto a = random_block(rng);
    const auto ca = ev.encrypt(a);
    const auto one = ev.mul_plain(ca, 1.0);
    EXPECT_EQ(one.level(), 10);
    EXPECT_EQ(ev.decrypt(one), a);
    const auto half = ev.encrypt(std::vector<double>(1024, 0.5));
    const auto sq = ev.decrypt(ev.mul(half, half));
    for (double v : sq)
        EXPECT_EQ(v, 0.25);
}

TEST(Mul, TwelfthMultiplicationUnderflows) {
    Evaluator ev(small_config());
    auto x = ev.encrypt(std::vector<double>(1024, 1.0), "chain");
    for (int i = 0; i < 11; ++i)
        x = ev.mul(x, x);
    EXPECT_EQ(x.level(), 0);
    try {
        ev.mul(x, x);
        FAIL() << "expected LevelUnderflow";
    } catch (const LevelUnderflow& e) {
        EXPECT_EQ(e.have(), 0);
        EXPECT_EQ(e.need(), 1);
        EXPECT_NE(std::string(e.what()).find("chain"), std::string::npos);
    }
    EXPECT_THROW(ev.mul_plain(x, 2.0), LevelUnderflow);
    EXPECT_NO_THROW(ev.mul_int(x, 3));
}

TEST(Mul, LazyRescaleAndRelinearization) {
    Evaluator ev(small_config());
    const auto a = ev.encrypt(std::vector<double>(1024, 0.5));
    const auto p = ev.mul(a, a);
    EXPECT_TRUE(p.rescale_pending());
    EXPECT_TRUE(p.relin_pending());
    EXPECT_EQ(p.scale_exp(), 100);
    EXPECT_EQ(ev.counters().rescalings, 0u);
    const auto q = ev.add(p, ev.mul(a, a));
    EXPECT_TRUE(q.rescale_pending());
    EXPECT_EQ(ev.counters().relinearizations_deferred, 1u);
    const auto r = ev.rotate(q, 1);
    EXPECT_FALSE(r.relin_pending());
    EXPECT_EQ(ev.counters().relinearizations, 1u);
    auto s = r;
    ev.resolve(s);
    EXPECT_EQ(s.scale_exp(), 50);
    EXPECT_EQ(ev.counters().rescalings, 1u);
    EXPECT_GE(ev.counters().mults_cipher + ev.counters().mults_plain, ev.counters().rescalings);
}

TEST(Rotate, StepsMatchIndexOracle) {
    Evaluator ev(small_config());
    std::vector<double> v(1024);
    for (std::size_t i = 0; i < v.size(); ++i)
        v[i] = static_cast<double>(i + 1);
    const auto c = ev.encrypt(v);
    const auto before = ev.counters().rotations;
    EXPECT_EQ(ev.decrypt(ev.rotate(c, 0)), v);
    EXPECT_EQ(ev.counters().rotations, before);
    EXPECT_EQ(ev.decrypt(ev.rotate(c, 1024)), v);
    for (long long step : {3LL, -5LL, 1000LL, 2051LL}) {
        const auto r = ev.decrypt(ev.rotate(c, step));
        for (std::size_t i = 0; i < v.size(); ++i) {
            const auto j = static_cast<std::size_t>(((static_cast<long long>(i) + step) % 1024 + 1024) % 1024);
            ASSERT_EQ(r[i], v[j]);
        }
    }
    EXPECT_EQ(ev.counters().rotations, before + 4);
    EXPECT_EQ(ev.rotate(c, 3).level(), 11);
}

TEST(Bootstrap, ExactModeIsLossless) {
    Evaluator ev(small_config());
    std::mt19937_64 rng(4);
    const auto v = random_block(rng);
    auto c = ev.encrypt(v, 3, "b");
    c = ev.bootstrap(c);
    EXPECT_EQ(c.level(), 11);
    EXPECT_EQ(ev.decrypt(c), v);
    EXPECT_EQ(ev.counters().bootstraps, 1u);
    ev.bootstrap(c);
    EXPECT_EQ(ev.counters().bootstraps, 2u);
    EXPECT_TRUE(ev.warnings().empty());
}

TEST(Bootstrap, QuantizedNoiseBound) {
    Evaluator ev(small_config(Fidelity::quantized));
    std::mt19937_64 rng(5);
    const auto v = random_block(rng);
    const auto out = ev.decrypt(ev.bootstrap(ev.encrypt(v, 0, "q")));
    double worst = 0;
    for (std::size_t i = 0; i < v.size(); ++i)
        worst = std::max(worst, std::fabs(out[i] - v[i]));
    EXPECT_LE(worst, std::ldexp(1.0, -19));
    EXPECT_GT(worst, 0.0);
    // with a bound B the noise scales with B
    const auto big = random_block(rng, 1024, -40, 40);
    const auto out40 = ev.decrypt(ev.bootstrap(ev.encrypt(big, 0, "q40"), 40.0));
    for (std::size_t i = 0; i < big.size(); ++i)
        EXPECT_LE(std::fabs(out40[i] - big[i]), 40 * std::ldexp(1.0, -19));
}

TEST(Bootstrap, RangeWarning) {
    Evaluator ev(small_config());
    ev.set_scope("layer7");
    std::vector<double> v(1024, 0.5);
    v[17] = 1.1;
    ev.bootstrap(ev.encrypt(v, 2, "w"));
    ASSERT_EQ(ev.warnings().size(), 1u);
    EXPECT_NE(ev.warnings()[0].find("layer7"), std::string::npos);
    v[17] = 1.0 + std::ldexp(1.0, -7);
    ev.bootstrap(ev.encrypt(v, 2, "w"));
    EXPECT_EQ(ev.warnings().size(), 1u);
}

TEST(ConjugateAndMask, Examples) {
    Evaluator ev(small_config());
    std::mt19937_64 rng(6);
    const auto v = random_block(rng);
    const auto c = ev.encrypt(v);
    EXPECT_EQ(ev.decrypt(ev.conjugate(c)), v);
    EXPECT_EQ(ev.counters().conjugations, 1u);
    const auto ones = ev.mask(c, std::vector<double>(1024, 1.0));
    EXPECT_EQ(ones.level(), 10);
    EXPECT_EQ(ev.decrypt(ones), v);
    for (double x : ev.decrypt(ev.mask(c, std::vector<double>(1024, 0.0))))
        EXPECT_EQ(x, 0.0);
    std::vector<double> alt(1024);
    for (std::size_t i = 0; i < alt.size(); ++i)
        alt[i] = (i % 2 == 0) ? 1.0 : 0.0;
    const auto m = ev.decrypt(ev.mask(c, alt));
    for (std::size_t i = 0; i < v.size(); ++i)
        EXPECT_EQ(m[i], i % 2 == 0 ? v[i] : 0.0);
    std::vector<double> bad(1024, 1.0);
    bad[3] = 0.5;
    EXPECT_THROW(ev.mask(c, bad), DomainError);
    EXPECT_THROW(ev.mask(c, std::vector<double>(12, 1.0)), StructuralError);
}

TEST(Quantized, SingleMulErrorBound) {
    Evaluator ex(small_config(Fidelity::exact));
    Evaluator qz(small_config(Fidelity::quantized));
    std::mt19937_64 rng(7);
    const auto a = random_block(rng), b = random_block(rng);
    const auto e = ex.decrypt(ex.mul(ex.encrypt(a), ex.encrypt(b)));
    const auto q = qz.decrypt(qz.mul(qz.encrypt(a), qz.encrypt(b)));
    for (std::size_t i = 0; i < a.size(); ++i)
        EXPECT_LE(std::fabs(e[i] - q[i]), std::ldexp(1.0, -30));
}

TEST(Invariants, RandomOpSequences) {
    std::mt19937_64 rng(8);
    for (int trial = 0; trial < 50; ++trial) {
        Evaluator ev(small_config());
        auto x = ev.encrypt(random_block(rng), "x");
        auto y = ev.encrypt(random_block(rng), "y");
        std::vector<double> px = ev.decrypt(x), py = ev.decrypt(y);
        std::uniform_int_distribution<int> op(0, 5);
        for (int s = 0; s < 30; ++s) {
            const int o = op(rng);
            try {
                if (o == 0) {
                    x = ev.add(x, y);
                    for (std::size_t i = 0; i < px.size(); ++i)
                        px[i] += py[i];
                } else if (o == 1 && x.level() >= 1) {
                    y = ev.level_down(y, x.level());
                    x = ev.mul(x, y);
                    for (std::size_t i = 0; i < px.size(); ++i)
                        px[i] *= py[i];
                } else if (o == 2) {
                    x = ev.rotate(x, 7);
                    std::rotate(px.begin(), px.begin() + 7, px.end());
                } else if (o == 3 && x.level() >= 1) {
                    x = ev.mul_plain(x, 0.5);
                    for (auto& v : px)
                        v *= 0.5;
                } else if (o == 4) {
                    x = ev.bootstrap(x, 1e9);
                    y = ev.bootstrap(y, 1e9);
                } else {
                    std::swap(x, y);
                    std::swap(px, py);
                    ev.resolve(y);
                }
                if (x.level() != y.level()) {
                    const int l = std::min(x.level(), y.level());
                    x = ev.level_down(x, l);
                    y = ev.level_down(y, l);
                }
            } catch (const LevelUnderflow&) {
                FAIL() << "guarded op underflowed";
            }
            ASSERT_GE(x.level(), 0);
            const auto& c = ev.counters();
            ASSERT_GE(c.mults_cipher + c.mults_plain, c.rescalings);
        }
        const auto got = ev.decrypt(x);
        for (std::size_t i = 0; i < px.size(); ++i)
            ASSERT_EQ(got[i], px[i]);
        const auto full = x.expand();
        for (std::size_t i = 0; i < full.size(); ++i)
            ASSERT_EQ(full[i], full[i % x.block()]);
    }
}

TEST(ForkMerge, DeterministicRegardlessOfOrder) {
    auto run = [](bool reverse) {
        Evaluator ev(small_config(Fidelity::quantized));
        std::vector<Evaluator> kids;
        for (int c = 0; c < 4; ++c)
            kids.push_back(ev.fork());
        std::vector<std::vector<double>> out(4);
        for (int k = 0; k < 4; ++k) {
            const int c = reverse ? 3 - k : k;
            out[static_cast<std::size_t>(c)] =
                kids[static_cast<std::size_t>(c)].decrypt(kids[static_cast<std::size_t>(c)].bootstrap(
                    kids[static_cast<std::size_t>(c)].encrypt(std::vector<double>(1024, 0.25), 0, "k")));
        }
        for (auto& k : kids)
            ev.merge(k);
        return std::make_pair(out, ev.counters());
    };
    const auto a = run(false), b = run(true);
    EXPECT_EQ(a.first, b.first);
    EXPECT_EQ(a.second, b.second);
    EXPECT_EQ(a.second.bootstraps, 4u);
    EXPECT_NE(a.first[0], a.first[1]);
}

TEST(Trace, OneLinePerOp) {
    Evaluator ev(small_config());
    std::ostringstream os;
    ev.set_trace(&os);
    ev.set_scope("conv1");
    auto x = ev.encrypt(std::vector<double>(1024, 1.0), "t0");
    x = ev.mul_plain(x, 2.0);
    x = ev.rotate(x, 1);
    std::istringstream is(os.str());
    std::string line;
    int n = 0;
    while (std::getline(is, line)) {
        ++n;
        EXPECT_NE(line.find("scope=conv1"), std::string::npos);
        EXPECT_NE(line.find("tag=t0"), std::string::npos);
    }
    EXPECT_EQ(n, 2);
    EXPECT_NE(os.str().find("level=11->10"), std::string::npos);
}
