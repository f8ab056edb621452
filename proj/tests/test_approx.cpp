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

#include "heresnet/approx/chebyshev.hpp"
#include "heresnet/approx/interval.hpp"
#include "heresnet/approx/inverse.hpp"
#include "heresnet/approx/io.hpp"
#include "heresnet/approx/lsq.hpp"
#include "heresnet/approx/remez.hpp"
#include "heresnet/approx/sign.hpp"

using namespace heresnet;
using namespace heresnet::approx;

namespace {

long double sgn(long double x) { return x > 0 ? 1.0L : (x < 0 ? -1.0L : 0.0L); }

// Discrete minimax on a fixed grid by single-exchange Remez, Gaussian elimination in double.
// Basis: odd T_k on [-1, 1], grid on [lo, 1].
double grid_exchange_oracle(double lo, int degree, std::size_t npts) {
    std::vector<int> basis;
    for (int k = 1; k <= degree; k += 2)
        basis.push_back(k);
    const std::size_t m = basis.size(), R = m + 1;
    std::vector<double> xs(npts), tk(npts * m);
    for (std::size_t i = 0; i < npts; ++i) {
        xs[i] = lo + (1.0 - lo) * static_cast<double>(i) / static_cast<double>(npts - 1);
        for (std::size_t j = 0; j < m; ++j)
            tk[i * m + j] = std::cos(basis[j] * std::acos(xs[i]));
    }
    std::vector<std::size_t> ref(R);
    for (std::size_t i = 0; i < R; ++i) {
        const double u = (1 - std::cos(M_PI * static_cast<double>(i) / (R - 1))) / 2;
        ref[i] = static_cast<std::size_t>(u * (npts - 1));
    }
    std::vector<double> c(m), err(npts);
    double levelled = 0;
    for (int iter = 0; iter < 200; ++iter) {
        std::vector<double> A(R * R), b(R);
        for (std::size_t i = 0; i < R; ++i) {
            for (std::size_t j = 0; j < m; ++j)
                A[i * R + j] = tk[ref[i] * m + j];
            A[i * R + m] = (i % 2 == 0) ? 1.0 : -1.0;
            b[i] = 1.0;
        }
        for (std::size_t col = 0; col < R; ++col) {
            std::size_t piv = col;
            for (std::size_t r = col + 1; r < R; ++r)
                if (std::fabs(A[r * R + col]) > std::fabs(A[piv * R + col]))
                    piv = r;
            for (std::size_t k = 0; k < R; ++k)
                std::swap(A[col * R + k], A[piv * R + k]);
            std::swap(b[col], b[piv]);
            for (std::size_t r = col + 1; r < R; ++r) {
                const double f = A[r * R + col] / A[col * R + col];
                for (std::size_t k = col; k < R; ++k)
                    A[r * R + k] -= f * A[col * R + k];
                b[r] -= f * b[col];
            }
        }
        std::vector<double> sol(R);
        for (std::size_t r = R; r-- > 0;) {
            double s = b[r];
            for (std::size_t k = r + 1; k < R; ++k)
                s -= A[r * R + k] * sol[k];
            sol[r] = s / A[r * R + r];
        }
        for (std::size_t j = 0; j < m; ++j)
            c[j] = sol[j];
        levelled = std::fabs(sol[m]);
        std::size_t worst = 0;
        for (std::size_t i = 0; i < npts; ++i) {
            double p = 0;
            for (std::size_t j = 0; j < m; ++j)
                p += c[j] * tk[i * m + j];
            err[i] = p - 1.0;
            if (std::fabs(err[i]) > std::fabs(err[worst]))
                worst = i;
        }
        if (std::fabs(err[worst]) <= levelled * (1 + 1e-13))
            return std::fabs(err[worst]);
        // single-point exchange keeping alternation
        std::vector<std::size_t> nr = ref;
        auto s = [&](std::size_t i) { return err[i] > 0 ? 1 : -1; };
        std::size_t pos = 0;
        while (pos < R && nr[pos] < worst)
            ++pos;
        if (pos < R && nr[pos] == worst)
            return std::fabs(err[worst]);
        if (pos == 0) {
            if (s(nr[0]) == s(worst))
                nr[0] = worst;
            else {
                nr.insert(nr.begin(), worst);
                nr.pop_back();
            }
        } else if (pos == R) {
            if (s(nr[R - 1]) == s(worst))
                nr[R - 1] = worst;
            else {
                nr.push_back(worst);
                nr.erase(nr.begin());
            }
        } else if (s(nr[pos - 1]) == s(worst)) {
            nr[pos - 1] = worst;
        } else {
            nr[pos] = worst;
        }
        ref = nr;
    }
    return -1;
}

} // namespace

TEST(IntervalUnion, ValidatesOrderingAndEmptiness) {
    EXPECT_THROW(IntervalUnion(std::vector<Interval>{}), DomainError);
    EXPECT_THROW(IntervalUnion({{0.0, 1.0}, {0.5, 2.0}}), DomainError);
    EXPECT_THROW(IntervalUnion({{1.0, 0.0}}), DomainError);
    const auto u = IntervalUnion::integer_neighborhoods(17, 1.0 / 64);
    EXPECT_EQ(u.size(), 33u);
    EXPECT_TRUE(u.is_symmetric());
    EXPECT_DOUBLE_EQ(u.hull().hi, 16 + 1.0 / 64);
    EXPECT_TRUE(u.contains(5.0 + 1.0 / 128));
    EXPECT_FALSE(u.contains(5.5));
}

TEST(Remez, CubicIsReproducedExactly) {
    const auto p = remez([](long double x) { return x * x * x; }, IntervalUnion({{-1.0, 1.0}}), 3, Parity::none);
    ASSERT_EQ(p.coeffs.size(), 4u);
    EXPECT_NEAR(p.coeffs[1], 0.75, 1e-12);
    EXPECT_NEAR(p.coeffs[3], 0.25, 1e-12);
    EXPECT_NEAR(p.coeffs[0], 0.0, 1e-12);
    EXPECT_NEAR(p.coeffs[2], 0.0, 1e-12);
    EXPECT_LE(p.achieved_error, 1e-12);
}

TEST(Remez, DegenerateDomainRejected) {
    EXPECT_THROW(remez([](long double x) { return x; }, IntervalUnion({{0.5, 0.5}}), 2, Parity::none), DomainError);
    EXPECT_THROW(remez([](long double x) { return x; }, IntervalUnion({{0.0, 1.0}}), 3, Parity::odd), DomainError);
}

TEST(Remez, NonConvergenceCarriesProfile) {
    RemezOptions o;
    o.max_iterations = 1;
    try {
        remez(sgn, IntervalUnion::symmetric_pair(1.0 / 8192, 1.0), 15, Parity::odd, o);
        FAIL() << "expected RemezError";
    } catch (const RemezError& e) {
        EXPECT_FALSE(e.error_profile().empty());
    }
}

TEST(Remez, SignDegree15MatchesGridExchangeOracle) {
    RemezOptions o;
    o.tolerance = 1e-13;
    const double gap = std::ldexp(1.0, -13);
    const auto p = remez(sgn, IntervalUnion::symmetric_pair(gap, 1.0), 15, Parity::odd, o);
    const double oracle = grid_exchange_oracle(gap, 15, std::size_t{1} << 20);
    ASSERT_GT(oracle, 0.0);
    EXPECT_NEAR(p.achieved_error, oracle, 1e-10);
}

TEST(Remez, EquioscillationAndParity) {
    struct Case {
        IntervalUnion dom;
        int degree;
        Parity parity;
        double (*f)(double);
    };
    const std::vector<Case> cases{
        {IntervalUnion::symmetric_pair(1.0 / 64, 1.0), 15, Parity::odd, [](double x) { return x > 0 ? 1.0 : -1.0; }},
        {IntervalUnion({{-1.0, 1.0}}), 8, Parity::none, [](double x) { return std::exp(x); }},
        {IntervalUnion({{-1.0, 1.0}}), 10, Parity::even, [](double x) { return std::fabs(x); }},
        {IntervalUnion({{-2.0, -1.0}, {0.5, 3.0}}), 9, Parity::none, [](double x) { return std::sin(3 * x); }},
    };
    for (const auto& cs : cases) {
        const auto p = remez([&](long double x) { return static_cast<long double>(cs.f(static_cast<double>(x))); },
                             cs.dom, cs.degree, cs.parity);
        ASSERT_NO_THROW(p.check_invariants());
        for (int k = 0; k <= p.degree; ++k)
            if (!parity_admits(cs.parity, k))
                EXPECT_EQ(p.coeffs[static_cast<std::size_t>(k)], 0.0);
        ASSERT_FALSE(p.reference.empty());
        std::vector<long double> e;
        for (double x : p.reference)
            e.push_back(eval_poly_extended(p, x) - cs.f(x));
        const long double mag = std::fabs(e[0]);
        for (std::size_t i = 0; i < e.size(); ++i) {
            EXPECT_NEAR(static_cast<double>(std::fabs(e[i]) / mag), 1.0, 1e-6);
            if (i > 0)
                EXPECT_LT(e[i] * e[i - 1], 0) << "no alternation at reference " << i;
        }
        EXPECT_TRUE(validate_minimax(p, [&](long double x) { return static_cast<long double>(cs.f(static_cast<double>(x))); }));
    }
}

TEST(Remez, CosineDegree54OnModRaiseRegion) {
    const long double pi = 3.141592653589793238462643383279502884L;
    auto f = [&](long double t) { return std::cos(2 * pi * (t - 0.25L) / 4); };
    const auto dom = IntervalUnion::integer_neighborhoods(17, 1.0 / 64);
    const auto p = remez(f, dom, 54, Parity::none);
    EXPECT_EQ(p.degree, 54);
    EXPECT_LT(p.achieved_error, 1e-12);
    EXPECT_TRUE(validate_minimax(p, f));
}

TEST(CompositeSign, Alpha13StageDegreesAndOddness) {
    const auto cs = compose_sign(13);
    EXPECT_EQ(cs.degrees(), (std::vector<int>{15, 15, 27}));
    EXPECT_EQ(cs.alpha, 13);
    EXPECT_EQ(cs(0.0), 0.0);
    std::mt19937_64 rng(5);
    std::uniform_real_distribution<double> u(-1.0, 1.0);
    for (int i = 0; i < 10000; ++i) {
        const double x = u(rng);
        EXPECT_EQ(cs(-x), -cs(x));
    }
    for (const auto& s : cs.stages) {
        EXPECT_EQ(s.parity, Parity::odd);
        for (int k = 0; k <= s.degree; k += 2)
            EXPECT_EQ(s.coeffs[static_cast<std::size_t>(k)], 0.0);
    }
}

TEST(CompositeSign, Alpha13SandwichOnFittedRegion) {
    const auto cs = compose_sign(13);
    const double tol = std::ldexp(1.0, -13);
    const auto q = measure_sign(cs, cs.gap, std::size_t{1} << 21);
    EXPECT_LE(q.max_sign_error, tol);
    EXPECT_LE(q.mean_relu_error, std::ldexp(1.0, -16));
    EXPECT_LE(q.max_relu_error, tol);
}

TEST(CompositeSign, GreedySearchMeetsInvariantForAlpha8) {
    const auto cs = compose_sign(8);
    const double tol = std::ldexp(1.0, -8);
    ASSERT_FALSE(cs.stages.empty());
    double worst = 0;
    const std::size_t n = std::size_t{1} << 18;
    for (std::size_t i = 0; i < n; ++i) {
        const double x = tol + (1.0 - tol) * static_cast<double>(i) / static_cast<double>(n - 1);
        worst = std::max(worst, std::fabs(cs(x) - 1.0));
        EXPECT_EQ(cs(-x), -cs(x));
    }
    EXPECT_LE(worst, tol);
}

TEST(CompositeSign, UnreachableAlphaReportsBestPrecision) {
    SignOptions o;
    o.max_stages = 1;
    try {
        compose_sign(30, o);
        FAIL() << "expected ConvergenceError";
    } catch (const ConvergenceError& e) {
        EXPECT_NE(std::string(e.what()).find("best precision"), std::string::npos);
    }
}

TEST(ReluFromSign, ExamplesAndMeanError) {
    const auto cs = compose_sign(13);
    EXPECT_EQ(relu_from_sign(cs, 0.0), 0.0);
    EXPECT_NEAR(relu_from_sign(cs, 1.0), 1.0, std::ldexp(1.0, -14));
    std::mt19937_64 rng(2024);
    std::uniform_real_distribution<double> u(-1.0, 1.0);
    double acc = 0;
    const int n = 1000000;
    for (int i = 0; i < n; ++i) {
        const double x = u(rng);
        acc += std::fabs(relu_from_sign(cs, x) - std::max(x, 0.0));
    }
    EXPECT_LE(acc / n, std::ldexp(1.0, -16));
}

namespace {

// Legendre projection oracle: composite Simpson with 10^4 panels, recurrence-built P_k.
std::vector<double> legendre_oracle(double (*f)(double), int degree) {
    const int panels = 10000;
    std::vector<double> coef(static_cast<std::size_t>(degree) + 1, 0.0);
    const double h = 2.0 / panels;
    for (int i = 0; i <= 2 * panels; ++i) {
        const double x = -1.0 + i * h / 2;
        const double w = (i == 0 || i == 2 * panels) ? 1 : (i % 2 ? 4 : 2);
        double p0 = 1, p1 = x;
        for (int k = 0; k <= degree; ++k) {
            const double pk = k == 0 ? p0 : p1;
            coef[static_cast<std::size_t>(k)] += w * f(x) * pk;
            if (k >= 1) {
                const double p2 = ((2 * k + 1) * x * p1 - k * p0) / (k + 1);
                p0 = p1;
                p1 = p2;
            }
        }
    }
    for (int k = 0; k <= degree; ++k)
        coef[static_cast<std::size_t>(k)] *= (h / 6) * (2 * k + 1) / 2.0;
    return coef;
}

double legendre_eval(const std::vector<double>& c, double x) {
    double p0 = 1, p1 = x, s = c[0];
    for (std::size_t k = 1; k < c.size(); ++k) {
        s += c[k] * p1;
        const double p2 = ((2.0 * k + 1) * x * p1 - k * p0) / (k + 1);
        p0 = p1;
        p1 = p2;
    }
    return s;
}

} // namespace

TEST(LeastSquares, IdentityIsExact) {
    const auto p = least_squares_poly([](long double x) { return x; }, -1.0, 1.0, 1);
    EXPECT_NEAR(p.coeffs[0], 0.0, 1e-15);
    EXPECT_NEAR(p.coeffs[1], 1.0, 1e-15);
    EXPECT_LE(p.achieved_error, 1e-15);
}

TEST(LeastSquares, ExpDegree12AgainstQuadratureOracle) {
    const auto p = exp_poly(12);
    const auto oc = legendre_oracle([](double x) { return std::exp(x); }, 12);
    double oracle_max = 0, diff = 0;
    for (int i = 0; i <= 20000; ++i) {
        const double x = -1.0 + i / 10000.0;
        oracle_max = std::max(oracle_max, std::fabs(legendre_eval(oc, x) - std::exp(x)));
        diff = std::max(diff, std::fabs(legendre_eval(oc, x) - eval_poly_reference(p, x)));
    }
    EXPECT_LE(diff, 1e-10);
    EXPECT_LE(p.achieved_error, oracle_max * (1 + 1e-3) + 1e-15);
    EXPECT_NEAR(eval_poly_reference(p, 0.0), 1.0, oracle_max);
}

TEST(LeastSquares, ResidualOrthogonalToBasis) {
    auto f = [](double x) { return 1.0 / (1.0 + 4 * x * x); };
    const auto p = least_squares_poly([&](long double x) { return static_cast<long double>(f(static_cast<double>(x))); },
                                      -1.0, 1.0, 10);
    const int panels = 20000;
    const double h = 2.0 / panels;
    for (int k = 0; k <= 10; ++k) {
        double ip = 0;
        for (int i = 0; i <= 2 * panels; ++i) {
            const double x = -1.0 + i * h / 2;
            const double w = (i == 0 || i == 2 * panels) ? 1 : (i % 2 ? 4 : 2);
            std::vector<double> ek(static_cast<std::size_t>(k) + 1, 0.0);
            ek.back() = 1.0;
            ip += w * (eval_poly_reference(p, x) - f(x)) * legendre_eval(ek, x);
        }
        EXPECT_LE(std::fabs(ip * h / 6), 1e-8) << "basis " << k;
    }
}

TEST(LeastSquares, RejectsBadInput) {
    EXPECT_THROW(least_squares_poly([](long double x) { return x; }, 1.0, 1.0, 2), DomainError);
    EXPECT_THROW(least_squares_poly([](long double x) { return x; }, -1.0, 1.0, -1), DomainError);
}

TEST(InverseApprox, ExamplesAndBounds) {
    EXPECT_EQ(inverse_approx(1.0, 7), 1.0);
    EXPECT_LE(std::fabs(inverse_approx(0.5, 5) - 2.0), 2 * std::pow(0.5, 32));
    EXPECT_LE(std::fabs(inverse_approx(1.5, 5) - 1.0 / 1.5), inverse_error_bound(1.5, 5) + 1e-16);
    EXPECT_THROW(inverse_approx(0.0, 3), DomainError);
    EXPECT_THROW(inverse_approx(2.0, 3), DomainError);
    EXPECT_THROW(inverse_approx(-1.0, 3), DomainError);
    EXPECT_THROW(inverse_approx(0.5, 0), DomainError);
}

TEST(InverseApprox, ErrorSquaresPerIteration) {
    for (int i = 0; i <= 180; ++i) {
        const double a = 0.1 + i * 0.01;
        for (int n = 1; n < 5; ++n) {
            const double e0 = std::fabs(inverse_approx(a, n) - 1.0 / a);
            const double e1 = std::fabs(inverse_approx(a, n + 1) - 1.0 / a);
            EXPECT_LE(e1, a * e0 * e0 * (1 + 1e-6) + 1e-15) << "a=" << a << " n=" << n;
            EXPECT_LE(e0, inverse_error_bound(a, n) * (1 + 1e-9) + 1e-15);
        }
    }
}

TEST(EvalPolyReference, ExamplesAndMonomialOracle) {
    MinimaxPoly c;
    c.domain = IntervalUnion({{-1.0, 1.0}});
    c.degree = 0;
    c.coeffs = {3.25};
    EXPECT_EQ(eval_poly_reference(c, 0.7), 3.25);
    MinimaxPoly t1 = c;
    t1.degree = 1;
    t1.coeffs = {0.0, 1.0};
    EXPECT_EQ(eval_poly_reference(t1, 0.5), 0.5);

    std::mt19937_64 rng(11);
    std::uniform_real_distribution<double> u(-1.0, 1.0);
    MinimaxPoly p = c;
    p.degree = 27;
    p.coeffs.resize(28);
    for (auto& v : p.coeffs)
        v = u(rng);
    // Chebyshev -> monomial in binary128 via T_{k+1} = 2x T_k - T_{k-1}; the monomial form
    // cancels heavily, so the oracle needs the extra precision
    using quad = __float128;
    std::vector<std::vector<quad>> T{{quad(1)}, {quad(0), quad(1)}};
    for (int k = 2; k <= 27; ++k) {
        std::vector<quad> t(static_cast<std::size_t>(k) + 1, quad(0));
        for (std::size_t j = 0; j < T[k - 1].size(); ++j)
            t[j + 1] += 2 * T[k - 1][j];
        for (std::size_t j = 0; j < T[k - 2].size(); ++j)
            t[j] -= T[k - 2][j];
        T.push_back(t);
    }
    std::vector<quad> mono(28, quad(0));
    for (int k = 0; k <= 27; ++k)
        for (std::size_t j = 0; j < T[k].size(); ++j)
            mono[j] += quad(p.coeffs[static_cast<std::size_t>(k)]) * T[k][j];
    for (int i = 0; i < 1000; ++i) {
        const double xd = u(rng);
        const quad x = xd;
        quad h = 0;
        for (int j = 27; j >= 0; --j)
            h = h * x + mono[static_cast<std::size_t>(j)];
        const double got = eval_poly_reference(p, xd);
        EXPECT_LE(std::fabs(got - static_cast<double>(h)), 1e-10 * std::max(1.0, std::fabs(static_cast<double>(h))));
    }
}

TEST(PolyIo, RoundTripIsBitExact) {
    const auto p = remez([](long double x) { return std::sin(x); }, IntervalUnion({{-2.0, -0.5}, {0.5, 2.0}}), 7, Parity::odd);
    const std::string s = poly_to_string(p);
    const auto q = poly_from_string(s);
    EXPECT_EQ(q.degree, p.degree);
    EXPECT_EQ(q.parity, p.parity);
    EXPECT_EQ(q.domain, p.domain);
    EXPECT_EQ(q.coeffs, p.coeffs);
    EXPECT_EQ(q.achieved_error, p.achieved_error);
    EXPECT_EQ(poly_to_string(q), s);
    std::istringstream hdr(s.substr(0, s.find('\n')));
    int d, n;
    std::string par;
    hdr >> d >> par >> n;
    EXPECT_EQ(d, 7);
    EXPECT_EQ(par, "odd");
    EXPECT_EQ(n, 2);
}

TEST(PolyIo, MalformedInputRejected) {
    EXPECT_THROW(poly_from_string("3 odd 1\n-1 1\n0 1 0\n"), IoError);
    EXPECT_THROW(poly_from_string("1 none 1\n1 -1\n0 1\n"), IoError);
    EXPECT_THROW(poly_from_string("1 odd 1\n-1 1\n0.5 1\n"), IoError);
    EXPECT_THROW(poly_from_string("1 none 1\n-1 1\n0 1\nextra 3\n"), IoError);
    EXPECT_NO_THROW(poly_from_string("1 none 1\n-1 1\n0 1\n"));
}
