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
#include <cstdio>
#include <fstream>
#include <istream>
#include <ostream>
#include <sstream>
#include <string>
#include <vector>

#include "heresnet/approx/chebyshev.hpp"
#include "heresnet/approx/interval.hpp"
#include "heresnet/common/errors.hpp"

namespace heresnet::approx {

/// Shortest text for a double that reads back to the same value (17 significant digits).
inline std::string format_double(double v) {
    char buf[40];
    std::snprintf(buf, sizeof buf, "%.17g", v);
    return buf;
}

/// Text format: header `degree parity interval_count`, one `lo hi` line per interval, one
/// coefficient per line, then an optional `achieved_error X` line.
inline void write_poly(std::ostream& os, const MinimaxPoly& p) {
    p.check_invariants();
    os << p.degree << ' ' << to_string(p.parity) << ' ' << p.domain.size() << '\n';
    for (const auto& iv : p.domain.intervals())
        os << format_double(iv.lo) << ' ' << format_double(iv.hi) << '\n';
    for (double c : p.coeffs)
        os << format_double(c) << '\n';
    os << "achieved_error " << format_double(p.achieved_error) << '\n';
}

inline std::string poly_to_string(const MinimaxPoly& p) {
    std::ostringstream os;
    write_poly(os, p);
    return os.str();
}

inline MinimaxPoly read_poly(std::istream& is) {
    auto fail = [](const std::string& what) -> MinimaxPoly { throw IoError("polynomial file: " + what); };
    MinimaxPoly p;
    std::string parity;
    long long count = 0;
    if (!(is >> p.degree >> parity >> count))
        return fail("bad header");
    if (p.degree < 0 || count < 1)
        return fail("bad header values");
    try {
        p.parity = parse_parity(parity);
    } catch (const DomainError& e) {
        return fail(e.what());
    }
    std::vector<Interval> ivs(static_cast<std::size_t>(count));
    for (auto& iv : ivs)
        if (!(is >> iv.lo >> iv.hi))
            return fail("truncated interval list");
    p.coeffs.resize(static_cast<std::size_t>(p.degree) + 1);
    for (auto& c : p.coeffs)
        if (!(is >> c))
            return fail("truncated coefficient list");
    std::string key;
    if (is >> key) {
        if (key != "achieved_error" || !(is >> p.achieved_error))
            return fail("unexpected trailing content '" + key + "'");
        if (is >> key)
            return fail("unexpected trailing content '" + key + "'");
    }
    try {
        p.domain = IntervalUnion(std::move(ivs));
        p.check_invariants();
    } catch (const DomainError& e) {
        return fail(e.what());
    }
    return p;
}

inline MinimaxPoly poly_from_string(const std::string& s) {
    std::istringstream is(s);
    return read_poly(is);
}

inline void save_poly(const std::string& path, const MinimaxPoly& p) {
    std::ofstream os(path, std::ios::binary);
    if (!os)
        throw IoError("cannot open '" + path + "' for writing");
    write_poly(os, p);
    if (!os)
        throw IoError("write failed for '" + path + "'");
}

inline MinimaxPoly load_poly(const std::string& path) {
    std::ifstream is(path, std::ios::binary);
    if (!is)
        throw IoError("cannot open '" + path + "'");
    return read_poly(is);
}

} // namespace heresnet::approx
