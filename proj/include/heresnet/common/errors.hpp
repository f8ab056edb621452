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

#include <stdexcept>
#include <string>

namespace heresnet {

/// Base of every error thrown by the library.
class Error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// Mismatched levels, scales, shapes or layouts between operands.
class StructuralError : public Error {
public:
    using Error::Error;
};

/// An operation would push a ciphertext below level 0.
class LevelUnderflow : public Error {
public:
    LevelUnderflow(const std::string& where, int have, int need)
        : Error("level underflow at '" + where + "': have " + std::to_string(have) +
                ", need " + std::to_string(need)),
          where_(where), have_(have), need_(need) {}

    const std::string& where() const noexcept { return where_; }
    int have() const noexcept { return have_; }
    int need() const noexcept { return need_; }

private:
    std::string where_;
    int have_;
    int need_;
};

/// Argument outside the mathematical domain of a function.
class DomainError : public Error {
public:
    using Error::Error;
};

/// Iterative numerical procedure failed to converge (Remez, sign search).
class ConvergenceError : public Error {
public:
    using Error::Error;
};

/// Malformed or unreadable file.
class IoError : public Error {
public:
    using Error::Error;
};

} // namespace heresnet
