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

#include <bit>
#include <cmath>
#include <cstdint>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <map>
#include <random>
#include <string>
#include <vector>

#include "json.hpp"

#include "heresnet/common/errors.hpp"
#include "heresnet/resnet/graph.hpp"

namespace heresnet::resnet {

/// Filters in [out][in][ky][kx] order.
struct ConvWeights {
    int out_ch = 0, in_ch = 0, k = 0;
    std::vector<double> w;

    double at(int o, int i, int ky, int kx) const {
        return w[static_cast<std::size_t>(((o * in_ch + i) * k + ky) * k + kx)];
    }
    double& at(int o, int i, int ky, int kx) { return w[static_cast<std::size_t>(((o * in_ch + i) * k + ky) * k + kx)]; }
};

/// Per-channel affine map scale * x + shift.
struct Affine {
    std::vector<double> scale, shift;
};

struct BatchNorm {
    std::vector<double> gamma, beta, mean, var;
    double eps = 1e-5;

    std::size_t channels() const { return gamma.size(); }

    /// scale = gamma / sqrt(var + eps), shift = beta - scale * mean.
    Affine fold() const {
        Affine a;
        for (std::size_t c = 0; c < gamma.size(); ++c) {
            if (!(var[c] > 0.0))
                throw DomainError("batch norm variance must be positive (channel " + std::to_string(c) + ")");
            const double s = gamma[c] / std::sqrt(var[c] + eps);
            a.scale.push_back(s);
            a.shift.push_back(beta[c] - s * mean[c]);
        }
        return a;
    }
};

struct WeightSet {
    std::map<std::string, ConvWeights> conv;
    std::map<std::string, BatchNorm> bn;
    std::vector<double> fc_w; // [10][64]
    std::vector<double> fc_b; // [10]

    double fc(int j, int c) const { return fc_w[static_cast<std::size_t>(j * 64 + c)]; }

    /// Shapes must match the graph's conv layers; BN variances must be positive.
    void validate(const NetworkGraph& g) const {
        for (const auto* l : g.convs()) {
            auto it = conv.find(l->params);
            if (it == conv.end())
                throw StructuralError("weights: missing filters for '" + l->params + "'");
            const auto& cw = it->second;
            if (cw.out_ch != l->out_ch || cw.in_ch != l->in_ch || cw.k != l->k ||
                cw.w.size() != static_cast<std::size_t>(cw.out_ch * cw.in_ch * cw.k * cw.k))
                throw StructuralError("weights: '" + l->params + "' has the wrong shape");
            auto b = bn.find(l->params);
            if (b == bn.end())
                throw StructuralError("weights: missing batch norm for '" + l->params + "'");
            const auto n = static_cast<std::size_t>(l->out_ch);
            if (b->second.gamma.size() != n || b->second.beta.size() != n || b->second.mean.size() != n ||
                b->second.var.size() != n)
                throw StructuralError("weights: batch norm of '" + l->params + "' has the wrong size");
            for (double v : b->second.var)
                if (!(v > 0.0))
                    throw DomainError("weights: batch norm of '" + l->params + "' has a non-positive variance");
        }
        if (fc_w.size() != 640 || fc_b.size() != 10)
            throw StructuralError("weights: fc must be 10 x 64 with 10 biases");
    }
};

inline double to_f32(double v) { return static_cast<double>(static_cast<float>(v)); }

/// He-normal filters, BN statistics near identity, small FC. All values are representable as
/// 32-bit floats, so a manifest round trip is exact.
inline WeightSet random_weights(const NetworkGraph& g, std::uint64_t seed) {
    std::mt19937_64 rng(seed);
    WeightSet ws;
    std::uniform_real_distribution<double> u01(0.0, 1.0);
    for (const auto* l : g.convs()) {
        ConvWeights cw{l->out_ch, l->in_ch, l->k, {}};
        std::normal_distribution<double> he(0.0, std::sqrt(2.0 / (l->in_ch * l->k * l->k)));
        cw.w.resize(static_cast<std::size_t>(l->out_ch * l->in_ch * l->k * l->k));
        for (auto& v : cw.w)
            v = to_f32(he(rng));
        ws.conv[l->params] = std::move(cw);
        BatchNorm b;
        std::normal_distribution<double> small(0.0, 0.1);
        for (int c = 0; c < l->out_ch; ++c) {
            b.gamma.push_back(to_f32(0.5 + u01(rng)));
            b.beta.push_back(to_f32(small(rng)));
            b.mean.push_back(to_f32(small(rng)));
            b.var.push_back(to_f32(0.5 + u01(rng)));
        }
        ws.bn[l->params] = std::move(b);
    }
    std::normal_distribution<double> fcw(0.0, 1.0 / 8.0);
    for (int i = 0; i < 640; ++i)
        ws.fc_w.push_back(to_f32(fcw(rng)));
    for (int i = 0; i < 10; ++i)
        ws.fc_b.push_back(to_f32(0.1 * fcw(rng)));
    return ws;
}

// ---------------------------------------------------------------------------------------------
// Manifest: a JSON index of raw little-endian float32 blobs.
//
// {"format": "heresnet-weights", "version": 1, "bn_eps": 1e-05,
//  "tensors": [{"name": "conv1.weight", "file": "conv1.weight.f32", "shape": [16, 3, 3, 3]}, ...]}
//
// Tensors: <conv>.weight [out, in, k, k]; <conv>.bn [4, out] (rows gamma, beta, mean, var);
// fc.weight [10, 64]; fc.bias [10].

namespace detail {

inline void write_blob(const std::filesystem::path& p, const std::vector<double>& v) {
    std::ofstream out(p, std::ios::binary);
    if (!out)
        throw IoError("cannot write '" + p.string() + "'");
    for (double d : v) {
        const float f = static_cast<float>(d);
        std::uint32_t bits;
        std::memcpy(&bits, &f, 4);
        if constexpr (std::endian::native == std::endian::big)
            bits = __builtin_bswap32(bits);
        out.write(reinterpret_cast<const char*>(&bits), 4);
    }
    if (!out)
        throw IoError("write failed for '" + p.string() + "'");
}

inline std::vector<double> read_blob(const std::filesystem::path& p, std::size_t count) {
    std::ifstream in(p, std::ios::binary);
    if (!in)
        throw IoError("cannot open weight blob '" + p.string() + "'");
    std::vector<double> v(count);
    for (std::size_t i = 0; i < count; ++i) {
        std::uint32_t bits;
        if (!in.read(reinterpret_cast<char*>(&bits), 4))
            throw IoError("weight blob '" + p.string() + "' is shorter than its declared shape");
        if constexpr (std::endian::native == std::endian::big)
            bits = __builtin_bswap32(bits);
        float f;
        std::memcpy(&f, &bits, 4);
        v[i] = f;
    }
    char extra;
    if (in.read(&extra, 1))
        throw IoError("weight blob '" + p.string() + "' is longer than its declared shape");
    return v;
}

} // namespace detail

inline void save_weights(const std::string& dir, const WeightSet& ws, const NetworkGraph& g) {
    ws.validate(g);
    namespace fs = std::filesystem;
    fs::create_directories(dir);
    nlohmann::json tensors = nlohmann::json::array();
    auto put = [&](const std::string& name, const std::vector<double>& v, std::vector<int> shape) {
        const std::string file = name + ".f32";
        detail::write_blob(fs::path(dir) / file, v);
        tensors.push_back({{"name", name}, {"file", file}, {"shape", shape}});
    };
    double eps = 1e-5;
    for (const auto* l : g.convs()) {
        const auto& cw = ws.conv.at(l->params);
        put(l->params + ".weight", cw.w, {cw.out_ch, cw.in_ch, cw.k, cw.k});
        const auto& b = ws.bn.at(l->params);
        eps = b.eps;
        std::vector<double> packed;
        for (const auto* row : {&b.gamma, &b.beta, &b.mean, &b.var})
            packed.insert(packed.end(), row->begin(), row->end());
        put(l->params + ".bn", packed, {4, l->out_ch});
    }
    put("fc.weight", ws.fc_w, {10, 64});
    put("fc.bias", ws.fc_b, {10});
    nlohmann::json doc = {{"format", "heresnet-weights"}, {"version", 1}, {"bn_eps", eps}, {"tensors", tensors}};
    std::ofstream out(fs::path(dir) / "manifest.json");
    if (!out)
        throw IoError("cannot write manifest in '" + dir + "'");
    out << doc.dump(2) << "\n";
}

/// Reads a manifest (a file, or a directory holding manifest.json) and checks it against the graph.
inline WeightSet load_weights(const std::string& path, const NetworkGraph& g) {
    namespace fs = std::filesystem;
    fs::path mf = fs::is_directory(path) ? fs::path(path) / "manifest.json" : fs::path(path);
    std::ifstream in(mf);
    if (!in)
        throw IoError("cannot open weight manifest '" + mf.string() + "'");
    nlohmann::json doc;
    try {
        in >> doc;
    } catch (const nlohmann::json::exception& e) {
        throw IoError("malformed manifest '" + mf.string() + "': " + e.what());
    }
    std::map<std::string, std::pair<std::vector<int>, std::string>> index;
    double eps = 1e-5;
    try {
        if (doc.at("format").get<std::string>() != "heresnet-weights")
            throw IoError("manifest '" + mf.string() + "' has an unknown format");
        eps = doc.value("bn_eps", 1e-5);
        for (const auto& t : doc.at("tensors"))
            index[t.at("name").get<std::string>()] = {t.at("shape").get<std::vector<int>>(),
                                                      t.at("file").get<std::string>()};
    } catch (const nlohmann::json::exception& e) {
        throw IoError("malformed manifest '" + mf.string() + "': " + e.what());
    }
    auto get = [&](const std::string& name, const std::vector<int>& shape) {
        auto it = index.find(name);
        if (it == index.end())
            throw IoError("manifest lacks tensor '" + name + "'");
        if (it->second.first != shape)
            throw IoError("tensor '" + name + "' has the wrong declared shape");
        std::size_t n = 1;
        for (int s : shape)
            n *= static_cast<std::size_t>(s);
        return detail::read_blob(mf.parent_path() / it->second.second, n);
    };
    WeightSet ws;
    for (const auto* l : g.convs()) {
        ConvWeights cw{l->out_ch, l->in_ch, l->k, get(l->params + ".weight", {l->out_ch, l->in_ch, l->k, l->k})};
        ws.conv[l->params] = std::move(cw);
        const auto packed = get(l->params + ".bn", {4, l->out_ch});
        const auto n = static_cast<std::ptrdiff_t>(l->out_ch);
        BatchNorm b;
        b.gamma.assign(packed.begin(), packed.begin() + n);
        b.beta.assign(packed.begin() + n, packed.begin() + 2 * n);
        b.mean.assign(packed.begin() + 2 * n, packed.begin() + 3 * n);
        b.var.assign(packed.begin() + 3 * n, packed.end());
        b.eps = eps;
        ws.bn[l->params] = std::move(b);
    }
    ws.fc_w = get("fc.weight", {10, 64});
    ws.fc_b = get("fc.bias", {10});
    ws.validate(g);
    return ws;
}

} // namespace heresnet::resnet
