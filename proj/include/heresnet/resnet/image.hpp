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

#include <array>
#include <cstdint>
#include <fstream>
#include <random>
#include <sstream>
#include <string>
#include <vector>

#include "heresnet/approx/io.hpp"
#include "heresnet/common/errors.hpp"
#include "heresnet/heslots/heslots.hpp"
#include "heresnet/resnet/layout.hpp"

namespace heresnet::resnet {

inline constexpr int kChannels = 3;
inline constexpr std::size_t kPixels = 3 * 32 * 32;

/// Per-channel pixel means of the CIFAR-10 training set, on the [0, 1] scale.
inline constexpr std::array<double, 3> kCifarMean = {0.4914, 0.4822, 0.4465};

/// A 32 x 32 x 3 image, channel-major: data[(c * 32 + row) * 32 + col]. Values are already
/// mean-subtracted.
struct Image {
    std::vector<double> data = std::vector<double>(kPixels, 0.0);
    int label = -1;

    double at(int c, int row, int col) const {
        return data[static_cast<std::size_t>((c * 32 + row) * 32 + col)];
    }
    double& at(int c, int row, int col) { return data[static_cast<std::size_t>((c * 32 + row) * 32 + col)]; }
};

/// One channel per ciphertext, pixel (r, c) at slot r * 32 + c.
inline std::vector<heslots::CipherVec> pack_image(heslots::Evaluator& ev, const Image& img) {
    if (img.data.size() != kPixels)
        throw StructuralError("pack_image: image must hold 3072 values, got " + std::to_string(img.data.size()));
    if (ev.config().sparse_block != kBlock)
        throw StructuralError("pack_image: the sparse block must be 1024 slots");
    std::vector<heslots::CipherVec> out;
    for (int c = 0; c < kChannels; ++c) {
        std::vector<double> block(img.data.begin() + c * 1024, img.data.begin() + (c + 1) * 1024);
        out.push_back(ev.encrypt(block, "image.c" + std::to_string(c)));
    }
    return out;
}

/// The size x size channel matrix (row-major) held by a ciphertext in the given layout.
inline std::vector<double> unpack(heslots::Evaluator& ev, const heslots::CipherVec& ct, const Layout& layout) {
    const auto slots = ev.decrypt(ct);
    std::vector<double> m;
    m.reserve(static_cast<std::size_t>(layout.size * layout.size));
    for (int i = 0; i < layout.size; ++i)
        for (int j = 0; j < layout.size; ++j)
            m.push_back(slots[layout.slot(i, j)]);
    return m;
}

inline Image image_from_bytes(const unsigned char* pixels, int label) {
    Image img;
    img.label = label;
    for (std::size_t k = 0; k < kPixels; ++k)
        img.data[k] = pixels[k] / 255.0 - kCifarMean[k / 1024];
    return img;
}

/// CIFAR-10 binary batch: records of 1 label byte + 3072 channel-major pixel bytes.
inline std::vector<Image> read_cifar_binary(const std::string& path, std::size_t limit = 0) {
    std::ifstream in(path, std::ios::binary);
    if (!in)
        throw IoError("cannot open CIFAR file '" + path + "'");
    std::vector<Image> out;
    std::vector<unsigned char> rec(kPixels + 1);
    while (limit == 0 || out.size() < limit) {
        in.read(reinterpret_cast<char*>(rec.data()), static_cast<std::streamsize>(rec.size()));
        if (in.gcount() == 0)
            break;
        if (in.gcount() != static_cast<std::streamsize>(rec.size()))
            throw IoError("'" + path + "': truncated record " + std::to_string(out.size()));
        if (rec[0] > 9)
            throw IoError("'" + path + "': record " + std::to_string(out.size()) + " has label " +
                          std::to_string(rec[0]));
        out.push_back(image_from_bytes(rec.data() + 1, rec[0]));
    }
    if (out.empty())
        throw IoError("'" + path + "' holds no records");
    return out;
}

inline void write_cifar_binary(const std::string& path, const std::vector<std::vector<unsigned char>>& pixels,
                               const std::vector<int>& labels) {
    std::ofstream out(path, std::ios::binary);
    if (!out)
        throw IoError("cannot write '" + path + "'");
    for (std::size_t i = 0; i < pixels.size(); ++i) {
        const auto lb = static_cast<unsigned char>(labels[i]);
        out.write(reinterpret_cast<const char*>(&lb), 1);
        out.write(reinterpret_cast<const char*>(pixels[i].data()), static_cast<std::streamsize>(kPixels));
    }
}

/// Plain-text image: an optional "label N" line, then 3072 whitespace-separated values in
/// channel-major order. '#' starts a comment.
inline Image read_text_image(std::istream& in, const std::string& name = "<stream>") {
    Image img;
    std::vector<double> vals;
    std::string line;
    while (std::getline(in, line)) {
        if (auto h = line.find('#'); h != std::string::npos)
            line.resize(h);
        std::istringstream ls(line);
        std::string tok;
        while (ls >> tok) {
            if (tok == "label") {
                if (!(ls >> img.label) || img.label < 0 || img.label > 9)
                    throw IoError(name + ": bad label line");
                continue;
            }
            try {
                std::size_t used = 0;
                vals.push_back(std::stod(tok, &used));
                if (used != tok.size())
                    throw IoError(name + ": bad number '" + tok + "'");
            } catch (const std::logic_error&) {
                throw IoError(name + ": bad number '" + tok + "'");
            }
        }
    }
    if (vals.size() != kPixels)
        throw IoError(name + ": expected 3072 values, found " + std::to_string(vals.size()));
    img.data = std::move(vals);
    return img;
}

inline Image load_text_image(const std::string& path) {
    std::ifstream in(path);
    if (!in)
        throw IoError("cannot open image '" + path + "'");
    return read_text_image(in, path);
}

inline void write_text_image(std::ostream& out, const Image& img) {
    if (img.label >= 0)
        out << "label " << img.label << "\n";
    for (int c = 0; c < 3; ++c)
        for (int r = 0; r < 32; ++r) {
            for (int k = 0; k < 32; ++k)
                out << (k ? " " : "") << approx::format_double(img.at(c, r, k));
            out << "\n";
        }
}

inline void save_text_image(const std::string& path, const Image& img) {
    std::ofstream out(path);
    if (!out)
        throw IoError("cannot write '" + path + "'");
    write_text_image(out, img);
}

/// Synthetic images: uniform 8-bit pixels, mean-subtracted like CIFAR-10 input. Image i is drawn
/// from its own generator seeded with seed + i.
inline std::vector<std::vector<unsigned char>> random_pixels(std::size_t count, std::uint64_t seed) {
    std::vector<std::vector<unsigned char>> out;
    for (std::size_t i = 0; i < count; ++i) {
        std::mt19937_64 rng(seed + i);
        std::uniform_int_distribution<int> u(0, 255);
        std::vector<unsigned char> px(kPixels);
        for (auto& p : px)
            p = static_cast<unsigned char>(u(rng));
        out.push_back(std::move(px));
    }
    return out;
}

inline std::vector<Image> random_images(std::size_t count, std::uint64_t seed) {
    std::vector<Image> out;
    for (const auto& px : random_pixels(count, seed))
        out.push_back(image_from_bytes(px.data(), -1));
    return out;
}

} // namespace heresnet::resnet
