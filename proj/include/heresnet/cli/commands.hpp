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
#include <cstdint>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <map>
#include <optional>
#include <sstream>
#include <string>
#include <utility>
#include <vector>

#include "json.hpp"

#include "heresnet/approx/io.hpp"
#include "heresnet/approx/lsq.hpp"
#include "heresnet/approx/sign.hpp"
#include "heresnet/bootfail/bootfail.hpp"
#include "heresnet/bootpipe/bootpipe.hpp"
#include "heresnet/common/errors.hpp"
#include "heresnet/heslots/heslots.hpp"
#include "heresnet/polyeval/polyeval.hpp"
#include "heresnet/resnet/resnet.hpp"

// Command implementations behind the heresnet executable. Each command writes its human-readable
// report to a stream and returns normally, or throws one of the library errors; exit_code() maps
// those onto the process exit status.

namespace heresnet::cli {

enum ExitCode : int { kOk = 0, kUsage = 1, kNumerical = 2, kIo = 3 };

inline int exit_code(const std::exception& e) {
    if (dynamic_cast<const IoError*>(&e))
        return kIo;
    if (dynamic_cast<const DomainError*>(&e))
        return kUsage;
    return kNumerical;
}

// ---------------------------------------------------------------------------------------------
// Config files

/// Flat key=value lines. '#' starts a comment; blank lines are skipped; keys are option names
/// without the leading dashes.
inline std::vector<std::pair<std::string, std::string>> parse_config(std::istream& in,
                                                                     const std::string& name = "<config>") {
    auto trim = [](std::string s) {
        const auto b = s.find_first_not_of(" \t\r");
        const auto e = s.find_last_not_of(" \t\r");
        return b == std::string::npos ? std::string() : s.substr(b, e - b + 1);
    };
    std::vector<std::pair<std::string, std::string>> out;
    std::string line;
    int n = 0;
    while (std::getline(in, line)) {
        ++n;
        if (const auto h = line.find('#'); h != std::string::npos)
            line.erase(h);
        line = trim(line);
        if (line.empty())
            continue;
        const auto eq = line.find('=');
        if (eq == std::string::npos)
            throw DomainError(name + ":" + std::to_string(n) + ": expected key=value");
        std::string key = trim(line.substr(0, eq)), value = trim(line.substr(eq + 1));
        while (!key.empty() && key.front() == '-')
            key.erase(key.begin());
        if (key.empty())
            throw DomainError(name + ":" + std::to_string(n) + ": empty key");
        out.emplace_back(std::move(key), std::move(value));
    }
    return out;
}

inline std::vector<std::pair<std::string, std::string>> load_config(const std::string& path) {
    std::ifstream in(path);
    if (!in)
        throw IoError("cannot open config '" + path + "'");
    return parse_config(in, path);
}

/// Comma- or space-separated list.
inline std::vector<std::string> split_list(const std::string& s) {
    std::vector<std::string> out;
    std::string cur;
    for (char c : s) {
        if (c == ',' || c == ' ' || c == '\t') {
            if (!cur.empty())
                out.push_back(std::move(cur));
            cur.clear();
        } else {
            cur += c;
        }
    }
    if (!cur.empty())
        out.push_back(std::move(cur));
    return out;
}

inline long parse_long(const std::string& s, const char* what) {
    std::size_t pos = 0;
    long v = 0;
    try {
        v = std::stol(s, &pos);
    } catch (const std::exception&) {
        pos = 0;
    }
    if (pos == 0 || pos != s.size())
        throw DomainError(std::string(what) + ": '" + s + "' is not an integer");
    return v;
}

/// A failure target. Values above 1 are exponents e meaning 2^-e; "2^-e" is accepted too; values
/// in [0, 1] are probabilities.
inline double parse_target(const std::string& s) {
    if (s.rfind("2^", 0) == 0)
        return std::ldexp(1.0, static_cast<int>(parse_long(s.substr(2), "target exponent")));
    std::size_t pos = 0;
    double v = 0;
    try {
        v = std::stod(s, &pos);
    } catch (const std::exception&) {
        pos = 0;
    }
    if (pos == 0 || pos != s.size() || !(v >= 0.0))
        throw DomainError("target '" + s + "' is not a probability or exponent");
    return v > 1.0 ? std::ldexp(1.0, -static_cast<int>(std::lround(v))) : v;
}

inline std::string format_target(double p) {
    if (p > 0.0 && p < 1.0) {
        const double e = std::log2(p);
        if (e == std::round(e))
            return "2^" + std::to_string(static_cast<long>(e));
    }
    std::ostringstream os;
    os << p;
    return os.str();
}

inline std::string fixed(double v, int digits) {
    std::ostringstream os;
    os << std::fixed << std::setprecision(digits) << v;
    return os.str();
}

inline std::string sci(double v, int digits = 3) {
    std::ostringstream os;
    os << std::scientific << std::setprecision(digits) << v;
    return os.str();
}

/// Output directory: an explicit value, else $HERESNET_OUT, else the working directory.
inline std::filesystem::path output_dir(const std::string& explicit_dir) {
    std::string d = explicit_dir;
    if (d.empty())
        if (const char* env = std::getenv("HERESNET_OUT"))
            d = env;
    if (d.empty())
        d = ".";
    std::error_code ec;
    std::filesystem::create_directories(d, ec);
    if (ec)
        throw IoError("cannot create output directory '" + d + "': " + ec.message());
    return d;
}

// ---------------------------------------------------------------------------------------------
// approx-gen

struct ApproxGenArgs {
    std::string target = "sign"; // sign | cos | exp
    int alpha = 13;
    bootpipe::BootParams boot{};
    int degree = 0; // 0 keeps the target's default
    std::string out_dir;
    bool explain = false;
};

inline std::vector<std::string> cmd_approx_gen(const ApproxGenArgs& a, std::ostream& out) {
    const auto dir = output_dir(a.out_dir);
    std::vector<std::string> files;
    auto save = [&](const std::string& name, const approx::MinimaxPoly& p) {
        const auto path = (dir / name).string();
        approx::save_poly(path, p);
        files.push_back(path);
        out << "wrote " << name << "  degree " << p.degree << "  parity " << approx::to_string(p.parity)
            << "  depth " << polyeval::plan(p).depth << "  error " << sci(p.achieved_error) << '\n';
        if (a.explain)
            out << polyeval::plan(p).explain();
    };
    if (a.target == "sign") {
        const auto cs = approx::compose_sign(a.alpha);
        for (std::size_t i = 0; i < cs.stages.size(); ++i)
            save("sign_a" + std::to_string(a.alpha) + "_stage" + std::to_string(i + 1) + ".poly", cs.stages[i]);
        const auto q = approx::measure_sign(cs, cs.gap, std::size_t{1} << 18);
        out << "composite depth " << cs.depth() << "  gap 2^" << fixed(std::log2(cs.gap), 2) << '\n'
            << "max sign error on [gap, 1]  2^" << fixed(std::log2(q.max_sign_error), 2) << '\n'
            << "mean relu error             2^" << fixed(std::log2(q.mean_relu_error), 2) << '\n'
            << "max relu error              2^" << fixed(std::log2(q.max_relu_error), 2) << '\n';
    } else if (a.target == "cos") {
        bootpipe::BootParams p = a.boot;
        if (a.degree > 0)
            p.cos_degree = a.degree;
        const auto poly = bootpipe::build_cos_poly(p);
        save("cos_K" + std::to_string(p.K) + "_eps" + std::to_string(p.eps_exp) + "_deg" +
                 std::to_string(p.cos_degree) + ".poly",
             poly);
        out << "intervals " << poly.domain.intervals().size() << "  double angles " << p.double_angles << '\n';
    } else if (a.target == "exp") {
        const int d = a.degree > 0 ? a.degree : 12;
        const auto poly = approx::exp_poly(d);
        save("exp_deg" + std::to_string(d) + ".poly", poly);
        double m = 0.0;
        for (int i = 0; i <= 4096; ++i) {
            const double x = -1.0 + i / 2048.0;
            m = std::max(m, std::fabs(approx::eval_poly_reference(poly, x) - std::exp(x)));
        }
        out << "max |p(x) - e^x| on [-1, 1]  " << sci(m) << '\n';
    } else {
        throw DomainError("unknown approximation target '" + a.target + "' (sign, cos, exp)");
    }
    return files;
}

// ---------------------------------------------------------------------------------------------
// bootfail-table

struct BootfailTableArgs {
    std::vector<int> hamming{64, 128, 192};
    std::vector<double> targets{0x1p-23, 0x1p-30, 0x1p-40};
    bootfail::TailModel model = bootfail::TailModel::rounded;
    /// (N_b, n): appends, per target, the linear whole-network failure 2 N_b n p at the chosen K.
    std::optional<std::pair<long, long>> network;
};

inline void cmd_bootfail_table(const BootfailTableArgs& a, std::ostream& out) {
    if (a.hamming.empty() || a.targets.empty())
        throw DomainError("bootfail-table needs at least one Hamming weight and one target");
    auto emit = [&](const std::ostringstream& os) {
        std::string s = os.str();
        s.erase(s.find_last_not_of(' ') + 1);
        out << s << '\n';
    };
    out << "# K such that Pr(|I| >= K) <= target, model " << bootfail::to_string(a.model) << '\n';
    std::ostringstream head;
    head << std::left << std::setw(10) << "target";
    for (int h : a.hamming)
        head << std::setw(10) << ("h=" + std::to_string(h));
    if (a.network)
        for (int h : a.hamming)
            head << std::setw(14) << ("net@h=" + std::to_string(h));
    emit(head);
    for (double t : a.targets) {
        std::ostringstream row;
        row << std::left << std::setw(10) << format_target(t);
        std::vector<int> ks;
        for (int h : a.hamming) {
            ks.push_back(bootfail::choose_K(h, t, a.model));
            row << std::setw(10) << ks.back();
        }
        if (a.network)
            for (std::size_t i = 0; i < ks.size(); ++i) {
                const double p = bootfail::tail_prob(a.hamming[i], ks[i], a.model);
                row << std::setw(14) << sci(bootfail::network_failure(p, a.network->second, a.network->first).linear);
            }
        emit(row);
    }
    if (a.network)
        out << "# net: 2 * N_b * n * p at the chosen K, N_b = " << a.network->first << ", n = " << a.network->second
            << '\n';
}

// ---------------------------------------------------------------------------------------------
// boot-precision

struct BootPrecisionArgs {
    bootpipe::BootParams params{};
    std::size_t trials = 64;
    std::uint64_t seed = 0;
    /// Cosine degrees for a sweep table; empty runs the single configuration.
    std::vector<int> sweep;
};

inline void cmd_boot_precision(const BootPrecisionArgs& a, std::ostream& out) {
    const auto& p = a.params;
    out << "# K " << p.K << "  eps 2^-" << p.eps_exp << "  h " << p.h << "  cos degree " << p.cos_degree
        << "  asin degree " << p.asin_degree << "  double angles " << p.double_angles << "  n " << p.n_coeff
        << "  trials " << a.trials << "  seed " << a.seed << '\n';
    auto row = [&](const bootpipe::PrecisionReport& r) {
        out << std::setw(12) << fixed(r.mean_bits, 3) << std::setw(12) << fixed(r.min_bits, 3) << std::setw(12)
            << sci(r.mean_abs_error) << std::setw(12) << sci(r.max_abs_error) << std::setw(10) << r.raise_failures
            << std::setw(10) << r.flagged << '\n';
    };
    const char* cols = "   mean_bits    min_bits    mean_err     max_err  overflow   flagged\n";
    if (a.sweep.empty()) {
        out << cols;
        row(bootpipe::bootstrap_precision(p, a.trials, a.seed));
        return;
    }
    out << "  degree" << cols;
    for (int d : a.sweep) {
        bootpipe::BootParams q = p;
        q.cos_degree = d;
        out << std::setw(8) << d;
        row(bootpipe::bootstrap_precision(q, a.trials, a.seed));
    }
}

// ---------------------------------------------------------------------------------------------
// Images and weights

/// A CIFAR-10 binary batch, one text image, or a directory of text images (sorted by name).
inline std::vector<resnet::Image> load_images(const std::string& path, std::size_t limit = 0) {
    namespace fs = std::filesystem;
    std::error_code ec;
    if (fs::is_directory(path, ec)) {
        std::vector<std::string> names;
        for (const auto& e : fs::directory_iterator(path))
            if (e.is_regular_file() && e.path().extension() == ".txt")
                names.push_back(e.path().string());
        std::sort(names.begin(), names.end());
        if (limit > 0 && names.size() > limit)
            names.resize(limit);
        std::vector<resnet::Image> out;
        for (const auto& n : names)
            out.push_back(resnet::load_text_image(n));
        return out;
    }
    if (!fs::exists(path, ec))
        throw IoError("image path '" + path + "' does not exist");
    if (fs::path(path).extension() == ".txt")
        return {resnet::load_text_image(path)};
    return resnet::read_cifar_binary(path, limit);
}

struct MakeImagesArgs {
    std::size_t count = 75;
    std::uint64_t seed = 0;
    std::string out_dir;
    std::string format = "cifar"; // cifar | text
};

inline std::string cmd_make_images(const MakeImagesArgs& a, std::ostream& out) {
    if (a.count == 0)
        throw DomainError("make-images needs count >= 1");
    const auto dir = output_dir(a.out_dir);
    const auto px = resnet::random_pixels(a.count, a.seed);
    if (a.format == "cifar") {
        const auto path = (dir / "images.bin").string();
        resnet::write_cifar_binary(path, px, std::vector<int>(a.count, 0));
        out << "wrote " << a.count << " images to images.bin\n";
        return path;
    }
    if (a.format != "text")
        throw DomainError("unknown image format '" + a.format + "' (cifar, text)");
    for (std::size_t i = 0; i < a.count; ++i) {
        char name[32];
        std::snprintf(name, sizeof name, "image_%04zu.txt", i);
        resnet::save_text_image((dir / name).string(), resnet::image_from_bytes(px[i].data(), 0));
    }
    out << "wrote " << a.count << " text images\n";
    return dir.string();
}

struct MakeWeightsArgs {
    std::uint64_t seed = 0;
    std::string out_dir;
    /// Calibration images; empty draws `calib_count` random images from seed + 1.
    std::string calib_images;
    std::size_t calib_count = 16;
    double relu_bound = 40.0;
    double margin = 0.9;
};

inline std::string cmd_make_weights(const MakeWeightsArgs& a, std::ostream& out) {
    const auto g = resnet::NetworkGraph::resnet20();
    auto ws = resnet::random_weights(g, a.seed);
    const auto batch = a.calib_images.empty() ? resnet::random_images(a.calib_count, a.seed + 1)
                                              : load_images(a.calib_images, a.calib_count);
    const auto factors = resnet::calibrate(g, ws, batch, a.relu_bound, a.margin);
    const auto dir = output_dir(a.out_dir);
    resnet::save_weights(dir.string(), ws, g);
    out << "calibrated on " << batch.size() << " images, bound " << a.relu_bound << ", margin " << a.margin << '\n';
    for (const auto& [name, f] : factors)
        out << "  " << std::left << std::setw(12) << name << ' ' << sci(f, 4) << '\n';
    out << "wrote manifest.json\n";
    return (dir / "manifest.json").string();
}

// ---------------------------------------------------------------------------------------------
// infer / agree

struct InferArgs {
    std::string weights;
    std::string images;
    std::size_t index = 0; // image within the set (infer only)
    std::size_t limit = 0; // agree: 0 uses every image
    heslots::SimConfig sim{};
    resnet::InferOptions infer{};
    /// Calibrate the loaded weights on the evaluated images before running.
    bool calibrate = false;
    double margin = 0.9;
    std::string jsonl;   // record stream path; empty disables
    std::ostream* trace = nullptr;
};

inline nlohmann::json counters_json(const heslots::EvalCounter& c) {
    return {{"bootstraps", c.bootstraps},
            {"conjugations", c.conjugations},
            {"mults_cipher", c.mults_cipher},
            {"mults_plain", c.mults_plain},
            {"relinearizations", c.relinearizations},
            {"relinearizations_deferred", c.relinearizations_deferred},
            {"rescalings", c.rescalings},
            {"rotations", c.rotations}};
}

inline nlohmann::json report_json(const resnet::InferenceReport& r, std::size_t index) {
    return {{"image", index},
            {"label", r.label},
            {"oracle_label", r.oracle_label},
            {"agreement", r.agreement},
            {"max_logit_deviation", r.max_logit_deviation},
            {"logits", r.logits},
            {"oracle_logits", r.oracle_logits},
            {"probs", r.probs},
            {"oracle_probs", r.oracle_probs},
            {"counters", counters_json(r.counters)},
            {"relu_calls", r.relu_calls},
            {"relu_bootstraps", r.relu_bootstraps},
            {"softmax_bootstraps", r.softmax_bootstraps},
            {"placed_bootstraps", r.placements.size()},
            {"warnings", r.warnings}};
}

/// Wilson score interval for k successes in n trials.
inline std::pair<double, double> wilson_interval(std::size_t k, std::size_t n, double z = 1.959963984540054) {
    if (n == 0)
        throw DomainError("wilson interval of zero trials");
    const double p = static_cast<double>(k) / static_cast<double>(n), nn = static_cast<double>(n);
    const double d = 1.0 + z * z / nn;
    const double c = (p + z * z / (2 * nn)) / d;
    const double h = z * std::sqrt(p * (1 - p) / nn + z * z / (4 * nn * nn)) / d;
    return {std::max(0.0, c - h), std::min(1.0, c + h)};
}

struct AgreeSummary {
    std::size_t images = 0, agreed = 0;
    double low = 0, high = 0;
    double max_logit_deviation = 0;
    heslots::EvalCounter totals;
    std::map<std::string, std::size_t> warning_kinds;
    std::size_t images_with_warnings = 0;
    double percent() const { return images ? 100.0 * static_cast<double>(agreed) / static_cast<double>(images) : 0; }
};

namespace detail {

inline resnet::WeightSet prepared_weights(const InferArgs& a, const resnet::NetworkGraph& g,
                                          const std::vector<resnet::Image>& imgs, std::ostream& out) {
    if (a.weights.empty())
        throw DomainError("--weights is required");
    auto ws = resnet::load_weights(a.weights, g);
    if (a.calibrate) {
        resnet::calibrate(g, ws, imgs, a.infer.relu_bound, a.margin);
        out << "calibrated weights on " << imgs.size() << " evaluation images\n";
    }
    return ws;
}

inline resnet::InferenceReport run_one(const InferArgs& a, const resnet::Image& img, const resnet::WeightSet& ws,
                                       const resnet::NetworkGraph& g, std::uint64_t seed) {
    heslots::SimConfig sim = a.sim;
    sim.seed = seed;
    heslots::Evaluator ev(sim);
    ev.set_trace(a.trace);
    return resnet::infer(ev, img, ws, g, a.infer);
}

inline std::ofstream open_jsonl(const std::string& path) {
    std::ofstream f(path, std::ios::binary);
    if (!f)
        throw IoError("cannot write '" + path + "'");
    return f;
}

} // namespace detail

inline resnet::InferenceReport cmd_infer(const InferArgs& a, std::ostream& out) {
    if (a.images.empty())
        throw DomainError("--images is required");
    const auto g = resnet::NetworkGraph::resnet20();
    const auto all = load_images(a.images, a.index + 1);
    if (a.index >= all.size())
        throw DomainError("image index " + std::to_string(a.index) + " out of range (" + std::to_string(all.size()) +
                          " images)");
    const std::vector<resnet::Image> one{all[a.index]};
    const auto ws = detail::prepared_weights(a, g, one, out);
    const auto r = detail::run_one(a, one.front(), ws, g, a.sim.seed);
    out << "image " << a.index << "  fidelity " << heslots::to_string(a.sim.fidelity)
        << (a.infer.exact_activations ? "  exact activations" : "") << '\n'
        << "label " << r.label << "  oracle " << r.oracle_label << (r.agreement ? "  agree" : "  DISAGREE") << '\n'
        << "max logit deviation " << sci(r.max_logit_deviation) << '\n'
        << "logits";
    for (double v : r.logits)
        out << ' ' << fixed(v, 6);
    out << "\nprobs ";
    for (double v : r.probs)
        out << ' ' << fixed(v, 6);
    const auto& c = r.counters;
    out << "\nbootstraps " << c.bootstraps << " (relu " << r.relu_bootstraps << ", softmax " << r.softmax_bootstraps
        << ", placed " << r.placements.size() << ")  rotations " << c.rotations << "  mults " << c.mults_cipher
        << " cipher / " << c.mults_plain << " plain  rescalings " << c.rescalings << '\n'
        << "warnings " << r.warnings.size() << '\n';
    for (const auto& w : r.warnings)
        out << "  " << w << '\n';
    if (!a.jsonl.empty()) {
        auto f = detail::open_jsonl(a.jsonl);
        f << report_json(r, a.index).dump() << '\n';
    }
    return r;
}

inline AgreeSummary cmd_agree(const InferArgs& a, std::ostream& out) {
    if (a.images.empty())
        throw DomainError("--images is required");
    const auto g = resnet::NetworkGraph::resnet20();
    const auto imgs = load_images(a.images, a.limit);
    if (imgs.empty())
        throw DomainError("agreement needs at least one image");
    const auto ws = detail::prepared_weights(a, g, imgs, out);
    std::optional<std::ofstream> f;
    if (!a.jsonl.empty())
        f = detail::open_jsonl(a.jsonl);
    AgreeSummary s;
    for (std::size_t i = 0; i < imgs.size(); ++i) {
        const auto r = detail::run_one(a, imgs[i], ws, g, a.sim.seed + i);
        ++s.images;
        s.agreed += r.agreement ? 1 : 0;
        s.max_logit_deviation = std::max(s.max_logit_deviation, r.max_logit_deviation);
        s.totals += r.counters;
        if (!r.warnings.empty())
            ++s.images_with_warnings;
        for (const auto& w : r.warnings)
            ++s.warning_kinds[w.substr(0, w.find(':'))];
        if (f)
            *f << report_json(r, i).dump() << '\n';
    }
    std::tie(s.low, s.high) = wilson_interval(s.agreed, s.images);
    out << "images " << s.images << "  fidelity " << heslots::to_string(a.sim.fidelity)
        << (a.infer.exact_activations ? "  exact activations" : "") << '\n'
        << "agreement " << s.agreed << "/" << s.images << " = " << fixed(s.percent(), 2) << "%  (95% Wilson "
        << fixed(100 * s.low, 2) << "% .. " << fixed(100 * s.high, 2) << "%)\n"
        << "max logit deviation " << sci(s.max_logit_deviation) << '\n'
        << "totals  bootstraps " << s.totals.bootstraps << "  rotations " << s.totals.rotations << "  mults "
        << s.totals.mults_cipher << " cipher / " << s.totals.mults_plain << " plain  rescalings "
        << s.totals.rescalings << '\n'
        << "images with range warnings " << s.images_with_warnings << '\n';
    for (const auto& [k, n] : s.warning_kinds)
        out << "  " << k << "  " << n << '\n';
    return s;
}

} // namespace heresnet::cli
