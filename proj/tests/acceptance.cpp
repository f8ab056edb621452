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

// Acceptance run: one PASS/FAIL line per criterion, exit status 1 if any fails.
// Usage: acceptance [criterion numbers...]   (default: all ten)

#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iostream>
#include <random>
#include <set>
#include <sstream>
#include <string>
#include <tuple>
#include <vector>

#include "heresnet/cli/commands.hpp"

using namespace heresnet;
using namespace heresnet::resnet;
namespace fs = std::filesystem;

namespace {

struct Outcome {
    bool pass = false;
    std::string detail;
};

std::string fmt(const char* f, double v) {
    char buf[64];
    std::snprintf(buf, sizeof buf, f, v);
    return buf;
}

std::string log2s(double v) { return v > 0 ? "2^" + fmt("%.2f", std::log2(v)) : "0"; }

// 1. Composite sign degrees and grid error on +-[2^-13, 1].
Outcome composite_sign() {
    const auto& cs = default_sign();
    const bool degrees = cs.degrees() == std::vector<int>{15, 15, 27};
    // The grid visits x >= 0; stages are odd so the negative half mirrors it.
    const auto q = approx::measure_sign(cs, std::ldexp(1.0, -13), std::size_t{1} << 21);
    const bool ok = q.max_sign_error <= std::ldexp(1.0, -13);
    std::ostringstream os;
    os << "degrees " << cs.stages[0].degree << "/" << cs.stages[1].degree << "/" << cs.stages[2].degree
       << ", max error on [2^-13, 1] " << log2s(q.max_sign_error) << " (limit 2^-13; fitted gap "
       << log2s(cs.gap) << ")";
    return {degrees && ok, os.str()};
}

// 2. Mean ReLU error over 10^6 uniform samples.
Outcome relu_precision() {
    const auto& cs = default_sign();
    std::mt19937_64 rng(2);
    std::uniform_real_distribution<double> u(-1.0, 1.0);
    const int n = 1000000;
    long double acc = 0;
    for (int i = 0; i < n; ++i) {
        const double x = u(rng);
        acc += std::fabs(approx::relu_from_sign(cs, x) - std::max(x, 0.0));
    }
    const double mean = static_cast<double>(acc / n);
    return {mean <= std::ldexp(1.0, -16), "mean |approx - relu| " + log2s(mean) + " (limit 2^-16)"};
}

// 3. Reference K table: choose_K within +-1 under the default model; count exact matches of the other model.
Outcome k_table() {
    const int hs[3] = {64, 128, 192}, es[3] = {23, 30, 40};
    const int table[3][3] = {{12, 17, 21}, {14, 20, 24}, {16, 23, 28}};
    int within = 0, exact_default = 0, exact_alt = 0;
    for (int r = 0; r < 3; ++r)
        for (int c = 0; c < 3; ++c) {
            const double p = std::ldexp(1.0, -es[r]);
            const int k = bootfail::choose_K(hs[c], p, bootfail::TailModel::rounded);
            const int k_alt = bootfail::choose_K(hs[c], p, bootfail::TailModel::exceed);
            within += std::abs(k - table[r][c]) <= 1;
            exact_default += k == table[r][c];
            exact_alt += k_alt == table[r][c];
        }
    std::ostringstream os;
    os << within << "/9 within +-1 (rounded model exact " << exact_default << "/9, exceed model exact "
       << exact_alt << "/9)";
    return {within == 9, os.str()};
}

// 4. Exact vs linear network failure, and Monte-Carlo tails vs the analytic tail.
Outcome failure_formula() {
    double worst = 0.0;
    for (long nb : {1L, 22L, 1149L, 100000L})
        for (long n : {1L, 1024L, 32768L})
            for (int e = 10; e <= 60; ++e) {
                const double p = std::ldexp(1.0, -e);
                if (2.0 * nb * n * p > 0.01)
                    continue;
                const auto f = bootfail::network_failure(p, n, nb);
                worst = std::max(worst, std::fabs(f.relative_difference()));
            }
    const std::uint64_t draws = std::uint64_t{1} << 30;
    const int h = 64;
    const auto hist = bootpipe::overflow_histogram(h, draws, 4);
    double worst_se = 0.0;
    int checked = 0;
    for (int K = 1; K <= h / 2; ++K) {
        const double p = bootfail::tail_prob(h, K);
        if (p < std::ldexp(1.0, -20))
            break;
        const double se = std::sqrt(p * (1 - p) / static_cast<double>(draws));
        worst_se = std::max(worst_se, std::fabs(bootpipe::tail_fraction(hist, K) - p) / se);
        ++checked;
    }
    std::ostringstream os;
    os << "max relative gap exact/linear " << fmt("%.3g", worst) << " (limit 0.01); " << checked
       << " Monte-Carlo tails over 2^30 draws, worst " << fmt("%.2f", worst_se) << " SE (limit 3)";
    return {worst < 0.01 && worst_se <= 3.0 && checked > 0, os.str()};
}

// 5. Bootstrap pipeline precision over 10^4 trials.
Outcome boot_precision() {
    bootpipe::BootParams p;
    p.K = 17;
    p.eps_exp = 6;
    p.cos_degree = 54;
    p.asin_degree = 5;
    p.double_angles = 2;
    p.n_coeff = 2048;
    const auto r = bootpipe::bootstrap_precision(p, 10000, 5);
    std::ostringstream os;
    os << "mean " << fmt("%.2f", r.mean_bits) << " bits, min " << fmt("%.2f", r.min_bits) << " bits over "
       << r.trials << " trials (limit 16); overflow " << r.raise_failures;
    return {r.mean_bits >= 16.0, os.str()};
}

// 6. Every distinct conv shape of the network against the nested-loop oracle; stride-2 rotations.
Outcome conv_equivalence() {
    const auto g = NetworkGraph::resnet20();
    std::mt19937_64 rng(6);
    std::uniform_real_distribution<double> u(-1.0, 1.0);
    std::set<std::tuple<int, int, int, int, int, int>> seen;
    double worst = 0.0;
    bool zeros = true, rotations = true;
    for (const auto* l : g.convs()) {
        if (!seen.insert({l->in_ch, l->out_ch, l->k, l->stride, l->in_layout.gap, l->in_layout.size}).second)
            continue;
        Tensor x(l->in_ch, l->in_layout.size);
        for (auto& v : x.v)
            v = u(rng);
        ConvWeights w{l->out_ch, l->in_ch, l->k, std::vector<double>(static_cast<std::size_t>(l->out_ch * l->in_ch *
                                                                                             l->k * l->k))};
        for (auto& v : w.w)
            v = u(rng);
        auto encrypt = [&](heslots::Evaluator& ev) {
            std::vector<heslots::CipherVec> in;
            for (int c = 0; c < x.channels; ++c) {
                std::vector<double> s(kBlock, 0.0);
                for (int i = 0; i < x.size; ++i)
                    for (int j = 0; j < x.size; ++j)
                        s[l->in_layout.slot(i, j)] = x.at(c, i, j);
                in.push_back(ev.encrypt(s));
            }
            return in;
        };
        heslots::Evaluator ev;
        const auto out = conv_siso(ev, encrypt(ev), w, l->in_layout, l->stride);
        const Tensor ref = conv2d(x, w, l->stride);
        const auto valid = l->out_layout.valid_slots();
        const std::set<std::size_t> vs(valid.begin(), valid.end());
        double err = 0.0;
        for (int c = 0; c < ref.channels; ++c) {
            const auto s = ev.decrypt(out[static_cast<std::size_t>(c)]);
            for (std::size_t k = 0; k < kBlock; ++k)
                if (!vs.count(k) && s[k] != 0.0)
                    zeros = false;
            for (int i = 0; i < ref.size; ++i)
                for (int j = 0; j < ref.size; ++j)
                    err = std::max(err, std::fabs(s[l->out_layout.slot(i, j)] - ref.at(c, i, j)));
        }
        worst = std::max(worst, err / ref.max_abs());
        if (l->stride == 2) {
            heslots::Evaluator e1;
            conv_siso(e1, encrypt(e1), w, l->in_layout, 1);
            rotations = rotations && e1.counters().rotations == ev.counters().rotations;
        }
    }
    std::ostringstream os;
    os << seen.size() << " shapes, worst relative error " << fmt("%.3g", worst) << " (limit 1e-6)"
       << (zeros ? "" : ", nonzero invalid slots") << ", stride-2 rotations "
       << (rotations ? "equal to stride-1" : "DIFFER from stride-1");
    return {worst <= 1e-6 && zeros && rotations && seen.size() == 8, os.str()};
}

struct NetworkSetup {
    NetworkGraph g = NetworkGraph::resnet20();
    std::vector<Image> images;
    WeightSet ws;
};

// Random weights calibrated on the evaluation images themselves.
const NetworkSetup& network_setup() {
    static const NetworkSetup s = [] {
        NetworkSetup n;
        n.images = random_images(75, 1000);
        n.ws = random_weights(n.g, 7);
        calibrate(n.g, n.ws, n.images, 40.0);
        return n;
    }();
    return s;
}

// 7. Full graph at exact fidelity with the approximations on.
Outcome level_budget() {
    const auto& n = network_setup();
    heslots::Evaluator ev;
    InferenceReport r;
    try {
        r = infer(ev, n.images.front(), n.ws, n.g);
    } catch (const LevelUnderflow& e) {
        return {false, std::string("level underflow: ") + e.what()};
    }
    const bool two_each = r.relu_bootstraps == 2u * static_cast<std::uint64_t>(r.relu_calls);
    std::ostringstream os;
    os << "no level underflow; " << r.relu_calls << " ReLU evaluations, " << r.relu_bootstraps
       << " bootstraps in ReLU (" << (two_each ? "2 each" : "NOT 2 each") << "); total " << r.counters.bootstraps
       << " bootstraps (ReLU " << r.relu_bootstraps << ", softmax " << r.softmax_bootstraps << ", other "
       << r.counters.bootstraps - r.relu_bootstraps - r.softmax_bootstraps << ") vs 1149+22 = 1171 (informational)";
    return {two_each && r.relu_calls > 0, os.str()};
}

// 8. Agreement over 75 images at exact and quantized fidelity.
Outcome agreement() {
    const auto& n = network_setup();
    int agree_e = 0, agree_q = 0;
    double dev_e = 0.0, dev_q = 0.0;
    std::size_t warned = 0;
    for (std::size_t i = 0; i < n.images.size(); ++i) {
        heslots::Evaluator ev;
        const auto r = infer(ev, n.images[i], n.ws, n.g);
        agree_e += r.agreement;
        dev_e = std::max(dev_e, r.max_logit_deviation);
        heslots::SimConfig q;
        q.fidelity = heslots::Fidelity::quantized;
        q.seed = 500 + i;
        heslots::Evaluator evq(q);
        const auto rq = infer(evq, n.images[i], n.ws, n.g);
        agree_q += rq.agreement;
        dev_q = std::max(dev_q, rq.max_logit_deviation);
        warned += !r.warnings.empty() || !rq.warnings.empty();
    }
    const double N = static_cast<double>(n.images.size());
    const double pe = 100.0 * agree_e / N, pq = 100.0 * agree_q / N;
    const auto [lo, hi] = cli::wilson_interval(static_cast<std::size_t>(agree_e), n.images.size());
    std::ostringstream os;
    os << "exact " << agree_e << "/" << n.images.size() << " = " << fmt("%.2f", pe) << "% (Wilson 95% "
       << fmt("%.2f", 100 * lo) << ".." << fmt("%.2f", 100 * hi) << "), quantized " << agree_q << "/"
       << n.images.size() << " = " << fmt("%.2f", pq) << "%; max logit deviation " << fmt("%.3g", dev_e) << " / "
       << fmt("%.3g", dev_q) << " (limit 1e-2); images with warnings " << warned;
    return {pe >= 98.0 && dev_e <= 1e-2 && dev_q <= 1e-2 && pe - pq <= 2.0, os.str()};
}

// 9. Softmax on the cipher path.
Outcome softmax_check() {
    auto run = [](heslots::Evaluator& ev, const std::vector<double>& x) {
        std::vector<double> s(kBlock, 0.0);
        std::copy(x.begin(), x.end(), s.begin());
        const auto p = ev.decrypt(softmax(ev, ev.encrypt(s), SoftmaxParams{}));
        return std::vector<double>(p.begin(), p.begin() + 10);
    };
    heslots::Evaluator ev;
    double sym = 0.0;
    for (double c : {-40.0, -12.5, 0.0, 3.0, 40.0})
        for (double v : run(ev, std::vector<double>(10, c)))
            sym = std::max(sym, std::fabs(v - 0.1));
    std::mt19937_64 rng(9);
    std::uniform_real_distribution<double> u(-40.0, 40.0);
    int kept = 0;
    const int trials = 1000;
    for (int t = 0; t < trials; ++t) {
        std::vector<double> x(10);
        for (auto& v : x)
            v = u(rng);
        kept += argmax(run(ev, x)) == argmax(tempered_softmax(x));
    }
    std::ostringstream os;
    os << "symmetric input max |p - 0.1| " << fmt("%.3g", sym) << " (limit 1e-3); argmax kept " << kept << "/"
       << trials;
    return {sym <= 1e-3 && kept == trials, os.str()};
}

// 10. Every command twice with the same seed and config.
Outcome determinism() {
    const auto root = fs::temp_directory_path() / "heresnet_acceptance";
    fs::remove_all(root);
    auto slurp_dir = [](const fs::path& d) {
        std::vector<std::pair<std::string, std::string>> files;
        for (const auto& e : fs::recursive_directory_iterator(d))
            if (e.is_regular_file()) {
                std::ifstream in(e.path(), std::ios::binary);
                std::stringstream ss;
                ss << in.rdbuf();
                files.emplace_back(fs::relative(e.path(), d).string(), ss.str());
            }
        std::sort(files.begin(), files.end());
        return files;
    };
    std::vector<std::string> differing;
    auto check = [&](const std::string& name, const std::function<void(const fs::path&, std::ostream&)>& cmd) {
        std::ostringstream o1, o2;
        const auto d1 = root / (name + "_1"), d2 = root / (name + "_2");
        fs::create_directories(d1);
        fs::create_directories(d2);
        cmd(d1, o1);
        cmd(d2, o2);
        if (o1.str() != o2.str() || slurp_dir(d1) != slurp_dir(d2))
            differing.push_back(name);
    };
    check("bootfail-table", [](const fs::path&, std::ostream& os) {
        cli::BootfailTableArgs a;
        a.network = std::make_pair(1149L, 1024L);
        cli::cmd_bootfail_table(a, os);
    });
    check("boot-precision", [](const fs::path&, std::ostream& os) {
        cli::BootPrecisionArgs a;
        a.trials = 2;
        a.seed = 7;
        cli::cmd_boot_precision(a, os);
    });
    check("approx-gen", [](const fs::path& d, std::ostream& os) {
        cli::ApproxGenArgs a;
        a.out_dir = d.string();
        cli::cmd_approx_gen(a, os);
        a.target = "exp";
        cli::cmd_approx_gen(a, os);
    });
    check("make-images", [](const fs::path& d, std::ostream& os) {
        cli::MakeImagesArgs a;
        a.count = 3;
        a.seed = 5;
        a.out_dir = d.string();
        cli::cmd_make_images(a, os);
    });
    check("make-weights", [](const fs::path& d, std::ostream& os) {
        cli::MakeWeightsArgs a;
        a.seed = 5;
        a.calib_count = 2;
        a.out_dir = d.string();
        cli::cmd_make_weights(a, os);
    });
    // Serial against two workers: the per-channel merge order fixes the result.
    int run = 0;
    check("infer+agree", [&](const fs::path& d, std::ostream& os) {
        cli::MakeImagesArgs mi;
        mi.count = 2;
        mi.seed = 31;
        mi.out_dir = (d / "img").string();
        const auto images = cli::cmd_make_images(mi, os);
        cli::MakeWeightsArgs mw;
        mw.seed = 32;
        mw.calib_images = images;
        mw.out_dir = (d / "w").string();
        cli::cmd_make_weights(mw, os);
        cli::InferArgs a;
        a.weights = mw.out_dir;
        a.images = images;
        a.sim.fidelity = heslots::Fidelity::quantized;
        a.sim.seed = 33;
        a.infer.threads = ++run;
        a.jsonl = (d / "agree.jsonl").string();
        cli::cmd_agree(a, os);
        a.jsonl = (d / "infer.jsonl").string();
        cli::cmd_infer(a, os);
    });
    fs::remove_all(root);
    std::string detail = "7 commands rerun with identical seed and config";
    if (differing.empty())
        detail += ": reports and files byte-identical (infer and agree also across 1 and 2 threads)";
    else
        for (const auto& d : differing)
            detail += "; " + d + " DIFFERS";
    return {differing.empty(), detail};
}

struct Criterion {
    int id;
    const char* name;
    double limit_s; // runtime limit; 0 means none
    Outcome (*run)();
};

} // namespace

int main(int argc, char** argv) {
    const std::vector<Criterion> all = {
        {1, "composite sign quality", 120, composite_sign},
        {2, "ReLU precision", 60, relu_precision},
        {3, "failure table reproduction", 60, k_table},
        {4, "failure-formula consistency", 600, failure_formula},
        {5, "bootstrap pipeline precision", 600, boot_precision},
        {6, "convolution oracle equivalence", 300, conv_equivalence},
        {7, "level-budget soundness", 1800, level_budget},
        {8, "end-to-end agreement", 3 * 3600, agreement},
        {9, "softmax", 60, softmax_check},
        {10, "determinism", 0, determinism},
    };
    std::set<int> want;
    for (int i = 1; i < argc; ++i)
        want.insert(std::atoi(argv[i]));
    int failed = 0;
    for (const auto& c : all) {
        if (!want.empty() && !want.count(c.id))
            continue;
        const auto t0 = std::chrono::steady_clock::now();
        Outcome o;
        try {
            o = c.run();
        } catch (const std::exception& e) {
            o = {false, std::string("error: ") + e.what()};
        }
        const double s = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
        const bool in_time = c.limit_s <= 0 || s <= c.limit_s;
        const bool pass = o.pass && in_time;
        failed += !pass;
        std::cout << (pass ? "PASS" : "FAIL") << "  " << c.id << ". " << c.name << ": " << o.detail << " ["
                  << fmt("%.1f", s) << " s" << (c.limit_s > 0 ? ", limit " + fmt("%.0f", c.limit_s) + " s" : "")
                  << (in_time ? "" : ", TOO SLOW") << "]" << std::endl;
    }
    return failed == 0 ? 0 : 1;
}
