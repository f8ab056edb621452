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

// heresnet command-line driver.
//
// Exit status: 0 success, 1 usage error, 2 numerical failure, 3 I/O error.
// --config FILE reads key=value lines; each becomes --key=value ahead of the command-line flags,
// so flags given on the command line win.

#include <algorithm>
#include <fstream>
#include <iostream>
#include <memory>
#include <string>
#include <vector>

#include "CLI11.hpp"

#include "heresnet/cli/commands.hpp"

namespace {

using namespace heresnet;

const std::vector<std::string> kCommands = {"approx-gen", "bootfail-table", "boot-precision", "infer",
                                            "agree",      "make-weights",   "make-images"};

/// Splices config-file entries in after the subcommand name and strips --config.
std::vector<std::string> expand_config(int argc, char** argv) {
    std::vector<std::string> args(argv + 1, argv + argc), rest;
    std::string config;
    for (std::size_t i = 0; i < args.size(); ++i) {
        if (args[i] == "--config") {
            if (i + 1 >= args.size())
                throw CLI::ArgumentMismatch("--config needs a file name");
            config = args[++i];
        } else if (args[i].rfind("--config=", 0) == 0) {
            config = args[i].substr(9);
        } else {
            rest.push_back(args[i]);
        }
    }
    if (config.empty())
        return rest;
    std::vector<std::string> extra;
    for (const auto& [k, v] : cli::load_config(config))
        extra.push_back("--" + k + "=" + v);
    auto it = std::find_first_of(rest.begin(), rest.end(), kCommands.begin(), kCommands.end());
    if (it == rest.end())
        throw CLI::RequiredError("a command is required with --config");
    rest.insert(it + 1, extra.begin(), extra.end());
    return rest;
}

void add_boot_params(CLI::App* c, bootpipe::BootParams& p) {
    c->add_option("--K", p.K, "integer range of the modular reduction")->capture_default_str();
    c->add_option("--eps-exp", p.eps_exp, "interval half-width 2^-e")->capture_default_str();
    c->add_option("--hamming", p.h, "secret Hamming weight")->capture_default_str();
    c->add_option("--cos-degree", p.cos_degree, "cosine polynomial degree")->capture_default_str();
    c->add_option("--asin-degree", p.asin_degree, "arcsine polynomial degree (odd)")->capture_default_str();
    c->add_option("--double-angles", p.double_angles, "double-angle steps")->capture_default_str();
    c->add_option("--n", p.n_coeff, "ring degree of the precision simulation")->capture_default_str();
}

struct InferFlags {
    cli::InferArgs args;
    std::string fidelity = "exact";
    std::string trace_path, out_dir;
    CLI::Option* seed = nullptr;
};

void add_infer_flags(CLI::App* c, InferFlags& f) {
    auto& a = f.args;
    c->add_option("--weights", a.weights, "weight manifest or its directory")->required();
    c->add_option("--images", a.images, "CIFAR-10 binary batch, text image, or directory of text images")
        ->required();
    c->add_option("--fidelity", f.fidelity, "exact or quantized")->capture_default_str();
    c->add_option("--quantize-bits", a.sim.quantize_bits, "fractional bits kept by encoding")->capture_default_str();
    c->add_option("--noise-bits", a.sim.bootstrap_noise_bits, "bootstrap output precision in bits")
        ->capture_default_str();
    f.seed = c->add_option("--seed", a.sim.seed, "noise seed (required for quantized runs)");
    c->add_option("--relu-bound", a.infer.relu_bound, "ReLU input bound B")->capture_default_str();
    c->add_option("--softmax-prescale", a.infer.softmax.prescale, "sum scaling before the inverse (0: automatic)")
        ->capture_default_str();
    c->add_flag("--exact-activations", a.infer.exact_activations, "evaluate ReLU and softmax exactly");
    c->add_option("--threads", a.infer.threads, "worker threads for per-channel work")->capture_default_str();
    c->add_option("--trace", f.trace_path, "write one line per homomorphic operation to FILE ('-' for stderr)");
    c->add_flag("--calibrate", a.calibrate, "rescale the weights on the evaluated images first");
    c->add_option("--margin", a.margin, "calibration margin")->capture_default_str();
    c->add_option("--jsonl", a.jsonl, "record stream path (default OUT/<command>.jsonl)");
    c->add_option("--out", f.out_dir, "output directory (default $HERESNET_OUT or .)");
}

/// Resolves the parsed strings; returns the trace stream to keep alive.
std::unique_ptr<std::ofstream> finish_infer_flags(InferFlags& f, const char* command) {
    auto& a = f.args;
    a.sim.fidelity = heslots::parse_fidelity(f.fidelity);
    if (a.sim.fidelity == heslots::Fidelity::quantized && f.seed->count() == 0)
        throw DomainError("--seed is required for quantized runs");
    if (a.jsonl.empty())
        a.jsonl = (cli::output_dir(f.out_dir) / (std::string(command) + ".jsonl")).string();
    std::unique_ptr<std::ofstream> trace;
    if (f.trace_path == "-") {
        a.trace = &std::cerr;
    } else if (!f.trace_path.empty()) {
        trace = std::make_unique<std::ofstream>(f.trace_path);
        if (!*trace)
            throw IoError("cannot write trace '" + f.trace_path + "'");
        a.trace = trace.get();
    }
    return trace;
}

} // namespace

int main(int argc, char** argv) {
    CLI::App app{"Simulated homomorphic ResNet-20 inference and its approximation toolkit"};
    app.require_subcommand(1);
    app.option_defaults()->multi_option_policy(CLI::MultiOptionPolicy::TakeLast);
    std::string config_unused;
    app.add_option("--config", config_unused, "key=value file; command-line flags override it");

    cli::ApproxGenArgs gen;
    auto* c_gen = app.add_subcommand("approx-gen", "fit and write approximation polynomials");
    c_gen->add_option("--target", gen.target, "sign, cos or exp")->capture_default_str();
    c_gen->add_option("--alpha", gen.alpha, "sign precision")->capture_default_str();
    c_gen->add_option("--K", gen.boot.K, "cos: integer range")->capture_default_str();
    c_gen->add_option("--eps-exp", gen.boot.eps_exp, "cos: interval half-width 2^-e")->capture_default_str();
    c_gen->add_option("--double-angles", gen.boot.double_angles, "cos: double-angle steps")->capture_default_str();
    c_gen->add_option("--degree", gen.degree, "polynomial degree (0: target default)")->capture_default_str();
    c_gen->add_option("--out", gen.out_dir, "output directory (default $HERESNET_OUT or .)");
    c_gen->add_flag("--explain", gen.explain, "print the evaluation plan of each polynomial");

    cli::BootfailTableArgs table;
    std::string hamming = "64,128,192", targets = "23,30,40", model = "rounded";
    std::vector<long> network;
    auto* c_table = app.add_subcommand("bootfail-table", "choose K per Hamming weight and failure target");
    c_table->add_option("--hamming", hamming, "Hamming weights")->capture_default_str();
    c_table->add_option("--targets", targets, "targets: e > 1 means 2^-e, otherwise a probability")
        ->capture_default_str();
    c_table->add_option("--model", model, "tail model: rounded or exceed")->capture_default_str();
    c_table->add_option("--network", network, "N_b n: append the linear network failure 2 N_b n p")
        ->expected(2);

    cli::BootPrecisionArgs prec;
    std::string sweep;
    auto* c_prec = app.add_subcommand("boot-precision", "measure bootstrap precision by simulation");
    add_boot_params(c_prec, prec.params);
    c_prec->add_option("--trials", prec.trials, "ciphertexts simulated")->capture_default_str();
    c_prec->add_option("--seed", prec.seed, "simulation seed")->required();
    c_prec->add_option("--sweep", sweep, "cosine degrees for a sweep table");

    InferFlags inf, agr;
    auto* c_infer = app.add_subcommand("infer", "run one image through the encrypted network");
    add_infer_flags(c_infer, inf);
    c_infer->add_option("--index", inf.args.index, "image index within the set")->capture_default_str();
    auto* c_agree = app.add_subcommand("agree", "agreement of encrypted and plain inference over an image set");
    add_infer_flags(c_agree, agr);
    c_agree->add_option("--limit", agr.args.limit, "images used (0: all)")->capture_default_str();

    cli::MakeWeightsArgs mw;
    auto* c_mw = app.add_subcommand("make-weights", "random calibrated ResNet-20 weights");
    c_mw->add_option("--seed", mw.seed, "weight seed")->required();
    c_mw->add_option("--out", mw.out_dir, "output directory (default $HERESNET_OUT or .)");
    c_mw->add_option("--calib-images", mw.calib_images, "calibration images (default: random)");
    c_mw->add_option("--calib-count", mw.calib_count, "calibration images used")->capture_default_str();
    c_mw->add_option("--relu-bound", mw.relu_bound, "ReLU input bound B")->capture_default_str();
    c_mw->add_option("--margin", mw.margin, "fraction of B targeted")->capture_default_str();

    cli::MakeImagesArgs mi;
    auto* c_mi = app.add_subcommand("make-images", "random mean-subtracted 32x32x3 images");
    c_mi->add_option("--count", mi.count, "number of images")->capture_default_str();
    c_mi->add_option("--seed", mi.seed, "pixel seed")->required();
    c_mi->add_option("--out", mi.out_dir, "output directory (default $HERESNET_OUT or .)");
    c_mi->add_option("--format", mi.format, "cifar or text")->capture_default_str();

    try {
        auto args = expand_config(argc, argv);
        std::reverse(args.begin(), args.end());
        app.parse(args);
    } catch (const CLI::ParseError& e) {
        return app.exit(e) == 0 ? cli::kOk : cli::kUsage;
    } catch (const std::exception& e) {
        std::cerr << "heresnet: " << e.what() << '\n';
        return cli::exit_code(e);
    }

    try {
        auto& out = std::cout;
        if (*c_gen) {
            cli::cmd_approx_gen(gen, out);
        } else if (*c_table) {
            table.hamming.clear();
            for (const auto& s : cli::split_list(hamming))
                table.hamming.push_back(static_cast<int>(cli::parse_long(s, "--hamming")));
            table.targets.clear();
            for (const auto& s : cli::split_list(targets))
                table.targets.push_back(cli::parse_target(s));
            table.model = bootfail::parse_tail_model(model);
            if (!network.empty())
                table.network = std::make_pair(network[0], network[1]);
            cli::cmd_bootfail_table(table, out);
        } else if (*c_prec) {
            for (const auto& s : cli::split_list(sweep))
                prec.sweep.push_back(static_cast<int>(cli::parse_long(s, "--sweep")));
            cli::cmd_boot_precision(prec, out);
        } else if (*c_infer) {
            const auto trace = finish_infer_flags(inf, "infer");
            cli::cmd_infer(inf.args, out);
        } else if (*c_agree) {
            const auto trace = finish_infer_flags(agr, "agree");
            cli::cmd_agree(agr.args, out);
        } else if (*c_mw) {
            cli::cmd_make_weights(mw, out);
        } else if (*c_mi) {
            cli::cmd_make_images(mi, out);
        }
    } catch (const std::exception& e) {
        std::cerr << "heresnet: " << e.what() << '\n';
        return cli::exit_code(e);
    }
    return cli::kOk;
}
