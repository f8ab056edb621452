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
#include <string>
#include <utility>
#include <vector>

#include "heresnet/heslots/heslots.hpp"
#include "heresnet/resnet/activations.hpp"
#include "heresnet/resnet/graph.hpp"
#include "heresnet/resnet/image.hpp"
#include "heresnet/resnet/layers.hpp"
#include "heresnet/resnet/oracle.hpp"
#include "heresnet/resnet/weights.hpp"

namespace heresnet::resnet {

struct InferOptions {
    /// ReLU input bound B; also the bound of bootstraps placed outside ReLU.
    double relu_bound = 40.0;
    SoftmaxParams softmax{};
    /// Diagnostic: ReLU and softmax computed exactly on decrypted slots.
    bool exact_activations = false;
    /// Worker threads for per-channel work in convolutions.
    int threads = 1;
    /// Run the float oracle and fill the agreement fields.
    bool compare = true;
    /// Composite sign to use; nullptr selects compose_sign(13).
    const approx::CompositeSign* sign = nullptr;
};

struct InferenceReport {
    std::vector<double> logits, probs;
    int label = -1;
    std::vector<double> oracle_logits, oracle_probs;
    int oracle_label = -1;
    bool agreement = false;
    /// max_j |logit_j - oracle_logit_j|
    double max_logit_deviation = 0.0;
    heslots::EvalCounter counters;
    std::vector<std::pair<std::string, double>> layer_max;
    std::vector<std::string> warnings;
    std::vector<BootstrapPlacement> placements;
    int relu_calls = 0;
    std::uint64_t relu_bootstraps = 0;
    std::uint64_t softmax_bootstraps = 0;
};

/// Levels a layer's inputs must hold.
inline int level_requirement(const LayerSpec& l, const ReluApprox& ra) {
    switch (l.kind) {
    case LayerKind::conv:
    case LayerKind::bn:
    case LayerKind::avgpool:
    case LayerKind::fc: return 1;
    case LayerKind::relu: return ra.prefix_levels();
    case LayerKind::add:
    case LayerKind::softmax: return 0;
    }
    return 0;
}

/// Runs the graph on ciphertexts. Before each layer, inputs below the layer's level requirement
/// are bootstrapped (bound B) and the placement is logged; the residual add aligns its operands
/// by bootstrapping the lower branch when the aligned level would not cover the next layer and
/// dropping the other to match. The report's counters are the context's counters after the run.
inline InferenceReport infer(Evaluator& ev, const Image& img, const WeightSet& ws, const NetworkGraph& g,
                             const InferOptions& opt = {}) {
    ws.validate(g);
    const double B = opt.relu_bound;
    if (!(B > 0.0))
        throw DomainError("relu bound must be positive");
    ReluApprox custom;
    const ReluApprox* rap = nullptr;
    if (opt.sign) {
        custom = make_relu_approx(*opt.sign, ev.config().L_eval);
        rap = &custom;
    } else {
        rap = &default_relu_approx(ev.config().L_eval);
    }
    InferenceReport rep;
    std::vector<std::vector<CipherVec>> outs(g.layers.size());
    auto input_of = [&](int src) -> std::vector<CipherVec>& { return outs[static_cast<std::size_t>(src)]; };
    std::vector<CipherVec> image = pack_image(ev, img);

    for (std::size_t i = 0; i < g.layers.size(); ++i) {
        const auto& l = g.layers[i];
        heslots::ScopeGuard scope(ev, l.name);
        std::vector<CipherVec> x = l.src < 0 ? image : input_of(l.src);
        const int need = level_requirement(l, *rap);
        for (auto& c : x)
            c = ensure_level(ev, std::move(c), need, B, &rep.placements);
        if (l.kind == LayerKind::conv) {
            // Channels must share one level for the accumulation.
            int lvl = x.front().level();
            for (const auto& c : x)
                lvl = std::min(lvl, c.level());
            for (auto& c : x)
                c = ev.level_down(std::move(c), lvl);
        }
        std::vector<CipherVec> y;
        switch (l.kind) {
        case LayerKind::conv:
            y = conv_siso(ev, x, ws.conv.at(l.params), l.in_layout, l.stride, opt.threads, l.name);
            break;
        case LayerKind::bn: {
            const Affine a = ws.bn.at(l.params).fold();
            for (std::size_t c = 0; c < x.size(); ++c)
                y.push_back(batch_norm(ev, x[c], a.scale[c], a.shift[c], l.out_layout));
            break;
        }
        case LayerKind::relu: {
            const auto before = ev.counters().bootstraps;
            for (const auto& c : x)
                y.push_back(opt.exact_activations ? relu_exact(ev, c, *rap, B) : relu_layer(ev, c, *rap, B));
            rep.relu_calls += static_cast<int>(x.size());
            rep.relu_bootstraps += ev.counters().bootstraps - before;
            break;
        }
        case LayerKind::add: {
            std::vector<CipherVec> z = input_of(l.src2);
            // Requirement of the layer that consumes the sum.
            const int next = i + 1 < g.layers.size() ? level_requirement(g.layers[i + 1], *rap) : 0;
            for (std::size_t c = 0; c < x.size(); ++c) {
                CipherVec a = x[c], b = z[c];
                if (std::min(a.level(), b.level()) < next) {
                    if (a.level() <= b.level())
                        a = ensure_level(ev, std::move(a), next, B, &rep.placements);
                    else
                        b = ensure_level(ev, std::move(b), next, B, &rep.placements);
                }
                const int lvl = std::min(a.level(), b.level());
                CipherVec s = ev.add(ev.level_down(std::move(a), lvl), ev.level_down(std::move(b), lvl));
                s.set_tag(l.name + ".c" + std::to_string(c));
                y.push_back(std::move(s));
            }
            break;
        }
        case LayerKind::avgpool: y = avg_pool(ev, x, l.in_layout); break;
        case LayerKind::fc: y.push_back(fully_connected(ev, x, ws.fc_w, ws.fc_b)); break;
        case LayerKind::softmax: {
            const auto before = ev.counters().bootstraps;
            y.push_back(opt.exact_activations ? softmax_exact(ev, x.front(), opt.softmax)
                                              : softmax(ev, x.front(), opt.softmax, &rep.placements));
            rep.softmax_bootstraps = ev.counters().bootstraps - before;
            break;
        }
        }
        double m = 0.0;
        if (l.kind == LayerKind::fc || l.kind == LayerKind::softmax) {
            const auto v = ev.decrypt(y.front());
            for (int j = 0; j < 10; ++j)
                m = std::max(m, std::fabs(v[static_cast<std::size_t>(j)]));
            (l.kind == LayerKind::fc ? rep.logits : rep.probs).assign(v.begin(), v.begin() + 10);
        } else {
            for (const auto& c : y)
                m = std::max(m, c.max_abs());
        }
        rep.layer_max.emplace_back(l.name, m);
        outs[i] = std::move(y);
        // Release operands no later layer reads.
        for (int s : {l.src, l.src2}) {
            if (s < 0)
                continue;
            bool used = false;
            for (std::size_t k = i + 1; k < g.layers.size() && !used; ++k)
                used = g.layers[k].src == s || g.layers[k].src2 == s;
            if (!used)
                outs[static_cast<std::size_t>(s)].clear();
        }
    }
    rep.label = argmax(rep.logits);
    rep.counters = ev.counters();
    rep.warnings = ev.warnings();
    if (opt.compare) {
        const auto fr = infer_float(img, ws, g);
        rep.oracle_logits = fr.logits;
        rep.oracle_probs = fr.probs;
        rep.oracle_label = fr.label;
        rep.agreement = rep.label == rep.oracle_label;
        for (std::size_t j = 0; j < rep.logits.size(); ++j)
            rep.max_logit_deviation = std::max(rep.max_logit_deviation, std::fabs(rep.logits[j] - fr.logits[j]));
    }
    return rep;
}

} // namespace heresnet::resnet
