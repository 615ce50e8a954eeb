/*
 * Copyright 2026 snnspace contributors
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
 */

#pragma once

#include "snnspace/encode.hpp"
#include "snnspace/network.hpp"
#include "snnspace/rng.hpp"

namespace snnspace::testing {

/// Deterministic dyadic value in [-1/2, 1/2]: a multiple of 1/16, so sums
/// and products of a few of them stay exactly representable in doubles.
/// Exact-equality gradient checks rely on this.
inline double dyadic(std::size_t k) {
    return static_cast<double>(static_cast<int>((k * 5) % 17) - 8) / 16.0;
}

/// Minimal full-featured network: 1x4x4 input, conv(2) -> pool -> dense(3)
/// -> dense(2), every parameter a dyadic rational, tau_m = 2 (leak and
/// input gain both exactly 1/2). The threshold is low enough that the
/// dyadic weights actually make neurons fire. Bound and alignment-selected.
inline NetworkParams tiny_net(ResetMode mode = ResetMode::SubtractThreshold) {
    NetworkParams params;
    params.neuron.tau_m = 2.0;
    params.neuron.u_th = 0.25;
    params.neuron.reset_mode = mode;

    Layer conv;
    conv.kind = LayerKind::Conv3x3;
    conv.weight = Tensor({2, 1, 3, 3});
    conv.bias = Tensor({2});

    Layer pool;
    pool.kind = LayerKind::AvgPool2x2;

    Layer hidden;
    hidden.kind = LayerKind::Dense;
    hidden.weight = Tensor({3, 8});
    hidden.bias = Tensor({3});

    Layer readout;
    readout.kind = LayerKind::Dense;
    readout.weight = Tensor({2, 3});
    readout.bias = Tensor({2});

    std::size_t k = 0;
    for (Layer* layer : {&conv, &hidden, &readout}) {
        for (std::size_t i = 0; i < layer->weight.size(); ++i) layer->weight.data()[i] = dyadic(k++);
        for (std::size_t i = 0; i < layer->bias.size(); ++i) layer->bias.data()[i] = dyadic(k++);
    }

    params.layers.push_back(std::move(conv));
    params.layers.push_back(std::move(pool));
    params.layers.push_back(std::move(hidden));
    params.layers.push_back(std::move(readout));
    params.extractor_end = 2;
    params.bind(1, 4, 4);
    params.alignment_layer = select_alignment_layer(params);
    return params;
}

/// Random binary train for the tiny net: {T,1,4,4} of fair coin flips.
inline SpikeTrain tiny_input(int t_steps, std::uint64_t seed) {
    Rng rng(seed);
    SpikeTrain train;
    train.spikes = Tensor({t_steps, 1, 4, 4});
    for (std::size_t i = 0; i < train.spikes.size(); ++i) {
        train.spikes.data()[i] = rng.bernoulli(0.5) ? 1.0 : 0.0;
    }
    return train;
}

} // namespace snnspace::testing
