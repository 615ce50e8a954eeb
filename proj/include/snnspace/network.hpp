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

#include <cstdint>
#include <vector>

#include "snnspace/lif.hpp"
#include "snnspace/rng.hpp"
#include "snnspace/tensor.hpp"

namespace snnspace {

// ---------------------------------------------------------------------------
// Network structure
// ---------------------------------------------------------------------------

enum class LayerKind : std::uint32_t {
    Conv3x3 = 0,   // 3x3 convolution, stride 1, zero padding 1, followed by LIF
    AvgPool2x2 = 1, // 2x2 average pooling, stride 2, no parameters, no LIF
    Dense = 2,     // fully connected, followed by LIF
};

/// One layer of the feed-forward spiking network. Input/output shapes are
/// bound once by NetworkParams::bind and cached here so the simulator can
/// run without re-deriving them every step.
struct Layer {
    LayerKind kind = LayerKind::Conv3x3;
    Tensor weight; // Conv3x3: {out_c, in_c, 3, 3}; Dense: {out_n, in_n}; pool: empty
    Tensor bias;   // {out_c} / {out_n}; empty for pool or bias-free layers

    // Bound shapes (channels, height, width); dense outputs use h = w = 1.
    int in_c = 0, in_h = 0, in_w = 0;
    int out_c = 0, out_h = 0, out_w = 0;

    // Set by bind() on the final layer only: the readout integrates its
    // drive over time instead of firing. A spiking readout would gate the
    // loss gradient through its own sparse spikes — most steps would
    // contribute nothing — and could itself fall silent, so the last
    // layer stays below threshold dynamics entirely.
    bool integrator = false;

    bool spiking() const { return kind != LayerKind::AvgPool2x2 && !integrator; }
    std::size_t in_size() const {
        return static_cast<std::size_t>(in_c) * in_h * in_w;
    }
    std::size_t out_size() const {
        return static_cast<std::size_t>(out_c) * out_h * out_w;
    }
};

/// Half-open range of layer indices, used to restrict updates to a span
/// of the network (e.g. the feature extractor only).
struct LayerRange {
    int begin = 0;
    int end = 0;
};

/// Complete parameter set of a spiking network, plus the split between
/// the feature extractor and the readout (classifier) layers and the
/// layer whose activity is used for feature alignment.
struct NetworkParams {
    std::vector<Layer> layers;
    LifNeuronConfig neuron;

    int input_c = 0, input_h = 0, input_w = 0;

    // Layers [0, extractor_end) form the feature extractor; the rest is
    // the readout head. The alignment layer must be a spiking layer
    // inside the extractor.
    int extractor_end = 0;
    int alignment_layer = -1;

    int layer_count() const { return static_cast<int>(layers.size()); }
    int num_classes() const;
    LayerRange extractor_range() const { return {0, extractor_end}; }
    LayerRange full_range() const { return {0, layer_count()}; }

    /// Validate the layer chain against the given input shape and cache
    /// per-layer input/output shapes. Must be called before forward().
    void bind(int in_c, int in_h, int in_w);

    /// Order- and value-sensitive digest of all weights, biases and the
    /// structure; used to pair gradient tapes with the parameters that
    /// produced them.
    std::uint64_t fingerprint() const;
};

/// Deepest spiking extractor layer whose output map is wider than 1x1;
/// alignment on a single spatial position would leave nothing to compare
/// across channels, so 1x1 maps are skipped in favour of earlier layers.
int select_alignment_layer(const NetworkParams& params);

/// Standard architecture: per conv channel entry a Conv3x3 + AvgPool2x2
/// pair, then one hidden Dense layer and a Dense readout; the extractor
/// is the conv/pool stack, the head is the two dense layers.
struct ArchConfig {
    std::vector<int> conv_channels = {8, 16, 16};
    int dense_units = 48;
    int num_classes = 4;
    bool bias = true;
    // Scales the fan-in uniform init bound. The raw draw rarely produces
    // usable firing rates on its own — see calibrate_firing_rates, which
    // rescales every spiking unit against real data after construction.
    double init_gain = 1.0;
    // Keep appending 2x2 average pools after the conv stack until the
    // spatial map is 1x1, so the dense head reads per-channel mean
    // activity only. A head that sees spatial positions is fragile at
    // test time: single-instance adaptation of the extractor relocates
    // spike mass within each channel's map, and a position-sensitive
    // head misreads that relocation as a class change. Requires the
    // post-conv map size to be a power of two.
    bool collapse_spatial = true;
};

/// Build and initialise the standard architecture for the given input
/// shape. Weights are fan-in-scaled uniform (bound init_gain*sqrt(6/fan_in)),
/// biases zero; all draws come from `rng` in layer order.
NetworkParams build_network(const ArchConfig& arch, int in_c, int in_h, int in_w, Rng& rng);

// ---------------------------------------------------------------------------
// Simulation
// ---------------------------------------------------------------------------

/// Binary input spikes over time, shape {T, C, H, W}.
struct SpikeTrain {
    Tensor spikes;
    int time_steps() const { return spikes.rank() == 0 ? 0 : spikes.shape()[0]; }
};

/// Everything the backward pass needs to replay one forward simulation:
/// per-step activations of every layer boundary and pre-reset membrane
/// potentials of every spiking layer.
struct Tape {
    // act[0] is the input train, act[l+1] the output of layer l; each is
    // {T, numel} with numel the flattened layer output size.
    std::vector<Tensor> act;
    // u_pre[l] is {T, numel}: membrane potential just before the firing
    // decision of spiking layer l (empty tensor for pools).
    std::vector<Tensor> u_pre;
    bool recorded = false;
};

/// Result of one forward simulation.
struct ForwardRecord {
    // Per-class scores: the readout layer's drive summed over all steps
    // (the readout integrates without firing, see Layer::integrator).
    std::vector<double> scores;
    // Activity of the alignment layer, both {T, C, H, W}: the binary
    // spikes and the post-reset membrane potentials.
    Tensor alignment_spikes;
    Tensor alignment_potentials;
    Tape tape;
    std::uint64_t params_fingerprint = 0;
    int time_steps = 0;
};

/// Simulate the network over all T input steps. With record_tape the
/// returned record supports backward(); without, only scores and the
/// alignment activity are populated.
ForwardRecord forward(const NetworkParams& params, const SpikeTrain& input,
                      bool record_tape = true);

// ---------------------------------------------------------------------------
// Gradients
// ---------------------------------------------------------------------------

/// Upstream derivatives seeding the backward pass. Any subset may be
/// set; empty members contribute nothing.
struct LossSeed {
    // d loss / d scores (readout spike counts); size num_classes.
    std::vector<double> score_grad;
    // d loss / d alignment spikes and post-reset potentials, each
    // {T, C, H, W} matching the record's alignment tensors.
    Tensor alignment_spike_grad;
    Tensor alignment_potential_grad;
};

/// Per-layer parameter gradients, same shapes as the network's weights
/// and biases (empty where the layer has none).
struct Gradients {
    std::vector<Tensor> weight;
    std::vector<Tensor> bias;
    std::uint64_t params_fingerprint = 0;
};

/// Backpropagation through the spiking simulation. Spike discontinuities
/// use the shifted-Heaviside gate (1 iff u_pre >= u_th) in place of the
/// undefined true derivative; the membrane recurrence, including the
/// reset, is differentiated exactly. Throws IntegrityError if the record
/// was produced by different parameters.
Gradients backward(const NetworkParams& params, const ForwardRecord& record,
                   const LossSeed& seed);

/// Vanilla SGD step over layers in `span` only. Refuses (NumericError,
/// naming the first offending layer) to apply non-finite gradients, and
/// leaves the parameters untouched in that case.
void sgd_update(NetworkParams& params, const Gradients& grads, double eta, LayerRange span);

} // namespace snnspace
