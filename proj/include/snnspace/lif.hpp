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

#include <utility>

#include "snnspace/tensor.hpp"

namespace snnspace {

enum class ResetMode {
    SubtractThreshold, // u <- u - u_th where the neuron fired
    ToZero,            // u <- 0 where the neuron fired
};

/// Leaky integrate-and-fire neuron parameters, shared by every spiking
/// layer of a network. The membrane update per step is
///   u_t = (1 - 1/tau_m) * u_{t-1} + (1/tau_m) * resistance * I_t
/// and the neuron fires when u_t >= u_th. With resistance 1 this is the
/// plain leaky-integrator recurrence on the raw synaptic current.
struct LifNeuronConfig {
    double tau_m = 2.0;
    double u_th = 1.0;
    double resistance = 1.0;
    ResetMode reset_mode = ResetMode::SubtractThreshold;

    // Derived, never stored: stays consistent with tau_m by construction.
    double leak_factor() const { return 1.0 - 1.0 / tau_m; }

    void validate() const {
        if (!(tau_m >= 1.0)) throw ConfigError("LifNeuronConfig: tau_m must be >= 1");
        if (!(u_th > 0.0)) throw ConfigError("LifNeuronConfig: u_th must be positive");
        if (!(resistance > 0.0)) throw ConfigError("LifNeuronConfig: resistance must be positive");
    }
};

/// Membrane potentials of one layer plus the simulation step index.
struct LifState {
    Tensor potentials;
    int time_index = 0;
};

/// Backward-pass derivative of the spike function with respect to the
/// membrane potential: a shifted Heaviside gate, 1 iff u >= u_th.
inline double surrogate_gate(double potential, const LifNeuronConfig& config) {
    return potential >= config.u_th ? 1.0 : 0.0;
}

/// One membrane update for a whole layer. Returns the new state and the
/// binary spike tensor; fired neurons are reset per config.reset_mode.
inline std::pair<LifState, Tensor> lif_step(const LifState& state,
                                            const Tensor& input_current,
                                            const LifNeuronConfig& config) {
    config.validate();
    if (!state.potentials.same_shape(input_current)) {
        throw ShapeError("lif_step: input current shape does not match state potentials");
    }
    const double leak = config.leak_factor();
    const double gain = config.resistance / config.tau_m;

    LifState next;
    next.potentials = state.potentials;
    next.time_index = state.time_index + 1;
    Tensor spikes(input_current.shape());

    double* u = next.potentials.data();
    const double* in = input_current.data();
    double* o = spikes.data();
    const std::size_t n = spikes.size();
    for (std::size_t i = 0; i < n; ++i) {
        double v = leak * u[i] + gain * in[i];
        if (v >= config.u_th) {
            o[i] = 1.0;
            u[i] = config.reset_mode == ResetMode::SubtractThreshold ? v - config.u_th : 0.0;
        } else {
            o[i] = 0.0;
            u[i] = v;
        }
    }
    return {std::move(next), std::move(spikes)};
}

} // namespace snnspace
