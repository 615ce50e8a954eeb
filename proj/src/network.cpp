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

#include "snnspace/network.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>
#include <string>

namespace snnspace {

namespace {

// ---------------------------------------------------------------------------
// Layer primitives: raw synaptic drive and its adjoints. All loops run in a
// fixed order so gradients are bit-reproducible across runs.
// ---------------------------------------------------------------------------

void conv3x3_drive(const Layer& layer, const double* in, double* out) {
    const int ic = layer.in_c, h = layer.in_h, w = layer.in_w, oc = layer.out_c;
    const double* wt = layer.weight.data();
    const bool has_bias = layer.bias.size() > 0;
    const std::size_t plane = static_cast<std::size_t>(h) * w;
    for (int co = 0; co < oc; ++co) {
        double* oplane = out + static_cast<std::size_t>(co) * plane;
        std::fill(oplane, oplane + plane, has_bias ? layer.bias.data()[co] : 0.0);
        for (int ci = 0; ci < ic; ++ci) {
            const double* iplane = in + static_cast<std::size_t>(ci) * plane;
            const double* kernel = wt + (static_cast<std::size_t>(co) * ic + ci) * 9;
            for (int ky = 0; ky < 3; ++ky) {
                const int dy = ky - 1;
                const int y0 = std::max(0, -dy), y1 = std::min(h, h - dy);
                for (int kx = 0; kx < 3; ++kx) {
                    const int dx = kx - 1;
                    const int x0 = std::max(0, -dx), x1 = std::min(w, w - dx);
                    const double wv = kernel[ky * 3 + kx];
                    for (int y = y0; y < y1; ++y) {
                        const double* ir = iplane + static_cast<std::size_t>(y + dy) * w + dx;
                        double* orow = oplane + static_cast<std::size_t>(y) * w;
                        for (int x = x0; x < x1; ++x) orow[x] += wv * ir[x];
                    }
                }
            }
        }
    }
}

void conv3x3_backward_input(const Layer& layer, const double* g_out, double* g_in) {
    const int ic = layer.in_c, h = layer.in_h, w = layer.in_w, oc = layer.out_c;
    const double* wt = layer.weight.data();
    const std::size_t plane = static_cast<std::size_t>(h) * w;
    for (int co = 0; co < oc; ++co) {
        const double* gplane = g_out + static_cast<std::size_t>(co) * plane;
        for (int ci = 0; ci < ic; ++ci) {
            double* gi = g_in + static_cast<std::size_t>(ci) * plane;
            const double* kernel = wt + (static_cast<std::size_t>(co) * ic + ci) * 9;
            for (int ky = 0; ky < 3; ++ky) {
                const int dy = ky - 1;
                const int y0 = std::max(0, -dy), y1 = std::min(h, h - dy);
                for (int kx = 0; kx < 3; ++kx) {
                    const int dx = kx - 1;
                    const int x0 = std::max(0, -dx), x1 = std::min(w, w - dx);
                    const double wv = kernel[ky * 3 + kx];
                    for (int y = y0; y < y1; ++y) {
                        double* gir = gi + static_cast<std::size_t>(y + dy) * w + dx;
                        const double* gr = gplane + static_cast<std::size_t>(y) * w;
                        for (int x = x0; x < x1; ++x) gir[x] += wv * gr[x];
                    }
                }
            }
        }
    }
}

void conv3x3_backward_params(const Layer& layer, const double* g_out, const double* in,
                             double* g_weight, double* g_bias) {
    const int ic = layer.in_c, h = layer.in_h, w = layer.in_w, oc = layer.out_c;
    const std::size_t plane = static_cast<std::size_t>(h) * w;
    for (int co = 0; co < oc; ++co) {
        const double* gplane = g_out + static_cast<std::size_t>(co) * plane;
        if (g_bias != nullptr) {
            double acc = 0.0;
            for (std::size_t i = 0; i < plane; ++i) acc += gplane[i];
            g_bias[co] += acc;
        }
        for (int ci = 0; ci < ic; ++ci) {
            const double* iplane = in + static_cast<std::size_t>(ci) * plane;
            double* gk = g_weight + (static_cast<std::size_t>(co) * ic + ci) * 9;
            for (int ky = 0; ky < 3; ++ky) {
                const int dy = ky - 1;
                const int y0 = std::max(0, -dy), y1 = std::min(h, h - dy);
                for (int kx = 0; kx < 3; ++kx) {
                    const int dx = kx - 1;
                    const int x0 = std::max(0, -dx), x1 = std::min(w, w - dx);
                    double acc = 0.0;
                    for (int y = y0; y < y1; ++y) {
                        const double* ir = iplane + static_cast<std::size_t>(y + dy) * w + dx;
                        const double* gr = gplane + static_cast<std::size_t>(y) * w;
                        for (int x = x0; x < x1; ++x) acc += gr[x] * ir[x];
                    }
                    gk[ky * 3 + kx] += acc;
                }
            }
        }
    }
}

void dense_drive(const Layer& layer, const double* in, double* out) {
    const int n_in = static_cast<int>(layer.in_size());
    const int n_out = layer.out_c;
    const double* wt = layer.weight.data();
    const bool has_bias = layer.bias.size() > 0;
    for (int o = 0; o < n_out; ++o) {
        const double* row = wt + static_cast<std::size_t>(o) * n_in;
        double acc = has_bias ? layer.bias.data()[o] : 0.0;
        for (int i = 0; i < n_in; ++i) acc += row[i] * in[i];
        out[o] = acc;
    }
}

void dense_backward(const Layer& layer, const double* g_out, const double* in,
                    double* g_in, double* g_weight, double* g_bias) {
    const int n_in = static_cast<int>(layer.in_size());
    const int n_out = layer.out_c;
    const double* wt = layer.weight.data();
    for (int o = 0; o < n_out; ++o) {
        const double g = g_out[o];
        if (g_bias != nullptr) g_bias[o] += g;
        const double* row = wt + static_cast<std::size_t>(o) * n_in;
        double* grow = g_weight + static_cast<std::size_t>(o) * n_in;
        for (int i = 0; i < n_in; ++i) grow[i] += g * in[i];
        if (g_in != nullptr && g != 0.0) {
            for (int i = 0; i < n_in; ++i) g_in[i] += g * row[i];
        }
    }
}

void avgpool_drive(const Layer& layer, const double* in, double* out) {
    const int c = layer.in_c, h = layer.in_h, w = layer.in_w;
    const int oh = layer.out_h, ow = layer.out_w;
    for (int ch = 0; ch < c; ++ch) {
        const double* ip = in + static_cast<std::size_t>(ch) * h * w;
        double* op = out + static_cast<std::size_t>(ch) * oh * ow;
        for (int y = 0; y < oh; ++y) {
            const double* r0 = ip + static_cast<std::size_t>(2 * y) * w;
            const double* r1 = r0 + w;
            for (int x = 0; x < ow; ++x) {
                op[static_cast<std::size_t>(y) * ow + x] =
                    0.25 * (r0[2 * x] + r0[2 * x + 1] + r1[2 * x] + r1[2 * x + 1]);
            }
        }
    }
}

void avgpool_backward(const Layer& layer, const double* g_out, double* g_in) {
    const int c = layer.in_c, h = layer.in_h, w = layer.in_w;
    const int oh = layer.out_h, ow = layer.out_w;
    for (int ch = 0; ch < c; ++ch) {
        double* gi = g_in + static_cast<std::size_t>(ch) * h * w;
        const double* go = g_out + static_cast<std::size_t>(ch) * oh * ow;
        for (int y = 0; y < oh; ++y) {
            double* r0 = gi + static_cast<std::size_t>(2 * y) * w;
            double* r1 = r0 + w;
            for (int x = 0; x < ow; ++x) {
                const double g = 0.25 * go[static_cast<std::size_t>(y) * ow + x];
                r0[2 * x] += g;
                r0[2 * x + 1] += g;
                r1[2 * x] += g;
                r1[2 * x + 1] += g;
            }
        }
    }
}

void drive(const Layer& layer, const double* in, double* out) {
    switch (layer.kind) {
        case LayerKind::Conv3x3: conv3x3_drive(layer, in, out); break;
        case LayerKind::AvgPool2x2: avgpool_drive(layer, in, out); break;
        case LayerKind::Dense: dense_drive(layer, in, out); break;
    }
}

void feed(std::uint64_t& h, std::uint64_t v) { h = mix64(h + kGolden + v); }

std::uint64_t double_bits(double v) {
    std::uint64_t b = 0;
    std::memcpy(&b, &v, sizeof(b));
    return b;
}

} // namespace

// ---------------------------------------------------------------------------
// NetworkParams
// ---------------------------------------------------------------------------

int NetworkParams::num_classes() const {
    if (layers.empty()) throw ConfigError("num_classes: network has no layers");
    const Layer& last = layers.back();
    if (last.kind != LayerKind::Dense) {
        throw ConfigError("num_classes: last layer is not a dense readout");
    }
    return last.out_c;
}

void NetworkParams::bind(int in_c, int in_h, int in_w) {
    if (in_c <= 0 || in_h <= 0 || in_w <= 0) {
        throw ShapeError("bind: input dimensions must be positive");
    }
    if (layers.empty()) throw ConfigError("bind: network has no layers");
    neuron.validate();

    int c = in_c, h = in_h, w = in_w;
    for (std::size_t l = 0; l < layers.size(); ++l) {
        Layer& layer = layers[l];
        layer.in_c = c;
        layer.in_h = h;
        layer.in_w = w;
        const std::string where = "layer " + std::to_string(l);
        switch (layer.kind) {
            case LayerKind::Conv3x3: {
                if (layer.weight.rank() != 4 || layer.weight.shape()[2] != 3 ||
                    layer.weight.shape()[3] != 3) {
                    throw ShapeError("bind: " + where + ": conv weight must be {out,in,3,3}");
                }
                if (layer.weight.shape()[1] != c) {
                    throw ShapeError("bind: " + where + ": conv expects " +
                                     std::to_string(layer.weight.shape()[1]) +
                                     " input channels, got " + std::to_string(c));
                }
                const int oc = layer.weight.shape()[0];
                if (layer.bias.size() > 0 &&
                    (layer.bias.rank() != 1 || layer.bias.shape()[0] != oc)) {
                    throw ShapeError("bind: " + where + ": conv bias must be {out}");
                }
                layer.out_c = oc;
                layer.out_h = h;
                layer.out_w = w;
                break;
            }
            case LayerKind::AvgPool2x2: {
                if (layer.weight.size() > 0 || layer.bias.size() > 0) {
                    throw ShapeError("bind: " + where + ": pool layer carries parameters");
                }
                if (h % 2 != 0 || w % 2 != 0) {
                    throw ShapeError("bind: " + where + ": pool input " + std::to_string(h) +
                                     "x" + std::to_string(w) + " is not even-sized");
                }
                layer.out_c = c;
                layer.out_h = h / 2;
                layer.out_w = w / 2;
                break;
            }
            case LayerKind::Dense: {
                if (layer.weight.rank() != 2) {
                    throw ShapeError("bind: " + where + ": dense weight must be {out,in}");
                }
                const int need = c * h * w;
                if (layer.weight.shape()[1] != need) {
                    throw ShapeError("bind: " + where + ": dense expects " +
                                     std::to_string(layer.weight.shape()[1]) +
                                     " inputs, feature size is " + std::to_string(need));
                }
                const int out_n = layer.weight.shape()[0];
                if (layer.bias.size() > 0 &&
                    (layer.bias.rank() != 1 || layer.bias.shape()[0] != out_n)) {
                    throw ShapeError("bind: " + where + ": dense bias must be {out}");
                }
                layer.out_c = out_n;
                layer.out_h = 1;
                layer.out_w = 1;
                break;
            }
        }
        c = layer.out_c;
        h = layer.out_h;
        w = layer.out_w;
    }
    input_c = in_c;
    input_h = in_h;
    input_w = in_w;

    // The final layer is always the integrating readout; everything
    // upstream keeps threshold dynamics.
    for (Layer& layer : layers) layer.integrator = false;
    layers.back().integrator = true;

    if (extractor_end < 1 || extractor_end > layer_count()) {
        throw ConfigError("bind: extractor_end " + std::to_string(extractor_end) +
                          " outside [1, " + std::to_string(layer_count()) + "]");
    }
    if (alignment_layer >= 0) {
        if (alignment_layer >= extractor_end || !layers[alignment_layer].spiking()) {
            throw ConfigError("bind: alignment layer " + std::to_string(alignment_layer) +
                              " is not a spiking extractor layer");
        }
    }
}

std::uint64_t NetworkParams::fingerprint() const {
    std::uint64_t h = 0x5EEDF00Dull;
    feed(h, static_cast<std::uint64_t>(layers.size()));
    feed(h, double_bits(neuron.tau_m));
    feed(h, double_bits(neuron.u_th));
    feed(h, double_bits(neuron.resistance));
    feed(h, static_cast<std::uint64_t>(neuron.reset_mode));
    feed(h, static_cast<std::uint64_t>(input_c));
    feed(h, static_cast<std::uint64_t>(input_h));
    feed(h, static_cast<std::uint64_t>(input_w));
    feed(h, static_cast<std::uint64_t>(extractor_end));
    feed(h, static_cast<std::uint64_t>(alignment_layer + 1));
    for (const Layer& layer : layers) {
        feed(h, static_cast<std::uint64_t>(layer.kind));
        for (int d : layer.weight.shape()) feed(h, static_cast<std::uint64_t>(d));
        for (std::size_t i = 0; i < layer.weight.size(); ++i) {
            feed(h, double_bits(layer.weight.data()[i]));
        }
        feed(h, static_cast<std::uint64_t>(layer.bias.size()));
        for (std::size_t i = 0; i < layer.bias.size(); ++i) {
            feed(h, double_bits(layer.bias.data()[i]));
        }
    }
    return h;
}

int select_alignment_layer(const NetworkParams& params) {
    if (params.layers.empty() || params.extractor_end < 1) {
        throw ConfigError("select_alignment_layer: network not bound");
    }
    for (int l = params.extractor_end - 1; l >= 0; --l) {
        const Layer& layer = params.layers[l];
        if (layer.spiking() && layer.out_h * layer.out_w > 1) return l;
    }
    throw ConfigError("select_alignment_layer: no spiking extractor layer has a spatial "
                      "map wider than 1x1");
}

NetworkParams build_network(const ArchConfig& arch, int in_c, int in_h, int in_w, Rng& rng) {
    if (arch.conv_channels.empty()) {
        throw ConfigError("build_network: at least one conv stage is required");
    }
    if (arch.num_classes < 2) throw ConfigError("build_network: need at least two classes");
    if (arch.dense_units < 0) throw ConfigError("build_network: dense_units must be non-negative");

    NetworkParams params;
    int c = in_c, h = in_h, w = in_w;

    auto init_tensor = [&](Tensor& t, int fan_in) {
        const double bound = arch.init_gain * std::sqrt(6.0 / fan_in);
        for (std::size_t i = 0; i < t.size(); ++i) {
            t.data()[i] = rng.uniform_range(-bound, bound);
        }
    };

    for (int oc : arch.conv_channels) {
        if (oc < 1) throw ConfigError("build_network: conv channel count must be positive");
        Layer conv;
        conv.kind = LayerKind::Conv3x3;
        conv.weight = Tensor({oc, c, 3, 3});
        init_tensor(conv.weight, c * 9);
        if (arch.bias) conv.bias = Tensor({oc});
        params.layers.push_back(std::move(conv));

        Layer pool;
        pool.kind = LayerKind::AvgPool2x2;
        params.layers.push_back(std::move(pool));
        c = oc;
        h /= 2;
        w /= 2;
    }
    if (arch.collapse_spatial) {
        while (h > 1 || w > 1) {
            if (h % 2 != 0 || w % 2 != 0) {
                throw ConfigError("build_network: collapse_spatial needs the post-conv map (" +
                                  std::to_string(h) + "x" + std::to_string(w) +
                                  ") to halve down to 1x1");
            }
            Layer pool;
            pool.kind = LayerKind::AvgPool2x2;
            params.layers.push_back(std::move(pool));
            h /= 2;
            w /= 2;
        }
    }
    params.extractor_end = params.layer_count();

    int feat = c * h * w;
    if (arch.dense_units > 0) {
        Layer hidden;
        hidden.kind = LayerKind::Dense;
        hidden.weight = Tensor({arch.dense_units, feat});
        init_tensor(hidden.weight, feat);
        if (arch.bias) hidden.bias = Tensor({arch.dense_units});
        params.layers.push_back(std::move(hidden));
        feat = arch.dense_units;
    }

    Layer readout;
    readout.kind = LayerKind::Dense;
    readout.weight = Tensor({arch.num_classes, feat});
    init_tensor(readout.weight, feat);
    if (arch.bias) readout.bias = Tensor({arch.num_classes});
    params.layers.push_back(std::move(readout));

    params.bind(in_c, in_h, in_w);
    params.alignment_layer = select_alignment_layer(params);
    return params;
}

// ---------------------------------------------------------------------------
// Forward simulation
// ---------------------------------------------------------------------------

ForwardRecord forward(const NetworkParams& params, const SpikeTrain& input, bool record_tape) {
    if (params.layers.empty() || params.layers[0].out_c == 0) {
        throw ConfigError("forward: network not bound, call bind() first");
    }
    params.neuron.validate();
    const Tensor& in = input.spikes;
    if (in.rank() != 4) throw ShapeError("forward: input train must be {T,C,H,W}");
    const int t_steps = in.shape()[0];
    if (t_steps < 1) throw ShapeError("forward: need at least one time step");
    if (in.shape()[1] != params.input_c || in.shape()[2] != params.input_h ||
        in.shape()[3] != params.input_w) {
        throw ShapeError("forward: input train shape does not match the bound network input");
    }
    const int align = params.alignment_layer;
    if (align < 0) throw ConfigError("forward: alignment layer not selected");

    const int n_layers = params.layer_count();
    const std::size_t in_numel = in.size() / t_steps;
    const double leak = params.neuron.leak_factor();
    const double gain = params.neuron.resistance / params.neuron.tau_m;
    const double u_th = params.neuron.u_th;
    const bool subtract = params.neuron.reset_mode == ResetMode::SubtractThreshold;

    ForwardRecord rec;
    rec.time_steps = t_steps;
    rec.params_fingerprint = params.fingerprint();

    const Layer& align_l = params.layers[align];
    rec.alignment_spikes = Tensor({t_steps, align_l.out_c, align_l.out_h, align_l.out_w});
    rec.alignment_potentials = Tensor({t_steps, align_l.out_c, align_l.out_h, align_l.out_w});

    // Persistent membrane state per spiking layer, scratch output/drive per layer.
    std::vector<std::vector<double>> membrane(n_layers);
    std::vector<std::vector<double>> out_buf(n_layers);
    std::vector<std::vector<double>> drive_buf(n_layers);
    for (int l = 0; l < n_layers; ++l) {
        const std::size_t n = params.layers[l].out_size();
        out_buf[l].assign(n, 0.0);
        drive_buf[l].assign(n, 0.0);
        if (params.layers[l].spiking()) membrane[l].assign(n, 0.0);
    }

    if (record_tape) {
        rec.tape.recorded = true;
        rec.tape.act.resize(n_layers + 1);
        rec.tape.u_pre.resize(n_layers);
        rec.tape.act[0] = Tensor({t_steps, static_cast<int>(in_numel)});
        for (int l = 0; l < n_layers; ++l) {
            rec.tape.act[l + 1] =
                Tensor({t_steps, static_cast<int>(params.layers[l].out_size())});
            if (params.layers[l].spiking()) {
                rec.tape.u_pre[l] =
                    Tensor({t_steps, static_cast<int>(params.layers[l].out_size())});
            }
        }
    }

    rec.scores.assign(params.layers[n_layers - 1].out_size(), 0.0);

    for (int t = 0; t < t_steps; ++t) {
        const double* x = in.data() + static_cast<std::size_t>(t) * in_numel;
        if (record_tape) {
            std::copy(x, x + in_numel, rec.tape.act[0].data() + static_cast<std::size_t>(t) * in_numel);
        }
        for (int l = 0; l < n_layers; ++l) {
            const Layer& layer = params.layers[l];
            const std::size_t n = layer.out_size();
            drive(layer, x, drive_buf[l].data());
            if (layer.spiking()) {
                double* u = membrane[l].data();
                double* o = out_buf[l].data();
                const double* c = drive_buf[l].data();
                double* u_pre_row =
                    record_tape ? rec.tape.u_pre[l].data() + static_cast<std::size_t>(t) * n
                                : nullptr;
                for (std::size_t i = 0; i < n; ++i) {
                    const double v = leak * u[i] + gain * c[i];
                    if (u_pre_row != nullptr) u_pre_row[i] = v;
                    if (v >= u_th) {
                        o[i] = 1.0;
                        u[i] = subtract ? v - u_th : 0.0;
                    } else {
                        o[i] = 0.0;
                        u[i] = v;
                    }
                }
                if (l == align) {
                    std::copy(o, o + n,
                              rec.alignment_spikes.data() + static_cast<std::size_t>(t) * n);
                    std::copy(u, u + n,
                              rec.alignment_potentials.data() + static_cast<std::size_t>(t) * n);
                }
            } else {
                std::copy(drive_buf[l].begin(), drive_buf[l].end(), out_buf[l].begin());
            }
            if (record_tape) {
                std::copy(out_buf[l].begin(), out_buf[l].end(),
                          rec.tape.act[l + 1].data() + static_cast<std::size_t>(t) * n);
            }
            x = out_buf[l].data();
        }
        const std::vector<double>& top = out_buf[n_layers - 1];
        for (std::size_t k = 0; k < top.size(); ++k) rec.scores[k] += top[k];
    }
    return rec;
}

// ---------------------------------------------------------------------------
// Backpropagation through time
// ---------------------------------------------------------------------------

Gradients backward(const NetworkParams& params, const ForwardRecord& record,
                   const LossSeed& seed) {
    if (!record.tape.recorded) {
        throw ConfigError("backward: forward record carries no tape");
    }
    if (record.params_fingerprint != params.fingerprint()) {
        throw IntegrityError("backward: record was produced by different parameters");
    }
    const int n_layers = params.layer_count();
    const int t_steps = record.time_steps;
    const int align = params.alignment_layer;
    const double leak = params.neuron.leak_factor();
    const double gain = params.neuron.resistance / params.neuron.tau_m;
    const double u_th = params.neuron.u_th;
    const bool subtract = params.neuron.reset_mode == ResetMode::SubtractThreshold;

    const bool has_score = !seed.score_grad.empty();
    const bool has_spike = seed.alignment_spike_grad.size() > 0;
    const bool has_pot = seed.alignment_potential_grad.size() > 0;
    if (has_score &&
        seed.score_grad.size() != record.scores.size()) {
        throw ShapeError("backward: score gradient size does not match class count");
    }
    if (has_spike && !seed.alignment_spike_grad.same_shape(record.alignment_spikes)) {
        throw ShapeError("backward: alignment spike gradient shape mismatch");
    }
    if (has_pot && !seed.alignment_potential_grad.same_shape(record.alignment_potentials)) {
        throw ShapeError("backward: alignment potential gradient shape mismatch");
    }

    Gradients grads;
    grads.params_fingerprint = record.params_fingerprint;
    grads.weight.resize(n_layers);
    grads.bias.resize(n_layers);
    for (int l = 0; l < n_layers; ++l) {
        const Layer& layer = params.layers[l];
        if (layer.weight.size() > 0) grads.weight[l] = Tensor(layer.weight.shape());
        if (layer.bias.size() > 0) grads.bias[l] = Tensor(layer.bias.shape());
    }

    // g_act[l]: d loss / d (activation entering layer l) at the current step;
    // index n_layers refers to the readout drive. carry[l] holds d loss /
    // d u_pre of spiking layer l at step t+1, consumed with one leak factor.
    std::vector<std::vector<double>> g_act(n_layers + 1);
    std::vector<std::vector<double>> carry(n_layers);
    std::vector<std::vector<double>> g_raw(n_layers);
    g_act[0].assign(record.tape.act[0].size() / t_steps, 0.0);
    for (int l = 0; l < n_layers; ++l) {
        const std::size_t n = params.layers[l].out_size();
        g_act[l + 1].assign(n, 0.0);
        g_raw[l].assign(n, 0.0);
        if (params.layers[l].spiking()) carry[l].assign(n, 0.0);
    }

    for (int t = t_steps - 1; t >= 0; --t) {
        for (auto& g : g_act) std::fill(g.begin(), g.end(), 0.0);
        if (has_score) {
            // scores are plain sums over time, so each step gets the full seed
            for (std::size_t k = 0; k < seed.score_grad.size(); ++k) {
                g_act[n_layers][k] += seed.score_grad[k];
            }
        }
        if (has_spike) {
            const std::size_t n = g_act[align + 1].size();
            const double* s =
                seed.alignment_spike_grad.data() + static_cast<std::size_t>(t) * n;
            for (std::size_t i = 0; i < n; ++i) g_act[align + 1][i] += s[i];
        }
        for (int l = n_layers - 1; l >= 0; --l) {
            const Layer& layer = params.layers[l];
            const std::size_t n = layer.out_size();
            if (layer.kind == LayerKind::AvgPool2x2) {
                avgpool_backward(layer, g_act[l + 1].data(), g_act[l].data());
                continue;
            }
            if (layer.integrator) {
                // The readout sums its drive directly into the scores:
                // no membrane, no gate, no gain factor.
                const double* gr_int = g_act[l + 1].data();
                const double* a_in_int = record.tape.act[l].data() +
                                         static_cast<std::size_t>(t) * layer.in_size();
                double* gw = grads.weight[l].size() > 0 ? grads.weight[l].data() : nullptr;
                double* gb = grads.bias[l].size() > 0 ? grads.bias[l].data() : nullptr;
                if (layer.kind == LayerKind::Conv3x3) {
                    conv3x3_backward_params(layer, gr_int, a_in_int, gw, gb);
                    if (l > 0) conv3x3_backward_input(layer, gr_int, g_act[l].data());
                } else {
                    dense_backward(layer, gr_int, a_in_int, l > 0 ? g_act[l].data() : nullptr,
                                   gw, gb);
                }
                continue;
            }
            const double* u_pre =
                record.tape.u_pre[l].data() + static_cast<std::size_t>(t) * n;
            const double* g_o = g_act[l + 1].data();
            const double* pot_seed =
                (has_pot && l == align)
                    ? seed.alignment_potential_grad.data() + static_cast<std::size_t>(t) * n
                    : nullptr;
            const double* o_row =
                record.tape.act[l + 1].data() + static_cast<std::size_t>(t) * n;
            double* cr = carry[l].data();
            double* gr = g_raw[l].data();
            for (std::size_t i = 0; i < n; ++i) {
                const double gate = u_pre[i] >= u_th ? 1.0 : 0.0;
                double g_upost = leak * cr[i];
                if (pot_seed != nullptr) g_upost += pot_seed[i];
                double g_upre;
                if (subtract) {
                    // u_post = u_pre - u_th * o
                    g_upre = g_o[i] * gate + g_upost * (1.0 - u_th * gate);
                } else {
                    // u_post = (1 - o) * u_pre
                    g_upre = g_o[i] * gate + g_upost * ((1.0 - o_row[i]) - u_pre[i] * gate);
                }
                cr[i] = g_upre;
                gr[i] = g_upre * gain;
            }
            const double* a_in = record.tape.act[l].data() +
                                 static_cast<std::size_t>(t) * layer.in_size();
            double* gw = grads.weight[l].size() > 0 ? grads.weight[l].data() : nullptr;
            double* gb = grads.bias[l].size() > 0 ? grads.bias[l].data() : nullptr;
            if (layer.kind == LayerKind::Conv3x3) {
                conv3x3_backward_params(layer, gr, a_in, gw, gb);
                if (l > 0) conv3x3_backward_input(layer, gr, g_act[l].data());
            } else {
                dense_backward(layer, gr, a_in, l > 0 ? g_act[l].data() : nullptr, gw, gb);
            }
        }
    }
    return grads;
}

void sgd_update(NetworkParams& params, const Gradients& grads, double eta, LayerRange span) {
    if (grads.params_fingerprint != params.fingerprint()) {
        throw IntegrityError("sgd_update: gradients were computed for different parameters");
    }
    if (span.begin < 0 || span.end > params.layer_count() || span.begin > span.end) {
        throw ConfigError("sgd_update: layer span out of range");
    }
    if (!std::isfinite(eta)) throw NumericError("sgd_update: learning rate is not finite");

    // Verify first, mutate second: a non-finite gradient must leave the
    // parameters exactly as they were.
    for (int l = span.begin; l < span.end; ++l) {
        auto check = [&](const Tensor& g) {
            for (std::size_t i = 0; i < g.size(); ++i) {
                if (!std::isfinite(g.data()[i])) {
                    throw NumericError("sgd_update: non-finite gradient in layer " +
                                       std::to_string(l));
                }
            }
        };
        if (l < static_cast<int>(grads.weight.size())) check(grads.weight[l]);
        if (l < static_cast<int>(grads.bias.size())) check(grads.bias[l]);
    }
    for (int l = span.begin; l < span.end; ++l) {
        Layer& layer = params.layers[l];
        if (layer.weight.size() > 0 && l < static_cast<int>(grads.weight.size()) &&
            grads.weight[l].size() > 0) {
            if (!layer.weight.same_shape(grads.weight[l])) {
                throw ShapeError("sgd_update: weight gradient shape mismatch in layer " +
                                 std::to_string(l));
            }
            double* w = layer.weight.data();
            const double* g = grads.weight[l].data();
            for (std::size_t i = 0; i < layer.weight.size(); ++i) w[i] -= eta * g[i];
        }
        if (layer.bias.size() > 0 && l < static_cast<int>(grads.bias.size()) &&
            grads.bias[l].size() > 0) {
            double* b = layer.bias.data();
            const double* g = grads.bias[l].data();
            for (std::size_t i = 0; i < layer.bias.size(); ++i) b[i] -= eta * g[i];
        }
    }
}

} // namespace snnspace
