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

#include "snnspace/trainer.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>

#include "snnspace/adapt.hpp"
#include "snnspace/encode.hpp"

namespace snnspace {

namespace {

/// Softmax probabilities of the readout scores (max-shifted).
std::vector<double> score_softmax(const std::vector<double>& scores) {
    const double mx = *std::max_element(scores.begin(), scores.end());
    std::vector<double> p(scores.size());
    double sum = 0.0;
    for (std::size_t k = 0; k < scores.size(); ++k) {
        p[k] = std::exp(scores[k] - mx);
        sum += p[k];
    }
    for (double& v : p) v /= sum;
    return p;
}

void accumulate(Gradients& total, const Gradients& g) {
    if (total.weight.empty()) {
        total = g;
        return;
    }
    for (std::size_t l = 0; l < total.weight.size(); ++l) {
        for (std::size_t i = 0; i < total.weight[l].size(); ++i) {
            total.weight[l].data()[i] += g.weight[l].data()[i];
        }
        for (std::size_t i = 0; i < total.bias[l].size(); ++i) {
            total.bias[l].data()[i] += g.bias[l].data()[i];
        }
    }
}

void scale(Gradients& g, double f) {
    for (std::size_t l = 0; l < g.weight.size(); ++l) {
        for (std::size_t i = 0; i < g.weight[l].size(); ++i) g.weight[l].data()[i] *= f;
        for (std::size_t i = 0; i < g.bias[l].size(); ++i) g.bias[l].data()[i] *= f;
    }
}

/// velocity <- m * velocity + (1 - m) * g, an exponential moving average
/// of the minibatch gradients. The damped form keeps the step magnitude
/// comparable to the raw gradient — undamped momentum integrates the
/// strongly correlated early gradients into one large sustained push,
/// which silences a spiking net outright. The blend deliberately mixes
/// gradients from earlier parameter values, so it inherits the
/// fingerprint of the fresh gradient: that is the state it is applied to.
void momentum_blend(Gradients& velocity, const Gradients& g, double m) {
    if (m == 0.0) {
        velocity = g;
        return;
    }
    if (velocity.weight.empty()) {
        // Damp the very first gradient too. Seeding the average with the
        // full first gradient replays it 1/(1-m) times, and the first
        // batch of an untrained net is exactly where gradients spike.
        velocity = g;
        scale(velocity, 1.0 - m);
        return;
    }
    for (std::size_t l = 0; l < velocity.weight.size(); ++l) {
        for (std::size_t i = 0; i < velocity.weight[l].size(); ++i) {
            velocity.weight[l].data()[i] = m * velocity.weight[l].data()[i] +
                                           (1.0 - m) * g.weight[l].data()[i];
        }
        for (std::size_t i = 0; i < velocity.bias[l].size(); ++i) {
            velocity.bias[l].data()[i] = m * velocity.bias[l].data()[i] +
                                         (1.0 - m) * g.bias[l].data()[i];
        }
    }
    velocity.params_fingerprint = g.params_fingerprint;
}

/// Scale `g` down so its global L2 norm is at most `cap` (no-op when the
/// cap is non-positive or already satisfied).
void clip_to_norm(Gradients& g, double cap) {
    if (cap <= 0.0) return;
    double sq = 0.0;
    for (std::size_t l = 0; l < g.weight.size(); ++l) {
        for (std::size_t i = 0; i < g.weight[l].size(); ++i) {
            const double v = g.weight[l].data()[i];
            sq += v * v;
        }
        for (std::size_t i = 0; i < g.bias[l].size(); ++i) {
            const double v = g.bias[l].data()[i];
            sq += v * v;
        }
    }
    const double norm = std::sqrt(sq);
    if (norm > cap) scale(g, cap / norm);
}

} // namespace

void calibrate_firing_rates(NetworkParams& params, const Dataset& data,
                            int time_steps, int num_samples, double target_rate,
                            int rounds, Rng& rng) {
    if (data.size() == 0) throw ConfigError("calibrate: empty dataset");
    if (num_samples < 1) throw ConfigError("calibrate: num_samples must be positive");
    if (time_steps < 1) throw ConfigError("calibrate: time_steps must be positive");
    if (!(target_rate > 0.0) || target_rate >= 1.0) {
        throw ConfigError("calibrate: target_rate must lie in (0, 1)");
    }
    const std::size_t probe = std::min<std::size_t>(num_samples, data.size());
    const std::size_t stride = data.size() / probe; // spread over the classes

    for (int round = 0; round < rounds; ++round) {
        // Per-unit firing rates: one entry per conv output channel or
        // dense output unit. Calibrating whole layers is not enough — a
        // layer can hit the target on average while individual filters
        // sit dead, and a dead filter never trains.
        std::vector<std::vector<double>> rate(params.layers.size());
        for (std::size_t l = 0; l < params.layers.size(); ++l) {
            if (params.layers[l].spiking()) {
                rate[l].assign(params.layers[l].weight.shape()[0], 0.0);
            }
        }
        for (std::size_t p = 0; p < probe; ++p) {
            Rng enc = rng.split("calibrate",
                                (static_cast<std::uint64_t>(round) << 32) | p);
            const SpikeTrain spikes =
                poisson_encode(data.images[p * stride], time_steps, enc);
            const ForwardRecord rec = forward(params, spikes, /*record_tape=*/true);
            for (std::size_t l = 0; l < params.layers.size(); ++l) {
                if (!params.layers[l].spiking()) continue;
                const Tensor& act = rec.tape.act[l + 1]; // {T, units*spatial}
                const std::size_t units = rate[l].size();
                const std::size_t spatial = act.shape()[1] / units;
                const std::size_t steps = act.shape()[0];
                for (std::size_t t = 0; t < steps; ++t) {
                    const double* row = act.data() + t * act.shape()[1];
                    for (std::size_t u = 0; u < units; ++u) {
                        double sum = 0.0;
                        for (std::size_t s = 0; s < spatial; ++s) sum += row[u * spatial + s];
                        rate[l][u] += sum / static_cast<double>(spatial * steps);
                    }
                }
            }
        }
        for (std::size_t l = 0; l < params.layers.size(); ++l) {
            if (!params.layers[l].spiking()) continue;
            Layer& layer = params.layers[l];
            const std::size_t units = rate[l].size();
            const std::size_t per_unit = layer.weight.size() / units;
            for (std::size_t u = 0; u < units; ++u) {
                const double r = rate[l][u] / static_cast<double>(probe);
                // Square-root damping plus a per-round cap: units interact
                // (scaling one changes every deeper rate), so each round
                // takes a conservative step and the next re-measures.
                double factor = std::sqrt(target_rate / std::max(r, 1e-4));
                factor = std::clamp(factor, 0.5, 2.0);
                double* block = layer.weight.data() + u * per_unit;
                for (std::size_t i = 0; i < per_unit; ++i) block[i] *= factor;
                if (!layer.bias.empty()) layer.bias.data()[u] *= factor;
            }
        }
    }
}

double cross_entropy(const std::vector<double>& scores, int label) {
    if (label < 0 || label >= static_cast<int>(scores.size())) {
        throw ConfigError("cross_entropy: label out of range");
    }
    const std::vector<double> p = score_softmax(scores);
    return -std::log(std::max(p[label], 1e-300));
}

TrainStats train_source(NetworkParams& params, const Dataset& train,
                        const TrainConfig& config, Rng& rng) {
    config.validate();
    if (train.size() == 0) throw ConfigError("train_source: empty dataset");
    if (train.images.size() != train.labels.size()) {
        throw ConfigError("train_source: image/label count mismatch");
    }
    const int classes = params.num_classes();
    for (int label : train.labels) {
        if (label < 0 || label >= classes) {
            throw ConfigError("train_source: label outside the readout range");
        }
    }

    TrainStats stats;
    const std::size_t n = train.size();
    std::vector<std::size_t> order(n);
    std::iota(order.begin(), order.end(), 0);

    NetworkParams best = params;
    double best_loss = std::numeric_limits<double>::infinity();
    double first_loss = 0.0;
    int since_best = 0;
    Gradients velocity;

    for (int epoch = 0; epoch < config.epochs; ++epoch) {
        const double eta_epoch =
            config.eta * std::pow(config.eta_decay, static_cast<double>(epoch));
        // per-epoch shuffle, independent of the encode streams
        Rng shuffle_rng = rng.split("shuffle", static_cast<std::uint64_t>(epoch));
        for (std::size_t i = n; i > 1; --i) {
            const std::size_t j = shuffle_rng.uniform_int(static_cast<std::uint32_t>(i));
            std::swap(order[i - 1], order[j]);
        }

        double epoch_loss = 0.0;
        std::size_t correct = 0;
        std::size_t done = 0;
        while (done < n) {
            const std::size_t batch_end = std::min(done + config.batch_size, n);
            Gradients batch_grad;
            for (std::size_t b = done; b < batch_end; ++b) {
                const std::size_t idx = order[b];
                const std::uint64_t tag = (static_cast<std::uint64_t>(epoch) << 32) | idx;
                const Tensor* image = &train.images[idx];
                Tensor augmented;
                if (config.augment_prob > 0.0) {
                    Rng aug = rng.split("augment", tag);
                    if (aug.bernoulli(config.augment_prob)) {
                        augmented = augmix_sample(*image, config.augment, aug);
                        image = &augmented;
                    }
                }
                Rng enc = rng.split("encode", tag);
                const SpikeTrain train_spikes =
                    poisson_encode(*image, config.time_steps, enc);
                ForwardRecord rec = forward(params, train_spikes, /*record_tape=*/true);

                const int label = train.labels[idx];
                epoch_loss += cross_entropy(rec.scores, label);
                if (argmax_score(rec.scores) == label) ++correct;

                LossSeed seed;
                seed.score_grad = score_softmax(rec.scores);
                seed.score_grad[label] -= 1.0;
                accumulate(batch_grad, backward(params, rec, seed));
            }
            scale(batch_grad, 1.0 / static_cast<double>(batch_end - done));
            clip_to_norm(batch_grad, config.clip_norm);
            momentum_blend(velocity, batch_grad, config.momentum);
            sgd_update(params, velocity, eta_epoch, params.full_range());
            done = batch_end;
        }
        epoch_loss /= static_cast<double>(n);
        stats.epoch_loss.push_back(epoch_loss);
        stats.epoch_accuracy.push_back(static_cast<double>(correct) /
                                       static_cast<double>(n));
        stats.epochs_run = epoch + 1;
        if (epoch == 0) first_loss = epoch_loss;

        if (!std::isfinite(epoch_loss) ||
            (epoch > 0 && epoch_loss > config.divergence_factor * first_loss)) {
            stats.diverged = true;
            break;
        }
        if (epoch_loss < best_loss) {
            best_loss = epoch_loss;
            best = params;
            stats.best_epoch = epoch;
            since_best = 0;
        } else if (++since_best >= config.patience) {
            break;
        }
    }
    params = best; // training always lands on the lowest-loss epoch
    return stats;
}

RefitReport refit_readout(NetworkParams& params, const Dataset& train,
                          const TrainConfig& config, Rng& rng) {
    config.validate();
    if (train.size() == 0) throw ConfigError("refit_readout: empty training set");
    if (params.alignment_layer < 0 || params.layers.empty()) {
        throw ConfigError("refit_readout: network has no alignment layer");
    }
    // The count feature below equals the deployed head's input summed
    // over time only if nothing but average pools separates the
    // alignment layer from the head, ending in a 1x1 map: averaging
    // commutes with the time sum, and a chain of 2x2 average pools
    // down to 1x1 is exactly the mean over positions.
    for (int l = params.alignment_layer + 1; l < params.extractor_end; ++l) {
        if (params.layers[l].kind != LayerKind::AvgPool2x2) {
            throw ConfigError("refit_readout: layer " + std::to_string(l) +
                              " between the alignment layer and the head is not an average pool");
        }
    }
    const Layer& last_ext = params.layers[params.extractor_end - 1];
    if (last_ext.out_h != 1 || last_ext.out_w != 1) {
        throw ConfigError("refit_readout: extractor output map is " +
                          std::to_string(last_ext.out_h) + "x" +
                          std::to_string(last_ext.out_w) +
                          ", expected 1x1 (collapse_spatial layout)");
    }
    const int C = params.layers[params.alignment_layer].out_c;
    const int K = params.num_classes();
    const int T = config.time_steps;
    const int n = static_cast<int>(train.size());

    // Each channel's total spike count at the alignment layer, averaged
    // over the spatial map; one fixed encoding per training sample.
    std::vector<double> feats(static_cast<std::size_t>(n) * C);
    for (int i = 0; i < n; ++i) {
        Rng enc = rng.split("refit-encode", static_cast<std::uint64_t>(i));
        const SpikeTrain spikes = poisson_encode(train.images[i], T, enc);
        const ForwardRecord rec = forward(params, spikes, /*record_tape=*/false);
        const Tensor& sp = rec.alignment_spikes; // {T, C, H, W}
        const std::size_t hw =
            static_cast<std::size_t>(sp.shape()[2]) * sp.shape()[3];
        double* f = feats.data() + static_cast<std::size_t>(i) * C;
        std::fill(f, f + C, 0.0);
        for (int t = 0; t < T; ++t) {
            for (int c = 0; c < C; ++c) {
                const double* base =
                    sp.data() + (static_cast<std::size_t>(t) * C + c) * hw;
                for (std::size_t p = 0; p < hw; ++p) f[c] += base[p];
            }
        }
        for (int c = 0; c < C; ++c) f[c] /= static_cast<double>(hw);
    }

    // Full-batch softmax regression from zero init. The objective is
    // convex, so the result is the (regularisation-free) optimum rather
    // than a draw-dependent local solution.
    std::vector<double> w(static_cast<std::size_t>(K) * C, 0.0);
    std::vector<double> b(K, 0.0);
    std::vector<double> z(K);
    const auto scores_of = [&](const double* f) {
        for (int k = 0; k < K; ++k) {
            double s = b[k];
            for (int c = 0; c < C; ++c) s += w[static_cast<std::size_t>(k) * C + c] * f[c];
            z[k] = s;
        }
    };
    std::vector<double> gw(w.size());
    std::vector<double> gb(b.size());
    const double step = config.refit_eta / n;
    for (int it = 0; it < config.refit_iters; ++it) {
        std::fill(gw.begin(), gw.end(), 0.0);
        std::fill(gb.begin(), gb.end(), 0.0);
        for (int i = 0; i < n; ++i) {
            const double* f = feats.data() + static_cast<std::size_t>(i) * C;
            scores_of(f);
            const std::vector<double> p = score_softmax(z);
            for (int k = 0; k < K; ++k) {
                const double d = p[k] - (k == train.labels[i] ? 1.0 : 0.0);
                for (int c = 0; c < C; ++c) gw[static_cast<std::size_t>(k) * C + c] += d * f[c];
                gb[k] += d;
            }
        }
        for (std::size_t j = 0; j < w.size(); ++j) w[j] -= step * gw[j];
        for (int k = 0; k < K; ++k) b[k] -= step * gb[k];
    }

    RefitReport report;
    report.iters = config.refit_iters;
    int correct = 0;
    for (int i = 0; i < n; ++i) {
        scores_of(feats.data() + static_cast<std::size_t>(i) * C);
        report.final_loss += cross_entropy(z, train.labels[i]);
        if (argmax_score(z) == train.labels[i]) ++correct;
    }
    report.final_loss /= n;
    report.train_accuracy = static_cast<double>(correct) / n;

    // Swap the head: everything after the extractor is dropped for one
    // dense readout holding the regression weights. The readout
    // integrates w.x_t + bias over the T steps while the regression saw
    // sum_t x_t, so the intercept spreads evenly across steps.
    params.layers.resize(static_cast<std::size_t>(params.extractor_end));
    Layer head;
    head.kind = LayerKind::Dense;
    head.weight = Tensor({K, C});
    std::copy(w.begin(), w.end(), head.weight.data());
    head.bias = Tensor({K});
    for (int k = 0; k < K; ++k) head.bias.data()[k] = b[k] / T;
    params.layers.push_back(std::move(head));
    params.bind(params.input_c, params.input_h, params.input_w);
    return report;
}

double evaluate(const NetworkParams& params, const Dataset& data, int time_steps, Rng& rng) {
    if (data.size() == 0) throw ConfigError("evaluate: empty dataset");
    std::size_t correct = 0;
    for (std::size_t i = 0; i < data.size(); ++i) {
        // Per-sample child stream, then the same encoding label the
        // adaptation episode uses for the original image. Handing sample
        // stream i to adapt_single therefore reproduces this encoding
        // exactly, which is what makes a zero-eta adaptation run equal
        // plain evaluation bit for bit.
        Rng enc = rng.split("sample", static_cast<std::uint64_t>(i)).split("encode-original");
        const SpikeTrain spikes = poisson_encode(data.images[i], time_steps, enc);
        const ForwardRecord rec = forward(params, spikes, /*record_tape=*/false);
        if (argmax_score(rec.scores) == data.labels[i]) ++correct;
    }
    return static_cast<double>(correct) / static_cast<double>(data.size());
}

} // namespace snnspace
