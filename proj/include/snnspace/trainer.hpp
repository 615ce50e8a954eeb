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

#include <cmath>

#include "snnspace/augment.hpp"
#include "snnspace/dataset.hpp"
#include "snnspace/network.hpp"
#include "snnspace/rng.hpp"

namespace snnspace {

struct TrainConfig {
    int epochs = 40;
    int batch_size = 16;
    double eta = 0.03;         // minibatch SGD rate on all layers; spiking
                               // layers silence themselves when driven hard,
                               // so this is gentler than a dense net would use
    double eta_decay = 0.93;   // per-epoch multiplier on eta; a hot rate that
                               // stays hot eventually drives every firing
                               // rate to zero, so the schedule cools off
    double momentum = 0.0;     // EMA momentum on the minibatch grads. Off by
                               // default: the averaging lags corrections by
                               // ~1/(1-m) batches, and near the silent state
                               // (zero rates, zero gradients, absorbing) a
                               // lagged push is unrecoverable
    double clip_norm = 1.0;    // cap on the global update norm; <= 0 turns
                               // clipping off. Untrained nets emit occasional
                               // huge gradients that would otherwise shove
                               // the net straight into the silent state
    int time_steps = 16;       // encoding window
    int patience = 8;          // stop after this many epochs without a new
                               // best loss
    double augment_prob = 0.0; // chance a training sample is replaced by a
                               // random mixed augmentation of itself; 0
                               // disables. Augmented training hardens the
                               // backprop head, but with the count readout
                               // (refit below) a plainly trained extractor
                               // both classifies better and gains more from
                               // test-time adaptation, so plain training is
                               // the default
    AugmentPolicy augment{.severity = 1.5};
    double divergence_factor = 10.0; // abort when loss exceeds this multiple
                                     // of the first epoch's loss

    // Pre-training firing-rate calibration (see calibrate_firing_rates);
    // rounds = 0 skips it, which leaves most spiking units dead under the
    // raw fan-in init.
    double calibrate_target = 0.12;
    int calibrate_rounds = 6;
    int calibrate_samples = 16;

    // Post-training readout replacement (see refit_readout); false keeps
    // the backprop-trained dense head.
    bool refit = true;
    int refit_iters = 800;
    double refit_eta = 0.5;

    void validate() const {
        if (epochs < 1) throw ConfigError("train: epochs must be positive");
        if (batch_size < 1) throw ConfigError("train: batch_size must be positive");
        if (!(eta > 0.0)) throw ConfigError("train: eta must be positive");
        if (!(eta_decay > 0.0) || eta_decay > 1.0) {
            throw ConfigError("train: eta_decay must lie in (0, 1]");
        }
        if (momentum < 0.0 || momentum >= 1.0) {
            throw ConfigError("train: momentum must lie in [0, 1)");
        }
        if (!std::isfinite(clip_norm)) {
            throw ConfigError("train: clip_norm must be finite");
        }
        if (augment_prob < 0.0 || augment_prob > 1.0) {
            throw ConfigError("train: augment_prob must lie in [0, 1]");
        }
        if (augment_prob > 0.0) augment.validate();
        if (time_steps < 1) throw ConfigError("train: time_steps must be positive");
        if (patience < 1) throw ConfigError("train: patience must be positive");
        if (!(divergence_factor > 1.0)) {
            throw ConfigError("train: divergence_factor must exceed 1");
        }
        if (calibrate_rounds < 0) {
            throw ConfigError("train: calibrate_rounds must be non-negative");
        }
        if (calibrate_rounds > 0) {
            if (!(calibrate_target > 0.0) || calibrate_target >= 1.0) {
                throw ConfigError("train: calibrate_target must lie in (0, 1)");
            }
            if (calibrate_samples < 1) {
                throw ConfigError("train: calibrate_samples must be positive");
            }
        }
        if (refit) {
            if (refit_iters < 1) throw ConfigError("train: refit_iters must be positive");
            if (!(refit_eta > 0.0)) throw ConfigError("train: refit_eta must be positive");
        }
    }
};

struct TrainStats {
    std::vector<double> epoch_loss; // mean cross-entropy per epoch
    std::vector<double> epoch_accuracy;
    bool diverged = false; // loss blew up; training stopped at once
    int epochs_run = 0;
    int best_epoch = -1;   // epoch whose parameters were kept
};

/// Data-dependent rescaling of freshly initialised weights: the incoming
/// weights of every conv channel and dense unit are scaled until the
/// unit's mean firing rate on a probe batch approaches `target_rate`. A
/// fan-in rule alone cannot balance a spiking stack — rates compound
/// layer over layer, so a global gain leaves units silent or saturated
/// depending on the draw — and a unit that never crosses threshold has a
/// zero surrogate gate and can never recover through training. Runs
/// `rounds` damped passes; all encodings descend from `rng`.
void calibrate_firing_rates(NetworkParams& params, const Dataset& data,
                            int time_steps, int num_samples, double target_rate,
                            int rounds, Rng& rng);

/// Minibatch SGD with cross-entropy on the softmaxed readout scores.
/// Encodings are redrawn every epoch (a mild regulariser), the sample
/// order is reshuffled per epoch, and all randomness descends from `rng`.
///
/// Spiking nets can die late in a run — every rate drifts to zero and the
/// surrogate gradient with it, pinning the loss at chance with no way
/// back — so on return `params` always holds the lowest-loss epoch's
/// parameters, and training stops early once `patience` epochs pass
/// without improvement (or immediately if the loss blows up).
TrainStats train_source(NetworkParams& params, const Dataset& train,
                        const TrainConfig& config, Rng& rng);

struct RefitReport {
    double final_loss = 0.0;     // mean cross-entropy of the fitted readout
    double train_accuracy = 0.0; // on the features it was fitted to
    int iters = 0;
};

/// Replace the backprop-trained dense head with a single linear readout
/// fitted by full-batch softmax regression on each channel's total spike
/// count at the alignment layer (averaged over positions, summed over
/// time). The backprop head earns slightly higher clean accuracy but
/// reads the extractor through learned position- and timing-sensitive
/// weights, and single-instance adaptation of the extractor shifts
/// exactly those statistics — the old head turns adaptation into a net
/// loss, the count readout into a net gain. The regression's optimum is
/// convex, so the refit also removes the head's dependence on the
/// training trajectory.
///
/// Requires every layer between the alignment layer and the extractor
/// end to be an average pool collapsing the map to 1x1 (the standard
/// collapse_spatial layout): then the count feature is exactly what the
/// deployed head integrates, and the fitted regression and the deployed
/// network score identically. Feature encodings descend from `rng`
/// ("refit-encode"/i per sample).
RefitReport refit_readout(NetworkParams& params, const Dataset& train,
                          const TrainConfig& config, Rng& rng);

/// Plain accuracy of the model on a dataset, one fresh encoding per
/// sample. Sample i's encoding comes from the "encode-original" child of
/// the "sample"/i child of `rng` — the same stream an adaptation episode
/// handed that child uses for the original image, so adaptation with
/// eta = 0 and plain evaluation see identical spikes.
double evaluate(const NetworkParams& params, const Dataset& data, int time_steps, Rng& rng);

/// Mean cross-entropy of softmaxed scores against a label (shared by the
/// trainer and its tests).
double cross_entropy(const std::vector<double>& scores, int label);

} // namespace snnspace
