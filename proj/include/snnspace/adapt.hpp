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

#include <vector>

#include "snnspace/augment.hpp"
#include "snnspace/network.hpp"
#include "snnspace/rng.hpp"
#include "snnspace/tensor.hpp"

namespace snnspace {

// ---------------------------------------------------------------------------
// Feature aggregation and channel distributions
// ---------------------------------------------------------------------------

enum class Aggregation : int {
    SpikeCount = 0,   // per-position spike counts over the whole window
    MeanPotential,    // average post-reset membrane potential over time
    PerStep,          // one feature slice per time step
};

enum class DistScope : int {
    PerChannel = 0, // one distribution per channel (C rows of length D)
    Global,         // a single distribution over all C*D positions
};

/// Aggregated activity of the alignment layer: values {S, C, D} where
/// S is 1 (SpikeCount, MeanPotential) or T (PerStep), C the channel count
/// and D the flattened spatial size.
struct FeatureMap {
    Tensor values;
};

/// Feature maps turned into probability rows: probs has the same {S,C,D}
/// layout (or {S,1,C*D} under DistScope::Global) with each row summing
/// to one.
struct ChannelDistribution {
    Tensor probs;
};

struct AdaptConfig {
    // Single-step learning rate on the extractor. The useful range is a
    // sharp interior window: smaller steps raise view agreement on ~95%
    // of corrupted samples but flip too few predictions to move
    // accuracy, while an order of magnitude more overshoots the
    // surrogate's linear region and makes agreement *worse* on most
    // samples. At this size one step still raises similarity on ~82% of
    // corrupted samples and the accuracy gain holds on every probe seed.
    double eta = 0.0015;
    int num_views = 32;    // augmented views per instance
    int time_steps = 16;   // encoding window length
    Aggregation aggregation = Aggregation::SpikeCount;
    double smoothing_sigma = 0.0; // PerStep only: Gaussian smoothing over t
    DistScope scope = DistScope::PerChannel;
    double lambda_mmd = 0.0;     // weight of the distribution-distance term
    double mmd_bandwidth = 0.1;  // Gaussian kernel bandwidth
    // Views milder than the training-time default: the views only need
    // to disagree enough to expose corruption-sensitive features, and
    // harsher views push their encodings off the data manifold the
    // extractor was fitted to.
    AugmentPolicy augment{.severity = 1.5};

    void validate() const;
};

/// Row-stochastic T x T Gaussian smoothing matrix, kernel truncated at
/// three sigma, boundary handled by mirroring (the adjoint used in the
/// backward pass is then simply the transpose).
Tensor smoothing_matrix(int t_steps, double sigma);

/// Reduce the alignment layer's activity ({T,C,H,W} spikes and post-reset
/// potentials) into a feature map per the configured aggregation.
FeatureMap aggregate_features(const Tensor& align_spikes, const Tensor& align_potentials,
                              const AdaptConfig& config);

/// Per-channel softmax: every (slice, channel) row of the feature map
/// becomes a probability row (max-shifted for stability).
ChannelDistribution normalize_channels(const FeatureMap& features);

/// Whole-map softmax: one probability row over all C*D positions per slice.
ChannelDistribution normalize_flat(const FeatureMap& features);

// ---------------------------------------------------------------------------
// Similarity and losses
// ---------------------------------------------------------------------------

/// Mean over slices and rows of the inner products between matching
/// probability rows. Lands in (0, 1]: 1 only for identical one-hot rows.
double similarity(const ChannelDistribution& a, const ChannelDistribution& b);

/// Similarity under whole-map normalization, starting from raw features.
double global_similarity(const FeatureMap& a, const FeatureMap& b);

/// Sum of (1 - similarity) over all unordered view pairs.
double consistency_loss(const std::vector<ChannelDistribution>& dists);

/// Squared maximum mean discrepancy between matching rows (Gaussian
/// kernel on the D per-position masses), averaged over slices and rows.
double mmd_squared(const ChannelDistribution& a, const ChannelDistribution& b,
                   double bandwidth);

/// consistency_loss plus lambda_mmd times the pairwise MMD^2 sum.
double combined_loss(const std::vector<ChannelDistribution>& dists, const AdaptConfig& config);

/// Batch loss evaluation with optional analytic gradients with respect to
/// the raw feature maps (through the softmax and, when enabled, the MMD
/// term). pair_sims holds the similarity of every unordered pair in
/// (i, j), j < i order, i.e. pair p = (1,0), (2,0), (2,1), (3,0), ...
struct BatchLoss {
    double loss = 0.0;
    double consistency = 0.0;
    double mmd_total = 0.0;
    double mean_similarity = 0.0;
    std::vector<double> pair_sims;
    std::vector<Tensor> feature_grad; // per view, {S,C,D}; empty without want_grads
};
BatchLoss batch_loss(const std::vector<FeatureMap>& views, const AdaptConfig& config,
                     bool want_grads);

/// Pull a d(loss)/d(features) tensor back to seeds on the alignment
/// layer's activity: the adjoint of aggregate_features.
LossSeed alignment_seed(const Tensor& feature_grad, const AdaptConfig& config,
                        const Tensor& align_spikes_like);

// ---------------------------------------------------------------------------
// Single-instance adaptation
// ---------------------------------------------------------------------------

/// Everything observable about one adaptation episode.
struct AdaptOutcome {
    int pred_before = -1;
    int pred_after = -1;
    std::vector<double> scores_before;
    std::vector<double> scores_after;
    double pre_loss = 0.0;
    double post_loss = 0.0;
    double pre_mean_similarity = 0.0;
    double post_mean_similarity = 0.0;
    std::vector<double> pre_pair_sims;
    std::vector<double> post_pair_sims;
    bool fallback = false;  // non-finite gradients: parameters left untouched
    int num_updates = 0;    // 0 or 1
};

/// Adapt to a single test instance: build augmented views, encode and
/// simulate each, take one SGD step on the feature extractor against the
/// pairwise consistency objective, then classify the original instance
/// with the adapted parameters. The caller's parameters are not modified
/// (episodes are independent); the view encodings are frozen, so the
/// pre/post comparison isolates the parameter update, and eta = 0
/// reproduces the unadapted prediction exactly.
AdaptOutcome adapt_single(const NetworkParams& params, const Tensor& image,
                          const AdaptConfig& config, Rng& rng);

/// Deterministic argmax (lowest index wins ties).
int argmax_score(const std::vector<double>& scores);

} // namespace snnspace
