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

#include "snnspace/adapt.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "snnspace/encode.hpp"

namespace snnspace {

namespace {

void softmax_row(const double* in, double* out, std::size_t n) {
    double mx = -std::numeric_limits<double>::infinity();
    for (std::size_t i = 0; i < n; ++i) {
        if (!std::isfinite(in[i])) {
            throw NumericError("normalize: non-finite feature value");
        }
        mx = std::max(mx, in[i]);
    }
    double sum = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
        out[i] = std::exp(in[i] - mx);
        sum += out[i];
    }
    for (std::size_t i = 0; i < n; ++i) out[i] /= sum;
}

void require_feature_shape(const Tensor& values, const char* who) {
    if (values.rank() != 3) {
        throw ShapeError(std::string(who) + ": feature map must be {S,C,D}");
    }
}

int reflect_time(int t, int n) {
    if (n == 1) return 0;
    const int period = 2 * n - 2;
    t = std::abs(t) % period;
    return t < n ? t : period - t;
}

/// Work view of the distributions for loss purposes: under PerChannel the
/// rows are the (S*C) channel rows of length D; under Global each slice
/// is one row of length C*D. Either way the flat layout is unchanged, so
/// only the row geometry differs.
struct RowGeometry {
    int slices = 0;
    int rows_per_slice = 0; // C, or 1 under Global
    int row_len = 0;        // D, or C*D under Global
    int rows() const { return slices * rows_per_slice; }
};

RowGeometry geometry(const Tensor& probs_or_values, DistScope scope) {
    RowGeometry g;
    g.slices = probs_or_values.shape()[0];
    const int c = probs_or_values.shape()[1], d = probs_or_values.shape()[2];
    if (scope == DistScope::PerChannel) {
        g.rows_per_slice = c;
        g.row_len = d;
    } else {
        g.rows_per_slice = 1;
        g.row_len = c * d;
    }
    return g;
}

double kernel(double x, double y, double inv_two_bw2) {
    const double d = x - y;
    return std::exp(-d * d * inv_two_bw2);
}

double row_mmd_squared(const double* a, const double* b, int n, double bandwidth) {
    const double inv_two_bw2 = 1.0 / (2.0 * bandwidth * bandwidth);
    double kaa = 0.0, kbb = 0.0, kab = 0.0;
    for (int i = 0; i < n; ++i) {
        for (int j = 0; j < n; ++j) {
            kaa += kernel(a[i], a[j], inv_two_bw2);
            kbb += kernel(b[i], b[j], inv_two_bw2);
            kab += kernel(a[i], b[j], inv_two_bw2);
        }
    }
    const double inv_n2 = 1.0 / (static_cast<double>(n) * n);
    return inv_n2 * (kaa + kbb - 2.0 * kab);
}

/// Accumulate d(row_mmd_squared)/da into g_a and /db into g_b, both
/// scaled by `scale`.
void row_mmd_grad(const double* a, const double* b, int n, double bandwidth, double scale,
                  double* g_a, double* g_b) {
    const double bw2 = bandwidth * bandwidth;
    const double inv_two_bw2 = 1.0 / (2.0 * bw2);
    const double inv_n2 = 1.0 / (static_cast<double>(n) * n);
    for (int i = 0; i < n; ++i) {
        double acc_a = 0.0, acc_b = 0.0;
        for (int j = 0; j < n; ++j) {
            // d k(x,y)/dx = -((x-y)/bw^2) k(x,y)
            acc_a += -((a[i] - a[j]) / bw2) * kernel(a[i], a[j], inv_two_bw2);
            acc_a -= -((a[i] - b[j]) / bw2) * kernel(a[i], b[j], inv_two_bw2);
            acc_b += -((b[i] - b[j]) / bw2) * kernel(b[i], b[j], inv_two_bw2);
            acc_b -= -((b[i] - a[j]) / bw2) * kernel(b[i], a[j], inv_two_bw2);
        }
        g_a[i] += scale * inv_n2 * 2.0 * acc_a;
        g_b[i] += scale * inv_n2 * 2.0 * acc_b;
    }
}

} // namespace

void AdaptConfig::validate() const {
    if (!std::isfinite(eta) || eta < 0.0) {
        throw ConfigError("adapt: eta must be finite and non-negative");
    }
    if (num_views < 2) throw ConfigError("adapt: num_views must be at least 2");
    if (time_steps < 1) throw ConfigError("adapt: time_steps must be at least 1");
    if (!std::isfinite(smoothing_sigma) || smoothing_sigma < 0.0) {
        throw ConfigError("adapt: smoothing_sigma must be finite and non-negative");
    }
    if (smoothing_sigma > 0.0 && aggregation != Aggregation::PerStep) {
        throw ConfigError("adapt: temporal smoothing requires per-step aggregation");
    }
    if (!std::isfinite(lambda_mmd) || lambda_mmd < 0.0) {
        throw ConfigError("adapt: lambda_mmd must be finite and non-negative");
    }
    if (!(mmd_bandwidth > 0.0)) throw ConfigError("adapt: mmd_bandwidth must be positive");
    augment.validate();
}

Tensor smoothing_matrix(int t_steps, double sigma) {
    if (t_steps < 1) throw ConfigError("smoothing_matrix: need at least one step");
    Tensor k({t_steps, t_steps});
    if (sigma <= 0.0) {
        for (int t = 0; t < t_steps; ++t) k.at2(t, t) = 1.0;
        return k;
    }
    const int radius = static_cast<int>(std::ceil(3.0 * sigma));
    for (int t = 0; t < t_steps; ++t) {
        double sum = 0.0;
        for (int dt = -radius; dt <= radius; ++dt) {
            const double w = std::exp(-(static_cast<double>(dt) * dt) / (2.0 * sigma * sigma));
            k.at2(t, reflect_time(t + dt, t_steps)) += w;
            sum += w;
        }
        for (int s = 0; s < t_steps; ++s) k.at2(t, s) /= sum;
    }
    return k;
}

FeatureMap aggregate_features(const Tensor& align_spikes, const Tensor& align_potentials,
                              const AdaptConfig& config) {
    if (align_spikes.rank() != 4) {
        throw ShapeError("aggregate_features: alignment activity must be {T,C,H,W}");
    }
    if (config.aggregation == Aggregation::MeanPotential &&
        !align_potentials.same_shape(align_spikes)) {
        throw ShapeError("aggregate_features: potential tensor shape mismatch");
    }
    const int t_steps = align_spikes.shape()[0];
    const int c = align_spikes.shape()[1];
    const int d = align_spikes.shape()[2] * align_spikes.shape()[3];
    const std::size_t plane = static_cast<std::size_t>(c) * d;

    FeatureMap fm;
    switch (config.aggregation) {
        case Aggregation::SpikeCount: {
            fm.values = Tensor({1, c, d});
            for (int t = 0; t < t_steps; ++t) {
                const double* src = align_spikes.data() + static_cast<std::size_t>(t) * plane;
                for (std::size_t i = 0; i < plane; ++i) fm.values.data()[i] += src[i];
            }
            break;
        }
        case Aggregation::MeanPotential: {
            fm.values = Tensor({1, c, d});
            for (int t = 0; t < t_steps; ++t) {
                const double* src =
                    align_potentials.data() + static_cast<std::size_t>(t) * plane;
                for (std::size_t i = 0; i < plane; ++i) fm.values.data()[i] += src[i];
            }
            for (std::size_t i = 0; i < plane; ++i) {
                fm.values.data()[i] /= static_cast<double>(t_steps);
            }
            break;
        }
        case Aggregation::PerStep: {
            fm.values = Tensor({t_steps, c, d});
            if (config.smoothing_sigma > 0.0) {
                const Tensor k = smoothing_matrix(t_steps, config.smoothing_sigma);
                for (int t = 0; t < t_steps; ++t) {
                    double* dst = fm.values.data() + static_cast<std::size_t>(t) * plane;
                    for (int s = 0; s < t_steps; ++s) {
                        const double w = k.at2(t, s);
                        if (w == 0.0) continue;
                        const double* src =
                            align_spikes.data() + static_cast<std::size_t>(s) * plane;
                        for (std::size_t i = 0; i < plane; ++i) dst[i] += w * src[i];
                    }
                }
            } else {
                std::copy(align_spikes.data(), align_spikes.data() + align_spikes.size(),
                          fm.values.data());
            }
            break;
        }
    }
    return fm;
}

ChannelDistribution normalize_channels(const FeatureMap& features) {
    require_feature_shape(features.values, "normalize_channels");
    const int s = features.values.shape()[0], c = features.values.shape()[1],
              d = features.values.shape()[2];
    ChannelDistribution dist;
    dist.probs = Tensor({s, c, d});
    for (int row = 0; row < s * c; ++row) {
        softmax_row(features.values.data() + static_cast<std::size_t>(row) * d,
                    dist.probs.data() + static_cast<std::size_t>(row) * d,
                    static_cast<std::size_t>(d));
    }
    return dist;
}

ChannelDistribution normalize_flat(const FeatureMap& features) {
    require_feature_shape(features.values, "normalize_flat");
    const int s = features.values.shape()[0];
    const int n = features.values.shape()[1] * features.values.shape()[2];
    ChannelDistribution dist;
    dist.probs = Tensor({s, 1, n});
    for (int row = 0; row < s; ++row) {
        softmax_row(features.values.data() + static_cast<std::size_t>(row) * n,
                    dist.probs.data() + static_cast<std::size_t>(row) * n,
                    static_cast<std::size_t>(n));
    }
    return dist;
}

double similarity(const ChannelDistribution& a, const ChannelDistribution& b) {
    require_feature_shape(a.probs, "similarity");
    if (!a.probs.same_shape(b.probs)) {
        throw ShapeError("similarity: distributions have different shapes");
    }
    const int rows = a.probs.shape()[0] * a.probs.shape()[1];
    const int n = a.probs.shape()[2];
    double total = 0.0;
    for (int r = 0; r < rows; ++r) {
        const double* pa = a.probs.data() + static_cast<std::size_t>(r) * n;
        const double* pb = b.probs.data() + static_cast<std::size_t>(r) * n;
        double dot = 0.0;
        for (int i = 0; i < n; ++i) dot += pa[i] * pb[i];
        total += dot;
    }
    return total / rows;
}

double global_similarity(const FeatureMap& a, const FeatureMap& b) {
    return similarity(normalize_flat(a), normalize_flat(b));
}

double consistency_loss(const std::vector<ChannelDistribution>& dists) {
    if (dists.size() < 2) {
        throw ConfigError("consistency_loss: need at least two distributions");
    }
    double loss = 0.0;
    for (std::size_t i = 1; i < dists.size(); ++i) {
        for (std::size_t j = 0; j < i; ++j) {
            loss += 1.0 - similarity(dists[i], dists[j]);
        }
    }
    return loss;
}

double mmd_squared(const ChannelDistribution& a, const ChannelDistribution& b,
                   double bandwidth) {
    require_feature_shape(a.probs, "mmd_squared");
    if (!a.probs.same_shape(b.probs)) {
        throw ShapeError("mmd_squared: distributions have different shapes");
    }
    if (!(bandwidth > 0.0)) throw ConfigError("mmd_squared: bandwidth must be positive");
    const int rows = a.probs.shape()[0] * a.probs.shape()[1];
    const int n = a.probs.shape()[2];
    double total = 0.0;
    for (int r = 0; r < rows; ++r) {
        total += row_mmd_squared(a.probs.data() + static_cast<std::size_t>(r) * n,
                                 b.probs.data() + static_cast<std::size_t>(r) * n, n,
                                 bandwidth);
    }
    return total / rows;
}

double combined_loss(const std::vector<ChannelDistribution>& dists,
                     const AdaptConfig& config) {
    double loss = consistency_loss(dists);
    if (config.lambda_mmd > 0.0) {
        double mmd = 0.0;
        for (std::size_t i = 1; i < dists.size(); ++i) {
            for (std::size_t j = 0; j < i; ++j) {
                mmd += mmd_squared(dists[i], dists[j], config.mmd_bandwidth);
            }
        }
        loss += config.lambda_mmd * mmd;
    }
    return loss;
}

BatchLoss batch_loss(const std::vector<FeatureMap>& views, const AdaptConfig& config,
                     bool want_grads) {
    const int m = static_cast<int>(views.size());
    if (m < 2) throw ConfigError("batch_loss: need at least two views");
    for (const FeatureMap& v : views) {
        require_feature_shape(v.values, "batch_loss");
        if (!v.values.same_shape(views[0].values)) {
            throw ShapeError("batch_loss: views disagree on feature shape");
        }
    }

    std::vector<ChannelDistribution> dists(m);
    for (int b = 0; b < m; ++b) {
        dists[b] = config.scope == DistScope::PerChannel ? normalize_channels(views[b])
                                                         : normalize_flat(views[b]);
    }
    const RowGeometry geo = geometry(dists[0].probs, DistScope::PerChannel);
    // geometry() above reads the probs shape, which already reflects the
    // scope (Global probs are {S,1,C*D}), so PerChannel row-reading is right.

    const int rows = geo.rows();
    const int n = geo.row_len;
    const double row_norm = 1.0 / rows;

    BatchLoss out;
    std::vector<Tensor> g_p;
    if (want_grads) {
        g_p.assign(m, Tensor(dists[0].probs.shape()));
    }

    for (int i = 1; i < m; ++i) {
        for (int j = 0; j < i; ++j) {
            double sim = 0.0;
            for (int r = 0; r < rows; ++r) {
                const double* pi = dists[i].probs.data() + static_cast<std::size_t>(r) * n;
                const double* pj = dists[j].probs.data() + static_cast<std::size_t>(r) * n;
                double dot = 0.0;
                for (int k = 0; k < n; ++k) dot += pi[k] * pj[k];
                sim += dot;
            }
            sim *= row_norm;
            out.pair_sims.push_back(sim);
            out.consistency += 1.0 - sim;

            if (want_grads) {
                // d(1 - sim)/dP_i = -(1/rows) P_j and vice versa
                double* gi = g_p[i].data();
                double* gj = g_p[j].data();
                const double* pi = dists[i].probs.data();
                const double* pj = dists[j].probs.data();
                const std::size_t sz = dists[i].probs.size();
                for (std::size_t k = 0; k < sz; ++k) {
                    gi[k] -= row_norm * pj[k];
                    gj[k] -= row_norm * pi[k];
                }
            }

            if (config.lambda_mmd > 0.0) {
                double mmd = 0.0;
                for (int r = 0; r < rows; ++r) {
                    const double* pi = dists[i].probs.data() + static_cast<std::size_t>(r) * n;
                    const double* pj = dists[j].probs.data() + static_cast<std::size_t>(r) * n;
                    mmd += row_mmd_squared(pi, pj, n, config.mmd_bandwidth);
                    if (want_grads) {
                        row_mmd_grad(pi, pj, n, config.mmd_bandwidth,
                                     config.lambda_mmd * row_norm,
                                     g_p[i].data() + static_cast<std::size_t>(r) * n,
                                     g_p[j].data() + static_cast<std::size_t>(r) * n);
                    }
                }
                out.mmd_total += mmd * row_norm;
            }
        }
    }
    out.loss = out.consistency + config.lambda_mmd * out.mmd_total;
    double sim_sum = 0.0;
    for (double s : out.pair_sims) sim_sum += s;
    out.mean_similarity = sim_sum / static_cast<double>(out.pair_sims.size());

    if (want_grads) {
        // softmax pullback per probability row, reshaped to the raw
        // feature layout (identical flat order under either scope)
        out.feature_grad.reserve(m);
        for (int b = 0; b < m; ++b) {
            Tensor gf(views[b].values.shape());
            for (int r = 0; r < rows; ++r) {
                const double* p = dists[b].probs.data() + static_cast<std::size_t>(r) * n;
                const double* gp = g_p[b].data() + static_cast<std::size_t>(r) * n;
                double* g = gf.data() + static_cast<std::size_t>(r) * n;
                double inner = 0.0;
                for (int k = 0; k < n; ++k) inner += gp[k] * p[k];
                for (int k = 0; k < n; ++k) g[k] = p[k] * (gp[k] - inner);
            }
            out.feature_grad.push_back(std::move(gf));
        }
    }
    return out;
}

LossSeed alignment_seed(const Tensor& feature_grad, const AdaptConfig& config,
                        const Tensor& align_spikes_like) {
    require_feature_shape(feature_grad, "alignment_seed");
    if (align_spikes_like.rank() != 4) {
        throw ShapeError("alignment_seed: alignment activity must be {T,C,H,W}");
    }
    const int t_steps = align_spikes_like.shape()[0];
    const std::size_t plane = align_spikes_like.size() / t_steps;
    if (static_cast<std::size_t>(feature_grad.shape()[1]) * feature_grad.shape()[2] != plane) {
        throw ShapeError("alignment_seed: feature gradient does not match alignment layer");
    }

    LossSeed seed;
    switch (config.aggregation) {
        case Aggregation::SpikeCount: {
            if (feature_grad.shape()[0] != 1) {
                throw ShapeError("alignment_seed: spike-count gradient must have one slice");
            }
            seed.alignment_spike_grad = Tensor(align_spikes_like.shape());
            for (int t = 0; t < t_steps; ++t) {
                double* dst =
                    seed.alignment_spike_grad.data() + static_cast<std::size_t>(t) * plane;
                std::copy(feature_grad.data(), feature_grad.data() + plane, dst);
            }
            break;
        }
        case Aggregation::MeanPotential: {
            if (feature_grad.shape()[0] != 1) {
                throw ShapeError("alignment_seed: mean-potential gradient must have one slice");
            }
            seed.alignment_potential_grad = Tensor(align_spikes_like.shape());
            for (int t = 0; t < t_steps; ++t) {
                double* dst =
                    seed.alignment_potential_grad.data() + static_cast<std::size_t>(t) * plane;
                for (std::size_t i = 0; i < plane; ++i) {
                    dst[i] = feature_grad.data()[i] / static_cast<double>(t_steps);
                }
            }
            break;
        }
        case Aggregation::PerStep: {
            if (feature_grad.shape()[0] != t_steps) {
                throw ShapeError("alignment_seed: per-step gradient must have T slices");
            }
            seed.alignment_spike_grad = Tensor(align_spikes_like.shape());
            if (config.smoothing_sigma > 0.0) {
                // adjoint of the smoothing matrix: transpose
                const Tensor k = smoothing_matrix(t_steps, config.smoothing_sigma);
                for (int s = 0; s < t_steps; ++s) {
                    double* dst =
                        seed.alignment_spike_grad.data() + static_cast<std::size_t>(s) * plane;
                    for (int t = 0; t < t_steps; ++t) {
                        const double w = k.at2(t, s);
                        if (w == 0.0) continue;
                        const double* src =
                            feature_grad.data() + static_cast<std::size_t>(t) * plane;
                        for (std::size_t i = 0; i < plane; ++i) dst[i] += w * src[i];
                    }
                }
            } else {
                std::copy(feature_grad.data(), feature_grad.data() + feature_grad.size(),
                          seed.alignment_spike_grad.data());
            }
            break;
        }
    }
    return seed;
}

int argmax_score(const std::vector<double>& scores) {
    if (scores.empty()) throw ConfigError("argmax_score: empty score vector");
    int best = 0;
    for (int k = 1; k < static_cast<int>(scores.size()); ++k) {
        if (scores[k] > scores[best]) best = k;
    }
    return best;
}

AdaptOutcome adapt_single(const NetworkParams& params, const Tensor& image,
                          const AdaptConfig& config, Rng& rng) {
    config.validate();
    if (image.rank() != 2) throw ShapeError("adapt_single: image must be {H,W}");

    AdaptOutcome outcome;

    // Independent random streams: the original's encoding is shared by the
    // before/after predictions, and view construction does not disturb it.
    Rng enc_orig = rng.split("encode-original");
    Rng view_rng = rng.split("augment-views");

    const SpikeTrain train_orig = poisson_encode(image, config.time_steps, enc_orig);
    const std::vector<Tensor> views =
        make_batch(image, config.num_views, config.augment, view_rng);

    std::vector<SpikeTrain> trains(views.size());
    std::vector<ForwardRecord> records(views.size());
    std::vector<FeatureMap> features(views.size());
    for (std::size_t b = 0; b < views.size(); ++b) {
        Rng enc = rng.split("encode-view", static_cast<std::uint64_t>(b));
        trains[b] = poisson_encode(views[b], config.time_steps, enc);
        records[b] = forward(params, trains[b], /*record_tape=*/true);
        features[b] =
            aggregate_features(records[b].alignment_spikes, records[b].alignment_potentials,
                               config);
    }

    const BatchLoss pre = batch_loss(features, config, /*want_grads=*/true);
    outcome.pre_loss = pre.loss;
    outcome.pre_mean_similarity = pre.mean_similarity;
    outcome.pre_pair_sims = pre.pair_sims;

    // Sum the per-view parameter gradients of the shared objective.
    Gradients total;
    for (std::size_t b = 0; b < views.size(); ++b) {
        const LossSeed seed =
            alignment_seed(pre.feature_grad[b], config, records[b].alignment_spikes);
        Gradients g = backward(params, records[b], seed);
        if (b == 0) {
            total = std::move(g);
        } else {
            for (std::size_t l = 0; l < total.weight.size(); ++l) {
                for (std::size_t i = 0; i < total.weight[l].size(); ++i) {
                    total.weight[l].data()[i] += g.weight[l].data()[i];
                }
                for (std::size_t i = 0; i < total.bias[l].size(); ++i) {
                    total.bias[l].data()[i] += g.bias[l].data()[i];
                }
            }
        }
        records[b].tape = Tape{}; // the tape is spent; keep the activity
    }

    NetworkParams adapted = params;
    if (!std::isfinite(pre.loss)) {
        outcome.fallback = true;
    } else {
        try {
            sgd_update(adapted, total, config.eta, params.extractor_range());
            outcome.num_updates = 1;
        } catch (const NumericError&) {
            adapted = params;
            outcome.fallback = true;
        }
    }

    if (outcome.fallback) {
        // parameters unchanged, so the post metrics equal the pre metrics
        outcome.post_loss = outcome.pre_loss;
        outcome.post_mean_similarity = outcome.pre_mean_similarity;
        outcome.post_pair_sims = outcome.pre_pair_sims;
    } else {
        // Same frozen encodings through the adapted parameters: the only
        // thing that changed is the extractor weights.
        std::vector<FeatureMap> post_features(views.size());
        for (std::size_t b = 0; b < views.size(); ++b) {
            const ForwardRecord rec = forward(adapted, trains[b], /*record_tape=*/false);
            post_features[b] =
                aggregate_features(rec.alignment_spikes, rec.alignment_potentials, config);
        }
        const BatchLoss post = batch_loss(post_features, config, /*want_grads=*/false);
        outcome.post_loss = post.loss;
        outcome.post_mean_similarity = post.mean_similarity;
        outcome.post_pair_sims = post.pair_sims;
    }

    outcome.scores_before = forward(params, train_orig, /*record_tape=*/false).scores;
    outcome.scores_after = forward(adapted, train_orig, /*record_tape=*/false).scores;
    outcome.pred_before = argmax_score(outcome.scores_before);
    outcome.pred_after = argmax_score(outcome.scores_after);
    return outcome;
}

} // namespace snnspace
