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

#include "snnspace/rng.hpp"
#include "snnspace/tensor.hpp"

namespace snnspace {

// ---------------------------------------------------------------------------
// Stochastic view augmentation: mixtures of short random operator chains,
// blended back towards the source image. Label-preserving by construction:
// every operator is bounded so content stays recognisable.
// ---------------------------------------------------------------------------

enum class AugOp : int {
    Rotate = 0,
    Translate,
    Shear,
    HorizontalFlip,
    Contrast,
    Brightness,
    Posterize,
};

inline constexpr int kAugOpCount = 7;

/// Operator magnitude caps at full severity. A draw u ~ U[0.1, severity]
/// maps to the fraction u/10 of the cap; severity lives in (0, 10].
inline constexpr double kMaxRotateDegrees = 30.0;
inline constexpr double kMaxShear = 0.3;
inline constexpr double kMaxContrastDelta = 0.7;   // factor in [0.3, 1.7]
inline constexpr double kMaxBrightnessDelta = 0.4; // additive shift
// translate cap is (width/2) * fraction, i.e. up to half the image

struct AugmentPolicy {
    double severity = 3.0; // operator strength dial, (0, 10]
    int mixture_width = 3; // parallel chains mixed together
    int min_depth = 1;     // operators per chain, drawn uniformly
    int max_depth = 3;

    void validate() const {
        if (!(severity > 0.0) || severity > 10.0) {
            throw ConfigError("AugmentPolicy: severity must be in (0, 10]");
        }
        if (mixture_width < 1) throw ConfigError("AugmentPolicy: mixture_width must be >= 1");
        if (min_depth < 1 || max_depth < min_depth) {
            throw ConfigError("AugmentPolicy: depth range must satisfy 1 <= min <= max");
        }
    }
};

/// Apply one operator at the given magnitude fraction (in [0, 1], scaling
/// the per-operator cap). `signed_draw` in [-1, 1] supplies direction for
/// the operators that have one; translate uses `signed_draw2` for the
/// second axis. Output pixels stay in [0, 1].
Tensor apply_operator(const Tensor& image, AugOp op, double fraction, double signed_draw,
                      double signed_draw2);

/// One stochastic view: mixture_width operator chains, Dirichlet(1)
/// mixture weights, then a uniform blend back towards the source image.
Tensor augmix_sample(const Tensor& image, const AugmentPolicy& policy, Rng& rng);

/// num_views independent augmix views of the image (the unmodified
/// original is not part of the batch).
std::vector<Tensor> make_batch(const Tensor& image, int num_views,
                               const AugmentPolicy& policy, Rng& rng);

// ---------------------------------------------------------------------------
// Test-time corruption families, five severity levels each
// ---------------------------------------------------------------------------

enum class CorruptionKind : int {
    None = 0,
    GaussianNoise,
    ShotNoise,
    ImpulseNoise,
};

/// Apply a corruption at severity level 1..5 (None ignores the level).
/// Output pixels are clamped to [0, 1].
Tensor corrupt(const Tensor& image, CorruptionKind kind, int level, Rng& rng);

const char* corruption_name(CorruptionKind kind);
CorruptionKind corruption_from_name(const std::string& name);

} // namespace snnspace
