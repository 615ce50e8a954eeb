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

#include <algorithm>
#include <cstddef>

#include "snnspace/network.hpp"
#include "snnspace/rng.hpp"
#include "snnspace/tensor.hpp"

namespace snnspace {

/// Rate-code an intensity image into a Bernoulli spike train: pixel value
/// p in [0,1] fires independently with probability p at every step.
/// Accepts {H,W} or {C,H,W} images and returns a {T,C,H,W} train. Values
/// outside [0,1] are clamped; the number of clamped pixels is reported
/// through `clamped_count` when given, so callers can warn on dirty input.
inline SpikeTrain poisson_encode(const Tensor& image, int t_steps, Rng& rng,
                                 std::size_t* clamped_count = nullptr) {
    if (t_steps < 1) throw ConfigError("poisson_encode: need at least one time step");
    int c = 0, h = 0, w = 0;
    if (image.rank() == 2) {
        c = 1;
        h = image.shape()[0];
        w = image.shape()[1];
    } else if (image.rank() == 3) {
        c = image.shape()[0];
        h = image.shape()[1];
        w = image.shape()[2];
    } else {
        throw ShapeError("poisson_encode: image must be {H,W} or {C,H,W}");
    }

    const std::size_t numel = image.size();
    std::size_t clamped = 0;
    SpikeTrain train;
    train.spikes = Tensor({t_steps, c, h, w});
    double* out = train.spikes.data();
    const double* px = image.data();
    for (int t = 0; t < t_steps; ++t) {
        double* row = out + static_cast<std::size_t>(t) * numel;
        for (std::size_t i = 0; i < numel; ++i) {
            double p = px[i];
            if (p < 0.0 || p > 1.0) {
                p = std::clamp(p, 0.0, 1.0);
                if (t == 0) ++clamped; // count each pixel once, not once per step
            }
            row[i] = rng.bernoulli(p) ? 1.0 : 0.0;
        }
    }
    if (clamped_count != nullptr) *clamped_count = clamped;
    return train;
}

} // namespace snnspace
