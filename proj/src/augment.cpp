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

#include "snnspace/augment.hpp"

#include <algorithm>
#include <cmath>
#include <string>

namespace snnspace {

namespace {

constexpr double kPi = 3.14159265358979323846;

// Corruption severity ladders, level 1..5.
constexpr double kGaussianSigma[5] = {0.04, 0.08, 0.12, 0.18, 0.26};
constexpr double kShotLambda[5] = {60.0, 25.0, 12.0, 5.0, 3.0};
constexpr double kImpulseProb[5] = {0.01, 0.03, 0.06, 0.10, 0.17};

void require_image(const Tensor& image, const char* who) {
    if (image.rank() != 2) throw ShapeError(std::string(who) + ": image must be {H,W}");
}

// Reflect an integer coordinate into [0, n-1] without repeating the edge
// sample (mirror about the boundary pixel itself).
int reflect_index(int i, int n) {
    if (n == 1) return 0;
    const int period = 2 * n - 2;
    i = std::abs(i) % period;
    return i < n ? i : period - i;
}

double sample_bilinear(const Tensor& image, double sy, double sx) {
    const int h = image.shape()[0], w = image.shape()[1];
    const int y0 = static_cast<int>(std::floor(sy));
    const int x0 = static_cast<int>(std::floor(sx));
    const double fy = sy - y0, fx = sx - x0;
    const int ya = reflect_index(y0, h), yb = reflect_index(y0 + 1, h);
    const int xa = reflect_index(x0, w), xb = reflect_index(x0 + 1, w);
    const double v00 = image.at2(ya, xa), v01 = image.at2(ya, xb);
    const double v10 = image.at2(yb, xa), v11 = image.at2(yb, xb);
    return (1.0 - fy) * ((1.0 - fx) * v00 + fx * v01) + fy * ((1.0 - fx) * v10 + fx * v11);
}

/// Inverse-map affine warp: for each output pixel, sample the input at
/// source = M * (p - center) + center + shift.
Tensor affine_warp(const Tensor& image, double m00, double m01, double m10, double m11,
                   double shift_y, double shift_x) {
    const int h = image.shape()[0], w = image.shape()[1];
    const double cy = (h - 1) / 2.0, cx = (w - 1) / 2.0;
    Tensor out({h, w});
    for (int y = 0; y < h; ++y) {
        const double ry = y - cy;
        for (int x = 0; x < w; ++x) {
            const double rx = x - cx;
            const double sy = m00 * ry + m01 * rx + cy + shift_y;
            const double sx = m10 * ry + m11 * rx + cx + shift_x;
            out.at2(y, x) = std::clamp(sample_bilinear(image, sy, sx), 0.0, 1.0);
        }
    }
    return out;
}

void assert_fraction(double fraction) {
    if (!(fraction >= 0.0 && fraction <= 1.0)) {
        throw NumericError("augment: magnitude fraction " + std::to_string(fraction) +
                           " escaped [0, 1]");
    }
}

void assert_signed(double s, const char* what) {
    if (!(s >= -1.0 && s <= 1.0)) {
        throw NumericError(std::string("augment: ") + what + " draw " + std::to_string(s) +
                           " escaped [-1, 1]");
    }
}

} // namespace

Tensor apply_operator(const Tensor& image, AugOp op, double fraction, double signed_draw,
                      double signed_draw2) {
    require_image(image, "apply_operator");
    assert_fraction(fraction);
    assert_signed(signed_draw, "direction");
    assert_signed(signed_draw2, "direction");
    const int h = image.shape()[0], w = image.shape()[1];

    switch (op) {
        case AugOp::Rotate: {
            const double deg = kMaxRotateDegrees * fraction * (signed_draw < 0.0 ? -1.0 : 1.0);
            if (std::abs(deg) > kMaxRotateDegrees) {
                throw NumericError("augment: rotation angle exceeded its cap");
            }
            const double a = deg * kPi / 180.0;
            // inverse rotation matrix
            return affine_warp(image, std::cos(a), -std::sin(a), std::sin(a), std::cos(a), 0.0,
                               0.0);
        }
        case AugOp::Translate: {
            const double cap_y = h / 2.0 * fraction, cap_x = w / 2.0 * fraction;
            const double dy = cap_y * signed_draw, dx = cap_x * signed_draw2;
            if (std::abs(dy) > h / 2.0 || std::abs(dx) > w / 2.0) {
                throw NumericError("augment: translation exceeded half the image size");
            }
            // content moves by (dy,dx): source = p - (dy,dx)
            return affine_warp(image, 1.0, 0.0, 0.0, 1.0, -dy, -dx);
        }
        case AugOp::Shear: {
            const double s = kMaxShear * fraction * (signed_draw < 0.0 ? -1.0 : 1.0);
            if (std::abs(s) > kMaxShear) throw NumericError("augment: shear exceeded its cap");
            // inverse of x' = x + s*y is x = x' - s*y
            return affine_warp(image, 1.0, 0.0, -s, 1.0, 0.0, 0.0);
        }
        case AugOp::HorizontalFlip: {
            Tensor out({h, w});
            for (int y = 0; y < h; ++y) {
                for (int x = 0; x < w; ++x) out.at2(y, x) = image.at2(y, w - 1 - x);
            }
            return out;
        }
        case AugOp::Contrast: {
            const double factor = 1.0 + kMaxContrastDelta * fraction * (signed_draw < 0.0 ? -1.0 : 1.0);
            double mean = 0.0;
            for (std::size_t i = 0; i < image.size(); ++i) mean += image.data()[i];
            mean /= static_cast<double>(image.size());
            Tensor out({h, w});
            for (std::size_t i = 0; i < image.size(); ++i) {
                out.data()[i] = std::clamp(mean + factor * (image.data()[i] - mean), 0.0, 1.0);
            }
            return out;
        }
        case AugOp::Brightness: {
            const double delta = kMaxBrightnessDelta * fraction * (signed_draw < 0.0 ? -1.0 : 1.0);
            Tensor out({h, w});
            for (std::size_t i = 0; i < image.size(); ++i) {
                out.data()[i] = std::clamp(image.data()[i] + delta, 0.0, 1.0);
            }
            return out;
        }
        case AugOp::Posterize: {
            // quantisation levels fall from 16 to 2 as the fraction rises
            const int levels = 2 + static_cast<int>(std::lround(14.0 * (1.0 - fraction)));
            Tensor out({h, w});
            for (std::size_t i = 0; i < image.size(); ++i) {
                const double q = std::round(image.data()[i] * (levels - 1)) / (levels - 1);
                out.data()[i] = std::clamp(q, 0.0, 1.0);
            }
            return out;
        }
    }
    throw ConfigError("apply_operator: unknown operator");
}

Tensor augmix_sample(const Tensor& image, const AugmentPolicy& policy, Rng& rng) {
    require_image(image, "augmix_sample");
    policy.validate();
    const int h = image.shape()[0], w = image.shape()[1];

    // Dirichlet(1) chain weights via normalised exponentials.
    std::vector<double> weights(policy.mixture_width);
    double weight_sum = 0.0;
    for (double& wt : weights) {
        wt = rng.exponential();
        weight_sum += wt;
    }
    for (double& wt : weights) wt /= weight_sum;

    Tensor mixed({h, w});
    for (int chain = 0; chain < policy.mixture_width; ++chain) {
        const int depth = policy.min_depth +
                          static_cast<int>(rng.uniform_int(
                              static_cast<std::uint32_t>(policy.max_depth - policy.min_depth + 1)));
        Tensor view = image;
        for (int d = 0; d < depth; ++d) {
            const AugOp op = static_cast<AugOp>(rng.uniform_int(kAugOpCount));
            // strength u ~ U[0.1, severity], fraction u/10 of the cap
            const double u = rng.uniform_range(0.1, policy.severity);
            if (!(u >= 0.1 && u <= policy.severity)) {
                throw NumericError("augmix_sample: strength draw escaped its range");
            }
            const double s1 = rng.uniform_range(-1.0, 1.0);
            const double s2 = rng.uniform_range(-1.0, 1.0);
            view = apply_operator(view, op, u / 10.0, s1, s2);
        }
        for (std::size_t i = 0; i < mixed.size(); ++i) {
            mixed.data()[i] += weights[chain] * view.data()[i];
        }
    }

    // Beta(1,1) blend towards the source image.
    const double m = rng.uniform();
    Tensor out({h, w});
    for (std::size_t i = 0; i < out.size(); ++i) {
        const double v = (1.0 - m) * image.data()[i] + m * mixed.data()[i];
        out.data()[i] = std::clamp(v, 0.0, 1.0);
    }
    return out;
}

std::vector<Tensor> make_batch(const Tensor& image, int num_views,
                               const AugmentPolicy& policy, Rng& rng) {
    if (num_views < 2) {
        throw ConfigError("make_batch: need at least two views for pairwise consistency");
    }
    std::vector<Tensor> views;
    views.reserve(num_views);
    for (int b = 0; b < num_views; ++b) {
        Rng child = rng.split("view", static_cast<std::uint64_t>(b));
        views.push_back(augmix_sample(image, policy, child));
    }
    return views;
}

Tensor corrupt(const Tensor& image, CorruptionKind kind, int level, Rng& rng) {
    require_image(image, "corrupt");
    if (kind == CorruptionKind::None) return image;
    if (level < 1 || level > 5) throw ConfigError("corrupt: severity level must be 1..5");
    const int idx = level - 1;

    Tensor out = image;
    switch (kind) {
        case CorruptionKind::GaussianNoise: {
            const double sigma = kGaussianSigma[idx];
            for (std::size_t i = 0; i < out.size(); ++i) {
                out.data()[i] = std::clamp(out.data()[i] + rng.normal(0.0, sigma), 0.0, 1.0);
            }
            return out;
        }
        case CorruptionKind::ShotNoise: {
            const double lambda = kShotLambda[idx];
            for (std::size_t i = 0; i < out.size(); ++i) {
                const double x = std::clamp(out.data()[i], 0.0, 1.0);
                out.data()[i] = std::clamp(rng.poisson(x * lambda) / lambda, 0.0, 1.0);
            }
            return out;
        }
        case CorruptionKind::ImpulseNoise: {
            const double p = kImpulseProb[idx];
            for (std::size_t i = 0; i < out.size(); ++i) {
                if (rng.bernoulli(p)) out.data()[i] = rng.bernoulli(0.5) ? 1.0 : 0.0;
            }
            return out;
        }
        case CorruptionKind::None: break;
    }
    throw ConfigError("corrupt: unknown corruption kind");
}

const char* corruption_name(CorruptionKind kind) {
    switch (kind) {
        case CorruptionKind::None: return "none";
        case CorruptionKind::GaussianNoise: return "gaussian_noise";
        case CorruptionKind::ShotNoise: return "shot_noise";
        case CorruptionKind::ImpulseNoise: return "impulse_noise";
    }
    return "unknown";
}

CorruptionKind corruption_from_name(const std::string& name) {
    if (name == "none") return CorruptionKind::None;
    if (name == "gaussian_noise") return CorruptionKind::GaussianNoise;
    if (name == "shot_noise") return CorruptionKind::ShotNoise;
    if (name == "impulse_noise") return CorruptionKind::ImpulseNoise;
    throw ConfigError("corrupt: unknown corruption name '" + name + "'");
}

} // namespace snnspace
