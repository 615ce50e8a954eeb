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
#include <cstdint>
#include <string_view>

#include "snnspace/errors.hpp"

namespace snnspace {

// Counter-based splittable PRNG.
//
// Output i of a stream with key k is mix64(k + GOLDEN * i), where mix64 is
// the Stafford mix13 finalizer. Child streams are derived from (key, label)
// alone, independent of how many values the parent has drawn, so sub-seeds
// for samples, views, and operators are reproducible regardless of execution
// order. Sampling algorithms are spelled out here (not delegated to
// std::<distribution>) because their output must be bit-identical across
// platforms and standard library versions.

inline constexpr std::uint64_t kGolden = 0x9E3779B97F4A7C15ull;

inline std::uint64_t mix64(std::uint64_t z) {
    z ^= z >> 30;
    z *= 0xBF58476D1CE4E5B9ull;
    z ^= z >> 27;
    z *= 0x94D049BB133111EBull;
    z ^= z >> 31;
    return z;
}

inline std::uint64_t fnv1a64(std::string_view s) {
    std::uint64_t h = 0xCBF29CE484222325ull;
    for (unsigned char c : s) {
        h ^= c;
        h *= 0x100000001B3ull;
    }
    return h;
}

class Rng {
public:
    explicit Rng(std::uint64_t seed) : key_(mix64(seed ^ 0x5EEDBA5EDF00Dull)) {}

    std::uint64_t key() const { return key_; }

    std::uint64_t next_u64() { return mix64(key_ + kGolden * ++counter_); }

    /// Independent child stream identified by an integer label.
    Rng split(std::uint64_t label) const {
        Rng child(0);
        child.key_ = mix64(mix64(key_ ^ 0x51B17ull) + kGolden * label);
        child.counter_ = 0;
        return child;
    }

    /// Independent child stream identified by a name, optionally indexed.
    Rng split(std::string_view name, std::uint64_t index = 0) const {
        return split(fnv1a64(name) + index);
    }

    /// Uniform double in [0, 1).
    double uniform() { return static_cast<double>(next_u64() >> 11) * 0x1.0p-53; }

    /// Uniform double in (0, 1]; safe as a log() argument.
    double uniform_open() {
        return static_cast<double>((next_u64() >> 11) + 1) * 0x1.0p-53;
    }

    double uniform_range(double lo, double hi) { return lo + (hi - lo) * uniform(); }

    /// Uniform integer in [0, n). Multiply-shift mapping; bias below 2^-32.
    std::uint32_t uniform_int(std::uint32_t n) {
        if (n == 0) throw ConfigError("Rng::uniform_int: n must be positive");
        return static_cast<std::uint32_t>(
            (static_cast<unsigned __int128>(next_u64()) * n) >> 64);
    }

    bool bernoulli(double p) { return uniform() < p; }

    /// Box-Muller; consumes exactly two uniforms per call.
    double normal(double mean = 0.0, double stddev = 1.0) {
        double u1 = uniform_open();
        double u2 = uniform();
        double r = std::sqrt(-2.0 * std::log(u1));
        return mean + stddev * r * std::cos(6.283185307179586476925286766559 * u2);
    }

    double exponential() { return -std::log(uniform_open()); }

    /// Knuth product method; adequate for the rate ladder used here (λ ≤ 60).
    int poisson(double lambda) {
        if (lambda < 0.0) throw ConfigError("Rng::poisson: negative rate");
        if (lambda == 0.0) return 0;
        const double limit = std::exp(-lambda);
        int k = 0;
        double p = 1.0;
        do {
            ++k;
            p *= uniform_open();
        } while (p > limit);
        return k - 1;
    }

private:
    std::uint64_t key_ = 0;
    std::uint64_t counter_ = 0;
};

} // namespace snnspace
