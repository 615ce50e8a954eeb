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

#include <string>
#include <vector>

#include "snnspace/rng.hpp"
#include "snnspace/tensor.hpp"

namespace snnspace {

/// Four-class synthetic shape task: horizontal bar, vertical bar, cross,
/// disk, drawn with positional jitter, per-sample brightness variation
/// and a low-level noise floor on the background. Small enough to train
/// in seconds, structured enough that corruptions genuinely hurt.
struct SyntheticDatasetSpec {
    // Power-of-two-friendly size: the standard three conv/pool stages
    // leave a 2x2 map that the head's collapsing pool can take to 1x1.
    int image_size = 16;
    int train_per_class = 128;
    // Large enough that a few-percent accuracy delta clears sampling
    // noise: adaptation experiments compare paired per-sample outcomes,
    // and at ~160 samples a real 3% effect is routinely swamped.
    int test_per_class = 160;
    double noise_floor = 0.05; // background pixels ~ U[0, noise_floor]
    double jitter = 2.0;       // shape centre offset, per axis, in pixels

    static constexpr int kNumClasses = 4;

    void validate() const {
        if (image_size < 12) throw ConfigError("dataset: image_size must be at least 12");
        if (train_per_class < 1 || test_per_class < 1) {
            throw ConfigError("dataset: per-class sample counts must be positive");
        }
        if (noise_floor < 0.0 || noise_floor > 0.5) {
            throw ConfigError("dataset: noise_floor must be in [0, 0.5]");
        }
        if (jitter < 0.0 || jitter > image_size / 4.0) {
            throw ConfigError("dataset: jitter must be in [0, image_size/4]");
        }
    }
};

struct Dataset {
    std::vector<Tensor> images; // each {H,W}, values in [0,1]
    std::vector<int> labels;
    std::size_t size() const { return images.size(); }
};

struct DatasetPair {
    Dataset train;
    Dataset test;
};

const char* class_name(int label);

/// Generate disjoint, class-stratified train/test splits. All randomness
/// comes from `rng`; the same spec and stream reproduce the same pixels.
DatasetPair synth_dataset(const SyntheticDatasetSpec& spec, Rng& rng);

/// Dataset cache ("SNND"), all integers little-endian:
///   magic "SNND" | u32 version (1) | u32 count | u32 height | u32 width
///   per sample: u32 label | f64 pixels row-major (little-endian bits)
///   u32 crc32 over all sample records (zlib polynomial)
void save_dataset(const Dataset& data, const std::string& path);
Dataset load_dataset(const std::string& path);

} // namespace snnspace
