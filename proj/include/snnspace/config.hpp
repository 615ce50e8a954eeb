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

#include <cstdint>
#include <string>
#include <vector>

#include "snnspace/adapt.hpp"
#include "snnspace/dataset.hpp"
#include "snnspace/lif.hpp"
#include "snnspace/network.hpp"
#include "snnspace/trainer.hpp"

namespace snnspace {

enum class Method : int {
    NoAdapt = 0, // frozen source model, straight evaluation
    Space,       // one similarity-driven extractor update per test sample
};

const char* method_name(Method method);
Method method_from_name(const std::string& name);

/// Everything one experiment needs, serializable as line-oriented
/// `group.key = value` text. Every field has a usable default; a default
/// config trains a small model and runs the adaptation experiment on the
/// synthetic shape task without further input.
struct ExperimentConfig {
    // run.*
    std::uint64_t seed = 7;
    Method method = Method::Space;
    std::string checkpoint;    // model path; empty means train from scratch
    std::string dataset_cache; // SNND stem; empty means synthesize from data.*
    std::string output_dir = "out"; // artifact directory; empty disables writing
    int threads = 0;           // worker threads for the per-sample loop;
                               // 0 picks the hardware count. Results are
                               // identical for any value — each sample owns
                               // its own rng stream and model clone, and
                               // reports are reduced in sample order.

    // corrupt.*
    CorruptionKind corruption = CorruptionKind::GaussianNoise;
    int corruption_level = 5; // severity 1..5 (ignored for kind none)

    // data.seed: the dataset is drawn from its own stream, not from
    // run.seed, so varying the run seed re-rolls encodings, views and
    // corruption draws while every run still sees the same task — and a
    // checkpoint trained on this dataset keeps its train/test split
    // disjoint across runs.
    std::uint64_t data_seed = 1234;

    // Nested groups: data.*, arch.*, neuron.*, train.*, adapt.*
    // (adapt.augment.* is the test-time view policy, train.augment.* the
    // training-time one; they are independent dials).
    SyntheticDatasetSpec data;
    ArchConfig arch;
    LifNeuronConfig neuron;
    TrainConfig train;
    AdaptConfig adapt;

    void validate() const;
};

/// Parse `key = value` text: one assignment per line, '#' starts a
/// comment, blank lines ignored. Keys are dotted paths from the tables
/// above. Unknown keys, duplicate keys, malformed lines and unparseable
/// values all raise ParseError naming the line number. Values are not
/// range-checked here; call validate() on the result for that.
ExperimentConfig parse_config(const std::string& text);

/// Render a config as text that parse_config maps back to an equal
/// config: fixed key order, full-precision numbers.
std::string serialize_config(const ExperimentConfig& config);

/// Convenience wrappers over whole files.
ExperimentConfig load_config(const std::string& path);
void save_config(const ExperimentConfig& config, const std::string& path);

/// Apply environment overrides: SPACE_SEED (decimal unsigned) replaces
/// cfg.seed when set. Returns true when anything changed; a malformed
/// value raises ConfigError rather than being silently ignored.
bool apply_env_overrides(ExperimentConfig& config);

/// Assign a single dotted key on an existing config, through the same
/// lexers the text format uses (so "adapt.eta", "0.003" behaves exactly
/// like that config line). Unknown keys and bad values raise ParseError.
void set_config_field(ExperimentConfig& config, const std::string& key,
                      const std::string& value);

/// Read a single dotted key back as config text (the same rendering
/// serialize_config uses). Unknown keys raise ParseError.
std::string get_config_field(const ExperimentConfig& config, const std::string& key);

const char* aggregation_name(Aggregation aggregation);
Aggregation aggregation_from_name(const std::string& name);
const char* scope_name(DistScope scope);
DistScope scope_from_name(const std::string& name);

/// Shortest decimal string that parses back to the same double — the
/// formatter behind serialize_config, shared by every text artifact so
/// identical runs write identical bytes.
std::string format_double(double value);

} // namespace snnspace
