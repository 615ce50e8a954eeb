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

#include "snnspace/network.hpp"

namespace snnspace {

/// Weight checkpoint ("SNNW") layout, all integers little-endian:
///   magic "SNNW" | u32 version (1) | u32 layer_count
///   per layer:
///     u32 kind | u32 ndim | u32 dims[ndim]      (weight shape; ndim 0 for pool)
///     u32 bias_count
///     f32 payload: weight row-major, then bias
///     u32 crc32 of the payload bytes (zlib polynomial)
/// Only structure and values are stored; neuron settings, extractor split
/// and alignment layer are reconstructed by finalize_network().
void save_checkpoint(const NetworkParams& params, const std::string& path);

/// Read a checkpoint back. The result carries layer kinds and values only
/// and is not yet bound; pass it through finalize_network() before use.
/// Bad magic, version, structure or checksum raise IoError.
NetworkParams load_checkpoint(const std::string& path);

/// Mark the trailing run of dense layers as the readout head, everything
/// before it as the feature extractor.
void derive_spans(NetworkParams& params);

/// Attach neuron settings, derive the extractor split, bind shapes against
/// the input size and pick the alignment layer. Completes a freshly loaded
/// checkpoint into a runnable network.
void finalize_network(NetworkParams& params, const LifNeuronConfig& neuron, int in_c,
                      int in_h, int in_w);

} // namespace snnspace
