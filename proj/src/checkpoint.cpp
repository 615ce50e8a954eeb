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

#include "snnspace/checkpoint.hpp"

#include <zlib.h>

#include <cstring>
#include <fstream>
#include <vector>

#include "snnspace/binio.hpp"

namespace snnspace {

namespace {

constexpr char kMagic[4] = {'S', 'N', 'N', 'W'};
constexpr std::uint32_t kVersion = 1;
constexpr std::uint32_t kMaxDims = 8;
constexpr std::uint32_t kMaxDim = 1u << 24;

void append_f32le(std::vector<unsigned char>& buf, float v) {
    std::uint32_t bits = 0;
    std::memcpy(&bits, &v, sizeof(bits));
    buf.push_back(static_cast<unsigned char>(bits & 0xFF));
    buf.push_back(static_cast<unsigned char>((bits >> 8) & 0xFF));
    buf.push_back(static_cast<unsigned char>((bits >> 16) & 0xFF));
    buf.push_back(static_cast<unsigned char>((bits >> 24) & 0xFF));
}

std::uint32_t payload_crc(const std::vector<unsigned char>& buf) {
    return static_cast<std::uint32_t>(
        ::crc32(0L, buf.empty() ? Z_NULL : buf.data(), static_cast<uInt>(buf.size())));
}

} // namespace

void save_checkpoint(const NetworkParams& params, const std::string& path) {
    if (params.layers.empty()) throw ConfigError("save_checkpoint: network has no layers");
    std::ofstream os(path, std::ios::binary | std::ios::trunc);
    if (!os) throw IoError("save_checkpoint: cannot open " + path + " for writing");

    os.write(kMagic, 4);
    write_u32le(os, kVersion);
    write_u32le(os, static_cast<std::uint32_t>(params.layers.size()));

    for (const Layer& layer : params.layers) {
        write_u32le(os, static_cast<std::uint32_t>(layer.kind));
        const auto& shape = layer.weight.shape();
        write_u32le(os, static_cast<std::uint32_t>(shape.size()));
        for (int d : shape) write_u32le(os, static_cast<std::uint32_t>(d));
        write_u32le(os, static_cast<std::uint32_t>(layer.bias.size()));

        std::vector<unsigned char> payload;
        payload.reserve(4 * (layer.weight.size() + layer.bias.size()));
        for (std::size_t i = 0; i < layer.weight.size(); ++i) {
            append_f32le(payload, static_cast<float>(layer.weight.data()[i]));
        }
        for (std::size_t i = 0; i < layer.bias.size(); ++i) {
            append_f32le(payload, static_cast<float>(layer.bias.data()[i]));
        }
        os.write(reinterpret_cast<const char*>(payload.data()),
                 static_cast<std::streamsize>(payload.size()));
        write_u32le(os, payload_crc(payload));
    }
    if (!os) throw IoError("save_checkpoint: write to " + path + " failed");
}

NetworkParams load_checkpoint(const std::string& path) {
    std::ifstream is(path, std::ios::binary);
    if (!is) throw IoError("load_checkpoint: cannot open " + path);

    char magic[4];
    if (!is.read(magic, 4) || std::memcmp(magic, kMagic, 4) != 0) {
        throw IoError("load_checkpoint: " + path + " is not a SNNW checkpoint");
    }
    const std::uint32_t version = read_u32le(is);
    if (version != kVersion) {
        throw IoError("load_checkpoint: unsupported version " + std::to_string(version));
    }
    const std::uint32_t layer_count = read_u32le(is);
    if (layer_count == 0 || layer_count > 1024) {
        throw IoError("load_checkpoint: implausible layer count " +
                      std::to_string(layer_count));
    }

    NetworkParams params;
    params.layers.reserve(layer_count);
    for (std::uint32_t l = 0; l < layer_count; ++l) {
        Layer layer;
        const std::uint32_t kind = read_u32le(is);
        if (kind > static_cast<std::uint32_t>(LayerKind::Dense)) {
            throw IoError("load_checkpoint: unknown layer kind " + std::to_string(kind));
        }
        layer.kind = static_cast<LayerKind>(kind);

        const std::uint32_t ndim = read_u32le(is);
        if (ndim > kMaxDims) {
            throw IoError("load_checkpoint: implausible weight rank " + std::to_string(ndim));
        }
        std::vector<int> dims(ndim);
        std::size_t weight_count = ndim == 0 ? 0 : 1;
        for (std::uint32_t d = 0; d < ndim; ++d) {
            const std::uint32_t v = read_u32le(is);
            if (v == 0 || v > kMaxDim) {
                throw IoError("load_checkpoint: implausible dimension " + std::to_string(v));
            }
            dims[d] = static_cast<int>(v);
            weight_count *= v;
        }
        const std::uint32_t bias_count = read_u32le(is);
        if (bias_count > kMaxDim) {
            throw IoError("load_checkpoint: implausible bias count " +
                          std::to_string(bias_count));
        }

        const std::size_t total = weight_count + bias_count;
        std::vector<unsigned char> payload(total * 4);
        if (total > 0 &&
            !is.read(reinterpret_cast<char*>(payload.data()),
                     static_cast<std::streamsize>(payload.size()))) {
            throw IoError("load_checkpoint: truncated payload in layer " + std::to_string(l));
        }
        const std::uint32_t stored_crc = read_u32le(is);
        if (stored_crc != payload_crc(payload)) {
            throw IoError("load_checkpoint: checksum mismatch in layer " + std::to_string(l));
        }

        auto take_f32 = [&](std::size_t idx) {
            std::uint32_t bits = static_cast<std::uint32_t>(payload[idx * 4]) |
                                 (static_cast<std::uint32_t>(payload[idx * 4 + 1]) << 8) |
                                 (static_cast<std::uint32_t>(payload[idx * 4 + 2]) << 16) |
                                 (static_cast<std::uint32_t>(payload[idx * 4 + 3]) << 24);
            float v = 0.0f;
            std::memcpy(&v, &bits, sizeof(v));
            return static_cast<double>(v);
        };
        if (ndim > 0) {
            layer.weight = Tensor(dims);
            for (std::size_t i = 0; i < weight_count; ++i) layer.weight.data()[i] = take_f32(i);
        }
        if (bias_count > 0) {
            layer.bias = Tensor({static_cast<int>(bias_count)});
            for (std::size_t i = 0; i < bias_count; ++i) {
                layer.bias.data()[i] = take_f32(weight_count + i);
            }
        }
        params.layers.push_back(std::move(layer));
    }
    return params;
}

void derive_spans(NetworkParams& params) {
    int first_dense = params.layer_count();
    for (int l = params.layer_count() - 1; l >= 0; --l) {
        if (params.layers[l].kind == LayerKind::Dense) {
            first_dense = l;
        } else {
            break;
        }
    }
    if (first_dense >= params.layer_count()) {
        throw ConfigError("derive_spans: network has no trailing dense readout");
    }
    if (first_dense == 0) {
        throw ConfigError("derive_spans: network is all readout, no extractor left");
    }
    params.extractor_end = first_dense;
}

void finalize_network(NetworkParams& params, const LifNeuronConfig& neuron, int in_c,
                      int in_h, int in_w) {
    params.neuron = neuron;
    derive_spans(params);
    params.alignment_layer = -1;
    params.bind(in_c, in_h, in_w);
    params.alignment_layer = select_alignment_layer(params);
}

} // namespace snnspace
