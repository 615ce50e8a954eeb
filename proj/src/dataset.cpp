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

#include "snnspace/dataset.hpp"

#include <zlib.h>

#include <algorithm>
#include <cmath>
#include <cstring>
#include <fstream>
#include <vector>

#include "snnspace/binio.hpp"

namespace snnspace {

namespace {

constexpr char kMagic[4] = {'S', 'N', 'N', 'D'};
constexpr std::uint32_t kVersion = 1;

/// Signed distance-like membership test for each shape, centred at
/// (cy, cx) on an s x s canvas. Shapes scale with the canvas.
bool inside_shape(int label, double y, double x, double cy, double cx, int s) {
    const double dy = y - cy, dx = x - cx;
    const double half_len = s / 3.0;   // bar half-length
    const double half_th = s / 16.0;   // bar half-thickness
    const double radius = s / 4.5;     // disk radius
    switch (label) {
        case 0: // horizontal bar
            return std::abs(dy) <= half_th && std::abs(dx) <= half_len;
        case 1: // vertical bar
            return std::abs(dx) <= half_th && std::abs(dy) <= half_len;
        case 2: // cross
            return (std::abs(dy) <= half_th && std::abs(dx) <= half_len) ||
                   (std::abs(dx) <= half_th && std::abs(dy) <= half_len);
        case 3: // disk
            return dy * dy + dx * dx <= radius * radius;
        default:
            throw ConfigError("dataset: unknown class label " + std::to_string(label));
    }
}

Tensor draw_sample(int label, const SyntheticDatasetSpec& spec, Rng& rng) {
    const int s = spec.image_size;
    const double cy = (s - 1) / 2.0 + rng.uniform_range(-spec.jitter, spec.jitter);
    const double cx = (s - 1) / 2.0 + rng.uniform_range(-spec.jitter, spec.jitter);
    const double brightness = rng.uniform_range(0.7, 0.95);

    Tensor img({s, s});
    for (int y = 0; y < s; ++y) {
        for (int x = 0; x < s; ++x) {
            double v;
            if (inside_shape(label, y, x, cy, cx, s)) {
                v = brightness + rng.uniform_range(-0.05, 0.05);
            } else {
                v = rng.uniform_range(0.0, spec.noise_floor);
            }
            img.at2(y, x) = std::clamp(v, 0.0, 1.0);
        }
    }
    return img;
}

} // namespace

const char* class_name(int label) {
    switch (label) {
        case 0: return "hbar";
        case 1: return "vbar";
        case 2: return "cross";
        case 3: return "disk";
    }
    return "unknown";
}

DatasetPair synth_dataset(const SyntheticDatasetSpec& spec, Rng& rng) {
    spec.validate();
    DatasetPair pair;
    // Per-(class, index) child streams: sample pixels do not depend on
    // how many samples precede them, so resizing one split cannot
    // silently reshuffle the other.
    for (int label = 0; label < SyntheticDatasetSpec::kNumClasses; ++label) {
        for (int i = 0; i < spec.train_per_class; ++i) {
            Rng child = rng.split("train-sample",
                                  static_cast<std::uint64_t>(label) << 32 | i);
            pair.train.images.push_back(draw_sample(label, spec, child));
            pair.train.labels.push_back(label);
        }
        for (int i = 0; i < spec.test_per_class; ++i) {
            Rng child = rng.split("test-sample",
                                  static_cast<std::uint64_t>(label) << 32 | i);
            pair.test.images.push_back(draw_sample(label, spec, child));
            pair.test.labels.push_back(label);
        }
    }
    return pair;
}

void save_dataset(const Dataset& data, const std::string& path) {
    if (data.images.empty()) throw ConfigError("save_dataset: dataset is empty");
    if (data.images.size() != data.labels.size()) {
        throw ConfigError("save_dataset: image/label count mismatch");
    }
    const int h = data.images[0].shape()[0], w = data.images[0].shape()[1];

    std::vector<unsigned char> payload;
    payload.reserve(data.images.size() * (4 + 8 * static_cast<std::size_t>(h) * w));
    auto put_u32 = [&payload](std::uint32_t v) {
        payload.push_back(static_cast<unsigned char>(v & 0xFF));
        payload.push_back(static_cast<unsigned char>((v >> 8) & 0xFF));
        payload.push_back(static_cast<unsigned char>((v >> 16) & 0xFF));
        payload.push_back(static_cast<unsigned char>((v >> 24) & 0xFF));
    };
    auto put_u64 = [&payload](std::uint64_t v) {
        for (int b = 0; b < 64; b += 8) {
            payload.push_back(static_cast<unsigned char>((v >> b) & 0xFF));
        }
    };
    for (std::size_t i = 0; i < data.images.size(); ++i) {
        const Tensor& img = data.images[i];
        if (img.rank() != 2 || img.shape()[0] != h || img.shape()[1] != w) {
            throw ShapeError("save_dataset: images disagree on shape");
        }
        put_u32(static_cast<std::uint32_t>(data.labels[i]));
        for (std::size_t p = 0; p < img.size(); ++p) {
            std::uint64_t bits = 0;
            std::memcpy(&bits, &img.data()[p], sizeof(bits));
            put_u64(bits);
        }
    }

    std::ofstream os(path, std::ios::binary | std::ios::trunc);
    if (!os) throw IoError("save_dataset: cannot open " + path + " for writing");
    os.write(kMagic, 4);
    write_u32le(os, kVersion);
    write_u32le(os, static_cast<std::uint32_t>(data.images.size()));
    write_u32le(os, static_cast<std::uint32_t>(h));
    write_u32le(os, static_cast<std::uint32_t>(w));
    os.write(reinterpret_cast<const char*>(payload.data()),
             static_cast<std::streamsize>(payload.size()));
    write_u32le(os, static_cast<std::uint32_t>(
                        ::crc32(0L, payload.data(), static_cast<uInt>(payload.size()))));
    if (!os) throw IoError("save_dataset: write to " + path + " failed");
}

Dataset load_dataset(const std::string& path) {
    std::ifstream is(path, std::ios::binary);
    if (!is) throw IoError("load_dataset: cannot open " + path);
    char magic[4];
    if (!is.read(magic, 4) || std::memcmp(magic, kMagic, 4) != 0) {
        throw IoError("load_dataset: " + path + " is not a SNND dataset");
    }
    if (read_u32le(is) != kVersion) throw IoError("load_dataset: unsupported version");
    const std::uint32_t count = read_u32le(is);
    const std::uint32_t h = read_u32le(is);
    const std::uint32_t w = read_u32le(is);
    if (count == 0 || count > (1u << 24) || h == 0 || w == 0 || h > 4096 || w > 4096) {
        throw IoError("load_dataset: implausible header");
    }

    const std::size_t record = 4 + 8 * static_cast<std::size_t>(h) * w;
    std::vector<unsigned char> payload(record * count);
    if (!is.read(reinterpret_cast<char*>(payload.data()),
                 static_cast<std::streamsize>(payload.size()))) {
        throw IoError("load_dataset: truncated sample data");
    }
    const std::uint32_t stored = read_u32le(is);
    const std::uint32_t actual = static_cast<std::uint32_t>(
        ::crc32(0L, payload.data(), static_cast<uInt>(payload.size())));
    if (stored != actual) throw IoError("load_dataset: checksum mismatch");

    auto u32_at = [&payload](std::size_t off) {
        return static_cast<std::uint32_t>(payload[off]) |
               (static_cast<std::uint32_t>(payload[off + 1]) << 8) |
               (static_cast<std::uint32_t>(payload[off + 2]) << 16) |
               (static_cast<std::uint32_t>(payload[off + 3]) << 24);
    };
    auto u64_at = [&payload](std::size_t off) {
        std::uint64_t v = 0;
        for (int b = 0; b < 8; ++b) {
            v |= static_cast<std::uint64_t>(payload[off + b]) << (8 * b);
        }
        return v;
    };

    Dataset data;
    data.images.reserve(count);
    data.labels.reserve(count);
    for (std::uint32_t i = 0; i < count; ++i) {
        const std::size_t base = i * record;
        const std::uint32_t label = u32_at(base);
        if (label >= 64) throw IoError("load_dataset: implausible label");
        Tensor img({static_cast<int>(h), static_cast<int>(w)});
        for (std::size_t p = 0; p < img.size(); ++p) {
            const std::uint64_t bits = u64_at(base + 4 + 8 * p);
            std::memcpy(&img.data()[p], &bits, sizeof(double));
        }
        data.images.push_back(std::move(img));
        data.labels.push_back(static_cast<int>(label));
    }
    return data;
}

} // namespace snnspace
