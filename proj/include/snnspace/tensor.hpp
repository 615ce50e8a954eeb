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

#include <cstddef>
#include <initializer_list>
#include <numeric>
#include <span>
#include <vector>

#include "snnspace/errors.hpp"

namespace snnspace {

/// Dense row-major tensor of doubles. Shapes are small integer vectors;
/// an empty shape means an empty tensor (numel 0).
class Tensor {
public:
    Tensor() = default;

    explicit Tensor(std::vector<int> shape, double fill = 0.0)
        : shape_(std::move(shape)) {
        for (int d : shape_) {
            if (d <= 0) throw ShapeError("Tensor: nonpositive dimension");
        }
        data_.assign(numel_of(shape_), fill);
    }

    Tensor(std::initializer_list<int> shape, double fill = 0.0)
        : Tensor(std::vector<int>(shape), fill) {}

    static Tensor zeros(std::vector<int> shape) { return Tensor(std::move(shape)); }

    const std::vector<int>& shape() const { return shape_; }
    int dim(std::size_t i) const { return shape_.at(i); }
    std::size_t rank() const { return shape_.size(); }
    std::size_t size() const { return data_.size(); }
    bool empty() const { return data_.empty(); }

    double* data() { return data_.data(); }
    const double* data() const { return data_.data(); }
    std::span<double> span() { return {data_.data(), data_.size()}; }
    std::span<const double> span() const { return {data_.data(), data_.size()}; }

    double& operator[](std::size_t i) { return data_[i]; }
    double operator[](std::size_t i) const { return data_[i]; }

    // Flat index helpers for the common layouts used in this library.
    std::size_t idx2(int a, int b) const { return static_cast<std::size_t>(a) * shape_[1] + b; }
    std::size_t idx3(int a, int b, int c) const {
        return (static_cast<std::size_t>(a) * shape_[1] + b) * shape_[2] + c;
    }
    std::size_t idx4(int a, int b, int c, int d) const {
        return ((static_cast<std::size_t>(a) * shape_[1] + b) * shape_[2] + c) * shape_[3] + d;
    }

    double& at2(int a, int b) { return data_[idx2(a, b)]; }
    double at2(int a, int b) const { return data_[idx2(a, b)]; }
    double& at3(int a, int b, int c) { return data_[idx3(a, b, c)]; }
    double at3(int a, int b, int c) const { return data_[idx3(a, b, c)]; }
    double& at4(int a, int b, int c, int d) { return data_[idx4(a, b, c, d)]; }
    double at4(int a, int b, int c, int d) const { return data_[idx4(a, b, c, d)]; }

    void fill(double v) { std::fill(data_.begin(), data_.end(), v); }

    bool same_shape(const Tensor& o) const { return shape_ == o.shape_; }

    bool operator==(const Tensor& o) const {
        return shape_ == o.shape_ && data_ == o.data_;
    }

    static std::size_t numel_of(const std::vector<int>& shape) {
        if (shape.empty()) return 0;
        std::size_t n = 1;
        for (int d : shape) n *= static_cast<std::size_t>(d);
        return n;
    }

private:
    std::vector<int> shape_;
    std::vector<double> data_;
};

} // namespace snnspace
