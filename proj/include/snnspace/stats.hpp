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

#include "snnspace/errors.hpp"

namespace snnspace {

/// Which tail of the signed-rank distribution the p-value covers.
enum class Sidedness {
    Greater,   ///< H1: x tends to exceed y (large W is evidence).
    Less,      ///< H1: x tends to fall below y (small W is evidence).
    TwoSided,  ///< H1: x and y differ in either direction.
};

struct WilcoxonResult {
    /// Sum of the ranks of positive differences x[i] - y[i]. Tied absolute
    /// differences share their average rank, so W can be a half-integer.
    double w = 0.0;
    /// p-value under the requested sidedness.
    double p = 1.0;
    /// Pairs that entered the ranking (zero differences are dropped).
    int n = 0;
    /// True when p comes from the exact null distribution (n <= 20);
    /// false when the tie-corrected normal approximation was used.
    bool exact = true;
};

/// Paired Wilcoxon signed-rank test of x against y.
///
/// Differences of exactly zero are dropped before ranking and tied
/// magnitudes receive average ranks (the standard convention). For n <= 20
/// the p-value is computed from the exact distribution of W over all 2^n
/// equally likely sign assignments; beyond that a normal approximation with
/// tie correction and continuity correction is used. The two-sided p is the
/// exact probability of a W at least as far from the null mean as observed,
/// which by symmetry equals twice the smaller tail.
///
/// Throws ShapeError when the lists differ in length, ConfigError when they
/// are empty, and NumericError when every difference is zero (the test is
/// undefined: there is nothing to rank).
WilcoxonResult wilcoxon_signed_rank(const std::vector<double>& x,
                                    const std::vector<double>& y,
                                    Sidedness sidedness);

/// Arithmetic mean. Throws ConfigError on an empty list.
double mean(const std::vector<double>& xs);

/// Unbiased (n-1) sample standard deviation. Throws ConfigError when fewer
/// than two values are given.
double sample_stddev(const std::vector<double>& xs);

/// Standard error of the mean: sample_stddev / sqrt(n).
double standard_error(const std::vector<double>& xs);

} // namespace snnspace
