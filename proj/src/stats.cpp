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

#include "snnspace/stats.hpp"

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <string>

namespace snnspace {

namespace {

/// Standard normal upper tail P(Z >= z), via erfc so that tiny tail
/// probabilities avoid the 1 - CDF cancellation.
double upper_tail(double z) { return 0.5 * std::erfc(z / std::sqrt(2.0)); }

/// Average ranks of |d|, doubled so ties land on integers. Doubled ranks
/// keep the exact-distribution arithmetic in integer space: a tie between
/// ranks 2 and 3 yields 2.5 each, which is 5 in doubled units.
std::vector<std::int64_t> doubled_ranks(const std::vector<double>& abs_d) {
    const int n = static_cast<int>(abs_d.size());
    std::vector<int> order(n);
    for (int i = 0; i < n; ++i) order[i] = i;
    std::sort(order.begin(), order.end(),
              [&](int a, int b) { return abs_d[a] < abs_d[b]; });

    std::vector<std::int64_t> dr(n, 0);
    int i = 0;
    while (i < n) {
        int j = i;
        while (j < n && abs_d[order[j]] == abs_d[order[i]]) ++j;
        // Ranks i+1 .. j occupy this tie group; their average doubled is
        // (i+1) + j.
        const std::int64_t doubled = static_cast<std::int64_t>(i) + 1 + j;
        for (int k = i; k < j; ++k) dr[order[k]] = doubled;
        i = j;
    }
    return dr;
}

/// Exact null distribution of doubled-W: counts[v] = number of the 2^n sign
/// assignments whose positive-rank sum equals v. Built by convolving one
/// rank at a time, which enumerates the same space as iterating all 2^n
/// masks but in O(n * total) work.
std::vector<std::uint64_t> exact_counts(const std::vector<std::int64_t>& dr) {
    std::int64_t total = 0;
    for (std::int64_t r : dr) total += r;
    std::vector<std::uint64_t> counts(static_cast<std::size_t>(total) + 1, 0);
    counts[0] = 1;
    std::int64_t reach = 0;
    for (std::int64_t r : dr) {
        for (std::int64_t v = reach; v >= 0; --v) {
            if (counts[static_cast<std::size_t>(v)] != 0) {
                counts[static_cast<std::size_t>(v + r)] +=
                    counts[static_cast<std::size_t>(v)];
            }
        }
        reach += r;
    }
    return counts;
}

} // namespace

WilcoxonResult wilcoxon_signed_rank(const std::vector<double>& x,
                                    const std::vector<double>& y,
                                    Sidedness sidedness) {
    if (x.size() != y.size()) {
        throw ShapeError("wilcoxon_signed_rank: paired lists differ in length (" +
                         std::to_string(x.size()) + " vs " +
                         std::to_string(y.size()) + ")");
    }
    if (x.empty()) {
        throw ConfigError("wilcoxon_signed_rank: need at least one pair");
    }

    std::vector<double> abs_d;
    std::vector<bool> positive;
    for (std::size_t i = 0; i < x.size(); ++i) {
        const double d = x[i] - y[i];
        if (!std::isfinite(d)) {
            throw NumericError("wilcoxon_signed_rank: non-finite difference at pair " +
                               std::to_string(i));
        }
        if (d == 0.0) continue;  // dropped per the standard convention
        abs_d.push_back(std::fabs(d));
        positive.push_back(d > 0.0);
    }
    const int n = static_cast<int>(abs_d.size());
    if (n == 0) {
        throw NumericError(
            "wilcoxon_signed_rank: all differences are zero; the test is undefined");
    }

    const std::vector<std::int64_t> dr = doubled_ranks(abs_d);
    std::int64_t w2 = 0;      // doubled W
    std::int64_t total2 = 0;  // doubled sum of all ranks = n(n+1)
    for (int i = 0; i < n; ++i) {
        total2 += dr[i];
        if (positive[i]) w2 += dr[i];
    }

    WilcoxonResult result;
    result.w = static_cast<double>(w2) / 2.0;
    result.n = n;

    if (n <= 20) {
        result.exact = true;
        const std::vector<std::uint64_t> counts = exact_counts(dr);
        const double denom = std::ldexp(1.0, n);  // 2^n
        auto tail_ge = [&](std::int64_t v) {
            std::uint64_t c = 0;
            for (std::int64_t u = std::max<std::int64_t>(v, 0);
                 u < static_cast<std::int64_t>(counts.size()); ++u) {
                c += counts[static_cast<std::size_t>(u)];
            }
            return static_cast<double>(c) / denom;
        };
        auto tail_le = [&](std::int64_t v) {
            std::uint64_t c = 0;
            const std::int64_t hi =
                std::min<std::int64_t>(v, static_cast<std::int64_t>(counts.size()) - 1);
            for (std::int64_t u = 0; u <= hi; ++u) {
                c += counts[static_cast<std::size_t>(u)];
            }
            return static_cast<double>(c) / denom;
        };
        switch (sidedness) {
        case Sidedness::Greater:
            result.p = tail_ge(w2);
            break;
        case Sidedness::Less:
            result.p = tail_le(w2);
            break;
        case Sidedness::TwoSided: {
            // P(|W - mu| >= |w - mu|) with mu = total/2; doubled units keep
            // the distance comparison integral (distances double again to
            // stay integral after subtracting the possibly-odd total).
            const std::int64_t dist4 = std::llabs(2 * w2 - total2);
            double p = 0.0;
            for (std::int64_t v = 0; v < static_cast<std::int64_t>(counts.size()); ++v) {
                if (std::llabs(2 * v - total2) >= dist4) {
                    p += static_cast<double>(counts[static_cast<std::size_t>(v)]);
                }
            }
            result.p = std::min(1.0, p / denom);
            break;
        }
        }
    } else {
        result.exact = false;
        const double nd = static_cast<double>(n);
        const double mu = nd * (nd + 1.0) / 4.0;
        double var = nd * (nd + 1.0) * (2.0 * nd + 1.0) / 24.0;
        // Tie correction: subtract (t^3 - t)/48 per group of t equal ranks.
        {
            std::vector<std::int64_t> sorted = dr;
            std::sort(sorted.begin(), sorted.end());
            std::size_t i = 0;
            while (i < sorted.size()) {
                std::size_t j = i;
                while (j < sorted.size() && sorted[j] == sorted[i]) ++j;
                const double t = static_cast<double>(j - i);
                var -= (t * t * t - t) / 48.0;
                i = j;
            }
        }
        if (var <= 0.0) {
            throw NumericError(
                "wilcoxon_signed_rank: null variance vanished (all ranks tied)");
        }
        const double sigma = std::sqrt(var);
        const double w = result.w;
        switch (sidedness) {
        case Sidedness::Greater:
            result.p = upper_tail((w - mu - 0.5) / sigma);
            break;
        case Sidedness::Less:
            result.p = upper_tail((mu - w - 0.5) / sigma);
            break;
        case Sidedness::TwoSided:
            result.p = std::min(
                1.0, 2.0 * upper_tail((std::fabs(w - mu) - 0.5) / sigma));
            break;
        }
    }
    return result;
}

double mean(const std::vector<double>& xs) {
    if (xs.empty()) throw ConfigError("mean: empty list");
    double s = 0.0;
    for (double v : xs) s += v;
    return s / static_cast<double>(xs.size());
}

double sample_stddev(const std::vector<double>& xs) {
    if (xs.size() < 2) {
        throw ConfigError("sample_stddev: need at least two values");
    }
    const double m = mean(xs);
    double ss = 0.0;
    for (double v : xs) ss += (v - m) * (v - m);
    return std::sqrt(ss / static_cast<double>(xs.size() - 1));
}

double standard_error(const std::vector<double>& xs) {
    return sample_stddev(xs) / std::sqrt(static_cast<double>(xs.size()));
}

} // namespace snnspace
