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

#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cstdlib>
#include <string>

#include "snnspace/config.hpp"

using namespace snnspace;

namespace {

bool contains(const std::string& haystack, const std::string& needle) {
    return haystack.find(needle) != std::string::npos;
}

} // namespace

TEST_CASE("dotted keys land in the right nested fields") {
    const ExperimentConfig cfg = parse_config(
        "run.seed = 123\n"
        "run.method = no_adapt\n"
        "corrupt.kind = shot_noise\n"
        "corrupt.level = 3\n"
        "adapt.eta = 0.1\n"
        "adapt.scope = global\n"
        "adapt.aggregation = mean_potential\n"
        "train.augment.severity = 2.5\n"
        "arch.conv_channels = 4, 8, 12\n");
    CHECK(cfg.seed == 123);
    CHECK(cfg.method == Method::NoAdapt);
    CHECK(cfg.corruption == CorruptionKind::ShotNoise);
    CHECK(cfg.corruption_level == 3);
    CHECK(cfg.adapt.eta == 0.1);
    CHECK(cfg.adapt.scope == DistScope::Global);
    CHECK(cfg.adapt.aggregation == Aggregation::MeanPotential);
    CHECK(cfg.train.augment.severity == 2.5);
    CHECK(cfg.arch.conv_channels == std::vector<int>{4, 8, 12});
    // Untouched keys keep their defaults.
    CHECK(cfg.adapt.num_views == ExperimentConfig{}.adapt.num_views);
}

TEST_CASE("comments, blank lines and spacing are tolerated") {
    const ExperimentConfig cfg = parse_config(
        "# experiment settings\n"
        "\n"
        "   adapt.eta=0.25   # inline note\n"
        "\trun.output_dir = runs/exp1\n");
    CHECK(cfg.adapt.eta == 0.25);
    CHECK(cfg.output_dir == "runs/exp1");
}

TEST_CASE("unknown keys are rejected with their line number") {
    try {
        parse_config("adapt.eta = 0.1\nadapt.etaa = 0.2\n");
        FAIL("expected ParseError");
    } catch (const ParseError& e) {
        CHECK(contains(e.what(), "line 2"));
        CHECK(contains(e.what(), "adapt.etaa"));
    }
}

TEST_CASE("duplicate keys are rejected and named") {
    try {
        parse_config("adapt.eta = 0.1\n# spacer\nadapt.eta = 0.2\n");
        FAIL("expected ParseError");
    } catch (const ParseError& e) {
        CHECK(contains(e.what(), "line 3"));
        CHECK(contains(e.what(), "duplicate"));
        CHECK(contains(e.what(), "adapt.eta"));
    }
}

TEST_CASE("malformed lines and bad values carry locations") {
    CHECK_THROWS_AS(parse_config("just words\n"), ParseError);
    try {
        parse_config("run.seed = -4\n");
        FAIL("expected ParseError");
    } catch (const ParseError& e) {
        CHECK(contains(e.what(), "line 1"));
        CHECK(contains(e.what(), "run.seed"));
    }
    CHECK_THROWS_AS(parse_config("adapt.eta = fast\n"), ParseError);
    CHECK_THROWS_AS(parse_config("arch.bias = yes\n"), ParseError);
    CHECK_THROWS_AS(parse_config("run.method = magic\n"), ParseError);
    CHECK_THROWS_AS(parse_config("corrupt.kind = fog\n"), ParseError);
    CHECK_THROWS_AS(parse_config("arch.conv_channels = \n"), ParseError);
}

TEST_CASE("serialize then parse is lossless") {
    ExperimentConfig cfg;
    cfg.seed = 98765;
    cfg.method = Method::NoAdapt;
    cfg.checkpoint = "models/base.snnw";
    cfg.output_dir = "runs/a";
    cfg.corruption = CorruptionKind::ImpulseNoise;
    cfg.corruption_level = 2;
    cfg.adapt.eta = 0.0037;
    cfg.adapt.num_views = 8;
    cfg.adapt.scope = DistScope::Global;
    cfg.adapt.aggregation = Aggregation::PerStep;
    cfg.adapt.smoothing_sigma = 1.25;
    cfg.adapt.augment.severity = 0.7;
    cfg.train.eta = 0.05;
    cfg.train.eta_decay = 0.93; // not exactly representable; round-trip anyway
    cfg.train.momentum = 0.125;
    cfg.arch.conv_channels = {8, 24, 32};
    cfg.arch.dense_units = 0;
    cfg.arch.collapse_spatial = false;
    cfg.neuron.tau_m = 3.5;
    cfg.data.test_per_class = 11;
    cfg.data.jitter = 1.75;

    const std::string text = serialize_config(cfg);
    const ExperimentConfig back = parse_config(text);
    CHECK(serialize_config(back) == text);

    CHECK(back.seed == cfg.seed);
    CHECK(back.method == cfg.method);
    CHECK(back.checkpoint == cfg.checkpoint);
    CHECK(back.corruption == cfg.corruption);
    CHECK(back.corruption_level == cfg.corruption_level);
    CHECK(back.adapt.eta == cfg.adapt.eta);
    CHECK(back.adapt.scope == cfg.adapt.scope);
    CHECK(back.adapt.aggregation == cfg.adapt.aggregation);
    CHECK(back.adapt.smoothing_sigma == cfg.adapt.smoothing_sigma);
    CHECK(back.train.eta_decay == cfg.train.eta_decay);
    CHECK(back.arch.conv_channels == cfg.arch.conv_channels);
    CHECK(back.arch.collapse_spatial == cfg.arch.collapse_spatial);
    CHECK(back.neuron.tau_m == cfg.neuron.tau_m);
    CHECK(back.data.jitter == cfg.data.jitter);
}

TEST_CASE("default config serializes every key and validates") {
    const ExperimentConfig cfg;
    cfg.validate();
    const std::string text = serialize_config(cfg);
    for (const char* key :
         {"run.seed", "run.method", "corrupt.kind", "corrupt.level",
          "data.image_size", "arch.conv_channels", "neuron.tau_m", "train.eta",
          "adapt.eta", "adapt.augment.severity", "train.augment.severity"}) {
        CAPTURE(key);
        CHECK(contains(text, std::string(key) + " = "));
    }
    CHECK(parse_config(text).adapt.eta == cfg.adapt.eta);
}

TEST_CASE("validate rejects out-of-range settings") {
    ExperimentConfig cfg;
    cfg.corruption_level = 6;
    CHECK_THROWS_AS(cfg.validate(), ConfigError);
    cfg = ExperimentConfig{};
    cfg.corruption = CorruptionKind::None;
    cfg.corruption_level = 9; // ignored for kind none
    cfg.validate();
    cfg = ExperimentConfig{};
    cfg.neuron.tau_m = 0.5;
    CHECK_THROWS_AS(cfg.validate(), ConfigError);
    cfg = ExperimentConfig{};
    cfg.arch.conv_channels = {};
    CHECK_THROWS_AS(cfg.validate(), ConfigError);
    cfg = ExperimentConfig{};
    cfg.adapt.eta = -0.1;
    CHECK_THROWS_AS(cfg.validate(), ConfigError);
}

TEST_CASE("SPACE_SEED environment override") {
    ExperimentConfig cfg;
    cfg.seed = 1;

    unsetenv("SPACE_SEED");
    CHECK_FALSE(apply_env_overrides(cfg));
    CHECK(cfg.seed == 1);

    setenv("SPACE_SEED", "424242", 1);
    CHECK(apply_env_overrides(cfg));
    CHECK(cfg.seed == 424242);

    setenv("SPACE_SEED", "not-a-number", 1);
    CHECK_THROWS_AS(apply_env_overrides(cfg), ConfigError);

    unsetenv("SPACE_SEED");
}
