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

#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>

#include "snnspace/checkpoint.hpp"
#include "snnspace/encode.hpp"
#include "snnspace/lif.hpp"
#include "snnspace/network.hpp"
#include "snnspace/rng.hpp"
#include "snnspace/tensor.hpp"
#include "support/dual_oracle.hpp"
#include "support/fixtures.hpp"
#include "support/naive_sim.hpp"

using namespace snnspace;
using namespace snnspace::testing;

// ---------------------------------------------------------------------------
// Tensor
// ---------------------------------------------------------------------------

TEST_CASE("tensor shape validation and indexing") {
    Tensor t({2, 3, 4});
    CHECK(t.size() == 24);
    CHECK(t.rank() == 3);
    t.at3(1, 2, 3) = 7.5;
    CHECK(t.data()[23] == 7.5);
    t.at3(0, 0, 0) = -1.0;
    CHECK(t.data()[0] == -1.0);

    CHECK_THROWS_AS(Tensor({2, 0}), ShapeError);
    CHECK_THROWS_AS(Tensor({-1}), ShapeError);

    Tensor a({2, 2});
    Tensor b({2, 2});
    CHECK(a == b);
    b.at2(1, 1) = 1.0;
    CHECK_FALSE(a == b);
    CHECK(a.same_shape(b));
    CHECK_FALSE(a.same_shape(Tensor({4})));
}

// ---------------------------------------------------------------------------
// Rng
// ---------------------------------------------------------------------------

TEST_CASE("rng determinism and splitting") {
    Rng a(42), b(42);
    for (int i = 0; i < 100; ++i) CHECK(a.next_u64() == b.next_u64());

    // Children depend only on (parent key, label), not on how much the
    // parent has drawn.
    Rng parent(7);
    Rng early = parent.split("stream");
    for (int i = 0; i < 50; ++i) parent.uniform();
    Rng late = parent.split("stream");
    for (int i = 0; i < 20; ++i) CHECK(early.next_u64() == late.next_u64());

    Rng c1 = parent.split("alpha"), c2 = parent.split("beta");
    CHECK(c1.next_u64() != c2.next_u64());
    Rng i0 = parent.split("s", 0), i1 = parent.split("s", 1);
    CHECK(i0.next_u64() != i1.next_u64());
}

TEST_CASE("rng distribution sanity") {
    Rng rng(123);
    double sum = 0.0, sq = 0.0;
    const int n = 200000;
    for (int i = 0; i < n; ++i) {
        const double u = rng.uniform();
        CHECK(u >= 0.0);
        CHECK(u < 1.0);
        sum += u;
        sq += u * u;
    }
    CHECK(std::abs(sum / n - 0.5) < 0.01);
    CHECK(std::abs(sq / n - 1.0 / 3.0) < 0.01);

    double nsum = 0.0, nsq = 0.0;
    for (int i = 0; i < n; ++i) {
        const double x = rng.normal(2.0, 3.0);
        nsum += x;
        nsq += (x - 2.0) * (x - 2.0);
    }
    CHECK(std::abs(nsum / n - 2.0) < 0.05);
    CHECK(std::abs(nsq / n - 9.0) < 0.2);

    long psum = 0;
    for (int i = 0; i < 50000; ++i) psum += rng.poisson(3.0);
    CHECK(std::abs(psum / 50000.0 - 3.0) < 0.05);

    for (int i = 0; i < 1000; ++i) {
        const auto v = rng.uniform_int(7);
        CHECK(v < 7);
    }
    for (int i = 0; i < 10; ++i) CHECK(rng.uniform_int(1) == 0);
    CHECK_THROWS_AS(rng.uniform_int(0), ConfigError);
    CHECK_THROWS_AS(rng.poisson(-1.0), ConfigError);
    CHECK_FALSE(rng.bernoulli(0.0));
    CHECK(rng.bernoulli(1.0));
}

// ---------------------------------------------------------------------------
// LIF dynamics
// ---------------------------------------------------------------------------

TEST_CASE("lif membrane recurrence, hand-computed") {
    LifNeuronConfig cfg; // tau 2, threshold 1, subtract reset
    LifState s;
    s.potentials = Tensor({1});

    auto [s1, o1] = lif_step(s, [] { Tensor t({1}); t.data()[0] = 1.0; return t; }(), cfg);
    CHECK(o1.data()[0] == 0.0); // u = 0.5*0 + 0.5*1 = 0.5
    CHECK(s1.potentials.data()[0] == 0.5);
    CHECK(s1.time_index == 1);

    // boundary case: potential lands exactly on the threshold and fires
    auto [s2, o2] = lif_step(s1, [] { Tensor t({1}); t.data()[0] = 1.5; return t; }(), cfg);
    CHECK(o2.data()[0] == 1.0); // u = 0.25 + 0.75 = 1.0 >= 1
    CHECK(s2.potentials.data()[0] == 0.0); // subtract reset: 1.0 - 1.0

    auto [s3, o3] = lif_step(s2, [] { Tensor t({1}); t.data()[0] = 3.0; return t; }(), cfg);
    CHECK(o3.data()[0] == 1.0); // u = 1.5
    CHECK(s3.potentials.data()[0] == 0.5); // 1.5 - 1.0 kept

    LifNeuronConfig zero = cfg;
    zero.reset_mode = ResetMode::ToZero;
    auto [z3, zo3] = lif_step(s2, [] { Tensor t({1}); t.data()[0] = 3.0; return t; }(), zero);
    CHECK(zo3.data()[0] == 1.0);
    CHECK(z3.potentials.data()[0] == 0.0); // to-zero reset discards the excess

    LifNeuronConfig slow = cfg;
    slow.tau_m = 4.0;
    CHECK(slow.leak_factor() == 0.75);
    auto [s4, o4] = lif_step(s, [] { Tensor t({1}); t.data()[0] = 2.0; return t; }(), slow);
    CHECK(o4.data()[0] == 0.0);
    CHECK(s4.potentials.data()[0] == 0.5); // 0.75*0 + 0.25*2

    CHECK(surrogate_gate(1.0, cfg) == 1.0);
    CHECK(surrogate_gate(0.999999, cfg) == 0.0);
    CHECK(surrogate_gate(5.0, cfg) == 1.0);
}

TEST_CASE("lif validation") {
    LifNeuronConfig bad;
    bad.tau_m = 0.5;
    CHECK_THROWS_AS(bad.validate(), ConfigError);
    bad = LifNeuronConfig{};
    bad.u_th = 0.0;
    CHECK_THROWS_AS(bad.validate(), ConfigError);

    LifState s;
    s.potentials = Tensor({2});
    CHECK_THROWS_AS(lif_step(s, Tensor({3}), LifNeuronConfig{}), ShapeError);
}

// ---------------------------------------------------------------------------
// Encoding
// ---------------------------------------------------------------------------

TEST_CASE("poisson encoding respects pixel rates") {
    Tensor img({2, 2});
    img.at2(0, 0) = 0.0;
    img.at2(0, 1) = 1.0;
    img.at2(1, 0) = 0.5;
    img.at2(1, 1) = 2.0; // dirty input, clamps to 1

    Rng rng(99);
    std::size_t clamped = 0;
    SpikeTrain train = poisson_encode(img, 400, rng, &clamped);
    CHECK(clamped == 1);
    CHECK(train.spikes.shape() == std::vector<int>{400, 1, 2, 2});

    double c00 = 0, c01 = 0, c10 = 0, c11 = 0;
    for (int t = 0; t < 400; ++t) {
        c00 += train.spikes.at4(t, 0, 0, 0);
        c01 += train.spikes.at4(t, 0, 0, 1);
        c10 += train.spikes.at4(t, 0, 1, 0);
        c11 += train.spikes.at4(t, 0, 1, 1);
    }
    CHECK(c00 == 0.0);
    CHECK(c01 == 400.0);
    CHECK(c11 == 400.0);
    CHECK(c10 > 120);
    CHECK(c10 < 280);

    CHECK_THROWS_AS(poisson_encode(img, 0, rng), ConfigError);
    CHECK_THROWS_AS(poisson_encode(Tensor({4}), 2, rng), ShapeError);
}

// ---------------------------------------------------------------------------
// Network structure
// ---------------------------------------------------------------------------

TEST_CASE("bind rejects inconsistent layer chains") {
    NetworkParams p = tiny_net();

    NetworkParams bad = p;
    bad.layers[0].weight = Tensor({2, 3, 3, 3}); // expects 3 input channels
    CHECK_THROWS_AS(bad.bind(1, 4, 4), ShapeError);

    bad = p;
    CHECK_THROWS_AS(bad.bind(1, 5, 5), ShapeError); // odd map reaches the pool

    bad = p;
    bad.layers[2].weight = Tensor({3, 9}); // dense input size off by one
    CHECK_THROWS_AS(bad.bind(1, 4, 4), ShapeError);

    bad = p;
    bad.extractor_end = 0;
    CHECK_THROWS_AS(bad.bind(1, 4, 4), ConfigError);

    bad = p;
    bad.alignment_layer = 1; // pool layer cannot align
    CHECK_THROWS_AS(bad.bind(1, 4, 4), ConfigError);
}

TEST_CASE("standard architecture construction") {
    Rng rng(5);
    ArchConfig arch;
    NetworkParams p = build_network(arch, 1, 16, 16, rng);
    // conv/pool x3 leaves a 2x2 map; one more pool collapses it to 1x1
    // so the dense head only sees per-channel means.
    CHECK(p.layer_count() == 9);
    CHECK(p.extractor_end == 7);
    CHECK(p.num_classes() == 4);
    CHECK(p.alignment_layer == 4); // deepest conv, 4x4 map
    CHECK(p.layers[4].out_h == 4);
    CHECK(p.layers[6].out_h == 1);
    CHECK(p.layers[6].out_w == 1);
    CHECK(p.layers[7].weight.shape() == std::vector<int>{48, 16});

    // seeded init reproduces exactly
    Rng rng2(5);
    NetworkParams q = build_network(arch, 1, 16, 16, rng2);
    CHECK(p.fingerprint() == q.fingerprint());
    Rng rng3(6);
    NetworkParams r = build_network(arch, 1, 16, 16, rng3);
    CHECK(p.fingerprint() != r.fingerprint());
}

TEST_CASE("architecture without spatial collapse keeps the flat dense head") {
    Rng rng(5);
    ArchConfig arch;
    arch.collapse_spatial = false;
    NetworkParams p = build_network(arch, 1, 24, 24, rng);
    CHECK(p.layer_count() == 8);
    CHECK(p.extractor_end == 6);
    CHECK(p.alignment_layer == 4); // deepest conv, 6x6 map
    CHECK(p.layers[6].weight.shape() == std::vector<int>{48, 144});

    // collapse refuses maps that cannot halve down to 1x1
    ArchConfig odd;
    Rng rng2(5);
    CHECK_THROWS_AS(build_network(odd, 1, 24, 24, rng2), ConfigError);
}

TEST_CASE("alignment layer skips 1x1 maps") {
    // conv -> pool -> conv: the deepest conv sees a 1x1 map, so alignment
    // falls back to the first conv.
    NetworkParams p;
    p.neuron = LifNeuronConfig{};
    Layer c1;
    c1.kind = LayerKind::Conv3x3;
    c1.weight = Tensor({2, 1, 3, 3});
    Layer pool;
    pool.kind = LayerKind::AvgPool2x2;
    Layer c2;
    c2.kind = LayerKind::Conv3x3;
    c2.weight = Tensor({2, 2, 3, 3});
    Layer head;
    head.kind = LayerKind::Dense;
    head.weight = Tensor({2, 2});
    p.layers = {c1, pool, c2, head};
    p.extractor_end = 3;
    p.bind(1, 2, 2);
    CHECK(select_alignment_layer(p) == 0);
}

// ---------------------------------------------------------------------------
// Forward simulation vs the naive reference
// ---------------------------------------------------------------------------

static void check_forward_matches_naive(ResetMode mode) {
    NetworkParams p = tiny_net(mode);
    SpikeTrain input = tiny_input(6, 2024);
    ForwardRecord rec = forward(p, input);
    NaiveResult ref = naive_forward(p, input);

    REQUIRE(rec.scores.size() == ref.scores.size());
    for (std::size_t k = 0; k < ref.scores.size(); ++k) {
        CHECK(rec.scores[k] == ref.scores[k]); // dyadic arithmetic: exact
    }
    const std::size_t n = p.layers[0].out_size();
    double spike_total = 0.0;
    for (int t = 0; t < 6; ++t) {
        for (std::size_t i = 0; i < n; ++i) {
            CHECK(rec.alignment_spikes.data()[t * n + i] == ref.align_spikes[t][i]);
            CHECK(rec.alignment_potentials.data()[t * n + i] == ref.align_potentials[t][i]);
            spike_total += ref.align_spikes[t][i];
        }
    }
    // guard against a degenerate all-quiet or all-saturated fixture
    CHECK(spike_total > 0.0);
    CHECK(spike_total < 6.0 * n);
}

TEST_CASE("forward matches naive reference, subtract reset") {
    check_forward_matches_naive(ResetMode::SubtractThreshold);
}

TEST_CASE("forward matches naive reference, to-zero reset") {
    check_forward_matches_naive(ResetMode::ToZero);
}

TEST_CASE("forward validates input shape and binding") {
    NetworkParams p = tiny_net();
    SpikeTrain wrong;
    wrong.spikes = Tensor({3, 1, 5, 5});
    CHECK_THROWS_AS(forward(p, wrong), ShapeError);
    SpikeTrain flat;
    flat.spikes = Tensor({3, 16});
    CHECK_THROWS_AS(forward(p, flat), ShapeError);
}

// ---------------------------------------------------------------------------
// Backpropagation vs the forward-mode oracle
// ---------------------------------------------------------------------------

static LossSeed dyadic_seed(const NetworkParams& p, int t_steps, bool score, bool spike,
                            bool pot) {
    const Layer& a = p.layers[p.alignment_layer];
    LossSeed seed;
    if (score) {
        seed.score_grad = {0.5, -0.25};
    }
    if (spike) {
        seed.alignment_spike_grad = Tensor({t_steps, a.out_c, a.out_h, a.out_w});
        for (std::size_t i = 0; i < seed.alignment_spike_grad.size(); ++i) {
            seed.alignment_spike_grad.data()[i] = static_cast<double>((i * 3) % 5 - 2) / 8.0;
        }
    }
    if (pot) {
        seed.alignment_potential_grad = Tensor({t_steps, a.out_c, a.out_h, a.out_w});
        for (std::size_t i = 0; i < seed.alignment_potential_grad.size(); ++i) {
            seed.alignment_potential_grad.data()[i] = static_cast<double>((i * 7) % 9 - 4) / 16.0;
        }
    }
    return seed;
}

static void check_backward_exact(ResetMode mode, bool score, bool spike, bool pot) {
    NetworkParams p = tiny_net(mode);
    SpikeTrain input = tiny_input(6, 777);
    ForwardRecord rec = forward(p, input);
    LossSeed seed = dyadic_seed(p, 6, score, spike, pot);

    Gradients got = backward(p, rec, seed);
    Gradients want = dual_gradients(p, input, seed);

    double max_abs = 0.0;
    for (int l = 0; l < p.layer_count(); ++l) {
        for (std::size_t i = 0; i < want.weight[l].size(); ++i) {
            CHECK(got.weight[l].data()[i] == want.weight[l].data()[i]);
            max_abs = std::max(max_abs, std::abs(want.weight[l].data()[i]));
        }
        for (std::size_t i = 0; i < want.bias[l].size(); ++i) {
            CHECK(got.bias[l].data()[i] == want.bias[l].data()[i]);
            max_abs = std::max(max_abs, std::abs(want.bias[l].data()[i]));
        }
    }
    CHECK(max_abs > 0.0); // the comparison must not be vacuous
}

TEST_CASE("backward equals dual oracle bit for bit, score seed") {
    check_backward_exact(ResetMode::SubtractThreshold, true, false, false);
}

TEST_CASE("backward equals dual oracle bit for bit, spike seed") {
    check_backward_exact(ResetMode::SubtractThreshold, false, true, false);
}

TEST_CASE("backward equals dual oracle bit for bit, potential seed") {
    check_backward_exact(ResetMode::SubtractThreshold, false, false, true);
}

TEST_CASE("backward equals dual oracle bit for bit, combined seeds") {
    check_backward_exact(ResetMode::SubtractThreshold, true, true, true);
}

TEST_CASE("backward equals dual oracle bit for bit, to-zero reset") {
    check_backward_exact(ResetMode::ToZero, true, true, true);
}

TEST_CASE("backward requires a tape and matching parameters") {
    NetworkParams p = tiny_net();
    SpikeTrain input = tiny_input(4, 1);
    ForwardRecord no_tape = forward(p, input, false);
    LossSeed seed = dyadic_seed(p, 4, true, false, false);
    CHECK_THROWS_AS(backward(p, no_tape, seed), ConfigError);

    ForwardRecord rec = forward(p, input);
    p.layers[0].weight.data()[0] += 0.25; // stale tape now
    CHECK_THROWS_AS(backward(p, rec, seed), IntegrityError);
}

// ---------------------------------------------------------------------------
// SGD update
// ---------------------------------------------------------------------------

TEST_CASE("sgd update honours the layer span") {
    NetworkParams p = tiny_net();
    SpikeTrain input = tiny_input(6, 31);
    ForwardRecord rec = forward(p, input);
    Gradients g = backward(p, rec, dyadic_seed(p, 6, true, true, false));

    NetworkParams updated = p;
    sgd_update(updated, g, 0.5, p.extractor_range());
    CHECK_FALSE(updated.layers[0].weight == p.layers[0].weight);
    // readout head untouched under the extractor span
    CHECK(updated.layers[2].weight == p.layers[2].weight);
    CHECK(updated.layers[3].weight == p.layers[3].weight);
    CHECK(updated.layers[3].bias == p.layers[3].bias);

    // explicit value check on one element
    const double expect = p.layers[0].weight.data()[0] - 0.5 * g.weight[0].data()[0];
    CHECK(updated.layers[0].weight.data()[0] == expect);

    NetworkParams all = p;
    sgd_update(all, g, 0.5, p.full_range());
    CHECK_FALSE(all.layers[3].weight == p.layers[3].weight);
}

TEST_CASE("sgd update refuses non-finite gradients and leaves params intact") {
    NetworkParams p = tiny_net();
    SpikeTrain input = tiny_input(6, 32);
    ForwardRecord rec = forward(p, input);
    Gradients g = backward(p, rec, dyadic_seed(p, 6, true, false, false));
    g.weight[2].data()[5] = std::nan("");

    const std::uint64_t before = p.fingerprint();
    try {
        sgd_update(p, g, 0.1, p.full_range());
        FAIL("expected NumericError");
    } catch (const NumericError& e) {
        CHECK(std::string(e.what()).find("layer 2") != std::string::npos);
    }
    CHECK(p.fingerprint() == before);

    // stale gradients are rejected outright
    NetworkParams q = tiny_net();
    q.layers[0].weight.data()[0] += 0.25;
    Gradients g2 = backward(tiny_net(), forward(tiny_net(), input), dyadic_seed(q, 6, true, false, false));
    CHECK_THROWS_AS(sgd_update(q, g2, 0.1, q.full_range()), IntegrityError);
}

// ---------------------------------------------------------------------------
// Checkpoints
// ---------------------------------------------------------------------------

TEST_CASE("checkpoint round trip preserves structure and values") {
    namespace fs = std::filesystem;
    const fs::path dir = fs::temp_directory_path() / "snnspace_ckpt_test";
    fs::create_directories(dir);
    const std::string path = (dir / "net.snnw").string();

    NetworkParams p = tiny_net();
    save_checkpoint(p, path);
    NetworkParams q = load_checkpoint(path);
    finalize_network(q, p.neuron, 1, 4, 4);

    CHECK(q.layer_count() == p.layer_count());
    CHECK(q.extractor_end == p.extractor_end);
    CHECK(q.alignment_layer == p.alignment_layer);
    for (int l = 0; l < p.layer_count(); ++l) {
        CHECK(q.layers[l].kind == p.layers[l].kind);
        REQUIRE(q.layers[l].weight.size() == p.layers[l].weight.size());
        for (std::size_t i = 0; i < p.layers[l].weight.size(); ++i) {
            // storage is f32; dyadic sixteenths survive exactly
            CHECK(q.layers[l].weight.data()[i] == p.layers[l].weight.data()[i]);
        }
    }
    // the reloaded network simulates identically
    SpikeTrain input = tiny_input(5, 11);
    CHECK(forward(q, input).scores == forward(p, input).scores);
    fs::remove_all(dir);
}

TEST_CASE("checkpoint rejects corruption") {
    namespace fs = std::filesystem;
    const fs::path dir = fs::temp_directory_path() / "snnspace_ckpt_corrupt";
    fs::create_directories(dir);
    const std::string path = (dir / "net.snnw").string();
    save_checkpoint(tiny_net(), path);

    // flip one payload byte: checksum must catch it
    {
        std::fstream f(path, std::ios::in | std::ios::out | std::ios::binary);
        f.seekp(40);
        char c;
        f.seekg(40);
        f.read(&c, 1);
        c = static_cast<char>(c ^ 0x40);
        f.seekp(40);
        f.write(&c, 1);
    }
    CHECK_THROWS_AS(load_checkpoint(path), IoError);

    // truncation
    save_checkpoint(tiny_net(), path);
    fs::resize_file(path, fs::file_size(path) - 7);
    CHECK_THROWS_AS(load_checkpoint(path), IoError);

    // bad magic
    {
        std::ofstream f(path, std::ios::binary | std::ios::trunc);
        f.write("NOPE", 4);
    }
    CHECK_THROWS_AS(load_checkpoint(path), IoError);
    CHECK_THROWS_AS(load_checkpoint((dir / "missing.snnw").string()), IoError);
    fs::remove_all(dir);
}
