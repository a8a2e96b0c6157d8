// Copyright 2026 The cascade-kv Authors
// SPDX-License-Identifier: Apache-2.0

#include <gtest/gtest.h>

#include <random>
#include <vector>

#include "cascade_kv/oracles.hpp"
#include "cascade_kv/prefill.hpp"

using namespace cascade_kv;

namespace {

Matrix<float> random_inputs(std::size_t rows, std::size_t cols, std::uint64_t seed) {
    std::mt19937_64 rng(seed);
    std::normal_distribution<double> n(0.0, 1.0);
    Matrix<float> m(rows, cols);
    for (auto& x : m.data()) x = static_cast<float>(n(rng));
    return m;
}

PrefillConfig small_config(std::size_t stride, HeadPolicy policy = HeadPolicy::independent,
                           std::size_t cascades = 1) {
    PrefillConfig c;
    c.stride = stride;
    c.layers = 2;
    c.cache_config.total_capacity = 48;
    c.cache_config.num_cascades = cascades;
    c.cache_config.sink_size = 4;
    c.cache_config.ema_gamma = 0.99;
    c.cache_config.head_policy = policy;
    c.attn = AttentionParams::make(8, 4, 2);
    return c;
}

}  // namespace

TEST(StrideChunks, Examples) {
    using R = std::vector<std::pair<std::size_t, std::size_t>>;
    EXPECT_EQ(stride_chunks(10, 4), (R{{0, 4}, {4, 8}, {8, 10}}));
    EXPECT_EQ(stride_chunks(4, 8), (R{{0, 4}}));
    const auto singles = stride_chunks(9, 1);
    ASSERT_EQ(singles.size(), 9u);
    for (std::size_t i = 0; i < 9; ++i) EXPECT_EQ(singles[i], std::make_pair(i, i + 1));
    EXPECT_THROW(stride_chunks(0, 1), ConfigError);
}

TEST(Prefill, FullStrideMatchesDenseAttention) {
    const auto cfg = small_config(52);
    const auto model = DeskModel<float>::random(cfg.attn, cfg.layers, 1);
    const auto x = random_inputs(52, cfg.attn.q_width(), 2);
    const auto got = prefill(cfg, x, model);
    const auto want = oracle::dense_prefill(cfg.attn, model, x);
    for (std::size_t l = 0; l < cfg.layers; ++l) {
        EXPECT_LE(oracle::relative_error(got.layer_outputs[l], want[l]), 1e-6) << "layer " << l;
    }
}

// Length at which no cache decision has discarded anything yet: a single
// window holds sink + capacity; with more cascades the first boundary
// discard happens once the second sub-cache is full.
std::size_t eviction_free_length(const CascadeConfig& c) {
    if (c.num_cascades == 1) return c.sink_size + c.total_capacity;
    return c.sink_size + 2 * c.sub_capacity() + 1;
}

TEST(Prefill, StrideInvarianceBeforeEviction) {
    for (std::size_t cascades : {1u, 4u}) {
        for (auto policy : {HeadPolicy::homogeneous, HeadPolicy::independent}) {
            const auto base_cfg = small_config(1, policy, cascades);
            const std::size_t s = eviction_free_length(base_cfg.cache_config);
            const auto model = DeskModel<float>::random(base_cfg.attn, base_cfg.layers, 3);
            const auto x = random_inputs(s, base_cfg.attn.q_width(), 4);
            const auto want = oracle::dense_prefill(base_cfg.attn, model, x);
            const auto base = prefill(base_cfg, x, model);
            for (std::size_t stride : {std::size_t{1}, std::size_t{7}, s / 2, s}) {
                const auto got = prefill(small_config(stride, policy, cascades), x, model);
                EXPECT_LE(oracle::relative_error(got.output(), want.back()), 1e-6) << "N=" << cascades << " stride " << stride;
                for (std::size_t l = 0; l < base_cfg.layers; ++l) {
                    for (std::size_t u = 0; u < got.caches[l].num_units(); ++u) {
                        const auto origins = got.caches[l].unit(u).resident_origins();
                        EXPECT_EQ(origins, base.caches[l].unit(u).resident_origins());
                        EXPECT_EQ(origins.size(), s);
                    }
                }
            }
        }
    }
}

TEST(Prefill, BoundaryDiscardPrecedesFullCapacityWithCascades) {
    const auto cfg = small_config(1, HeadPolicy::independent, 4);
    const std::size_t full = cfg.cache_config.sink_size + cfg.cache_config.total_capacity;
    const auto model = DeskModel<float>::random(cfg.attn, 1, 3);
    PrefillConfig one = cfg;
    one.layers = 1;
    const auto x = random_inputs(full, cfg.attn.q_width(), 4);
    const auto got = prefill(one, x, model);
    const auto& cache = got.caches[0].unit(0);
    EXPECT_LT(cache.resident_count(), full);
    EXPECT_EQ(cache.sub_cache(4).size(), 0u);
    std::size_t discards = 0;
    for (const auto& e : got.traces[0][0].events()) discards += e.kind == EventKind::final_discard ? 1 : 0;
    EXPECT_EQ(discards, full - cache.resident_count());
}

// After a prefill that never evicts, every resident's score equals the
// per-token EMA of the attention mass it received.
TEST(Prefill, ScoreFoldMatchesSequentialEma) {
    PrefillConfig cfg = small_config(1);
    cfg.layers = 1;
    cfg.cache_config.ema_gamma = 0.95;
    const std::size_t s = 40;
    const auto model = DeskModel<float>::random(cfg.attn, 1, 5);
    const auto x = random_inputs(s, cfg.attn.q_width(), 6);
    const auto q = project(x, model.layers[0].wq).cast<double>();
    const auto k = project(x, model.layers[0].wk).cast<double>();
    const Matrix<double> no_resident(0, cfg.attn.kv_width());
    const auto want = oracle::sequential_ema(cfg.attn, cfg.cache_config.head_policy, cfg.cache_config.head_reduction,
                                             no_resident, q, k, cfg.beta());
    for (std::size_t stride : {1u, 3u, 8u, 40u}) {
        cfg.stride = stride;
        const auto got = prefill(cfg, x, model);
        for (std::size_t u = 0; u < got.caches[0].num_units(); ++u) {
            std::vector<double> mu;
            got.caches[0].unit(u).for_each_resident([&](const EntryView<float>& e) { mu.push_back(e.score); });
            EXPECT_LE(oracle::relative_error(mu, want.chunk[u]), 1e-6) << "stride " << stride << " unit " << u;
        }
    }
}

TEST(Prefill, ResidentSetMatchesReplay) {
    PrefillConfig cfg;
    cfg.stride = 4;
    cfg.layers = 1;
    cfg.cache_config.total_capacity = 8;
    cfg.cache_config.num_cascades = 2;
    cfg.cache_config.sink_size = 2;
    cfg.cache_config.ema_gamma = 0.9;
    cfg.attn = AttentionParams::make(4, 1, 1);
    const auto model = DeskModel<float>::random(cfg.attn, 1, 7);
    const auto x = random_inputs(16, cfg.attn.q_width(), 8);
    const auto got = prefill(cfg, x, model);
    const auto& cache = got.caches[0].unit(0);

    ASSERT_FALSE(got.traces[0][0].empty());
    EXPECT_EQ(cache.resident_count(), 10u);
    EXPECT_EQ(cache.sink().size(), 2u);
    const auto origins = cache.resident_origins();
    EXPECT_EQ(origins.front(), 0);
    EXPECT_EQ(origins[1], 1);
    EXPECT_EQ(origins.back(), 15);

    // Without selection the resident set is fixed by the schedule alone.
    PrefillConfig plain = cfg;
    plain.cache_config.selection_enabled = false;
    const auto fixed = prefill(plain, x, model);
    oracle::CascadeSimulator fixed_sim(2, 8, 2, false);
    EvictionTrace fixed_trace;
    for (std::int64_t t = 0; t < 16; ++t) fixed_sim.add({t, 0.0}, fixed_trace);
    EXPECT_EQ(fixed.caches[0].unit(0).resident_origins(), fixed_sim.resident_origins());
    EXPECT_EQ(fixed.traces[0][0], fixed_trace);
}

TEST(Prefill, OrderPreservedAcrossStrides) {
    const auto cfg = small_config(5, HeadPolicy::independent, 4);
    const auto model = DeskModel<float>::random(cfg.attn, cfg.layers, 9);
    const auto x = random_inputs(200, cfg.attn.q_width(), 10);
    const auto got = prefill(cfg, x, model);
    for (const auto& per_layer : got.traces) {
        for (const auto& trace : per_layer) {
            std::int64_t last = -1;
            for (const auto& e : trace.events()) {
                if (e.kind == EventKind::sink_add || (e.kind == EventKind::accept && e.sub_cache == 1)) {
                    EXPECT_GT(e.origin_pos, last);
                    last = e.origin_pos;
                }
            }
            EXPECT_EQ(last, 199);
        }
    }
}
