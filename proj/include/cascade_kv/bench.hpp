// Copyright 2026 The cascade-kv Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <algorithm>
#include <chrono>
#include <cstddef>
#include <cstdint>
#include <random>
#include <vector>

#include "cascade_kv/baselines.hpp"
#include "cascade_kv/cascade_cache.hpp"
#include "cascade_kv/prefill.hpp"
#include "cascade_kv/workloads.hpp"

namespace cascade_kv {

struct TimingSummary {
    double median = 0.0;
    double q1 = 0.0;
    double q3 = 0.0;
    std::size_t runs = 0;

    double iqr() const noexcept { return q3 - q1; }
};

/// Median and quartiles with linear interpolation between order statistics.
inline TimingSummary summarize(std::vector<double> samples) {
    detail::require<ConfigError>(!samples.empty(), "summarize: no samples");
    std::sort(samples.begin(), samples.end());
    auto quantile = [&](double q) {
        const double pos = q * static_cast<double>(samples.size() - 1);
        const auto lo = static_cast<std::size_t>(pos);
        const std::size_t hi = std::min(lo + 1, samples.size() - 1);
        return samples[lo] + (pos - static_cast<double>(lo)) * (samples[hi] - samples[lo]);
    };
    return {quantile(0.5), quantile(0.25), quantile(0.75), samples.size()};
}

/// Runs `fn` warmup + runs times and summarizes the timed runs (seconds).
template <class F>
TimingSummary time_runs(std::size_t warmup, std::size_t runs, F&& fn) {
    for (std::size_t i = 0; i < warmup; ++i) fn();
    std::vector<double> samples;
    samples.reserve(runs);
    for (std::size_t i = 0; i < runs; ++i) {
        const auto t0 = std::chrono::steady_clock::now();
        fn();
        const auto t1 = std::chrono::steady_clock::now();
        samples.push_back(std::chrono::duration<double>(t1 - t0).count());
    }
    return summarize(std::move(samples));
}

struct CacheOpBenchConfig {
    std::size_t tokens = 16384;
    std::size_t capacity = 16384;
    std::size_t sink = 64;
    std::size_t width = 32;  // floats per key (and per value)
    std::size_t warmup = 1;
    std::size_t runs = 5;
    std::uint64_t seed = 0;
};

namespace detail {

inline Matrix<float> bench_rows(std::size_t rows, std::size_t width, std::uint64_t seed) {
    std::mt19937_64 rng(seed);
    std::uniform_real_distribution<float> u(-1.0F, 1.0F);
    Matrix<float> m(rows, width);
    for (auto& x : m.data()) x = u(rng);
    return m;
}

}  // namespace detail

/// Cumulative time of `tokens` add operations into a cascading cache with
/// `cascades` sub-caches. Only the add calls are timed.
inline TimingSummary bench_ring_adds(const CacheOpBenchConfig& cfg, std::size_t cascades) {
    CascadeConfig cc;
    cc.total_capacity = cfg.capacity;
    cc.num_cascades = cascades;
    cc.sink_size = cfg.sink;
    const Matrix<float> rows = detail::bench_rows(cfg.tokens, cfg.width, cfg.seed);
    return time_runs(cfg.warmup, cfg.runs, [&] {
        CascadeCache<float> cache(cc, cfg.width);
        for (std::size_t t = 0; t < cfg.tokens; ++t) {
            cache.add_token(EntryView<float>{rows.row(t), rows.row(t), 0.0, static_cast<std::int64_t>(t)}, nullptr);
        }
    });
}

inline TimingSummary bench_concat_adds(const CacheOpBenchConfig& cfg) {
    const Matrix<float> rows = detail::bench_rows(cfg.tokens, cfg.width, cfg.seed);
    return time_runs(cfg.warmup, cfg.runs, [&] {
        ConcatSinkCache<float> cache(cfg.sink, cfg.capacity, cfg.width);
        for (std::size_t t = 0; t < cfg.tokens; ++t) cache.add(rows.row(t), rows.row(t), static_cast<std::int64_t>(t));
    });
}

/// Mean nanoseconds per push_overwrite on a full store of `capacity`;
/// the best of `repeats` passes of `ops` pushes.
inline double ring_push_ns(std::size_t capacity, std::size_t width, std::size_t ops = 1u << 20, int repeats = 5) {
    RingStore<float> store(capacity, width);
    std::vector<float> k(width, 1.0F), v(width, 2.0F);
    CacheEntry<float> evicted;
    for (std::size_t i = 0; i < capacity; ++i) store.push_overwrite({k, v, 0.0, static_cast<std::int64_t>(i)}, evicted);
    double best = 1e300;
    for (int r = 0; r < repeats; ++r) {
        const auto t0 = std::chrono::steady_clock::now();
        for (std::size_t i = 0; i < ops; ++i) store.push_overwrite({k, v, 0.0, static_cast<std::int64_t>(i)}, evicted);
        const auto t1 = std::chrono::steady_clock::now();
        best = std::min(best, std::chrono::duration<double, std::nano>(t1 - t0).count() / static_cast<double>(ops));
    }
    return best;
}

struct PrefillBenchConfig {
    std::size_t seq_len = 65536;
    std::vector<std::size_t> strides{1, 256, 1024, 4096};
    CascadeConfig cache;
    AttentionParams attn = AttentionParams::make(32, 1, 1);
    std::size_t layers = 1;
    std::size_t warmup = 0;
    std::size_t runs = 1;
    std::uint64_t seed = 0;
};

struct PrefillTiming {
    std::size_t stride = 0;
    TimingSummary seconds;
};

inline std::vector<PrefillTiming> bench_prefill(const PrefillBenchConfig& cfg) {
    const auto model = DeskModel<float>::random(cfg.attn, cfg.layers, cfg.seed);
    Matrix<float> x(cfg.seq_len, cfg.attn.q_width());
    {
        std::mt19937_64 rng(cfg.seed + 1);
        std::normal_distribution<double> n(0.0, 1.0);
        for (auto& v : x.data()) v = static_cast<float>(n(rng));
    }
    std::vector<PrefillTiming> out;
    for (std::size_t stride : cfg.strides) {
        PrefillConfig pc;
        pc.stride = stride;
        pc.layers = cfg.layers;
        pc.cache_config = cfg.cache;
        pc.attn = cfg.attn;
        out.push_back({stride, time_runs(cfg.warmup, cfg.runs, [&] { prefill(pc, x, model, false); })});
    }
    return out;
}

struct RetentionGridPoint {
    PolicyKind policy = PolicyKind::cascade_full;
    std::size_t num_cascades = 1;
    std::size_t capacity = 0;
    std::size_t context = 0;
    std::uint64_t span = 0;
    std::size_t seeds = 0;
    std::size_t marks = 0;
    double retention = 0.0;
    double expected_accuracy = 0.0;
};

struct RetentionGridConfig {
    CascadeConfig base;
    std::size_t context = 0;
    std::size_t spacing = 0;  // distance between heavy marks in one stream
    double heavy_weight = 1e6;
    std::size_t seeds = 100;
    std::uint64_t first_seed = 0;
};

/// Heavy marks at sink + o + k * spacing with a seed-chosen phase o, so the
/// marks are uniformly placed over the stream. Marks further apart than the
/// slowest acceptance period never meet at a boundary, so one stream yields
/// several independent samples.
inline SyntheticStream marked_stream(const RetentionGridConfig& cfg, std::uint64_t seed) {
    detail::require<ConfigError>(cfg.spacing > 0 && cfg.context > cfg.base.sink_size,
                                 "marked_stream: spacing and context must be positive");
    std::mt19937_64 rng(seed);
    std::uniform_int_distribution<std::size_t> phase(0, cfg.spacing - 1);
    std::vector<HeavyToken> marks;
    for (std::size_t pos = cfg.base.sink_size + phase(rng); pos < cfg.context; pos += cfg.spacing) {
        marks.push_back({static_cast<std::int64_t>(pos), cfg.heavy_weight});
    }
    return {cfg.context, ScoreProfile::multi_heavy(std::move(marks)), seed};
}

/// One retention report per seed.
inline std::vector<RetentionReport> retention_reports(PolicyKind policy, const RetentionGridConfig& cfg) {
    std::vector<RetentionReport> out;
    out.reserve(cfg.seeds);
    for (std::size_t s = 0; s < cfg.seeds; ++s) {
        out.push_back(run_retention(policy, cfg.base, marked_stream(cfg, cfg.first_seed + s)));
    }
    return out;
}

inline RetentionGridPoint summarize_retention(PolicyKind policy, const RetentionGridConfig& cfg,
                                              const std::vector<RetentionReport>& reports) {
    RetentionGridPoint p;
    const CascadeConfig effective = policy_config(policy, cfg.base);
    p.policy = policy;
    p.num_cascades = effective.num_cascades;
    p.capacity = effective.total_capacity;
    p.context = cfg.context;
    p.span = token_span(effective);
    p.seeds = reports.size();
    double total = 0.0;
    for (const auto& r : reports) {
        total += r.retention();
        p.marks += r.marked.size();
    }
    p.retention = reports.empty() ? 0.0 : total / static_cast<double>(reports.size());
    p.expected_accuracy = expected_retrieval_accuracy(p.span, cfg.context);
    return p;
}

}  // namespace cascade_kv
