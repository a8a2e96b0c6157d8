// Copyright 2026 The cascade-kv Authors
// SPDX-License-Identifier: Apache-2.0

// Oracle-equivalence checks shared by the `verify` subcommand and the
// acceptance binary. Every check returns its tolerance and the measured
// value so callers can print a one-line report.

#pragma once

#include <algorithm>
#include <cstddef>
#include <cstdint>
#include <random>
#include <sstream>
#include <string>
#include <vector>

#include "cascade_kv/attention.hpp"
#include "cascade_kv/baselines.hpp"
#include "cascade_kv/cascade_cache.hpp"
#include "cascade_kv/oracles.hpp"
#include "cascade_kv/prefill.hpp"
#include "cascade_kv/workloads.hpp"

namespace cascade_kv::verify {

struct CheckResult {
    std::string name;
    std::string tolerance;
    double measured = 0.0;
    bool passed = false;
    std::string detail;
};

inline std::string format_double(double v) {
    std::ostringstream os;
    os.precision(6);
    os << v;
    return os.str();
}

namespace detail {

template <class T>
Matrix<T> random_matrix(std::size_t rows, std::size_t cols, std::mt19937_64& rng) {
    std::normal_distribution<double> n(0.0, 1.0);
    Matrix<T> m(rows, cols);
    for (auto& x : m.data()) x = static_cast<T>(n(rng));
    return m;
}

inline const float kZero = 0.0F;

inline EntryView<float> scalar_token(std::int64_t origin, double score) {
    return {{&kZero, 1}, {&kZero, 1}, score, origin};
}

}  // namespace detail

/// A one-cascade cache against the deque sink/window cache on random
/// streams of length up to 10 |C|. Measured value: mismatching streams.
inline CheckResult sink_equivalence(std::size_t streams, std::uint64_t seed, bool inject_fault = false) {
    std::mt19937_64 rng(seed);
    std::size_t mismatches = 0;
    for (std::size_t s = 0; s < streams; ++s) {
        CascadeConfig cfg;
        cfg.total_capacity = 1 + rng() % 64;
        cfg.num_cascades = 1;
        cfg.sink_size = rng() % 9;
        cfg.selection_enabled = rng() % 2 == 0;
        const std::size_t len = 1 + rng() % (10 * cfg.total_capacity);
        CascadeCache<float> cache(cfg, 1);
        cache.inject_swapped_eviction_fault(inject_fault);
        SinkWindowCache ref(cfg.sink_size, cfg.total_capacity);
        EvictionTrace got, want;
        std::uniform_real_distribution<double> score(0.0, 1.0);
        for (std::size_t t = 0; t < len; ++t) {
            cache.add_token(detail::scalar_token(static_cast<std::int64_t>(t), score(rng)), &got);
            ref.add(static_cast<std::int64_t>(t), &want);
        }
        if (!(got == want) || cache.resident_origins() != ref.resident_origins()) ++mismatches;
    }
    return {"one-cascade cache equals sink/window cache", "exact (0 mismatching streams)",
            static_cast<double>(mismatches), mismatches == 0,
            std::to_string(streams - mismatches) + "/" + std::to_string(streams) + " streams identical"};
}

/// Independent shifting-array simulator against CascadeCache for random
/// configurations, with and without selection.
inline CheckResult simulator_equivalence(std::size_t streams, std::uint64_t seed) {
    std::mt19937_64 rng(seed);
    std::size_t mismatches = 0;
    for (std::size_t s = 0; s < streams; ++s) {
        const std::size_t cascades = 1 + rng() % 6;
        CascadeConfig cfg;
        cfg.num_cascades = cascades;
        cfg.total_capacity = cascades * (1 + rng() % 8);
        cfg.sink_size = rng() % 5;
        cfg.selection_enabled = rng() % 2 == 0;
        const std::size_t len = 1 + rng() % 400;
        CascadeCache<float> cache(cfg, 1);
        oracle::CascadeSimulator sim(cfg.sink_size, cfg.total_capacity, cascades, cfg.selection_enabled);
        EvictionTrace got, want;
        std::uniform_int_distribution<int> score(0, 4);
        for (std::size_t t = 0; t < len; ++t) {
            const double sc = score(rng);
            cache.add_token(detail::scalar_token(static_cast<std::int64_t>(t), sc), &got);
            sim.add({static_cast<std::int64_t>(t), sc}, want);
        }
        if (!(got == want) || cache.resident_origins() != sim.resident_origins()) ++mismatches;
    }
    return {"cascade cache equals shifting-array simulator", "exact (0 mismatching streams)",
            static_cast<double>(mismatches), mismatches == 0,
            std::to_string(streams - mismatches) + "/" + std::to_string(streams) + " streams identical"};
}

/// Random push/evict sequences on RingStore against the shifting model.
inline CheckResult ring_replay(std::size_t sequences, std::uint64_t seed) {
    std::mt19937_64 rng(seed);
    std::size_t mismatches = 0;
    const float k = 0.0F;
    for (std::size_t s = 0; s < sequences; ++s) {
        const std::size_t cap = 1 + rng() % 12;
        RingStore<float> ring(cap, 1);
        oracle::ShiftStore model(cap);
        std::int64_t next = 0;
        bool ok = true;
        const std::size_t ops = 1 + rng() % 80;
        for (std::size_t op = 0; op < ops && ok; ++op) {
            const auto choice = rng() % 10;
            if (choice < 6 || model.size() == 0) {
                auto got = ring.push_overwrite(EntryView<float>{{&k, 1}, {&k, 1}, 0.0, next});
                auto want = model.push(next++);
                ok = got.has_value() == want.has_value() && (!want || got->origin_pos == *want);
            } else if (choice < 8) {
                ok = ring.evict_newest().origin_pos == model.pop_newest();
            } else {
                ok = ring.evict_oldest().origin_pos == model.pop_oldest();
            }
            std::vector<std::int64_t> order;
            for (const auto& e : ring.iter_oldest_to_newest()) order.push_back(e.origin_pos);
            ok = ok && order == model.items() && ring.xi() < ring.capacity();
        }
        if (!ok) ++mismatches;
    }
    return {"ring store equals shifting array", "exact (0 mismatching sequences)", static_cast<double>(mismatches),
            mismatches == 0, std::to_string(sequences) + " random sequences"};
}

/// Closed-form span and the oldest resident distance after `steps`
/// post-sink insertions with selection disabled.
inline CheckResult span_replay(std::size_t capacity, std::size_t cascades, std::size_t sink, std::size_t steps,
                               std::uint64_t expected, std::uint64_t slack) {
    CascadeConfig cfg;
    cfg.total_capacity = capacity;
    cfg.num_cascades = cascades;
    cfg.sink_size = sink;
    cfg.selection_enabled = false;
    const std::uint64_t span = token_span(cfg);
    CascadeCache<float> cache(cfg, 1);
    const std::size_t total = sink + steps;
    for (std::size_t t = 0; t < total; ++t) cache.add_token(detail::scalar_token(static_cast<std::int64_t>(t), 0.0), nullptr);
    const auto origins = cache.resident_origins();
    const auto distance = static_cast<std::uint64_t>(origins.back() - origins.at(sink) + 1);
    const bool ok = span == expected && distance <= expected && distance + slack >= expected;
    return {"token span " + std::to_string(capacity) + "/" + std::to_string(cascades),
            "span == " + std::to_string(expected) + ", distance in [" + std::to_string(expected - slack) + ", " +
                std::to_string(expected) + "]",
            static_cast<double>(distance), ok,
            "span " + std::to_string(span) + ", oldest-resident distance " + std::to_string(distance) + " after " +
                std::to_string(steps) + " steps"};
}

/// Residents with origins {0,1,3,5,7,8} receive positional indices 0..5.
inline CheckResult reindexing() {
    CascadeConfig cfg;
    cfg.total_capacity = 4;
    cfg.num_cascades = 1;
    cfg.sink_size = 2;
    CascadeCache<float> cache(cfg, 1);
    for (std::int64_t p : {0, 1, 3, 5, 7, 8}) cache.add_token(detail::scalar_token(p, 0.0), nullptr);
    const auto idx = cache.positional_indices();
    const std::vector<std::int64_t> origins{0, 1, 3, 5, 7, 8};
    bool ok = idx.size() == origins.size();
    std::string got;
    for (std::size_t i = 0; ok && i < idx.size(); ++i) {
        ok = idx[i].origin_pos == origins[i] && idx[i].pe_index == i;
        got += (i ? "," : "") + std::to_string(idx[i].origin_pos) + "->" + std::to_string(idx[i].pe_index);
    }
    return {"positional re-indexing", "exact", ok ? 0.0 : 1.0, ok, got};
}

/// Reference attention against the brute-force double implementation.
inline CheckResult reference_vs_brute(std::size_t instances, std::uint64_t seed) {
    std::mt19937_64 rng(seed);
    double worst = 0.0;
    for (std::size_t i = 0; i < instances; ++i) {
        const auto q = detail::random_matrix<double>(8, 16, rng);
        const auto k = detail::random_matrix<double>(8, 16, rng);
        const auto v = detail::random_matrix<double>(8, 16, rng);
        for (bool causal : {false, true}) {
            worst = std::max(worst, oracle::relative_error(reference_attention(q, k, v, causal),
                                                           oracle::brute_attention(q, k, v, causal)));
        }
    }
    return {"reference attention equals brute force", "1e-12 relative", worst, worst <= 1e-12,
            std::to_string(instances) + " random 8x16 instances"};
}

/// Rotary table against complex-number rotation, plus norm preservation.
inline CheckResult rotary_oracle(std::uint64_t seed) {
    std::mt19937_64 rng(seed);
    const auto x = detail::random_matrix<double>(256, 32, rng);
    std::vector<std::size_t> pe(x.rows());
    for (auto& p : pe) p = rng() % 200000;
    const auto y = apply_rotary_by_cache_index(x, pe);
    double worst = 0.0;
    for (std::size_t i = 0; i < x.rows(); ++i) {
        const auto want = oracle::rotate(x.row(i), pe[i]);
        double nx = 0.0, ny = 0.0;
        for (std::size_t c = 0; c < x.cols(); ++c) {
            worst = std::max(worst, std::abs(y(i, c) - want[c]));
            nx += x(i, c) * x(i, c);
            ny += y(i, c) * y(i, c);
        }
        worst = std::max(worst, std::abs(std::sqrt(nx) - std::sqrt(ny)));
    }
    return {"rotary encoding equals complex rotation", "1e-9 absolute", worst, worst <= 1e-9,
            "256 vectors, d=32, positions < 200000"};
}

/// Chunked score accumulation against the per-row sequential EMA oracle on
/// random instances (m <= 64, keys <= 256), double precision.
inline CheckResult chunk_vs_sequential_ema(std::size_t instances, std::uint64_t seed, double tolerance = 1e-9) {
    std::mt19937_64 rng(seed);
    const HeadPolicy policies[] = {HeadPolicy::homogeneous, HeadPolicy::independent};
    const HeadReduction reductions[] = {HeadReduction::mean, HeadReduction::max, HeadReduction::median};
    double worst = 0.0;
    std::size_t max_keys = 0;
    for (std::size_t t = 0; t < instances; ++t) {
        const auto policy = policies[t % 2];
        const auto reduction = reductions[(t / 2) % 3];
        const std::size_t kv_heads = 1 + rng() % 2;
        const std::size_t group = 1 + rng() % 3;
        const std::size_t d = 2 * (1 + rng() % 8);
        const auto params = AttentionParams::make(d, kv_heads * group, kv_heads);
        CascadeConfig cfg;
        cfg.total_capacity = 256;
        cfg.num_cascades = 1;
        cfg.sink_size = 0;
        cfg.head_policy = policy;
        cfg.head_reduction = reduction;
        const std::size_t m = 1 + rng() % 64;
        const std::size_t resident = rng() % (257 - m);
        max_keys = std::max(max_keys, resident + m);
        const auto rk = detail::random_matrix<double>(resident, params.kv_width(), rng);
        const auto rv = detail::random_matrix<double>(resident, params.kv_width(), rng);
        const auto q = detail::random_matrix<double>(m, params.q_width(), rng);
        const auto k = detail::random_matrix<double>(m, params.kv_width(), rng);
        const auto v = detail::random_matrix<double>(m, params.kv_width(), rng);
        KvCacheSet<double> caches(cfg, params);
        caches.add_chunk(rk, rv, 0, {}, nullptr);
        const double beta = std::uniform_real_distribution<double>(0.5, 0.9999)(rng);
        const auto got = chunk_attend(params, q, caches, k, v, beta, static_cast<std::int64_t>(resident), reduction);
        const auto want = oracle::sequential_ema(params, policy, reduction, rk, q, k, beta);
        for (std::size_t u = 0; u < want.chunk.size(); ++u) {
            std::vector<double> a = got.probs_colsum_ema[u], b = want.resident[u];
            a.insert(a.end(), got.chunk_colsum_ema[u].begin(), got.chunk_colsum_ema[u].end());
            b.insert(b.end(), want.chunk[u].begin(), want.chunk[u].end());
            worst = std::max(worst, oracle::relative_error(a, b));
        }
    }
    return {"chunked score EMA equals sequential EMA", format_double(tolerance) + " relative (double)", worst,
            worst <= tolerance,
            std::to_string(instances) + " instances, up to " + std::to_string(max_keys) + " keys"};
}

struct DenseCase {
    std::size_t capacity = 64;
    std::size_t cascades = 1;
    std::size_t sink = 4;
    std::size_t seq_len = 68;
    std::uint64_t seed = 0;
};

namespace detail {

template <class T>
CheckResult dense_case(const DenseCase& dc, double tolerance, const char* precision) {
    PrefillConfig base;
    base.layers = 2;
    base.cache_config.total_capacity = dc.capacity;
    base.cache_config.num_cascades = dc.cascades;
    base.cache_config.sink_size = dc.sink;
    base.cache_config.ema_gamma = 0.99;
    base.attn = AttentionParams::make(8, 4, 2);
    const auto model = DeskModel<T>::random(base.attn, base.layers, dc.seed);
    std::mt19937_64 rng(dc.seed + 17);
    const auto x = random_matrix<T>(dc.seq_len, base.attn.q_width(), rng);
    const auto want = oracle::dense_prefill(base.attn, model, x);

    const std::size_t s = dc.seq_len;
    std::vector<std::size_t> strides{1, 7, std::max<std::size_t>(1, s / 2), s};
    double worst = 0.0;
    bool same_residents = true;
    std::vector<std::vector<std::int64_t>> reference;
    for (std::size_t stride : strides) {
        PrefillConfig cfg = base;
        cfg.stride = stride;
        const auto got = prefill(cfg, x, model, false);
        for (std::size_t l = 0; l < cfg.layers; ++l) {
            worst = std::max(worst, oracle::relative_error(got.layer_outputs[l], want[l]));
        }
        std::vector<std::vector<std::int64_t>> sets;
        for (const auto& layer : got.caches) {
            for (std::size_t u = 0; u < layer.num_units(); ++u) sets.push_back(layer.unit(u).resident_origins());
        }
        if (reference.empty()) {
            reference = sets;
        } else if (sets != reference) {
            same_residents = false;
        }
    }
    std::size_t residents = 0;
    for (const auto& r : reference) residents = std::max(residents, r.size());
    return {"dense equivalence N=" + std::to_string(dc.cascades) + " S=" + std::to_string(s),
            format_double(tolerance) + " relative (" + precision + "), identical resident sets", worst,
            worst <= tolerance && same_residents,
            std::string("strides 1,7,S/2,S; resident sets ") + (same_residents ? "identical" : "differ") + "; " +
                std::to_string(residents) + " of " + std::to_string(s) + " tokens resident"};
}

}  // namespace detail

/// Strided prefill against full causal attention, and resident sets across
/// strides {1, 7, S/2, S}. Single precision at 1e-6 by default, double at
/// 1e-9 in strict mode.
inline CheckResult dense_equivalence(const DenseCase& dc, bool strict) {
    return strict ? detail::dense_case<double>(dc, 1e-9, "double") : detail::dense_case<float>(dc, 1e-6, "single");
}

/// Largest stream length a cache absorbs before any token is discarded.
inline std::size_t eviction_free_length(const CascadeConfig& c) {
    if (c.num_cascades == 1) return c.sink_size + c.total_capacity;
    return c.sink_size + 2 * c.sub_capacity() + 1;
}

/// After a prefill that never evicts, each resident's score equals the
/// sequential per-token EMA of its attention mass, for several strides.
inline CheckResult score_fold(std::uint64_t seed) {
    PrefillConfig cfg;
    cfg.layers = 1;
    cfg.cache_config.total_capacity = 64;
    cfg.cache_config.num_cascades = 1;
    cfg.cache_config.sink_size = 4;
    cfg.cache_config.ema_gamma = 0.95;
    cfg.attn = AttentionParams::make(8, 4, 2);
    const std::size_t s = 60;
    const auto model = DeskModel<double>::random(cfg.attn, 1, seed);
    std::mt19937_64 rng(seed + 5);
    const auto x = detail::random_matrix<double>(s, cfg.attn.q_width(), rng);
    const auto q = project(x, model.layers[0].wq);
    const auto k = project(x, model.layers[0].wk);
    const Matrix<double> none(0, cfg.attn.kv_width());
    const auto want = oracle::sequential_ema(cfg.attn, cfg.cache_config.head_policy, cfg.cache_config.head_reduction,
                                             none, q, k, cfg.beta());
    double worst = 0.0;
    for (std::size_t stride : {1u, 5u, 16u, 60u}) {
        cfg.stride = stride;
        const auto got = prefill(cfg, x, model, false);
        for (std::size_t u = 0; u < got.caches[0].num_units(); ++u) {
            std::vector<double> mu;
            got.caches[0].unit(u).for_each_resident([&](const EntryView<double>& e) { mu.push_back(e.score); });
            worst = std::max(worst, oracle::relative_error(mu, want.chunk[u]));
        }
    }
    return {"prefill score fold equals sequential EMA", "1e-9 relative (double)", worst, worst <= 1e-9,
            "strides 1,5,16,60 over 60 tokens"};
}

/// One heavy token on an otherwise zero-scored stream. |C| = 8, N = 2,
/// sink 2, sub-caches of c = 4. The heavy token leaves the first sub-cache
/// at step k + c. Without selection it is dropped there when that step is
/// odd and otherwise lives another 2c accepting steps in sub-cache 2. With
/// selection it always enters sub-cache 2 and is discarded at k + 3c when it
/// arrives on an accepting step, or k + 3c - 1 when it replaces the newest.
/// A plain FIFO of |C| would discard it at step k + 2c.
inline CheckResult selection_ablation(std::size_t instances = 64) {
    constexpr std::size_t cap = 8, cascades = 2, sink = 2, c = cap / cascades;
    std::size_t wrong = 0;
    std::size_t beyond_fifo = 0;
    for (std::size_t i = 0; i < instances; ++i) {
        const std::size_t k = 4 * cap + i;  // post-sink step of the heavy token; caches are full by then
        const std::size_t len = sink + k + 4 * c + 4;
        for (bool selection : {false, true}) {
            CascadeConfig cfg;
            cfg.total_capacity = cap;
            cfg.num_cascades = cascades;
            cfg.sink_size = sink;
            cfg.selection_enabled = selection;
            CascadeCache<float> cache(cfg, 1);
            std::int64_t discard_step = -1;
            const auto heavy = static_cast<std::int64_t>(sink + k);
            bool resident_past_fifo = false;
            for (std::size_t t = 0; t < len; ++t) {
                const auto origin = static_cast<std::int64_t>(t);
                for (const auto& e : cache.add_token(detail::scalar_token(origin, origin == heavy ? 1.0 : 0.0))) {
                    if (e.kind == EventKind::final_discard && e.origin_pos == heavy) {
                        discard_step = static_cast<std::int64_t>(e.step);
                    }
                }
                if (t == sink + k + 2 * c) {
                    const auto o = cache.resident_origins();
                    resident_past_fifo = std::find(o.begin(), o.end(), heavy) != o.end();
                }
            }
            std::int64_t expected;
            const bool accepting = (k + c) % 2 == 0;
            if (!selection) {
                expected = static_cast<std::int64_t>(accepting ? k + 3 * c : k + c);
            } else {
                expected = static_cast<std::int64_t>(accepting ? k + 3 * c : k + 3 * c - 1);
            }
            if (discard_step != expected) ++wrong;
            if (selection) {
                if (resident_past_fifo) ++beyond_fifo;
                else ++wrong;
            }
        }
    }
    return {"selection ablation on constructed instances", "exact (0 deviations from the fixed pattern)",
            static_cast<double>(wrong), wrong == 0,
            std::to_string(beyond_fifo) + "/" + std::to_string(instances) +
                " heavy tokens outlive the FIFO horizon with selection"};
}

struct MaskCase {
    std::size_t capacity = 2048;
    std::size_t cascades = 4;
    std::size_t sink = 64;
    std::size_t seq_len = 8192;
    std::vector<std::size_t> strides{1, 256};
    double min_reach_ratio = 3.0;
    std::uint64_t seed = 0;
};

/// Row budget and reach of reconstructed masks for the cascade (with
/// selection) against the one-cascade sink cache. Reach of row i is i minus
/// the oldest attended non-sink column.
inline CheckResult mask_structure(const MaskCase& mc) {
    CascadeConfig cfg;
    cfg.total_capacity = mc.capacity;
    cfg.num_cascades = mc.cascades;
    cfg.sink_size = mc.sink;
    const std::uint64_t span = token_span(cfg);
    const SyntheticStream stream{mc.seq_len, ScoreProfile::uniform_random(), mc.seed};
    EvictionTrace cascade_trace, sink_trace;
    run_retention(PolicyKind::cascade_full, cfg, stream, &cascade_trace);
    run_retention(PolicyKind::streaming_llm_sink, cfg, stream, &sink_trace);

    bool budget_ok = true;
    bool causal_ok = true;
    double min_ratio = 1e300;
    std::size_t max_row = 0;
    for (std::size_t stride : mc.strides) {
        const auto cm = reconstruct_mask(cascade_trace, mc.seq_len, stride);
        const auto sm = reconstruct_mask(sink_trace, mc.seq_len, stride);
        auto reach = [&](const Matrix<std::uint8_t>& m, std::size_t i) {
            for (std::size_t j = mc.sink; j <= i; ++j) {
                if (m(i, j) != 0) return static_cast<double>(i - j);
            }
            return 0.0;
        };
        for (std::size_t i = 0; i < mc.seq_len; ++i) {
            std::size_t ones = 0;
            for (std::size_t j = 0; j < mc.seq_len; ++j) {
                ones += cm(i, j);
                if (j > i && cm(i, j) != 0) causal_ok = false;
            }
            max_row = std::max(max_row, ones);
            if (ones > mc.sink + mc.capacity + stride) budget_ok = false;
            if (i > span) min_ratio = std::min(min_ratio, reach(cm, i) / std::max(1.0, reach(sm, i)));
        }
    }
    const bool ok = budget_ok && causal_ok && min_ratio >= mc.min_reach_ratio;
    return {"mask structure " + std::to_string(mc.capacity) + "/" + std::to_string(mc.cascades) + " over " +
                std::to_string(mc.seq_len),
            "row nonzeros <= sink + |C| + stride; reach ratio >= " + format_double(mc.min_reach_ratio), min_ratio, ok,
            "max row nonzeros " + std::to_string(max_row) + (budget_ok ? " (within budget)" : " (over budget)") +
                ", min reach ratio " + format_double(min_ratio) + " for rows > " + std::to_string(span)};
}

struct VerifyOptions {
    bool strict = false;
    bool inject_fault = false;
    std::uint64_t seed = 0;
};

/// Every oracle check at its default size.
inline std::vector<CheckResult> run_all(const VerifyOptions& opt) {
    std::vector<CheckResult> out;
    out.push_back(ring_replay(1000, opt.seed));
    out.push_back(sink_equivalence(1000, opt.seed + 1, opt.inject_fault));
    out.push_back(simulator_equivalence(400, opt.seed + 2));
    out.push_back(span_replay(4096, 4, 64, 100000, 15360, 8));
    out.push_back(reindexing());
    out.push_back(reference_vs_brute(50, opt.seed + 3));
    out.push_back(rotary_oracle(opt.seed + 4));
    out.push_back(chunk_vs_sequential_ema(100, opt.seed + 5));
    {
        DenseCase one{64, 1, 4, 68, opt.seed + 6};
        out.push_back(dense_equivalence(one, opt.strict));
        CascadeConfig four;
        four.total_capacity = 64;
        four.num_cascades = 4;
        four.sink_size = 4;
        DenseCase early{64, 4, 4, eviction_free_length(four), opt.seed + 7};
        out.push_back(dense_equivalence(early, opt.strict));
    }
    out.push_back(score_fold(opt.seed + 8));
    out.push_back(selection_ablation());
    MaskCase mc;
    mc.seed = opt.seed + 9;
    out.push_back(mask_structure(mc));
    return out;
}

}  // namespace cascade_kv::verify
