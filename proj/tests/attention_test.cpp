// Copyright 2026 The cascade-kv Authors
// SPDX-License-Identifier: Apache-2.0

#include <gtest/gtest.h>

#include <cmath>
#include <random>
#include <vector>

#include "cascade_kv/attention.hpp"
#include "cascade_kv/oracles.hpp"

using namespace cascade_kv;

namespace {

template <class T>
Matrix<T> random_matrix(std::size_t rows, std::size_t cols, std::mt19937_64& rng, double sd = 1.0) {
    std::normal_distribution<double> n(0.0, sd);
    Matrix<T> m(rows, cols);
    for (auto& x : m.data()) x = static_cast<T>(n(rng));
    return m;
}

CascadeConfig roomy_config(HeadPolicy policy, HeadReduction reduction, std::size_t capacity = 512) {
    CascadeConfig c;
    c.total_capacity = capacity;
    c.num_cascades = 1;
    c.sink_size = 4;
    c.head_policy = policy;
    c.head_reduction = reduction;
    return c;
}

}  // namespace

TEST(ReferenceAttention, SingleKeyReturnsValue) {
    std::mt19937_64 rng(1);
    const auto q = random_matrix<double>(1, 8, rng), k = random_matrix<double>(1, 8, rng),
               v = random_matrix<double>(1, 8, rng);
    const auto out = reference_attention(q, k, v, true);
    for (std::size_t c = 0; c < 8; ++c) EXPECT_DOUBLE_EQ(out(0, c), v(0, c));
}

TEST(ReferenceAttention, SharpQueryPicksValue) {
    Matrix<double> k(4, 4, 0.0);
    for (std::size_t i = 0; i < 4; ++i) k(i, i) = 1.0;
    std::mt19937_64 rng(2);
    const auto v = random_matrix<double>(4, 3, rng);
    Matrix<double> q(1, 4, 0.0);
    q(0, 2) = 200.0;
    const auto out = reference_attention(q, k, v, false);
    for (std::size_t c = 0; c < 3; ++c) EXPECT_NEAR(out(0, c), v(2, c), 1e-12);
}

TEST(ReferenceAttention, MatchesBruteForce) {
    std::mt19937_64 rng(3);
    for (int trial = 0; trial < 20; ++trial) {
        const auto q = random_matrix<double>(8, 16, rng), k = random_matrix<double>(8, 16, rng),
                   v = random_matrix<double>(8, 16, rng);
        for (bool causal : {false, true}) {
            EXPECT_LE(oracle::relative_error(reference_attention(q, k, v, causal), oracle::brute_attention(q, k, v, causal)),
                      1e-12);
        }
    }
}

TEST(ReferenceAttention, RejectsNonFinite) {
    Matrix<double> q(1, 2, 1.0), k(1, 2, 1.0), v(1, 2, 1.0);
    k(0, 1) = std::nan("");
    EXPECT_THROW(reference_attention(q, k, v, true), NumericError);
}

TEST(Rotary, ZeroIndexIsIdentity) {
    std::mt19937_64 rng(4);
    const auto x = random_matrix<double>(3, 8, rng);
    const std::vector<std::size_t> pe{0, 0, 0};
    const auto y = apply_rotary_by_cache_index(x, pe);
    for (std::size_t i = 0; i < x.data().size(); ++i) EXPECT_DOUBLE_EQ(y.data()[i], x.data()[i]);
}

TEST(Rotary, PreservesNorm) {
    std::mt19937_64 rng(5);
    const auto x = random_matrix<double>(64, 32, rng);
    std::vector<std::size_t> pe(64);
    for (std::size_t i = 0; i < pe.size(); ++i) pe[i] = rng() % 100000;
    const auto y = apply_rotary_by_cache_index(x, pe);
    for (std::size_t i = 0; i < x.rows(); ++i) {
        double a = 0.0, b = 0.0;
        for (std::size_t c = 0; c < x.cols(); ++c) {
            a += x(i, c) * x(i, c);
            b += y(i, c) * y(i, c);
        }
        EXPECT_NEAR(std::sqrt(a), std::sqrt(b), 1e-9);
    }
}

TEST(Rotary, MatchesComplexRotation) {
    std::mt19937_64 rng(6);
    const auto x = random_matrix<double>(10, 16, rng);
    std::vector<std::size_t> pe(10);
    for (std::size_t i = 0; i < pe.size(); ++i) pe[i] = i * 37;
    const auto y = apply_rotary_by_cache_index(x, pe);
    for (std::size_t i = 0; i < x.rows(); ++i) {
        const auto want = oracle::rotate(x.row(i), pe[i]);
        for (std::size_t c = 0; c < x.cols(); ++c) EXPECT_NEAR(y(i, c), want[c], 1e-12);
    }
}

TEST(Rotary, DependsOnlyOnCacheIndex) {
    // Two residents from different stream positions but equal vectors and equal rank.
    CascadeConfig cfg = roomy_config(HeadPolicy::homogeneous, HeadReduction::max, 4);
    cfg.sink_size = 0;
    std::mt19937_64 rng(7);
    const auto key = random_matrix<double>(1, 8, rng);
    CascadeCache<double> a(cfg, 8), b(cfg, 8);
    a.add_token(EntryView<double>{key.row(0), key.row(0), 0.0, 3});
    b.add_token(EntryView<double>{key.row(0), key.row(0), 0.0, 900});
    const auto ia = a.positional_indices(), ib = b.positional_indices();
    ASSERT_EQ(ia[0].pe_index, ib[0].pe_index);
    const std::vector<std::size_t> pa{ia[0].pe_index}, pb{ib[0].pe_index};
    const auto ra = apply_rotary_by_cache_index(key, pa), rb = apply_rotary_by_cache_index(key, pb);
    for (std::size_t c = 0; c < 8; ++c) EXPECT_EQ(ra(0, c), rb(0, c));
}

TEST(Rotary, OddDimensionRejected) {
    Matrix<double> x(1, 5, 1.0);
    const std::vector<std::size_t> pe{1};
    EXPECT_THROW(apply_rotary_by_cache_index(x, pe), UnsupportedDimensionError);
    EXPECT_THROW(RotaryTable(7), UnsupportedDimensionError);
}

TEST(ReduceHeads, SingleHeadIsIdentity) {
    Matrix<double> s(1, 3);
    s(0, 0) = 0.1;
    s(0, 1) = 0.5;
    s(0, 2) = 0.4;
    for (auto r : {HeadReduction::mean, HeadReduction::max, HeadReduction::median}) {
        const auto out = reduce_heads(s, HeadPolicy::homogeneous, r, 1);
        for (std::size_t j = 0; j < 3; ++j) EXPECT_DOUBLE_EQ(out(0, j), s(0, j));
    }
}

TEST(ReduceHeads, TwoHeadArithmetic) {
    Matrix<double> s(2, 1);
    s(0, 0) = 0.2;
    s(1, 0) = 0.6;
    EXPECT_NEAR(reduce_heads(s, HeadPolicy::homogeneous, HeadReduction::mean, 1)(0, 0), 0.4, 1e-15);
    EXPECT_DOUBLE_EQ(reduce_heads(s, HeadPolicy::homogeneous, HeadReduction::max, 1)(0, 0), 0.6);
    EXPECT_NEAR(reduce_heads(s, HeadPolicy::homogeneous, HeadReduction::median, 1)(0, 0), 0.4, 1e-15);
}

TEST(ReduceHeads, GroupedMax) {
    std::mt19937_64 rng(8);
    const auto s = random_matrix<double>(8, 20, rng);
    const auto out = reduce_heads(s, HeadPolicy::independent, HeadReduction::max, 2);
    ASSERT_EQ(out.rows(), 2u);
    for (std::size_t g = 0; g < 2; ++g) {
        for (std::size_t j = 0; j < 20; ++j) {
            double want = -1e300;
            for (std::size_t h = 4 * g; h < 4 * g + 4; ++h) {
                want = std::max(want, s(h, j));
                EXPECT_GE(out(g, j), s(h, j));
            }
            EXPECT_EQ(out(g, j), want);
        }
    }
    const auto homo = reduce_heads(s, HeadPolicy::homogeneous, HeadReduction::median, 2);
    ASSERT_EQ(homo.rows(), 1u);
}

namespace {

struct Instance {
    AttentionParams params;
    CascadeConfig config;
    Matrix<double> resident_k, resident_v, q, k, v;
};

// Fills a cache set with R residents and returns the chunk that follows them.
Instance make_instance(std::mt19937_64& rng, HeadPolicy policy, HeadReduction reduction) {
    const std::size_t kv_heads = 1 + rng() % 2;
    const std::size_t group = 1 + rng() % 3;
    const std::size_t d = 2 * (1 + rng() % 4);
    Instance in;
    in.params = AttentionParams::make(d, kv_heads * group, kv_heads);
    in.config = roomy_config(policy, reduction);
    const std::size_t resident = rng() % 192;
    const std::size_t m = 1 + rng() % 64;
    in.resident_k = random_matrix<double>(resident, in.params.kv_width(), rng);
    in.resident_v = random_matrix<double>(resident, in.params.kv_width(), rng);
    in.q = random_matrix<double>(m, in.params.q_width(), rng);
    in.k = random_matrix<double>(m, in.params.kv_width(), rng);
    in.v = random_matrix<double>(m, in.params.kv_width(), rng);
    return in;
}

KvCacheSet<double> fill(const Instance& in) {
    KvCacheSet<double> caches(in.config, in.params);
    caches.add_chunk(in.resident_k, in.resident_v, 0, {}, nullptr);
    return caches;
}

}  // namespace

TEST(ChunkAttend, SingleRowIsScaledAttentionRow) {
    std::mt19937_64 rng(9);
    const auto params = AttentionParams::make(8, 1, 1);
    const auto config = roomy_config(HeadPolicy::homogeneous, HeadReduction::max);
    const auto rk = random_matrix<double>(5, 8, rng), rv = random_matrix<double>(5, 8, rng);
    const auto q = random_matrix<double>(1, 8, rng), k = random_matrix<double>(1, 8, rng),
               v = random_matrix<double>(1, 8, rng);
    KvCacheSet<double> caches(config, params);
    caches.add_chunk(rk, rv, 0, {}, nullptr);
    const double beta = 0.9;
    const auto res = chunk_attend(params, q, caches, k, v, beta, 5, HeadReduction::max);

    // Expected row: keys rotated to ranks 0..5, query at rank 5.
    Matrix<double> keys(6, 8), vals(6, 8);
    for (std::size_t j = 0; j < 6; ++j) {
        const auto src = j < 5 ? rk.row(j) : k.row(0);
        const auto rot = oracle::rotate(src, j);
        for (std::size_t c = 0; c < 8; ++c) {
            keys(j, c) = rot[c];
            vals(j, c) = j < 5 ? rv(j, c) : v(0, c);
        }
    }
    const auto qr = oracle::rotate(q.row(0), 5);
    std::vector<double> p(6);
    double z = 0.0;
    for (std::size_t j = 0; j < 6; ++j) {
        double dot = 0.0;
        for (std::size_t c = 0; c < 8; ++c) dot += qr[c] * keys(j, c);
        z += (p[j] = std::exp(dot * params.scale));
    }
    for (std::size_t j = 0; j < 5; ++j) EXPECT_NEAR(res.probs_colsum_ema[0][j], (1 - beta) * p[j] / z, 1e-14);
    EXPECT_NEAR(res.chunk_colsum_ema[0][0], (1 - beta) * p[5] / z, 1e-14);
    for (std::size_t c = 0; c < 8; ++c) {
        double want = 0.0;
        for (std::size_t j = 0; j < 6; ++j) want += p[j] / z * vals(j, c);
        EXPECT_NEAR(res.output(0, c), want, 1e-12);
    }
}

TEST(ChunkAttend, MatchesSequentialEma) {
    std::mt19937_64 rng(10);
    const HeadPolicy policies[] = {HeadPolicy::homogeneous, HeadPolicy::independent};
    const HeadReduction reductions[] = {HeadReduction::mean, HeadReduction::max, HeadReduction::median};
    for (int trial = 0; trial < 100; ++trial) {
        const auto policy = policies[trial % 2];
        const auto reduction = reductions[(trial / 2) % 3];
        const Instance in = make_instance(rng, policy, reduction);
        const auto caches = fill(in);
        const double beta = 0.5 + 0.49 * std::uniform_real_distribution<double>(0, 1)(rng);
        const auto got = chunk_attend(in.params, in.q, caches, in.k, in.v, beta,
                                      static_cast<std::int64_t>(in.resident_k.rows()), reduction);
        const auto want = oracle::sequential_ema(in.params, policy, reduction, in.resident_k, in.q, in.k, beta);
        ASSERT_EQ(got.probs_colsum_ema.size(), want.resident.size());
        for (std::size_t u = 0; u < want.resident.size(); ++u) {
            if (!want.resident[u].empty()) {
                EXPECT_LE(oracle::relative_error(got.probs_colsum_ema[u], want.resident[u]), 1e-9) << "trial " << trial;
            }
            EXPECT_LE(oracle::relative_error(got.chunk_colsum_ema[u], want.chunk[u]), 1e-9) << "trial " << trial;
        }
    }
}

TEST(ChunkAttend, EmptyCacheMatchesDenseAttention) {
    std::mt19937_64 rng(11);
    const auto params = AttentionParams::make(16, 1, 1);
    const auto config = roomy_config(HeadPolicy::homogeneous, HeadReduction::max);
    const auto q = random_matrix<double>(24, 16, rng), k = random_matrix<double>(24, 16, rng),
               v = random_matrix<double>(24, 16, rng);
    KvCacheSet<double> caches(config, params);
    const auto res = chunk_attend(params, q, caches, k, v, 0.9, 0, HeadReduction::max);
    std::vector<std::size_t> pe(24);
    for (std::size_t i = 0; i < 24; ++i) pe[i] = i;
    const auto want = reference_attention(apply_rotary_by_cache_index(q, pe), apply_rotary_by_cache_index(k, pe), v,
                                          true, params.scale);
    EXPECT_LE(oracle::relative_error(res.output, want), 1e-9);
}

TEST(ChunkAttend, RowsAreStochastic) {
    // With beta -> weights known, the undecayed column sums of each row add to one.
    std::mt19937_64 rng(12);
    const auto params = AttentionParams::make(8, 1, 1);
    const auto config = roomy_config(HeadPolicy::homogeneous, HeadReduction::max);
    const auto rk = random_matrix<double>(30, 8, rng), rv = random_matrix<double>(30, 8, rng);
    KvCacheSet<double> caches(config, params);
    caches.add_chunk(rk, rv, 0, {}, nullptr);
    for (std::size_t r = 0; r < 5; ++r) {
        const auto q = random_matrix<double>(1, 8, rng), k = random_matrix<double>(1, 8, rng),
                   v = random_matrix<double>(1, 8, rng);
        const auto res = chunk_attend(params, q, caches, k, v, 0.5, caches.unit(0).next_origin(), HeadReduction::max);
        double total = res.chunk_colsum_ema[0][0];
        for (double x : res.probs_colsum_ema[0]) total += x;
        EXPECT_NEAR(total / 0.5, 1.0, 1e-9);
        fold_chunk(caches, res, k, v, 0.5, caches.unit(0).next_origin(), nullptr);
    }
}

TEST(ChunkAttend, RejectsBadBeta) {
    const auto params = AttentionParams::make(4, 1, 1);
    KvCacheSet<double> caches(roomy_config(HeadPolicy::homogeneous, HeadReduction::max), params);
    Matrix<double> x(1, 4, 0.5);
    for (double beta : {0.0, 1.0, -0.1, 1.5}) {
        EXPECT_THROW(chunk_attend(params, x, caches, x, x, beta, 0, HeadReduction::max), ConfigError);
    }
}

TEST(ChunkAttend, RejectsNonContiguousChunk) {
    const auto params = AttentionParams::make(4, 1, 1);
    KvCacheSet<double> caches(roomy_config(HeadPolicy::homogeneous, HeadReduction::max), params);
    Matrix<double> x(2, 4, 0.5);
    caches.add_chunk(x, x, 0, {}, nullptr);
    Matrix<double> q(1, 4, 0.5);
    EXPECT_THROW(chunk_attend(params, q, caches, q, q, 0.9, 5, HeadReduction::max), OrderingError);
    EXPECT_NO_THROW(chunk_attend(params, q, caches, q, q, 0.9, 2, HeadReduction::max));
}

TEST(AttentionParams, Validation) {
    EXPECT_THROW(AttentionParams::make(8, 3, 2), ConfigError);
    EXPECT_THROW(AttentionParams::make(0, 1, 1), ConfigError);
    EXPECT_DOUBLE_EQ(AttentionParams::make(64, 8, 2).scale, 0.125);
}
