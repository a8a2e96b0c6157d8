// Copyright 2026 The cascade-kv Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cmath>
#include <cstddef>
#include <cstdint>
#include <random>
#include <utility>
#include <vector>

#include "cascade_kv/attention.hpp"
#include "cascade_kv/cascade_cache.hpp"
#include "cascade_kv/errors.hpp"
#include "cascade_kv/matrix.hpp"

namespace cascade_kv {

struct PrefillConfig {
    std::size_t stride = 1;
    std::size_t layers = 1;
    CascadeConfig cache_config;
    AttentionParams attn;

    /// Score EMA factor used for chunked accumulation. The decode-time gamma
    /// is reused so chunked and per-token processing agree.
    double beta() const noexcept { return cache_config.ema_gamma; }

    void validate() const {
        detail::require<ConfigError>(stride >= 1, "prefill config: stride must be at least 1");
        detail::require<ConfigError>(layers >= 1, "prefill config: need at least one layer");
        cache_config.validate();
        attn.validate();
    }
};

/// Half-open [begin, end) token ranges of length `stride` covering [0, S).
inline std::vector<std::pair<std::size_t, std::size_t>> stride_chunks(std::size_t seq_len, std::size_t stride) {
    detail::require<ConfigError>(seq_len > 0 && stride > 0, "stride_chunks: arguments must be positive");
    std::vector<std::pair<std::size_t, std::size_t>> out;
    out.reserve((seq_len + stride - 1) / stride);
    for (std::size_t b = 0; b < seq_len; b += stride) {
        out.emplace_back(b, std::min(seq_len, b + stride));
    }
    return out;
}

/// Desk-scale model: per-layer query/key/value projections only. The input
/// width equals the concatenated query-head width, so a layer's attention
/// output feeds the next layer directly.
template <class T>
struct DeskModel {
    struct Layer {
        Matrix<T> wq;  // [model_dim x q_heads*d]
        Matrix<T> wk;  // [model_dim x kv_heads*d]
        Matrix<T> wv;
    };

    std::vector<Layer> layers;

    std::size_t model_dim() const noexcept { return layers.empty() ? 0 : layers.front().wq.rows(); }

    static DeskModel random(const AttentionParams& attn, std::size_t num_layers, std::uint64_t seed) {
        attn.validate();
        const std::size_t model_dim = attn.q_width();
        std::mt19937_64 rng(seed);
        std::normal_distribution<double> normal(0.0, 1.0 / std::sqrt(static_cast<double>(model_dim)));
        auto fill = [&](std::size_t cols) {
            Matrix<T> w(model_dim, cols);
            for (auto& x : w.data()) x = static_cast<T>(normal(rng));
            return w;
        };
        DeskModel model;
        for (std::size_t l = 0; l < num_layers; ++l) {
            Layer layer;
            layer.wq = fill(attn.q_width());
            layer.wk = fill(attn.kv_width());
            layer.wv = fill(attn.kv_width());
            model.layers.push_back(std::move(layer));
        }
        return model;
    }
};

/// x W with double accumulation.
template <class T>
Matrix<T> project(const Matrix<T>& x, const Matrix<T>& w) {
    detail::require<InvalidEntryError>(x.cols() == w.rows(), "project: inner dimension mismatch");
    Matrix<T> out(x.rows(), w.cols());
    std::vector<double> acc(w.cols());
    for (std::size_t i = 0; i < x.rows(); ++i) {
        std::fill(acc.begin(), acc.end(), 0.0);
        for (std::size_t k = 0; k < x.cols(); ++k) {
            const double xv = static_cast<double>(x(i, k));
            const auto wr = w.row(k);
            for (std::size_t j = 0; j < w.cols(); ++j) acc[j] += xv * static_cast<double>(wr[j]);
        }
        for (std::size_t j = 0; j < w.cols(); ++j) out(i, j) = static_cast<T>(acc[j]);
    }
    return out;
}

template <class T>
struct PrefillResult {
    std::vector<Matrix<T>> layer_outputs;     // [layer] -> [S x q_heads*d]
    std::vector<KvCacheSet<T>> caches;        // one per layer
    std::vector<std::vector<EvictionTrace>> traces;  // [layer][unit]

    const Matrix<T>& output() const { return layer_outputs.back(); }
};

/// Strided prefill: for each chunk, for each layer, attend over the cache
/// state from before the chunk, fold the chunk's score EMA into the cache,
/// then append the chunk's tokens in order.
template <class T>
PrefillResult<T> prefill(const PrefillConfig& config, const Matrix<T>& inputs, const DeskModel<T>& model,
                         bool record_traces = true) {
    config.validate();
    detail::require<ConfigError>(inputs.rows() >= 1, "prefill: empty input");
    detail::require<ConfigError>(model.layers.size() == config.layers, "prefill: model layer count mismatch");
    detail::require<InvalidEntryError>(inputs.cols() == model.model_dim(), "prefill: input width mismatch");

    PrefillResult<T> result;
    result.layer_outputs.resize(config.layers);
    result.caches.reserve(config.layers);
    result.traces.resize(config.layers);
    for (std::size_t l = 0; l < config.layers; ++l) {
        result.caches.emplace_back(config.cache_config, config.attn);
        result.layer_outputs[l] = Matrix<T>(0, config.attn.q_width());
        result.traces[l].resize(result.caches[l].num_units());
    }
    const double beta = config.beta();

    for (const auto& [begin, end] : stride_chunks(inputs.rows(), config.stride)) {
        Matrix<T> x = inputs.slice_rows(begin, end);
        const auto chunk_start = static_cast<std::int64_t>(begin);
        for (std::size_t l = 0; l < config.layers; ++l) {
            const auto& layer = model.layers[l];
            Matrix<T> q = project(x, layer.wq);
            Matrix<T> k = project(x, layer.wk);
            Matrix<T> v = project(x, layer.wv);
            auto attended = chunk_attend(config.attn, q, result.caches[l], k, v, beta, chunk_start,
                                         config.cache_config.head_reduction);
            fold_chunk(result.caches[l], attended, k, v, beta, chunk_start,
                       record_traces ? &result.traces[l] : nullptr);
            result.layer_outputs[l].append_rows(attended.output);
            x = std::move(attended.output);
        }
    }
    return result;
}

}  // namespace cascade_kv
