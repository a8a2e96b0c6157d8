// Copyright 2026 The cascade-kv Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <limits>
#include <map>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "cascade_kv/cascade_cache.hpp"
#include "cascade_kv/errors.hpp"
#include "cascade_kv/eviction_trace.hpp"
#include "cascade_kv/matrix.hpp"

namespace cascade_kv {

struct AttentionParams {
    std::size_t dim = 64;  // per-head dimension d
    std::size_t num_q_heads = 1;
    std::size_t num_kv_heads = 1;
    double scale = 0.125;  // usually 1/sqrt(d)

    static AttentionParams make(std::size_t dim, std::size_t q_heads, std::size_t kv_heads) {
        AttentionParams p{dim, q_heads, kv_heads, 1.0 / std::sqrt(static_cast<double>(dim))};
        p.validate();
        return p;
    }

    std::size_t group_size() const noexcept { return num_q_heads / num_kv_heads; }
    std::size_t q_width() const noexcept { return num_q_heads * dim; }
    std::size_t kv_width() const noexcept { return num_kv_heads * dim; }

    void validate() const {
        detail::require<ConfigError>(dim > 0, "attention params: dim must be positive");
        detail::require<ConfigError>(num_q_heads > 0 && num_kv_heads > 0, "attention params: head counts must be positive");
        detail::require<ConfigError>(num_q_heads % num_kv_heads == 0,
                                     "attention params: num_q_heads must be a multiple of num_kv_heads");
        detail::require<ConfigError>(scale > 0.0 && std::isfinite(scale), "attention params: scale must be positive");
    }
};

/// softmax(Q K^T * scale) V computed in extended precision. With `causal`,
/// query i sees keys j <= i + (K.rows() - Q.rows()). Default scale 1/sqrt(d).
template <class T>
Matrix<double> reference_attention(const Matrix<T>& q, const Matrix<T>& k, const Matrix<T>& v, bool causal,
                                   double scale = 0.0) {
    detail::require<ConfigError>(q.rows() >= 1, "reference_attention: need at least one query");
    detail::require<ConfigError>(q.cols() == k.cols() && k.rows() == v.rows() && k.rows() >= 1,
                                 "reference_attention: shape mismatch");
    for (const auto* m : {&q, &k, &v}) {
        for (T x : m->data()) {
            if (!std::isfinite(static_cast<double>(x))) {
                throw NumericError("reference_attention: non-finite input");
            }
        }
    }
    const std::size_t d = q.cols();
    const long double s = scale > 0.0 ? scale : 1.0L / std::sqrt(static_cast<long double>(d));
    const std::size_t offset = k.rows() - std::min(k.rows(), q.rows());
    Matrix<double> out(q.rows(), v.cols());
    std::vector<long double> logits(k.rows());
    for (std::size_t i = 0; i < q.rows(); ++i) {
        const std::size_t visible = causal ? std::min(k.rows(), i + offset + 1) : k.rows();
        long double mx = -std::numeric_limits<long double>::infinity();
        for (std::size_t j = 0; j < visible; ++j) {
            long double acc = 0.0L;
            for (std::size_t c = 0; c < d; ++c) {
                acc += static_cast<long double>(q(i, c)) * static_cast<long double>(k(j, c));
            }
            logits[j] = acc * s;
            mx = std::max(mx, logits[j]);
        }
        long double denom = 0.0L;
        for (std::size_t j = 0; j < visible; ++j) {
            logits[j] = std::exp(logits[j] - mx);
            denom += logits[j];
        }
        for (std::size_t c = 0; c < v.cols(); ++c) {
            long double acc = 0.0L;
            for (std::size_t j = 0; j < visible; ++j) {
                acc += logits[j] * static_cast<long double>(v(j, c));
            }
            out(i, c) = static_cast<double>(acc / denom);
        }
    }
    return out;
}

/// Cos/sin table for rotary encoding with half-dimension pairing
/// (component i rotates with component i + d/2 at frequency base^(-2i/d)).
class RotaryTable {
public:
    explicit RotaryTable(std::size_t dim, double base = 10000.0) : dim_(dim), half_(dim / 2), base_(base) {
        if (dim == 0 || dim % 2 != 0) {
            throw UnsupportedDimensionError("rotary encoding needs an even, positive dimension (got " +
                                            std::to_string(dim) + ")");
        }
        inv_freq_.resize(half_);
        for (std::size_t i = 0; i < half_; ++i) {
            inv_freq_[i] = std::pow(base_, -2.0 * static_cast<double>(i) / static_cast<double>(dim_));
        }
    }

    std::size_t dim() const noexcept { return dim_; }

    void reserve(std::size_t positions) {
        const std::size_t have = cos_.size() / half_;
        if (positions <= have) return;
        cos_.resize(positions * half_);
        sin_.resize(positions * half_);
        for (std::size_t p = have; p < positions; ++p) {
            for (std::size_t i = 0; i < half_; ++i) {
                const double angle = static_cast<double>(p) * inv_freq_[i];
                cos_[p * half_ + i] = std::cos(angle);
                sin_[p * half_ + i] = std::sin(angle);
            }
        }
    }

    /// Rotates one head vector in place to position `pe`.
    template <class T>
    void rotate(std::span<T> x, std::size_t pe) {
        reserve(pe + 1);
        const double* c = cos_.data() + pe * half_;
        const double* s = sin_.data() + pe * half_;
        for (std::size_t i = 0; i < half_; ++i) {
            const double a = static_cast<double>(x[i]);
            const double b = static_cast<double>(x[i + half_]);
            x[i] = static_cast<T>(a * c[i] - b * s[i]);
            x[i + half_] = static_cast<T>(a * s[i] + b * c[i]);
        }
    }

    /// Per-thread shared table for (dim, base).
    static RotaryTable& shared(std::size_t dim, double base = 10000.0) {
        thread_local std::map<std::pair<std::size_t, double>, RotaryTable> tables;
        auto it = tables.find({dim, base});
        if (it == tables.end()) {
            it = tables.emplace(std::make_pair(dim, base), RotaryTable(dim, base)).first;
        }
        return it->second;
    }

private:
    std::size_t dim_;
    std::size_t half_;
    double base_;
    std::vector<double> inv_freq_;
    std::vector<double> cos_;
    std::vector<double> sin_;
};

/// Rotary encoding applied by cache index: row i is rotated to position
/// pe_indices[i], independent of where the token sat in the original stream.
template <class T>
Matrix<T> apply_rotary_by_cache_index(const Matrix<T>& vectors, std::span<const std::size_t> pe_indices) {
    detail::require<ConfigError>(pe_indices.size() == vectors.rows(),
                                 "apply_rotary_by_cache_index: one positional index per row required");
    if (vectors.cols() == 0 || vectors.cols() % 2 != 0) {
        throw UnsupportedDimensionError("apply_rotary_by_cache_index: dimension must be even");
    }
    RotaryTable& table = RotaryTable::shared(vectors.cols());
    Matrix<T> out = vectors;
    for (std::size_t i = 0; i < out.rows(); ++i) {
        table.rotate(out.row(i), pe_indices[i]);
    }
    return out;
}

inline double reduce_values(std::span<const double> values, HeadReduction reduction) {
    switch (reduction) {
        case HeadReduction::mean: {
            double s = 0.0;
            for (double v : values) s += v;
            return s / static_cast<double>(values.size());
        }
        case HeadReduction::max: return *std::max_element(values.begin(), values.end());
        case HeadReduction::median: {
            std::vector<double> sorted(values.begin(), values.end());
            std::sort(sorted.begin(), sorted.end());
            const std::size_t n = sorted.size();
            return n % 2 == 1 ? sorted[n / 2] : 0.5 * (sorted[n / 2 - 1] + sorted[n / 2]);
        }
    }
    return 0.0;
}

/// Number of independent eviction-decision units for a head policy.
inline std::size_t decision_units(HeadPolicy policy, std::size_t num_kv_heads) {
    return policy == HeadPolicy::independent ? num_kv_heads : 1;
}

/// Collapses per-query-head key scores ([q_heads x keys]) to per-unit scores
/// ([units x keys]). Homogeneous: one unit over all heads. Independent: one
/// unit per key-value head over its query-head group.
inline Matrix<double> reduce_heads(const Matrix<double>& scores, HeadPolicy policy, HeadReduction reduction,
                                   std::size_t num_kv_heads) {
    const std::size_t q_heads = scores.rows();
    detail::require<ConfigError>(num_kv_heads > 0 && q_heads % num_kv_heads == 0,
                                 "reduce_heads: query heads must be a multiple of kv heads");
    const std::size_t units = decision_units(policy, num_kv_heads);
    const std::size_t per_unit = q_heads / units;
    Matrix<double> out(units, scores.cols());
    std::vector<double> column(per_unit);
    for (std::size_t u = 0; u < units; ++u) {
        for (std::size_t j = 0; j < scores.cols(); ++j) {
            for (std::size_t h = 0; h < per_unit; ++h) {
                column[h] = scores(u * per_unit + h, j);
            }
            out(u, j) = reduce_values(column, reduction);
        }
    }
    return out;
}

/// The per-layer set of cascading caches. Under the homogeneous head policy
/// there is one cache holding all key-value heads; under the independent
/// policy each key-value head owns a cache and makes its own decisions.
template <class T>
class KvCacheSet {
public:
    KvCacheSet(const CascadeConfig& config, const AttentionParams& params) : params_(params) {
        params_.validate();
        const std::size_t units = decision_units(config.head_policy, params.num_kv_heads);
        kv_heads_per_unit_ = params.num_kv_heads / units;
        units_.reserve(units);
        for (std::size_t u = 0; u < units; ++u) {
            units_.emplace_back(config, kv_heads_per_unit_ * params.dim);
        }
    }

    const AttentionParams& params() const noexcept { return params_; }
    std::size_t num_units() const noexcept { return units_.size(); }
    std::size_t kv_heads_per_unit() const noexcept { return kv_heads_per_unit_; }
    std::size_t q_heads_per_unit() const noexcept { return kv_heads_per_unit_ * params_.group_size(); }

    CascadeCache<T>& unit(std::size_t u) { return units_.at(u); }
    const CascadeCache<T>& unit(std::size_t u) const { return units_.at(u); }

    /// Inserts the chunk's keys/values, one token per row, with initial
    /// scores `initial_scores[u][row]` (empty span = zero).
    void add_chunk(const Matrix<T>& k_chunk, const Matrix<T>& v_chunk, std::int64_t chunk_start,
                   const std::vector<std::vector<double>>& initial_scores, std::vector<EvictionTrace>* traces) {
        detail::require<InvalidEntryError>(k_chunk.cols() == params_.kv_width() && v_chunk.cols() == params_.kv_width() &&
                                               k_chunk.rows() == v_chunk.rows(),
                                           "KvCacheSet::add_chunk: chunk shape mismatch");
        const std::size_t w = kv_heads_per_unit_ * params_.dim;
        for (std::size_t u = 0; u < units_.size(); ++u) {
            EvictionTrace* trace = traces != nullptr ? &traces->at(u) : nullptr;
            for (std::size_t r = 0; r < k_chunk.rows(); ++r) {
                const double score = initial_scores.empty() ? 0.0 : initial_scores.at(u).at(r);
                EntryView<T> e{k_chunk.row(r).subspan(u * w, w), v_chunk.row(r).subspan(u * w, w), score,
                               chunk_start + static_cast<std::int64_t>(r)};
                units_[u].add_token(e, trace);
            }
        }
    }

private:
    AttentionParams params_;
    std::size_t kv_heads_per_unit_ = 1;
    std::vector<CascadeCache<T>> units_;
};

template <class T>
struct ChunkAttentionResult {
    Matrix<T> output;  // [m x q_heads*d]
    /// EMA-weighted column mass per unit for resident keys in positional
    /// order: sum_i beta^(m-1-i) (1-beta) P[i, j] after head reduction.
    std::vector<std::vector<double>> probs_colsum_ema;
    /// Same quantity for the chunk's own keys (row r of the chunk).
    std::vector<std::vector<double>> chunk_colsum_ema;
};

/// Attention of one stride of queries over the cache residents plus the
/// chunk's own keys (causal among chunk rows). Cached keys are rotated to
/// their rank in the cache; chunk row r sits at rank R + r where R is the
/// unit's resident count. Exact softmax per row, accumulated in double.
template <class T>
ChunkAttentionResult<T> chunk_attend(const AttentionParams& params, const Matrix<T>& q_chunk,
                                     const KvCacheSet<T>& caches, const Matrix<T>& k_chunk, const Matrix<T>& v_chunk,
                                     double beta, std::int64_t chunk_start, HeadReduction reduction) {
    params.validate();
    if (!(beta > 0.0 && beta < 1.0)) {
        throw ConfigError("chunk_attend: beta must lie in (0,1)");
    }
    const std::size_t m = q_chunk.rows();
    const std::size_t d = params.dim;
    detail::require<ConfigError>(m >= 1, "chunk_attend: empty chunk");
    detail::require<InvalidEntryError>(q_chunk.cols() == params.q_width() && k_chunk.cols() == params.kv_width() &&
                                           v_chunk.cols() == params.kv_width() && k_chunk.rows() == m &&
                                           v_chunk.rows() == m,
                                       "chunk_attend: chunk shape mismatch");
    RotaryTable& rope = RotaryTable::shared(d);

    ChunkAttentionResult<T> result;
    result.output = Matrix<T>(m, params.q_width());
    result.probs_colsum_ema.resize(caches.num_units());
    result.chunk_colsum_ema.resize(caches.num_units());

    const std::size_t kv_per_unit = caches.kv_heads_per_unit();
    const std::size_t q_per_unit = caches.q_heads_per_unit();
    const std::size_t group = params.group_size();

    // EMA weight of chunk row r: beta^(m-1-r) (1-beta).
    std::vector<double> row_weight(m);
    {
        double w = 1.0 - beta;
        for (std::size_t r = m; r-- > 0;) {
            row_weight[r] = w;
            w *= beta;
        }
    }

    std::vector<T> keys;
    std::vector<T> values;
    std::vector<double> probs;
    std::vector<double> head_vals(q_per_unit);
    std::vector<double> acc(d);
    std::vector<T> qrot(d);

    for (std::size_t u = 0; u < caches.num_units(); ++u) {
        const CascadeCache<T>& cache = caches.unit(u);
        if (cache.next_origin() != chunk_start) {
            throw OrderingError("chunk_attend: chunk starts at " + std::to_string(chunk_start) +
                                " but the cache expects " + std::to_string(cache.next_origin()));
        }
        const std::size_t resident = cache.resident_count();
        const std::size_t total = resident + m;
        rope.reserve(total);

        // Gather rotated keys and values, laid out [kv_head][key][d].
        keys.assign(kv_per_unit * total * d, T{});
        values.assign(kv_per_unit * total * d, T{});
        std::size_t j = 0;
        cache.for_each_resident([&](const EntryView<T>& e) {
            for (std::size_t h = 0; h < kv_per_unit; ++h) {
                T* kd = keys.data() + (h * total + j) * d;
                std::copy_n(e.key.data() + h * d, d, kd);
                rope.rotate(std::span<T>(kd, d), j);
                std::copy_n(e.value.data() + h * d, d, values.data() + (h * total + j) * d);
            }
            ++j;
        });
        for (std::size_t r = 0; r < m; ++r) {
            for (std::size_t h = 0; h < kv_per_unit; ++h) {
                const std::size_t col = (u * kv_per_unit + h) * d;
                T* kd = keys.data() + (h * total + resident + r) * d;
                std::copy_n(k_chunk.row(r).data() + col, d, kd);
                rope.rotate(std::span<T>(kd, d), resident + r);
                std::copy_n(v_chunk.row(r).data() + col, d, values.data() + (h * total + resident + r) * d);
            }
        }

        std::vector<double>& res_scores = result.probs_colsum_ema[u];
        std::vector<double>& chunk_scores = result.chunk_colsum_ema[u];
        res_scores.assign(resident, 0.0);
        chunk_scores.assign(m, 0.0);
        probs.assign(q_per_unit * total, 0.0);

        for (std::size_t r = 0; r < m; ++r) {
            const std::size_t visible = resident + r + 1;
            for (std::size_t qh = 0; qh < q_per_unit; ++qh) {
                const std::size_t global_head = u * q_per_unit + qh;
                const std::size_t kv = qh / group;  // kv head within the unit
                std::copy_n(q_chunk.row(r).data() + global_head * d, d, qrot.data());
                rope.rotate(std::span<T>(qrot), resident + r);

                double* p = probs.data() + qh * total;
                const T* kbase = keys.data() + kv * total * d;
                double mx = -std::numeric_limits<double>::infinity();
                for (std::size_t jj = 0; jj < visible; ++jj) {
                    const T* kr = kbase + jj * d;
                    double dot = 0.0;
                    for (std::size_t c = 0; c < d; ++c) {
                        dot += static_cast<double>(qrot[c]) * static_cast<double>(kr[c]);
                    }
                    p[jj] = dot * params.scale;
                    mx = std::max(mx, p[jj]);
                }
                double denom = 0.0;
                for (std::size_t jj = 0; jj < visible; ++jj) {
                    p[jj] = std::exp(p[jj] - mx);
                    denom += p[jj];
                }
                const double inv = 1.0 / denom;
                std::fill(acc.begin(), acc.end(), 0.0);
                const T* vbase = values.data() + kv * total * d;
                for (std::size_t jj = 0; jj < visible; ++jj) {
                    p[jj] *= inv;
                    const T* vr = vbase + jj * d;
                    const double pj = p[jj];
                    for (std::size_t c = 0; c < d; ++c) {
                        acc[c] += pj * static_cast<double>(vr[c]);
                    }
                }
                T* out = result.output.row(r).data() + global_head * d;
                for (std::size_t c = 0; c < d; ++c) {
                    out[c] = static_cast<T>(acc[c]);
                }
            }

            // Reduce heads for this row, then weight by the row's EMA factor.
            const double w = row_weight[r];
            for (std::size_t jj = 0; jj < visible; ++jj) {
                double reduced;
                if (q_per_unit == 1) {
                    reduced = probs[jj];
                } else {
                    for (std::size_t qh = 0; qh < q_per_unit; ++qh) head_vals[qh] = probs[qh * total + jj];
                    reduced = reduce_values(head_vals, reduction);
                }
                if (jj < resident) {
                    res_scores[jj] += w * reduced;
                } else {
                    chunk_scores[jj - resident] += w * reduced;
                }
            }
        }
    }
    return result;
}

/// Folds a chunk result into the caches and appends the chunk's tokens:
/// residents get mu <- beta^m mu + contribution, new tokens start at their
/// in-chunk contribution.
template <class T>
void fold_chunk(KvCacheSet<T>& caches, const ChunkAttentionResult<T>& result, const Matrix<T>& k_chunk,
                const Matrix<T>& v_chunk, double beta, std::int64_t chunk_start, std::vector<EvictionTrace>* traces) {
    const double decay = std::pow(beta, static_cast<double>(k_chunk.rows()));
    for (std::size_t u = 0; u < caches.num_units(); ++u) {
        caches.unit(u).decay_and_accumulate(result.probs_colsum_ema.at(u), decay);
    }
    caches.add_chunk(k_chunk, v_chunk, chunk_start, result.chunk_colsum_ema, traces);
}

}  // namespace cascade_kv
