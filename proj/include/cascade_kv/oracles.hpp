// Copyright 2026 The cascade-kv Authors
// SPDX-License-Identifier: Apache-2.0

// Independent reference implementations used by the test suites and the
// `verify` subcommand. Nothing here shares code paths with the production
// cache or attention kernels beyond the plain data types.

#pragma once

#include <algorithm>
#include <cmath>
#include <complex>
#include <cstddef>
#include <cstdint>
#include <optional>
#include <span>
#include <vector>

#include "cascade_kv/attention.hpp"
#include "cascade_kv/cascade_cache.hpp"
#include "cascade_kv/eviction_trace.hpp"
#include "cascade_kv/matrix.hpp"
#include "cascade_kv/prefill.hpp"

namespace cascade_kv::oracle {

/// Array model of a bounded FIFO that physically shifts on every removal.
class ShiftStore {
public:
    explicit ShiftStore(std::size_t capacity) : capacity_(capacity) {}

    std::optional<std::int64_t> push(std::int64_t id) {
        std::optional<std::int64_t> evicted;
        if (items_.size() == capacity_) {
            evicted = items_.front();
            items_.erase(items_.begin());
        }
        items_.push_back(id);
        return evicted;
    }

    std::int64_t pop_newest() {
        const std::int64_t id = items_.back();
        items_.pop_back();
        return id;
    }

    std::int64_t pop_oldest() {
        const std::int64_t id = items_.front();
        items_.erase(items_.begin());
        return id;
    }

    const std::vector<std::int64_t>& items() const noexcept { return items_; }
    std::size_t size() const noexcept { return items_.size(); }
    bool full() const noexcept { return items_.size() == capacity_; }

private:
    std::size_t capacity_;
    std::vector<std::int64_t> items_;
};

/// Straight-line simulator of the cascading sink cache over (origin, score)
/// pairs, using shifting arrays and explicit period arithmetic.
class CascadeSimulator {
public:
    struct Token {
        std::int64_t origin;
        double score;
    };

    CascadeSimulator(std::size_t sink, std::size_t capacity, std::size_t cascades, bool selection)
        : sink_cap_(sink), sub_cap_(capacity / cascades), selection_(selection), subs_(cascades) {}

    void add(Token token, EvictionTrace& trace) {
        auto log = [&](EventKind k, std::int64_t o, std::uint32_t s) { trace.push({step_, k, o, s}); };
        if (sink_.size() < sink_cap_) {
            sink_.push_back(token);
            log(EventKind::sink_add, token.origin, 0);
            return;
        }
        std::optional<Token> moving = token;
        std::uint64_t period = 1;
        for (std::size_t i = 0; i < subs_.size() && moving; ++i, period *= 2) {
            auto& sub = subs_[i];
            const auto idx = static_cast<std::uint32_t>(i + 1);
            const bool accepting = step_ % period == 0;
            const bool full = sub.size() == sub_cap_;
            if (!full) {
                sub.push_back(*moving);
                log(EventKind::accept, moving->origin, idx);
                moving.reset();
            } else if (accepting) {
                sub.push_back(*moving);
                log(EventKind::accept, moving->origin, idx);
                moving = sub.front();
                sub.erase(sub.begin());
                log(EventKind::cascade_evict, moving->origin, idx);
            } else if (selection_ && moving->score > sub.back().score) {
                const Token loser = sub.back();
                sub.back() = *moving;
                log(EventKind::selection_keep_incoming, moving->origin, idx);
                log(EventKind::final_discard, loser.origin, idx);
                moving.reset();
            } else {
                if (selection_) log(EventKind::selection_keep_resident, sub.back().origin, idx);
                log(EventKind::final_discard, moving->origin, idx);
                moving.reset();
            }
        }
        if (moving) log(EventKind::final_discard, moving->origin, static_cast<std::uint32_t>(subs_.size()));
        ++step_;
    }

    std::vector<std::int64_t> resident_origins() const {
        std::vector<std::int64_t> out;
        for (const auto& t : sink_) out.push_back(t.origin);
        for (std::size_t i = subs_.size(); i-- > 0;) {
            for (const auto& t : subs_[i]) out.push_back(t.origin);
        }
        return out;
    }

private:
    std::size_t sink_cap_;
    std::size_t sub_cap_;
    bool selection_;
    std::vector<Token> sink_;
    std::vector<std::vector<Token>> subs_;
    std::uint64_t step_ = 0;
};

/// Double-precision attention written without max subtraction.
inline Matrix<double> brute_attention(const Matrix<double>& q, const Matrix<double>& k, const Matrix<double>& v,
                                      bool causal) {
    const double scale = 1.0 / std::sqrt(static_cast<double>(q.cols()));
    Matrix<double> out(q.rows(), v.cols());
    for (std::size_t i = 0; i < q.rows(); ++i) {
        std::vector<double> w;
        double z = 0.0;
        const std::size_t n = causal ? i + 1 : k.rows();
        for (std::size_t j = 0; j < n; ++j) {
            double dot = 0.0;
            for (std::size_t c = 0; c < q.cols(); ++c) dot += q(i, c) * k(j, c);
            w.push_back(std::exp(dot * scale));
            z += w.back();
        }
        for (std::size_t j = 0; j < n; ++j) {
            for (std::size_t c = 0; c < v.cols(); ++c) out(i, c) += w[j] / z * v(j, c);
        }
    }
    return out;
}

/// Rotary encoding via complex multiplication of (x_i, x_{i+d/2}) pairs.
inline std::vector<double> rotate(std::span<const double> x, std::size_t pos, double base = 10000.0) {
    const std::size_t half = x.size() / 2;
    std::vector<double> out(x.size());
    for (std::size_t i = 0; i < half; ++i) {
        const double theta = static_cast<double>(pos) / std::pow(base, 2.0 * static_cast<double>(i) / x.size());
        const std::complex<double> z = std::complex<double>(x[i], x[i + half]) * std::polar(1.0, theta);
        out[i] = z.real();
        out[i + half] = z.imag();
    }
    return out;
}

inline double reduce(std::vector<double> v, HeadReduction r) {
    if (r == HeadReduction::mean) {
        double s = 0.0;
        for (double x : v) s += x;
        return s / v.size();
    }
    std::sort(v.begin(), v.end());
    if (r == HeadReduction::max) return v.back();
    return v.size() % 2 ? v[v.size() / 2] : (v[v.size() / 2 - 1] + v[v.size() / 2]) / 2.0;
}

/// Token-by-token EMA of attention mass. Residents (keys/values in cache
/// order, each row holding all kv heads) start at mu = 0; chunk token r joins
/// the key set at step r with mu = 0. Each step does mu <- beta mu + (1-beta)
/// s over every key present. Returns final mu per unit, residents first.
struct SequentialEmaResult {
    std::vector<std::vector<double>> resident;  // [unit][R]
    std::vector<std::vector<double>> chunk;     // [unit][m]
};

inline SequentialEmaResult sequential_ema(const AttentionParams& p, HeadPolicy policy, HeadReduction reduction,
                                          const Matrix<double>& resident_k, const Matrix<double>& q_chunk,
                                          const Matrix<double>& k_chunk, double beta) {
    const std::size_t d = p.dim;
    const std::size_t resident = resident_k.rows();
    const std::size_t m = q_chunk.rows();
    const std::size_t units = policy == HeadPolicy::independent ? p.num_kv_heads : 1;
    const std::size_t q_per_unit = p.num_q_heads / units;
    const std::size_t g = p.num_q_heads / p.num_kv_heads;

    auto key_of = [&](std::size_t idx, std::size_t kv) {
        const auto row = idx < resident ? resident_k.row(idx) : k_chunk.row(idx - resident);
        return rotate(row.subspan(kv * d, d), idx);
    };

    std::vector<std::vector<double>> mu(units);
    for (std::size_t r = 0; r < m; ++r) {
        const std::size_t n = resident + r + 1;
        for (auto& u : mu) u.resize(n, 0.0);
        // probs[h][j]
        std::vector<std::vector<double>> probs(p.num_q_heads, std::vector<double>(n));
        for (std::size_t h = 0; h < p.num_q_heads; ++h) {
            const auto q = rotate(q_chunk.row(r).subspan(h * d, d), resident + r);
            std::vector<long double> logit(n);
            long double mx = -1e300L;
            for (std::size_t j = 0; j < n; ++j) {
                const auto k = key_of(j, h / g);
                long double dot = 0.0L;
                for (std::size_t c = 0; c < d; ++c) dot += static_cast<long double>(q[c]) * k[c];
                logit[j] = dot * p.scale;
                mx = std::max(mx, logit[j]);
            }
            long double z = 0.0L;
            for (auto& l : logit) z += (l = std::exp(l - mx));
            for (std::size_t j = 0; j < n; ++j) probs[h][j] = static_cast<double>(logit[j] / z);
        }
        for (std::size_t u = 0; u < units; ++u) {
            for (std::size_t j = 0; j < n; ++j) {
                std::vector<double> vals;
                for (std::size_t h = u * q_per_unit; h < (u + 1) * q_per_unit; ++h) vals.push_back(probs[h][j]);
                mu[u][j] = beta * mu[u][j] + (1.0 - beta) * reduce(vals, reduction);
            }
        }
    }
    SequentialEmaResult out;
    for (auto& u : mu) {
        out.resident.emplace_back(u.begin(), u.begin() + static_cast<std::ptrdiff_t>(resident));
        out.chunk.emplace_back(u.begin() + static_cast<std::ptrdiff_t>(resident), u.end());
    }
    return out;
}

/// Full causal attention over the whole stream, layer by layer, with rotary
/// encoding at absolute positions and GQA head sharing. Valid as the expected
/// output of a cache that has not evicted anything.
template <class T>
std::vector<Matrix<double>> dense_prefill(const AttentionParams& p, const DeskModel<T>& model, const Matrix<T>& inputs) {
    const std::size_t d = p.dim;
    const std::size_t s = inputs.rows();
    const std::size_t g = p.num_q_heads / p.num_kv_heads;
    std::vector<Matrix<double>> outputs;
    Matrix<double> x = inputs.template cast<double>();
    for (const auto& layer : model.layers) {
        auto proj = [&](const Matrix<T>& w) {
            Matrix<double> out(s, w.cols());
            for (std::size_t i = 0; i < s; ++i)
                for (std::size_t k = 0; k < x.cols(); ++k)
                    for (std::size_t j = 0; j < w.cols(); ++j) out(i, j) += x(i, k) * static_cast<double>(w(k, j));
            return out;
        };
        const Matrix<double> q = proj(layer.wq), k = proj(layer.wk), v = proj(layer.wv);
        Matrix<double> y(s, p.q_width());
        for (std::size_t h = 0; h < p.num_q_heads; ++h) {
            const std::size_t kv = h / g;
            Matrix<double> qh(s, d), kh(s, d), vh(s, d);
            for (std::size_t i = 0; i < s; ++i) {
                const auto qr = rotate(q.row(i).subspan(h * d, d), i);
                const auto kr = rotate(k.row(i).subspan(kv * d, d), i);
                for (std::size_t c = 0; c < d; ++c) {
                    qh(i, c) = qr[c];
                    kh(i, c) = kr[c];
                    vh(i, c) = v(i, kv * d + c);
                }
            }
            const Matrix<double> o = reference_attention(qh, kh, vh, true, p.scale);
            for (std::size_t i = 0; i < s; ++i)
                for (std::size_t c = 0; c < d; ++c) y(i, h * d + c) = o(i, c);
        }
        outputs.push_back(y);
        x = y;
    }
    return outputs;
}

/// max |a - b| / max |b|.
template <class A, class B>
double relative_error(const Matrix<A>& a, const Matrix<B>& b) {
    double num = 0.0, den = 0.0;
    for (std::size_t i = 0; i < a.data().size(); ++i) {
        num = std::max(num, std::abs(static_cast<double>(a.data()[i]) - static_cast<double>(b.data()[i])));
        den = std::max(den, std::abs(static_cast<double>(b.data()[i])));
    }
    return den == 0.0 ? num : num / den;
}

inline double relative_error(std::span<const double> a, std::span<const double> b) {
    double num = 0.0, den = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) {
        num = std::max(num, std::abs(a[i] - b[i]));
        den = std::max(den, std::abs(b[i]));
    }
    return den == 0.0 ? num : num / den;
}

}  // namespace cascade_kv::oracle
