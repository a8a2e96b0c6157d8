// Copyright 2026 The cascade-kv Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <limits>
#include <span>
#include <string>
#include <string_view>
#include <unordered_map>
#include <utility>
#include <vector>

#include "cascade_kv/errors.hpp"
#include "cascade_kv/eviction_trace.hpp"
#include "cascade_kv/ring_store.hpp"

namespace cascade_kv {

enum class HeadPolicy { homogeneous, independent };
enum class HeadReduction { mean, max, median };

inline std::string_view to_string(HeadPolicy p) noexcept {
    return p == HeadPolicy::homogeneous ? "homogeneous" : "independent";
}

inline std::string_view to_string(HeadReduction r) noexcept {
    switch (r) {
        case HeadReduction::mean: return "mean";
        case HeadReduction::max: return "max";
        case HeadReduction::median: return "median";
    }
    return "unknown";
}

inline HeadPolicy head_policy_from_string(std::string_view s) {
    if (s == "homogeneous") return HeadPolicy::homogeneous;
    if (s == "independent") return HeadPolicy::independent;
    throw ConfigError("unknown head policy '" + std::string(s) + "'");
}

inline HeadReduction head_reduction_from_string(std::string_view s) {
    if (s == "mean") return HeadReduction::mean;
    if (s == "max") return HeadReduction::max;
    if (s == "median") return HeadReduction::median;
    throw ConfigError("unknown head reduction '" + std::string(s) + "'");
}

struct CascadeConfig {
    std::size_t total_capacity = 4096;  // non-sink budget, split evenly across sub-caches
    std::size_t num_cascades = 4;
    std::size_t sink_size = 64;
    double ema_gamma = 0.9999;
    bool selection_enabled = true;
    HeadPolicy head_policy = HeadPolicy::independent;
    HeadReduction head_reduction = HeadReduction::max;

    std::size_t sub_capacity() const noexcept { return num_cascades == 0 ? 0 : total_capacity / num_cascades; }

    void validate() const {
        detail::require<ConfigError>(total_capacity > 0, "cascade config: total_capacity must be positive");
        detail::require<ConfigError>(num_cascades > 0, "cascade config: num_cascades must be positive");
        detail::require<ConfigError>(num_cascades <= 62, "cascade config: num_cascades must be at most 62");
        detail::require<ConfigError>(total_capacity % num_cascades == 0,
                                     "cascade config: total_capacity " + std::to_string(total_capacity) +
                                         " is not divisible by num_cascades " + std::to_string(num_cascades));
        detail::require<ConfigError>(ema_gamma >= 0.0 && ema_gamma <= 1.0, "cascade config: ema_gamma must be in [0,1]");
    }
};

/// Sub-cache `cascade_index` (1-based) takes offered tokens on steps that are
/// multiples of 2^(cascade_index - 1). Cascade 1 always accepts.
inline bool accepts_on(std::size_t cascade_index, std::uint64_t step) {
    detail::require<ConfigError>(cascade_index >= 1 && cascade_index <= 63, "accepts_on: cascade index out of range");
    const std::uint64_t period = std::uint64_t{1} << (cascade_index - 1);
    return step % period == 0;
}

/// Distance in stream positions covered by a full cache with halving
/// acceptance: (|C| / N) * sum_{i=1..N} 2^(i-1).
inline std::uint64_t token_span(const CascadeConfig& config) {
    config.validate();
    const std::uint64_t per = config.sub_capacity();
    const std::uint64_t geometric = (std::uint64_t{1} << config.num_cascades) - 1;
    detail::require<ConfigError>(per == 0 || geometric <= std::numeric_limits<std::uint64_t>::max() / per,
                                 "token_span: overflow");
    return per * geometric;
}

struct Sparsity {
    double overall = 0.0;  // 1 - |C| / S
    double window = 0.0;   // 1 - |C| / span
};

inline Sparsity sparsity(const CascadeConfig& config, std::uint64_t seq_len) {
    if (seq_len < config.total_capacity) {
        throw UndefinedSparsityError("sparsity: sequence length " + std::to_string(seq_len) +
                                     " is shorter than the cache capacity " + std::to_string(config.total_capacity));
    }
    const double cap = static_cast<double>(config.total_capacity);
    return {1.0 - cap / static_cast<double>(seq_len), 1.0 - cap / static_cast<double>(token_span(config))};
}

/// Probability that a uniformly placed key falls inside the cache span.
inline double expected_retrieval_accuracy(std::uint64_t span, std::uint64_t context_len) {
    detail::require<ConfigError>(span > 0 && context_len > 0, "expected_retrieval_accuracy: arguments must be positive");
    return std::min(1.0, static_cast<double>(span) / static_cast<double>(context_len));
}

struct PositionalIndex {
    std::int64_t origin_pos = 0;
    std::size_t pe_index = 0;

    friend bool operator==(const PositionalIndex&, const PositionalIndex&) = default;
};

struct ScoreSample {
    std::int64_t origin_pos = 0;
    double score = 0.0;
};

/// Cascading sink cache: a sink buffer that keeps the first tokens forever,
/// followed by N equally sized ring-buffer sub-caches. Sub-cache i takes the
/// token evicted from sub-cache i-1 only every 2^(i-1) steps; on the other
/// steps the incoming token competes with the newest resident on EMA score.
///
/// One instance manages one stream of keys/values (one layer and one
/// decision unit of heads). `width` is the flattened key (and value) width.
template <class T>
class CascadeCache {
public:
    CascadeCache(const CascadeConfig& config, std::size_t width) : config_(config), width_(width) {
        config_.validate();
        detail::require<InvalidEntryError>(width > 0, "CascadeCache: width must be positive");
        sink_ = RingStore<T>(config_.sink_size, width);
        sub_caches_.reserve(config_.num_cascades);
        for (std::size_t i = 0; i < config_.num_cascades; ++i) {
            sub_caches_.emplace_back(config_.sub_capacity(), width);
        }
        carry_.key.reserve(width);
        carry_.value.reserve(width);
        spare_.key.reserve(width);
        spare_.value.reserve(width);
    }

    const CascadeConfig& config() const noexcept { return config_; }
    std::size_t width() const noexcept { return width_; }
    std::uint64_t step() const noexcept { return step_; }

    /// Origin position the next added token must carry for chunked attention
    /// to be contiguous with the cache (0 before anything was added).
    std::int64_t next_origin() const noexcept { return has_tokens_ ? last_origin_ + 1 : 0; }

    const RingStore<T>& sink() const noexcept { return sink_; }
    /// 1-based sub-cache access.
    const RingStore<T>& sub_cache(std::size_t cascade_index) const { return sub_caches_.at(cascade_index - 1); }
    std::size_t num_cascades() const noexcept { return sub_caches_.size(); }

    std::size_t resident_count() const noexcept {
        std::size_t n = sink_.size();
        for (const auto& c : sub_caches_) n += c.size();
        return n;
    }

    std::size_t non_sink_count() const noexcept { return resident_count() - sink_.size(); }

    std::vector<TraceEvent> add_token(const EntryView<T>& entry) {
        EvictionTrace trace;
        add_token(entry, &trace);
        return trace.events();
    }

    /// Inserts a token following the cascading sink cache algorithm. Events
    /// are appended to `trace` when it is non-null.
    void add_token(const EntryView<T>& entry, EvictionTrace* trace) {
        check_entry(entry);
        auto emit = [&](EventKind kind, std::int64_t origin, std::size_t sub) {
            if (trace != nullptr) {
                trace->push({step_, kind, origin, static_cast<std::uint32_t>(sub)});
            }
        };
        last_origin_ = entry.origin_pos;
        has_tokens_ = true;

        if (!sink_.full()) {
            sink_.push_overwrite(entry, spare_);
            emit(EventKind::sink_add, entry.origin_pos, 0);
            return;
        }

        carry_.assign(entry);
        bool carrying = true;
        for (std::size_t i = 0; i < sub_caches_.size() && carrying; ++i) {
            RingStore<T>& cache = sub_caches_[i];
            const std::size_t index = i + 1;
            if (accepts_on(index, step_)) {
                if (!cache.full()) {
                    cache.push_overwrite(carry_.view(), spare_);
                    emit(EventKind::accept, carry_.origin_pos, index);
                    carrying = false;
                } else if (swapped_eviction_fault_) {
                    cache.evict_newest(spare_);
                    cache.push_overwrite(carry_.view(), spare_);
                    emit(EventKind::accept, carry_.origin_pos, index);
                    cache_evict_tail(index, emit);
                } else {
                    cache.push_overwrite(carry_.view(), spare_);
                    emit(EventKind::accept, carry_.origin_pos, index);
                    cache_evict_tail(index, emit);
                }
            } else if (!cache.full()) {
                // Eager add to an unfilled cache instead of discarding.
                cache.push_overwrite(carry_.view(), spare_);
                emit(EventKind::accept, carry_.origin_pos, index);
                carrying = false;
            } else {
                select_at_boundary(cache, index, emit);
                carrying = false;
            }
        }
        if (carrying) {
            emit(EventKind::final_discard, carry_.origin_pos, sub_caches_.size());
        }
        ++step_;
    }

    /// EMA update mu <- gamma * mu + (1 - gamma) * s for every resident token
    /// (sink included). `scores` must name each resident exactly once.
    void update_scores(std::span<const ScoreSample> scores) {
        std::unordered_map<std::int64_t, double> by_origin;
        by_origin.reserve(scores.size());
        for (const auto& s : scores) {
            if (!std::isfinite(s.score) || s.score < 0.0) {
                throw ScoreAlignmentError("update_scores: score for origin " + std::to_string(s.origin_pos) +
                                          " is negative or non-finite");
            }
            if (!by_origin.emplace(s.origin_pos, s.score).second) {
                throw ScoreAlignmentError("update_scores: duplicate origin " + std::to_string(s.origin_pos));
            }
        }
        if (by_origin.size() != resident_count()) {
            throw ScoreAlignmentError("update_scores: got " + std::to_string(by_origin.size()) + " scores for " +
                                      std::to_string(resident_count()) + " resident tokens");
        }
        // Validate before mutating so a failed call leaves the cache untouched.
        for_each_resident([&](const EntryView<T>& e) {
            if (!by_origin.contains(e.origin_pos)) {
                throw ScoreAlignmentError("update_scores: no score for resident origin " +
                                          std::to_string(e.origin_pos));
            }
        });
        const double gamma = config_.ema_gamma;
        for_each_resident_score([&](std::int64_t origin, double& mu) {
            mu = gamma * mu + (1.0 - gamma) * by_origin.at(origin);
        });
    }

    /// mu <- decay * mu + contribution[k] for residents in positional order.
    void decay_and_accumulate(std::span<const double> contributions, double decay) {
        if (contributions.size() != resident_count()) {
            throw ScoreAlignmentError("decay_and_accumulate: got " + std::to_string(contributions.size()) +
                                      " contributions for " + std::to_string(resident_count()) + " residents");
        }
        std::size_t k = 0;
        for_each_resident_score([&](std::int64_t, double& mu) { mu = decay * mu + contributions[k++]; });
    }

    /// Residents sorted by origin position receive consecutive positional
    /// encoding indices 0, 1, 2, ...
    std::vector<PositionalIndex> positional_indices() const {
        std::vector<PositionalIndex> out;
        out.reserve(resident_count());
        for_each_resident([&](const EntryView<T>& e) { out.push_back({e.origin_pos, out.size()}); });
        return out;
    }

    /// Visits residents oldest first: sink, then sub-cache N down to 1, each
    /// oldest to newest. This is ascending origin order.
    template <class F>
    void for_each_resident(F&& fn) const {
        for (std::size_t i = 0; i < sink_.size(); ++i) fn(sink_.at(i));
        for (std::size_t c = sub_caches_.size(); c-- > 0;) {
            const auto& cache = sub_caches_[c];
            for (std::size_t i = 0; i < cache.size(); ++i) fn(cache.at(i));
        }
    }

    template <class F>
    void for_each_resident_score(F&& fn) {
        for (std::size_t i = 0; i < sink_.size(); ++i) fn(sink_.origin_at(i), sink_.score_at(i));
        for (std::size_t c = sub_caches_.size(); c-- > 0;) {
            auto& cache = sub_caches_[c];
            for (std::size_t i = 0; i < cache.size(); ++i) fn(cache.origin_at(i), cache.score_at(i));
        }
    }

    std::vector<std::int64_t> resident_origins() const {
        std::vector<std::int64_t> out;
        out.reserve(resident_count());
        for_each_resident([&](const EntryView<T>& e) { out.push_back(e.origin_pos); });
        return out;
    }

    /// Mutation hook for the verification harness: on accepting, full
    /// sub-caches evict the newest resident instead of the oldest.
    void inject_swapped_eviction_fault(bool enabled = true) noexcept { swapped_eviction_fault_ = enabled; }

private:
    void check_entry(const EntryView<T>& entry) const {
        if (entry.key.size() != width_ || entry.value.size() != width_) {
            throw InvalidEntryError("CascadeCache: entry dimension " + std::to_string(entry.key.size()) +
                                    " does not match cache width " + std::to_string(width_));
        }
        if (!std::isfinite(entry.score) || entry.score < 0.0) {
            throw InvalidEntryError("CascadeCache: entry score must be finite and non-negative");
        }
        if (has_tokens_ && entry.origin_pos <= last_origin_) {
            throw OrderingError("CascadeCache: origin " + std::to_string(entry.origin_pos) +
                                " is not newer than the last added origin " + std::to_string(last_origin_));
        }
    }

    // The entry just overwritten in sub-cache `index` (now in spare_) moves on.
    template <class Emit>
    void cache_evict_tail(std::size_t index, Emit& emit) {
        std::swap(carry_, spare_);
        emit(EventKind::cascade_evict, carry_.origin_pos, index);
    }

    // Not accepting and full: keep whichever of the incoming token and the
    // newest resident has the higher score. Ties keep the resident.
    template <class Emit>
    void select_at_boundary(RingStore<T>& cache, std::size_t index, Emit& emit) {
        if (!config_.selection_enabled) {
            emit(EventKind::final_discard, carry_.origin_pos, index);
            return;
        }
        const EntryView<T> newest = *cache.peek_newest();
        if (carry_.score > newest.score) {
            cache.evict_newest(spare_);
            cache.push_overwrite(carry_.view(), spare_);
            emit(EventKind::selection_keep_incoming, carry_.origin_pos, index);
            // evict_newest left the loser in spare_; the push above did not
            // overflow so spare_ still holds it.
            emit(EventKind::final_discard, spare_.origin_pos, index);
        } else {
            emit(EventKind::selection_keep_resident, newest.origin_pos, index);
            emit(EventKind::final_discard, carry_.origin_pos, index);
        }
    }

    CascadeConfig config_;
    std::size_t width_;
    RingStore<T> sink_;
    std::vector<RingStore<T>> sub_caches_;
    std::uint64_t step_ = 0;
    std::int64_t last_origin_ = 0;
    bool has_tokens_ = false;
    bool swapped_eviction_fault_ = false;
    CacheEntry<T> carry_;
    CacheEntry<T> spare_;
};

}  // namespace cascade_kv
