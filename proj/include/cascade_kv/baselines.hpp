// Copyright 2026 The cascade-kv Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <algorithm>
#include <cstddef>
#include <cstdint>
#include <deque>
#include <optional>
#include <span>
#include <vector>

#include "cascade_kv/errors.hpp"
#include "cascade_kv/eviction_trace.hpp"

namespace cascade_kv {

/// Sink tokens plus one FIFO window, written directly with a deque. Emits the
/// same event vocabulary as CascadeCache so the two can be compared.
class SinkWindowCache {
public:
    SinkWindowCache(std::size_t sink_size, std::size_t window) : sink_size_(sink_size), window_(window) {
        detail::require<ConfigError>(window > 0, "SinkWindowCache: window must be positive");
    }

    void add(std::int64_t origin, EvictionTrace* trace) {
        auto emit = [&](EventKind kind, std::int64_t o, std::uint32_t sub) {
            if (trace != nullptr) trace->push({step_, kind, o, sub});
        };
        if (sink_.size() < sink_size_) {
            sink_.push_back(origin);
            emit(EventKind::sink_add, origin, 0);
            return;
        }
        recent_.push_back(origin);
        emit(EventKind::accept, origin, 1);
        if (recent_.size() > window_) {
            const std::int64_t old = recent_.front();
            recent_.pop_front();
            emit(EventKind::cascade_evict, old, 1);
            emit(EventKind::final_discard, old, 1);
        }
        ++step_;
    }

    std::vector<std::int64_t> resident_origins() const {
        std::vector<std::int64_t> out(sink_.begin(), sink_.end());
        out.insert(out.end(), recent_.begin(), recent_.end());
        return out;
    }

    std::size_t resident_count() const noexcept { return sink_.size() + recent_.size(); }
    std::uint64_t step() const noexcept { return step_; }

private:
    std::size_t sink_size_;
    std::size_t window_;
    std::vector<std::int64_t> sink_;
    std::deque<std::int64_t> recent_;
    std::uint64_t step_ = 0;
};

/// Sink cache that grows by concatenation: every add allocates a new block,
/// copies the old contents plus the new token, and on overflow rebuilds the
/// block as sink + most recent window. This is the copy-heavy baseline that
/// the ring buffers are measured against.
template <class T>
class ConcatSinkCache {
public:
    ConcatSinkCache(std::size_t sink_size, std::size_t window, std::size_t width)
        : sink_size_(sink_size), window_(window), width_(width) {
        detail::require<ConfigError>(window > 0 && width > 0, "ConcatSinkCache: window and width must be positive");
    }

    /// Returns the origin evicted by this add, if any.
    std::optional<std::int64_t> add(std::span<const T> key, std::span<const T> value, std::int64_t origin) {
        detail::require<InvalidEntryError>(key.size() == width_ && value.size() == width_,
                                           "ConcatSinkCache: entry dimension mismatch");
        keys_ = concat(keys_, key);
        values_ = concat(values_, value);
        origins_.push_back(origin);
        if (origins_.size() <= sink_size_ + window_) {
            return std::nullopt;
        }
        const std::int64_t evicted = origins_[sink_size_];
        keys_ = drop_row(keys_, sink_size_);
        values_ = drop_row(values_, sink_size_);
        origins_.erase(origins_.begin() + static_cast<std::ptrdiff_t>(sink_size_));
        return evicted;
    }

    std::size_t size() const noexcept { return origins_.size(); }
    const std::vector<std::int64_t>& origins() const noexcept { return origins_; }

private:
    std::vector<T> concat(const std::vector<T>& block, std::span<const T> row) const {
        std::vector<T> out(block.size() + row.size());
        std::copy(block.begin(), block.end(), out.begin());
        std::copy(row.begin(), row.end(), out.begin() + static_cast<std::ptrdiff_t>(block.size()));
        return out;
    }

    std::vector<T> drop_row(const std::vector<T>& block, std::size_t row) const {
        std::vector<T> out(block.size() - width_);
        const auto cut = static_cast<std::ptrdiff_t>(row * width_);
        std::copy(block.begin(), block.begin() + cut, out.begin());
        std::copy(block.begin() + cut + static_cast<std::ptrdiff_t>(width_), block.end(), out.begin() + cut);
        return out;
    }

    std::size_t sink_size_;
    std::size_t window_;
    std::size_t width_;
    std::vector<T> keys_;
    std::vector<T> values_;
    std::vector<std::int64_t> origins_;
};

}  // namespace cascade_kv
