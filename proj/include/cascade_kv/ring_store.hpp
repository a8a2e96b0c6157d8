// Copyright 2026 The cascade-kv Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <optional>
#include <ranges>
#include <span>
#include <string>
#include <vector>

#include "cascade_kv/errors.hpp"

namespace cascade_kv {

/// Non-owning view of one cached token. Key and value point into the owning
/// store's contiguous block (or into a CacheEntry).
template <class T>
struct EntryView {
    std::span<const T> key;
    std::span<const T> value;
    double score = 0.0;
    std::int64_t origin_pos = 0;
};

/// One cached token with owned storage. Used for tokens in flight between
/// sub-caches and for values returned by eviction.
template <class T>
struct CacheEntry {
    std::vector<T> key;
    std::vector<T> value;
    double score = 0.0;
    std::int64_t origin_pos = 0;

    EntryView<T> view() const noexcept { return {key, value, score, origin_pos}; }

    void assign(const EntryView<T>& v) {
        key.assign(v.key.begin(), v.key.end());
        value.assign(v.value.begin(), v.value.end());
        score = v.score;
        origin_pos = v.origin_pos;
    }

    static CacheEntry from(const EntryView<T>& v) {
        CacheEntry e;
        e.assign(v);
        return e;
    }
};

/// Fixed-capacity circular buffer of cache entries.
///
/// Keys and values of all slots live in one pre-allocated block each, indexed
/// by physical slot; nothing is reallocated after construction. Logical order
/// runs oldest -> newest starting at the oldest slot and wrapping modulo the
/// capacity. Inserting into a full store overwrites the oldest slot in place.
template <class T>
class RingStore {
public:
    RingStore() = default;

    RingStore(std::size_t capacity, std::size_t width)
        : capacity_(capacity),
          width_(width),
          keys_(capacity * width),
          values_(capacity * width),
          scores_(capacity, 0.0),
          origins_(capacity, 0) {
        detail::require<InvalidEntryError>(width > 0, "RingStore: entry width must be positive");
    }

    std::size_t capacity() const noexcept { return capacity_; }
    std::size_t width() const noexcept { return width_; }
    std::size_t size() const noexcept { return count_; }
    bool empty() const noexcept { return count_ == 0; }
    bool full() const noexcept { return count_ == capacity_; }

    /// Physical slot the next insertion writes to. Holds the oldest entry
    /// whenever the store is full.
    std::size_t xi() const noexcept { return capacity_ == 0 ? 0 : (head_ + count_) % capacity_; }

    /// Physical slot of the oldest entry.
    std::size_t head() const noexcept { return head_; }

    /// Inserts `entry` as the newest element. When the store is full the
    /// previously-oldest entry is overwritten and returned.
    std::optional<CacheEntry<T>> push_overwrite(const EntryView<T>& entry) {
        std::optional<CacheEntry<T>> evicted;
        if (full()) {
            evicted.emplace();
        }
        CacheEntry<T> scratch;
        push_overwrite(entry, evicted ? *evicted : scratch);
        return evicted;
    }

    /// Allocation-free form: on overflow the evicted entry is copied into
    /// `evicted` (whose buffers are reused) and true is returned.
    bool push_overwrite(const EntryView<T>& entry, CacheEntry<T>& evicted) {
        check_entry(entry);
        detail::require<InvalidEntryError>(capacity_ > 0, "RingStore: push into zero-capacity store");
        if (count_ < capacity_) {
            write_slot((head_ + count_) % capacity_, entry);
            ++count_;
            return false;
        }
        const std::size_t slot = head_;
        copy_out(slot, evicted);
        write_slot(slot, entry);
        head_ = (head_ + 1) % capacity_;
        return true;
    }

    /// Removes and returns the most recently inserted entry.
    CacheEntry<T> evict_newest() {
        CacheEntry<T> out;
        evict_newest(out);
        return out;
    }

    void evict_newest(CacheEntry<T>& out) {
        detail::require<EmptyStoreError>(count_ > 0, "RingStore: evict_newest on empty store");
        copy_out(physical(count_ - 1), out);
        --count_;
    }

    /// Removes and returns the oldest entry.
    CacheEntry<T> evict_oldest() {
        detail::require<EmptyStoreError>(count_ > 0, "RingStore: evict_oldest on empty store");
        CacheEntry<T> out;
        copy_out(head_, out);
        head_ = (head_ + 1) % capacity_;
        --count_;
        return out;
    }

    std::optional<EntryView<T>> peek_newest() const noexcept {
        if (count_ == 0) {
            return std::nullopt;
        }
        return at(count_ - 1);
    }

    std::optional<EntryView<T>> peek_oldest() const noexcept {
        if (count_ == 0) {
            return std::nullopt;
        }
        return at(0);
    }

    /// Entry at logical index `i` (0 = oldest).
    EntryView<T> at(std::size_t i) const noexcept {
        const std::size_t slot = physical(i);
        return {std::span<const T>(keys_.data() + slot * width_, width_),
                std::span<const T>(values_.data() + slot * width_, width_), scores_[slot], origins_[slot]};
    }

    double& score_at(std::size_t i) noexcept { return scores_[physical(i)]; }
    double score_at(std::size_t i) const noexcept { return scores_[physical(i)]; }
    std::int64_t origin_at(std::size_t i) const noexcept { return origins_[physical(i)]; }

    auto iter_oldest_to_newest() const {
        return std::views::iota(std::size_t{0}, count_) |
               std::views::transform([this](std::size_t i) { return at(i); });
    }

    void clear() noexcept {
        head_ = 0;
        count_ = 0;
    }

private:
    std::size_t physical(std::size_t logical) const noexcept { return (head_ + logical) % capacity_; }

    void check_entry(const EntryView<T>& entry) const {
        if (entry.key.size() != width_ || entry.value.size() != width_) {
            throw InvalidEntryError("RingStore: entry dimension " + std::to_string(entry.key.size()) + "/" +
                                    std::to_string(entry.value.size()) + " does not match store width " +
                                    std::to_string(width_));
        }
        if (!std::isfinite(entry.score) || entry.score < 0.0) {
            throw InvalidEntryError("RingStore: entry score must be finite and non-negative");
        }
    }

    void write_slot(std::size_t slot, const EntryView<T>& entry) noexcept {
        std::copy(entry.key.begin(), entry.key.end(), keys_.begin() + static_cast<std::ptrdiff_t>(slot * width_));
        std::copy(entry.value.begin(), entry.value.end(),
                  values_.begin() + static_cast<std::ptrdiff_t>(slot * width_));
        scores_[slot] = entry.score;
        origins_[slot] = entry.origin_pos;
    }

    void copy_out(std::size_t slot, CacheEntry<T>& out) const {
        const auto k = keys_.begin() + static_cast<std::ptrdiff_t>(slot * width_);
        const auto v = values_.begin() + static_cast<std::ptrdiff_t>(slot * width_);
        out.key.assign(k, k + static_cast<std::ptrdiff_t>(width_));
        out.value.assign(v, v + static_cast<std::ptrdiff_t>(width_));
        out.score = scores_[slot];
        out.origin_pos = origins_[slot];
    }

    std::size_t capacity_ = 0;
    std::size_t width_ = 0;
    std::size_t head_ = 0;
    std::size_t count_ = 0;
    std::vector<T> keys_;
    std::vector<T> values_;
    std::vector<double> scores_;
    std::vector<std::int64_t> origins_;
};

}  // namespace cascade_kv
