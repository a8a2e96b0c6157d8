// Copyright 2026 The cascade-kv Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <algorithm>
#include <cstddef>
#include <cstdint>
#include <ostream>
#include <random>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

#include "cascade_kv/baselines.hpp"
#include "cascade_kv/cascade_cache.hpp"
#include "cascade_kv/errors.hpp"
#include "cascade_kv/eviction_trace.hpp"
#include "cascade_kv/matrix.hpp"

namespace cascade_kv {

struct HeavyToken {
    std::int64_t pos = 0;
    double weight = 0.0;
};

enum class ScoreProfileKind { uniform_random, single_heavy, multi_heavy };

/// Synthetic per-token importance. Every token draws a background weight in
/// [0, 1); heavy tokens add their weight on top. Heavy tokens are the marked
/// tokens whose survival is reported. A uniform_random stream marks one
/// seed-chosen position with no extra weight.
struct ScoreProfile {
    ScoreProfileKind kind = ScoreProfileKind::uniform_random;
    std::vector<HeavyToken> heavy;

    static ScoreProfile uniform_random() { return {}; }
    static ScoreProfile single_heavy(std::int64_t pos, double weight) {
        return {ScoreProfileKind::single_heavy, {{pos, weight}}};
    }
    static ScoreProfile multi_heavy(std::vector<HeavyToken> tokens) {
        return {ScoreProfileKind::multi_heavy, std::move(tokens)};
    }
};

struct SyntheticStream {
    std::size_t length = 0;
    ScoreProfile profile;
    std::uint64_t seed = 0;

    void validate() const {
        detail::require<ConfigError>(length > 0, "synthetic stream: length must be positive");
        for (const auto& h : profile.heavy) {
            detail::require<ConfigError>(h.pos >= 0 && static_cast<std::size_t>(h.pos) < length,
                                         "synthetic stream: heavy position outside the stream");
            detail::require<ConfigError>(h.weight >= 0.0, "synthetic stream: heavy weight must be non-negative");
        }
    }

    std::vector<double> weights() const {
        validate();
        std::mt19937_64 rng(seed);
        std::uniform_real_distribution<double> unit(0.0, 1.0);
        std::vector<double> w(length);
        for (auto& x : w) x = unit(rng);
        for (const auto& h : profile.heavy) w[static_cast<std::size_t>(h.pos)] += h.weight;
        return w;
    }

    std::vector<std::int64_t> marked_positions() const {
        std::vector<std::int64_t> out;
        if (profile.kind == ScoreProfileKind::uniform_random) {
            std::mt19937_64 rng(seed ^ 0x9e3779b97f4a7c15ULL);
            std::uniform_int_distribution<std::int64_t> pick(0, static_cast<std::int64_t>(length) - 1);
            out.push_back(pick(rng));
        } else {
            for (const auto& h : profile.heavy) out.push_back(h.pos);
        }
        std::sort(out.begin(), out.end());
        return out;
    }
};

enum class PolicyKind { sliding_window, streaming_llm_sink, cascade_no_selection, cascade_full };

inline std::string_view to_string(PolicyKind p) noexcept {
    switch (p) {
        case PolicyKind::sliding_window: return "sliding_window";
        case PolicyKind::streaming_llm_sink: return "streaming_llm_sink";
        case PolicyKind::cascade_no_selection: return "cascade_no_selection";
        case PolicyKind::cascade_full: return "cascade_full";
    }
    return "unknown";
}

inline PolicyKind policy_from_string(std::string_view s) {
    for (auto p : {PolicyKind::sliding_window, PolicyKind::streaming_llm_sink, PolicyKind::cascade_no_selection,
                   PolicyKind::cascade_full}) {
        if (to_string(p) == s) return p;
    }
    throw ConfigError("unknown policy '" + std::string(s) + "'");
}

struct MarkedResult {
    std::int64_t pos = 0;
    bool resident = false;
    int final_sub_cache = -1;  // 0 = sink, 1..N = sub-cache, -1 = gone
    std::uint64_t survival_steps = 0;  // tokens seen after this one while it stayed resident

    friend bool operator==(const MarkedResult&, const MarkedResult&) = default;
};

struct RetentionReport {
    PolicyKind policy = PolicyKind::cascade_full;
    std::size_t num_cascades = 1;
    std::size_t capacity = 0;
    std::uint64_t seed = 0;
    std::vector<MarkedResult> marked;
    std::uint64_t empirical_span = 0;
    double overall_sparsity = 0.0;
    double window_sparsity = 0.0;

    double retention() const {
        if (marked.empty()) return 0.0;
        std::size_t kept = 0;
        for (const auto& m : marked) kept += m.resident ? 1 : 0;
        return static_cast<double>(kept) / static_cast<double>(marked.size());
    }

    static void write_csv_header(std::ostream& os) {
        os << "policy,N,capacity,seed,marked_pos,resident,survival_steps,empirical_span\n";
    }

    void write_csv_rows(std::ostream& os) const {
        for (const auto& m : marked) {
            os << to_string(policy) << ',' << num_cascades << ',' << capacity << ',' << seed << ',' << m.pos << ','
               << (m.resident ? 1 : 0) << ',' << m.survival_steps << ',' << empirical_span << '\n';
        }
    }
};

/// Effective cache configuration a policy runs with.
inline CascadeConfig policy_config(PolicyKind policy, const CascadeConfig& base) {
    CascadeConfig c = base;
    switch (policy) {
        case PolicyKind::sliding_window:
            c.sink_size = 0;
            c.num_cascades = 1;
            c.selection_enabled = false;
            break;
        case PolicyKind::streaming_llm_sink:
            c.num_cascades = 1;
            c.selection_enabled = false;
            break;
        case PolicyKind::cascade_no_selection: c.selection_enabled = false; break;
        case PolicyKind::cascade_full: c.selection_enabled = true; break;
    }
    return c;
}

/// Replays a synthetic stream through a policy. Synthetic weights stand in
/// for attention-derived EMA scores: each token enters the cache carrying its
/// weight as its score. Sliding-window and sink baselines run on the
/// deque-based SinkWindowCache; cascade policies run on CascadeCache.
inline RetentionReport run_retention(PolicyKind policy, const CascadeConfig& base, const SyntheticStream& stream,
                                     EvictionTrace* full_trace = nullptr) {
    const CascadeConfig config = policy_config(policy, base);
    config.validate();
    const std::vector<double> weights = stream.weights();
    const std::vector<std::int64_t> marked = stream.marked_positions();

    RetentionReport report;
    report.policy = policy;
    report.num_cascades = config.num_cascades;
    report.capacity = config.total_capacity;
    report.seed = stream.seed;

    std::unordered_map<std::int64_t, std::size_t> marked_index;
    report.marked.resize(marked.size());
    for (std::size_t i = 0; i < marked.size(); ++i) {
        report.marked[i].pos = marked[i];
        marked_index.emplace(marked[i], i);
    }
    std::vector<std::uint64_t> discarded_at(marked.size(), 0);
    std::vector<bool> gone(marked.size(), false);

    EvictionTrace step_trace;
    auto scan = [&](std::int64_t t) {
        for (const auto& e : step_trace.events()) {
            auto it = marked_index.find(e.origin_pos);
            if (it == marked_index.end()) continue;
            auto& m = report.marked[it->second];
            if (e.kind == EventKind::sink_add || e.kind == EventKind::accept) {
                m.final_sub_cache = static_cast<int>(e.sub_cache);
            } else if (e.kind == EventKind::final_discard) {
                gone[it->second] = true;
                discarded_at[it->second] = static_cast<std::uint64_t>(t);
                m.final_sub_cache = -1;
            }
        }
        if (full_trace != nullptr) full_trace->append(step_trace.events());
        step_trace.clear();
    };

    std::vector<std::int64_t> residents;
    const bool baseline = policy == PolicyKind::sliding_window || policy == PolicyKind::streaming_llm_sink;
    if (baseline) {
        SinkWindowCache cache(config.sink_size, config.total_capacity);
        for (std::size_t t = 0; t < stream.length; ++t) {
            cache.add(static_cast<std::int64_t>(t), &step_trace);
            scan(static_cast<std::int64_t>(t));
        }
        residents = cache.resident_origins();
    } else {
        CascadeCache<float> cache(config, 1);
        const float dummy = 0.0F;
        for (std::size_t t = 0; t < stream.length; ++t) {
            EntryView<float> e{{&dummy, 1}, {&dummy, 1}, weights[t], static_cast<std::int64_t>(t)};
            cache.add_token(e, &step_trace);
            scan(static_cast<std::int64_t>(t));
        }
        residents = cache.resident_origins();
    }

    const auto end = static_cast<std::uint64_t>(stream.length);
    for (std::size_t i = 0; i < report.marked.size(); ++i) {
        auto& m = report.marked[i];
        m.resident = !gone[i];
        m.survival_steps = (gone[i] ? discarded_at[i] : end) - static_cast<std::uint64_t>(m.pos);
    }

    const std::size_t sink_count = std::min(config.sink_size, residents.size());
    if (residents.size() > sink_count) {
        report.empirical_span = static_cast<std::uint64_t>(residents.back() - residents[sink_count] + 1);
    }
    if (stream.length >= config.total_capacity) {
        const auto sp = sparsity(config, stream.length);
        report.overall_sparsity = sp.overall;
        report.window_sparsity = sp.window;
    }
    return report;
}

/// Reconstructs the effective attention mask of a replay: entry (i, j) is 1
/// iff token j was resident when query i ran (cache state from before i's
/// chunk) or j sits in i's chunk with j <= i. Token positions must be the
/// contiguous stream 0..S-1 that produced the trace.
inline Matrix<std::uint8_t> reconstruct_mask(const EvictionTrace& trace, std::size_t seq_len, std::size_t stride = 1) {
    detail::require<ConfigError>(seq_len > 0 && stride > 0, "reconstruct_mask: length and stride must be positive");
    std::size_t sink_count = 0;
    std::size_t window_entries = 0;
    for (const auto& e : trace.events()) {
        if (e.kind == EventKind::sink_add) ++sink_count;
        if (e.kind == EventKind::accept && e.sub_cache == 1) ++window_entries;
    }
    if (sink_count + window_entries < seq_len) {
        throw IncompleteTraceError("reconstruct_mask: trace covers " + std::to_string(sink_count + window_entries) +
                                   " tokens, need " + std::to_string(seq_len));
    }
    // Token j stays visible until the end of the chunk whose add discarded it.
    std::vector<std::size_t> visible_until(seq_len, seq_len);
    for (const auto& e : trace.events()) {
        if (e.kind != EventKind::final_discard || e.origin_pos < 0 ||
            static_cast<std::size_t>(e.origin_pos) >= seq_len) {
            continue;
        }
        const std::size_t cause = sink_count + static_cast<std::size_t>(e.step);
        const std::size_t chunk_end = (cause / stride + 1) * stride;
        visible_until[static_cast<std::size_t>(e.origin_pos)] = std::min(seq_len, chunk_end);
    }
    Matrix<std::uint8_t> mask(seq_len, seq_len, 0);
    for (std::size_t j = 0; j < seq_len; ++j) {
        for (std::size_t i = j; i < visible_until[j]; ++i) {
            mask(i, j) = 1;
        }
    }
    return mask;
}

}  // namespace cascade_kv
