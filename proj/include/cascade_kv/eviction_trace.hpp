// Copyright 2026 The cascade-kv Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstdint>
#include <istream>
#include <ostream>
#include <sstream>
#include <string>
#include <string_view>
#include <vector>

#include "cascade_kv/errors.hpp"

namespace cascade_kv {

enum class EventKind : std::uint8_t {
    sink_add,
    accept,
    cascade_evict,
    selection_keep_incoming,
    selection_keep_resident,
    final_discard,
};

inline std::string_view to_string(EventKind kind) noexcept {
    switch (kind) {
        case EventKind::sink_add: return "sink_add";
        case EventKind::accept: return "accept";
        case EventKind::cascade_evict: return "cascade_evict";
        case EventKind::selection_keep_incoming: return "selection_keep_incoming";
        case EventKind::selection_keep_resident: return "selection_keep_resident";
        case EventKind::final_discard: return "final_discard";
    }
    return "unknown";
}

inline EventKind event_kind_from_string(std::string_view s) {
    for (auto k : {EventKind::sink_add, EventKind::accept, EventKind::cascade_evict,
                   EventKind::selection_keep_incoming, EventKind::selection_keep_resident,
                   EventKind::final_discard}) {
        if (to_string(k) == s) {
            return k;
        }
    }
    throw ConfigError("unknown event kind '" + std::string(s) + "'");
}

/// One cache event. `sub_cache` is 0 for the sink buffer and 1..N for the
/// cascading sub-caches. `step` is the cache's post-sink insertion counter at
/// the time of the add that produced the event.
struct TraceEvent {
    std::uint64_t step = 0;
    EventKind kind = EventKind::accept;
    std::int64_t origin_pos = 0;
    std::uint32_t sub_cache = 0;

    friend bool operator==(const TraceEvent&, const TraceEvent&) = default;
};

/// Time-ordered event log.
class EvictionTrace {
public:
    void push(const TraceEvent& e) { events_.push_back(e); }
    void append(const std::vector<TraceEvent>& events) { events_.insert(events_.end(), events.begin(), events.end()); }
    void clear() noexcept { events_.clear(); }

    const std::vector<TraceEvent>& events() const noexcept { return events_; }
    std::size_t size() const noexcept { return events_.size(); }
    bool empty() const noexcept { return events_.empty(); }

    friend bool operator==(const EvictionTrace&, const EvictionTrace&) = default;

    void write_csv(std::ostream& os) const {
        os << "step,kind,origin_pos,sub_cache\n";
        for (const auto& e : events_) {
            os << e.step << ',' << to_string(e.kind) << ',' << e.origin_pos << ',' << e.sub_cache << '\n';
        }
    }

    std::string to_csv() const {
        std::ostringstream os;
        write_csv(os);
        return os.str();
    }

    static EvictionTrace read_csv(std::istream& is) {
        EvictionTrace trace;
        std::string line;
        if (!std::getline(is, line) || line != "step,kind,origin_pos,sub_cache") {
            throw ConfigError("trace CSV: missing or malformed header");
        }
        while (std::getline(is, line)) {
            if (line.empty()) {
                continue;
            }
            std::istringstream row(line);
            std::string step, kind, origin, sub;
            if (!std::getline(row, step, ',') || !std::getline(row, kind, ',') || !std::getline(row, origin, ',') ||
                !std::getline(row, sub)) {
                throw ConfigError("trace CSV: malformed row '" + line + "'");
            }
            trace.push({std::stoull(step), event_kind_from_string(kind), std::stoll(origin),
                        static_cast<std::uint32_t>(std::stoul(sub))});
        }
        return trace;
    }

private:
    std::vector<TraceEvent> events_;
};

}  // namespace cascade_kv
