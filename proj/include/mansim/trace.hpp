#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "mansim/core.hpp"

namespace mansim {

enum class Ev : std::uint8_t {
    kSend,          // any message leaving a replica
    kBatchCreated,
    kBatchStored,
    kWriteComplete,
    kCutCommitted,
    kCommit,        // consensus block committed at a replica
    kAsyncEnter,
    kAsyncExit,
    kCoin,
    kViewChange,
    kCrash,
    kAttackRotate,
    kWindow,
    kArrival,
    kViolation,
};

const char* ev_name(Ev e);

struct TraceEvent {
    SimTime t = 0;
    Ev ev = Ev::kSend;
    std::int32_t rep = -1;   // acting replica
    std::int32_t from = -1;  // sends
    std::int32_t to = -1;
    const char* msg = nullptr;  // message type name for sends
    std::int64_t view = -1;
    std::int64_t round = -1;
    std::int32_t level = 0;
    std::int32_t height = 0;
    std::uint64_t block = 0;
    std::uint64_t parent = 0;
    std::int32_t proposer = -1;
    std::uint64_t batch = 0;
    std::int32_t creator = -1;
    std::int32_t winner = -1;
    std::int64_t deliver_at = -1;
    bool dropped = false;
    std::int64_t count = -1;  // request counts etc.
    CmndsVector cut;
    std::vector<std::uint64_t> ids;  // batch ids / attacked sets / targets
    std::string detail;
};

struct Trace {
    std::vector<TraceEvent> events;

    void push(TraceEvent e) { events.push_back(std::move(e)); }
    std::size_t size() const { return events.size(); }

    // JSON lines, one event per line, stable key order; this is the on-disk
    // trace format and the byte-determinism surface.
    std::string to_jsonl() const;
};

std::string event_to_json(const TraceEvent& e);

}  // namespace mansim
