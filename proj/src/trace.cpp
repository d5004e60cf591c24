#include "mansim/trace.hpp"

#include <json.hpp>

namespace mansim {

const char* ev_name(Ev e) {
    switch (e) {
        case Ev::kSend: return "send";
        case Ev::kBatchCreated: return "batch-created";
        case Ev::kBatchStored: return "batch-stored";
        case Ev::kWriteComplete: return "write-complete";
        case Ev::kCutCommitted: return "cut-committed";
        case Ev::kCommit: return "commit";
        case Ev::kAsyncEnter: return "async-enter";
        case Ev::kAsyncExit: return "async-exit";
        case Ev::kCoin: return "coin";
        case Ev::kViewChange: return "view-change";
        case Ev::kCrash: return "crash";
        case Ev::kAttackRotate: return "attack-rotate";
        case Ev::kWindow: return "window";
        case Ev::kArrival: return "arrival";
        case Ev::kViolation: return "violation";
    }
    return "?";
}

std::string event_to_json(const TraceEvent& e) {
    nlohmann::ordered_json j;
    j["t"] = e.t;
    j["ev"] = ev_name(e.ev);
    if (e.rep >= 0) j["rep"] = e.rep;
    if (e.from >= 0) j["from"] = e.from;
    if (e.to >= 0) j["to"] = e.to;
    if (e.msg != nullptr) j["msg"] = e.msg;
    if (e.view >= 0) j["view"] = e.view;
    if (e.round >= 0) j["round"] = e.round;
    if (e.level != 0) j["level"] = e.level;
    if (e.height != 0) j["height"] = e.height;
    if (e.block != 0) j["block"] = e.block;
    if (e.parent != 0) j["parent"] = e.parent;
    if (e.proposer >= 0) j["proposer"] = e.proposer;
    if (e.batch != 0) j["batch"] = e.batch;
    if (e.creator >= 0) j["creator"] = e.creator;
    if (e.winner >= 0) j["winner"] = e.winner;
    if (e.deliver_at >= 0) j["deliver_at"] = e.deliver_at;
    if (e.dropped) j["dropped"] = true;
    if (e.count >= 0) j["count"] = e.count;
    if (!e.cut.empty()) j["cut"] = e.cut;
    if (!e.ids.empty()) j["ids"] = e.ids;
    if (!e.detail.empty()) j["detail"] = e.detail;
    return j.dump();
}

std::string Trace::to_jsonl() const {
    std::string out;
    for (const TraceEvent& e : events) {
        out += event_to_json(e);
        out += '\n';
    }
    return out;
}

}  // namespace mansim
