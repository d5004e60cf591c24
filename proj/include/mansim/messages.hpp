#pragma once

#include <cstdint>
#include <variant>

#include "mansim/core.hpp"
#include "mansim/mandator.hpp"

namespace mansim {

// Blocks travel whole (value semantics) so receivers can store them.

struct ProposeMsg {
    Block block;
    BlockId committed_ref = 0;  // last committed block of the proposer
};

// Serves both roles: vote for an outstanding proposal and new-view exit vote.
struct VoteMsg {
    std::uint32_t view = 0;
    std::uint32_t round = 0;
    Block block_high;
    ReplicaId voter = 0;
};

struct TimeoutMsg {
    std::uint32_t view = 0;
    std::uint32_t round = 0;
    Block block_high;
    ReplicaId sender = 0;
};

struct ProposeAsyncMsg {
    Block block;
    ReplicaId sender = 0;
    std::uint8_t height = 1;
};

struct VoteAsyncMsg {
    BlockId block = 0;
    std::uint8_t height = 1;
    ReplicaId voter = 0;
    std::uint32_t view = 0;  // attribution metadata, ignored by receivers
};

struct AsyncCompleteMsg {
    Block block;
    std::uint32_t view = 0;
    ReplicaId sender = 0;
};

struct BatchMsg {
    mandator::MandatorBatch batch;
    bool pull_response = false;
};

struct BatchVoteMsg {
    ReplicaId voter = 0;
    ReplicaId creator = 0;
    std::uint32_t round = 0;
};

struct PullRequestMsg {
    ReplicaId creator = 0;
    std::uint32_t round = 0;
};

using Message = std::variant<ProposeMsg, VoteMsg, TimeoutMsg, ProposeAsyncMsg,
                             VoteAsyncMsg, AsyncCompleteMsg, BatchMsg, BatchVoteMsg,
                             PullRequestMsg>;

inline const char* message_type_name(const Message& m) {
    switch (m.index()) {
        case 0: return "propose";
        case 1: return "vote";
        case 2: return "timeout";
        case 3: return std::get<ProposeAsyncMsg>(m).height == 1 ? "propose-async-1"
                                                                : "propose-async-2";
        case 4: return "vote-async";
        case 5: return "async-complete";
        case 6: return std::get<BatchMsg>(m).pull_response ? "pull-response"
                                                           : "mandator-batch";
        case 7: return "mandator-vote";
        case 8: return "pull-request";
    }
    return "?";
}

// Rank/view label used when attributing messages to protocol phases.
struct MessageTag {
    std::uint32_t view = 0;
    std::uint32_t round = 0;
    bool consensus = false;  // false for dissemination-layer messages
};

inline MessageTag message_tag(const Message& m) {
    if (const auto* p = std::get_if<ProposeMsg>(&m))
        return {p->block.rank.view, p->block.rank.round, true};
    if (const auto* v = std::get_if<VoteMsg>(&m)) return {v->view, v->round, true};
    if (const auto* t = std::get_if<TimeoutMsg>(&m)) return {t->view, t->round, true};
    if (const auto* pa = std::get_if<ProposeAsyncMsg>(&m))
        return {pa->block.rank.view, pa->block.rank.round, true};
    if (const auto* ac = std::get_if<AsyncCompleteMsg>(&m))
        return {ac->view, ac->block.rank.round, true};
    if (const auto* va = std::get_if<VoteAsyncMsg>(&m)) return {va->view, 0, true};
    return {};
}

}  // namespace mansim
