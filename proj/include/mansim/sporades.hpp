#pragma once

#include <cstdint>
#include <deque>
#include <functional>
#include <map>
#include <optional>
#include <set>
#include <vector>

#include "mansim/core.hpp"
#include "mansim/messages.hpp"

namespace mansim::sporades {

struct CoinConfig {
    std::uint64_t shared_seed = 0;
    std::uint32_t n = 1;
};

// Deterministic in (seed, view), identical at every replica: the view-indexed
// output of the fixed 64-bit mixing sequence, reduced mod n.
ReplicaId common_coin_flip(const CoinConfig& cfg, std::uint32_t view);

struct Config {
    std::uint32_t n = 0;
    std::uint32_t f = 0;
    bool fallback_enabled = true;
    std::uint64_t coin_seed = 0;

    std::uint32_t quorum() const { return n - f; }
};

// Everything a state transition wants the host to do. The engine itself never
// touches the network or the clock.
struct Actions {
    struct Send {
        ReplicaId to;
        Message msg;
    };
    std::vector<Send> sends;            // unicast
    std::vector<Message> broadcasts;    // all n replicas, self included
    std::vector<Block> commits;         // oldest first, cmnds attached
    bool arm_timer = false;
    bool cancel_timer = false;

    struct Note {  // protocol-level trace events
        enum Kind { kAsyncEnter, kAsyncExit, kCoin, kViewChange, kViolation } kind;
        std::uint32_t view = 0;
        std::uint64_t value = 0;  // winner / block id / detail
    };
    std::vector<Note> notes;
};

// The consensus engine: a deterministic event-driven state machine.
// input = (event), output = (state', Actions). No internal concurrency.
class Engine {
  public:
    Engine(Config cfg, ReplicaId id, std::function<CmndsVector()> cut_source);

    void start(Actions& out);
    void on_propose(const ProposeMsg& m, Actions& out);
    void on_vote(const VoteMsg& m, Actions& out);
    void on_timeout_msg(const TimeoutMsg& m, Actions& out);
    void on_timer_expired(Actions& out);
    void on_propose_async(const ProposeAsyncMsg& m, Actions& out);
    void on_vote_async(const VoteAsyncMsg& m, Actions& out);
    void on_async_complete(const AsyncCompleteMsg& m, Actions& out);

    std::uint32_t view() const { return v_cur_; }
    std::uint32_t round() const { return r_cur_; }
    Rank rank() const { return Rank{v_cur_, r_cur_}; }
    bool is_async() const { return is_async_; }
    BlockId block_high() const { return block_high_; }
    BlockId last_committed() const { return last_committed_; }
    const BlockStore& store() const { return store_; }
    bool corrupt() const { return corrupt_; }

  private:
    const Block& block(BlockId id) const { return *store_.find(id); }
    void store_block(const Block& b, Actions& out);
    void request_commit(BlockId ref, Actions& out);
    void drain_commits(Actions& out);
    void send_vote_for(const Block& b, ReplicaId to, Actions& out);
    void propose_sync(std::uint32_t view, const Block& parent, BlockId committed_ref,
                      Actions& out);
    void enter_async(std::uint32_t view, Actions& out);
    void maybe_vote_async(const Block& b, ReplicaId sender, std::uint8_t height,
                          Actions& out);
    void build_height2(const Block& h1, Actions& out);
    void process_completes(std::uint32_t view, Actions& out);
    void try_new_view_propose(std::uint32_t view, Actions& out);
    void advance_rank(std::uint32_t view, std::uint32_t round);

    Config cfg_;
    ReplicaId id_;
    std::function<CmndsVector()> cut_source_;
    BlockStore store_;

    std::uint32_t v_cur_ = 0;
    std::uint32_t r_cur_ = 0;
    BlockId block_high_ = 0;
    BlockId last_committed_ = 0;
    bool is_async_ = false;
    bool corrupt_ = false;

    // leader role
    BlockId outstanding_ = 0;  // proposal awaiting votes; 0 when none
    std::map<BlockId, std::set<ReplicaId>> vote_tally_;
    std::map<std::uint32_t, std::map<ReplicaId, BlockId>> new_view_tally_;
    std::set<std::uint32_t> proposed_in_view_;

    // timeout / async episode
    std::map<std::uint32_t, std::map<ReplicaId, BlockId>> timeout_tally_;
    std::set<std::uint32_t> async_entered_;
    std::set<std::uint32_t> timeout_advanced_;  // fallback-disabled path
    std::uint32_t async_view_ = 0;
    std::optional<Rank> last_timeout_rank_;
    BlockId own_h1_ = 0;
    BlockId h2_block_ = 0;
    std::set<std::uint32_t> h2_built_;
    std::set<std::uint32_t> complete_sent_;
    std::map<BlockId, std::set<ReplicaId>> async_vote_tally_;
    std::set<BlockId> voted_async_;
    std::map<std::uint32_t, std::vector<std::pair<ReplicaId, BlockId>>> complete_tally_;
    std::set<std::uint32_t> coin_done_;
    std::map<std::uint32_t, std::vector<ProposeAsyncMsg>> buffered_async_;
    // view -> proposer -> height-2 block id, for coin adoption
    std::map<std::uint32_t, std::map<ReplicaId, BlockId>> h2_by_proposer_;

    std::deque<BlockId> pending_commit_refs_;
};

}  // namespace mansim::sporades
