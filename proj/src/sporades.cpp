#include "mansim/sporades.hpp"

#include <algorithm>

namespace mansim::sporades {

ReplicaId common_coin_flip(const CoinConfig& cfg, std::uint32_t view) {
    std::uint64_t h = 0x6d616e73696d0003ULL;
    h = hash_combine(h, cfg.shared_seed);
    h = hash_combine(h, view);
    return static_cast<ReplicaId>(h % cfg.n);
}

Engine::Engine(Config cfg, ReplicaId id, std::function<CmndsVector()> cut_source)
    : cfg_(cfg), id_(id), cut_source_(std::move(cut_source)), store_(cfg.n) {
    block_high_ = store_.genesis_id();
    last_committed_ = store_.genesis_id();
}

void Engine::advance_rank(std::uint32_t view, std::uint32_t round) {
    if (view > v_cur_) {
        v_cur_ = view;
        r_cur_ = round;
    } else if (view == v_cur_) {
        r_cur_ = std::max(r_cur_, round);
    }
}

void Engine::store_block(const Block& b, Actions& out) {
    if (store_.insert(b) && b.level == kLevelAsync2)
        h2_by_proposer_[b.rank.view].emplace(b.proposer, b.id);
    drain_commits(out);
}

void Engine::request_commit(BlockId ref, Actions& out) {
    if (ref == 0) return;
    if (!pending_commit_refs_.empty() && pending_commit_refs_.back() == ref) return;
    pending_commit_refs_.push_back(ref);
    drain_commits(out);
}

void Engine::drain_commits(Actions& out) {
    while (!pending_commit_refs_.empty()) {
        BlockId ref = pending_commit_refs_.front();
        if (!store_.contains(ref)) return;  // wait for the block to arrive
        if (store_.extends(last_committed_, ref) == ExtendsResult::kYes) {
            pending_commit_refs_.pop_front();  // already covered
            continue;
        }
        ExtendsResult ext = store_.extends(ref, last_committed_);
        if (ext == ExtendsResult::kUnresolvedParent) return;  // wait for history
        if (ext == ExtendsResult::kNo) {
            // Two irreconcilable histories; this should be unreachable.
            corrupt_ = true;
            out.notes.push_back({Actions::Note::kViolation, v_cur_, ref});
            pending_commit_refs_.pop_front();
            continue;
        }
        std::vector<BlockId> path;
        for (BlockId cur = ref; cur != last_committed_; cur = block(cur).parent)
            path.push_back(cur);
        for (auto it = path.rbegin(); it != path.rend(); ++it)
            out.commits.push_back(block(*it));
        last_committed_ = ref;
        pending_commit_refs_.pop_front();
    }
}

void Engine::send_vote_for(const Block& b, ReplicaId to, Actions& out) {
    out.sends.push_back({to, VoteMsg{b.rank.view, b.rank.round, b, id_}});
}

void Engine::start(Actions& out) {
    out.arm_timer = true;
    if (id_ == leader_of(0, cfg_.n))
        propose_sync(0, store_.genesis(), store_.genesis_id(), out);
}

void Engine::propose_sync(std::uint32_t view, const Block& parent, BlockId committed_ref,
                          Actions& out) {
    Block b = Block::make(Rank{view, parent.rank.round + 1}, kLevelSync, parent.id, id_,
                          cut_source_());
    store_block(b, out);
    outstanding_ = b.id;
    proposed_in_view_.insert(view);
    out.broadcasts.push_back(ProposeMsg{b, committed_ref});
}

void Engine::on_propose(const ProposeMsg& m, Actions& out) {
    store_block(m.block, out);
    if (is_async_) return;
    if (!(m.block.rank > rank())) return;
    if (m.block.proposer != leader_of(m.block.rank.view, cfg_.n)) return;

    request_commit(m.committed_ref, out);
    block_high_ = m.block.id;
    advance_rank(m.block.rank.view, m.block.rank.round);
    out.arm_timer = true;
    send_vote_for(m.block, leader_of(m.block.rank.view, cfg_.n), out);
}

void Engine::on_vote(const VoteMsg& m, Actions& out) {
    store_block(m.block_high, out);

    if (outstanding_ != 0 && m.block_high.id == outstanding_) {
        auto& voters = vote_tally_[outstanding_];
        voters.insert(m.voter);
        if (voters.size() < cfg_.quorum()) return;
        Block proposed = block(outstanding_);
        outstanding_ = 0;
        request_commit(proposed.id, out);
        if (!is_async_ && v_cur_ == proposed.rank.view)
            propose_sync(proposed.rank.view, proposed, proposed.id, out);
        return;
    }

    // New-view exit vote.
    std::uint32_t view = m.view;
    if (leader_of(view, cfg_.n) != id_) return;
    if (view < v_cur_ || proposed_in_view_.count(view)) return;
    new_view_tally_[view].emplace(m.voter, m.block_high.id);
    try_new_view_propose(view, out);
}

void Engine::try_new_view_propose(std::uint32_t view, Actions& out) {
    if (is_async_ || proposed_in_view_.count(view) || view < v_cur_) return;
    auto it = new_view_tally_.find(view);
    if (it == new_view_tally_.end() || it->second.size() < cfg_.quorum()) return;

    const Block* high = nullptr;
    for (const auto& [sender, bid] : it->second) {
        const Block* b = store_.find(bid);
        if (b != nullptr && (high == nullptr || b->rank > high->rank)) high = b;
    }
    if (high == nullptr) return;
    advance_rank(view, high->rank.round);
    out.notes.push_back({Actions::Note::kViewChange, view, 0});
    propose_sync(view, *high, last_committed_, out);
}

void Engine::on_timer_expired(Actions& out) {
    if (is_async_) return;  // no timer in the asynchronous mode
    if (last_timeout_rank_ && *last_timeout_rank_ == rank()) return;  // once per rank
    last_timeout_rank_ = rank();
    const Block& bh = block(block_high_);
    out.broadcasts.push_back(TimeoutMsg{v_cur_, r_cur_, bh, id_});
}

void Engine::on_timeout_msg(const TimeoutMsg& m, Actions& out) {
    store_block(m.block_high, out);
    if (m.view < v_cur_) return;  // stale
    auto& tally = timeout_tally_[m.view];
    tally.emplace(m.sender, m.block_high.id);
    if (tally.size() < cfg_.quorum()) return;

    if (!cfg_.fallback_enabled) {
        // Multi-Paxos-like view change: skip the asynchronous path entirely.
        if (timeout_advanced_.count(m.view) || m.view < v_cur_) return;
        timeout_advanced_.insert(m.view);
        v_cur_ = m.view + 1;
        r_cur_ = block(block_high_).rank.round;
        out.arm_timer = true;
        out.notes.push_back({Actions::Note::kViewChange, v_cur_, 0});
        out.sends.push_back(
            {leader_of(v_cur_, cfg_.n), VoteMsg{v_cur_, r_cur_, block(block_high_), id_}});
        return;
    }
    if (!async_entered_.count(m.view)) enter_async(m.view, out);
}

void Engine::enter_async(std::uint32_t view, Actions& out) {
    async_entered_.insert(view);
    is_async_ = true;
    async_view_ = view;
    if (view > v_cur_) v_cur_ = view;
    own_h1_ = 0;
    h2_block_ = 0;
    out.cancel_timer = true;
    out.notes.push_back({Actions::Note::kAsyncEnter, view, 0});

    // Extend the highest block_high among the collected timeouts and our own.
    const Block* high = &block(block_high_);
    for (const auto& [sender, bid] : timeout_tally_[view]) {
        const Block* b = store_.find(bid);
        if (b != nullptr && b->rank > high->rank) high = b;
    }
    Block h1 = Block::make(Rank{view, high->rank.round + 1}, kLevelAsync1, high->id, id_,
                           cut_source_());
    own_h1_ = h1.id;
    store_block(h1, out);
    out.broadcasts.push_back(ProposeAsyncMsg{h1, id_, 1});

    auto buffered = buffered_async_.find(view);
    if (buffered != buffered_async_.end()) {
        std::vector<ProposeAsyncMsg> msgs = std::move(buffered->second);
        buffered_async_.erase(buffered);
        for (const ProposeAsyncMsg& m : msgs) on_propose_async(m, out);
    }
    process_completes(view, out);
}

void Engine::maybe_vote_async(const Block& b, ReplicaId sender, std::uint8_t height,
                              Actions& out) {
    if (!is_async_) return;
    if (!(b.rank > rank())) return;
    if (!voted_async_.insert(b.id).second) return;
    out.sends.push_back({sender, VoteAsyncMsg{b.id, height, id_, b.rank.view}});
}

void Engine::on_propose_async(const ProposeAsyncMsg& m, Actions& out) {
    store_block(m.block, out);
    std::uint32_t view = m.block.rank.view;
    if (!is_async_ && view >= v_cur_) {
        buffered_async_[view].push_back(m);
        return;
    }
    if (!is_async_) return;

    // Catch-up: a height-2 block proves its parent gathered a quorum, so a
    // replica that has not yet formed its own height-2 block builds on that
    // parent ("adopt whichever height 1 block ... arrives first").
    if (m.height == 2 && view == async_view_ && !h2_built_.count(async_view_)) {
        const Block* parent = store_.find(m.block.parent);
        if (parent != nullptr && parent->level == kLevelAsync1)
            build_height2(*parent, out);
    }
    maybe_vote_async(m.block, m.sender, m.height, out);
}

void Engine::build_height2(const Block& h1, Actions& out) {
    Block h2 = Block::make(Rank{async_view_, h1.rank.round + 1}, kLevelAsync2, h1.id, id_,
                           cut_source_());
    h2_block_ = h2.id;
    h2_built_.insert(async_view_);
    store_block(h2, out);
    out.broadcasts.push_back(ProposeAsyncMsg{h2, id_, 2});
}

void Engine::on_vote_async(const VoteAsyncMsg& m, Actions& out) {
    if (!is_async_) return;
    if (m.block != own_h1_ && m.block != h2_block_) return;
    auto& voters = async_vote_tally_[m.block];
    voters.insert(m.voter);
    if (voters.size() < cfg_.quorum()) return;

    if (m.block == own_h1_ && !h2_built_.count(async_view_)) {
        build_height2(block(own_h1_), out);
    } else if (m.block == h2_block_ && h2_block_ != 0 &&
               !complete_sent_.count(async_view_)) {
        complete_sent_.insert(async_view_);
        out.broadcasts.push_back(AsyncCompleteMsg{block(h2_block_), async_view_, id_});
    }
}

void Engine::on_async_complete(const AsyncCompleteMsg& m, Actions& out) {
    store_block(m.block, out);
    if (m.view < v_cur_ && !(is_async_ && m.view == async_view_)) return;
    auto& tally = complete_tally_[m.view];
    bool seen = std::any_of(tally.begin(), tally.end(),
                            [&](const auto& e) { return e.first == m.sender; });
    if (!seen) tally.emplace_back(m.sender, m.block.id);
    if (is_async_ && m.view == async_view_) process_completes(m.view, out);
}

void Engine::process_completes(std::uint32_t view, Actions& out) {
    if (coin_done_.count(view)) return;
    const auto& tally = complete_tally_[view];
    if (tally.size() < cfg_.quorum()) return;
    coin_done_.insert(view);

    ReplicaId winner = common_coin_flip(CoinConfig{cfg_.coin_seed, cfg_.n}, view);
    out.notes.push_back({Actions::Note::kCoin, view, winner});

    bool committed = false;
    for (std::uint32_t i = 0; i < cfg_.quorum(); ++i) {
        if (tally[i].first == winner) {
            block_high_ = tally[i].second;
            request_commit(tally[i].second, out);
            committed = true;
            break;
        }
    }
    if (!committed) {
        auto by_view = h2_by_proposer_.find(view);
        if (by_view != h2_by_proposer_.end()) {
            auto it = by_view->second.find(winner);
            if (it != by_view->second.end()) block_high_ = it->second;
        }
    }

    is_async_ = false;
    v_cur_ = view + 1;
    r_cur_ = block(block_high_).rank.round;
    last_timeout_rank_.reset();
    out.arm_timer = true;
    out.notes.push_back({Actions::Note::kAsyncExit, view, block_high_});
    out.notes.push_back({Actions::Note::kViewChange, v_cur_, 0});
    out.sends.push_back(
        {leader_of(v_cur_, cfg_.n), VoteMsg{v_cur_, r_cur_, block(block_high_), id_}});
    if (leader_of(v_cur_, cfg_.n) == id_) try_new_view_propose(v_cur_, out);
}

}  // namespace mansim::sporades
