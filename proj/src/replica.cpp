#include "mansim/replica.hpp"

#include <algorithm>

namespace mansim::sim {

namespace {

TraceEvent base_event(SimTime t, Ev ev, ReplicaId rep) {
    TraceEvent e;
    e.t = t;
    e.ev = ev;
    e.rep = static_cast<std::int32_t>(rep);
    return e;
}

}  // namespace

Replica::Replica(const Scenario& sc, ReplicaId id, IHost& host)
    : sc_(sc),
      id_(id),
      host_(host),
      chains_(mandator::Config{sc.n, sc.f, sc.selective_broadcast}, id),
      engine_(sporades::Config{sc.n, sc.f, sc.fallback_enabled, sc.seed}, id,
              [this] { return chains_.current_cut(); }) {}

void Replica::start() {
    sporades::Actions acts;
    engine_.start(acts);
    apply_actions(acts);
}

void Replica::apply_actions(sporades::Actions& acts) {
    for (const auto& note : acts.notes) {
        switch (note.kind) {
            case sporades::Actions::Note::kAsyncEnter: {
                TraceEvent e = base_event(host_.now(), Ev::kAsyncEnter, id_);
                e.view = note.view;
                host_.trace(e);
                break;
            }
            case sporades::Actions::Note::kAsyncExit: {
                TraceEvent e = base_event(host_.now(), Ev::kAsyncExit, id_);
                e.view = note.view;
                e.block = note.value;
                host_.trace(e);
                break;
            }
            case sporades::Actions::Note::kCoin: {
                TraceEvent e = base_event(host_.now(), Ev::kCoin, id_);
                e.view = note.view;
                e.winner = static_cast<std::int32_t>(note.value);
                host_.trace(e);
                break;
            }
            case sporades::Actions::Note::kViewChange: {
                TraceEvent e = base_event(host_.now(), Ev::kViewChange, id_);
                e.view = note.view;
                host_.trace(e);
                break;
            }
            case sporades::Actions::Note::kViolation:
                host_.flag_violation(id_, "irreconcilable commit history");
                break;
        }
    }
    for (const Block& b : acts.commits) {
        committed_chain_.push_back(b);
        TraceEvent e = base_event(host_.now(), Ev::kCommit, id_);
        e.view = b.rank.view;
        e.round = b.rank.round;
        e.level = b.level;
        e.block = b.id;
        e.parent = b.parent;
        e.proposer = static_cast<std::int32_t>(b.proposer);
        e.cut = b.cmnds;
        host_.trace(e);
        pending_cuts_.emplace_back(b.id, b.cmnds);
    }
    if (acts.cancel_timer) host_.cancel_timer(id_);
    if (acts.arm_timer) host_.arm_timer(id_, sc_.timer_ms);
    for (const Message& m : acts.broadcasts) host_.broadcast(id_, m, true);
    for (const auto& s : acts.sends) host_.send(id_, s.to, s.msg);
    if (!acts.commits.empty()) drain_cuts();
}

void Replica::drain_cuts() {
    while (!pending_cuts_.empty()) {
        auto& [block_id, cut] = pending_cuts_.front();
        mandator::ChainsState::CommitResult res = chains_.commit_cut(cut);
        if (!res.missing.empty()) {
            issue_pulls(res.missing);
            return;  // stalled until the batches arrive
        }
        TraceEvent e = base_event(host_.now(), Ev::kCutCommitted, id_);
        e.block = block_id;
        e.cut = cut;
        e.count = 0;
        for (const mandator::MandatorBatch& b : res.batches) {
            e.ids.push_back(b.batch_id);
            e.count += static_cast<std::int64_t>(b.requests.size());
            for (std::uint64_t req : b.requests) {
                host_.execute(req, id_, host_.now());
                ++executed_;
            }
        }
        host_.trace(e);
        pending_cuts_.pop_front();
    }
}

void Replica::issue_pulls(const std::vector<mandator::MissingBatch>& missing) {
    for (const mandator::PullIntent& p : chains_.fetch_missing(missing))
        host_.send(id_, p.target, PullRequestMsg{p.creator, p.round});
}

void Replica::maybe_create_batch(bool heartbeat_due) {
    if (pending_requests_.empty() && !heartbeat_due) return;
    std::vector<std::uint64_t> reqs(pending_requests_.begin(), pending_requests_.end());
    auto res = chains_.create_batch(std::move(reqs));
    if (!res) return;  // previous round unconfirmed; retried on progress
    pending_requests_.clear();
    last_batch_created_ = host_.now();
    last_own_round_activity_ = host_.now();

    TraceEvent e = base_event(host_.now(), Ev::kBatchCreated, id_);
    e.creator = static_cast<std::int32_t>(id_);
    e.round = res->intent.batch.round;
    e.batch = res->intent.batch.batch_id;
    e.count = static_cast<std::int64_t>(res->intent.batch.requests.size());
    for (ReplicaId t : res->intent.targets) e.ids.push_back(t);
    host_.trace(e);

    for (ReplicaId t : res->intent.targets)
        host_.send(id_, t, BatchMsg{res->intent.batch, false});
    host_.broadcast(id_, BatchVoteMsg{id_, id_, res->intent.batch.round}, false);
    trace_write_completes(res->completed);
}

void Replica::trace_write_completes(const std::vector<mandator::WriteComplete>& completed) {
    for (const mandator::WriteComplete& wc : completed) {
        TraceEvent w = base_event(host_.now(), Ev::kWriteComplete, id_);
        w.creator = static_cast<std::int32_t>(wc.creator);
        w.round = wc.round;
        host_.trace(w);
    }
}

void Replica::handle_batch(const mandator::MandatorBatch& b, bool pull_response) {
    auto res = chains_.on_batch(b);
    using Status = mandator::ChainsState::StoreStatus;
    if (res.status == Status::kConflict) {
        host_.flag_violation(id_, "conflicting batch payload at occupied chain slot");
        return;
    }
    if (res.status == Status::kStored) {
        TraceEvent e = base_event(host_.now(), Ev::kBatchStored, id_);
        e.creator = static_cast<std::int32_t>(b.creator);
        e.round = b.round;
        e.batch = b.batch_id;
        if (pull_response) e.detail = "pull";
        host_.trace(e);
    }
    if (res.vote)
        host_.broadcast(id_, BatchVoteMsg{id_, res.vote->creator, res.vote->round}, false);
    trace_write_completes(res.completed);
    drain_cuts();  // a fetched batch may unblock the cut queue
}

void Replica::on_message(ReplicaId from, const Message& m) {
    sporades::Actions acts;
    if (const auto* p = std::get_if<ProposeMsg>(&m)) {
        engine_.on_propose(*p, acts);
    } else if (const auto* v = std::get_if<VoteMsg>(&m)) {
        engine_.on_vote(*v, acts);
    } else if (const auto* t = std::get_if<TimeoutMsg>(&m)) {
        engine_.on_timeout_msg(*t, acts);
    } else if (const auto* pa = std::get_if<ProposeAsyncMsg>(&m)) {
        engine_.on_propose_async(*pa, acts);
    } else if (const auto* va = std::get_if<VoteAsyncMsg>(&m)) {
        engine_.on_vote_async(*va, acts);
    } else if (const auto* ac = std::get_if<AsyncCompleteMsg>(&m)) {
        engine_.on_async_complete(*ac, acts);
    } else if (const auto* b = std::get_if<BatchMsg>(&m)) {
        handle_batch(b->batch, b->pull_response);
        return;
    } else if (const auto* bv = std::get_if<BatchVoteMsg>(&m)) {
        auto completed = chains_.on_vote(bv->voter, bv->creator, bv->round);
        trace_write_completes(completed);
        if (!completed.empty()) maybe_create_batch(false);
        return;
    } else if (const auto* pr = std::get_if<PullRequestMsg>(&m)) {
        const mandator::MandatorBatch* have = chains_.batch(pr->creator, pr->round);
        if (have != nullptr) host_.send(id_, from, BatchMsg{*have, true});
        return;
    }
    apply_actions(acts);
}

void Replica::on_timer_expired() {
    sporades::Actions acts;
    engine_.on_timer_expired(acts);
    apply_actions(acts);
}

void Replica::on_tick() {
    bool heartbeat_due =
        host_.now() - last_batch_created_ >= sc_.heartbeat_interval_ms;
    maybe_create_batch(heartbeat_due);

    // Rebroadcast the oldest own unconfirmed round if it has been stuck for a
    // while (a selected target may have crashed before acknowledging).
    std::uint32_t stuck = chains_.oldest_unconfirmed_own_round();
    if (stuck != 0 &&
        host_.now() - last_own_round_activity_ >= 2 * sc_.heartbeat_interval_ms) {
        last_own_round_activity_ = host_.now();
        const mandator::MandatorBatch* b = chains_.batch(id_, stuck);
        for (ReplicaId t = 0; t < sc_.n; ++t)
            if (t != id_) host_.send(id_, t, BatchMsg{*b, false});
    }

    if (!pending_cuts_.empty()) drain_cuts();  // retries pulls while stalled
}

void Replica::on_client_batch(const std::vector<std::uint64_t>& request_ids) {
    for (std::uint64_t r : request_ids) pending_requests_.push_back(r);
    maybe_create_batch(false);
}

Replica::Snapshot Replica::snapshot() const {
    Snapshot s;
    s.id = id_;
    s.v_cur = engine_.view();
    s.r_cur = engine_.round();
    s.is_async = engine_.is_async();
    s.committed_chain = committed_chain_;
    s.executed_requests = executed_;
    return s;
}

}  // namespace mansim::sim
