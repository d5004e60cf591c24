#pragma once

#include <cstdint>
#include <deque>
#include <vector>

#include "mansim/mandator.hpp"
#include "mansim/messages.hpp"
#include "mansim/scenario.hpp"
#include "mansim/sporades.hpp"
#include "mansim/trace.hpp"

namespace mansim::sim {

// Host services a replica needs; the simulator implements this.
class IHost {
  public:
    virtual ~IHost() = default;
    virtual SimTime now() const = 0;
    virtual void send(ReplicaId from, ReplicaId to, const Message& m) = 0;
    virtual void broadcast(ReplicaId from, const Message& m, bool include_self) = 0;
    virtual void arm_timer(ReplicaId rep, SimTime delay_ms) = 0;
    virtual void cancel_timer(ReplicaId rep) = 0;
    virtual void trace(TraceEvent e) = 0;
    virtual void execute(std::uint64_t request_id, ReplicaId rep, SimTime t) = 0;
    virtual void flag_violation(ReplicaId rep, const std::string& what) = 0;
};

// One replica: the consensus engine plus dissemination state plus the
// batching/commit/fetch plumbing between them.
class Replica {
  public:
    Replica(const Scenario& sc, ReplicaId id, IHost& host);

    void start();
    void on_message(ReplicaId from, const Message& m);
    void on_timer_expired();
    void on_tick();  // heartbeat / retry pulse
    void on_client_batch(const std::vector<std::uint64_t>& request_ids);

    struct Snapshot {
        ReplicaId id = 0;
        std::uint32_t v_cur = 0;
        std::uint32_t r_cur = 0;
        bool is_async = false;
        std::vector<Block> committed_chain;
        std::uint64_t executed_requests = 0;
    };
    Snapshot snapshot() const;

    bool is_async() const { return engine_.is_async(); }
    const sporades::Engine& engine() const { return engine_; }
    const mandator::ChainsState& chains() const { return chains_; }

  private:
    void apply_actions(sporades::Actions& acts);
    void maybe_create_batch(bool heartbeat_due);
    void drain_cuts();
    void issue_pulls(const std::vector<mandator::MissingBatch>& missing);
    void handle_batch(const mandator::MandatorBatch& b, bool pull_response);
    void trace_write_completes(const std::vector<mandator::WriteComplete>& completed);

    const Scenario& sc_;
    ReplicaId id_;
    IHost& host_;
    mandator::ChainsState chains_;
    sporades::Engine engine_;

    std::deque<std::uint64_t> pending_requests_;
    // Cuts are applied strictly in commit order so every replica executes the
    // same sequence; a missing batch stalls the queue until fetched.
    std::deque<std::pair<BlockId, CmndsVector>> pending_cuts_;
    SimTime last_batch_created_ = 0;
    SimTime last_own_round_activity_ = 0;
    std::uint64_t executed_ = 0;
    std::vector<Block> committed_chain_;
};

}  // namespace mansim::sim
