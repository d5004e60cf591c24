#pragma once

#include <cstdint>
#include <memory>
#include <queue>
#include <random>
#include <set>
#include <string>
#include <vector>

#include "mansim/messages.hpp"
#include "mansim/replica.hpp"
#include "mansim/scenario.hpp"
#include "mansim/trace.hpp"
#include "mansim/workload.hpp"

namespace mansim::sim {

struct SimEvent {
    SimTime fire_time = 0;
    std::uint64_t sequence = 0;  // global tie-break, uniqueness guaranteed
    enum Kind {
        kDelivery,
        kTimer,
        kClientArrival,
        kMandatorTick,
        kCrash,
        kAttackRotate,
        kAttackEnd,
        kWindowEdge,
    } kind = kDelivery;
    ReplicaId from = 0;
    ReplicaId to = 0;
    std::shared_ptr<const Message> msg;  // deliveries
    std::uint64_t timer_gen = 0;
    std::size_t arrival_index = 0;
    bool window_start = false;
    SimTime window_at = 0;
};

struct RunResult {
    Trace trace;
    std::shared_ptr<load::RequestLedger> records;
    std::vector<Replica::Snapshot> finals;
    Scenario scenario;
    std::vector<std::string> violations;
    std::vector<load::Arrival> arrivals;

    bool crashed(ReplicaId r) const;
    SimTime crash_time(ReplicaId r) const;  // beyond duration when never
};

// Deterministic event-loop simulator: seeded delays, omission faults for
// crashed replicas, asynchrony windows and rotating-minority attack delays.
class Simulator : public IHost {
  public:
    explicit Simulator(Scenario sc);
    RunResult run();

    // IHost
    SimTime now() const override { return now_; }
    void send(ReplicaId from, ReplicaId to, const Message& m) override;
    void broadcast(ReplicaId from, const Message& m, bool include_self) override;
    void arm_timer(ReplicaId rep, SimTime delay_ms) override;
    void cancel_timer(ReplicaId rep) override;
    void trace(TraceEvent e) override;
    void execute(std::uint64_t request_id, ReplicaId rep, SimTime t) override;
    void flag_violation(ReplicaId rep, const std::string& what) override;

  private:
    struct EventOrder {
        bool operator()(const SimEvent& a, const SimEvent& b) const {
            if (a.fire_time != b.fire_time) return a.fire_time > b.fire_time;
            return a.sequence > b.sequence;
        }
    };

    void push(SimEvent e);
    bool asynchronous_at(SimTime t) const;
    bool attacked_at(ReplicaId r) const { return attacked_.count(r) != 0; }
    bool crashed_at(ReplicaId r, SimTime t) const;
    SimTime draw_delay(ReplicaId from, ReplicaId to);
    void rotate_attack();
    void dispatch(const SimEvent& e);
    void schedule_send(ReplicaId from, ReplicaId to, const std::shared_ptr<const Message>& m);

    Scenario sc_;
    SimTime now_ = 0;
    std::uint64_t seq_ = 0;
    std::priority_queue<SimEvent, std::vector<SimEvent>, EventOrder> queue_;
    std::vector<std::unique_ptr<Replica>> replicas_;
    std::vector<SimTime> crash_time_;  // duration+1 when never crashed
    std::set<ReplicaId> attacked_;
    std::vector<std::uint64_t> timer_gen_;
    std::vector<bool> timer_armed_;
    std::mt19937_64 net_rng_;
    std::mt19937_64 attack_rng_;
    RunResult result_;
    std::vector<load::Arrival> arrivals_;
};

RunResult run_scenario(const Scenario& sc);

}  // namespace mansim::sim
