#include "mansim/netsim.hpp"

#include <algorithm>

#include "mansim/hash.hpp"

namespace mansim::sim {

bool RunResult::crashed(ReplicaId r) const {
    for (const CrashEntry& c : scenario.crashes)
        if (c.replica == r) return true;
    return false;
}

SimTime RunResult::crash_time(ReplicaId r) const {
    SimTime t = scenario.duration_ms + 1;
    for (const CrashEntry& c : scenario.crashes)
        if (c.replica == r) t = std::min(t, c.at_ms);
    return t;
}

Simulator::Simulator(Scenario sc)
    : sc_(std::move(sc)),
      crash_time_(sc_.n, sc_.duration_ms + 1),
      timer_gen_(sc_.n, 0),
      timer_armed_(sc_.n, false),
      net_rng_(hash_combine(0x6d616e73696d0005ULL, sc_.seed)),
      attack_rng_(hash_combine(0x6d616e73696d0006ULL, sc_.seed)) {
    sc_.validate();
    for (const CrashEntry& c : sc_.crashes)
        crash_time_[c.replica] = std::min(crash_time_[c.replica], c.at_ms);
    result_.scenario = sc_;
}

void Simulator::push(SimEvent e) {
    e.sequence = seq_++;
    queue_.push(std::move(e));
}

bool Simulator::asynchronous_at(SimTime t) const {
    if (t < sc_.network.gst_ms) return true;
    for (const AsyncWindow& w : sc_.network.async_windows)
        if (t >= w.start_ms && t < w.end_ms) return true;
    return false;
}

bool Simulator::crashed_at(ReplicaId r, SimTime t) const { return t >= crash_time_[r]; }

SimTime Simulator::draw_delay(ReplicaId from, ReplicaId to) {
    if (from == to) return 0;  // loopback
    SimTime lo = sc_.network.base_delay_ms;
    SimTime hi = asynchronous_at(now_)
                     ? sc_.network.base_delay_ms *
                           static_cast<SimTime>(sc_.network.asynchrony_factor)
                     : sc_.network.base_delay_ms + sc_.network.jitter_ms;
    if (hi < lo) hi = lo;
    SimTime span = hi - lo + 1;
    return lo + static_cast<SimTime>(net_rng_() % static_cast<std::uint64_t>(span));
}

void Simulator::schedule_send(ReplicaId from, ReplicaId to,
                              const std::shared_ptr<const Message>& m) {
    TraceEvent e;
    e.t = now_;
    e.ev = Ev::kSend;
    e.from = static_cast<std::int32_t>(from);
    e.to = static_cast<std::int32_t>(to);
    e.msg = message_type_name(*m);
    MessageTag tag = message_tag(*m);
    if (tag.consensus) {
        e.view = tag.view;
        e.round = tag.round;
    }

    if (crashed_at(from, now_)) return;  // a crashed replica sends nothing
    SimTime delay = draw_delay(from, to);
    // Attacks slow both ingress and egress of the targeted replicas but never
    // drop: perfect links still hold.
    if (attacked_at(from) || attacked_at(to)) delay += sc_.attack.attack_delay_ms;
    SimTime at = now_ + delay;
    if (crashed_at(to, at)) {
        e.dropped = true;
        result_.trace.push(std::move(e));
        return;
    }
    e.deliver_at = at;
    result_.trace.push(std::move(e));

    SimEvent ev;
    ev.fire_time = at;
    ev.kind = SimEvent::kDelivery;
    ev.from = from;
    ev.to = to;
    ev.msg = m;
    push(std::move(ev));
}

void Simulator::send(ReplicaId from, ReplicaId to, const Message& m) {
    schedule_send(from, to, std::make_shared<const Message>(m));
}

void Simulator::broadcast(ReplicaId from, const Message& m, bool include_self) {
    auto shared = std::make_shared<const Message>(m);
    for (ReplicaId to = 0; to < sc_.n; ++to) {
        if (!include_self && to == from) continue;
        schedule_send(from, to, shared);
    }
}

void Simulator::arm_timer(ReplicaId rep, SimTime delay_ms) {
    timer_armed_[rep] = true;
    std::uint64_t gen = ++timer_gen_[rep];
    SimEvent ev;
    ev.fire_time = now_ + delay_ms;
    ev.kind = SimEvent::kTimer;
    ev.to = rep;
    ev.timer_gen = gen;
    push(std::move(ev));
}

void Simulator::cancel_timer(ReplicaId rep) {
    timer_armed_[rep] = false;
    ++timer_gen_[rep];  // outstanding expiries become stale
}

void Simulator::trace(TraceEvent e) { result_.trace.push(std::move(e)); }

void Simulator::execute(std::uint64_t request_id, ReplicaId rep, SimTime t) {
    if (!result_.records->record_execution(request_id, rep, t))
        flag_violation(rep, "duplicate execution of request " + std::to_string(request_id));
}

void Simulator::flag_violation(ReplicaId rep, const std::string& what) {
    TraceEvent e;
    e.t = now_;
    e.ev = Ev::kViolation;
    e.rep = static_cast<std::int32_t>(rep);
    e.detail = what;
    result_.trace.push(std::move(e));
    result_.violations.push_back("replica " + std::to_string(rep) + ": " + what);
}

void Simulator::rotate_attack() {
    attacked_.clear();
    std::vector<ReplicaId> all(sc_.n);
    for (ReplicaId i = 0; i < sc_.n; ++i) all[i] = i;
    for (std::uint32_t k = 0; k < sc_.attack.minority_size; ++k) {
        std::size_t pick = k + attack_rng_() % (all.size() - k);
        std::swap(all[k], all[pick]);
        attacked_.insert(all[k]);
    }
    TraceEvent e;
    e.t = now_;
    e.ev = Ev::kAttackRotate;
    for (ReplicaId r : attacked_) e.ids.push_back(r);
    result_.trace.push(std::move(e));
}

void Simulator::dispatch(const SimEvent& e) {
    switch (e.kind) {
        case SimEvent::kDelivery:
            if (crashed_at(e.to, now_)) return;
            replicas_[e.to]->on_message(e.from, *e.msg);
            return;
        case SimEvent::kTimer:
            if (crashed_at(e.to, now_)) return;
            if (!timer_armed_[e.to] || e.timer_gen != timer_gen_[e.to]) return;
            timer_armed_[e.to] = false;
            replicas_[e.to]->on_timer_expired();
            return;
        case SimEvent::kClientArrival: {
            const load::Arrival& a = arrivals_[e.arrival_index];
            TraceEvent t;
            t.t = now_;
            t.ev = Ev::kArrival;
            t.rep = static_cast<std::int32_t>(a.replica);
            t.count = a.count;
            result_.trace.push(std::move(t));
            if (crashed_at(a.replica, now_)) {
                result_.records->mark_lost(a.first_id, a.count);
                return;
            }
            std::vector<std::uint64_t> ids(a.count);
            for (std::uint32_t k = 0; k < a.count; ++k) ids[k] = a.first_id + k;
            replicas_[a.replica]->on_client_batch(ids);
            return;
        }
        case SimEvent::kMandatorTick: {
            if (!crashed_at(e.to, now_)) replicas_[e.to]->on_tick();
            SimEvent next;
            next.fire_time = now_ + sc_.heartbeat_interval_ms;
            next.kind = SimEvent::kMandatorTick;
            next.to = e.to;
            if (next.fire_time <= sc_.duration_ms) push(std::move(next));
            return;
        }
        case SimEvent::kCrash: {
            TraceEvent t;
            t.t = now_;
            t.ev = Ev::kCrash;
            t.rep = static_cast<std::int32_t>(e.to);
            result_.trace.push(std::move(t));
            return;
        }
        case SimEvent::kAttackRotate: {
            SimTime end = sc_.attack.end_ms < 0 ? sc_.duration_ms : sc_.attack.end_ms;
            if (now_ >= end) return;
            rotate_attack();
            if (sc_.attack.rotation_period_ms > 0) {
                SimEvent next;
                next.fire_time = now_ + sc_.attack.rotation_period_ms;
                next.kind = SimEvent::kAttackRotate;
                if (next.fire_time < end) push(std::move(next));
            }
            return;
        }
        case SimEvent::kAttackEnd:
            attacked_.clear();
            return;
        case SimEvent::kWindowEdge: {
            TraceEvent t;
            t.t = now_;
            t.ev = Ev::kWindow;
            t.detail = e.window_start ? "start" : "end";
            result_.trace.push(std::move(t));
            return;
        }
    }
}

RunResult Simulator::run() {
    arrivals_ = load::generate_arrivals(sc_.workload, sc_.seed, sc_.duration_ms, sc_.n);
    result_.arrivals = arrivals_;
    result_.records = std::make_shared<load::RequestLedger>(sc_.n, arrivals_);

    replicas_.clear();
    for (ReplicaId i = 0; i < sc_.n; ++i)
        replicas_.push_back(std::make_unique<Replica>(sc_, i, *this));

    for (std::size_t i = 0; i < arrivals_.size(); ++i) {
        SimEvent e;
        e.fire_time = arrivals_[i].t;
        e.kind = SimEvent::kClientArrival;
        e.arrival_index = i;
        push(std::move(e));
    }
    for (ReplicaId i = 0; i < sc_.n; ++i) {
        SimEvent e;
        e.fire_time = sc_.heartbeat_interval_ms;
        e.kind = SimEvent::kMandatorTick;
        e.to = i;
        push(std::move(e));
    }
    for (const CrashEntry& c : sc_.crashes) {
        SimEvent e;
        e.fire_time = c.at_ms;
        e.kind = SimEvent::kCrash;
        e.to = c.replica;
        push(std::move(e));
    }
    if (sc_.attack.enabled) {
        SimEvent e;
        e.fire_time = sc_.attack.start_ms;
        e.kind = SimEvent::kAttackRotate;
        push(std::move(e));
        SimEvent off;
        off.fire_time = sc_.attack.end_ms < 0 ? sc_.duration_ms : sc_.attack.end_ms;
        off.kind = SimEvent::kAttackEnd;
        push(std::move(off));
    }
    for (const AsyncWindow& w : sc_.network.async_windows) {
        SimEvent s;
        s.fire_time = w.start_ms;
        s.kind = SimEvent::kWindowEdge;
        s.window_start = true;
        s.window_at = w.start_ms;
        push(std::move(s));
        SimEvent t;
        t.fire_time = w.end_ms;
        t.kind = SimEvent::kWindowEdge;
        t.window_start = false;
        t.window_at = w.end_ms;
        push(std::move(t));
    }

    for (ReplicaId i = 0; i < sc_.n; ++i)
        if (!crashed_at(i, 0)) replicas_[i]->start();

    while (!queue_.empty()) {
        SimEvent e = queue_.top();
        queue_.pop();
        if (e.fire_time > sc_.duration_ms) break;
        now_ = e.fire_time;
        dispatch(e);
    }
    now_ = sc_.duration_ms;

    for (ReplicaId i = 0; i < sc_.n; ++i) result_.finals.push_back(replicas_[i]->snapshot());
    return std::move(result_);
}

RunResult run_scenario(const Scenario& sc) {
    Simulator sim(sc);
    return sim.run();
}

}  // namespace mansim::sim
