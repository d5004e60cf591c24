#include "mansim/workload.hpp"

#include <cmath>
#include <random>

#include "mansim/hash.hpp"

namespace mansim::load {

std::vector<Arrival> generate_arrivals(const WorkloadSpec& w, std::uint64_t seed,
                                       SimTime horizon_ms, std::uint32_t n) {
    std::vector<Arrival> out;
    if (w.arrival_rate_per_s <= 0.0 || horizon_ms <= 0) return out;

    std::mt19937_64 rng(hash_combine(0x6d616e73696d0004ULL, seed));
    const double mean_gap_ms = 1000.0 / w.arrival_rate_per_s;
    std::uint32_t clients = w.num_clients == 0 ? n : w.num_clients;

    double t = 0.0;
    RequestId next_id = 1;
    std::uint32_t arrival_idx = 0;
    while (true) {
        // inverse-CDF exponential draw; explicit form keeps the stream stable
        double u = (static_cast<double>(rng() >> 11) + 1.0) / 9007199254740993.0;
        t += -mean_gap_ms * std::log(u);
        if (t >= static_cast<double>(horizon_ms)) break;
        Arrival a;
        a.t = static_cast<SimTime>(t);
        a.client = arrival_idx % clients;
        if (w.target_policy == "round_robin") {
            a.replica = arrival_idx % n;
        } else {  // client_mod_n
            a.replica = a.client % n;
        }
        a.first_id = next_id;
        a.count = w.client_batch_size;
        next_id += w.client_batch_size;
        out.push_back(a);
        ++arrival_idx;
    }
    return out;
}

RequestLedger::RequestLedger(std::uint32_t n, const std::vector<Arrival>& arrivals)
    : n_(n) {
    RequestId total = 0;
    for (const Arrival& a : arrivals) total += a.count;
    records_.resize(total);
    exec_.assign(total * n, -1);
    for (const Arrival& a : arrivals) {
        for (std::uint32_t k = 0; k < a.count; ++k) {
            Record& r = records_[a.first_id - 1 + k];
            r.submit_time = a.t;
            r.target = a.replica;
        }
    }
}

bool RequestLedger::record_execution(RequestId id, ReplicaId rep, SimTime t) {
    SimTime& slot = exec_[(id - 1) * n_ + rep];
    if (slot >= 0) {
        duplicates_.emplace_back(id, rep);
        return false;
    }
    slot = t;
    return true;
}

void RequestLedger::mark_lost(RequestId first, std::uint32_t count) {
    for (std::uint32_t k = 0; k < count; ++k) records_[first - 1 + k].lost_at_ingress = true;
}

std::optional<SimTime> RequestLedger::first_exec(RequestId id) const {
    SimTime best = -1;
    for (std::uint32_t r = 0; r < n_; ++r) {
        SimTime t = exec_time(id, r);
        if (t >= 0 && (best < 0 || t < best)) best = t;
    }
    if (best < 0) return std::nullopt;
    return best;
}

std::optional<SimTime> RequestLedger::latency_at_submitter(RequestId id) const {
    const Record& r = record(id);
    SimTime t = exec_time(id, r.target);
    if (t < 0) return std::nullopt;
    return t - r.submit_time;
}

}  // namespace mansim::load
