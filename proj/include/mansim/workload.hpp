#pragma once

#include <cstdint>
#include <optional>
#include <vector>

#include "mansim/core.hpp"
#include "mansim/scenario.hpp"

namespace mansim::load {

using RequestId = std::uint64_t;

struct Arrival {
    SimTime t = 0;
    std::uint32_t client = 0;
    ReplicaId replica = 0;  // submitting replica per target policy
    RequestId first_id = 0;
    std::uint32_t count = 0;
};

// Open-loop Poisson batch arrivals: exponential inter-arrival gaps with mean
// 1000/rate ms. Request ids are dense and globally unique.
std::vector<Arrival> generate_arrivals(const WorkloadSpec& w, std::uint64_t seed,
                                       SimTime horizon_ms, std::uint32_t n);

// Per-request bookkeeping. Owned by the simulation; audited post-run.
class RequestLedger {
  public:
    RequestLedger(std::uint32_t n, const std::vector<Arrival>& arrivals);

    struct Record {
        SimTime submit_time = 0;
        ReplicaId target = 0;
        bool lost_at_ingress = false;  // arrival hit a crashed replica
    };

    // First execution per (request, replica); a second execution at the same
    // replica is a dedup bug and gets flagged.
    bool record_execution(RequestId id, ReplicaId rep, SimTime t);
    void mark_lost(RequestId first, std::uint32_t count);

    std::size_t size() const { return records_.size(); }
    const Record& record(RequestId id) const { return records_[id - 1]; }
    SimTime exec_time(RequestId id, ReplicaId rep) const {
        return exec_[(id - 1) * n_ + rep];
    }
    bool executed_at(RequestId id, ReplicaId rep) const {
        return exec_time(id, rep) >= 0;
    }
    std::optional<SimTime> first_exec(RequestId id) const;
    std::optional<SimTime> latency_at_submitter(RequestId id) const;

    const std::vector<std::pair<RequestId, ReplicaId>>& duplicate_executions() const {
        return duplicates_;
    }
    // test hook for the mutation self-checks
    void inject_duplicate(RequestId id, ReplicaId rep) { duplicates_.emplace_back(id, rep); }

    std::uint32_t replicas() const { return n_; }

  private:
    std::uint32_t n_;
    std::vector<Record> records_;
    std::vector<SimTime> exec_;  // (id-1)*n + rep, -1 = never
    std::vector<std::pair<RequestId, ReplicaId>> duplicates_;
};

}  // namespace mansim::load
