#pragma once

#include <cstdint>
#include <map>
#include <stdexcept>
#include <string>
#include <vector>

#include "mansim/core.hpp"

namespace mansim {

struct ScenarioError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

struct AsyncWindow {
    SimTime start_ms = 0;
    SimTime end_ms = 0;
};

struct CrashEntry {
    SimTime at_ms = 0;
    ReplicaId replica = 0;
};

struct AttackSpec {
    bool enabled = false;
    std::uint32_t minority_size = 0;
    SimTime rotation_period_ms = 0;  // 0 = never rotate (fixed set)
    SimTime attack_delay_ms = 0;
    SimTime start_ms = 0;
    SimTime end_ms = -1;  // -1 = until run end
};

struct WorkloadSpec {
    double arrival_rate_per_s = 0.0;  // batch-arrival events per second
    std::uint32_t client_batch_size = 100;
    std::uint32_t payload_bytes = 16;
    std::uint32_t num_clients = 0;  // 0 = one per replica
    std::string target_policy = "client_mod_n";
};

struct NetworkSpec {
    SimTime base_delay_ms = 50;
    SimTime jitter_ms = 10;            // post-GST: uniform in [base, base+jitter]
    std::uint32_t asynchrony_factor = 8;  // pre-GST/window: uniform in [base, base*factor]
    SimTime gst_ms = 0;
    std::vector<AsyncWindow> async_windows;
};

// Declarative adversary + workload for one deterministic run.
struct Scenario {
    std::uint32_t n = 5;
    std::uint32_t f = 2;
    std::uint64_t seed = 1;
    SimTime duration_ms = 10000;
    SimTime timer_ms = 200;
    bool fallback_enabled = true;
    bool selective_broadcast = true;
    SimTime heartbeat_interval_ms = 500;
    NetworkSpec network;
    std::vector<CrashEntry> crashes;
    AttackSpec attack;
    WorkloadSpec workload;

    std::uint32_t quorum() const { return n - f; }
    void validate() const;  // throws ScenarioError

    static Scenario from_json(const std::string& text);
    static Scenario load(const std::string& path);
    std::string to_json() const;

    // Dotted-path overrides ("network.base_delay_ms=30"), applied to the
    // JSON form before validation.
    static Scenario with_overrides(const Scenario& base,
                                   const std::vector<std::string>& kvs);
};

}  // namespace mansim
