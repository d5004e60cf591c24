#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "mansim/netsim.hpp"

namespace mansim::audit {

struct CheckResult {
    std::string name;
    bool applicable = true;  // precondition held
    bool pass = true;
    std::vector<std::string> details;

    bool ok() const { return !applicable || pass; }
};

// Committed chains restricted to common rounds must be identical block ids.
CheckResult check_log_agreement(const sim::RunResult& r);
// Consecutive rounds from 1, non-decreasing views, valid parent links,
// height-2 parents are the matching height-1 blocks.
CheckResult check_chain_discipline(const sim::RunResult& r);
// No two distinct committed blocks share a rank anywhere in the run.
CheckResult check_unique_rank(const sim::RunResult& r);
// Under a fair scenario every eligible request executes at every live replica.
CheckResult check_liveness(const sim::RunResult& r);
// No replica is stuck in the asynchronous mode at run end.
CheckResult check_async_exit(const sim::RunResult& r);
// Harness-level violations recorded during the run (equivocation, dups, ...).
CheckResult check_harness_violations(const sim::RunResult& r);

struct EpisodeCount {
    std::uint32_t view = 0;
    std::uint64_t messages = 0;
};

struct ComplexityReport {
    std::uint64_t committed_sync_blocks = 0;
    std::uint64_t max_sync_msgs_per_block = 0;
    std::uint64_t sync_limit = 0;  // 2n
    std::vector<EpisodeCount> async_episodes;
    std::uint64_t max_async_episode_msgs = 0;
    std::uint64_t async_limit = 0;  // 6n^2
    bool sync_ok = true;
    bool async_ok = true;
};
ComplexityReport complexity_report(const sim::RunResult& r);

struct Metrics {
    std::uint64_t submitted_requests = 0;
    std::uint64_t executed_requests = 0;  // executed at the submitting replica
    double throughput_rps = 0.0;
    std::int64_t latency_median_ms = -1;  // nearest-rank
    std::int64_t latency_p99_ms = -1;
    std::uint64_t committed_blocks = 0;  // distinct block ids cluster-wide
    std::uint64_t view_changes = 0;
    std::uint64_t async_episodes = 0;
};
Metrics metrics(const sim::RunResult& r);

// Requests counted at their first execution anywhere, 1-second buckets by
// default; the throughput-vs-time series written next to each report.
std::vector<std::uint64_t> commit_timeseries(const sim::RunResult& r,
                                             SimTime bucket_ms = 1000);
std::string timeseries_csv(const sim::RunResult& r, SimTime bucket_ms = 1000);

struct AuditReport {
    std::vector<CheckResult> checks;
    ComplexityReport complexity;
    Metrics metric;
    bool all_pass = true;

    std::string to_json(const sim::RunResult& r) const;
};
AuditReport run_all(const sim::RunResult& r);

// Hand-corruptions used by the detector self-tests and the CLI debug hook.
enum class Corruption { kForkRound, kRoundGap, kDoubleExecution };
bool apply_corruption(sim::RunResult& r, Corruption kind);
sim::RunResult clone_result(const sim::RunResult& r);

// Nearest-rank percentile over a sorted sample; -1 when empty.
std::int64_t nearest_rank(const std::vector<std::int64_t>& sorted, double pct);

}  // namespace mansim::audit
