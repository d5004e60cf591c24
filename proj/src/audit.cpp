#include "mansim/audit.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <set>
#include <sstream>

#include <json.hpp>

namespace mansim::audit {

namespace {

struct CommitView {
    // per replica, commit events in commit order
    std::vector<std::vector<const TraceEvent*>> by_replica;

    explicit CommitView(const sim::RunResult& r) : by_replica(r.scenario.n) {
        for (const TraceEvent& e : r.trace.events)
            if (e.ev == Ev::kCommit && e.rep >= 0 &&
                e.rep < static_cast<std::int32_t>(r.scenario.n))
                by_replica[e.rep].push_back(&e);
    }
};

SimTime drain_window(const Scenario& sc) { return 10 * sc.timer_ms; }

bool scenario_fair(const Scenario& sc) {
    if (sc.crashes.size() > sc.f) return false;
    SimTime cutoff = sc.duration_ms - drain_window(sc);
    if (sc.attack.enabled) {
        SimTime end = sc.attack.end_ms < 0 ? sc.duration_ms : sc.attack.end_ms;
        if (end > cutoff) return false;
    }
    for (const AsyncWindow& w : sc.network.async_windows)
        if (w.end_ms > cutoff) return false;
    return true;
}

void cap_push(std::vector<std::string>& out, std::string s, std::size_t cap = 8) {
    if (out.size() < cap) out.push_back(std::move(s));
}

}  // namespace

std::int64_t nearest_rank(const std::vector<std::int64_t>& sorted, double pct) {
    if (sorted.empty()) return -1;
    std::size_t rank = static_cast<std::size_t>(
        std::ceil(pct / 100.0 * static_cast<double>(sorted.size())));
    if (rank < 1) rank = 1;
    if (rank > sorted.size()) rank = sorted.size();
    return sorted[rank - 1];
}

CheckResult check_log_agreement(const sim::RunResult& r) {
    CheckResult res{"log-agreement"};
    CommitView cv(r);
    std::uint32_t n = r.scenario.n;
    // round -> block id as committed by each replica
    std::vector<std::map<std::int64_t, std::uint64_t>> chains(n);
    for (std::uint32_t i = 0; i < n; ++i)
        for (const TraceEvent* e : cv.by_replica[i]) chains[i][e->round] = e->block;
    for (std::uint32_t i = 0; i < n; ++i) {
        for (std::uint32_t j = i + 1; j < n; ++j) {
            for (const auto& [round, id] : chains[i]) {
                auto it = chains[j].find(round);
                if (it == chains[j].end()) continue;
                if (it->second != id) {
                    res.pass = false;
                    cap_push(res.details,
                             "replicas " + std::to_string(i) + " and " + std::to_string(j) +
                                 " diverge at round " + std::to_string(round));
                    break;
                }
            }
        }
    }
    return res;
}

CheckResult check_chain_discipline(const sim::RunResult& r) {
    CheckResult res{"chain-discipline"};
    CommitView cv(r);
    std::uint64_t genesis = genesis_block(r.scenario.n).id;
    for (std::uint32_t i = 0; i < r.scenario.n; ++i) {
        const auto& chain = cv.by_replica[i];
        for (std::size_t k = 0; k < chain.size(); ++k) {
            const TraceEvent* e = chain[k];
            std::string at = "replica " + std::to_string(i) + " position " + std::to_string(k);
            if (e->round != static_cast<std::int64_t>(k) + 1) {
                res.pass = false;
                cap_push(res.details, at + ": round " + std::to_string(e->round) +
                                          " breaks the consecutive sequence");
                continue;
            }
            if (k == 0) {
                if (e->parent != genesis) {
                    res.pass = false;
                    cap_push(res.details, at + ": first commit does not extend genesis");
                }
            } else {
                const TraceEvent* prev = chain[k - 1];
                if (e->parent != prev->block) {
                    res.pass = false;
                    cap_push(res.details, at + ": parent link mismatch");
                }
                if (e->view < prev->view) {
                    res.pass = false;
                    cap_push(res.details, at + ": view decreased");
                }
                if (e->level == 2 &&
                    (prev->level != 1 || prev->view != e->view)) {
                    res.pass = false;
                    cap_push(res.details,
                             at + ": height-2 block without its height-1 parent");
                }
            }
            if (e->level != -1 && e->level != 1 && e->level != 2) {
                res.pass = false;
                cap_push(res.details, at + ": invalid level");
            }
        }
    }
    return res;
}

CheckResult check_unique_rank(const sim::RunResult& r) {
    CheckResult res{"unique-rank"};
    std::map<std::pair<std::int64_t, std::int64_t>, std::set<std::uint64_t>> by_rank;
    for (const TraceEvent& e : r.trace.events)
        if (e.ev == Ev::kCommit) by_rank[{e.view, e.round}].insert(e.block);
    for (const auto& [rank, ids] : by_rank) {
        if (ids.size() > 1) {
            res.pass = false;
            cap_push(res.details, "two committed blocks at rank (" +
                                      std::to_string(rank.first) + "," +
                                      std::to_string(rank.second) + ")");
        }
    }
    return res;
}

CheckResult check_liveness(const sim::RunResult& r) {
    CheckResult res{"liveness"};
    const Scenario& sc = r.scenario;
    if (!scenario_fair(sc)) {
        res.applicable = false;
        res.details.push_back("scenario not fair after last disruption; exempt");
        return res;
    }
    SimTime cutoff = sc.duration_ms - drain_window(sc);
    std::vector<ReplicaId> live;
    for (ReplicaId i = 0; i < sc.n; ++i)
        if (!r.crashed(i)) live.push_back(i);

    const load::RequestLedger& led = *r.records;
    std::uint64_t unexecuted = 0;
    for (std::uint64_t id = 1; id <= led.size(); ++id) {
        const auto& rec = led.record(id);
        if (rec.submit_time >= cutoff) continue;
        if (rec.lost_at_ingress) continue;
        // In-flight requests can be lost when their submitter crashes: there
        // are no client-side retries in this model.
        if (r.crash_time(rec.target) < rec.submit_time + drain_window(sc)) continue;
        for (ReplicaId rep : live) {
            if (!led.executed_at(id, rep)) {
                ++unexecuted;
                cap_push(res.details, "request " + std::to_string(id) +
                                          " never executed at replica " +
                                          std::to_string(rep));
                res.pass = false;
                break;
            }
        }
    }
    if (unexecuted > 0)
        res.details.push_back(std::to_string(unexecuted) + " requests stalled");
    return res;
}

CheckResult check_async_exit(const sim::RunResult& r) {
    CheckResult res{"async-exit"};
    if (!scenario_fair(r.scenario)) {
        res.applicable = false;
        return res;
    }
    for (const auto& s : r.finals) {
        if (r.crashed(s.id)) continue;
        if (s.is_async) {
            res.pass = false;
            cap_push(res.details,
                     "replica " + std::to_string(s.id) + " ended in asynchronous mode");
        }
    }
    return res;
}

CheckResult check_harness_violations(const sim::RunResult& r) {
    CheckResult res{"harness-violations"};
    for (const std::string& v : r.violations) {
        res.pass = false;
        cap_push(res.details, v);
    }
    return res;
}

ComplexityReport complexity_report(const sim::RunResult& r) {
    ComplexityReport rep;
    std::uint32_t n = r.scenario.n;
    rep.sync_limit = 2ULL * n;
    rep.async_limit = 6ULL * n * n;

    // Message sends by rank (sync) and by view (async phases).
    std::map<std::pair<std::int64_t, std::int64_t>, std::uint64_t> sync_by_rank;
    std::map<std::int64_t, std::uint64_t> async_by_view;
    for (const TraceEvent& e : r.trace.events) {
        if (e.ev != Ev::kSend || e.msg == nullptr) continue;
        std::string_view type(e.msg);
        if (type == "propose" || type == "vote") {
            sync_by_rank[{e.view, e.round}]++;
        } else if (type == "timeout" || type == "propose-async-1" ||
                   type == "propose-async-2" || type == "vote-async" ||
                   type == "async-complete") {
            async_by_view[e.view]++;
        }
    }

    std::set<std::pair<std::int64_t, std::int64_t>> sync_blocks;
    std::set<std::int64_t> async_views;
    for (const TraceEvent& e : r.trace.events) {
        if (e.ev == Ev::kCommit && e.level == -1 && e.round > 0)
            sync_blocks.insert({e.view, e.round});
        if (e.ev == Ev::kAsyncEnter) async_views.insert(e.view);
    }

    rep.committed_sync_blocks = sync_blocks.size();
    for (const auto& rank : sync_blocks) {
        auto it = sync_by_rank.find(rank);
        std::uint64_t c = it == sync_by_rank.end() ? 0 : it->second;
        rep.max_sync_msgs_per_block = std::max(rep.max_sync_msgs_per_block, c);
        if (c > rep.sync_limit) rep.sync_ok = false;
    }
    for (std::int64_t v : async_views) {
        auto it = async_by_view.find(v);
        std::uint64_t c = it == async_by_view.end() ? 0 : it->second;
        rep.async_episodes.push_back({static_cast<std::uint32_t>(v), c});
        rep.max_async_episode_msgs = std::max(rep.max_async_episode_msgs, c);
        if (c > rep.async_limit) rep.async_ok = false;
    }
    return rep;
}

Metrics metrics(const sim::RunResult& r) {
    Metrics m;
    const load::RequestLedger& led = *r.records;
    m.submitted_requests = led.size();
    std::vector<std::int64_t> lats;
    for (std::uint64_t id = 1; id <= led.size(); ++id) {
        auto lat = led.latency_at_submitter(id);
        if (lat) {
            lats.push_back(*lat);
            ++m.executed_requests;
        }
    }
    std::sort(lats.begin(), lats.end());
    m.latency_median_ms = nearest_rank(lats, 50.0);
    m.latency_p99_ms = nearest_rank(lats, 99.0);
    m.throughput_rps = static_cast<double>(m.executed_requests) /
                       (static_cast<double>(r.scenario.duration_ms) / 1000.0);

    std::set<std::uint64_t> blocks;
    std::set<std::int64_t> vc_views, async_views;
    for (const TraceEvent& e : r.trace.events) {
        if (e.ev == Ev::kCommit) blocks.insert(e.block);
        if (e.ev == Ev::kViewChange) vc_views.insert(e.view);
        if (e.ev == Ev::kAsyncEnter) async_views.insert(e.view);
    }
    m.committed_blocks = blocks.size();
    m.view_changes = vc_views.size();
    m.async_episodes = async_views.size();
    return m;
}

std::vector<std::uint64_t> commit_timeseries(const sim::RunResult& r, SimTime bucket_ms) {
    std::size_t buckets =
        static_cast<std::size_t>((r.scenario.duration_ms + bucket_ms - 1) / bucket_ms);
    std::vector<std::uint64_t> out(buckets, 0);
    const load::RequestLedger& led = *r.records;
    for (std::uint64_t id = 1; id <= led.size(); ++id) {
        auto t = led.first_exec(id);
        if (!t) continue;
        std::size_t b = static_cast<std::size_t>(*t / bucket_ms);
        if (b < out.size()) ++out[b];
    }
    return out;
}

std::string timeseries_csv(const sim::RunResult& r, SimTime bucket_ms) {
    std::vector<std::uint64_t> ts = commit_timeseries(r, bucket_ms);
    std::string out = "bucket_start_ms,committed_requests\n";
    for (std::size_t i = 0; i < ts.size(); ++i) {
        out += std::to_string(static_cast<SimTime>(i) * bucket_ms);
        out += ',';
        out += std::to_string(ts[i]);
        out += '\n';
    }
    return out;
}

AuditReport run_all(const sim::RunResult& r) {
    AuditReport rep;
    rep.checks.push_back(check_log_agreement(r));
    rep.checks.push_back(check_chain_discipline(r));
    rep.checks.push_back(check_unique_rank(r));
    rep.checks.push_back(check_liveness(r));
    rep.checks.push_back(check_async_exit(r));
    rep.checks.push_back(check_harness_violations(r));
    rep.complexity = complexity_report(r);
    rep.metric = metrics(r);
    rep.all_pass = rep.complexity.sync_ok && rep.complexity.async_ok;
    for (const CheckResult& c : rep.checks) rep.all_pass = rep.all_pass && c.ok();
    return rep;
}

std::string AuditReport::to_json(const sim::RunResult& r) const {
    nlohmann::ordered_json j;
    j["scenario"]["n"] = r.scenario.n;
    j["scenario"]["f"] = r.scenario.f;
    j["scenario"]["seed"] = r.scenario.seed;
    j["scenario"]["duration_ms"] = r.scenario.duration_ms;
    j["scenario"]["fallback_enabled"] = r.scenario.fallback_enabled;
    j["all_pass"] = all_pass;
    j["checks"] = nlohmann::ordered_json::array();
    for (const CheckResult& c : checks) {
        nlohmann::ordered_json cj;
        cj["name"] = c.name;
        cj["applicable"] = c.applicable;
        cj["pass"] = c.pass;
        cj["details"] = c.details;
        j["checks"].push_back(cj);
    }
    j["complexity"]["committed_sync_blocks"] = complexity.committed_sync_blocks;
    j["complexity"]["max_sync_msgs_per_block"] = complexity.max_sync_msgs_per_block;
    j["complexity"]["sync_limit"] = complexity.sync_limit;
    j["complexity"]["max_async_episode_msgs"] = complexity.max_async_episode_msgs;
    j["complexity"]["async_limit"] = complexity.async_limit;
    j["complexity"]["async_episodes"] = complexity.async_episodes.size();
    j["complexity"]["sync_ok"] = complexity.sync_ok;
    j["complexity"]["async_ok"] = complexity.async_ok;
    j["metrics"]["submitted_requests"] = metric.submitted_requests;
    j["metrics"]["executed_requests"] = metric.executed_requests;
    j["metrics"]["throughput_rps"] = metric.throughput_rps;
    j["metrics"]["latency_median_ms"] = metric.latency_median_ms;
    j["metrics"]["latency_p99_ms"] = metric.latency_p99_ms;
    j["metrics"]["committed_blocks"] = metric.committed_blocks;
    j["metrics"]["view_changes"] = metric.view_changes;
    j["metrics"]["async_episodes"] = metric.async_episodes;
    return j.dump(2);
}

sim::RunResult clone_result(const sim::RunResult& r) {
    sim::RunResult c = r;
    c.records = std::make_shared<load::RequestLedger>(*r.records);
    return c;
}

bool apply_corruption(sim::RunResult& r, Corruption kind) {
    switch (kind) {
        case Corruption::kForkRound: {
            // Flip one replica's committed block id at some round.
            for (TraceEvent& e : r.trace.events) {
                if (e.ev == Ev::kCommit && e.rep == 1 && e.round >= 1) {
                    e.block ^= 0xdeadbeefULL;
                    return true;
                }
            }
            return false;
        }
        case Corruption::kRoundGap: {
            std::int32_t hits = 0;
            for (TraceEvent& e : r.trace.events) {
                if (e.ev == Ev::kCommit && e.rep == 0) {
                    ++hits;
                    if (hits == 2) {
                        e.round += 1;  // breaks consecutiveness
                        return true;
                    }
                }
            }
            return false;
        }
        case Corruption::kDoubleExecution: {
            const load::RequestLedger& led = *r.records;
            for (std::uint64_t id = 1; id <= led.size(); ++id) {
                if (led.executed_at(id, 0)) {
                    r.records->inject_duplicate(id, 0);
                    r.violations.push_back("replica 0: duplicate execution of request " +
                                           std::to_string(id));
                    return true;
                }
            }
            return false;
        }
    }
    return false;
}

}  // namespace mansim::audit
