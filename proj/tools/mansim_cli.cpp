#include <filesystem>
#include <fstream>
#include <future>
#include <iostream>
#include <numeric>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "mansim/audit.hpp"
#include "mansim/netsim.hpp"
#include "mansim/scenario.hpp"

namespace fs = std::filesystem;
using nlohmann::ordered_json;

namespace {

constexpr int kExitOk = 0;
constexpr int kExitScenarioInvalid = 1;
constexpr int kExitAuditViolation = 2;

struct CommonOpts {
    std::string scenario_path;
    std::string out_dir;
    std::vector<std::string> overrides;
    bool quiet = false;
};

mansim::Scenario load_with_overrides(const CommonOpts& o) {
    mansim::Scenario sc = mansim::Scenario::load(o.scenario_path);
    if (!o.overrides.empty()) sc = mansim::Scenario::with_overrides(sc, o.overrides);
    return sc;
}

void write_file(const fs::path& p, const std::string& content) {
    std::ofstream out(p, std::ios::binary);
    out << content;
}

void write_run_outputs(const fs::path& dir, const mansim::sim::RunResult& res,
                       const mansim::audit::AuditReport& rep) {
    fs::create_directories(dir);
    write_file(dir / "trace.jsonl", res.trace.to_jsonl());
    write_file(dir / "report.json", rep.to_json(res));
    write_file(dir / "timeseries.csv", mansim::audit::timeseries_csv(res));
}

int cmd_run(const CommonOpts& o, const std::string& corrupt) {
    mansim::Scenario sc;
    try {
        sc = load_with_overrides(o);
    } catch (const std::exception& e) {
        std::cerr << "scenario error: " << e.what() << "\n";
        return kExitScenarioInvalid;
    }
    mansim::sim::RunResult res = mansim::sim::run_scenario(sc);
    if (!corrupt.empty()) {
        using mansim::audit::Corruption;
        Corruption kind = corrupt == "fork-round"  ? Corruption::kForkRound
                          : corrupt == "round-gap" ? Corruption::kRoundGap
                                                   : Corruption::kDoubleExecution;
        mansim::audit::apply_corruption(res, kind);
    }
    mansim::audit::AuditReport rep = mansim::audit::run_all(res);
    if (!o.out_dir.empty()) write_run_outputs(o.out_dir, res, rep);
    if (!o.quiet) {
        for (const auto& c : rep.checks)
            std::cout << c.name << ": "
                      << (!c.applicable ? "exempt" : (c.pass ? "pass" : "FAIL")) << "\n";
        std::cout << "throughput_rps: " << rep.metric.throughput_rps << "\n";
    }
    if (!rep.all_pass) {
        std::cerr << "audit violation detected\n";
        return kExitAuditViolation;
    }
    return kExitOk;
}

int cmd_battery(const CommonOpts& o, std::uint32_t seeds, std::uint32_t jobs) {
    mansim::Scenario base;
    try {
        base = load_with_overrides(o);
        if (seeds == 0) {
            std::cerr << "battery needs --seeds >= 1\n";
            return kExitScenarioInvalid;
        }
    } catch (const std::exception& e) {
        std::cerr << "scenario error: " << e.what() << "\n";
        return kExitScenarioInvalid;
    }

    struct PerSeed {
        std::uint64_t seed = 0;
        bool pass = false;
        bool async_committed = false;
        std::uint64_t async_episodes = 0;
        std::uint64_t coin_commit_episodes = 0;
        double throughput = 0.0;
        std::int64_t median = -1;
    };
    std::vector<PerSeed> rows(seeds);

    auto run_one = [&](std::uint32_t i) {
        mansim::Scenario sc = base;
        sc.seed = base.seed + i;
        mansim::sim::RunResult res = mansim::sim::run_scenario(sc);
        mansim::audit::AuditReport rep = mansim::audit::run_all(res);
        PerSeed row;
        row.seed = sc.seed;
        row.pass = rep.all_pass;
        row.async_episodes = rep.metric.async_episodes;
        // An episode "commits by coin" when some replica commits a level-2
        // block of that view.
        std::set<std::int64_t> commit_views;
        for (const auto& e : res.trace.events)
            if (e.ev == mansim::Ev::kCommit && e.level == 2) commit_views.insert(e.view);
        row.coin_commit_episodes = commit_views.size();
        row.async_committed = !commit_views.empty();
        row.throughput = rep.metric.throughput_rps;
        row.median = rep.metric.latency_median_ms;
        rows[i] = row;
    };

    if (jobs <= 1) {
        for (std::uint32_t i = 0; i < seeds; ++i) run_one(i);
    } else {
        std::vector<std::future<void>> futs;
        std::uint32_t next = 0;
        while (next < seeds) {
            while (futs.size() < jobs && next < seeds)
                futs.push_back(std::async(std::launch::async, run_one, next++));
            for (auto& f : futs) f.get();
            futs.clear();
        }
    }

    std::uint64_t passes = 0, episodes = 0, coin_commits = 0;
    std::vector<double> tputs;
    for (const PerSeed& r : rows) {
        passes += r.pass ? 1 : 0;
        episodes += r.async_episodes;
        coin_commits += r.coin_commit_episodes;
        tputs.push_back(r.throughput);
    }
    std::sort(tputs.begin(), tputs.end());

    ordered_json j;
    j["seeds"] = seeds;
    j["pass_count"] = passes;
    j["pass_rate"] = static_cast<double>(passes) / seeds;
    j["async_episodes_total"] = episodes;
    j["coin_commit_episodes"] = coin_commits;
    j["coin_commit_fraction"] =
        episodes == 0 ? 0.0 : static_cast<double>(coin_commits) / static_cast<double>(episodes);
    j["throughput_median_rps"] = tputs.empty() ? 0.0 : tputs[tputs.size() / 2];
    j["per_seed"] = ordered_json::array();
    for (const PerSeed& r : rows) {
        ordered_json row;
        row["seed"] = r.seed;
        row["pass"] = r.pass;
        row["async_episodes"] = r.async_episodes;
        row["coin_commit_episodes"] = r.coin_commit_episodes;
        row["throughput_rps"] = r.throughput;
        row["latency_median_ms"] = r.median;
        j["per_seed"].push_back(row);
    }

    if (!o.out_dir.empty()) {
        fs::create_directories(o.out_dir);
        write_file(fs::path(o.out_dir) / "aggregate.json", j.dump(2));
    }
    if (!o.quiet)
        std::cout << "pass " << passes << "/" << seeds << ", coin-commit fraction "
                  << j["coin_commit_fraction"] << "\n";
    return passes == seeds ? kExitOk : kExitAuditViolation;
}

int cmd_compare(const CommonOpts& o, std::uint32_t seeds) {
    mansim::Scenario base;
    try {
        base = load_with_overrides(o);
        if (base.crashes.empty() && !base.attack.enabled &&
            base.network.async_windows.empty()) {
            std::cerr << "compare expects a scenario with crash or attack content\n";
            return kExitScenarioInvalid;
        }
    } catch (const std::exception& e) {
        std::cerr << "scenario error: " << e.what() << "\n";
        return kExitScenarioInvalid;
    }
    if (seeds == 0) seeds = 1;

    auto max_zero_window_ms = [](const mansim::sim::RunResult& res) {
        std::vector<std::uint64_t> ts = mansim::audit::commit_timeseries(res, 1000);
        mansim::SimTime best = 0, cur = 0;
        for (std::uint64_t v : ts) {
            cur = v == 0 ? cur + 1000 : 0;
            best = std::max(best, cur);
        }
        return best;
    };

    ordered_json per_seed = ordered_json::array();
    double ratio_sum = 0.0;
    std::uint32_t enabled_wins = 0;
    for (std::uint32_t i = 0; i < seeds; ++i) {
        mansim::Scenario on = base, off = base;
        on.seed = off.seed = base.seed + i;
        on.fallback_enabled = true;
        off.fallback_enabled = false;
        mansim::sim::RunResult ron = mansim::sim::run_scenario(on);
        mansim::sim::RunResult roff = mansim::sim::run_scenario(off);
        mansim::audit::Metrics mon = mansim::audit::metrics(ron);
        mansim::audit::Metrics moff = mansim::audit::metrics(roff);
        double ratio = moff.throughput_rps > 0 ? mon.throughput_rps / moff.throughput_rps
                                               : 0.0;
        ratio_sum += ratio;
        if (mon.throughput_rps > moff.throughput_rps) ++enabled_wins;
        ordered_json row;
        row["seed"] = on.seed;
        row["throughput_enabled_rps"] = mon.throughput_rps;
        row["throughput_disabled_rps"] = moff.throughput_rps;
        row["ratio"] = ratio;
        row["stall_enabled_ms"] = max_zero_window_ms(ron);
        row["stall_disabled_ms"] = max_zero_window_ms(roff);
        per_seed.push_back(row);
    }
    ordered_json j;
    j["seeds"] = seeds;
    j["enabled_wins"] = enabled_wins;
    j["mean_throughput_ratio"] = ratio_sum / seeds;
    j["per_seed"] = per_seed;
    if (!o.out_dir.empty()) {
        fs::create_directories(o.out_dir);
        write_file(fs::path(o.out_dir) / "compare.json", j.dump(2));
    }
    if (!o.quiet)
        std::cout << "fallback-enabled wins " << enabled_wins << "/" << seeds
                  << ", mean ratio " << (ratio_sum / seeds) << "\n";
    return kExitOk;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"deterministic consensus + dissemination simulator"};
    app.require_subcommand(1);

    CommonOpts run_opts, battery_opts, compare_opts;
    std::string corrupt;
    std::uint32_t seeds = 0, jobs = 1, compare_seeds = 1;

    CLI::App* run = app.add_subcommand("run", "run one scenario, write trace/report");
    run->add_option("--scenario", run_opts.scenario_path, "scenario JSON path")->required();
    run->add_option("--out", run_opts.out_dir, "output directory");
    run->add_option("--set", run_opts.overrides, "override key=value (repeatable)");
    run->add_flag("--quiet", run_opts.quiet, "suppress stdout summary");
    run->add_option("--debug-corrupt", corrupt,
                    "corrupt the run before auditing (fork-round|round-gap|double-exec)")
        ->check(CLI::IsMember({"fork-round", "round-gap", "double-exec"}));

    CLI::App* battery = app.add_subcommand("battery", "run a scenario under many seeds");
    battery->add_option("--scenario", battery_opts.scenario_path, "scenario JSON path")
        ->required();
    battery->add_option("--seeds", seeds, "number of seeds")->required();
    battery->add_option("--out", battery_opts.out_dir, "output directory");
    battery->add_option("--set", battery_opts.overrides, "override key=value (repeatable)");
    battery->add_option("--jobs", jobs, "parallel simulations");
    battery->add_flag("--quiet", battery_opts.quiet, "suppress stdout summary");

    CLI::App* compare =
        app.add_subcommand("compare", "fallback enabled vs disabled on identical seeds");
    compare->add_option("--scenario", compare_opts.scenario_path, "scenario JSON path")
        ->required();
    compare->add_option("--out", compare_opts.out_dir, "output directory");
    compare->add_option("--seeds", compare_seeds, "seeds per mode");
    compare->add_option("--set", compare_opts.overrides, "override key=value (repeatable)");
    compare->add_flag("--quiet", compare_opts.quiet, "suppress stdout summary");

    CLI11_PARSE(app, argc, argv);

    try {
        if (run->parsed()) return cmd_run(run_opts, corrupt);
        if (battery->parsed()) return cmd_battery(battery_opts, seeds, jobs);
        if (compare->parsed()) return cmd_compare(compare_opts, compare_seeds);
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return kExitScenarioInvalid;
    }
    return kExitOk;
}
