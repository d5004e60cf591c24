#include "mansim/scenario.hpp"

#include <fstream>
#include <sstream>

#include <json.hpp>

namespace mansim {

namespace {

using nlohmann::json;
using nlohmann::ordered_json;

void reject_unknown(const json& obj, const char* where,
                    std::initializer_list<const char*> allowed) {
    for (const auto& [key, _] : obj.items()) {
        bool ok = false;
        for (const char* a : allowed)
            if (key == a) ok = true;
        if (!ok) throw ScenarioError(std::string("unknown key '") + key + "' in " + where);
    }
}

template <typename T>
void get_if(const json& obj, const char* key, T& out) {
    if (obj.contains(key)) out = obj.at(key).get<T>();
}

}  // namespace

void Scenario::validate() const {
    if (n < 1) throw ScenarioError("n must be >= 1");
    if (n < 2 * f + 1) throw ScenarioError("n >= 2f+1 is required");
    if (duration_ms <= 0) throw ScenarioError("duration_ms must be positive");
    if (timer_ms <= 0) throw ScenarioError("timer_ms must be positive");
    if (heartbeat_interval_ms <= 0) throw ScenarioError("heartbeat_interval_ms must be positive");
    if (network.base_delay_ms < 0 || network.jitter_ms < 0)
        throw ScenarioError("delays must be non-negative");
    if (network.asynchrony_factor < 1)
        throw ScenarioError("asynchrony_factor must be >= 1");
    for (const AsyncWindow& w : network.async_windows)
        if (w.end_ms < w.start_ms) throw ScenarioError("async window end before start");
    for (const CrashEntry& c : crashes) {
        if (c.replica >= n) throw ScenarioError("crash replica out of range");
        if (c.at_ms < 0 || c.at_ms > duration_ms)
            throw ScenarioError("crash time outside the run");
    }
    if (attack.enabled) {
        if (attack.minority_size > f)
            throw ScenarioError("attacked minority must be <= f");
        if (attack.minority_size == 0)
            throw ScenarioError("attack enabled with empty set");
        if (attack.attack_delay_ms < 0 || attack.rotation_period_ms < 0)
            throw ScenarioError("attack delays must be non-negative");
    }
    if (workload.arrival_rate_per_s < 0) throw ScenarioError("arrival rate must be >= 0");
    if (workload.arrival_rate_per_s > 0 && workload.client_batch_size < 1)
        throw ScenarioError("client batch size must be >= 1");
    if (workload.target_policy != "client_mod_n" && workload.target_policy != "round_robin")
        throw ScenarioError("unknown target_policy");
}

Scenario Scenario::from_json(const std::string& text) {
    json j;
    try {
        j = json::parse(text);
    } catch (const std::exception& e) {
        throw ScenarioError(std::string("scenario parse error: ") + e.what());
    }
    Scenario s;
    reject_unknown(j, "scenario",
                   {"n", "f", "seed", "duration_ms", "timer_ms", "fallback_enabled",
                    "selective_broadcast", "heartbeat_interval_ms", "network", "crashes",
                    "attack", "workload"});
    get_if(j, "n", s.n);
    get_if(j, "f", s.f);
    get_if(j, "seed", s.seed);
    get_if(j, "duration_ms", s.duration_ms);
    get_if(j, "timer_ms", s.timer_ms);
    get_if(j, "fallback_enabled", s.fallback_enabled);
    get_if(j, "selective_broadcast", s.selective_broadcast);
    get_if(j, "heartbeat_interval_ms", s.heartbeat_interval_ms);
    if (j.contains("network")) {
        const json& nt = j.at("network");
        reject_unknown(nt, "network",
                       {"base_delay_ms", "jitter_ms", "asynchrony_factor", "gst_ms",
                        "async_windows"});
        get_if(nt, "base_delay_ms", s.network.base_delay_ms);
        get_if(nt, "jitter_ms", s.network.jitter_ms);
        get_if(nt, "asynchrony_factor", s.network.asynchrony_factor);
        get_if(nt, "gst_ms", s.network.gst_ms);
        if (nt.contains("async_windows")) {
            for (const json& w : nt.at("async_windows")) {
                reject_unknown(w, "async_windows[]", {"start_ms", "end_ms"});
                AsyncWindow win;
                get_if(w, "start_ms", win.start_ms);
                get_if(w, "end_ms", win.end_ms);
                s.network.async_windows.push_back(win);
            }
        }
    }
    if (j.contains("crashes")) {
        for (const json& c : j.at("crashes")) {
            reject_unknown(c, "crashes[]", {"at_ms", "replica"});
            CrashEntry e;
            get_if(c, "at_ms", e.at_ms);
            get_if(c, "replica", e.replica);
            s.crashes.push_back(e);
        }
    }
    if (j.contains("attack")) {
        const json& a = j.at("attack");
        reject_unknown(a, "attack",
                       {"enabled", "minority_size", "rotation_period_ms", "attack_delay_ms",
                        "start_ms", "end_ms"});
        get_if(a, "enabled", s.attack.enabled);
        get_if(a, "minority_size", s.attack.minority_size);
        get_if(a, "rotation_period_ms", s.attack.rotation_period_ms);
        get_if(a, "attack_delay_ms", s.attack.attack_delay_ms);
        get_if(a, "start_ms", s.attack.start_ms);
        get_if(a, "end_ms", s.attack.end_ms);
    }
    if (j.contains("workload")) {
        const json& w = j.at("workload");
        reject_unknown(w, "workload",
                       {"arrival_rate_per_s", "client_batch_size", "payload_bytes",
                        "num_clients", "target_policy"});
        get_if(w, "arrival_rate_per_s", s.workload.arrival_rate_per_s);
        get_if(w, "client_batch_size", s.workload.client_batch_size);
        get_if(w, "payload_bytes", s.workload.payload_bytes);
        get_if(w, "num_clients", s.workload.num_clients);
        get_if(w, "target_policy", s.workload.target_policy);
    }
    s.validate();
    return s;
}

Scenario Scenario::load(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw ScenarioError("cannot open scenario file: " + path);
    std::stringstream ss;
    ss << in.rdbuf();
    return from_json(ss.str());
}

std::string Scenario::to_json() const {
    ordered_json j;
    j["n"] = n;
    j["f"] = f;
    j["seed"] = seed;
    j["duration_ms"] = duration_ms;
    j["timer_ms"] = timer_ms;
    j["fallback_enabled"] = fallback_enabled;
    j["selective_broadcast"] = selective_broadcast;
    j["heartbeat_interval_ms"] = heartbeat_interval_ms;
    j["network"]["base_delay_ms"] = network.base_delay_ms;
    j["network"]["jitter_ms"] = network.jitter_ms;
    j["network"]["asynchrony_factor"] = network.asynchrony_factor;
    j["network"]["gst_ms"] = network.gst_ms;
    j["network"]["async_windows"] = ordered_json::array();
    for (const AsyncWindow& w : network.async_windows)
        j["network"]["async_windows"].push_back({{"start_ms", w.start_ms}, {"end_ms", w.end_ms}});
    j["crashes"] = ordered_json::array();
    for (const CrashEntry& c : crashes)
        j["crashes"].push_back({{"at_ms", c.at_ms}, {"replica", c.replica}});
    j["attack"]["enabled"] = attack.enabled;
    j["attack"]["minority_size"] = attack.minority_size;
    j["attack"]["rotation_period_ms"] = attack.rotation_period_ms;
    j["attack"]["attack_delay_ms"] = attack.attack_delay_ms;
    j["attack"]["start_ms"] = attack.start_ms;
    j["attack"]["end_ms"] = attack.end_ms;
    j["workload"]["arrival_rate_per_s"] = workload.arrival_rate_per_s;
    j["workload"]["client_batch_size"] = workload.client_batch_size;
    j["workload"]["payload_bytes"] = workload.payload_bytes;
    j["workload"]["num_clients"] = workload.num_clients;
    j["workload"]["target_policy"] = workload.target_policy;
    return j.dump(2);
}

Scenario Scenario::with_overrides(const Scenario& base,
                                  const std::vector<std::string>& kvs) {
    json j = json::parse(base.to_json());
    for (const std::string& kv : kvs) {
        auto eq = kv.find('=');
        if (eq == std::string::npos)
            throw ScenarioError("override must look like key=value: " + kv);
        std::string path = kv.substr(0, eq);
        std::string value = kv.substr(eq + 1);
        json parsed;
        try {
            parsed = json::parse(value);
        } catch (const std::exception&) {
            parsed = value;  // bare strings allowed
        }
        json* cur = &j;
        std::size_t pos = 0;
        while (true) {
            auto dot = path.find('.', pos);
            std::string key = path.substr(pos, dot == std::string::npos ? dot : dot - pos);
            if (dot == std::string::npos) {
                (*cur)[key] = parsed;
                break;
            }
            cur = &(*cur)[key];
            pos = dot + 1;
        }
    }
    return from_json(j.dump());
}

}  // namespace mansim
