// SPDX-License-Identifier: Apache-2.0

#include "cloudmd/config.hpp"

#include <charconv>
#include <fstream>
#include <sstream>

namespace cloudmd {

namespace {

std::string trim(const std::string& s) {
    const auto b = s.find_first_not_of(" \t\r");
    if (b == std::string::npos) return {};
    const auto e = s.find_last_not_of(" \t\r");
    return s.substr(b, e - b + 1);
}

}  // namespace

KeyValueConfig KeyValueConfig::parse(const std::string& text) {
    KeyValueConfig cfg;
    std::istringstream in(text);
    std::string line;
    std::size_t lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        const std::string t = trim(line);
        if (t.empty() || t.front() == '#') continue;
        const auto eq = t.find('=');
        if (eq == std::string::npos)
            throw ConfigError("config line " + std::to_string(lineno) + ": expected key = value");
        const std::string key = trim(t.substr(0, eq));
        if (key.empty()) throw ConfigError("config line " + std::to_string(lineno) + ": empty key");
        cfg.values_[key] = trim(t.substr(eq + 1));
    }
    return cfg;
}

KeyValueConfig KeyValueConfig::load(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw ConfigError("cannot open config file " + path);
    std::stringstream ss;
    ss << in.rdbuf();
    return parse(ss.str());
}

bool KeyValueConfig::has(const std::string& key) const { return values_.count(key) != 0; }

std::optional<std::string> KeyValueConfig::get(const std::string& key) const {
    auto it = values_.find(key);
    if (it == values_.end()) return std::nullopt;
    read_.insert(key);
    return it->second;
}

double KeyValueConfig::get_double(const std::string& key, double fallback) const {
    auto v = get(key);
    if (!v) return fallback;
    double out = 0.0;
    auto [p, ec] = std::from_chars(v->data(), v->data() + v->size(), out);
    if (ec != std::errc() || p != v->data() + v->size())
        throw ConfigError("config key " + key + ": '" + *v + "' is not a number");
    return out;
}

std::int64_t KeyValueConfig::get_int(const std::string& key, std::int64_t fallback) const {
    auto v = get(key);
    if (!v) return fallback;
    std::int64_t out = 0;
    auto [p, ec] = std::from_chars(v->data(), v->data() + v->size(), out);
    if (ec != std::errc() || p != v->data() + v->size())
        throw ConfigError("config key " + key + ": '" + *v + "' is not an integer");
    return out;
}

std::uint64_t KeyValueConfig::get_uint(const std::string& key, std::uint64_t fallback) const {
    const std::int64_t v = get_int(key, static_cast<std::int64_t>(fallback));
    if (v < 0) throw ConfigError("config key " + key + " must be non-negative");
    return static_cast<std::uint64_t>(v);
}

bool KeyValueConfig::get_bool(const std::string& key, bool fallback) const {
    auto v = get(key);
    if (!v) return fallback;
    if (*v == "true" || *v == "1" || *v == "yes") return true;
    if (*v == "false" || *v == "0" || *v == "no") return false;
    throw ConfigError("config key " + key + ": '" + *v + "' is not a boolean");
}

std::string KeyValueConfig::get_string(const std::string& key, const std::string& fallback) const {
    return get(key).value_or(fallback);
}

std::vector<std::string> KeyValueConfig::unread_keys() const {
    std::vector<std::string> out;
    for (const auto& [k, v] : values_)
        if (!read_.count(k)) out.push_back(k);
    return out;
}

void KeyValueConfig::reject_unread() const {
    const auto keys = unread_keys();
    if (keys.empty()) return;
    std::string msg = "unknown config key(s):";
    for (const auto& k : keys) msg += " " + k;
    throw ConfigError(msg);
}

sim::SimulationConfig apply_simulation_keys(const KeyValueConfig& kv, sim::SimulationConfig c) {
    auto& tl = c.timeline;
    tl.duration_s = kv.get_double("timeline.duration_s", tl.duration_s);
    tl.sample_interval_s = kv.get_double("timeline.sample_interval_s", tl.sample_interval_s);
    tl.benign_end_s = kv.get_double("timeline.benign_end_s", tl.benign_end_s);
    tl.malicious_start_s = kv.get_double("timeline.malicious_start_s", tl.malicious_start_s);

    auto& tr = c.traffic;
    tr.alpha_on = kv.get_double("traffic.alpha_on", tr.alpha_on);
    tr.alpha_off = kv.get_double("traffic.alpha_off", tr.alpha_off);
    tr.xm_on = kv.get_double("traffic.xm_on", tr.xm_on);
    tr.xm_off = kv.get_double("traffic.xm_off", tr.xm_off);
    tr.lambda_on = kv.get_double("traffic.lambda_on", tr.lambda_on);

    auto& po = c.policy;
    po.cpu_high = kv.get_double("policy.cpu_high", po.cpu_high);
    po.cpu_low = kv.get_double("policy.cpu_low", po.cpu_low);
    po.min_vms = kv.get_uint("policy.min_vms", po.min_vms);
    po.max_vms = kv.get_uint("policy.max_vms", po.max_vms);
    po.cooldown_ticks = kv.get_uint("policy.cooldown_ticks", po.cooldown_ticks);

    if (auto cat = kv.get("malware.category")) {
        const double intensity = c.malware.intensity;
        c.malware = sim::MalwareProfile::for_category(sim::category_from_string(*cat), intensity);
    }
    c.malware.intensity = kv.get_double("malware.intensity", c.malware.intensity);
    if (auto spawn = kv.get("malware.spawn")) {
        if (*spawn == "new") {
            auto np = std::holds_alternative<sim::NewProcess>(c.malware.spawn)
                          ? std::get<sim::NewProcess>(c.malware.spawn)
                          : sim::NewProcess{"malware", "./malware"};
            c.malware.spawn = np;
        } else if (*spawn == "inject") {
            if (!std::holds_alternative<sim::InjectInto>(c.malware.spawn)) c.malware.spawn = sim::InjectInto{};
        } else {
            throw ConfigError("malware.spawn must be 'new' or 'inject'");
        }
    }
    if (auto* np = std::get_if<sim::NewProcess>(&c.malware.spawn)) {
        np->name = kv.get_string("malware.process_name", np->name);
        np->cmdline = kv.get_string("malware.cmdline", np->cmdline);
    } else {
        auto& target = std::get<sim::InjectInto>(c.malware.spawn).target;
        target.name = kv.get_string("malware.target_name", target.name);
        target.cmdline = kv.get_string("malware.target_cmdline", target.cmdline);
    }

    c.min_processes = kv.get_uint("population.min_processes", c.min_processes);
    c.max_processes = kv.get_uint("population.max_processes", c.max_processes);
    c.image_seed = kv.get_uint("population.image_seed", c.image_seed);
    c.vm_cores = kv.get_double("vm.cores", c.vm_cores);
    return c;
}

}  // namespace cloudmd
