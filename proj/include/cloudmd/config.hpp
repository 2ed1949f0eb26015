// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include "cloudmd/simulator.hpp"

namespace cloudmd {

/// Flat `key = value` configuration. Lines starting with '#' are comments.
///
/// Recognized simulation keys:
///   timeline.duration_s, timeline.sample_interval_s, timeline.benign_end_s, timeline.malicious_start_s
///   traffic.alpha_on, traffic.alpha_off, traffic.xm_on, traffic.xm_off, traffic.lambda_on
///   policy.cpu_high, policy.cpu_low, policy.min_vms, policy.max_vms, policy.cooldown_ticks
///   malware.category, malware.intensity, malware.spawn (new|inject),
///   malware.process_name, malware.cmdline, malware.target_name, malware.target_cmdline
///   population.min_processes, population.max_processes, population.image_seed, vm.cores
/// Other subsystems read their own keys (seed, experiments, features.*, ...).
class KeyValueConfig {
public:
    static KeyValueConfig parse(const std::string& text);
    static KeyValueConfig load(const std::string& path);

    bool has(const std::string& key) const;
    std::optional<std::string> get(const std::string& key) const;
    double get_double(const std::string& key, double fallback) const;
    std::int64_t get_int(const std::string& key, std::int64_t fallback) const;
    std::uint64_t get_uint(const std::string& key, std::uint64_t fallback) const;
    bool get_bool(const std::string& key, bool fallback) const;
    std::string get_string(const std::string& key, const std::string& fallback) const;

    void set(const std::string& key, const std::string& value) { values_[key] = value; }
    const std::map<std::string, std::string>& values() const noexcept { return values_; }

    /// Keys that were never read through a getter.
    std::vector<std::string> unread_keys() const;
    /// Throws ConfigError naming every unread key.
    void reject_unread() const;

private:
    std::map<std::string, std::string> values_;
    mutable std::set<std::string> read_;
};

/// Overrides fields of `base` with any simulation keys present in `kv`.
sim::SimulationConfig apply_simulation_keys(const KeyValueConfig& kv, sim::SimulationConfig base);

}  // namespace cloudmd
