// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <array>
#include <cstdint>
#include <optional>
#include <random>
#include <string>
#include <variant>
#include <vector>

#include "cloudmd/domain.hpp"

namespace cloudmd::sim {

using Rng = std::mt19937_64;

/// Seeds an independent generator for one named stream of one experiment.
Rng make_stream(std::uint64_t seed, std::uint64_t stream);

/// ON/OFF request source. Period lengths are Pareto(alpha, xm) seconds.
struct TrafficModel {
    double alpha_on = 2.5;
    double alpha_off = 2.5;
    double xm_on = 15.0;
    double xm_off = 15.0;
    double lambda_on = 40.0;  ///< requests per second while ON

    void validate() const;
    bool operator==(const TrafficModel&) const = default;
};

struct AutoscalePolicy {
    double cpu_high = 0.70;
    double cpu_low = 0.40;
    std::size_t min_vms = 2;
    std::size_t max_vms = 10;
    std::size_t cooldown_ticks = 3;

    void validate() const;
    bool operator==(const AutoscalePolicy&) const = default;
};

enum class MalwareCategory : std::uint8_t {
    CpuMiner,
    BeaconBackdoor,
    PortScanner,
    RansomIo,
    TrojanDownloader,
    Worm,
    ProcessInjector,
};

inline constexpr std::array<MalwareCategory, 7> all_categories = {
    MalwareCategory::CpuMiner,      MalwareCategory::BeaconBackdoor,   MalwareCategory::PortScanner,
    MalwareCategory::RansomIo,      MalwareCategory::TrojanDownloader, MalwareCategory::Worm,
    MalwareCategory::ProcessInjector,
};

std::string to_string(MalwareCategory c);
MalwareCategory category_from_string(const std::string& s);

/// Malware runs as its own process.
struct NewProcess {
    std::string name;
    std::string cmdline;
    bool operator==(const NewProcess&) const = default;
};

/// Malware hides behind an existing unique process. An empty target lets the
/// simulator pick one of the monitored VM's persistent processes.
struct InjectInto {
    ProcessKey target;
    bool operator==(const InjectInto&) const = default;
};

using SpawnMode = std::variant<NewProcess, InjectInto>;

struct MalwareProfile {
    MalwareCategory category = MalwareCategory::CpuMiner;
    double intensity = 1.0;  ///< scales every delta; 0 disables the footprint
    SpawnMode spawn;

    /// Category default: its own named process, except ProcessInjector.
    static MalwareProfile for_category(MalwareCategory c, double intensity = 1.0);
    void validate() const;
    bool operator==(const MalwareProfile&) const = default;
};

/// Per-process footprint of one malware category at intensity 1, in schema units.
struct MalwareFootprint {
    std::array<double, feature::count> values{};
    std::size_t instances = 1;
    std::size_t beacon_period_ticks = 0;  ///< >0: cpu/io only on every n-th tick
};
const MalwareFootprint& footprint(MalwareCategory c);

/// Inverse-CDF Pareto draw from a given u in (0, 1].
double pareto_from_uniform(double shape, double xm, double u);
/// Pareto(shape, xm) draw; throws DomainError for shape <= 1 or xm <= 0.
double pareto_sample(double shape, double xm, Rng& rng);

struct TrafficState {
    bool on = false;
    double remaining_s = 0.0;  ///< time left in the current period
};

/// Draws the initial phase in proportion to the mean ON/OFF lengths.
TrafficState initial_traffic_state(const TrafficModel& tm, Rng& rng);

struct TrafficTick {
    std::uint64_t requests = 0;
    double on_seconds = 0.0;
};

/// Advances the ON/OFF process by one interval; requests are Poisson with mean
/// lambda_on times the ON time inside the interval.
TrafficTick traffic_tick(const TrafficModel& tm, TrafficState& state, double interval_s, Rng& rng);

enum class ScaleAction : std::int8_t { ScaleDown = -1, Hold = 0, ScaleUp = 1 };

struct TierStatus {
    double avg_cpu = 0.0;
    std::size_t size = 0;
    std::size_t ticks_since_action = static_cast<std::size_t>(-1);
};

ScaleAction autoscale_step(const TierStatus& tier, const AutoscalePolicy& policy);

struct Vm {
    std::uint32_t id = 0;
    double cpu = 0.0;
    bool infected = false;
};

struct Tier {
    std::vector<Vm> vms;
    std::size_t ticks_since_action = static_cast<std::size_t>(-1);

    double avg_cpu() const;
};

/// Unique process drawn from the benign catalog onto a VM.
struct HostedProcess {
    std::size_t catalog_index = 0;
};

struct ActiveMalware {
    MalwareProfile profile;
    ProcessKey key;  ///< the row it writes into
    double injected_at_s = 0.0;
};

struct StackState {
    Tier web;
    Tier app;
    Tier db;
    std::uint32_t next_vm_id = 0;
    std::uint32_t monitored_vm = 0;
    std::vector<HostedProcess> population;  ///< monitored VM's unique processes
    std::optional<ActiveMalware> malware;
    TrafficState traffic;
    std::size_t tick = 0;
};

struct SimulationConfig {
    ExperimentTimeline timeline;
    TrafficModel traffic;
    AutoscalePolicy policy;
    MalwareProfile malware = MalwareProfile::for_category(MalwareCategory::CpuMiner);
    std::size_t min_processes = 20;
    std::size_t max_processes = 60;
    /// Selects the app VM image (which optional services it runs). Experiments
    /// redeploy the same image, so this does not depend on the experiment seed.
    std::uint64_t image_seed = 0;
    double vm_cores = 2.0;

    void validate() const;
};

/// Marks the monitored app VM infected and fixes the malware's process key.
/// Throws std::logic_error if the app tier is empty.
void inject_malware(StackState& stack, const MalwareProfile& profile, double t, Rng& rng);

struct TickTrace {
    double t = 0.0;
    std::uint64_t requests = 0;
    std::size_t web_size = 0;
    std::size_t app_size = 0;
    double web_cpu = 0.0;
    double app_cpu = 0.0;
    ScaleAction web_action = ScaleAction::Hold;
    ScaleAction app_action = ScaleAction::Hold;
};

struct ExperimentResult {
    std::vector<VmSnapshot> snapshots;
    std::vector<TickTrace> trace;
    double injection_t_s = 0.0;
    ProcessKey malware_key;
};

/// Runs one experiment. Pure function of (config, seed, experiment_id).
ExperimentResult run_experiment(const SimulationConfig& config, std::uint64_t seed,
                                std::uint32_t experiment_id = 0);

/// Size of the benign process catalog.
std::size_t catalog_size();
/// Number of catalog entries every app VM carries.
std::size_t catalog_core_size();

}  // namespace cloudmd::sim
