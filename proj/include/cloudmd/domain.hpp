// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstdint>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

namespace cloudmd {

/// Raised when a value lies outside the domain of an operation.
class DomainError : public std::invalid_argument {
public:
    using std::invalid_argument::invalid_argument;
};

/// Raised for inconsistent or unusable configuration.
class ConfigError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

enum class Label : std::uint8_t { Benign = 0, Infected = 1, InjectionWindow = 2 };

std::string_view to_string(Label label);
Label label_from_string(std::string_view text);

/// Ordered list of per-process metric names. Immutable once built.
class FeatureSchema {
public:
    explicit FeatureSchema(std::vector<std::string> names);

    /// The ten default metrics: cpu, memory, io and count features.
    static FeatureSchema defaults();

    const std::vector<std::string>& names() const noexcept { return names_; }
    std::size_t size() const noexcept { return names_.size(); }
    /// Index of a named feature; throws DomainError when absent.
    std::size_t index_of(std::string_view name) const;
    /// FNV-1a over the ordered names; stamped into dataset and model headers.
    std::uint64_t hash() const noexcept;

    bool operator==(const FeatureSchema&) const = default;

private:
    std::vector<std::string> names_;
};

// Column positions in the default schema.
namespace feature {
inline constexpr std::size_t cpu_user = 0;
inline constexpr std::size_t cpu_system = 1;
inline constexpr std::size_t mem_rss = 2;
inline constexpr std::size_t mem_virt = 3;
inline constexpr std::size_t io_read_bytes = 4;
inline constexpr std::size_t io_write_bytes = 5;
inline constexpr std::size_t io_read_ops = 6;
inline constexpr std::size_t io_write_ops = 7;
inline constexpr std::size_t threads = 8;
inline constexpr std::size_t open_fds = 9;
inline constexpr std::size_t count = 10;
}  // namespace feature

/// Unique-process key: (process name, command line).
struct ProcessKey {
    std::string name;
    std::string cmdline;

    auto operator<=>(const ProcessKey&) const = default;
};

struct ProcessRecord {
    std::string name;
    std::string cmdline;
    std::vector<double> values;

    ProcessKey key() const { return {name, cmdline}; }
    bool operator==(const ProcessRecord&) const = default;
};

struct VmSnapshot {
    std::uint32_t experiment_id = 0;
    std::uint32_t vm_id = 0;
    double t = 0.0;
    std::vector<ProcessRecord> processes;
    Label label = Label::Benign;

    bool operator==(const VmSnapshot&) const = default;
};

/// Phase boundaries of one experiment, in seconds since start.
struct ExperimentTimeline {
    double duration_s = 3600.0;
    double sample_interval_s = 10.0;
    double benign_end_s = 1800.0;
    double malicious_start_s = 2400.0;

    /// Throws ConfigError when the ordering or divisibility invariants fail.
    void validate() const;
    /// Number of sample ticks: duration / interval.
    std::size_t tick_count() const;
    /// Time of tick i.
    double tick_time(std::size_t i) const { return static_cast<double>(i) * sample_interval_s; }

    bool operator==(const ExperimentTimeline&) const = default;
};

/// Ground-truth phase of time t. Throws DomainError for t outside [0, duration].
Label label_for_time(double t, const ExperimentTimeline& tl);

/// Returns every invariant violation of s; empty when well formed.
/// Timeline alignment is only checked when tl is given.
std::vector<std::string> validate_snapshot(const VmSnapshot& s, const FeatureSchema& schema,
                                           const ExperimentTimeline* tl = nullptr);

}  // namespace cloudmd
