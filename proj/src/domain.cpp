// SPDX-License-Identifier: Apache-2.0

#include "cloudmd/domain.hpp"

#include <cmath>
#include <unordered_set>

namespace cloudmd {

std::string_view to_string(Label label) {
    switch (label) {
    case Label::Benign: return "benign";
    case Label::Infected: return "infected";
    case Label::InjectionWindow: return "window";
    }
    return "?";
}

Label label_from_string(std::string_view text) {
    if (text == "benign") return Label::Benign;
    if (text == "infected") return Label::Infected;
    if (text == "window") return Label::InjectionWindow;
    throw DomainError("unknown label '" + std::string(text) + "'");
}

FeatureSchema::FeatureSchema(std::vector<std::string> names) : names_(std::move(names)) {
    if (names_.empty()) throw DomainError("feature schema needs at least one feature");
    std::unordered_set<std::string> seen;
    for (const auto& n : names_) {
        if (n.empty()) throw DomainError("empty feature name");
        if (!seen.insert(n).second) throw DomainError("duplicate feature name '" + n + "'");
    }
}

FeatureSchema FeatureSchema::defaults() {
    return FeatureSchema({"cpu_user_frac", "cpu_system_frac", "mem_rss_bytes", "mem_virt_bytes",
                          "io_read_bytes_s", "io_write_bytes_s", "io_read_ops_s", "io_write_ops_s",
                          "thread_count", "open_fd_count"});
}

std::size_t FeatureSchema::index_of(std::string_view name) const {
    for (std::size_t i = 0; i < names_.size(); ++i)
        if (names_[i] == name) return i;
    throw DomainError("feature '" + std::string(name) + "' not in schema");
}

std::uint64_t FeatureSchema::hash() const noexcept {
    std::uint64_t h = 1469598103934665603ull;
    auto mix = [&h](unsigned char c) {
        h ^= c;
        h *= 1099511628211ull;
    };
    for (const auto& n : names_) {
        for (unsigned char c : n) mix(c);
        mix(0);
    }
    return h;
}

void ExperimentTimeline::validate() const {
    if (!(sample_interval_s > 0.0)) throw ConfigError("sample interval must be positive");
    if (!(benign_end_s > 0.0 && benign_end_s < malicious_start_s && malicious_start_s <= duration_s))
        throw ConfigError("timeline needs 0 < benign_end < malicious_start <= duration");
    const double ticks = duration_s / sample_interval_s;
    if (std::abs(ticks - std::round(ticks)) > 1e-9)
        throw ConfigError("duration must be a multiple of the sample interval");
}

std::size_t ExperimentTimeline::tick_count() const {
    return static_cast<std::size_t>(std::llround(duration_s / sample_interval_s));
}

Label label_for_time(double t, const ExperimentTimeline& tl) {
    if (!(t >= 0.0 && t <= tl.duration_s))
        throw DomainError("time " + std::to_string(t) + " outside experiment duration");
    if (t < tl.benign_end_s) return Label::Benign;
    if (t >= tl.malicious_start_s) return Label::Infected;
    return Label::InjectionWindow;
}

std::vector<std::string> validate_snapshot(const VmSnapshot& s, const FeatureSchema& schema,
                                           const ExperimentTimeline* tl) {
    std::vector<std::string> out;
    if (!(s.t >= 0.0) || !std::isfinite(s.t)) out.push_back("time must be finite and non-negative");
    if (tl != nullptr && std::isfinite(s.t) && s.t >= 0.0) {
        const double k = s.t / tl->sample_interval_s;
        if (std::abs(k - std::round(k)) > 1e-9) out.push_back("time is not on a sample tick");
        if (s.t > tl->duration_s) {
            out.push_back("time beyond experiment duration");
        } else if (label_for_time(s.t, *tl) != s.label) {
            out.push_back("label disagrees with the experiment timeline");
        }
    }
    for (std::size_t p = 0; p < s.processes.size(); ++p) {
        const auto& rec = s.processes[p];
        const std::string where = "process " + std::to_string(p) + " (" + rec.name + ")";
        if (rec.values.size() != schema.size()) {
            out.push_back(where + ": expected " + std::to_string(schema.size()) + " values, got " +
                          std::to_string(rec.values.size()));
            continue;
        }
        for (std::size_t f = 0; f < rec.values.size(); ++f) {
            const double v = rec.values[f];
            if (!std::isfinite(v))
                out.push_back(where + ": " + schema.names()[f] + " is not finite");
            else if (v < 0.0)
                out.push_back(where + ": " + schema.names()[f] + " is negative");
        }
    }
    return out;
}

}  // namespace cloudmd
