// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstdint>
#include <filesystem>
#include <memory>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "cloudmd/binary_io.hpp"
#include "cloudmd/domain.hpp"
#include "cloudmd/features.hpp"
#include "cloudmd/models/classifier.hpp"

namespace cloudmd::datastore {

namespace fs = std::filesystem;

/// Writes `bytes` to a temporary sibling and renames it over `path`.
void write_file_atomic(const fs::path& path, std::string_view bytes);
/// Whole-file read; StoreError when the file cannot be opened.
std::string read_file(const fs::path& path);

struct Dataset {
    FeatureSchema schema = FeatureSchema::defaults();
    ExperimentTimeline timeline;
    std::uint32_t row_cap = 128;
    std::uint32_t experiment_count = 0;
    std::vector<VmSnapshot> snapshots;

    bool operator==(const Dataset&) const = default;
};

enum class Format { Binary, Text };

/// Binary layout, all integers and doubles little-endian:
///   "CMDS" u32 version=1
///   u32 n_features, then n_features x (u32 length, bytes)
///   f64 duration, interval, benign_end, malicious_start
///   u32 row_cap, u32 experiment_count, u64 record_count, u64 schema_hash
///   record_count x record:
///     u32 experiment_id, u32 vm_id, f64 t, u8 label, u32 n_proc,
///     n_proc x (string name, string cmdline, n_features x f64)
///
/// Text layout: '#'-prefixed header lines followed by one snapshot per line
/// (see format_snapshot_line). Doubles use the shortest round-trip form.
std::string encode_dataset(const Dataset& d, Format format = Format::Binary);
/// Detects the format from the first bytes. With `expected`, a different
/// schema raises SchemaError.
Dataset decode_dataset(std::string_view bytes, const FeatureSchema* expected = nullptr);

void write_dataset(const Dataset& d, const fs::path& path, Format format = Format::Binary);
Dataset read_dataset(const fs::path& path, const FeatureSchema* expected = nullptr);

/// One tab-separated line, no trailing newline:
///   experiment_id vm_id t label n_proc {name cmdline v_1 .. v_F}*
/// Tabs, newlines and backslashes inside names are escaped as \t \n \\.
std::string format_snapshot_line(const VmSnapshot& s);
/// Inverse of format_snapshot_line. Throws FormatError on malformed input or a
/// value count that differs from `feature_count`.
VmSnapshot parse_snapshot_line(std::string_view line, std::size_t feature_count);

struct ExperimentEntry {
    std::uint32_t id = 0;
    std::uint64_t seed = 0;
    std::string category;
    double intensity = 1.0;
    std::string malware_process;  ///< name of the process carrying the footprint
    double injection_t_s = 0.0;
    std::uint64_t snapshot_count = 0;

    bool operator==(const ExperimentEntry&) const = default;
};

struct Manifest {
    std::uint64_t base_seed = 0;
    std::uint64_t schema_hash = 0;
    std::vector<ExperimentEntry> experiments;

    bool operator==(const Manifest&) const = default;
};

void write_manifest(const Manifest& m, const fs::path& path);
Manifest read_manifest(const fs::path& path);
/// Throws StoreError when ids repeat or per-experiment counts disagree with `d`.
void reconcile(const Manifest& m, const Dataset& d);

struct SplitFile {
    std::uint64_t seed = 0;
    features::DatasetSplit split;
};
void write_split(const SplitFile& s, const fs::path& path);
SplitFile read_split(const fs::path& path);

/// A fitted classifier plus everything needed to turn snapshots into its input.
struct TrainedModel {
    std::unique_ptr<models::Classifier> model;
    features::Scaler scaler;
    std::uint32_t row_cap = 128;
    std::uint64_t schema_hash = 0;
};

/// Layout: "CMDM" u32 version=1, u8 kind, u64 schema_hash, string hyperparams JSON,
/// u32 row_cap, scaler (vector min, vector max), string payload.
std::string encode_model(const TrainedModel& m);
/// Throws KindMismatchError when `expected_kind` is set and differs, SchemaError
/// when `expected_schema_hash` is set and differs.
TrainedModel decode_model(std::string_view bytes, std::optional<models::ModelKind> expected_kind = {},
                          std::optional<std::uint64_t> expected_schema_hash = {});

void save_model(const TrainedModel& m, const fs::path& path);
TrainedModel load_model(const fs::path& path, std::optional<models::ModelKind> expected_kind = {},
                        std::optional<std::uint64_t> expected_schema_hash = {});

}  // namespace cloudmd::datastore
