// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <array>
#include <optional>
#include <cstdint>
#include <span>
#include <vector>

#include "cloudmd/domain.hpp"

namespace cloudmd::features {

/// One (name, cmdline) cluster; values are the component-wise mean of its records.
struct UniqueProcessRow {
    ProcessKey key;
    std::vector<double> values;
    std::size_t multiplicity = 1;

    bool operator==(const UniqueProcessRow&) const = default;
};

/// Groups records by key and averages them. Output is sorted by key.
std::vector<UniqueProcessRow> aggregate_unique(std::span<const ProcessRecord> processes);

/// Fixed-shape P x F matrix, row-major. Rows past row_keys.size() are zero.
struct SampleMatrix {
    std::size_t rows = 0;
    std::size_t cols = 0;
    std::vector<double> data;
    std::vector<ProcessKey> row_keys;
    Label label = Label::Benign;

    double at(std::size_t r, std::size_t c) const { return data[r * cols + c]; }
    double& at(std::size_t r, std::size_t c) { return data[r * cols + c]; }
    std::size_t populated() const noexcept { return row_keys.size(); }
};

struct BuildStats {
    std::size_t truncations = 0;  ///< matrices that had to drop rows
    std::size_t dropped_rows = 0;
};

/// Lays rows into a cap x feature_count matrix in key order. When there are more
/// rows than the cap, the rows with the largest `priority_feature` value survive.
SampleMatrix build_matrix(std::span<const UniqueProcessRow> rows, std::size_t cap, std::size_t feature_count,
                          BuildStats* stats = nullptr, std::size_t priority_feature = feature::cpu_user);

/// Per-feature min-max normalizer fitted on training matrices.
struct Scaler {
    std::vector<double> min;
    std::vector<double> max;

    /// (x - min) / (max - min) clamped to [0, 1]; constant features map to 0.
    double scale(std::size_t feature, double x) const;
    bool operator==(const Scaler&) const = default;
};

/// Fits over the populated rows of every matrix. Throws DomainError if `train` is empty.
Scaler fit_scaler(std::span<const SampleMatrix> train);
/// Scales populated rows; padding rows stay exactly zero.
SampleMatrix apply_scaler(const Scaler& s, const SampleMatrix& m);

struct SplitRatios {
    double train = 0.70;
    double val = 0.15;
    double test = 0.15;
};

struct DatasetSplit {
    std::vector<std::uint32_t> train;
    std::vector<std::uint32_t> val;
    std::vector<std::uint32_t> test;
    SplitRatios ratios;

    bool operator==(const DatasetSplit& o) const {
        return train == o.train && val == o.val && test == o.test;
    }
};

/// Shuffles experiment ids by seed and partitions them whole.
///
/// Sizes: val = max(1, round(n * ratios.val)), test = max(1, round(n * ratios.test)),
/// train takes the remainder. 113 experiments give 79/17/17; 10 give 6/2/2.
/// Throws DomainError for fewer than 3 experiments or ratios not summing to 1.
DatasetSplit split_dataset(std::vector<std::uint32_t> experiment_ids, SplitRatios ratios, std::uint64_t seed);

/// Flattened samples ready for the classifiers.
struct LabeledSet {
    std::size_t rows = 0;  ///< matrix height P
    std::size_t cols = 0;  ///< matrix width F
    std::vector<double> x;
    std::vector<int> y;  ///< 1 = infected
    std::vector<std::uint32_t> experiment;
    std::vector<double> t;

    std::size_t dim() const noexcept { return rows * cols; }
    std::size_t size() const noexcept { return y.size(); }
    std::span<const double> sample(std::size_t i) const { return {x.data() + i * dim(), dim()}; }
    void push(const SampleMatrix& m, std::uint32_t experiment_id, double time);
    /// Subset by sample index.
    LabeledSet select(std::span<const std::size_t> indices) const;
};

struct PipelineOptions {
    std::size_t row_cap = 128;
    bool fold_window = false;  ///< treat injection-window snapshots as infected
};

/// Returns the training label for a snapshot, or nothing when it is excluded.
std::optional<Label> training_label(Label l, bool fold_window);

/// Snapshot -> unscaled matrix; nullopt when the snapshot is excluded from training.
std::optional<SampleMatrix> snapshot_matrix(const VmSnapshot& s, std::size_t feature_count,
                                            const PipelineOptions& options, BuildStats* stats = nullptr);

}  // namespace cloudmd::features
