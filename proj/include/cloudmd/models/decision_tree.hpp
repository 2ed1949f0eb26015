// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstdint>
#include <random>
#include <span>
#include <vector>

#include "cloudmd/models/classifier.hpp"

namespace cloudmd::models {

struct TreeNode {
    std::int32_t feature = -1;  ///< -1 marks a leaf
    double threshold = 0.0;     ///< x[feature] <= threshold goes left
    std::int32_t left = -1;
    std::int32_t right = -1;
    double value = 0.0;  ///< leaf output (class-1 fraction or regression value)

    bool is_leaf() const noexcept { return feature < 0; }
};

/// Flat binary tree; node 0 is the root.
class Tree {
public:
    std::vector<TreeNode> nodes;

    double predict(std::span<const double> x) const;
    std::size_t depth() const;
    std::size_t leaf_count() const;

    void save(ByteWriter& out) const;
    static Tree load(ByteReader& in);
};

/// Row-major sample matrix plus, per feature, the sample order by value.
/// Built once and shared by every tree of an ensemble.
class SortedColumns {
public:
    SortedColumns(std::span<const double> x, std::size_t n, std::size_t dim);

    double at(std::size_t i, std::size_t f) const { return x_[i * dim_ + f]; }
    std::span<const std::uint32_t> order(std::size_t f) const { return {order_.data() + f * n_, n_}; }
    /// Features that take more than one value over the samples.
    const std::vector<std::uint32_t>& varying() const noexcept { return varying_; }
    std::size_t size() const noexcept { return n_; }
    std::size_t dim() const noexcept { return dim_; }

private:
    std::span<const double> x_;
    std::size_t n_;
    std::size_t dim_;
    std::vector<std::uint32_t> order_;
    std::vector<std::uint32_t> varying_;
};

enum class SplitCriterion : std::uint8_t {
    Gini,          ///< targets are 0/1 labels
    SquaredError,  ///< targets are real residuals
};

struct GrowOptions {
    SplitCriterion criterion = SplitCriterion::Gini;
    std::size_t max_depth = 16;
    double min_samples_leaf = 2;  ///< in units of sample weight
    std::size_t max_features = 0;  ///< 0 or >= varying count: every varying feature, in index order
};

/// Grows one CART tree. `weights` (bootstrap multiplicities) may be empty for all-ones;
/// zero-weight samples are ignored. Leaves hold the weighted mean target.
/// `rng` is required only when max_features subsamples.
Tree grow_tree(const SortedColumns& cols, std::span<const double> targets, std::span<const double> weights,
               const GrowOptions& options, std::mt19937_64* rng);

struct TreeParams {
    std::size_t max_depth = 16;
    std::size_t min_samples_leaf = 2;
};

/// Single CART classifier over every feature; score is the leaf's infected fraction.
class DecisionTreeClassifier final : public Classifier {
public:
    explicit DecisionTreeClassifier(TreeParams p = {}) : params_(p) {}
    ModelKind kind() const override { return ModelKind::DecisionTree; }
    void fit(const LabeledSet& train, const LabeledSet& val) override;
    double score(std::span<const double> x) const override;
    json hyperparams() const override;
    void save_payload(ByteWriter& out) const override;
    void load_payload(ByteReader& in) override;

    const Tree& tree() const noexcept { return tree_; }

private:
    TreeParams params_;
    Tree tree_;
};

}  // namespace cloudmd::models
