// SPDX-License-Identifier: Apache-2.0

#pragma once

#include "cloudmd/models/decision_tree.hpp"

namespace cloudmd::models {

struct ForestParams {
    std::size_t n_trees = 100;
    std::size_t max_depth = 16;
    std::size_t min_samples_leaf = 2;
    std::size_t max_features = 0;  ///< 0: floor(sqrt(dim)); >= dim: all features
    bool bootstrap = true;
    std::uint64_t seed = 0;
};

/// Bagged Gini trees with per-split feature subsampling. Score is the fraction
/// of trees voting infected.
class RandomForestClassifier final : public Classifier {
public:
    explicit RandomForestClassifier(ForestParams p = {}) : params_(p) {}
    ModelKind kind() const override { return ModelKind::RandomForest; }
    void fit(const LabeledSet& train, const LabeledSet& val) override;
    double score(std::span<const double> x) const override;
    json hyperparams() const override;
    void save_payload(ByteWriter& out) const override;
    void load_payload(ByteReader& in) override;

    const std::vector<Tree>& trees() const noexcept { return trees_; }

private:
    ForestParams params_;
    std::vector<Tree> trees_;
};

}  // namespace cloudmd::models
