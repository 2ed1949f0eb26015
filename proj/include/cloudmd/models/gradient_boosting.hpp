// SPDX-License-Identifier: Apache-2.0

#pragma once

#include "cloudmd/models/decision_tree.hpp"

namespace cloudmd::models {

struct BoostingParams {
    std::size_t n_stages = 100;
    double learning_rate = 0.1;
    std::size_t max_depth = 3;
    std::size_t min_samples_leaf = 1;
};

/// Logistic-loss gradient boosting with regression trees.
///
/// Each stage fits a squared-error tree to the residuals y - p and sets every
/// leaf to the Newton step sum(r) / sum(p(1-p)). The stage is added with the
/// learning rate; if that would raise the training loss the stage is halved
/// until it does not, so the recorded loss curve never increases.
class GradientBoostingClassifier final : public Classifier {
public:
    explicit GradientBoostingClassifier(BoostingParams p = {}) : params_(p) {}
    ModelKind kind() const override { return ModelKind::GradientBoosting; }
    void fit(const LabeledSet& train, const LabeledSet& val) override;
    double score(std::span<const double> x) const override;
    /// F0 + sum of stage outputs, before the sigmoid.
    double raw_score(std::span<const double> x) const;
    json hyperparams() const override;
    void save_payload(ByteWriter& out) const override;
    void load_payload(ByteReader& in) override;

    double base_score() const noexcept { return base_; }
    /// Mean training log-loss after 0, 1, ..., n stages.
    const std::vector<double>& loss_curve() const noexcept { return loss_curve_; }
    std::size_t stage_count() const noexcept { return stages_.size(); }

private:
    BoostingParams params_;
    double base_ = 0.0;
    bool fitted_ = false;
    std::vector<Tree> stages_;  ///< leaf values already include the learning rate
    std::vector<double> loss_curve_;
};

}  // namespace cloudmd::models
