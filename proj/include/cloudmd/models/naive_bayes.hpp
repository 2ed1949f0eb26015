// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <array>

#include "cloudmd/models/classifier.hpp"

namespace cloudmd::models {

struct NaiveBayesParams {
    double var_smoothing = 1e-9;  ///< fraction of the largest feature variance added to every variance
};

/// Gaussian naive Bayes with per-class, per-feature mean and variance.
class GaussianNbClassifier final : public Classifier {
public:
    explicit GaussianNbClassifier(NaiveBayesParams p = {}) : params_(p) {}
    ModelKind kind() const override { return ModelKind::GaussianNb; }
    void fit(const LabeledSet& train, const LabeledSet& val) override;
    /// Posterior P(infected | x).
    double score(std::span<const double> x) const override;
    json hyperparams() const override;
    void save_payload(ByteWriter& out) const override;
    void load_payload(ByteReader& in) override;

    /// log P(c) + sum_j log N(x_j; mean_cj, var_cj) for c = 0, 1.
    std::array<double, 2> log_joint(std::span<const double> x) const;
    double epsilon() const noexcept { return epsilon_; }
    std::span<const double> mean(int c) const { return mean_[static_cast<std::size_t>(c)]; }
    std::span<const double> variance(int c) const { return var_[static_cast<std::size_t>(c)]; }
    double prior(int c) const { return prior_[static_cast<std::size_t>(c)]; }

private:
    NaiveBayesParams params_;
    std::size_t dim_ = 0;
    double epsilon_ = 0.0;
    std::array<double, 2> prior_{};
    std::array<std::vector<double>, 2> mean_;
    std::array<std::vector<double>, 2> var_;  ///< smoothed
    std::array<double, 2> log_norm_{};        ///< log prior - 0.5 sum log(2 pi var)
};

}  // namespace cloudmd::models
