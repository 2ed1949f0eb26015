// SPDX-License-Identifier: Apache-2.0

#pragma once

#include "cloudmd/models/classifier.hpp"

namespace cloudmd::models {

struct SvcParams {
    double lambda = 1e-4;
    std::size_t epochs = 20;
    std::size_t rff_dim = 0;  ///< 0: linear; otherwise random Fourier features approximating an RBF kernel
    double gamma = 0.0;       ///< RBF width; 0 picks 1 / (dim * var(X))
    std::uint64_t seed = 0;
};

/// Soft-margin SVM trained with Pegasos stochastic subgradient steps.
///
/// The bias is learned as the weight of an extra constant feature whose value is
/// the largest feature-vector norm in training, so it is regularized on the same
/// scale as the other weights.
class SvcClassifier final : public Classifier {
public:
    explicit SvcClassifier(SvcParams p = {}) : params_(p) {}
    ModelKind kind() const override { return ModelKind::Svc; }
    void fit(const LabeledSet& train, const LabeledSet& val) override;
    /// sigmoid(margin)
    double score(std::span<const double> x) const override;
    double margin(std::span<const double> x) const;
    json hyperparams() const override;
    void save_payload(ByteWriter& out) const override;
    void load_payload(ByteReader& in) override;

    double gamma() const noexcept { return gamma_; }

private:
    void features(std::span<const double> x, std::vector<double>& out) const;

    SvcParams params_;
    std::size_t dim_ = 0;
    double gamma_ = 0.0;
    std::vector<double> omega_;  ///< rff_dim x dim, row-major
    std::vector<double> phase_;
    double bias_feature_ = 1.0;
    std::vector<double> w_;  ///< feature weights then the bias weight
};

}  // namespace cloudmd::models
