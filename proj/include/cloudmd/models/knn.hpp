// SPDX-License-Identifier: Apache-2.0

#pragma once

#include "cloudmd/models/classifier.hpp"

namespace cloudmd::models {

struct KnnParams {
    std::size_t k = 5;
};

/// Exact Euclidean k-nearest-neighbour vote. Distance ties go to the lower
/// training index.
class KnnClassifier final : public Classifier {
public:
    explicit KnnClassifier(KnnParams p = {}) : params_(p) {}
    ModelKind kind() const override { return ModelKind::Knn; }
    void fit(const LabeledSet& train, const LabeledSet& val) override;
    /// Fraction of the k nearest training samples labelled infected.
    double score(std::span<const double> x) const override;
    json hyperparams() const override;
    void save_payload(ByteWriter& out) const override;
    void load_payload(ByteReader& in) override;

    /// Training indices of the k nearest samples, nearest first.
    std::vector<std::size_t> neighbors(std::span<const double> x) const;

private:
    KnnParams params_;
    std::size_t dim_ = 0;
    std::vector<double> x_;
    std::vector<int> y_;
};

}  // namespace cloudmd::models
