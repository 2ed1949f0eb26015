// SPDX-License-Identifier: Apache-2.0

#include "cloudmd/models/knn.hpp"

#include <algorithm>

namespace cloudmd::models {

void KnnClassifier::fit(const LabeledSet& train, const LabeledSet&) {
    detail::require_trainable(train, "knn");
    if (params_.k == 0) throw DomainError("knn needs k >= 1");
    if (params_.k > train.size())
        throw DomainError("knn k=" + std::to_string(params_.k) + " exceeds training size " +
                          std::to_string(train.size()));
    dim_ = train.dim();
    x_ = train.x;
    y_ = train.y;
}

std::vector<std::size_t> KnnClassifier::neighbors(std::span<const double> x) const {
    if (y_.empty()) throw std::logic_error("knn is not fitted");
    if (x.size() != dim_) throw DomainError("knn query has the wrong dimension");
    const std::size_t n = y_.size();
    std::vector<std::pair<double, std::size_t>> dist(n);
    for (std::size_t i = 0; i < n; ++i) {
        const double* row = x_.data() + i * dim_;
        double d = 0.0;
        for (std::size_t j = 0; j < dim_; ++j) {
            const double diff = row[j] - x[j];
            d += diff * diff;
        }
        dist[i] = {d, i};
    }
    const std::size_t k = params_.k;
    std::partial_sort(dist.begin(), dist.begin() + static_cast<std::ptrdiff_t>(k), dist.end());
    std::vector<std::size_t> out(k);
    for (std::size_t i = 0; i < k; ++i) out[i] = dist[i].second;
    return out;
}

double KnnClassifier::score(std::span<const double> x) const {
    const auto nn = neighbors(x);
    std::size_t infected = 0;
    for (auto i : nn) infected += static_cast<std::size_t>(y_[i]);
    return static_cast<double>(infected) / static_cast<double>(nn.size());
}

json KnnClassifier::hyperparams() const { return {{"k", params_.k}}; }

void KnnClassifier::save_payload(ByteWriter& out) const {
    out.put<std::uint64_t>(dim_);
    out.put_vector(x_);
    out.put<std::uint64_t>(y_.size());
    for (int v : y_) out.put<std::uint8_t>(static_cast<std::uint8_t>(v));
}

void KnnClassifier::load_payload(ByteReader& in) {
    dim_ = in.get<std::uint64_t>();
    x_ = in.get_vector<double>();
    const auto n = in.get<std::uint64_t>();
    if (dim_ == 0 || n == 0 || x_.size() != n * dim_) throw FormatError("knn payload shape mismatch");
    y_.resize(n);
    for (auto& v : y_) v = in.get<std::uint8_t>();
}

}  // namespace cloudmd::models
