// SPDX-License-Identifier: Apache-2.0

#include "cloudmd/models/svc.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <numeric>
#include <random>

namespace cloudmd::models {

void SvcClassifier::features(std::span<const double> x, std::vector<double>& out) const {
    const std::size_t D = params_.rff_dim;
    if (D == 0) {
        out.assign(x.begin(), x.end());
    } else {
        out.resize(D);
        const double amp = std::sqrt(2.0 / static_cast<double>(D));
        for (std::size_t k = 0; k < D; ++k) {
            const double* row = omega_.data() + k * dim_;
            double s = phase_[k];
            for (std::size_t j = 0; j < dim_; ++j) s += row[j] * x[j];
            out[k] = amp * std::cos(s);
        }
    }
    out.push_back(bias_feature_);
}

void SvcClassifier::fit(const LabeledSet& train, const LabeledSet&) {
    detail::require_trainable(train, "svc");
    if (!(params_.lambda > 0.0)) throw DomainError("svc lambda must be positive");
    if (params_.epochs == 0) throw DomainError("svc needs at least one epoch");
    if (params_.gamma < 0.0) throw DomainError("svc gamma must be non-negative");
    const std::size_t n = train.size();
    dim_ = train.dim();
    std::mt19937_64 rng(params_.seed);

    omega_.clear();
    phase_.clear();
    gamma_ = 0.0;
    if (params_.rff_dim > 0) {
        gamma_ = params_.gamma;
        if (gamma_ == 0.0) {
            const double count = static_cast<double>(train.x.size());
            const double mean = std::accumulate(train.x.begin(), train.x.end(), 0.0) / count;
            double var = 0.0;
            for (double v : train.x) var += (v - mean) * (v - mean);
            var /= count;
            gamma_ = var > 0.0 ? 1.0 / (static_cast<double>(dim_) * var) : 1.0;
        }
        std::normal_distribution<double> normal(0.0, std::sqrt(2.0 * gamma_));
        std::uniform_real_distribution<double> uniform(0.0, 2.0 * std::numbers::pi);
        omega_.resize(params_.rff_dim * dim_);
        for (auto& v : omega_) v = normal(rng);
        phase_.resize(params_.rff_dim);
        for (auto& v : phase_) v = uniform(rng);
    }

    // map every sample once; the bias column is filled after the max norm is known
    bias_feature_ = 0.0;
    std::vector<double> z;
    features(train.sample(0), z);
    const std::size_t m = z.size();
    std::vector<double> mapped(n * m);
    double max_norm = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
        features(train.sample(i), z);
        double s = 0.0;
        for (std::size_t j = 0; j + 1 < m; ++j) s += z[j] * z[j];
        max_norm = std::max(max_norm, std::sqrt(s));
        std::copy(z.begin(), z.end(), mapped.begin() + static_cast<std::ptrdiff_t>(i * m));
    }
    bias_feature_ = max_norm > 0.0 ? max_norm : 1.0;
    for (std::size_t i = 0; i < n; ++i) mapped[i * m + m - 1] = bias_feature_;

    w_.assign(m, 0.0);
    std::vector<std::size_t> order(n);
    std::iota(order.begin(), order.end(), std::size_t{0});
    std::uint64_t t = 0;
    for (std::size_t epoch = 0; epoch < params_.epochs; ++epoch) {
        std::shuffle(order.begin(), order.end(), rng);
        for (std::size_t i : order) {
            ++t;
            const double eta = 1.0 / (params_.lambda * static_cast<double>(t));
            const double* zi = mapped.data() + i * m;
            const double y = train.y[i] == 1 ? 1.0 : -1.0;
            double dot = 0.0;
            for (std::size_t j = 0; j < m; ++j) dot += w_[j] * zi[j];
            const double decay = 1.0 - eta * params_.lambda;
            if (y * dot < 1.0) {
                const double step = eta * y;
                for (std::size_t j = 0; j < m; ++j) w_[j] = decay * w_[j] + step * zi[j];
            } else {
                for (auto& v : w_) v *= decay;
            }
        }
    }
}

double SvcClassifier::margin(std::span<const double> x) const {
    if (w_.empty()) throw std::logic_error("svc is not fitted");
    if (x.size() != dim_) throw DomainError("svc query has the wrong dimension");
    std::vector<double> z;
    z.reserve(w_.size());
    features(x, z);
    double dot = 0.0;
    for (std::size_t j = 0; j < z.size(); ++j) dot += w_[j] * z[j];
    return dot;
}

double SvcClassifier::score(std::span<const double> x) const { return sigmoid(margin(x)); }

json SvcClassifier::hyperparams() const {
    return {{"lambda", params_.lambda},
            {"epochs", params_.epochs},
            {"rff_dim", params_.rff_dim},
            {"gamma", params_.gamma},
            {"seed", params_.seed}};
}

void SvcClassifier::save_payload(ByteWriter& out) const {
    out.put<std::uint64_t>(dim_);
    out.put<double>(gamma_);
    out.put_vector(omega_);
    out.put_vector(phase_);
    out.put<double>(bias_feature_);
    out.put_vector(w_);
}

void SvcClassifier::load_payload(ByteReader& in) {
    dim_ = in.get<std::uint64_t>();
    gamma_ = in.get<double>();
    omega_ = in.get_vector<double>();
    phase_ = in.get_vector<double>();
    bias_feature_ = in.get<double>();
    w_ = in.get_vector<double>();
    const std::size_t D = params_.rff_dim;
    const bool ok = dim_ > 0 && phase_.size() == D && omega_.size() == D * dim_ &&
                    w_.size() == (D == 0 ? dim_ : D) + 1;
    if (!ok) throw FormatError("svc payload shape mismatch");
}

}  // namespace cloudmd::models
