// SPDX-License-Identifier: Apache-2.0

#include "cloudmd/models/naive_bayes.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>

namespace cloudmd::models {

void GaussianNbClassifier::fit(const LabeledSet& train, const LabeledSet&) {
    detail::require_trainable(train, "gaussian naive bayes");
    if (!(params_.var_smoothing >= 0.0)) throw DomainError("var_smoothing must be non-negative");
    const std::size_t n = train.size();
    const std::size_t d = train.dim();
    std::array<std::size_t, 2> count{};
    for (int y : train.y) ++count[static_cast<std::size_t>(y)];
    if (count[0] == 0 || count[1] == 0) throw DomainError("gaussian naive bayes needs both classes in training");

    // overall variance, for the smoothing scale
    std::vector<double> all_mean(d, 0.0), all_var(d, 0.0);
    for (std::size_t c = 0; c < 2; ++c) {
        mean_[c].assign(d, 0.0);
        var_[c].assign(d, 0.0);
    }
    for (std::size_t i = 0; i < n; ++i) {
        const auto x = train.sample(i);
        auto& m = mean_[static_cast<std::size_t>(train.y[i])];
        for (std::size_t j = 0; j < d; ++j) {
            m[j] += x[j];
            all_mean[j] += x[j];
        }
    }
    for (std::size_t c = 0; c < 2; ++c)
        for (auto& v : mean_[c]) v /= static_cast<double>(count[c]);
    for (auto& v : all_mean) v /= static_cast<double>(n);
    for (std::size_t i = 0; i < n; ++i) {
        const auto x = train.sample(i);
        const auto c = static_cast<std::size_t>(train.y[i]);
        for (std::size_t j = 0; j < d; ++j) {
            const double a = x[j] - mean_[c][j];
            const double b = x[j] - all_mean[j];
            var_[c][j] += a * a;
            all_var[j] += b * b;
        }
    }
    double max_var = 0.0;
    for (auto v : all_var) max_var = std::max(max_var, v / static_cast<double>(n));
    epsilon_ = params_.var_smoothing * max_var;
    // all-constant data would leave a zero variance; fall back to an absolute floor
    if (epsilon_ <= 0.0) epsilon_ = std::max(params_.var_smoothing, 1e-300);

    dim_ = d;
    for (std::size_t c = 0; c < 2; ++c) {
        prior_[c] = static_cast<double>(count[c]) / static_cast<double>(n);
        double norm = std::log(prior_[c]);
        for (auto& v : var_[c]) {
            v = v / static_cast<double>(count[c]) + epsilon_;
            norm -= 0.5 * std::log(2.0 * std::numbers::pi * v);
        }
        log_norm_[c] = norm;
    }
}

std::array<double, 2> GaussianNbClassifier::log_joint(std::span<const double> x) const {
    if (dim_ == 0) throw std::logic_error("gaussian naive bayes is not fitted");
    if (x.size() != dim_) throw DomainError("naive bayes query has the wrong dimension");
    std::array<double, 2> out{};
    for (std::size_t c = 0; c < 2; ++c) {
        double s = 0.0;
        for (std::size_t j = 0; j < dim_; ++j) {
            const double z = x[j] - mean_[c][j];
            s += z * z / var_[c][j];
        }
        out[c] = log_norm_[c] - 0.5 * s;
    }
    return out;
}

double GaussianNbClassifier::score(std::span<const double> x) const {
    const auto lj = log_joint(x);
    // P(1|x) = 1 / (1 + exp(l0 - l1))
    return sigmoid(lj[1] - lj[0]);
}

json GaussianNbClassifier::hyperparams() const { return {{"var_smoothing", params_.var_smoothing}}; }

void GaussianNbClassifier::save_payload(ByteWriter& out) const {
    out.put<std::uint64_t>(dim_);
    out.put<double>(epsilon_);
    for (std::size_t c = 0; c < 2; ++c) {
        out.put<double>(prior_[c]);
        out.put<double>(log_norm_[c]);
        out.put_vector(mean_[c]);
        out.put_vector(var_[c]);
    }
}

void GaussianNbClassifier::load_payload(ByteReader& in) {
    dim_ = in.get<std::uint64_t>();
    epsilon_ = in.get<double>();
    for (std::size_t c = 0; c < 2; ++c) {
        prior_[c] = in.get<double>();
        log_norm_[c] = in.get<double>();
        mean_[c] = in.get_vector<double>();
        var_[c] = in.get_vector<double>();
        if (mean_[c].size() != dim_ || var_[c].size() != dim_) throw FormatError("naive bayes payload shape mismatch");
    }
    if (dim_ == 0) throw FormatError("naive bayes payload is empty");
}

}  // namespace cloudmd::models
