// SPDX-License-Identifier: Apache-2.0

#include "cloudmd/models/gradient_boosting.hpp"

#include <algorithm>
#include <cmath>

namespace cloudmd::models {

namespace {

// log(1 + exp(-m)) for margin m = (2y - 1) f, without overflow
double logistic_loss(int y, double f) {
    const double m = y == 1 ? f : -f;
    return m > 0.0 ? std::log1p(std::exp(-m)) : -m + std::log1p(std::exp(m));
}

double mean_loss(const std::vector<int>& y, const std::vector<double>& f) {
    double s = 0.0;
    for (std::size_t i = 0; i < y.size(); ++i) s += logistic_loss(y[i], f[i]);
    return s / static_cast<double>(y.size());
}

}  // namespace

void GradientBoostingClassifier::fit(const LabeledSet& train, const LabeledSet&) {
    detail::require_trainable(train, "gradient boosting");
    const std::size_t n = train.size();
    double positives = 0.0;
    for (int v : train.y) positives += v;
    // clamp so a single-class training set still has a finite base score
    const double prior = std::clamp(positives / static_cast<double>(n), 1e-12, 1.0 - 1e-12);
    base_ = std::log(prior / (1.0 - prior));

    stages_.clear();
    loss_curve_.clear();
    std::vector<double> f(n, base_);
    loss_curve_.push_back(mean_loss(train.y, f));
    fitted_ = true;
    if (params_.n_stages == 0) return;

    const SortedColumns cols(train.x, n, train.dim());
    GrowOptions opt;
    opt.criterion = SplitCriterion::SquaredError;
    opt.max_depth = params_.max_depth;
    opt.min_samples_leaf = static_cast<double>(params_.min_samples_leaf);

    std::vector<double> residual(n), hessian(n), step(n), trial(n);
    std::vector<std::int32_t> leaf_of(n);
    for (std::size_t stage = 0; stage < params_.n_stages; ++stage) {
        for (std::size_t i = 0; i < n; ++i) {
            const double p = sigmoid(f[i]);
            residual[i] = static_cast<double>(train.y[i]) - p;
            hessian[i] = p * (1.0 - p);
        }
        Tree tree = grow_tree(cols, residual, {}, opt, nullptr);

        // Newton leaf values
        std::vector<double> num(tree.nodes.size(), 0.0), den(tree.nodes.size(), 0.0);
        for (std::size_t i = 0; i < n; ++i) {
            std::int32_t k = 0;
            auto x = train.sample(i);
            while (!tree.nodes[static_cast<std::size_t>(k)].is_leaf()) {
                const auto& node = tree.nodes[static_cast<std::size_t>(k)];
                k = x[static_cast<std::size_t>(node.feature)] <= node.threshold ? node.left : node.right;
            }
            leaf_of[i] = k;
            num[static_cast<std::size_t>(k)] += residual[i];
            den[static_cast<std::size_t>(k)] += hessian[i];
        }
        for (std::size_t k = 0; k < tree.nodes.size(); ++k) {
            if (!tree.nodes[k].is_leaf()) continue;
            const double newton = den[k] > 1e-12 ? num[k] / den[k] : 0.0;
            tree.nodes[k].value = params_.learning_rate * newton;
        }

        const double before = loss_curve_.back();
        double shrink = 1.0;
        double after = before;
        for (int attempt = 0; attempt < 60; ++attempt) {
            for (std::size_t i = 0; i < n; ++i)
                trial[i] = f[i] + shrink * tree.nodes[static_cast<std::size_t>(leaf_of[i])].value;
            after = mean_loss(train.y, trial);
            if (after <= before) break;
            shrink *= 0.5;
        }
        if (after > before) {
            shrink = 0.0;
            after = before;
        }
        if (shrink != 1.0)
            for (auto& node : tree.nodes)
                if (node.is_leaf()) node.value *= shrink;
        for (std::size_t i = 0; i < n; ++i) f[i] += tree.nodes[static_cast<std::size_t>(leaf_of[i])].value;
        loss_curve_.push_back(mean_loss(train.y, f));
        stages_.push_back(std::move(tree));
    }
}

double GradientBoostingClassifier::raw_score(std::span<const double> x) const {
    if (!fitted_) throw std::logic_error("gradient boosting is not fitted");
    double f = base_;
    for (const auto& t : stages_) f += t.predict(x);
    return f;
}

double GradientBoostingClassifier::score(std::span<const double> x) const { return sigmoid(raw_score(x)); }

json GradientBoostingClassifier::hyperparams() const {
    return {{"n_stages", params_.n_stages},
            {"learning_rate", params_.learning_rate},
            {"max_depth", params_.max_depth},
            {"min_samples_leaf", params_.min_samples_leaf}};
}

void GradientBoostingClassifier::save_payload(ByteWriter& out) const {
    out.put<double>(base_);
    out.put<std::uint64_t>(stages_.size());
    for (const auto& t : stages_) t.save(out);
}

void GradientBoostingClassifier::load_payload(ByteReader& in) {
    base_ = in.get<double>();
    const auto n = in.get<std::uint64_t>();
    if (n > in.remaining()) throw FormatError("bad stage count");
    stages_.clear();
    for (std::uint64_t i = 0; i < n; ++i) stages_.push_back(Tree::load(in));
    loss_curve_.clear();
    fitted_ = true;
}

}  // namespace cloudmd::models
