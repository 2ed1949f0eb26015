// SPDX-License-Identifier: Apache-2.0

#include "cloudmd/models/random_forest.hpp"

#include <cmath>

namespace cloudmd::models {

void RandomForestClassifier::fit(const LabeledSet& train, const LabeledSet&) {
    detail::require_trainable(train, "random forest");
    if (params_.n_trees == 0) throw DomainError("random forest needs at least one tree");
    const std::size_t n = train.size();
    const SortedColumns cols(train.x, n, train.dim());
    const std::vector<double> y(train.y.begin(), train.y.end());

    GrowOptions opt;
    opt.criterion = SplitCriterion::Gini;
    opt.max_depth = params_.max_depth;
    opt.min_samples_leaf = static_cast<double>(params_.min_samples_leaf);
    opt.max_features = params_.max_features == 0
                           ? std::max<std::size_t>(1, static_cast<std::size_t>(std::sqrt(static_cast<double>(train.dim()))))
                           : params_.max_features;

    trees_.clear();
    trees_.reserve(params_.n_trees);
    std::vector<double> weights;
    for (std::size_t t = 0; t < params_.n_trees; ++t) {
        std::seed_seq seq{static_cast<std::uint32_t>(params_.seed), static_cast<std::uint32_t>(params_.seed >> 32),
                          static_cast<std::uint32_t>(t)};
        std::mt19937_64 rng(seq);
        weights.clear();
        if (params_.bootstrap) {
            weights.assign(n, 0.0);
            std::uniform_int_distribution<std::size_t> draw(0, n - 1);
            for (std::size_t k = 0; k < n; ++k) weights[draw(rng)] += 1.0;
        }
        trees_.push_back(grow_tree(cols, y, weights, opt, &rng));
    }
}

double RandomForestClassifier::score(std::span<const double> x) const {
    if (trees_.empty()) throw std::logic_error("random forest is not fitted");
    std::size_t votes = 0;
    for (const auto& t : trees_) votes += t.predict(x) >= 0.5 ? 1 : 0;
    return static_cast<double>(votes) / static_cast<double>(trees_.size());
}

json RandomForestClassifier::hyperparams() const {
    return {{"n_trees", params_.n_trees},     {"max_depth", params_.max_depth},
            {"min_samples_leaf", params_.min_samples_leaf}, {"max_features", params_.max_features},
            {"bootstrap", params_.bootstrap}, {"seed", params_.seed}};
}

void RandomForestClassifier::save_payload(ByteWriter& out) const {
    out.put<std::uint64_t>(trees_.size());
    for (const auto& t : trees_) t.save(out);
}

void RandomForestClassifier::load_payload(ByteReader& in) {
    const auto n = in.get<std::uint64_t>();
    if (n == 0 || n > in.remaining()) throw FormatError("bad tree count");
    trees_.clear();
    for (std::uint64_t i = 0; i < n; ++i) trees_.push_back(Tree::load(in));
}

}  // namespace cloudmd::models
