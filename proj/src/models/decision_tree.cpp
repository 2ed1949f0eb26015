// SPDX-License-Identifier: Apache-2.0

#include "cloudmd/models/decision_tree.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

namespace cloudmd::models {

double Tree::predict(std::span<const double> x) const {
    std::int32_t i = 0;
    while (!nodes[static_cast<std::size_t>(i)].is_leaf()) {
        const TreeNode& n = nodes[static_cast<std::size_t>(i)];
        i = x[static_cast<std::size_t>(n.feature)] <= n.threshold ? n.left : n.right;
    }
    return nodes[static_cast<std::size_t>(i)].value;
}

std::size_t Tree::depth() const {
    if (nodes.empty()) return 0;
    std::vector<std::pair<std::int32_t, std::size_t>> stack{{0, 0}};
    std::size_t best = 0;
    while (!stack.empty()) {
        auto [i, d] = stack.back();
        stack.pop_back();
        best = std::max(best, d);
        const TreeNode& n = nodes[static_cast<std::size_t>(i)];
        if (!n.is_leaf()) {
            stack.push_back({n.left, d + 1});
            stack.push_back({n.right, d + 1});
        }
    }
    return best;
}

std::size_t Tree::leaf_count() const {
    return static_cast<std::size_t>(std::count_if(nodes.begin(), nodes.end(), [](const TreeNode& n) { return n.is_leaf(); }));
}

void Tree::save(ByteWriter& out) const {
    out.put<std::uint64_t>(nodes.size());
    for (const auto& n : nodes) {
        out.put<std::int32_t>(n.feature);
        out.put<double>(n.threshold);
        out.put<std::int32_t>(n.left);
        out.put<std::int32_t>(n.right);
        out.put<double>(n.value);
    }
}

Tree Tree::load(ByteReader& in) {
    Tree t;
    const auto n = in.get<std::uint64_t>();
    if (n == 0 || n > in.remaining() / 28) throw FormatError("bad tree node count");
    t.nodes.resize(n);
    for (auto& node : t.nodes) {
        node.feature = in.get<std::int32_t>();
        node.threshold = in.get<double>();
        node.left = in.get<std::int32_t>();
        node.right = in.get<std::int32_t>();
        node.value = in.get<double>();
        if (!node.is_leaf() && (node.left <= 0 || node.right <= 0 || static_cast<std::uint64_t>(node.left) >= n ||
                                static_cast<std::uint64_t>(node.right) >= n))
            throw FormatError("tree child index out of range");
    }
    return t;
}

SortedColumns::SortedColumns(std::span<const double> x, std::size_t n, std::size_t dim)
    : x_(x), n_(n), dim_(dim), order_(n * dim) {
    if (x.size() != n * dim) throw DomainError("sample buffer does not match n x dim");
    std::vector<std::uint32_t> idx(n);
    for (std::size_t f = 0; f < dim; ++f) {
        std::iota(idx.begin(), idx.end(), 0u);
        std::sort(idx.begin(), idx.end(), [&](std::uint32_t a, std::uint32_t b) {
            const double va = at(a, f), vb = at(b, f);
            return va < vb || (va == vb && a < b);
        });
        std::copy(idx.begin(), idx.end(), order_.begin() + static_cast<std::ptrdiff_t>(f * n));
        if (n > 0 && at(idx.front(), f) < at(idx.back(), f)) varying_.push_back(static_cast<std::uint32_t>(f));
    }
}

namespace {

struct SplitChoice {
    std::int32_t feature = -1;
    double threshold = 0.0;
    double gain = 0.0;
};

class TreeGrower {
public:
    TreeGrower(const SortedColumns& cols, std::span<const double> targets, std::span<const double> weights,
               const GrowOptions& opt, std::mt19937_64* rng)
        : cols_(cols), y_(targets), w_(weights), opt_(opt), rng_(rng), node_of_(cols.size(), -1) {}

    Tree grow() {
        std::vector<std::uint32_t> root;
        for (std::size_t i = 0; i < cols_.size(); ++i)
            if (weight(i) > 0.0) root.push_back(static_cast<std::uint32_t>(i));
        if (root.empty()) throw DomainError("cannot grow a tree without weighted samples");
        tree_.nodes.push_back({});
        struct Pending {
            std::int32_t node;
            std::vector<std::uint32_t> samples;
            std::size_t depth;
        };
        std::vector<Pending> stack;
        stack.push_back({0, std::move(root), 0});
        while (!stack.empty()) {
            Pending p = std::move(stack.back());
            stack.pop_back();
            double w = 0.0, s = 0.0;
            for (auto i : p.samples) {
                w += weight(i);
                s += weight(i) * y_[i];
                node_of_[i] = p.node;
            }
            tree_.nodes[static_cast<std::size_t>(p.node)].value = s / w;

            const bool pure = opt_.criterion == SplitCriterion::Gini && (s == 0.0 || s == w);
            if (pure || p.depth >= opt_.max_depth || w < 2.0 * opt_.min_samples_leaf) continue;

            const SplitChoice best = find_split(p.node, p.samples, w, s);
            if (best.feature < 0) continue;

            std::vector<std::uint32_t> left, right;
            for (auto i : p.samples) {
                (cols_.at(i, static_cast<std::size_t>(best.feature)) <= best.threshold ? left : right).push_back(i);
            }
            const auto l = static_cast<std::int32_t>(tree_.nodes.size());
            tree_.nodes.push_back({});
            tree_.nodes.push_back({});
            TreeNode& node = tree_.nodes[static_cast<std::size_t>(p.node)];
            node.feature = best.feature;
            node.threshold = best.threshold;
            node.left = l;
            node.right = l + 1;
            // right first so the left subtree is grown first
            stack.push_back({l + 1, std::move(right), p.depth + 1});
            stack.push_back({l, std::move(left), p.depth + 1});
        }
        return std::move(tree_);
    }

private:
    double weight(std::size_t i) const { return w_.empty() ? 1.0 : w_[i]; }

    double child_score(double w, double s) const {
        if (opt_.criterion == SplitCriterion::Gini) return (s * s + (w - s) * (w - s)) / w;
        return s * s / w;
    }

    std::vector<std::uint32_t> candidate_features() {
        const auto& all = cols_.varying();
        if (opt_.max_features == 0 || opt_.max_features >= all.size()) return all;
        std::vector<std::uint32_t> pool = all;
        for (std::size_t k = 0; k < opt_.max_features; ++k) {
            std::uniform_int_distribution<std::size_t> pick(k, pool.size() - 1);
            std::swap(pool[k], pool[pick(*rng_)]);
        }
        pool.resize(opt_.max_features);
        std::sort(pool.begin(), pool.end());
        return pool;
    }

    SplitChoice find_split(std::int32_t node, const std::vector<std::uint32_t>& samples, double w, double s) {
        SplitChoice best;
        const double parent = child_score(w, s);
        const double min_gain = 1e-12 * std::max(1.0, std::abs(parent));
        const std::size_t n = samples.size();
        const bool sort_locally =
            static_cast<double>(n) * (std::log2(static_cast<double>(n)) + 1.0) < static_cast<double>(cols_.size());

        std::vector<std::uint32_t> ordered;
        ordered.reserve(n);
        for (auto f : candidate_features()) {
            ordered.clear();
            if (sort_locally) {
                ordered = samples;
                std::sort(ordered.begin(), ordered.end(), [&](std::uint32_t a, std::uint32_t b) {
                    const double va = cols_.at(a, f), vb = cols_.at(b, f);
                    return va < vb || (va == vb && a < b);
                });
            } else {
                for (auto i : cols_.order(f))
                    if (node_of_[i] == node) ordered.push_back(i);
            }
            double wl = 0.0, sl = 0.0;
            for (std::size_t j = 0; j + 1 < ordered.size(); ++j) {
                const auto i = ordered[j];
                wl += weight(i);
                sl += weight(i) * y_[i];
                const double v = cols_.at(i, f);
                const double next = cols_.at(ordered[j + 1], f);
                if (!(v < next)) continue;
                const double wr = w - wl;
                if (wl < opt_.min_samples_leaf || wr < opt_.min_samples_leaf) continue;
                const double gain = child_score(wl, sl) + child_score(wr, s - sl) - parent;
                if (gain > best.gain && gain > min_gain) {
                    best.gain = gain;
                    best.feature = static_cast<std::int32_t>(f);
                    double mid = v + (next - v) / 2.0;
                    if (!(mid < next)) mid = v;
                    best.threshold = mid;
                }
            }
        }
        return best;
    }

    const SortedColumns& cols_;
    std::span<const double> y_;
    std::span<const double> w_;
    const GrowOptions& opt_;
    std::mt19937_64* rng_;
    std::vector<std::int32_t> node_of_;
    Tree tree_;
};

}  // namespace

Tree grow_tree(const SortedColumns& cols, std::span<const double> targets, std::span<const double> weights,
               const GrowOptions& options, std::mt19937_64* rng) {
    if (targets.size() != cols.size()) throw DomainError("target count differs from sample count");
    if (!weights.empty() && weights.size() != cols.size()) throw DomainError("weight count differs from sample count");
    if (options.max_features != 0 && options.max_features < cols.varying().size() && rng == nullptr)
        throw DomainError("feature subsampling needs a random generator");
    return TreeGrower(cols, targets, weights, options, rng).grow();
}

void DecisionTreeClassifier::fit(const LabeledSet& train, const LabeledSet&) {
    detail::require_trainable(train, "decision tree");
    const SortedColumns cols(train.x, train.size(), train.dim());
    std::vector<double> y(train.y.begin(), train.y.end());
    GrowOptions opt;
    opt.criterion = SplitCriterion::Gini;
    opt.max_depth = params_.max_depth;
    opt.min_samples_leaf = static_cast<double>(params_.min_samples_leaf);
    tree_ = grow_tree(cols, y, {}, opt, nullptr);
}

double DecisionTreeClassifier::score(std::span<const double> x) const {
    if (tree_.nodes.empty()) throw std::logic_error("decision tree is not fitted");
    return tree_.predict(x);
}

json DecisionTreeClassifier::hyperparams() const {
    return {{"max_depth", params_.max_depth}, {"min_samples_leaf", params_.min_samples_leaf}};
}

void DecisionTreeClassifier::save_payload(ByteWriter& out) const { tree_.save(out); }

void DecisionTreeClassifier::load_payload(ByteReader& in) { tree_ = Tree::load(in); }

}  // namespace cloudmd::models
