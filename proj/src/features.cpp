// SPDX-License-Identifier: Apache-2.0

#include "cloudmd/features.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <numeric>
#include <random>

namespace cloudmd::features {

std::vector<UniqueProcessRow> aggregate_unique(std::span<const ProcessRecord> processes) {
    // Values are summed in sorted order so the result is independent of input order.
    std::map<ProcessKey, std::vector<const ProcessRecord*>> groups;
    for (const auto& p : processes) groups[p.key()].push_back(&p);

    std::vector<UniqueProcessRow> out;
    out.reserve(groups.size());
    std::vector<double> column;
    for (auto& [key, members] : groups) {
        const std::size_t f = members.front()->values.size();
        UniqueProcessRow row{key, std::vector<double>(f, 0.0), members.size()};
        for (std::size_t j = 0; j < f; ++j) {
            column.clear();
            for (const auto* m : members) column.push_back(m->values.at(j));
            std::sort(column.begin(), column.end());
            double sum = 0.0;
            for (double v : column) sum += v;
            row.values[j] = sum / static_cast<double>(members.size());
        }
        out.push_back(std::move(row));
    }
    return out;
}

SampleMatrix build_matrix(std::span<const UniqueProcessRow> rows, std::size_t cap, std::size_t feature_count,
                          BuildStats* stats, std::size_t priority_feature) {
    if (cap == 0) throw DomainError("row cap must be positive");
    std::vector<const UniqueProcessRow*> kept;
    kept.reserve(rows.size());
    for (const auto& r : rows) kept.push_back(&r);
    auto by_key = [](const UniqueProcessRow* a, const UniqueProcessRow* b) { return a->key < b->key; };
    std::sort(kept.begin(), kept.end(), by_key);

    if (kept.size() > cap) {
        std::stable_sort(kept.begin(), kept.end(), [&](const UniqueProcessRow* a, const UniqueProcessRow* b) {
            return a->values.at(priority_feature) > b->values.at(priority_feature);
        });
        if (stats) {
            ++stats->truncations;
            stats->dropped_rows += kept.size() - cap;
        }
        kept.resize(cap);
        std::sort(kept.begin(), kept.end(), by_key);
    }

    SampleMatrix m;
    m.rows = cap;
    m.cols = feature_count;
    m.data.assign(cap * feature_count, 0.0);
    m.row_keys.reserve(kept.size());
    for (std::size_t r = 0; r < kept.size(); ++r) {
        if (kept[r]->values.size() != feature_count)
            throw DomainError("unique-process row has " + std::to_string(kept[r]->values.size()) +
                              " values, expected " + std::to_string(feature_count));
        std::copy(kept[r]->values.begin(), kept[r]->values.end(), m.data.begin() + r * feature_count);
        m.row_keys.push_back(kept[r]->key);
    }
    return m;
}

double Scaler::scale(std::size_t f, double x) const {
    const double span = max[f] - min[f];
    if (!(span > 0.0)) return 0.0;
    return std::clamp((x - min[f]) / span, 0.0, 1.0);
}

Scaler fit_scaler(std::span<const SampleMatrix> train) {
    if (train.empty()) throw DomainError("cannot fit a scaler on an empty training set");
    const std::size_t f = train.front().cols;
    Scaler s;
    s.min.assign(f, std::numeric_limits<double>::infinity());
    s.max.assign(f, -std::numeric_limits<double>::infinity());
    for (const auto& m : train) {
        if (m.cols != f) throw DomainError("training matrices disagree on feature count");
        for (std::size_t r = 0; r < m.populated(); ++r) {
            for (std::size_t c = 0; c < f; ++c) {
                s.min[c] = std::min(s.min[c], m.at(r, c));
                s.max[c] = std::max(s.max[c], m.at(r, c));
            }
        }
    }
    for (std::size_t c = 0; c < f; ++c) {
        if (s.min[c] > s.max[c]) s.min[c] = s.max[c] = 0.0;  // no populated rows anywhere
    }
    return s;
}

SampleMatrix apply_scaler(const Scaler& s, const SampleMatrix& m) {
    if (s.min.size() != m.cols) throw DomainError("scaler fitted for a different feature count");
    SampleMatrix out = m;
    for (std::size_t r = 0; r < m.populated(); ++r)
        for (std::size_t c = 0; c < m.cols; ++c) out.at(r, c) = s.scale(c, m.at(r, c));
    return out;
}

DatasetSplit split_dataset(std::vector<std::uint32_t> ids, SplitRatios ratios, std::uint64_t seed) {
    const std::size_t n = ids.size();
    if (n < 3) throw DomainError("need at least 3 experiments to split, got " + std::to_string(n));
    if (!(ratios.train > 0.0 && ratios.val > 0.0 && ratios.test > 0.0) ||
        std::abs(ratios.train + ratios.val + ratios.test - 1.0) > 1e-9)
        throw DomainError("split ratios must be positive and sum to 1");
    std::sort(ids.begin(), ids.end());
    if (std::adjacent_find(ids.begin(), ids.end()) != ids.end()) throw DomainError("duplicate experiment id");

    std::mt19937_64 rng(seed);
    std::shuffle(ids.begin(), ids.end(), rng);

    const auto part = [n](double r) {
        return std::max<std::size_t>(1, static_cast<std::size_t>(std::llround(static_cast<double>(n) * r)));
    };
    std::size_t n_val = part(ratios.val);
    std::size_t n_test = part(ratios.test);
    while (n_val + n_test > n - 1) {
        // keep at least one training experiment
        if (n_val >= n_test && n_val > 1)
            --n_val;
        else
            --n_test;
    }
    DatasetSplit s;
    s.ratios = ratios;
    const std::size_t n_train = n - n_val - n_test;
    s.train.assign(ids.begin(), ids.begin() + static_cast<std::ptrdiff_t>(n_train));
    s.val.assign(ids.begin() + static_cast<std::ptrdiff_t>(n_train),
                 ids.begin() + static_cast<std::ptrdiff_t>(n_train + n_val));
    s.test.assign(ids.begin() + static_cast<std::ptrdiff_t>(n_train + n_val), ids.end());
    std::sort(s.train.begin(), s.train.end());
    std::sort(s.val.begin(), s.val.end());
    std::sort(s.test.begin(), s.test.end());
    return s;
}

void LabeledSet::push(const SampleMatrix& m, std::uint32_t experiment_id, double time) {
    if (y.empty() && x.empty()) {
        rows = m.rows;
        cols = m.cols;
    } else if (m.rows != rows || m.cols != cols) {
        throw DomainError("sample shape differs from the rest of the set");
    }
    x.insert(x.end(), m.data.begin(), m.data.end());
    y.push_back(m.label == Label::Benign ? 0 : 1);
    experiment.push_back(experiment_id);
    t.push_back(time);
}

LabeledSet LabeledSet::select(std::span<const std::size_t> indices) const {
    LabeledSet out;
    out.rows = rows;
    out.cols = cols;
    out.x.reserve(indices.size() * dim());
    for (auto i : indices) {
        auto s = sample(i);
        out.x.insert(out.x.end(), s.begin(), s.end());
        out.y.push_back(y[i]);
        out.experiment.push_back(experiment[i]);
        out.t.push_back(t[i]);
    }
    return out;
}

std::optional<Label> training_label(Label l, bool fold_window) {
    if (l != Label::InjectionWindow) return l;
    if (fold_window) return Label::Infected;
    return std::nullopt;
}

std::optional<SampleMatrix> snapshot_matrix(const VmSnapshot& s, std::size_t feature_count,
                                            const PipelineOptions& options, BuildStats* stats) {
    const auto label = training_label(s.label, options.fold_window);
    if (!label) return std::nullopt;
    const auto rows = aggregate_unique(s.processes);
    SampleMatrix m = build_matrix(rows, options.row_cap, feature_count, stats);
    m.label = *label;
    return m;
}

}  // namespace cloudmd::features
