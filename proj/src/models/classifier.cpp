// SPDX-License-Identifier: Apache-2.0

#include "cloudmd/models/classifier.hpp"

#include <cmath>

#include "cloudmd/models/cnn.hpp"
#include "cloudmd/models/decision_tree.hpp"
#include "cloudmd/models/gradient_boosting.hpp"
#include "cloudmd/models/knn.hpp"
#include "cloudmd/models/naive_bayes.hpp"
#include "cloudmd/models/random_forest.hpp"
#include "cloudmd/models/svc.hpp"

namespace cloudmd::models {

std::string to_string(ModelKind k) {
    switch (k) {
        case ModelKind::Knn: return "knn";
        case ModelKind::GaussianNb: return "gnb";
        case ModelKind::RandomForest: return "rf";
        case ModelKind::GradientBoosting: return "gbt";
        case ModelKind::Svc: return "svc";
        case ModelKind::Cnn: return "cnn";
        case ModelKind::DecisionTree: return "tree";
    }
    throw DomainError("unknown model kind " + std::to_string(static_cast<int>(k)));
}

ModelKind kind_from_string(const std::string& s) {
    for (auto k : {ModelKind::Knn, ModelKind::GaussianNb, ModelKind::RandomForest, ModelKind::GradientBoosting,
                   ModelKind::Svc, ModelKind::Cnn, ModelKind::DecisionTree})
        if (to_string(k) == s) return k;
    throw DomainError("unknown model '" + s + "' (expected knn, gnb, rf, gbt, svc, cnn or tree)");
}

std::string display_name(ModelKind k) {
    switch (k) {
        case ModelKind::Knn: return "KNN";
        case ModelKind::GaussianNb: return "GNB";
        case ModelKind::RandomForest: return "RFC";
        case ModelKind::GradientBoosting: return "GBC";
        case ModelKind::Svc: return "SVC";
        case ModelKind::Cnn: return "CNN";
        case ModelKind::DecisionTree: return "DT";
    }
    throw DomainError("unknown model kind");
}

double sigmoid(double z) {
    if (z >= 0.0) return 1.0 / (1.0 + std::exp(-z));
    const double e = std::exp(z);
    return e / (1.0 + e);
}

std::vector<double> Classifier::score_all(const LabeledSet& data) const {
    std::vector<double> out(data.size());
    for (std::size_t i = 0; i < data.size(); ++i) out[i] = score(data.sample(i));
    return out;
}

std::unique_ptr<Classifier> make_classifier(ModelKind kind, const json& hp) {
    if (!hp.is_object()) throw DomainError("hyperparameters must be a JSON object");
    try {
        switch (kind) {
            case ModelKind::Knn: {
                detail::reject_unknown(hp, {"k"}, "knn");
                KnnParams p;
                detail::read_param(hp, "k", p.k);
                if (p.k == 0) throw DomainError("knn k must be at least 1");
                return std::make_unique<KnnClassifier>(p);
            }
            case ModelKind::GaussianNb: {
                detail::reject_unknown(hp, {"var_smoothing"}, "gnb");
                NaiveBayesParams p;
                detail::read_param(hp, "var_smoothing", p.var_smoothing);
                if (!(p.var_smoothing >= 0.0)) throw DomainError("gnb var_smoothing must be non-negative");
                return std::make_unique<GaussianNbClassifier>(p);
            }
            case ModelKind::DecisionTree: {
                detail::reject_unknown(hp, {"max_depth", "min_samples_leaf"}, "tree");
                TreeParams p;
                detail::read_param(hp, "max_depth", p.max_depth);
                detail::read_param(hp, "min_samples_leaf", p.min_samples_leaf);
                if (p.min_samples_leaf == 0) throw DomainError("tree min_samples_leaf must be at least 1");
                return std::make_unique<DecisionTreeClassifier>(p);
            }
            case ModelKind::RandomForest: {
                detail::reject_unknown(
                    hp, {"n_trees", "max_depth", "min_samples_leaf", "max_features", "bootstrap", "seed"}, "rf");
                ForestParams p;
                detail::read_param(hp, "n_trees", p.n_trees);
                detail::read_param(hp, "max_depth", p.max_depth);
                detail::read_param(hp, "min_samples_leaf", p.min_samples_leaf);
                detail::read_param(hp, "max_features", p.max_features);
                detail::read_param(hp, "bootstrap", p.bootstrap);
                detail::read_param(hp, "seed", p.seed);
                if (p.n_trees == 0 || p.min_samples_leaf == 0)
                    throw DomainError("rf n_trees and min_samples_leaf must be at least 1");
                return std::make_unique<RandomForestClassifier>(p);
            }
            case ModelKind::GradientBoosting: {
                detail::reject_unknown(hp, {"n_stages", "learning_rate", "max_depth", "min_samples_leaf"}, "gbt");
                BoostingParams p;
                detail::read_param(hp, "n_stages", p.n_stages);
                detail::read_param(hp, "learning_rate", p.learning_rate);
                detail::read_param(hp, "max_depth", p.max_depth);
                detail::read_param(hp, "min_samples_leaf", p.min_samples_leaf);
                if (!(p.learning_rate > 0.0) || p.min_samples_leaf == 0)
                    throw DomainError("gbt learning_rate must be positive and min_samples_leaf at least 1");
                return std::make_unique<GradientBoostingClassifier>(p);
            }
            case ModelKind::Svc: {
                detail::reject_unknown(hp, {"lambda", "epochs", "rff_dim", "gamma", "seed"}, "svc");
                SvcParams p;
                detail::read_param(hp, "lambda", p.lambda);
                detail::read_param(hp, "epochs", p.epochs);
                detail::read_param(hp, "rff_dim", p.rff_dim);
                detail::read_param(hp, "gamma", p.gamma);
                detail::read_param(hp, "seed", p.seed);
                if (!(p.lambda > 0.0) || p.epochs == 0 || p.gamma < 0.0)
                    throw DomainError("svc needs lambda > 0, epochs >= 1 and gamma >= 0");
                return std::make_unique<SvcClassifier>(p);
            }
            case ModelKind::Cnn:
                return std::make_unique<CnnClassifier>(CnnConfig::from_json(hp));
        }
    } catch (const json::exception& e) {
        throw DomainError(std::string("bad hyperparameter for ") + to_string(kind) + ": " + e.what());
    }
    throw DomainError("unknown model kind");
}

namespace detail {

void require_trainable(const LabeledSet& train, const char* model) {
    if (train.y.empty()) throw DomainError(std::string(model) + ": empty training set");
    if (train.dim() == 0 || train.x.size() != train.size() * train.dim())
        throw DomainError(std::string(model) + ": malformed training set");
}

void reject_unknown(const json& j, std::initializer_list<const char*> known, const char* model) {
    for (const auto& [key, value] : j.items()) {
        bool ok = false;
        for (const char* k : known) ok = ok || key == k;
        if (!ok) throw DomainError(std::string(model) + ": unknown hyperparameter '" + key + "'");
    }
}

}  // namespace detail

}  // namespace cloudmd::models
