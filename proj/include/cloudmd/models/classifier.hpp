// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstdint>
#include <memory>
#include <span>
#include <string>
#include <vector>

#include <json.hpp>

#include "cloudmd/binary_io.hpp"
#include "cloudmd/features.hpp"

namespace cloudmd::models {

using features::LabeledSet;
using json = nlohmann::json;

enum class ModelKind : std::uint8_t {
    Knn = 1,
    GaussianNb = 2,
    RandomForest = 3,
    GradientBoosting = 4,
    Svc = 5,
    Cnn = 6,
    DecisionTree = 7,
};

/// The six families compared in reports, in table order.
inline constexpr ModelKind report_kinds[] = {ModelKind::Cnn, ModelKind::Svc, ModelKind::RandomForest,
                                             ModelKind::Knn, ModelKind::GradientBoosting, ModelKind::GaussianNb};

std::string to_string(ModelKind k);
/// Accepts the short names used on the command line (knn, gnb, rf, gbt, svc, cnn, tree).
ModelKind kind_from_string(const std::string& s);
/// Display name used in report tables (CNN, SVC, RFC, KNN, GBC, GNB).
std::string display_name(ModelKind k);

/// Common fit/score contract. Scores are malicious-ness in [0, 1].
class Classifier {
public:
    virtual ~Classifier() = default;

    virtual ModelKind kind() const = 0;
    /// `val` may be empty for models that do not use it.
    virtual void fit(const LabeledSet& train, const LabeledSet& val) = 0;
    virtual double score(std::span<const double> x) const = 0;
    int predict(std::span<const double> x) const { return score(x) >= 0.5 ? 1 : 0; }

    std::vector<double> score_all(const LabeledSet& data) const;

    virtual json hyperparams() const = 0;
    virtual void save_payload(ByteWriter& out) const = 0;
    virtual void load_payload(ByteReader& in) = 0;
};

/// Logistic function, stable for large |z|.
double sigmoid(double z);

/// Builds an unfitted classifier; unknown hyperparameter keys are rejected.
std::unique_ptr<Classifier> make_classifier(ModelKind kind, const json& hyperparams = json::object());

namespace detail {
void require_trainable(const LabeledSet& train, const char* model);
/// Reads `key` from `j` if present, recording it as consumed.
template <typename T>
void read_param(const json& j, const char* key, T& value) {
    if (j.contains(key)) value = j.at(key).get<T>();
}
void reject_unknown(const json& j, std::initializer_list<const char*> known, const char* model);
}  // namespace detail

}  // namespace cloudmd::models
