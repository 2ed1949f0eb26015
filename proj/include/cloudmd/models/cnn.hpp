// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstdint>
#include <vector>

#include "cloudmd/models/classifier.hpp"
#include "cloudmd/models/cnn_layers.hpp"

namespace cloudmd::models {

struct CnnConfig {
    std::size_t initial_channels = 16;
    std::size_t blocks = 2;
    std::size_t layers_per_block = 4;
    std::size_t growth = 12;
    std::size_t epochs = 100;  ///< cap
    std::size_t patience = 5;
    double learning_rate = 1e-2;
    std::size_t batch_size = 32;
    std::uint64_t seed = 0;

    void validate() const;
    json to_json() const;
    /// Unknown keys are rejected.
    static CnnConfig from_json(const json& j);
};

/// initial 3x3 conv -> [dense block -> transition] x (blocks - 1) -> dense block
/// -> ReLU -> global average pool -> logistic unit.
///
/// Convolutions are zero-padded to keep the spatial size; each transition
/// halves it with floor, so a 128 x 10 input becomes 64 x 5 after the first.
class DenseCnn {
public:
    struct Workspace {
        cnn::Mat input;
        cnn::ConvCache stem;
        std::vector<cnn::DenseBlock::Cache> blocks;
        std::vector<cnn::Transition::Cache> transitions;
        std::vector<cnn::Mat> transition_out;
        cnn::LogisticHead::Cache head;
    };

    DenseCnn(const CnnConfig& config, cnn::Geometry input);

    std::size_t param_count() const noexcept { return param_count_; }
    cnn::Geometry input_geometry() const noexcept { return input_; }
    /// Spatial size seen by each dense block.
    const std::vector<cnn::Geometry>& block_geometry() const noexcept { return geometry_; }
    const std::vector<cnn::DenseBlock>& blocks() const noexcept { return blocks_; }
    const std::vector<cnn::Transition>& transitions() const noexcept { return transitions_; }
    const cnn::LogisticHead& head() const noexcept { return head_; }

    /// He-normal convolutions; the logistic unit starts at zero.
    std::vector<double> init_params(std::uint64_t seed) const;
    /// Logit for one 1 x h x w input.
    double forward(const double* params, std::span<const double> x, Workspace& ws) const;
    /// Accumulates d(loss)/d(params) given d(loss)/d(logit) from the last forward.
    void backward(const double* params, double dlogit, Workspace& ws, double* grads) const;

private:
    cnn::Geometry input_;
    cnn::Conv2d stem_;
    std::vector<cnn::DenseBlock> blocks_;
    std::vector<cnn::Transition> transitions_;
    std::vector<cnn::Geometry> geometry_;
    cnn::LogisticHead head_;
    std::size_t param_count_ = 0;
};

/// Dense-block CNN trained with Adam on binary cross-entropy. Training stops
/// when validation accuracy has not improved for `patience` epochs and keeps the
/// parameters of the best epoch.
class CnnClassifier final : public Classifier {
public:
    explicit CnnClassifier(CnnConfig c = {}) : config_(c) {}
    ModelKind kind() const override { return ModelKind::Cnn; }
    /// Uses training accuracy for early stopping when `val` is empty.
    void fit(const LabeledSet& train, const LabeledSet& val) override;
    double score(std::span<const double> x) const override;
    json hyperparams() const override { return config_.to_json(); }
    void save_payload(ByteWriter& out) const override;
    void load_payload(ByteReader& in) override;

    const std::vector<double>& accuracy_history() const noexcept { return history_; }
    std::size_t best_epoch() const noexcept { return best_epoch_; }
    const std::vector<double>& params() const noexcept { return params_; }

private:
    CnnConfig config_;
    cnn::Geometry geometry_;
    std::vector<double> params_;
    std::vector<double> history_;
    std::size_t best_epoch_ = 0;
};

}  // namespace cloudmd::models
