// SPDX-License-Identifier: Apache-2.0

#include "cloudmd/models/cnn.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <random>

#include "cloudmd/models/early_stopping.hpp"

namespace cloudmd::models {

using cnn::Geometry;
using cnn::Mat;

void CnnConfig::validate() const {
    if (initial_channels == 0 || blocks == 0 || layers_per_block == 0 || growth == 0 || epochs == 0 ||
        batch_size == 0)
        throw DomainError("cnn sizes must be positive");
    if (!(learning_rate > 0.0) || !std::isfinite(learning_rate)) throw DomainError("cnn learning_rate must be positive");
}

json CnnConfig::to_json() const {
    return {{"initial_channels", initial_channels},
            {"blocks", blocks},
            {"layers_per_block", layers_per_block},
            {"growth", growth},
            {"epochs", epochs},
            {"patience", patience},
            {"learning_rate", learning_rate},
            {"batch_size", batch_size},
            {"seed", seed}};
}

CnnConfig CnnConfig::from_json(const json& j) {
    detail::reject_unknown(j,
                           {"initial_channels", "blocks", "layers_per_block", "growth", "epochs", "patience",
                            "learning_rate", "batch_size", "seed"},
                           "cnn");
    CnnConfig c;
    detail::read_param(j, "initial_channels", c.initial_channels);
    detail::read_param(j, "blocks", c.blocks);
    detail::read_param(j, "layers_per_block", c.layers_per_block);
    detail::read_param(j, "growth", c.growth);
    detail::read_param(j, "epochs", c.epochs);
    detail::read_param(j, "patience", c.patience);
    detail::read_param(j, "learning_rate", c.learning_rate);
    detail::read_param(j, "batch_size", c.batch_size);
    detail::read_param(j, "seed", c.seed);
    c.validate();
    return c;
}

namespace {

std::size_t build(const CnnConfig& c, Geometry input, cnn::Conv2d& stem, std::vector<cnn::DenseBlock>& blocks,
                  std::vector<cnn::Transition>& transitions, std::vector<Geometry>& geometry) {
    c.validate();
    if (input.size() == 0) throw DomainError("cnn input must be non-empty");
    std::size_t offset = 0;
    stem = cnn::Conv2d(1, c.initial_channels, 3, offset);
    std::size_t channels = c.initial_channels;
    Geometry g = input;
    for (std::size_t b = 0; b < c.blocks; ++b) {
        if (g.size() == 0)
            throw DomainError("cnn input " + std::to_string(input.h) + "x" + std::to_string(input.w) +
                              " is too small for " + std::to_string(c.blocks) + " blocks");
        blocks.emplace_back(channels, c.layers_per_block, c.growth, offset);
        geometry.push_back(g);
        channels = blocks.back().out_channels();
        if (b + 1 < c.blocks) {
            transitions.emplace_back(channels, offset);
            channels = transitions.back().out_channels();
            g = cnn::pooled(g);
        }
    }
    return offset;
}

}  // namespace

DenseCnn::DenseCnn(const CnnConfig& config, Geometry input)
    : input_(input), head_([&] {
          std::size_t offset = build(config, input, stem_, blocks_, transitions_, geometry_);
          return cnn::LogisticHead(blocks_.back().out_channels(), offset);
      }()) {
    param_count_ = head_.offset() + head_.param_count();
}

std::vector<double> DenseCnn::init_params(std::uint64_t seed) const {
    std::vector<double> p(param_count_, 0.0);
    std::mt19937_64 rng(seed);
    stem_.init(p.data(), rng);
    for (std::size_t b = 0; b < blocks_.size(); ++b) {
        blocks_[b].init(p.data(), rng);
        if (b < transitions_.size()) transitions_[b].init(p.data(), rng);
    }
    return p;
}

double DenseCnn::forward(const double* params, std::span<const double> x, Workspace& ws) const {
    if (x.size() != input_.size())
        throw DomainError("cnn input has " + std::to_string(x.size()) + " values, expected " +
                          std::to_string(input_.size()));
    ws.blocks.resize(blocks_.size());
    ws.transitions.resize(transitions_.size());
    ws.transition_out.resize(transitions_.size());
    ws.input = Eigen::Map<const Mat>(x.data(), 1, static_cast<Eigen::Index>(x.size()));
    Mat stem_out = cnn::conv3x3_forward(stem_, params, ws.input, input_, ws.stem);
    const Mat* current = &stem_out;
    for (std::size_t b = 0; b < blocks_.size(); ++b) {
        blocks_[b].forward(params, *current, geometry_[b], ws.blocks[b]);
        current = &ws.blocks[b].stack;
        if (b < transitions_.size()) {
            ws.transition_out[b] = transitions_[b].forward(params, *current, geometry_[b], ws.transitions[b]);
            current = &ws.transition_out[b];
        }
    }
    return head_.forward(params, *current, ws.head);
}

void DenseCnn::backward(const double* params, double dlogit, Workspace& ws, double* grads) const {
    Mat d = head_.backward(params, dlogit, ws.head, grads);
    for (std::size_t b = blocks_.size(); b-- > 0;) {
        d = blocks_[b].backward(params, d, ws.blocks[b], grads);
        if (b > 0) d = transitions_[b - 1].backward(params, d, ws.transitions[b - 1], grads);
    }
    cnn::conv3x3_backward(stem_, params, d, input_, ws.stem, grads);
}

namespace {

double accuracy(const DenseCnn& net, const std::vector<double>& params, const LabeledSet& data,
                DenseCnn::Workspace& ws) {
    std::size_t correct = 0;
    for (std::size_t i = 0; i < data.size(); ++i) {
        const int pred = net.forward(params.data(), data.sample(i), ws) >= 0.0 ? 1 : 0;
        correct += pred == data.y[i] ? 1 : 0;
    }
    return static_cast<double>(correct) / static_cast<double>(data.size());
}

}  // namespace

void CnnClassifier::fit(const LabeledSet& train, const LabeledSet& val) {
    detail::require_trainable(train, "cnn");
    config_.validate();
    geometry_ = {train.rows, train.cols};
    if (!val.y.empty() && (val.rows != train.rows || val.cols != train.cols))
        throw DomainError("cnn validation shape differs from training");
    const DenseCnn net(config_, geometry_);
    const LabeledSet& monitor = val.y.empty() ? train : val;

    std::vector<double> params = net.init_params(config_.seed);
    std::vector<double> grads(params.size()), m(params.size(), 0.0), v(params.size(), 0.0);
    constexpr double beta1 = 0.9, beta2 = 0.999, eps = 1e-8;
    double beta1_t = 1.0, beta2_t = 1.0;

    std::mt19937_64 rng(config_.seed ^ 0x9e3779b97f4a7c15ULL);
    std::vector<std::size_t> order(train.size());
    std::iota(order.begin(), order.end(), std::size_t{0});
    DenseCnn::Workspace ws;

    history_.clear();
    std::vector<double> best = params;
    double best_acc = -1.0;
    best_epoch_ = 0;
    for (std::size_t epoch = 0; epoch < config_.epochs; ++epoch) {
        std::shuffle(order.begin(), order.end(), rng);
        for (std::size_t start = 0; start < order.size(); start += config_.batch_size) {
            const std::size_t end = std::min(order.size(), start + config_.batch_size);
            const double scale = 1.0 / static_cast<double>(end - start);
            std::fill(grads.begin(), grads.end(), 0.0);
            for (std::size_t k = start; k < end; ++k) {
                const std::size_t i = order[k];
                const double z = net.forward(params.data(), train.sample(i), ws);
                net.backward(params.data(), scale * cnn::bce_grad(z, train.y[i]), ws, grads.data());
            }
            beta1_t *= beta1;
            beta2_t *= beta2;
            const double step = config_.learning_rate * std::sqrt(1.0 - beta2_t) / (1.0 - beta1_t);
            for (std::size_t j = 0; j < params.size(); ++j) {
                m[j] = beta1 * m[j] + (1.0 - beta1) * grads[j];
                v[j] = beta2 * v[j] + (1.0 - beta2) * grads[j] * grads[j];
                params[j] -= step * m[j] / (std::sqrt(v[j]) + eps);
            }
        }
        history_.push_back(accuracy(net, params, monitor, ws));
        if (history_.back() > best_acc) {
            best_acc = history_.back();
            best = params;
        }
        const auto decision = early_stop(history_, config_.patience);
        best_epoch_ = decision.best_epoch;
        if (decision.stop) break;
    }
    params_ = std::move(best);
}

double CnnClassifier::score(std::span<const double> x) const {
    if (params_.empty()) throw std::logic_error("cnn is not fitted");
    const DenseCnn net(config_, geometry_);
    DenseCnn::Workspace ws;
    return sigmoid(net.forward(params_.data(), x, ws));
}

void CnnClassifier::save_payload(ByteWriter& out) const {
    out.put<std::uint64_t>(geometry_.h);
    out.put<std::uint64_t>(geometry_.w);
    out.put_vector(params_);
    out.put_vector(history_);
    out.put<std::uint64_t>(best_epoch_);
}

void CnnClassifier::load_payload(ByteReader& in) {
    geometry_.h = in.get<std::uint64_t>();
    geometry_.w = in.get<std::uint64_t>();
    params_ = in.get_vector<double>();
    history_ = in.get_vector<double>();
    best_epoch_ = in.get<std::uint64_t>();
    const DenseCnn net(config_, geometry_);
    if (params_.size() != net.param_count()) throw FormatError("cnn payload does not match its configuration");
}

}  // namespace cloudmd::models
