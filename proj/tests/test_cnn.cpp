// SPDX-License-Identifier: Apache-2.0

#include <doctest.h>

#include <random>

#include "cloudmd/models/cnn.hpp"
#include "cloudmd/models/early_stopping.hpp"
#include "gradcheck.hpp"

using namespace cloudmd;
using namespace cloudmd::models;
using namespace cloudmd::models::cnn;

namespace {

constexpr double kGradTol = 1e-4;

using gradcheck::dot;
using gradcheck::random_mat;

std::vector<double> history(std::initializer_list<double> v) { return v; }

}  // namespace

TEST_SUITE("cnn") {

TEST_CASE("im2col is the adjoint of col2im") {
    std::mt19937_64 rng(1);
    const Geometry g{5, 4};
    const Mat x = random_mat(3, g.size(), rng);
    Mat cols(27, static_cast<Eigen::Index>(g.size()));
    im2col3x3(x.data(), 3, g, cols.data());
    const Mat c = random_mat(27, g.size(), rng);
    Mat back = Mat::Zero(3, static_cast<Eigen::Index>(g.size()));
    col2im3x3_add(c.data(), 3, g, back.data());
    CHECK(dot(cols, c) == doctest::Approx(dot(x, back)).epsilon(1e-12));
    // centre tap is the pixel itself, corners see zero padding
    CHECK(cols(4, 6) == x(0, 6));
    CHECK(cols(0, 0) == 0.0);
}

TEST_CASE("average pool floors odd sizes") {
    const Geometry g{5, 3};
    CHECK(pooled(g) == Geometry{2, 1});
    Mat x(1, 15);
    for (int i = 0; i < 15; ++i) x(0, i) = i;
    const Mat y = avgpool2x2_forward(x, g);
    REQUIRE(y.cols() == 2);
    CHECK(y(0, 0) == doctest::Approx((0 + 1 + 3 + 4) / 4.0));
    CHECK(y(0, 1) == doctest::Approx((6 + 7 + 9 + 10) / 4.0));
    std::mt19937_64 rng(2);
    const Mat d = random_mat(1, 2, rng);
    CHECK(dot(y, d) == doctest::Approx(dot(x, avgpool2x2_backward(d, g))));
}

TEST_CASE("gradient check: 3x3 convolution") { CHECK(gradcheck::conv_error() < kGradTol); }

TEST_CASE("gradient check: dense block") { CHECK(gradcheck::dense_block_error() < kGradTol); }

TEST_CASE("gradient check: transition") { CHECK(gradcheck::transition_error() < kGradTol); }

TEST_CASE("gradient check: logistic head") { CHECK(gradcheck::head_error() < kGradTol); }

TEST_CASE("gradient check: binary cross-entropy") {
    CHECK(gradcheck::bce_error() < 1e-6);
    CHECK(bce_with_logit(0.0, 1) == doctest::Approx(std::log(2.0)));
}

TEST_CASE("gradient check: whole network on 1x8x8") {
    for (std::uint64_t seed : {7u, 8u}) CHECK(gradcheck::network_error(seed) < kGradTol);
}

TEST_CASE("dense block channel law") {
    for (std::size_t in : {1u, 3u, 16u})
        for (std::size_t layers : {1u, 2u, 4u, 6u})
            for (std::size_t k : {1u, 4u, 12u}) {
                std::size_t off = 0;
                const DenseBlock b(in, layers, k, off);
                CHECK(b.out_channels() == in + layers * k);
            }
    std::size_t off = 0;
    CHECK(DenseBlock(16, 4, 12, off).out_channels() == 64);
}

TEST_CASE("network shape at the default input") {
    const DenseCnn net(CnnConfig{}, {128, 10});
    REQUIRE(net.block_geometry().size() == 2);
    CHECK(net.block_geometry()[0] == Geometry{128, 10});
    CHECK(net.block_geometry()[1] == Geometry{64, 5});
    CHECK(net.blocks()[0].out_channels() == 64);
    CHECK(net.transitions()[0].out_channels() == 32);
    CHECK(net.blocks()[1].out_channels() == 80);
    CHECK(net.head().in_channels() == 80);
}

TEST_CASE("zero input with zero head scores one half") {
    const DenseCnn net(CnnConfig{}, {8, 8});
    const auto p = net.init_params(1);
    DenseCnn::Workspace ws;
    const std::vector<double> x(64, 0.0);
    CHECK(net.forward(p.data(), x, ws) == 0.0);
    CHECK(sigmoid(net.forward(p.data(), x, ws)) == 0.5);
}

TEST_CASE("early stop rule") {
    const auto h = history({0.6, 0.7, 0.7, 0.7, 0.7, 0.7, 0.7});
    for (std::size_t n = 1; n < h.size(); ++n)
        CHECK_FALSE(early_stop(std::span(h).first(n), 5).stop);
    const auto d = early_stop(h, 5);
    CHECK(d.stop);
    CHECK(d.best_epoch == 1);

    std::vector<double> rising;
    for (int i = 0; i < 50; ++i) {
        rising.push_back(0.01 * i);
        CHECK_FALSE(early_stop(rising, 1).stop);
    }

    const auto reset = history({0.9, 0.8, 0.95});
    CHECK_FALSE(early_stop(std::span(reset).first(2), 2).stop);
    const auto r = early_stop(reset, 2);
    CHECK_FALSE(r.stop);
    CHECK(r.best_epoch == 2);
    CHECK(early_stop(history({0.9, 0.8, 0.95, 0.9, 0.9}), 2).stop);
    CHECK_THROWS_AS(early_stop(std::span<const double>{}, 2), DomainError);
}

TEST_CASE("cnn learns a bright-patch pattern and restores the best epoch") {
    std::mt19937_64 rng(8);
    std::uniform_real_distribution<double> u(0.0, 0.3);
    auto make = [&](std::size_t n) {
        LabeledSet s;
        s.rows = 8;
        s.cols = 6;
        for (std::size_t i = 0; i < n; ++i) {
            const int y = static_cast<int>(i % 2);
            for (std::size_t j = 0; j < 48; ++j) {
                double v = u(rng);
                if (y && j / 6 < 2 && j % 6 < 3) v += 0.7;
                s.x.push_back(v);
            }
            s.y.push_back(y);
            s.experiment.push_back(0);
            s.t.push_back(0);
        }
        return s;
    };
    const auto train = make(64);
    const auto val = make(32);
    CnnConfig c;
    c.initial_channels = 4;
    c.layers_per_block = 2;
    c.growth = 4;
    c.epochs = 30;
    c.patience = 4;
    c.batch_size = 8;
    CnnClassifier m(c);
    m.fit(train, val);
    const auto& h = m.accuracy_history();
    REQUIRE_FALSE(h.empty());
    CHECK(h.size() <= 30);
    CHECK(m.best_epoch() == early_stop(h, c.patience).best_epoch);
    CHECK(oracle::accuracy(m.score_all(val), val.y) == doctest::Approx(h[m.best_epoch()]));
    CHECK(h[m.best_epoch()] >= 0.9);

    ByteWriter w;
    m.save_payload(w);
    CnnClassifier back(c);
    const auto bytes = w.bytes();
    ByteReader r(bytes);
    back.load_payload(r);
    CHECK(back.score_all(val) == m.score_all(val));
}

TEST_CASE("cnn config validation") {
    CnnConfig c;
    c.growth = 0;
    CHECK_THROWS_AS(c.validate(), DomainError);
    CHECK_THROWS_AS(CnnConfig::from_json({{"depth", 3}}), DomainError);
    const auto j = CnnConfig{}.to_json();
    CHECK(CnnConfig::from_json(j).to_json() == j);
}

}  // TEST_SUITE
