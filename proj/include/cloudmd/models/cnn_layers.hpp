// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstddef>
#include <random>
#include <vector>

#include <Eigen/Dense>

namespace cloudmd::models::cnn {

/// Activations are channels x (height * width), row-major.
using Mat = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

struct Geometry {
    std::size_t h = 0;
    std::size_t w = 0;

    std::size_t size() const noexcept { return h * w; }
    bool operator==(const Geometry&) const = default;
};

/// Zero-padded 3x3 patches. Row c*9 + ky*3 + kx, column y*w + x.
void im2col3x3(const double* in, std::size_t channels, Geometry g, double* cols);
/// Adjoint of im2col3x3: scatters-adds patch gradients back into `in_grad`.
void col2im3x3_add(const double* cols, std::size_t channels, Geometry g, double* in_grad);

/// 2x2 average pooling; odd trailing rows and columns are dropped.
Geometry pooled(Geometry g);
Mat avgpool2x2_forward(const Mat& in, Geometry g);
Mat avgpool2x2_backward(const Mat& dout, Geometry g);

/// Convolution weights (out x in*k*k) followed by out biases, at `offset` in a
/// flat parameter vector. Operates on precomputed columns.
struct Conv2d {
    std::size_t in_channels = 0;
    std::size_t out_channels = 0;
    std::size_t kernel = 3;
    std::size_t offset = 0;

    Conv2d() = default;
    Conv2d(std::size_t in, std::size_t out, std::size_t k, std::size_t& next_offset);

    std::size_t patch_rows() const noexcept { return in_channels * kernel * kernel; }
    std::size_t weight_count() const noexcept { return out_channels * patch_rows(); }
    std::size_t param_count() const noexcept { return weight_count() + out_channels; }

    /// He-normal weights, zero biases.
    void init(double* params, std::mt19937_64& rng) const;
    /// out = W * cols + b, cols is patch_rows() x n.
    void forward(const double* params, const double* cols, std::size_t n, Mat& out) const;
    /// Accumulates dW and db, and W^T dout into `dcols` (patch_rows() x n) when non-null.
    void backward(const double* params, const double* cols, const Mat& dout, double* grads, double* dcols) const;
};

/// Standalone 3x3 "same" convolution.
struct ConvCache {
    Mat cols;
};
Mat conv3x3_forward(const Conv2d& conv, const double* params, const Mat& in, Geometry g, ConvCache& cache);
Mat conv3x3_backward(const Conv2d& conv, const double* params, const Mat& dout, Geometry g, const ConvCache& cache,
                     double* grads);

/// Layer i applies ReLU and a 3x3 convolution to the concatenation of the block
/// input and every earlier layer output, producing `growth` new channels. The
/// block output is the full concatenation: in + layers * growth channels.
class DenseBlock {
public:
    struct Cache {
        Mat stack;  ///< block output
        Mat cols;   ///< patches of relu(stack), filled group by group
        Geometry g;
    };

    DenseBlock(std::size_t in_channels, std::size_t layers, std::size_t growth, std::size_t& next_offset);

    std::size_t in_channels() const noexcept { return in_channels_; }
    std::size_t out_channels() const noexcept { return in_channels_ + convs_.size() * growth_; }
    std::size_t param_count() const;
    const std::vector<Conv2d>& convs() const noexcept { return convs_; }

    void init(double* params, std::mt19937_64& rng) const;
    void forward(const double* params, const Mat& in, Geometry g, Cache& cache) const;
    Mat backward(const double* params, const Mat& dstack, const Cache& cache, double* grads) const;

private:
    std::size_t in_channels_;
    std::size_t growth_;
    std::vector<Conv2d> convs_;
};

/// ReLU, 1x1 convolution to floor(in / 2) channels, 2x2 average pool.
class Transition {
public:
    struct Cache {
        Mat act;  ///< relu(input)
        Geometry g;
    };

    Transition(std::size_t in_channels, std::size_t& next_offset);

    std::size_t out_channels() const noexcept { return conv_.out_channels; }
    const Conv2d& conv() const noexcept { return conv_; }

    void init(double* params, std::mt19937_64& rng) const;
    Mat forward(const double* params, const Mat& in, Geometry g, Cache& cache) const;
    Mat backward(const double* params, const Mat& dout, const Cache& cache, double* grads) const;

private:
    Conv2d conv_;
};

/// ReLU, global average pool, one linear unit. Produces the logit.
class LogisticHead {
public:
    struct Cache {
        Mat act;
        Eigen::VectorXd pooled;
    };

    LogisticHead(std::size_t in_channels, std::size_t& next_offset);

    std::size_t in_channels() const noexcept { return in_channels_; }
    std::size_t param_count() const noexcept { return in_channels_ + 1; }
    std::size_t offset() const noexcept { return offset_; }

    double forward(const double* params, const Mat& in, Cache& cache) const;
    Mat backward(const double* params, double dlogit, const Cache& cache, double* grads) const;

private:
    std::size_t in_channels_;
    std::size_t offset_;
};

/// Mean binary cross-entropy of one logit, and its derivative sigmoid(z) - y.
double bce_with_logit(double z, int y);
double bce_grad(double z, int y);

}  // namespace cloudmd::models::cnn
