// SPDX-License-Identifier: Apache-2.0

#include "cloudmd/models/cnn_layers.hpp"

#include <algorithm>
#include <cmath>

#include "cloudmd/domain.hpp"

namespace cloudmd::models::cnn {

namespace {

// x range [lo, hi) whose source column x + kx - 1 lies inside [0, w)
struct Span {
    std::size_t lo, hi;
};
Span valid_x(std::size_t kx, std::size_t w) {
    const std::size_t lo = kx == 0 ? 1 : 0;
    const std::size_t hi = kx == 2 ? (w == 0 ? 0 : w - 1) : w;
    return {std::min(lo, hi), hi};
}

Mat relu(const Mat& m) { return m.cwiseMax(0.0); }

// dout masked by the ReLU derivative at the pre-activation `pre`
Mat relu_mask(const Mat& grad, const Mat& pre) { return (pre.array() > 0.0).select(grad, 0.0); }

}  // namespace

void im2col3x3(const double* in, std::size_t channels, Geometry g, double* cols) {
    const std::size_t n = g.size();
    for (std::size_t c = 0; c < channels; ++c) {
        const double* src = in + c * n;
        for (std::size_t ky = 0; ky < 3; ++ky) {
            for (std::size_t kx = 0; kx < 3; ++kx) {
                double* row = cols + (c * 9 + ky * 3 + kx) * n;
                const Span xs = valid_x(kx, g.w);
                for (std::size_t y = 0; y < g.h; ++y) {
                    double* dst = row + y * g.w;
                    const std::ptrdiff_t sy = static_cast<std::ptrdiff_t>(y + ky) - 1;
                    if (sy < 0 || sy >= static_cast<std::ptrdiff_t>(g.h)) {
                        std::fill(dst, dst + g.w, 0.0);
                        continue;
                    }
                    std::fill(dst, dst + xs.lo, 0.0);
                    const double* s = src + static_cast<std::size_t>(sy) * g.w;
                    for (std::size_t x = xs.lo; x < xs.hi; ++x) dst[x] = s[x + kx - 1];
                    std::fill(dst + xs.hi, dst + g.w, 0.0);
                }
            }
        }
    }
}

void col2im3x3_add(const double* cols, std::size_t channels, Geometry g, double* in_grad) {
    const std::size_t n = g.size();
    for (std::size_t c = 0; c < channels; ++c) {
        double* dst = in_grad + c * n;
        for (std::size_t ky = 0; ky < 3; ++ky) {
            for (std::size_t kx = 0; kx < 3; ++kx) {
                const double* row = cols + (c * 9 + ky * 3 + kx) * n;
                const Span xs = valid_x(kx, g.w);
                for (std::size_t y = 0; y < g.h; ++y) {
                    const std::ptrdiff_t sy = static_cast<std::ptrdiff_t>(y + ky) - 1;
                    if (sy < 0 || sy >= static_cast<std::ptrdiff_t>(g.h)) continue;
                    const double* s = row + y * g.w;
                    double* d = dst + static_cast<std::size_t>(sy) * g.w;
                    for (std::size_t x = xs.lo; x < xs.hi; ++x) d[x + kx - 1] += s[x];
                }
            }
        }
    }
}

Geometry pooled(Geometry g) { return {g.h / 2, g.w / 2}; }

Mat avgpool2x2_forward(const Mat& in, Geometry g) {
    const Geometry o = pooled(g);
    Mat out(in.rows(), static_cast<Eigen::Index>(o.size()));
    for (Eigen::Index c = 0; c < in.rows(); ++c) {
        const double* src = in.row(c).data();
        double* dst = out.row(c).data();
        for (std::size_t y = 0; y < o.h; ++y)
            for (std::size_t x = 0; x < o.w; ++x) {
                const double* p = src + 2 * y * g.w + 2 * x;
                dst[y * o.w + x] = 0.25 * (p[0] + p[1] + p[g.w] + p[g.w + 1]);
            }
    }
    return out;
}

Mat avgpool2x2_backward(const Mat& dout, Geometry g) {
    const Geometry o = pooled(g);
    Mat din = Mat::Zero(dout.rows(), static_cast<Eigen::Index>(g.size()));
    for (Eigen::Index c = 0; c < dout.rows(); ++c) {
        const double* src = dout.row(c).data();
        double* dst = din.row(c).data();
        for (std::size_t y = 0; y < o.h; ++y)
            for (std::size_t x = 0; x < o.w; ++x) {
                const double v = 0.25 * src[y * o.w + x];
                double* p = dst + 2 * y * g.w + 2 * x;
                p[0] += v;
                p[1] += v;
                p[g.w] += v;
                p[g.w + 1] += v;
            }
    }
    return din;
}

Conv2d::Conv2d(std::size_t in, std::size_t out, std::size_t k, std::size_t& next_offset)
    : in_channels(in), out_channels(out), kernel(k), offset(next_offset) {
    if (in == 0 || out == 0 || (k != 1 && k != 3)) throw DomainError("unsupported convolution shape");
    next_offset += param_count();
}

void Conv2d::init(double* params, std::mt19937_64& rng) const {
    std::normal_distribution<double> normal(0.0, std::sqrt(2.0 / static_cast<double>(patch_rows())));
    double* w = params + offset;
    for (std::size_t i = 0; i < weight_count(); ++i) w[i] = normal(rng);
    std::fill(w + weight_count(), w + param_count(), 0.0);
}

void Conv2d::forward(const double* params, const double* cols, std::size_t n, Mat& out) const {
    const auto rows = static_cast<Eigen::Index>(patch_rows());
    const auto outs = static_cast<Eigen::Index>(out_channels);
    const auto cn = static_cast<Eigen::Index>(n);
    Eigen::Map<const Mat> w(params + offset, outs, rows);
    Eigen::Map<const Eigen::VectorXd> b(params + offset + weight_count(), outs);
    Eigen::Map<const Mat> c(cols, rows, cn);
    out.resize(outs, cn);
    out.noalias() = w * c;
    out.colwise() += b;
}

void Conv2d::backward(const double* params, const double* cols, const Mat& dout, double* grads, double* dcols) const {
    const auto rows = static_cast<Eigen::Index>(patch_rows());
    const auto outs = static_cast<Eigen::Index>(out_channels);
    Eigen::Map<const Mat> c(cols, rows, dout.cols());
    Eigen::Map<Mat> dw(grads + offset, outs, rows);
    Eigen::Map<Eigen::VectorXd> db(grads + offset + weight_count(), outs);
    dw.noalias() += dout * c.transpose();
    db += dout.rowwise().sum();
    if (dcols) {
        Eigen::Map<const Mat> w(params + offset, outs, rows);
        Eigen::Map<Mat> dc(dcols, rows, dout.cols());
        dc.noalias() += w.transpose() * dout;
    }
}

Mat conv3x3_forward(const Conv2d& conv, const double* params, const Mat& in, Geometry g, ConvCache& cache) {
    if (static_cast<std::size_t>(in.rows()) != conv.in_channels || static_cast<std::size_t>(in.cols()) != g.size())
        throw DomainError("convolution input shape mismatch");
    cache.cols.resize(static_cast<Eigen::Index>(conv.patch_rows()), static_cast<Eigen::Index>(g.size()));
    im2col3x3(in.data(), conv.in_channels, g, cache.cols.data());
    Mat out;
    conv.forward(params, cache.cols.data(), g.size(), out);
    return out;
}

Mat conv3x3_backward(const Conv2d& conv, const double* params, const Mat& dout, Geometry g, const ConvCache& cache,
                     double* grads) {
    Mat dcols = Mat::Zero(cache.cols.rows(), cache.cols.cols());
    conv.backward(params, cache.cols.data(), dout, grads, dcols.data());
    Mat din = Mat::Zero(static_cast<Eigen::Index>(conv.in_channels), static_cast<Eigen::Index>(g.size()));
    col2im3x3_add(dcols.data(), conv.in_channels, g, din.data());
    return din;
}

DenseBlock::DenseBlock(std::size_t in_channels, std::size_t layers, std::size_t growth, std::size_t& next_offset)
    : in_channels_(in_channels), growth_(growth) {
    if (in_channels == 0 || layers == 0 || growth == 0) throw DomainError("dense block sizes must be positive");
    convs_.reserve(layers);
    for (std::size_t i = 0; i < layers; ++i) convs_.emplace_back(in_channels + i * growth, growth, 3, next_offset);
}

std::size_t DenseBlock::param_count() const {
    std::size_t n = 0;
    for (const auto& c : convs_) n += c.param_count();
    return n;
}

void DenseBlock::init(double* params, std::mt19937_64& rng) const {
    for (const auto& c : convs_) c.init(params, rng);
}

void DenseBlock::forward(const double* params, const Mat& in, Geometry g, Cache& cache) const {
    const std::size_t n = g.size();
    if (static_cast<std::size_t>(in.rows()) != in_channels_ || static_cast<std::size_t>(in.cols()) != n)
        throw DomainError("dense block input shape mismatch");
    const auto en = static_cast<Eigen::Index>(n);
    cache.g = g;
    cache.stack.resize(static_cast<Eigen::Index>(out_channels()), en);
    cache.stack.topRows(in.rows()) = in;
    // the last layer's output is never convolved inside the block
    const std::size_t patch_channels = out_channels() - growth_;
    cache.cols.resize(static_cast<Eigen::Index>(patch_channels * 9), en);
    {
        const Mat act = relu(in);
        im2col3x3(act.data(), in_channels_, g, cache.cols.data());
    }
    Mat out;
    for (std::size_t i = 0; i < convs_.size(); ++i) {
        const std::size_t c0 = in_channels_ + i * growth_;
        convs_[i].forward(params, cache.cols.data(), n, out);
        cache.stack.middleRows(static_cast<Eigen::Index>(c0), static_cast<Eigen::Index>(growth_)) = out;
        if (i + 1 < convs_.size()) {
            const Mat act = relu(out);
            im2col3x3(act.data(), growth_, g, cache.cols.data() + c0 * 9 * n);
        }
    }
}

Mat DenseBlock::backward(const double* params, const Mat& dstack, const Cache& cache, double* grads) const {
    const std::size_t n = cache.g.size();
    const auto en = static_cast<Eigen::Index>(n);
    Mat dcols = Mat::Zero(cache.cols.rows(), en);
    Mat scatter;
    for (std::size_t i = convs_.size(); i-- > 0;) {
        const auto c0 = static_cast<Eigen::Index>(in_channels_ + i * growth_);
        const auto k = static_cast<Eigen::Index>(growth_);
        Mat dout = dstack.middleRows(c0, k);
        if (i + 1 < convs_.size()) {
            // gradient reaching this layer's output through the later layers
            scatter.setZero(k, en);
            col2im3x3_add(dcols.data() + static_cast<std::size_t>(c0) * 9 * n, growth_, cache.g, scatter.data());
            dout += relu_mask(scatter, cache.stack.middleRows(c0, k));
        }
        convs_[i].backward(params, cache.cols.data(), dout, grads, dcols.data());
    }
    const auto cin = static_cast<Eigen::Index>(in_channels_);
    scatter.setZero(cin, en);
    col2im3x3_add(dcols.data(), in_channels_, cache.g, scatter.data());
    return dstack.topRows(cin) + relu_mask(scatter, cache.stack.topRows(cin));
}

Transition::Transition(std::size_t in_channels, std::size_t& next_offset) {
    if (in_channels < 2) throw DomainError("transition needs at least two input channels");
    conv_ = Conv2d(in_channels, in_channels / 2, 1, next_offset);
}

void Transition::init(double* params, std::mt19937_64& rng) const { conv_.init(params, rng); }

Mat Transition::forward(const double* params, const Mat& in, Geometry g, Cache& cache) const {
    if (static_cast<std::size_t>(in.rows()) != conv_.in_channels || static_cast<std::size_t>(in.cols()) != g.size())
        throw DomainError("transition input shape mismatch");
    cache.g = g;
    cache.act = relu(in);
    Mat mid;
    conv_.forward(params, cache.act.data(), g.size(), mid);
    return avgpool2x2_forward(mid, g);
}

Mat Transition::backward(const double* params, const Mat& dout, const Cache& cache, double* grads) const {
    const Mat dmid = avgpool2x2_backward(dout, cache.g);
    Mat dact = Mat::Zero(cache.act.rows(), cache.act.cols());
    conv_.backward(params, cache.act.data(), dmid, grads, dact.data());
    return relu_mask(dact, cache.act);
}

LogisticHead::LogisticHead(std::size_t in_channels, std::size_t& next_offset)
    : in_channels_(in_channels), offset_(next_offset) {
    if (in_channels == 0) throw DomainError("logistic head needs input channels");
    next_offset += param_count();
}

double LogisticHead::forward(const double* params, const Mat& in, Cache& cache) const {
    if (static_cast<std::size_t>(in.rows()) != in_channels_ || in.cols() == 0)
        throw DomainError("logistic head input shape mismatch");
    cache.act = relu(in);
    cache.pooled = cache.act.rowwise().mean();
    Eigen::Map<const Eigen::VectorXd> w(params + offset_, static_cast<Eigen::Index>(in_channels_));
    return w.dot(cache.pooled) + params[offset_ + in_channels_];
}

Mat LogisticHead::backward(const double* params, double dlogit, const Cache& cache, double* grads) const {
    const auto c = static_cast<Eigen::Index>(in_channels_);
    Eigen::Map<const Eigen::VectorXd> w(params + offset_, c);
    Eigen::Map<Eigen::VectorXd> dw(grads + offset_, c);
    dw += dlogit * cache.pooled;
    grads[offset_ + in_channels_] += dlogit;
    const double inv = 1.0 / static_cast<double>(cache.act.cols());
    Mat din(c, cache.act.cols());
    for (Eigen::Index r = 0; r < c; ++r) {
        const double g = dlogit * w[r] * inv;
        din.row(r) = (cache.act.row(r).array() > 0.0).select(Eigen::RowVectorXd::Constant(cache.act.cols(), g), 0.0);
    }
    return din;
}

double bce_with_logit(double z, int y) {
    const double m = y == 1 ? z : -z;
    return m > 0.0 ? std::log1p(std::exp(-m)) : -m + std::log1p(std::exp(m));
}

double bce_grad(double z, int y) {
    const double p = z >= 0.0 ? 1.0 / (1.0 + std::exp(-z)) : std::exp(z) / (1.0 + std::exp(z));
    return p - static_cast<double>(y);
}

}  // namespace cloudmd::models::cnn
