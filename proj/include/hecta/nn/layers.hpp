#pragma once

// Batched layers. Activations are (features x batch) matrices, one column per
// sample; parameters live in a ParamStore under "<layer name>.<param>".

#include <cmath>
#include <stdexcept>
#include <string>

#include "hecta/nn/tensor.hpp"

namespace hecta::nn {

template <typename Scalar>
Matrix<Scalar> relu(const Matrix<Scalar>& x) {
    return x.cwiseMax(Scalar(0));
}

// Gradient of relu evaluated at pre-activation `x`.
template <typename Scalar>
Matrix<Scalar> relu_backward(const Matrix<Scalar>& x, const Matrix<Scalar>& dy) {
    return (x.array() > Scalar(0)).select(dy, Scalar(0));
}

template <typename Scalar>
struct Dense {
    std::string name;
    Index in = 0;
    Index out = 0;

    std::string weight() const { return name + ".w"; }
    std::string bias() const { return name + ".b"; }

    void declare(ParamStore<Scalar>& p) const {
        p.add(weight(), {out, in});
        p.add(bias(), {out});
    }

    template <typename Rng>
    void init(ParamStore<Scalar>& p, Rng& rng) const {
        const Scalar bound = Scalar(1) / std::sqrt(static_cast<Scalar>(in));
        init_uniform(p.at(weight()), bound, rng);
        init_uniform(p.at(bias()), bound, rng);
    }

    Matrix<Scalar> forward(const ParamStore<Scalar>& p, const Matrix<Scalar>& x) const {
        if (x.rows() != in) throw std::invalid_argument(name + ": input has wrong feature count");
        Matrix<Scalar> y = p.matrix(weight()) * x;
        y.colwise() += p.vector(bias());
        return y;
    }

    // Accumulates parameter gradients into `g`; returns dL/dx unless not requested.
    Matrix<Scalar> backward(const ParamStore<Scalar>& p, ParamStore<Scalar>& g, const Matrix<Scalar>& x,
                            const Matrix<Scalar>& dy, bool need_input_grad = true) const {
        g.matrix(weight()).noalias() += dy * x.transpose();
        g.vector(bias()) += dy.rowwise().sum();
        if (!need_input_grad) return {};
        return p.matrix(weight()).transpose() * dy;
    }
};

// Valid (unpadded) stride-1 2-D convolution over channel-major planes.
template <typename Scalar>
struct Conv2d {
    std::string name;
    Index in_channels = 0;
    Index out_channels = 0;
    Index kernel = 3;
    Index height = 0;
    Index width = 0;

    struct Cache {
        Matrix<Scalar> patches;  // (out pixels * batch) x (in_channels * kernel^2)
        Index batch = 0;
    };

    Index out_height() const { return height - kernel + 1; }
    Index out_width() const { return width - kernel + 1; }
    Index input_size() const { return in_channels * height * width; }
    Index output_size() const { return out_channels * out_height() * out_width(); }
    Index patch_size() const { return in_channels * kernel * kernel; }

    std::string weight() const { return name + ".w"; }
    std::string bias() const { return name + ".b"; }

    void declare(ParamStore<Scalar>& p) const {
        if (out_height() <= 0 || out_width() <= 0) throw std::invalid_argument(name + ": input smaller than kernel");
        p.add(weight(), {out_channels, patch_size()});
        p.add(bias(), {out_channels});
    }

    template <typename Rng>
    void init(ParamStore<Scalar>& p, Rng& rng) const {
        const Scalar bound = Scalar(1) / std::sqrt(static_cast<Scalar>(patch_size()));
        init_uniform(p.at(weight()), bound, rng);
        init_uniform(p.at(bias()), bound, rng);
    }

    Matrix<Scalar> forward(const ParamStore<Scalar>& p, const Matrix<Scalar>& x, Cache* cache = nullptr) const {
        if (x.rows() != input_size()) throw std::invalid_argument(name + ": input planes do not match");
        const Index oh = out_height(), ow = out_width(), pixels = oh * ow, batch = x.cols();
        Matrix<Scalar> patches(pixels * batch, patch_size());
        for (Index b = 0; b < batch; ++b) {
            for (Index c = 0; c < in_channels; ++c) {
                for (Index ky = 0; ky < kernel; ++ky) {
                    for (Index kx = 0; kx < kernel; ++kx) {
                        const Index column = (c * kernel + ky) * kernel + kx;
                        for (Index oy = 0; oy < oh; ++oy) {
                            const Scalar* src = x.col(b).data() + (c * height + oy + ky) * width + kx;
                            Scalar* dst = patches.col(column).data() + b * pixels + oy * ow;
                            std::copy(src, src + ow, dst);
                        }
                    }
                }
            }
        }
        const Matrix<Scalar> response = p.matrix(weight()) * patches.transpose();  // out x (pixels * batch)
        Matrix<Scalar> y(output_size(), batch);
        for (Index b = 0; b < batch; ++b) {
            Eigen::Map<Matrix<Scalar>> yb(y.col(b).data(), pixels, out_channels);
            yb = response.middleCols(b * pixels, pixels).transpose();
            yb.rowwise() += p.vector(bias()).transpose();
        }
        if (cache) {
            cache->patches = std::move(patches);
            cache->batch = batch;
        }
        return y;
    }

    Matrix<Scalar> backward(const ParamStore<Scalar>& p, ParamStore<Scalar>& g, const Cache& cache,
                            const Matrix<Scalar>& dy, bool need_input_grad = true) const {
        const Index oh = out_height(), ow = out_width(), pixels = oh * ow, batch = cache.batch;
        Matrix<Scalar> dresponse(out_channels, pixels * batch);
        for (Index b = 0; b < batch; ++b) {
            Eigen::Map<const Matrix<Scalar>> dyb(dy.col(b).data(), pixels, out_channels);
            dresponse.middleCols(b * pixels, pixels) = dyb.transpose();
        }
        g.matrix(weight()).noalias() += dresponse * cache.patches;
        g.vector(bias()) += dresponse.rowwise().sum();
        if (!need_input_grad) return {};

        const Matrix<Scalar> dpatches = dresponse.transpose() * p.matrix(weight());
        Matrix<Scalar> dx = Matrix<Scalar>::Zero(input_size(), batch);
        for (Index b = 0; b < batch; ++b) {
            for (Index c = 0; c < in_channels; ++c) {
                for (Index ky = 0; ky < kernel; ++ky) {
                    for (Index kx = 0; kx < kernel; ++kx) {
                        const Index column = (c * kernel + ky) * kernel + kx;
                        for (Index oy = 0; oy < oh; ++oy) {
                            const Scalar* src = dpatches.col(column).data() + b * pixels + oy * ow;
                            Scalar* dst = dx.col(b).data() + (c * height + oy + ky) * width + kx;
                            for (Index ox = 0; ox < ow; ++ox) dst[ox] += src[ox];
                        }
                    }
                }
            }
        }
        return dx;
    }
};

// 2x2 max pooling with stride 2 (floor on odd sizes). Ties route to the first
// index in window order.
template <typename Scalar>
struct MaxPool2 {
    Index channels = 0;
    Index height = 0;
    Index width = 0;

    struct Cache {
        Eigen::Matrix<Index, Eigen::Dynamic, Eigen::Dynamic> argmax;
    };

    Index out_height() const { return height / 2; }
    Index out_width() const { return width / 2; }
    Index input_size() const { return channels * height * width; }
    Index output_size() const { return channels * out_height() * out_width(); }

    Matrix<Scalar> forward(const Matrix<Scalar>& x, Cache* cache = nullptr) const {
        if (x.rows() != input_size()) throw std::invalid_argument("maxpool: input planes do not match");
        const Index oh = out_height(), ow = out_width(), batch = x.cols();
        Matrix<Scalar> y(output_size(), batch);
        Eigen::Matrix<Index, Eigen::Dynamic, Eigen::Dynamic> argmax(output_size(), batch);
        for (Index b = 0; b < batch; ++b) {
            for (Index c = 0; c < channels; ++c) {
                for (Index oy = 0; oy < oh; ++oy) {
                    for (Index ox = 0; ox < ow; ++ox) {
                        Index best = (c * height + 2 * oy) * width + 2 * ox;
                        for (Index dy = 0; dy < 2; ++dy) {
                            for (Index dx = 0; dx < 2; ++dx) {
                                const Index i = (c * height + 2 * oy + dy) * width + 2 * ox + dx;
                                if (x(i, b) > x(best, b)) best = i;
                            }
                        }
                        const Index o = (c * oh + oy) * ow + ox;
                        y(o, b) = x(best, b);
                        argmax(o, b) = best;
                    }
                }
            }
        }
        if (cache) cache->argmax = std::move(argmax);
        return y;
    }

    Matrix<Scalar> backward(const Cache& cache, const Matrix<Scalar>& dy) const {
        Matrix<Scalar> dx = Matrix<Scalar>::Zero(input_size(), dy.cols());
        for (Index b = 0; b < dy.cols(); ++b)
            for (Index o = 0; o < dy.rows(); ++o) dx(cache.argmax(o, b), b) += dy(o, b);
        return dx;
    }
};

// Gated recurrent unit, gates ordered (reset, update, candidate):
//   r = sigmoid(W_ir x + b_ir + W_hr h + b_hr)
//   z = sigmoid(W_iz x + b_iz + W_hz h + b_hz)
//   n = tanh(W_in x + b_in + r * (W_hn h + b_hn))
//   h' = (1 - z) * n + z * h
template <typename Scalar>
struct Gru {
    std::string name;
    Index in = 0;
    Index hidden = 0;

    struct Cache {
        Matrix<Scalar> x, h, r, z, n, hn;
    };

    std::string w_ih() const { return name + ".w_ih"; }
    std::string w_hh() const { return name + ".w_hh"; }
    std::string b_ih() const { return name + ".b_ih"; }
    std::string b_hh() const { return name + ".b_hh"; }

    void declare(ParamStore<Scalar>& p) const {
        p.add(w_ih(), {3 * hidden, in});
        p.add(w_hh(), {3 * hidden, hidden});
        p.add(b_ih(), {3 * hidden});
        p.add(b_hh(), {3 * hidden});
    }

    template <typename Rng>
    void init(ParamStore<Scalar>& p, Rng& rng) const {
        const Scalar bound = Scalar(1) / std::sqrt(static_cast<Scalar>(hidden));
        for (const auto& n : {w_ih(), w_hh(), b_ih(), b_hh()}) init_uniform(p.at(n), bound, rng);
    }

    Matrix<Scalar> forward(const ParamStore<Scalar>& p, const Matrix<Scalar>& x, const Matrix<Scalar>& h,
                           Cache* cache = nullptr) const {
        if (x.rows() != in || h.rows() != hidden || x.cols() != h.cols())
            throw std::invalid_argument(name + ": shape mismatch");
        if (!x.allFinite() || !h.allFinite()) throw std::domain_error(name + ": non-finite input");
        Matrix<Scalar> gi = p.matrix(w_ih()) * x;
        gi.colwise() += p.vector(b_ih());
        Matrix<Scalar> gh = p.matrix(w_hh()) * h;
        gh.colwise() += p.vector(b_hh());
        const Index H = hidden;
        auto sigmoid = [](const auto& a) { return (Scalar(1) + (-a.array()).exp()).inverse().matrix(); };
        Matrix<Scalar> r = sigmoid(gi.topRows(H) + gh.topRows(H));
        Matrix<Scalar> z = sigmoid(gi.middleRows(H, H) + gh.middleRows(H, H));
        Matrix<Scalar> hn = gh.bottomRows(H);
        Matrix<Scalar> n = (gi.bottomRows(H).array() + r.array() * hn.array()).tanh().matrix();
        Matrix<Scalar> out = ((Scalar(1) - z.array()) * n.array() + z.array() * h.array()).matrix();
        if (cache) *cache = Cache{x, h, std::move(r), std::move(z), std::move(n), std::move(hn)};
        return out;
    }

    struct InputGrads {
        Matrix<Scalar> dx;
        Matrix<Scalar> dh;
    };

    InputGrads backward(const ParamStore<Scalar>& p, ParamStore<Scalar>& g, const Cache& c,
                        const Matrix<Scalar>& dout, bool need_input_grad = true) const {
        const Index H = hidden;
        const auto dn = (dout.array() * (Scalar(1) - c.z.array())).eval();
        const auto dz = (dout.array() * (c.h.array() - c.n.array())).eval();
        const auto dan = (dn * (Scalar(1) - c.n.array().square())).eval();
        const auto dr = (dan * c.hn.array()).eval();
        const auto daz = (dz * c.z.array() * (Scalar(1) - c.z.array())).eval();
        const auto dar = (dr * c.r.array() * (Scalar(1) - c.r.array())).eval();

        Matrix<Scalar> dgi(3 * H, dout.cols());
        dgi.topRows(H) = dar.matrix();
        dgi.middleRows(H, H) = daz.matrix();
        dgi.bottomRows(H) = dan.matrix();
        Matrix<Scalar> dgh = dgi;
        dgh.bottomRows(H) = (dan * c.r.array()).matrix();

        g.matrix(w_ih()).noalias() += dgi * c.x.transpose();
        g.vector(b_ih()) += dgi.rowwise().sum();
        g.matrix(w_hh()).noalias() += dgh * c.h.transpose();
        g.vector(b_hh()) += dgh.rowwise().sum();

        InputGrads grads;
        grads.dh = p.matrix(w_hh()).transpose() * dgh;
        grads.dh.array() += dout.array() * c.z.array();
        if (need_input_grad) grads.dx = p.matrix(w_ih()).transpose() * dgi;
        return grads;
    }
};

}  // namespace hecta::nn
