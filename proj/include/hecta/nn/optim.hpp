#pragma once

#include <cmath>
#include <stdexcept>

#include "hecta/nn/tensor.hpp"

namespace hecta::nn {

template <typename Scalar>
Scalar global_norm(const ParamStore<Scalar>& grads) {
    Scalar sq = 0;
    for (const auto& [name, t] : grads) sq += t.data.squaredNorm();
    return std::sqrt(sq);
}

// Rescales all gradients so their joint L2 norm is at most `max_norm`.
// Returns the norm before clipping.
template <typename Scalar>
Scalar clip_global_norm(ParamStore<Scalar>& grads, Scalar max_norm) {
    const Scalar norm = global_norm(grads);
    if (std::isfinite(norm) && norm > max_norm && norm > 0) {
        const Scalar scale = max_norm / norm;
        for (auto& [name, t] : grads) t.data *= scale;
    }
    return norm;
}

// v <- alpha v + (1 - alpha) g^2;  w <- w - lr g / (sqrt(v) + eps)
template <typename Scalar>
class RmsProp {
public:
    explicit RmsProp(Scalar alpha = Scalar(0.99), Scalar eps = Scalar(1e-5)) : alpha_(alpha), eps_(eps) {}

    // Returns false, leaving everything untouched, when any gradient is non-finite.
    bool step(ParamStore<Scalar>& params, const ParamStore<Scalar>& grads, Scalar lr) {
        if (!params.same_layout(grads)) throw std::invalid_argument("rmsprop: gradient layout mismatch");
        if (!grads.all_finite()) return false;
        if (!square_avg_.same_layout(params)) square_avg_ = params.zeros_like();
        auto g = grads.begin();
        auto v = square_avg_.begin();
        for (auto p = params.begin(); p != params.end(); ++p, ++g, ++v) {
            auto& acc = v->second.data;
            const auto& grad = g->second.data;
            acc = alpha_ * acc + (Scalar(1) - alpha_) * grad.cwiseAbs2();
            p->second.data.array() -= lr * grad.array() / (acc.array().sqrt() + eps_);
        }
        if (!params.all_finite()) throw std::domain_error("rmsprop: parameters became non-finite");
        return true;
    }

    const ParamStore<Scalar>& square_avg() const { return square_avg_; }
    ParamStore<Scalar>& square_avg() { return square_avg_; }
    Scalar alpha() const { return alpha_; }
    Scalar eps() const { return eps_; }

private:
    Scalar alpha_;
    Scalar eps_;
    ParamStore<Scalar> square_avg_;
};

}  // namespace hecta::nn
