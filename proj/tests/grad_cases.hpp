#pragma once

// Finite-difference cases for every layer and the full training loss. Each case
// draws its inputs and parameters from `seed`; the scalar objective is a random
// linear functional of the layer output.

#include <memory>
#include <random>

#include "hecta/learning.hpp"
#include "hecta/nn/grad_check.hpp"
#include "hecta/nn/layers.hpp"
#include "support.hpp"

namespace hecta::test {

using nn::GradCheckable;
using nn::GradCheckOptions;
using nn::GradCheckReport;
using nn::GradSlot;
using M = nn::Matrix<double>;
using Store = nn::ParamStore<double>;

inline M random_matrix(Index rows, Index cols, std::mt19937_64& rng, double lo = -1.0, double hi = 1.0) {
    std::uniform_real_distribution<double> u(lo, hi);
    M m(rows, cols);
    for (Index i = 0; i < m.size(); ++i) m.data()[i] = u(rng);
    return m;
}

// Entries bounded away from zero, so relu and max-pool sit away from kinks.
inline M away_from_zero(Index rows, Index cols, std::mt19937_64& rng) {
    std::uniform_real_distribution<double> mag(0.1, 1.0);
    std::bernoulli_distribution sign(0.5);
    M m(rows, cols);
    for (Index i = 0; i < m.size(); ++i) m.data()[i] = sign(rng) ? mag(rng) : -mag(rng);
    return m;
}

// Copies into the existing buffer so slot pointers stay valid.
inline void copy_into(M& dst, const M& src) { dst.array() = src.array(); }

inline void add_store_slots(GradCheckable& f, Store& values, const Store& grads) {
    auto g = grads.begin();
    for (auto v = values.begin(); v != values.end(); ++v, ++g)
        f.slots.push_back({v->first, v->second.data.data(), g->second.data.data(), v->second.size()});
}

// State shared between the loss and backward closures.
struct LayerCase {
    Store params, grads;
    M x, dx, h, dh, weights;
};

inline GradCheckReport check_dense(std::uint64_t seed, const GradCheckOptions& opt = {}) {
    std::mt19937_64 rng(seed);
    nn::Dense<double> layer{"dense", 7, 5};
    auto c = std::make_shared<LayerCase>();
    layer.declare(c->params);
    layer.init(c->params, rng);
    c->grads = c->params.zeros_like();
    c->x = random_matrix(7, 3, rng);
    c->weights = random_matrix(5, 3, rng);
    copy_into(c->dx, M::Zero(7, 3));
    GradCheckable f;
    f.loss = [c, layer] { return (layer.forward(c->params, c->x).array() * c->weights.array()).sum(); };
    f.backward = [c, layer] {
        c->grads.set_zero();
        copy_into(c->dx, layer.backward(c->params, c->grads, c->x, c->weights));
    };
    add_store_slots(f, c->params, c->grads);
    f.slots.push_back({"x", c->x.data(), c->dx.data(), c->x.size()});
    return nn::grad_check(f, opt);
}

inline GradCheckReport check_relu(std::uint64_t seed, const GradCheckOptions& opt = {}) {
    std::mt19937_64 rng(seed);
    auto c = std::make_shared<LayerCase>();
    c->x = away_from_zero(12, 4, rng);
    c->weights = random_matrix(12, 4, rng);
    copy_into(c->dx, M::Zero(12, 4));
    GradCheckable f;
    f.loss = [c] { return (nn::relu(c->x).array() * c->weights.array()).sum(); };
    f.backward = [c] { copy_into(c->dx, nn::relu_backward(c->x, c->weights)); };
    f.slots.push_back({"x", c->x.data(), c->dx.data(), c->x.size()});
    return nn::grad_check(f, opt);
}

inline GradCheckReport check_conv(std::uint64_t seed, const GradCheckOptions& opt = {}) {
    std::mt19937_64 rng(seed);
    nn::Conv2d<double> layer{"conv", 3, 4, 3, 6, 5};
    auto c = std::make_shared<LayerCase>();
    layer.declare(c->params);
    layer.init(c->params, rng);
    c->grads = c->params.zeros_like();
    c->x = random_matrix(layer.input_size(), 2, rng);
    c->weights = random_matrix(layer.output_size(), 2, rng);
    copy_into(c->dx, M::Zero(c->x.rows(), c->x.cols()));
    GradCheckable f;
    f.loss = [c, layer] { return (layer.forward(c->params, c->x).array() * c->weights.array()).sum(); };
    f.backward = [c, layer] {
        c->grads.set_zero();
        typename nn::Conv2d<double>::Cache cache;
        layer.forward(c->params, c->x, &cache);
        copy_into(c->dx, layer.backward(c->params, c->grads, cache, c->weights));
    };
    add_store_slots(f, c->params, c->grads);
    f.slots.push_back({"x", c->x.data(), c->dx.data(), c->x.size()});
    return nn::grad_check(f, opt);
}

inline GradCheckReport check_pool(std::uint64_t seed, const GradCheckOptions& opt = {}) {
    std::mt19937_64 rng(seed);
    nn::MaxPool2<double> layer{3, 6, 7};  // odd width drops the last column
    auto c = std::make_shared<LayerCase>();
    c->x = random_matrix(layer.input_size(), 2, rng);
    c->weights = random_matrix(layer.output_size(), 2, rng);
    copy_into(c->dx, M::Zero(c->x.rows(), c->x.cols()));
    GradCheckable f;
    f.loss = [c, layer] { return (layer.forward(c->x).array() * c->weights.array()).sum(); };
    f.backward = [c, layer] {
        typename nn::MaxPool2<double>::Cache cache;
        layer.forward(c->x, &cache);
        copy_into(c->dx, layer.backward(cache, c->weights));
    };
    f.slots.push_back({"x", c->x.data(), c->dx.data(), c->x.size()});
    return nn::grad_check(f, opt);
}

// Conv, relu and pool chained as in the feature extractor.
inline GradCheckReport check_conv_block(std::uint64_t seed, const GradCheckOptions& opt = {}) {
    std::mt19937_64 rng(seed);
    nn::Conv2d<double> conv{"conv", 7, 10, 3, 8, 8};
    nn::MaxPool2<double> pool{10, 6, 6};
    auto c = std::make_shared<LayerCase>();
    conv.declare(c->params);
    conv.init(c->params, rng);
    c->grads = c->params.zeros_like();
    c->x = random_matrix(conv.input_size(), 2, rng);
    c->weights = random_matrix(pool.output_size(), 2, rng);
    copy_into(c->dx, M::Zero(c->x.rows(), c->x.cols()));
    GradCheckable f;
    f.loss = [c, conv, pool] {
        return (pool.forward(nn::relu(conv.forward(c->params, c->x))).array() * c->weights.array()).sum();
    };
    f.backward = [c, conv, pool] {
        c->grads.set_zero();
        typename nn::Conv2d<double>::Cache cc;
        typename nn::MaxPool2<double>::Cache pc;
        const M pre = conv.forward(c->params, c->x, &cc);
        pool.forward(nn::relu(pre), &pc);
        copy_into(c->dx, conv.backward(c->params, c->grads, cc, nn::relu_backward(pre, pool.backward(pc, c->weights))));
    };
    add_store_slots(f, c->params, c->grads);
    f.slots.push_back({"x", c->x.data(), c->dx.data(), c->x.size()});
    return nn::grad_check(f, opt);
}

// Two unrolled steps of a 128-unit GRU; checks parameters, inputs and the initial state.
inline GradCheckReport check_gru(std::uint64_t seed, GradCheckOptions opt = {}) {
    std::mt19937_64 rng(seed);
    nn::Gru<double> layer{"gru", 6, 128};
    auto c = std::make_shared<LayerCase>();
    layer.declare(c->params);
    layer.init(c->params, rng);
    c->grads = c->params.zeros_like();
    c->x = random_matrix(12, 2, rng);  // two stacked steps of 6
    c->h = random_matrix(128, 2, rng, -0.5, 0.5);
    c->weights = random_matrix(128, 2, rng);
    copy_into(c->dx, M::Zero(12, 2));
    c->dh = M::Zero(128, 2);
    GradCheckable f;
    f.loss = [c, layer] {
        const M h1 = layer.forward(c->params, c->x.topRows(6), c->h);
        return (layer.forward(c->params, c->x.bottomRows(6), h1).array() * c->weights.array()).sum();
    };
    f.backward = [c, layer] {
        c->grads.set_zero();
        typename nn::Gru<double>::Cache c1, c2;
        const M h1 = layer.forward(c->params, c->x.topRows(6), c->h, &c1);
        layer.forward(c->params, c->x.bottomRows(6), h1, &c2);
        const auto g2 = layer.backward(c->params, c->grads, c2, c->weights);
        const auto g1 = layer.backward(c->params, c->grads, c1, g2.dh);
        c->dx.topRows(6) = g1.dx;
        c->dx.bottomRows(6) = g2.dx;
        copy_into(c->dh, g1.dh);
    };
    add_store_slots(f, c->params, c->grads);
    f.slots.push_back({"x", c->x.data(), c->dx.data(), c->x.size()});
    f.slots.push_back({"h0", c->h.data(), c->dh.data(), c->h.size()});
    if (opt.max_coords == 0) opt.max_coords = 60;
    return nn::grad_check(f, opt);
}

// The full three-term training loss over a batch of recorded episodes, checked
// against every evaluation parameter (agent nets, conv blocks, mixer heads).
struct LossCase {
    std::unique_ptr<Model> model;
    Params eval, target, grads;
    TrainingBatch batch;
    LossConfig config;
};

inline std::shared_ptr<LossCase> make_loss_case(std::uint64_t seed, bool ablate_sedm = false,
                                                bool ablate_eiem = false) {
    auto c = std::make_shared<LossCase>();
    const ScenarioSpec spec = small_random(seed, 5, 4);
    ModelConfig mc = ModelConfig::for_scenario(spec);
    mc.ablate_sedm = ablate_sedm;
    mc.ablate_eiem = ablate_eiem;
    c->model = std::make_unique<Model>(mc);
    c->eval = c->model->init_params(seed * 2 + 1);
    c->target = c->model->init_params(seed * 2 + 2);
    c->grads = c->eval.zeros_like();
    c->config.gamma = 0.7;
    // Finite differences see V's dependence on the hidden states, so check the full derivative.
    c->config.v_grad_to_hidden = true;
    // Larger heads make the min(., 0) branch active on some steps.
    std::mt19937_64 rng(seed);
    std::uniform_real_distribution<double> u(0.5, 1.5);
    for (auto& [name, t] : c->eval)
        if (name.rfind("mixer.", 0) == 0) t.data *= u(rng);

    RandomPolicy policy;
    Rng play(seed);
    std::vector<EpisodeRecord> records(3);
    for (auto& r : records) rollout(spec, policy, play, true, &r);
    // A shorter episode exercises the padding mask.
    records[2].steps.resize(2);
    records[2].steps.back().nonterminal = 0.0;
    std::vector<const EpisodeRecord*> ptrs;
    for (const auto& r : records) ptrs.push_back(&r);
    c->batch = make_batch(*c->model, ptrs);
    return c;
}

inline GradCheckReport check_loss(const std::shared_ptr<LossCase>& c, GradCheckOptions opt = {}) {
    GradCheckable f;
    f.loss = [c] { return compute_loss(*c->model, c->batch, c->eval, c->target, c->config, false).loss; };
    f.backward = [c] {
        const LossResult r = compute_loss(*c->model, c->batch, c->eval, c->target, c->config, true);
        auto dst = c->grads.begin();
        for (auto src = r.grads.begin(); src != r.grads.end(); ++src, ++dst) dst->second.data = src->second.data;
    };
    add_store_slots(f, c->eval, c->grads);
    if (opt.max_coords == 0) opt.max_coords = 6;
    return nn::grad_check(f, opt);
}

}  // namespace hecta::test
