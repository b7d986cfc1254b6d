#include <gtest/gtest.h>

#include <cstdio>
#include <filesystem>

#include "grad_cases.hpp"
#include "hecta/checkpoint.hpp"
#include "hecta/nn/optim.hpp"

using namespace hecta;
using namespace hecta::test;

TEST(Layers, ConvBlockSizes) {
    nn::Conv2d<double> g{"g", 7, 10, 3, 16, 16};
    EXPECT_EQ(g.out_height(), 14);
    nn::MaxPool2<double> gp{10, 14, 14};
    EXPECT_EQ(gp.output_size(), 490);
    nn::Conv2d<double> l{"l", 3, 10, 3, 20, 20};
    nn::MaxPool2<double> lp{10, l.out_height(), l.out_width()};
    EXPECT_EQ(lp.output_size(), 810);

    ModelConfig mc = ModelConfig::for_scenario(generate_scenario(*preset_params("sce1"), 1));
    const Model m(mc);
    EXPECT_EQ(m.global_feature_size(), 490);
    EXPECT_EQ(m.local_feature_size(), 490);
    EXPECT_EQ(m.action_count(), 256);
}

TEST(Layers, ZeroInputZeroBiasGivesZeroFeatures) {
    std::mt19937_64 rng(1);
    nn::Conv2d<double> conv{"c", 7, 10, 3, 8, 8};
    Store p;
    conv.declare(p);
    conv.init(p, rng);
    p.vector("c.b").setZero();
    nn::MaxPool2<double> pool{10, 6, 6};
    const M y = pool.forward(nn::relu(conv.forward(p, M::Zero(conv.input_size(), 2))));
    EXPECT_EQ(y.rows(), 90);
    EXPECT_TRUE((y.array() == 0.0).all());
}

TEST(Layers, ConvMatchesDirectSum) {
    std::mt19937_64 rng(4);
    nn::Conv2d<double> conv{"c", 2, 3, 3, 5, 4};
    Store p;
    conv.declare(p);
    conv.init(p, rng);
    const M x = random_matrix(conv.input_size(), 1, rng);
    const M y = conv.forward(p, x);
    for (int o = 0; o < 3; ++o)
        for (int r = 0; r < 3; ++r)
            for (int c = 0; c < 2; ++c) {
                double acc = p.vector("c.b")(o);
                for (int ch = 0; ch < 2; ++ch)
                    for (int ky = 0; ky < 3; ++ky)
                        for (int kx = 0; kx < 3; ++kx)
                            acc += p.matrix("c.w")(o, (ch * 3 + ky) * 3 + kx) * x((ch * 5 + r + ky) * 4 + c + kx, 0);
                EXPECT_NEAR(y((o * 3 + r) * 2 + c, 0), acc, 1e-12);
            }
}

TEST(Layers, PoolTiesRouteToFirst) {
    nn::MaxPool2<double> pool{1, 2, 2};
    M x(4, 1);
    x << 3, 3, 1, 3;
    nn::MaxPool2<double>::Cache cache;
    EXPECT_EQ(pool.forward(x, &cache)(0, 0), 3.0);
    const M dx = pool.backward(cache, M::Ones(1, 1));
    EXPECT_EQ(dx(0, 0), 1.0);
    EXPECT_EQ(dx.sum(), 1.0);
}

TEST(Layers, GruZeroFixedPointAndPurity) {
    nn::Gru<double> gru{"g", 5, 128};
    Store p;
    gru.declare(p);
    const M h = gru.forward(p, M::Zero(5, 1), M::Zero(128, 1));
    EXPECT_TRUE((h.array() == 0.0).all());

    std::mt19937_64 rng(2);
    gru.init(p, rng);
    const M x = random_matrix(5, 3, rng), h0 = random_matrix(128, 3, rng);
    EXPECT_EQ(gru.forward(p, x, h0), gru.forward(p, x, h0));
    M bad = x;
    bad(0, 0) = std::nan("");
    EXPECT_THROW(gru.forward(p, bad, h0), std::domain_error);
    EXPECT_THROW(gru.forward(p, M::Zero(4, 3), h0), std::invalid_argument);
}

class GradCheckSeeds : public ::testing::TestWithParam<int> {};

TEST_P(GradCheckSeeds, Layers) {
    const std::uint64_t seed = GetParam();
    for (const auto& [name, report] :
         {std::pair{"dense", check_dense(seed)}, std::pair{"relu", check_relu(seed)},
          std::pair{"conv", check_conv(seed)}, std::pair{"pool", check_pool(seed)},
          std::pair{"conv_block", check_conv_block(seed)}, std::pair{"gru", check_gru(seed)}}) {
        EXPECT_TRUE(report.pass()) << name << "\n" << report.summary();
        EXPECT_GT(report.checked(), 0);
    }
}

TEST_P(GradCheckSeeds, TrainingLoss) {
    const auto c = make_loss_case(GetParam());
    const auto report = check_loss(c);
    EXPECT_TRUE(report.pass()) << report.summary();
    EXPECT_GT(report.checked(), 100);
}

INSTANTIATE_TEST_SUITE_P(Seeds, GradCheckSeeds, ::testing::Range(0, 4));

TEST(GradCheck, AblatedModels) {
    for (auto [sedm, eiem] : {std::pair{true, false}, std::pair{false, true}}) {
        const auto report = check_loss(make_loss_case(7, sedm, eiem));
        EXPECT_TRUE(report.pass()) << report.summary();
    }
}

TEST(GradCheck, StopGradientOnlyTouchesAgentNets) {
    const auto c = make_loss_case(1);
    const LossResult full = compute_loss(*c->model, c->batch, c->eval, c->target, c->config, true);
    LossConfig cut = c->config;
    cut.v_grad_to_hidden = false;
    const LossResult stopped = compute_loss(*c->model, c->batch, c->eval, c->target, cut, true);
    EXPECT_EQ(full.loss, stopped.loss);
    bool agent_differs = false;
    for (const auto& [name, t] : full.grads) {
        const bool upstream = name.rfind("agent.", 0) == 0 || name.rfind("eiem.local.", 0) == 0;
        if (upstream)
            agent_differs |= t.data != stopped.grads.at(name).data;
        else
            EXPECT_EQ(t.data, stopped.grads.at(name).data) << name;
    }
    EXPECT_TRUE(agent_differs);
}

TEST(GradCheck, CorruptedBackwardIsCaught) {
    std::mt19937_64 rng(3);
    nn::Dense<double> layer{"dense", 4, 3};
    auto c = std::make_shared<LayerCase>();
    layer.declare(c->params);
    layer.init(c->params, rng);
    c->grads = c->params.zeros_like();
    c->x = random_matrix(4, 2, rng);
    c->weights = random_matrix(3, 2, rng);
    GradCheckable f;
    f.loss = [c, layer] { return (layer.forward(c->params, c->x).array() * c->weights.array()).sum(); };
    f.backward = [c, layer] {
        c->grads.set_zero();
        layer.backward(c->params, c->grads, c->x, c->weights, false);
        c->grads.vector("dense.b") *= 1.1;
    };
    add_store_slots(f, c->params, c->grads);
    const auto report = nn::grad_check(f);
    EXPECT_FALSE(report.pass());
    EXPECT_EQ(report.failing(), std::vector<std::string>{"dense.b"});
}

TEST(GradCheck, KinkGuardSkipsPointsOnAKinkOnly) {
    // |x - 1e-10| has one-sided slopes -1 and +1 at x = 0; every central
    // difference straddles the kink and reports about 0.
    double x = 0.0, g = 1.0;
    GradCheckable f;
    f.loss = [&] { return std::abs(x - 1e-10); };
    f.backward = [] {};
    f.slots.push_back({"x", &x, &g, 1});
    EXPECT_EQ(nn::grad_check(f).skipped(), 1);
    nn::GradCheckOptions off;
    off.kink_guard = false;
    EXPECT_FALSE(nn::grad_check(f, off).pass());

    // Strong curvature alone is not a kink.
    double y = 0.3, gy = 3.0 * 0.3 * 0.3 + 1e4 * 2.0 * 0.3;
    GradCheckable smooth;
    smooth.loss = [&] { return y * y * y + 1e4 * y * y; };
    smooth.backward = [] {};
    smooth.slots.push_back({"y", &y, &gy, 1});
    const auto report = nn::grad_check(smooth);
    EXPECT_EQ(report.skipped(), 0);
    EXPECT_TRUE(report.pass());
}

TEST(Optim, ZeroGradientLeavesParams) {
    Store p;
    p.add("w", {3}).data << 1, -2, 3;
    const Store before = p;
    nn::RmsProp<double> opt;
    EXPECT_TRUE(opt.step(p, p.zeros_like(), 0.1));
    EXPECT_EQ(p, before);
}

TEST(Optim, OneStepOnSquare) {
    // f(w) = w^2 at w = 1: g = 2, v = 0.01 * 4 = 0.04, w' = 1 - 0.1 * 2 / (0.2 + 1e-5).
    Store p, g;
    p.add("w", {1}).data << 1.0;
    g.add("w", {1}).data << 2.0;
    nn::RmsProp<double> opt(0.99, 1e-5);
    opt.step(p, g, 0.1);
    const double v = (1.0 - 0.99) * 4.0;
    const double expected = 1.0 - 0.1 * 2.0 / (std::sqrt(v) + 1e-5);
    EXPECT_EQ(p.vector("w")(0), expected);
    EXPECT_LT(std::abs(p.vector("w")(0)), 1.0);
    EXPECT_EQ(opt.square_avg().vector("w")(0), v);
}

TEST(Optim, DeterministicAndSkipsNonFinite) {
    Store p, g;
    p.add("w", {2}).data << 0.5, -0.5;
    g.add("w", {2}).data << 0.3, 0.1;
    Store p2 = p;
    nn::RmsProp<double> a, b;
    a.step(p, g, 0.01);
    b.step(p2, g, 0.01);
    EXPECT_EQ(p, p2);
    const Store before = p;
    g.vector("w")(1) = std::numeric_limits<double>::infinity();
    EXPECT_FALSE(a.step(p, g, 0.01));
    EXPECT_EQ(p, before);
}

TEST(Optim, GlobalNormClip) {
    Store g;
    g.add("a", {2}).data << 3, 0;
    g.add("b", {1}).data << 4;
    EXPECT_DOUBLE_EQ(nn::clip_global_norm(g, 0.2), 5.0);
    EXPECT_NEAR(nn::global_norm(g), 0.2, 1e-15);
    EXPECT_NEAR(g.vector("a")(0), 0.12, 1e-15);
    Store small;
    small.add("a", {1}).data << 0.1;
    nn::clip_global_norm(small, 0.2);
    EXPECT_EQ(small.vector("a")(0), 0.1);
}

TEST(ParamStore, CopiesAreDeepAndLayoutIsChecked) {
    Store a;
    a.add("w", {2, 2}).data.setOnes();
    Store b = a;
    b.vector("w")(0) = 5;
    EXPECT_EQ(a.vector("w")(0), 1.0);
    EXPECT_THROW(a.add("w", {1}), std::invalid_argument);
    EXPECT_THROW(a.at("missing"), std::out_of_range);
    EXPECT_TRUE(a.same_layout(b));
    EXPECT_EQ(a.parameter_count(), 4);
}

TEST(Checkpoint, RoundTripReproducesForward) {
    const ScenarioSpec s = small_random(2);
    const Model m(ModelConfig::for_scenario(s));
    const Params p = m.init_params(5);
    Checkpoint ckp;
    ckp.metadata = m.config().to_metadata();
    ckp.metadata["note"] = "x y\nz";
    ckp.params = p;
    const Checkpoint back = deserialize_checkpoint(serialize_checkpoint(ckp));
    EXPECT_EQ(back.metadata, ckp.metadata);
    EXPECT_EQ(back.params, p);
    EXPECT_EQ(ModelConfig::from_metadata(back.metadata), m.config());

    const World w(s);
    const M planes = encode_global(w).planes;
    EXPECT_EQ(m.global_features(p, planes), m.global_features(back.params, planes));

    const auto path = (std::filesystem::temp_directory_path() / "hecta_ckpt_test.ckpt").string();
    save_checkpoint(ckp, path);
    EXPECT_EQ(load_checkpoint(path).params, p);
    std::remove(path.c_str());
}

TEST(Checkpoint, CorruptInputIsRejected) {
    Checkpoint ckp;
    ckp.params.add("w", {2, 3}).data.setConstant(1.5);
    const std::string bytes = serialize_checkpoint(ckp);
    EXPECT_THROW(deserialize_checkpoint(bytes.substr(0, bytes.size() - 3)), CheckpointError);
    EXPECT_THROW(deserialize_checkpoint(bytes + "x"), CheckpointError);
    EXPECT_THROW(deserialize_checkpoint("NOTACKPT" + bytes.substr(8)), CheckpointError);
    EXPECT_THROW(load_checkpoint("/nonexistent/x.ckpt"), CheckpointError);
}

TEST(Checkpoint, PrefixedMerge) {
    Params a, b, all;
    a.add("w", {1}).data << 1;
    b.add("w", {1}).data << 2;
    merge_prefixed(all, a, "eval");
    merge_prefixed(all, b, "target");
    EXPECT_TRUE(all.contains("eval/w"));
    EXPECT_EQ(extract_prefixed(all, "target"), b);
}
