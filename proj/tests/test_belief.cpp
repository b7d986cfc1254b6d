#include <gtest/gtest.h>

#include "hecta/belief.hpp"

using namespace hecta;

namespace {

TinyModel two_state() {
    TinyModel m{2, 1, 2, {}, {}};
    Eigen::MatrixXd t(2, 2), o(2, 2);
    t << 0.9, 0.1, 0.2, 0.8;
    o << 0.7, 0.3, 0.1, 0.9;
    m.transition = {t};
    m.observation = {o};
    return m;
}

BeliefVector uniform(int n) { return BeliefVector::Constant(n, 1.0 / n); }

}  // namespace

TEST(Belief, HandComputedTwoStateUpdate) {
    const BeliefVector b = belief_update(uniform(2), 0, 0, two_state());
    // Predicted (0.55, 0.45); weighted (0.385, 0.045).
    EXPECT_NEAR(b(0), 0.385 / 0.43, 1e-15);
    EXPECT_NEAR(b(1), 0.045 / 0.43, 1e-15);
    const BeliefVector b2 = belief_update(uniform(2), 0, 1, two_state());
    EXPECT_NEAR(b2(0), 0.165 / 0.57, 1e-15);
}

TEST(Belief, PointMassUnderDeterministicDynamicsStays) {
    TinyModel m{3, 1, 2, {Eigen::MatrixXd::Identity(3, 3)}, {}};
    Eigen::MatrixXd o(3, 2);
    o << 0.5, 0.5, 0.2, 0.8, 0.6, 0.4;
    m.observation = {o};
    BeliefVector b = BeliefVector::Unit(3, 1);
    for (int obs : {0, 1, 1, 0}) b = belief_update(b, 0, obs, m);
    EXPECT_EQ(b, BeliefVector::Unit(3, 1));
}

TEST(Belief, UninformativeObservationGivesPrediction) {
    std::mt19937_64 rng(1);
    TinyModel m = random_tiny_model(4, 2, 3, rng);
    for (auto& o : m.observation) o.setConstant(1.0 / 3.0);
    const BeliefVector b0 = (BeliefVector(4) << 0.1, 0.2, 0.3, 0.4).finished();
    const BeliefVector b = belief_update(b0, 1, 2, m);
    const BeliefVector expected = m.transition[1].transpose() * b0;
    EXPECT_TRUE(b.isApprox(expected, 1e-14));
}

TEST(Belief, ChainedUpdatesMatchEnumeration) {
    std::mt19937_64 rng(17);
    double worst = 0.0;
    for (int trial = 0; trial < 200; ++trial) {
        const int S = 2 + trial % 3, A = 1 + trial % 2, O = 2 + trial % 2;
        const TinyModel m = random_tiny_model(S, A, O, rng);
        std::uniform_int_distribution<int> pa(0, A - 1), po(0, O - 1), len(0, 6);
        History h(len(rng));
        for (auto& step : h) step = {pa(rng), po(rng)};
        BeliefVector b = uniform(S);
        for (const auto& [a, o] : h) b = belief_update(b, a, o, m);
        const BeliefVector exact = brute_force_posterior(h, m, uniform(S));
        worst = std::max(worst, (b - exact).cwiseAbs().maxCoeff());
        ASSERT_NEAR(b.sum(), 1.0, 1e-12);
    }
    EXPECT_LE(worst, 1e-12);
}

TEST(Belief, EmptyHistoryIsThePrior) {
    const BeliefVector b0 = (BeliefVector(2) << 0.3, 0.7).finished();
    EXPECT_EQ(brute_force_posterior({}, two_state(), b0), b0);
}

TEST(Belief, ImpossibleObservationThrows) {
    TinyModel m = two_state();
    m.observation[0] << 1.0, 0.0, 1.0, 0.0;
    EXPECT_THROW(belief_update(uniform(2), 0, 1, m), InconsistentObservation);
    EXPECT_THROW(brute_force_posterior({{0, 1}}, m, uniform(2)), InconsistentObservation);
}

TEST(Belief, EnumerationGuardAndRangeChecks) {
    std::mt19937_64 rng(2);
    const TinyModel m = random_tiny_model(10, 1, 2, rng);
    EXPECT_THROW(brute_force_posterior(History(6, {0, 0}), m, uniform(10)), std::invalid_argument);
    EXPECT_NO_THROW(brute_force_posterior(History(5, {0, 0}), m, uniform(10)));
    EXPECT_THROW(belief_update(uniform(10), 1, 0, m), std::invalid_argument);
    EXPECT_THROW(belief_update(uniform(10), 0, 2, m), std::invalid_argument);
    EXPECT_THROW(belief_update(uniform(3), 0, 0, m), std::invalid_argument);
}

TEST(TinyModelText, RoundTripIsExact) {
    std::mt19937_64 rng(3);
    const TinyModel m = random_tiny_model(3, 2, 4, rng);
    const TinyModel back = load_tiny_model(save_tiny_model(m));
    for (int a = 0; a < 2; ++a) {
        EXPECT_EQ(back.transition[a], m.transition[a]);
        EXPECT_EQ(back.observation[a], m.observation[a]);
    }
}

TEST(TinyModelText, CommentsAndTableOrder) {
    const std::string text =
        "# two states\n"
        "states 2\nactions 1\nobservations 2\n"
        "observation 0  # listed first\n0.7 0.3\n0.1 0.9\n"
        "transition 0\n0.9 0.1\n0.2 0.8\n";
    const TinyModel m = load_tiny_model(text);
    EXPECT_EQ(m.transition[0], two_state().transition[0]);
    EXPECT_EQ(m.observation[0], two_state().observation[0]);
}

TEST(TinyModelText, MalformedInputIsRejected) {
    EXPECT_THROW(load_tiny_model("states 2\nactions 1\n"), std::invalid_argument);
    EXPECT_THROW(load_tiny_model("states 2\nactions 1\nobservations 2\ntransition 0\n0.9 0.1\n0.2\n"),
                 std::invalid_argument);
    EXPECT_THROW(load_tiny_model("states 2\nactions 1\nobservations 2\n"
                                 "transition 0\n0.9 0.2\n0.2 0.8\nobservation 0\n0.7 0.3\n0.1 0.9\n"),
                 std::invalid_argument);
    EXPECT_THROW(load_tiny_model("states 1\nactions 1\nobservations 1\nreward 0\n1\n"), std::invalid_argument);
    TinyModel bad = two_state();
    bad.transition[0](0, 0) = -0.1;
    EXPECT_THROW(bad.validate(), std::invalid_argument);
}
