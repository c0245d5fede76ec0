#include "adatrack/rlcore.hpp"

#include <gtest/gtest.h>

#include <cmath>

#include "adatrack/rng.hpp"
#include "oracles.hpp"

namespace adatrack {
namespace {

TEST(NuTest, SpecValues) {
    EXPECT_DOUBLE_EQ(nu(1.0), 1.0);
    EXPECT_DOUBLE_EQ(nu(0.5), 0.0);
    EXPECT_DOUBLE_EQ(nu(0.73), 0.40);
    EXPECT_DOUBLE_EQ(nu(0.0), -1.0);
}

TEST(NuTest, GridBoundariesSurviveBinaryRepresentation) {
    // 0.7 is not representable; the floor must still land on the 0.70 cell.
    for (int k = 0; k <= 20; ++k) {
        const double z = k * 0.05;
        EXPECT_DOUBLE_EQ(nu(z), (k - 10) / 10.0) << "k=" << k;
    }
    EXPECT_DOUBLE_EQ(nu(0.6999999999999), 0.4);
    EXPECT_DOUBLE_EQ(nu(0.7000000000001), 0.4);
}

TEST(NuTest, MonotoneAndIdempotent) {
    double prev = -2.0;
    for (double z = 0.0; z <= 1.0; z += 0.001) {
        const double v = nu(z);
        EXPECT_GE(v, prev);
        prev = v;
        // Re-flooring an already floored value changes nothing.
        const double floored = (nu(z) + 1.0) / 2.0;
        EXPECT_DOUBLE_EQ(nu(floored), nu(z));
    }
}

TEST(NuTest, RejectsOutOfRange) {
    EXPECT_THROW(nu(-0.01), std::invalid_argument);
    EXPECT_THROW(nu(1.01), std::invalid_argument);
    EXPECT_THROW(nu(NAN), std::invalid_argument);
}

TEST(RewardTest, EquationSemantics) {
    EXPECT_DOUBLE_EQ(reward(std::nullopt), 0.0);
    EXPECT_DOUBLE_EQ(reward(0.49), -1.0);
    EXPECT_DOUBLE_EQ(reward(0.0), -1.0);
    EXPECT_DOUBLE_EQ(reward(0.87), 0.70);
    EXPECT_DOUBLE_EQ(reward(0.5), 0.0);
    EXPECT_DOUBLE_EQ(reward(1.0), 1.0);
}

TEST(RewardTest, OutputsLieOnTheGrid) {
    Rng rng(5);
    for (int i = 0; i < 2000; ++i) {
        const double s = rng.uniform();
        const double r = reward(s);
        EXPECT_GE(r, -1.0);
        EXPECT_LE(r, 1.0);
        if (s >= 0.5) {
            // 20 * (r+1)/2 is integral on the 0.05 grid.
            const double cells = 20.0 * (r + 1.0) / 2.0;
            EXPECT_DOUBLE_EQ(cells, std::round(cells));
        } else {
            EXPECT_DOUBLE_EQ(r, -1.0);
        }
    }
}

TEST(ReturnsTest, SpecValues) {
    EXPECT_EQ(returns({1.0}, 0.5), std::vector<double>{1.0});
    const std::vector<double> r = returns({1.0, -1.0, 1.0}, 0.9);
    ASSERT_EQ(r.size(), 3u);
    EXPECT_NEAR(r[0], 0.91, 1e-12);
    EXPECT_NEAR(r[1], -0.1, 1e-12);
    EXPECT_NEAR(r[2], 1.0, 1e-12);
}

TEST(ReturnsTest, GammaZeroIsMyopic) {
    const std::vector<double> rewards = {0.3, -1.0, 0.7, 0.0};
    EXPECT_EQ(returns(rewards, 0.0), rewards);
}

TEST(ReturnsTest, EmptyInput) { EXPECT_TRUE(returns({}, 0.9).empty()); }

TEST(ReturnsTest, MatchesBruteForceOracle) {
    Rng rng(11);
    const double gammas[] = {0.0, 0.5, 0.9, 0.99, 1.0};
    for (int trial = 0; trial < 500; ++trial) {
        const int n = 1 + static_cast<int>(rng.uniform_index(64));
        std::vector<double> rewards(static_cast<std::size_t>(n));
        for (double& r : rewards) r = rng.uniform(-1.0, 1.0);
        const double gamma = gammas[trial % 5];
        const std::vector<double> fast = returns(rewards, gamma);
        const std::vector<double> slow = testing::brute_force_returns(rewards, gamma);
        for (int i = 0; i < n; ++i) {
            EXPECT_NEAR(fast[static_cast<std::size_t>(i)], slow[static_cast<std::size_t>(i)],
                        1e-12);
        }
    }
}

TEST(ReturnsTest, PastAccumulationSwitch) {
    // R_i = sum_{k=1}^{i} gamma^{k-1} r_k, the literal form kept for ablation.
    const std::vector<double> r = returns({1.0, -1.0, 1.0}, 0.5, ReturnDirection::kPast);
    ASSERT_EQ(r.size(), 3u);
    EXPECT_NEAR(r[0], 1.0, 1e-12);
    EXPECT_NEAR(r[1], 0.5, 1e-12);
    EXPECT_NEAR(r[2], 0.75, 1e-12);
}

InteractionRecord single_step_record(const std::array<double, 4>& raw,
                                     const std::array<double, 4>& mu, double value, double rew) {
    InteractionRecord rec;
    rec.states.emplace_back();
    rec.action_raw.push_back(raw);
    rec.action_env.push_back(Action::from_array(raw).clamped());
    rec.action_mean.push_back(mu);
    rec.values.push_back(value);
    rec.rewards.push_back(rew);
    rec.boxes.emplace_back(0, 0, 1, 1);
    rec.teacher_boxes.emplace_back(0, 0, 1, 1);
    rec.teacher_actions.emplace_back();
    rec.masks.push_back(1);
    rec.weak_scores.emplace_back();
    return rec;
}

TEST(PolicyLossTest, ZeroAdvantageGivesZeroLoss) {
    // A = r + gamma*v_next - v = 0 when r=0, v=0, v_next=0.
    const InteractionRecord rec = single_step_record({0, 0, 0, 0}, {0, 0, 0, 0}, 0.0, 0.0);
    EXPECT_DOUBLE_EQ(policy_loss(rec, {0.0}, 0.05, 0.9), 0.0);
}

TEST(PolicyLossTest, ClosedFormModeDensity) {
    // Single step, a = mu, sigma = 0.05, A = 1:
    // loss = -logpi(mu|mu,sigma) = 4*log(0.05*sqrt(2*pi)).
    InteractionRecord rec = single_step_record({0.1, 0.1, 0.1, 0.1}, {0.1, 0.1, 0.1, 0.1}, 0.0,
                                               1.0);
    const double expected = 4.0 * std::log(0.05 * std::sqrt(2.0 * M_PI));
    EXPECT_NEAR(policy_loss(rec, {0.0}, 0.05, 0.9), expected, 1e-9);
    EXPECT_NEAR(expected, -8.307, 5e-4);
}

TEST(PolicyLossTest, LinearInAdvantages) {
    Rng rng(3);
    InteractionRecord rec;
    for (int i = 0; i < 5; ++i) {
        std::array<double, 4> mu{};
        std::array<double, 4> raw{};
        for (int d = 0; d < 4; ++d) {
            mu[static_cast<std::size_t>(d)] = rng.uniform(-0.5, 0.5);
            raw[static_cast<std::size_t>(d)] =
                mu[static_cast<std::size_t>(d)] + rng.gaussian(0.0, 0.05);
        }
        const InteractionRecord one = single_step_record(raw, mu, rng.uniform(-0.2, 0.2),
                                                         rng.uniform(-1.0, 1.0));
        rec.states.push_back(one.states[0]);
        rec.action_raw.push_back(one.action_raw[0]);
        rec.action_env.push_back(one.action_env[0]);
        rec.action_mean.push_back(one.action_mean[0]);
        rec.values.push_back(one.values[0]);
        rec.rewards.push_back(one.rewards[0]);
        rec.boxes.push_back(one.boxes[0]);
        rec.teacher_boxes.push_back(one.teacher_boxes[0]);
        rec.teacher_actions.push_back(one.teacher_actions[0]);
        rec.masks.push_back(one.masks[0]);
        rec.weak_scores.push_back(one.weak_scores[0]);
    }
    // Scaling every reward and value by c scales each advantage, hence the
    // loss, by c (with values_next = 0 and matched scaling).
    const std::vector<double> values_next(5, 0.0);
    const double base = policy_loss(rec, values_next, 0.05, 0.9);
    InteractionRecord scaled = rec;
    for (double& r : scaled.rewards) r *= 3.0;
    for (double& v : scaled.values) v *= 3.0;
    EXPECT_NEAR(policy_loss(scaled, values_next, 0.05, 0.9), 3.0 * base, 1e-9);
}

TEST(ValueLossTest, PerfectCriticIsZero) {
    InteractionRecord rec = single_step_record({0, 0, 0, 0}, {0, 0, 0, 0}, 1.0, 1.0);
    EXPECT_DOUBLE_EQ(value_loss(rec, 0.9), 0.0);
}

TEST(ValueLossTest, HalfSquaredError) {
    InteractionRecord rec = single_step_record({0, 0, 0, 0}, {0, 0, 0, 0}, 0.0, 1.0);
    EXPECT_DOUBLE_EQ(value_loss(rec, 0.9), 0.5);
}

TEST(ValueLossTest, NonNegative) {
    Rng rng(13);
    for (int i = 0; i < 100; ++i) {
        InteractionRecord rec = single_step_record({0, 0, 0, 0}, {0, 0, 0, 0},
                                                   rng.uniform(-2, 2), rng.uniform(-1, 1));
        EXPECT_GE(value_loss(rec, 0.99), 0.0);
    }
}

TEST(DistillMaskTest, TruthTable) {
    EXPECT_EQ(distill_mask(0.7, -1.0), 1);
    EXPECT_EQ(distill_mask(-1.0, 0.7), 0);
    EXPECT_EQ(distill_mask(0.0, 0.0), 1);  // both undefined: favor the teacher
    EXPECT_EQ(distill_mask(1.0, 1.0), 1);
    EXPECT_EQ(distill_mask(-1.0, -1.0), 1);
    EXPECT_EQ(distill_mask(-1.0, 0.0), 0);
    EXPECT_EQ(distill_mask(0.0, -1.0), 1);
    EXPECT_EQ(distill_mask(1.0, 0.0), 1);
    EXPECT_EQ(distill_mask(0.0, 1.0), 0);
}

TEST(DistillLossTest, MaskGatesEverything) {
    InteractionRecord rec = single_step_record({0, 0, 0, 0}, {0, 0, 0, 0}, 0.0, 0.0);
    rec.teacher_actions[0] = Action(0.5, -0.5, 0, 0);
    rec.masks[0] = 0;
    EXPECT_DOUBLE_EQ(distill_loss(rec), 0.0);
    rec.masks[0] = 1;
    EXPECT_DOUBLE_EQ(distill_loss(rec), 1.0);  // |0.5| + |-0.5|
}

TEST(DistillLossTest, ZeroIffStudentMatchesTeacherOnMaskedSteps) {
    InteractionRecord rec = single_step_record({0.2, 0, 0, 0}, {0.2, -0.1, 0, 0}, 0.0, 0.0);
    rec.teacher_actions[0] = Action(0.2, -0.1, 0, 0);
    rec.masks[0] = 1;
    EXPECT_DOUBLE_EQ(distill_loss(rec), 0.0);
}

TEST(WeakSupFnTest, EveryKSchedule) {
    std::vector<BBox> gt(10, BBox(0, 0, 10, 10));
    const WeakSupFn w = WeakSupFn::every_k(WeakSupKind::kIoU, 4, gt);
    EXPECT_TRUE(w.defined_at(0));
    EXPECT_FALSE(w.defined_at(1));
    EXPECT_TRUE(w.defined_at(4));
    EXPECT_TRUE(w.defined_at(8));
    EXPECT_FALSE(w.defined_at(10));  // beyond the reference sequence
    EXPECT_FALSE(w.score(3, BBox(0, 0, 10, 10)).has_value());
    EXPECT_DOUBLE_EQ(*w.score(4, BBox(0, 0, 10, 10)), 1.0);
}

TEST(WeakSupFnTest, ExplicitStepsAndKinds) {
    std::vector<BBox> gt(6, BBox(0, 0, 10, 10));
    const WeakSupFn w = WeakSupFn::at_steps(WeakSupKind::kNormDist, {1, 5}, gt);
    EXPECT_TRUE(w.defined_at(1));
    EXPECT_FALSE(w.defined_at(2));
    // NormDist of a 10px-offset box: 1 - 10/20.
    EXPECT_DOUBLE_EQ(*w.score(1, BBox(10, 0, 10, 10)), 0.5);
    EXPECT_TRUE(w.defined_anywhere(6));
    EXPECT_FALSE(WeakSupFn::at_steps(WeakSupKind::kIoU, {}, gt).defined_anywhere(6));
}

}  // namespace
}  // namespace adatrack
