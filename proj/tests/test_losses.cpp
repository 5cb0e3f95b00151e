#include <gtest/gtest.h>

#include "lapmo/losses.hpp"
#include "oracles.hpp"

using namespace lapmo;

namespace {

struct Instance {
    MotionSequence est;
    MotionSequence gt;
};

Instance random_instance(Rng& rng, int max_joints = 5, int max_frames = 6) {
    const auto sk = oracle::random_tree(rng, 1 + static_cast<int>(rng.below(static_cast<std::uint64_t>(max_joints))));
    const int T = 2 + static_cast<int>(rng.below(static_cast<std::uint64_t>(max_frames - 1)));
    return {oracle::random_motion(rng, sk, T, 1.0), oracle::random_motion(rng, sk, T, 1.0)};
}

std::vector<double> flat(const MotionSequence& s) { return {s.data().begin(), s.data().end()}; }

template <typename F>
double gradient_error(const MotionSequence& est, F&& loss) {
    const auto analytic = loss(est).grad;
    const auto numeric =
        oracle::finite_difference([&](const std::vector<double>& x) { return loss(est.with_data(x)).value; }, flat(est));
    return oracle::max_relative_error(analytic, numeric);
}

bool all_zero(const std::vector<double>& v) {
    for (double x : v)
        if (x != 0.0) return false;
    return true;
}

MotionSequence scaled(const MotionSequence& s, double k) {
    auto d = flat(s);
    for (double& v : d) v *= k;
    return s.with_data(d);
}

}  // namespace

TEST(PositionLoss, ZeroAtIdentity) {
    Rng rng(1);
    const auto inst = random_instance(rng);
    const auto lv = position_loss(inst.gt, inst.gt);
    EXPECT_EQ(lv.value, 0.0);
    EXPECT_TRUE(all_zero(lv.grad));
}

TEST(PositionLoss, HandComputedSingleJoint) {
    const MotionSequence est(Skeleton::chain(1), 50.0, 1, {3, 4, 0});
    const MotionSequence gt(Skeleton::chain(1), 50.0, 1, {0, 0, 0});
    const auto lv = position_loss(est, gt);
    EXPECT_DOUBLE_EQ(lv.value, 5.0);
    EXPECT_DOUBLE_EQ(lv.grad[0], 0.6);
    EXPECT_DOUBLE_EQ(lv.grad[1], 0.8);
    EXPECT_DOUBLE_EQ(lv.grad[2], 0.0);
}

TEST(PositionLoss, ShapeMismatchThrows) {
    const MotionSequence a(Skeleton::chain(1), 50.0, 1, {0, 0, 0});
    const MotionSequence b(Skeleton::chain(1), 50.0, 2, {0, 0, 0, 0, 0, 0});
    EXPECT_THROW(position_loss(a, b), ShapeError);
}

TEST(PositionLoss, NotTranslationInvariant) {
    Rng rng(2);
    const auto inst = random_instance(rng);
    EXPECT_GT(std::abs(position_loss(translate(inst.est, {10, 0, 0}), inst.gt).value - position_loss(inst.est, inst.gt).value),
              1e-3);
}

TEST(LaplacianLoss, ZeroAtIdentityAndUnderTranslation) {
    Rng rng(3);
    const auto inst = random_instance(rng);
    const auto L = build_laplacian(inst.gt.skeleton(), inst.gt.frames());
    const auto same = laplacian_loss(inst.gt, inst.gt, L);
    EXPECT_EQ(same.value, 0.0);
    EXPECT_TRUE(all_zero(same.grad));
    EXPECT_LE(laplacian_loss(translate(inst.gt, {5, -2, 9}), inst.gt, L).value, 1e-12);
}

TEST(LaplacianLoss, HandComputedValue) {
    // Estimate moves node 3 of the 2x2 chain by +1 in x: residual rows are
    // -L[:,3] * (1,0,0), i.e. norms 0, 1, 1, 2.
    const MotionSequence gt(Skeleton::chain(2), 50.0, 2, std::vector<double>(12, 0.0));
    std::vector<double> e(12, 0.0);
    e[9] = 1.0;
    const auto L = build_laplacian(gt.skeleton(), 2);
    EXPECT_DOUBLE_EQ(laplacian_loss(gt.with_data(e), gt, L).value, 1.0);
}

TEST(LaplacianLoss, GradientMatchesFiniteDifferences) {
    Rng rng(4);
    for (int trial = 0; trial < 100; ++trial) {
        const auto inst = random_instance(rng);
        for (auto v : {LaplacianVariant::kCombinatorial, LaplacianVariant::kRandomWalk}) {
            const auto L = build_laplacian(inst.gt.skeleton(), inst.gt.frames(), v);
            ASSERT_LE(gradient_error(inst.est, [&](const MotionSequence& e) { return laplacian_loss(e, inst.gt, L); }), 1e-5);
        }
    }
}

TEST(PositionLoss, GradientMatchesFiniteDifferences) {
    Rng rng(5);
    for (int trial = 0; trial < 100; ++trial) {
        const auto inst = random_instance(rng);
        ASSERT_LE(gradient_error(inst.est, [&](const MotionSequence& e) { return position_loss(e, inst.gt); }), 1e-5);
    }
}

TEST(MotionLoss, ZeroAtIdentityAndUnderTranslation) {
    Rng rng(6);
    const auto inst = random_instance(rng);
    EXPECT_EQ(motion_loss(inst.gt, inst.gt, {1, 2, 4, 8}).value, 0.0);
    EXPECT_LE(motion_loss(translate(inst.gt, {3, 3, 3}), inst.gt, {1, 2, 4, 8}).value, 1e-12);
}

TEST(MotionLoss, NoUsableScaleThrows) {
    const MotionSequence a(Skeleton::chain(1), 50.0, 2, {0, 0, 0, 1, 0, 0});
    EXPECT_THROW(motion_loss(a, a, {2, 4}), std::invalid_argument);
    EXPECT_NO_THROW(motion_loss(a, a, {1, 4}));
}

TEST(MotionLoss, HandComputedSingleScale) {
    // est static at the origin, gt drifting by one unit per frame in x: every
    // scale-1 residual has norm 1.
    const MotionSequence est(Skeleton::chain(1), 50.0, 3, std::vector<double>(9, 0.0));
    const MotionSequence gt(Skeleton::chain(1), 50.0, 3, {0, 0, 0, 1, 0, 0, 2, 0, 0});
    EXPECT_DOUBLE_EQ(motion_loss(est, gt, {1}).value, 1.0);
    // Scales 1 and 2: per-scale means 1 and 2, averaged.
    EXPECT_DOUBLE_EQ(motion_loss(est, gt, {1, 2, 4}).value, 1.5);
}

TEST(MotionLoss, GradientMatchesFiniteDifferences) {
    Rng rng(7);
    for (int trial = 0; trial < 100; ++trial) {
        const auto inst = random_instance(rng, 4, 10);
        ASSERT_LE(gradient_error(inst.est, [&](const MotionSequence& e) { return motion_loss(e, inst.gt, {1, 2, 4, 8}); }),
                  1e-5);
    }
}

TEST(CombinedLoss, PositionOnlyEqualsPositionLoss) {
    Rng rng(8);
    const auto inst = random_instance(rng);
    const auto a = combined_loss(inst.est, inst.gt, LossConfig{}, LossMode::kPositionOnly);
    const auto b = position_loss(inst.est, inst.gt);
    EXPECT_EQ(a.value, b.value);
    EXPECT_EQ(a.grad, b.grad);
}

TEST(CombinedLoss, ZeroAlphaEqualsPositionLoss) {
    Rng rng(9);
    const auto inst = random_instance(rng);
    LossConfig cfg;
    cfg.alpha = 0.0;
    EXPECT_NEAR(combined_loss(inst.est, inst.gt, cfg, LossMode::kPositionLaplacian).value,
                position_loss(inst.est, inst.gt).value, 1e-12);
}

TEST(CombinedLoss, Additivity) {
    Rng rng(10);
    for (int trial = 0; trial < 20; ++trial) {
        const auto inst = random_instance(rng);
        const auto L = build_laplacian(inst.gt.skeleton(), inst.gt.frames());
        const double expected = position_loss(inst.est, inst.gt).value + laplacian_loss(inst.est, inst.gt, L).value;
        EXPECT_NEAR(combined_loss(inst.est, inst.gt, LossConfig{}, LossMode::kPositionLaplacian, &L).value, expected, 1e-12);
        EXPECT_NEAR(combined_loss(inst.est, inst.gt, LossConfig{}, LossMode::kPositionLaplacian).value, expected, 1e-12);
    }
}

TEST(CombinedLoss, GradientMatchesFiniteDifferencesAllModes) {
    Rng rng(11);
    for (int trial = 0; trial < 60; ++trial) {
        const auto inst = random_instance(rng);
        LossConfig cfg;
        cfg.alpha = rng.uniform(0.1, 3.0);
        cfg.lambda = rng.uniform(0.1, 3.0);
        cfg.root_relative = trial % 2 == 1;
        for (auto mode : {LossMode::kPositionOnly, LossMode::kPositionMotion, LossMode::kPositionLaplacian})
            ASSERT_LE(gradient_error(inst.est, [&](const MotionSequence& e) { return combined_loss(e, inst.gt, cfg, mode); }),
                      1e-5)
                << to_string(mode) << " root_relative=" << cfg.root_relative;
    }
}

TEST(CombinedLoss, RejectsNegativeCoefficients) {
    Rng rng(12);
    const auto inst = random_instance(rng);
    LossConfig cfg;
    cfg.alpha = -1.0;
    EXPECT_THROW(combined_loss(inst.est, inst.gt, cfg, LossMode::kPositionLaplacian), std::invalid_argument);
}

TEST(Losses, TranslationInvarianceOfDifferentialLosses) {
    Rng rng(13);
    for (int trial = 0; trial < 50; ++trial) {
        const auto inst = random_instance(rng);
        const Vec3 c{rng.normal() * 100, rng.normal() * 100, rng.normal() * 100};
        const auto moved = translate(inst.est, c);
        for (auto v : {LaplacianVariant::kCombinatorial, LaplacianVariant::kRandomWalk}) {
            const auto L = build_laplacian(inst.gt.skeleton(), inst.gt.frames(), v);
            ASSERT_NEAR(laplacian_loss(moved, inst.gt, L).value, laplacian_loss(inst.est, inst.gt, L).value, 1e-9);
        }
        ASSERT_NEAR(motion_loss(moved, inst.gt, {1, 2, 4, 8}).value, motion_loss(inst.est, inst.gt, {1, 2, 4, 8}).value, 1e-9);
    }
}

TEST(Losses, PositiveHomogeneity) {
    Rng rng(14);
    for (int trial = 0; trial < 30; ++trial) {
        const auto inst = random_instance(rng);
        const double k = rng.uniform(0.1, 10.0);
        const auto e = scaled(inst.est, k), g = scaled(inst.gt, k);
        const auto L = build_laplacian(inst.gt.skeleton(), inst.gt.frames());
        ASSERT_NEAR(position_loss(e, g).value, k * position_loss(inst.est, inst.gt).value, 1e-9);
        ASSERT_NEAR(laplacian_loss(e, g, L).value, k * laplacian_loss(inst.est, inst.gt, L).value, 1e-9);
        ASSERT_NEAR(motion_loss(e, g, {1, 2}).value, k * motion_loss(inst.est, inst.gt, {1, 2}).value, 1e-9);
    }
}

TEST(Losses, NonNegative) {
    Rng rng(15);
    for (int trial = 0; trial < 30; ++trial) {
        const auto inst = random_instance(rng);
        for (auto mode : {LossMode::kPositionOnly, LossMode::kPositionMotion, LossMode::kPositionLaplacian})
            ASSERT_GE(combined_loss(inst.est, inst.gt, LossConfig{}, mode).value, 0.0);
    }
}
