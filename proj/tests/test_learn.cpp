#include <gtest/gtest.h>

#include <cmath>
#include <filesystem>

#include "egm/learn.hpp"

using namespace egm;

TEST(MatchingLoss, EmptySupervisionIsZero) {
    const Mat s = Mat::Random(3, 4);
    EXPECT_DOUBLE_EQ(matching_loss(s, Mat::Zero(3, 4)), 0.0);
}

TEST(MatchingLoss, SingleOptionSoftmaxIsZero) {
    Mat s(1, 1), gt(1, 1);
    s << -17.3;
    gt << 1.0;
    EXPECT_NEAR(matching_loss(s, gt), 0.0, 1e-12);
}

TEST(MatchingLoss, ClosedFormTwoByTwo) {
    Mat s(2, 2), gt(2, 2);
    s << 2, 0, 0, 2;
    gt << 1, 0, 0, 1;
    // Each supervised entry contributes -2*log(e^2/(e^2+1)).
    const double expected = 4.0 * std::log(1.0 + std::exp(-2.0));
    EXPECT_NEAR(matching_loss(s, gt), expected, 1e-12);
    EXPECT_NEAR(matching_loss(s, gt), 0.508, 5e-4);
}

TEST(MatchingLoss, NonnegativeOnRandomInstances) {
    Rng rng(12);
    for (int trial = 0; trial < 200; ++trial) {
        const Eigen::Index n = 1 + static_cast<Eigen::Index>(rng.uniform_index(5));
        const Eigen::Index m = 1 + static_cast<Eigen::Index>(rng.uniform_index(5));
        const Mat s = Mat::NullaryExpr(n, m, [&] { return rng.normal(); });
        Mat gt = Mat::Zero(n, m);
        for (Eigen::Index i = 0; i < std::min(n, m); ++i)
            if (rng.uniform() < 0.7)
                gt(i, i) = 1.0;
        EXPECT_GE(matching_loss(s, gt), -1e-12);
    }
}

TEST(MatchingLoss, RejectsShapeMismatch) {
    EXPECT_THROW(matching_loss(Mat::Zero(2, 3), Mat::Zero(3, 2)), ShapeMismatch);
}

TEST(MatchingLossGrad, ZeroSupervisionZeroGradient) {
    const Mat g = matching_loss_grad(Mat::Random(3, 4), Mat::Zero(3, 4));
    EXPECT_DOUBLE_EQ(g.cwiseAbs().maxCoeff(), 0.0);
}

TEST(MatchingLossGrad, SymmetricInputsGiveSymmetricGradient) {
    Mat s(3, 3);
    s << 1.0, 0.2, 0.1, 0.2, 0.9, 0.3, 0.1, 0.3, 1.1;
    Mat gt = Mat::Identity(3, 3);
    const Mat g = matching_loss_grad(s, gt);
    EXPECT_NEAR((g - g.transpose()).cwiseAbs().maxCoeff(), 0.0, 1e-12);
}

TEST(MatchingLossGrad, AgreesWithCentralDifferences) {
    Rng rng(34);
    const Mat s = Mat::NullaryExpr(3, 4, [&] { return rng.normal(); });
    Mat gt = Mat::Zero(3, 4);
    gt(0, 1) = 1.0;
    gt(1, 3) = 1.0;
    gt(2, 0) = 1.0;

    const Mat g = matching_loss_grad(s, gt);
    const double h = 1e-5;
    Mat probe = s;
    for (Eigen::Index i = 0; i < s.rows(); ++i) {
        for (Eigen::Index j = 0; j < s.cols(); ++j) {
            probe(i, j) = s(i, j) + h;
            const double up = matching_loss(probe, gt);
            probe(i, j) = s(i, j) - h;
            const double down = matching_loss(probe, gt);
            probe(i, j) = s(i, j);
            const double fd = (up - down) / (2.0 * h);
            const double scale = std::max({std::abs(fd), std::abs(g(i, j)), 1e-8});
            EXPECT_LE(std::abs(g(i, j) - fd) / scale, 1e-4);
        }
    }
}

TEST(ContrastiveLoss, Cases) {
    Vec a(3), b(3);
    a << 0.5, 0.5, 0.0;
    b = a;
    EXPECT_DOUBLE_EQ(contrastive_loss(a, b, 1, 0.1), 0.0);

    Vec c(3);
    c << -0.5, 0.5, 0.0;  // squared distance 1 >= margin
    EXPECT_DOUBLE_EQ(contrastive_loss(a, c, 0, 0.1), 0.0);

    Vec d = a;
    d(0) += 0.2;  // squared distance 0.04
    EXPECT_NEAR(contrastive_loss(a, d, 0, 0.1), 0.06, 1e-12);
    EXPECT_NEAR(contrastive_loss(a, d, 1, 0.1), 0.04, 1e-12);

    EXPECT_THROW(contrastive_loss(a, Vec::Zero(2), 1, 0.1), DimMismatch);
}

TEST(ContrastiveLoss, HingeSlope) {
    // For t = 0 the loss decreases one-for-one with squared distance until
    // the margin, then stays at zero.
    Vec zero = Vec::Zero(4);
    double previous = -1.0;
    for (double step = 0.0; step < 0.5; step += 0.01) {
        Vec other = zero;
        other(0) = std::sqrt(step);  // squared distance = step
        const double loss = contrastive_loss(zero, other, 0, 0.1);
        if (step > 0.1)
            EXPECT_DOUBLE_EQ(loss, 0.0);
        else
            EXPECT_NEAR(loss, 0.1 - step, 1e-12);
        if (previous >= 0) {
            EXPECT_LE(loss, previous + 1e-12);
        }
        previous = loss;
    }
}

TEST(ClassifyChange, ThresholdSemantics) {
    Vec a = Vec::Unit(4, 0), b = Vec::Unit(4, 1);
    EXPECT_FALSE(classify_change(a, a).changed);
    EXPECT_DOUBLE_EQ(classify_change(a, a).distance, 0.0);

    const ChangeVerdict v = classify_change(a, b);
    EXPECT_TRUE(v.changed);
    EXPECT_DOUBLE_EQ(v.distance, 2.0);

    // Exactly at the threshold stays unchanged (strict inequality).
    Vec c = a;
    c(0) = 1.0 - std::sqrt(0.05);
    c(1) = 0.0;
    Vec base = Vec::Zero(4);
    base(0) = 1.0;
    const ChangeVerdict boundary = classify_change(base, c, (base - c).squaredNorm());
    EXPECT_FALSE(boundary.changed);
}

namespace {

// Small supervised instance with edges on both sides.
TrainingPair small_pair(std::uint64_t seed, int objects = 4) {
    GeneratorConfig cfg;
    cfg.scene.object_count = objects;
    cfg.scene.descriptor_dim = 4;
    cfg.noise = {0.1, 0.05, 0.0, 0.0};
    cfg.change.change_rate = 0.0;
    cfg.change.appear_rate = 0.0;
    const ScenePair pair = generate_pair(cfg, ViewpointProtocol::set(2), seed, 0);
    return make_training_pair(pair, Topology::Delaunay);
}

}  // namespace

TEST(UnrolledGradient, MatchesFiniteDifferences) {
    Rng rng(81);
    for (std::uint64_t seed : {11ull, 12ull, 13ull}) {
        const TrainingPair pair = small_pair(seed);
        ASSERT_TRUE(pair.has_edges());
        ASSERT_LE(pair.n() * pair.m(), 16);

        Mat lam = Mat::Identity(10, 10);
        for (Eigen::Index r = 0; r < 10; ++r)
            for (Eigen::Index c = 0; c < 10; ++c)
                lam(r, c) += 0.05 * rng.normal();
        lam = 0.5 * (lam + lam.transpose());

        const Mat analytic = unrolled::lambda_grad(pair, lam, 30);
        const Mat fd = unrolled::lambda_grad_fd(pair, lam, 30);
        const double rel = (analytic - fd).norm() / std::max(fd.norm(), 1e-12);
        EXPECT_LE(rel, 1e-3) << "seed " << seed;
    }
}

TEST(FitLambda, ZeroLearningRateIsIdentityOp) {
    const std::vector<TrainingPair> pairs = {small_pair(1), small_pair(2)};
    FitOptions opts;
    opts.learning_rate = 0.0;
    opts.epochs = 3;
    const TrainedModel model = fit_lambda(pairs, opts);
    EXPECT_TRUE(model.lam.matrix().isApprox(Mat::Identity(10, 10)));
    EXPECT_DOUBLE_EQ(model.meta.final_loss, model.meta.initial_loss);
    ASSERT_EQ(model.meta.loss_history.size(), 4u);
}

TEST(FitLambda, LossDecreasesAtModestRate) {
    std::vector<TrainingPair> pairs;
    for (std::uint64_t seed = 1; seed <= 6; ++seed)
        pairs.push_back(small_pair(seed, 5));
    FitOptions opts;
    opts.learning_rate = 5e-4;
    opts.epochs = 10;
    const TrainedModel model = fit_lambda(pairs, opts);
    EXPECT_LT(model.meta.final_loss, model.meta.initial_loss);
}

TEST(FitLambda, MisconfiguredRateRaisesNoImprovement) {
    // A negative rate ascends the loss instead of descending it.
    const std::vector<TrainingPair> pairs = {small_pair(3)};
    FitOptions opts;
    opts.learning_rate = -0.05;
    opts.epochs = 3;
    EXPECT_THROW(fit_lambda(pairs, opts), NoImprovement);
}

TEST(FitLambda, DeterministicGivenSeed) {
    std::vector<TrainingPair> pairs;
    for (std::uint64_t seed = 1; seed <= 4; ++seed)
        pairs.push_back(small_pair(seed));
    FitOptions opts;
    opts.epochs = 4;
    opts.batch = 2;
    opts.seed = 9;
    const TrainedModel a = fit_lambda(pairs, opts);
    const TrainedModel b = fit_lambda(pairs, opts);
    EXPECT_EQ(a.lam.matrix(), b.lam.matrix());
    EXPECT_EQ(a.meta.loss_history, b.meta.loss_history);

    // Parallel gradient evaluation reduces in index order, so the result
    // does not depend on the worker count.
    opts.jobs = 4;
    const TrainedModel c = fit_lambda(pairs, opts);
    EXPECT_EQ(a.lam.matrix(), c.lam.matrix());
    EXPECT_EQ(a.meta.loss_history, c.meta.loss_history);
}

TEST(ModelFile, RoundTrip) {
    const auto dir = std::filesystem::temp_directory_path() / "egm_model_test";
    std::filesystem::create_directories(dir);
    const std::string path = (dir / "model.json").string();

    Rng rng(5);
    Mat lam = Mat::NullaryExpr(6, 6, [&] { return rng.normal(); });
    TrainedModel model;
    model.lam = LambdaParam(lam);
    model.projection = Mat::Identity(4, 4) * 0.5;
    model.meta.epochs = 12;
    model.meta.final_loss = 0.25;
    model.meta.seed = 99;
    save_model(model, path);

    const TrainedModel back = load_model(path);
    EXPECT_TRUE(back.lam.matrix().isApprox(model.lam.matrix(), 1e-15));
    ASSERT_TRUE(back.projection.has_value());
    EXPECT_TRUE(back.projection->isApprox(*model.projection, 1e-15));
    EXPECT_EQ(back.meta.epochs, 12);
    EXPECT_EQ(back.meta.seed, 99u);

    EXPECT_THROW(load_model((dir / "missing.json").string()), IoError);
    std::filesystem::remove_all(dir);
}
