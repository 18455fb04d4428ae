#include <gtest/gtest.h>

#include <algorithm>

#include "egm/eval.hpp"

using namespace egm;

namespace {

Assignment make_assignment(std::vector<std::pair<int, int>> pairs, std::vector<int> u1,
                           std::vector<int> u2) {
    Assignment a;
    a.pairs = std::move(pairs);
    a.confidence.assign(a.pairs.size(), 1.0);
    a.unmatched1 = std::move(u1);
    a.unmatched2 = std::move(u2);
    return a;
}

Assignment random_assignment(int n, int m, Rng& rng) {
    Assignment a;
    std::vector<int> free2;
    for (int j = 0; j < m; ++j)
        free2.push_back(j);
    for (int i = 0; i < n; ++i) {
        if (!free2.empty() && rng.uniform() < 0.6) {
            const std::size_t pick = rng.uniform_index(free2.size());
            a.pairs.emplace_back(i, free2[pick]);
            a.confidence.push_back(1.0);
            free2.erase(free2.begin() + static_cast<std::ptrdiff_t>(pick));
        } else {
            a.unmatched1.push_back(i);
        }
    }
    a.unmatched2 = free2;
    std::sort(a.unmatched2.begin(), a.unmatched2.end());
    return a;
}

Assignment swapped(const Assignment& a) {
    Assignment s;
    for (const auto& [i, j] : a.pairs) {
        s.pairs.emplace_back(j, i);
        s.confidence.push_back(1.0);
    }
    s.unmatched1 = a.unmatched2;
    s.unmatched2 = a.unmatched1;
    return s;
}

}  // namespace

TEST(MatchingAccuracy, PerfectPrediction) {
    const Assignment gt = make_assignment({{0, 1}, {1, 0}}, {2}, {2});
    EXPECT_DOUBLE_EQ(matching_accuracy(gt, gt), 1.0);
}

TEST(MatchingAccuracy, AllUnmatchedBothSides) {
    const Assignment gt = make_assignment({}, {0, 1}, {0, 1, 2});
    const Assignment pred = make_assignment({}, {0, 1}, {0, 1, 2});
    EXPECT_DOUBLE_EQ(matching_accuracy(pred, gt), 1.0);
}

TEST(MatchingAccuracy, HandCountedHalf) {
    const Assignment gt = make_assignment({{0, 0}, {1, 1}}, {}, {});
    const Assignment pred = make_assignment({{0, 0}}, {1}, {1});
    EXPECT_DOUBLE_EQ(matching_accuracy(pred, gt), 0.5);
}

TEST(MatchingAccuracy, SwapSymmetry) {
    Rng rng(64);
    for (int trial = 0; trial < 1000; ++trial) {
        const int n = 1 + static_cast<int>(rng.uniform_index(6));
        const int m = 1 + static_cast<int>(rng.uniform_index(6));
        const Assignment gt = random_assignment(n, m, rng);
        const Assignment pred = random_assignment(n, m, rng);
        EXPECT_DOUBLE_EQ(matching_accuracy(pred, gt),
                         matching_accuracy(swapped(pred), swapped(gt)));
    }
}

TEST(MatchingAccuracy, PerEntryMode) {
    // Ground truth: (0,0), (1,phi), (phi,1). Prediction misses the pair.
    const Assignment gt = make_assignment({{0, 0}}, {1}, {1});
    const Assignment pred = make_assignment({}, {0, 1}, {0, 1});
    EXPECT_DOUBLE_EQ(matching_accuracy(pred, gt, AccuracyMode::PerEntry), 2.0 / 3.0);
    EXPECT_DOUBLE_EQ(matching_accuracy(pred, gt, AccuracyMode::PerNode), 2.0 / 4.0);
}

TEST(MatchingAccuracy, CoverageMismatchThrows) {
    const Assignment gt = make_assignment({{0, 0}}, {1}, {});
    const Assignment pred = make_assignment({{0, 0}}, {}, {});
    EXPECT_THROW(matching_accuracy(pred, gt), CoverageMismatch);

    Assignment repeated = make_assignment({{0, 0}, {0, 1}}, {}, {});
    EXPECT_THROW(matching_accuracy(repeated, repeated), CoverageMismatch);
}

TEST(ChangeMetrics, AllCorrect) {
    const std::vector<bool> labels = {true, false, true, false};
    const ChangeMetrics m = change_metrics(labels, labels);
    EXPECT_DOUBLE_EQ(m.precision, 1.0);
    EXPECT_DOUBLE_EQ(m.recall, 1.0);
    EXPECT_DOUBLE_EQ(m.f1, 1.0);
    EXPECT_FALSE(m.no_positive_predictions);
}

TEST(ChangeMetrics, EmptyPredictionConvention) {
    const std::vector<bool> pred(4, false);
    const std::vector<bool> gt = {true, true, false, false};
    const ChangeMetrics m = change_metrics(pred, gt);
    EXPECT_TRUE(m.no_positive_predictions);
    EXPECT_DOUBLE_EQ(m.precision, 0.0);
    EXPECT_DOUBLE_EQ(m.recall, 0.0);
    EXPECT_DOUBLE_EQ(m.f1, 0.0);
}

TEST(ChangeMetrics, HandConfusionCounts) {
    // Ten objects, 4 positives in GT; prediction adds 2 false positives and
    // misses 1 positive.
    const std::vector<bool> gt = {1, 1, 1, 1, 0, 0, 0, 0, 0, 0};
    const std::vector<bool> pred = {1, 1, 1, 0, 1, 1, 0, 0, 0, 0};
    const ChangeMetrics m = change_metrics(pred, gt);
    EXPECT_EQ(m.tp, 3);
    EXPECT_EQ(m.fp, 2);
    EXPECT_EQ(m.fn, 1);
    EXPECT_DOUBLE_EQ(m.precision, 0.6);
    EXPECT_DOUBLE_EQ(m.recall, 0.75);

    EXPECT_THROW(change_metrics({true}, {true, false}), LengthMismatch);
}

TEST(GtAssignment, SplitsPairsAndPhi) {
    ScenePair pair;
    pair.gt_match = {{0, 2}, {1, -1}, {-1, 0}, {2, 1}};
    const Assignment a = gt_assignment(pair);
    EXPECT_EQ(a.pairs.size(), 2u);
    EXPECT_EQ(a.unmatched1, std::vector<int>{1});
    EXPECT_EQ(a.unmatched2, std::vector<int>{0});
}

namespace {

BenchmarkConfig tiny_bench() {
    BenchmarkConfig cfg;
    cfg.methods = {Method::NN, Method::EGMNetDT};
    cfg.sets = {1, 3};
    cfg.pairs_per_set = 4;
    cfg.generator.scene.object_count = 8;
    cfg.calibrate_gamma = true;
    cfg.calibration_pairs = 3;
    cfg.collect_timing = false;
    return cfg;
}

}  // namespace

TEST(RunBenchmark, DeterministicAcrossWorkerCounts) {
    BenchmarkConfig cfg = tiny_bench();
    cfg.jobs = 1;
    const EvalReport serial = run_benchmark(cfg);
    cfg.jobs = 4;
    const EvalReport parallel = run_benchmark(cfg);
    EXPECT_EQ(serial.to_csv(), parallel.to_csv());
    EXPECT_EQ(serial.to_json(), parallel.to_json());

    // And across repeated runs.
    const EvalReport again = run_benchmark(cfg);
    EXPECT_EQ(parallel.to_csv(), again.to_csv());
}

TEST(RunBenchmark, RowLayoutAndRanges) {
    const EvalReport report = run_benchmark(tiny_bench());
    ASSERT_EQ(report.rows.size(), 4u);  // 2 methods x 2 sets
    for (const auto& row : report.rows) {
        EXPECT_GE(row.accuracy, 0.0);
        EXPECT_LE(row.accuracy, 1.0);
        EXPECT_EQ(row.pairs, 4);
    }
    EXPECT_EQ(report.rows[0].method, Method::NN);
    EXPECT_EQ(report.rows[0].set, 1);
    EXPECT_EQ(report.rows[1].set, 3);
    EXPECT_EQ(report.rows[2].method, Method::EGMNetDT);

    const std::string csv = report.to_csv();
    EXPECT_NE(csv.find("method,set,pairs,accuracy,precision,recall,f1,seconds"),
              std::string::npos);
    EXPECT_NE(csv.find("EGMNet-DT,3,4,"), std::string::npos);
}

TEST(RunBenchmark, ValidatesConfig) {
    BenchmarkConfig cfg = tiny_bench();
    cfg.methods.clear();
    EXPECT_THROW(run_benchmark(cfg), ConfigError);

    cfg = tiny_bench();
    cfg.sets = {7};
    EXPECT_THROW(run_benchmark(cfg), ConfigError);

    cfg = tiny_bench();
    cfg.pairs_per_set = 0;
    EXPECT_THROW(run_benchmark(cfg), ConfigError);
}

TEST(MethodNames, RoundTrip) {
    for (Method m : {Method::NN, Method::ENN, Method::GMN, Method::EGMNetFC, Method::EGMNetDT})
        EXPECT_EQ(method_from_name(method_name(m)), m);
    EXPECT_THROW(method_from_name("Sinkhorn"), ConfigError);
}

TEST(EvaluateSinglePair, ModelProjectionTransformsDescriptors) {
    GeneratorConfig gen;
    gen.scene.object_count = 9;
    gen.scene.descriptor_dim = 4;
    const ScenePair pair = generate_pair(gen, ViewpointProtocol::set(2), 17, 0);

    BenchmarkConfig plain;
    plain.calibrate_gamma = false;
    plain.gamma = 0.05;
    const SinglePairRun base = evaluate_single_pair(pair, Method::NN, plain);

    // An identity projection renormalizes unit descriptors: same scores.
    BenchmarkConfig with_identity = plain;
    TrainedModel ident;
    ident.lam = LambdaParam::scale_prior(4);
    ident.projection = Mat::Identity(4, 4);
    with_identity.model = ident;
    const SinglePairRun same = evaluate_single_pair(pair, Method::NN, with_identity);
    EXPECT_TRUE(same.scores.s.isApprox(base.scores.s, 1e-12));

    // A rotation applied to both views preserves every inner product.
    BenchmarkConfig with_rotation = plain;
    TrainedModel rot = ident;
    Mat r = Mat::Identity(4, 4);
    r(0, 0) = 0.0; r(0, 1) = 1.0;
    r(1, 0) = -1.0; r(1, 1) = 0.0;
    rot.projection = r;
    with_rotation.model = rot;
    const SinglePairRun rotated = evaluate_single_pair(pair, Method::NN, with_rotation);
    EXPECT_TRUE(rotated.scores.s.isApprox(base.scores.s, 1e-12));

    // An anisotropic projection reshapes the descriptor geometry.
    BenchmarkConfig with_scaling = plain;
    TrainedModel scal = ident;
    Mat p = Mat::Identity(4, 4);
    p(0, 0) = 2.0;
    p(2, 2) = 0.25;
    scal.projection = p;
    with_scaling.model = scal;
    const SinglePairRun scaled = evaluate_single_pair(pair, Method::NN, with_scaling);
    EXPECT_FALSE(scaled.scores.s.isApprox(base.scores.s, 1e-9));
}

TEST(RunBenchmark, ZeroNoiseCeilingOnSetOne) {
    BenchmarkConfig cfg;
    cfg.sets = {1};
    cfg.pairs_per_set = 30;
    cfg.calibration_pairs = 8;
    cfg.jobs = 2;
    cfg.collect_timing = false;
    cfg.generator.scene.object_count = 8;
    cfg.generator.noise = {0.0, 0.0, 0.0, 0.0};
    cfg.generator.change.change_rate = 0.0;
    cfg.generator.change.appear_rate = 0.0;
    const EvalReport r = run_benchmark(cfg);

    double gmn = 0.0, egm_dt = 0.0;
    for (const auto& row : r.rows) {
        EXPECT_GE(row.accuracy, 0.99) << method_name(row.method);
        if (row.method == Method::GMN)
            gmn = row.accuracy;
        if (row.method == Method::EGMNetDT)
            egm_dt = row.accuracy;
    }
    // Zero baseline: the epipolar penalty degenerates and the two methods
    // coincide.
    EXPECT_LE(std::abs(gmn - egm_dt), 0.03);
}
