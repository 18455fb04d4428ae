#pragma once

#include <Eigen/Dense>
#include <algorithm>
#include <cmath>
#include <fstream>
#include <numeric>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "egm/affinity.hpp"
#include "egm/error.hpp"
#include "egm/graph.hpp"
#include "egm/parallel.hpp"
#include "egm/rng.hpp"
#include "egm/scenegen.hpp"
#include "egm/solver.hpp"

namespace egm {

inline Mat row_softmax(const Mat& s) {
    Mat r(s.rows(), s.cols());
    for (Eigen::Index i = 0; i < s.rows(); ++i) {
        const double mx = s.row(i).maxCoeff();
        Eigen::ArrayXd e = (s.row(i).array() - mx).exp();
        r.row(i) = (e / e.sum()).matrix();
    }
    return r;
}

inline Mat col_softmax(const Mat& s) { return row_softmax(s.transpose()).transpose(); }

// Cross entropy of the ground-truth matching against the row- and
// column-softmax readings of the score matrix. Zero supervision gives zero
// loss; a supervised entry contributes zero only in the limit of an
// infinitely confident correct score.
inline double matching_loss(const Mat& s, const Mat& s_gt) {
    if (s.rows() != s_gt.rows() || s.cols() != s_gt.cols())
        throw ShapeMismatch("scores " + std::to_string(s.rows()) + "x" + std::to_string(s.cols()) +
                            " vs gt " + std::to_string(s_gt.rows()) + "x" +
                            std::to_string(s_gt.cols()));
    double loss = 0.0;
    for (Eigen::Index i = 0; i < s.rows(); ++i) {
        const double mx = s.row(i).maxCoeff();
        const double lse = std::log((s.row(i).array() - mx).exp().sum()) + mx;
        for (Eigen::Index j = 0; j < s.cols(); ++j)
            if (s_gt(i, j) != 0)
                loss -= s_gt(i, j) * (s(i, j) - lse);
    }
    for (Eigen::Index j = 0; j < s.cols(); ++j) {
        const double mx = s.col(j).maxCoeff();
        const double lse = std::log((s.col(j).array() - mx).exp().sum()) + mx;
        for (Eigen::Index i = 0; i < s.rows(); ++i)
            if (s_gt(i, j) != 0)
                loss -= s_gt(i, j) * (s(i, j) - lse);
    }
    return loss;
}

inline Mat matching_loss_grad(const Mat& s, const Mat& s_gt) {
    if (s.rows() != s_gt.rows() || s.cols() != s_gt.cols())
        throw ShapeMismatch("gradient shapes differ");
    const Mat r_row = row_softmax(s);
    const Mat r_col = col_softmax(s);
    const Vec row_mass = s_gt.rowwise().sum();
    const Vec col_mass = s_gt.colwise().sum();
    Mat g(s.rows(), s.cols());
    for (Eigen::Index i = 0; i < s.rows(); ++i)
        for (Eigen::Index j = 0; j < s.cols(); ++j)
            g(i, j) = row_mass(i) * r_row(i, j) + col_mass(j) * r_col(i, j) - 2.0 * s_gt(i, j);
    return g;
}

// Squared-distance contrastive loss; t = 1 pulls the pair together, t = 0
// pushes it beyond the margin.
inline double contrastive_loss(const Vec& c1, const Vec& c2, int t, double tau_m) {
    if (c1.size() != c2.size())
        throw DimMismatch("contrastive inputs differ in size");
    const double d = (c1 - c2).squaredNorm();
    return t * d + (1 - t) * std::max(tau_m - d, 0.0);
}

struct ChangeVerdict {
    bool changed = false;
    double distance = 0.0;
};

inline ChangeVerdict classify_change(const Vec& c1, const Vec& c2, double threshold = 0.05) {
    if (c1.size() != c2.size())
        throw DimMismatch("descriptors differ in size");
    const double d = (c1 - c2).squaredNorm();
    return {d > threshold, d};
}

// One supervised matching instance with everything the unrolled solver
// needs precomputed.
struct TrainingPair {
    Mat mp;  // node affinity, penalty already applied
    Mat h1, h2;
    std::vector<Edge> edges1, edges2;
    Mat s_gt;

    Eigen::Index n() const { return mp.rows(); }
    Eigen::Index m() const { return mp.cols(); }
    bool has_edges() const { return !edges1.empty() && !edges2.empty(); }
};

inline Mat ground_truth_matrix(const ScenePair& pair) {
    Mat gt = Mat::Zero(static_cast<Eigen::Index>(pair.detections1.size()),
                       static_cast<Eigen::Index>(pair.detections2.size()));
    for (const auto& [i, j] : pair.gt_match)
        if (i >= 0 && j >= 0)
            gt(i, j) = 1.0;
    return gt;
}

inline TrainingPair make_training_pair(const ScenePair& pair, Topology topology,
                                       bool use_epipolar = true,
                                       const EpipolarOptions& epi_opts = {}) {
    const int w = pair.view1.intrinsics.width, h = pair.view1.intrinsics.height;
    ObjectGraph g1 = build_object_graph(pair.detections1, topology, w, h);
    ObjectGraph g2 = build_object_graph(pair.detections2, topology, w, h);

    TrainingPair tp;
    const NodeFeatures x1 = node_feature_matrix(g1);
    const NodeFeatures x2 = node_feature_matrix(g2);
    if (use_epipolar && pair.fundamental) {
        const EpipolarPenalty pen = epipolar_penalty_matrix(
            *pair.fundamental, detail::node_geometry(g1), detail::node_geometry(g2), epi_opts);
        tp.mp = node_affinity(x1, x2, &pen);
    } else {
        tp.mp = node_affinity(x1, x2);
    }
    if (!g1.edges.empty() && !g2.edges.empty()) {
        tp.h1 = edge_feature_matrix(g1).h;
        tp.h2 = edge_feature_matrix(g2).h;
    }
    tp.edges1 = g1.edges;
    tp.edges2 = g2.edges;
    tp.s_gt = ground_truth_matrix(pair);
    return tp;
}

namespace unrolled {

// Fixed-iteration forward pass used during training. Inference uses
// convergence-based stopping instead; the fixed count makes the recurrence a
// plain differentiable composition.
struct Trace {
    std::vector<Vec> iterates;  // v_0 .. v_K
    std::vector<double> norms;  // ||M v_k|| for each executed step
    Mat bilinear;               // E = h1 * lam * h2^T (pre-rectification)
    AffinityFactors factors;
    Mat scores;
    double loss = 0.0;
};

inline Trace forward(const TrainingPair& pair, const Mat& lam, int iterations) {
    Trace t;
    if (!pair.has_edges()) {
        t.scores = pair.mp;
        const double norm = t.scores.norm();
        if (norm > 0)
            t.scores /= norm;
        t.loss = matching_loss(t.scores, pair.s_gt);
        return t;
    }

    t.bilinear = pair.h1 * lam * pair.h2.transpose();
    t.factors.mp = pair.mp;
    t.factors.me = t.bilinear.cwiseMax(0.0);
    t.factors.edges1 = pair.edges1;
    t.factors.edges2 = pair.edges2;

    const Eigen::Index nm = pair.n() * pair.m();
    Vec v = Vec::Constant(nm, 1.0 / std::sqrt(static_cast<double>(nm)));
    t.iterates.push_back(v);
    for (int k = 0; k < iterations; ++k) {
        Vec u = affinity_matvec(t.factors, v);
        const double norm = u.norm();
        if (norm <= 0.0)
            break;
        v = u / norm;
        t.iterates.push_back(v);
        t.norms.push_back(norm);
    }
    const MatchingScores s = reshape_scores(v, pair.n(), pair.m());
    t.scores = s.s;
    t.loss = matching_loss(t.scores, pair.s_gt);
    return t;
}

// Reverse pass through loss -> reshape -> K normalized power steps ->
// rectified bilinear edge affinity -> lambda.
inline Mat lambda_grad(const TrainingPair& pair, const Mat& lam, int iterations,
                       double* loss_out = nullptr) {
    const Trace t = forward(pair, lam, iterations);
    if (loss_out)
        *loss_out = t.loss;
    if (!pair.has_edges())
        return Mat::Zero(lam.rows(), lam.cols());

    const Eigen::Index n = pair.n(), m = pair.m();
    const Mat ds = matching_loss_grad(t.scores, pair.s_gt);
    Vec g(n * m);  // row-major flatten, same convention as the score vec
    for (Eigen::Index i = 0; i < n; ++i)
        for (Eigen::Index j = 0; j < m; ++j)
            g(i * m + j) = ds(i, j);

    Mat dme = Mat::Zero(t.factors.me.rows(), t.factors.me.cols());
    const int steps = static_cast<int>(t.norms.size());
    for (int k = steps - 1; k >= 0; --k) {
        const Vec& v_next = t.iterates[static_cast<std::size_t>(k) + 1];
        const Vec& v_prev = t.iterates[static_cast<std::size_t>(k)];
        // d(u/||u||) backward
        Vec du = (g - v_next * v_next.dot(g)) / t.norms[static_cast<std::size_t>(k)];

        Eigen::Map<const Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>>
            gu(du.data(), n, m);
        Eigen::Map<const Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>>
            vx(v_prev.data(), n, m);
        for (std::size_t e1 = 0; e1 < pair.edges1.size(); ++e1) {
            const auto [a, b] = pair.edges1[e1];
            for (std::size_t e2 = 0; e2 < pair.edges2.size(); ++e2) {
                const auto [c, d] = pair.edges2[e2];
                dme(static_cast<Eigen::Index>(e1), static_cast<Eigen::Index>(e2)) +=
                    gu(a, c) * vx(b, d) + gu(a, d) * vx(b, c) + gu(b, c) * vx(a, d) +
                    gu(b, d) * vx(a, c);
            }
        }
        // M is symmetric, so dL/dv_k = M * du.
        g = affinity_matvec(t.factors, du);
    }

    const Mat de = dme.cwiseProduct((t.bilinear.array() > 0.0).cast<double>().matrix());
    return pair.h1.transpose() * de * pair.h2;
}

inline Mat lambda_grad_fd(const TrainingPair& pair, const Mat& lam, int iterations,
                          double step = 1e-5) {
    Mat g = Mat::Zero(lam.rows(), lam.cols());
    Mat probe = lam;
    for (Eigen::Index r = 0; r < lam.rows(); ++r) {
        for (Eigen::Index c = 0; c < lam.cols(); ++c) {
            probe(r, c) = lam(r, c) + step;
            const double up = forward(pair, probe, iterations).loss;
            probe(r, c) = lam(r, c) - step;
            const double down = forward(pair, probe, iterations).loss;
            probe(r, c) = lam(r, c);
            g(r, c) = (up - down) / (2.0 * step);
        }
    }
    return g;
}

}  // namespace unrolled

enum class GradMode { FiniteDiff, Unrolled };

struct FitOptions {
    double learning_rate = 5e-4;
    int epochs = 50;
    int batch = 0;  // 0 = full batch
    std::uint64_t seed = 0;
    GradMode grad_mode = GradMode::Unrolled;
    int unroll_iterations = 30;
    double momentum = 0.0;
    double grad_clip = 1.0;  // Frobenius cap per batch gradient; 0 disables
    int jobs = 1;            // pair-gradient workers; the update step is serial
    std::optional<Mat> init;
};

struct TrainingMeta {
    int epochs = 0;
    double initial_loss = 0.0;
    double final_loss = 0.0;
    std::uint64_t seed = 0;
    std::vector<double> loss_history;
};

struct TrainedModel {
    LambdaParam lam;
    std::optional<Mat> projection;
    TrainingMeta meta;
};

namespace learn_detail {

inline double mean_loss(const std::vector<TrainingPair>& pairs, const Mat& lam, int iterations,
                        int jobs) {
    std::vector<double> losses(pairs.size(), 0.0);
    parallel_for(pairs.size(), jobs, [&](std::size_t i) {
        losses[i] = unrolled::forward(pairs[i], lam, iterations).loss;
    });
    double total = 0.0;
    for (double l : losses)
        total += l;
    return total / static_cast<double>(pairs.size());
}

}  // namespace learn_detail

// Plain gradient descent on the edge-affinity parameter, symmetrized after
// every step. Deterministic given (pairs, options).
inline TrainedModel fit_lambda(const std::vector<TrainingPair>& pairs, const FitOptions& opts = {}) {
    if (pairs.empty())
        throw ConfigError("fit_lambda needs at least one training pair");
    Eigen::Index d_e = 0;
    for (const auto& p : pairs)
        if (p.has_edges()) {
            d_e = p.h1.cols();
            break;
        }
    if (d_e == 0)
        throw ConfigError("no training pair has edges; nothing depends on lambda");

    Mat lam = opts.init ? *opts.init : Mat::Identity(d_e, d_e);
    lam = 0.5 * (lam + lam.transpose());

    const double initial = learn_detail::mean_loss(pairs, lam, opts.unroll_iterations, opts.jobs);
    std::vector<double> history{initial};

    Rng rng(derive_seed(opts.seed, 0x666974ULL));
    std::vector<std::size_t> order(pairs.size());
    std::iota(order.begin(), order.end(), std::size_t{0});
    const std::size_t batch =
        opts.batch > 0 ? std::min<std::size_t>(opts.batch, pairs.size()) : pairs.size();
    Mat velocity = Mat::Zero(d_e, d_e);

    for (int epoch = 0; epoch < opts.epochs; ++epoch) {
        if (batch < pairs.size()) {
            // Fisher-Yates with the deterministic generator.
            for (std::size_t i = order.size(); i > 1; --i)
                std::swap(order[i - 1], order[rng.uniform_index(i)]);
        }
        for (std::size_t start = 0; start < order.size(); start += batch) {
            const std::size_t stop = std::min(start + batch, order.size());
            // Pair gradients in parallel, summed in index order.
            std::vector<Mat> grads(stop - start);
            parallel_for(stop - start, opts.jobs, [&](std::size_t k) {
                const TrainingPair& p = pairs[order[start + k]];
                grads[k] = opts.grad_mode == GradMode::Unrolled
                               ? unrolled::lambda_grad(p, lam, opts.unroll_iterations)
                               : unrolled::lambda_grad_fd(p, lam, opts.unroll_iterations);
            });
            Mat grad = Mat::Zero(d_e, d_e);
            for (const Mat& g : grads)
                grad += g;
            grad /= static_cast<double>(stop - start);
            if (opts.grad_clip > 0) {
                const double norm = grad.norm();
                if (norm > opts.grad_clip)
                    grad *= opts.grad_clip / norm;
            }
            velocity = opts.momentum * velocity - opts.learning_rate * grad;
            lam += velocity;
            lam = 0.5 * (lam + lam.transpose());
        }
        history.push_back(learn_detail::mean_loss(pairs, lam, opts.unroll_iterations, opts.jobs));
    }

    const double final_loss = history.back();
    // A NaN final loss (diverged parameters) counts as no improvement.
    if (!(final_loss <= initial))
        throw NoImprovement("final loss " + std::to_string(final_loss) + " exceeds initial " +
                            std::to_string(initial) + "; lower the learning rate");

    TrainedModel model;
    model.lam = LambdaParam(lam);
    model.meta.epochs = opts.epochs;
    model.meta.initial_loss = initial;
    model.meta.final_loss = final_loss;
    model.meta.seed = opts.seed;
    model.meta.loss_history = std::move(history);
    return model;
}

inline constexpr int kModelFileVersion = 1;

inline void save_model(const TrainedModel& model, const std::string& path) {
    nlohmann::json j;
    j["version"] = kModelFileVersion;
    const Mat& lam = model.lam.matrix();
    j["d_e"] = lam.rows();
    std::vector<double> flat;
    flat.reserve(static_cast<std::size_t>(lam.size()));
    for (Eigen::Index r = 0; r < lam.rows(); ++r)
        for (Eigen::Index c = 0; c < lam.cols(); ++c)
            flat.push_back(lam(r, c));
    j["lam"] = flat;
    if (model.projection) {
        std::vector<double> proj;
        for (Eigen::Index r = 0; r < model.projection->rows(); ++r)
            for (Eigen::Index c = 0; c < model.projection->cols(); ++c)
                proj.push_back((*model.projection)(r, c));
        j["projection"] = proj;
        j["projection_dim"] = model.projection->rows();
    }
    j["metadata"] = {{"epochs", model.meta.epochs},
                     {"initial_loss", model.meta.initial_loss},
                     {"final_loss", model.meta.final_loss},
                     {"seed", model.meta.seed}};
    std::ofstream out(path, std::ios::binary);
    if (!out)
        throw IoError("cannot open " + path + " for writing");
    out << j.dump(2) << "\n";
}

inline TrainedModel load_model(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in)
        throw IoError("cannot open " + path);
    nlohmann::json j;
    try {
        in >> j;
    } catch (const nlohmann::json::parse_error& e) {
        throw IoError(path + ": " + e.what());
    }
    try {
        if (j.at("version").get<int>() != kModelFileVersion)
            throw IoError(path + ": unsupported model version");
        const Eigen::Index d_e = j.at("d_e").get<Eigen::Index>();
        const auto flat = j.at("lam").get<std::vector<double>>();
        if (static_cast<Eigen::Index>(flat.size()) != d_e * d_e)
            throw IoError(path + ": lam has wrong length");
        Mat lam(d_e, d_e);
        for (Eigen::Index r = 0; r < d_e; ++r)
            for (Eigen::Index c = 0; c < d_e; ++c)
                lam(r, c) = flat[static_cast<std::size_t>(r * d_e + c)];
        TrainedModel model;
        model.lam = LambdaParam(lam);
        if (j.contains("projection")) {
            const Eigen::Index d = j.at("projection_dim").get<Eigen::Index>();
            const auto proj = j.at("projection").get<std::vector<double>>();
            if (static_cast<Eigen::Index>(proj.size()) != d * d)
                throw IoError(path + ": projection has wrong length");
            Mat p(d, d);
            for (Eigen::Index r = 0; r < d; ++r)
                for (Eigen::Index c = 0; c < d; ++c)
                    p(r, c) = proj[static_cast<std::size_t>(r * d + c)];
            model.projection = p;
        }
        const auto& meta = j.at("metadata");
        model.meta.epochs = meta.value("epochs", 0);
        model.meta.initial_loss = meta.value("initial_loss", 0.0);
        model.meta.final_loss = meta.value("final_loss", 0.0);
        model.meta.seed = meta.value("seed", std::uint64_t{0});
        return model;
    } catch (const nlohmann::json::exception& e) {
        throw IoError(path + ": " + e.what());
    }
}

}  // namespace egm
