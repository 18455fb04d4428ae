#pragma once

#include <Eigen/Dense>
#include <algorithm>
#include <optional>
#include <string>
#include <vector>

#include "egm/affinity.hpp"
#include "egm/error.hpp"
#include "egm/geometry.hpp"
#include "egm/graph.hpp"

namespace egm {

struct SolverStats {
    int iterations = 0;
    double residual = 0.0;
    double eigenvalue = 0.0;
    bool converged = true;
};

struct PowerIterationResult {
    Vec v;
    SolverStats stats;
};

// Dominant eigenvector of the factorized affinity by power iteration.
// M is nonnegative and the start vector is uniform positive, so every
// iterate stays nonnegative (Perron). Non-convergence within max_iter is
// reported through the stats flag, not an exception.
inline PowerIterationResult leading_eigenvector_power(const AffinityFactors& factors,
                                                      double tol = 1e-10, int max_iter = 1000) {
    const Eigen::Index nm = factors.n() * factors.m();
    PowerIterationResult r;
    r.v = Vec::Constant(nm, 1.0 / std::sqrt(static_cast<double>(nm)));

    for (int it = 1; it <= max_iter; ++it) {
        Vec w = affinity_matvec(factors, r.v);
        const double lambda = r.v.dot(w);  // Rayleigh quotient, ||v|| = 1
        const double residual = (w - lambda * r.v).norm();
        r.stats.iterations = it;
        r.stats.residual = residual;
        r.stats.eigenvalue = lambda;

        const double wn = w.norm();
        if (wn <= 0.0) {
            // v is in the null space of M; the residual contract holds with
            // eigenvalue zero.
            r.stats.eigenvalue = 0.0;
            r.stats.converged = true;
            return r;
        }
        r.v = w / wn;
        if (residual <= tol * std::max(lambda, 1e-300)) {
            r.stats.converged = true;
            return r;
        }
    }
    r.stats.converged = false;
    return r;
}

struct MatchingScores {
    Mat s;  // n x m, nonnegative, unit Frobenius norm (zero matrix when no
            // candidate scores survive rectification)
    SolverStats solver_stats;
};

// Row-major unflatten: s(i, j) = v[i*m + j].
inline MatchingScores reshape_scores(const Vec& v, Eigen::Index n, Eigen::Index m) {
    if (v.size() != n * m)
        throw DimMismatch("vector length " + std::to_string(v.size()) + " vs " +
                          std::to_string(n) + "x" + std::to_string(m));
    MatchingScores s;
    s.s = Eigen::Map<const Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>>(
        v.data(), n, m);
    return s;
}

// One-to-one correspondence with explicit unmatched nodes on both sides.
struct Assignment {
    std::vector<std::pair<int, int>> pairs;
    std::vector<double> confidence;  // score of each pair
    std::vector<int> unmatched1;
    std::vector<int> unmatched2;
};

// Mutual-argmax inference: (i, j) is matched iff j is i's best column, i is
// j's best row, and the score clears gamma. Argmax ties break toward the
// lowest index.
inline Assignment infer_matching(const MatchingScores& scores, double gamma) {
    const Eigen::Index n = scores.s.rows(), m = scores.s.cols();
    std::vector<Eigen::Index> row_best(n), col_best(m);
    for (Eigen::Index i = 0; i < n; ++i) {
        Eigen::Index best = 0;
        for (Eigen::Index j = 1; j < m; ++j)
            if (scores.s(i, j) > scores.s(i, best))
                best = j;
        row_best[i] = best;
    }
    for (Eigen::Index j = 0; j < m; ++j) {
        Eigen::Index best = 0;
        for (Eigen::Index i = 1; i < n; ++i)
            if (scores.s(i, j) > scores.s(best, j))
                best = i;
        col_best[j] = best;
    }

    Assignment a;
    std::vector<bool> used2(m, false);
    for (Eigen::Index i = 0; i < n; ++i) {
        const Eigen::Index j = row_best[i];
        if (col_best[j] == i && scores.s(i, j) > gamma) {
            a.pairs.emplace_back(static_cast<int>(i), static_cast<int>(j));
            a.confidence.push_back(scores.s(i, j));
            used2[j] = true;
        } else {
            a.unmatched1.push_back(static_cast<int>(i));
        }
    }
    for (Eigen::Index j = 0; j < m; ++j)
        if (!used2[j])
            a.unmatched2.push_back(static_cast<int>(j));
    return a;
}

// Rectified inner products scaled to a unit score vector. An all-zero score
// matrix (orthogonal features) is left as-is and yields no matches.
inline MatchingScores nn_scores(const NodeFeatures& x1, const NodeFeatures& x2,
                                const EpipolarPenalty* penalty = nullptr) {
    MatchingScores s;
    s.s = node_affinity(x1, x2, penalty);
    const double norm = s.s.norm();
    if (norm > 0)
        s.s /= norm;
    return s;
}

inline Assignment match_nn(const NodeFeatures& x1, const NodeFeatures& x2, double gamma) {
    return infer_matching(nn_scores(x1, x2), gamma);
}

inline Assignment match_enn(const NodeFeatures& x1, const NodeFeatures& x2,
                            const EpipolarPenalty& penalty, double gamma) {
    return infer_matching(nn_scores(x1, x2, &penalty), gamma);
}

struct GraphMatchOptions {
    double gamma = 0.5;
    EpipolarOptions epipolar;
    double tol = 1e-10;
    int max_iter = 1000;
};

namespace detail {

inline std::vector<NodeGeometry> node_geometry(const ObjectGraph& g) {
    std::vector<NodeGeometry> out(g.nodes.size());
    for (std::size_t i = 0; i < g.nodes.size(); ++i)
        out[i] = {{g.nodes[i].bbox.cx, g.nodes[i].bbox.cy}, g.nodes[i].bbox.w, g.nodes[i].bbox.h};
    return out;
}

}  // namespace detail

struct GraphMatchResult {
    MatchingScores scores;
    Assignment assignment;
    EpipolarPenalty penalty;  // all-ones when no fundamental matrix is given
};

// Full spectral matching pipeline: features -> (epipolar penalty) ->
// affinities -> power iteration -> scores -> mutual-argmax inference.
// Passing no fundamental matrix gives plain graph matching; graphs without
// edges reduce exactly to normalized node-affinity scores (the structural
// term of M vanishes and sharpening a diagonal eigenproblem would only
// collapse the scores onto a single pair).
inline GraphMatchResult graph_match(const ObjectGraph& g1, const ObjectGraph& g2,
                                    const FundamentalMatrix* f, const LambdaParam& lam,
                                    const GraphMatchOptions& opts = {}) {
    if (g1.nodes.empty() || g2.nodes.empty())
        throw ConfigError("graph matching needs nonempty graphs");

    GraphMatchResult r;
    const NodeFeatures x1 = node_feature_matrix(g1);
    const NodeFeatures x2 = node_feature_matrix(g2);

    const Eigen::Index n = x1.x.rows(), m = x2.x.rows();
    r.penalty = f ? epipolar_penalty_matrix(*f, detail::node_geometry(g1),
                                            detail::node_geometry(g2), opts.epipolar)
                  : EpipolarPenalty::none(n, m);

    AffinityFactors factors;
    factors.mp = node_affinity(x1, x2, &r.penalty);

    if (g1.edges.empty() || g2.edges.empty()) {
        r.scores.s = factors.mp;
        const double norm = r.scores.s.norm();
        if (norm > 0)
            r.scores.s /= norm;
    } else {
        factors.me = edge_affinity(edge_feature_matrix(g1), edge_feature_matrix(g2), lam);
        factors.edges1 = g1.edges;
        factors.edges2 = g2.edges;
        PowerIterationResult p = leading_eigenvector_power(factors, opts.tol, opts.max_iter);
        r.scores = reshape_scores(p.v, n, m);
        r.scores.solver_stats = p.stats;
    }
    r.assignment = infer_matching(r.scores, opts.gamma);
    return r;
}

}  // namespace egm
