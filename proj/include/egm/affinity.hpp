#pragma once

#include <Eigen/Dense>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "egm/error.hpp"
#include "egm/geometry.hpp"
#include "egm/graph.hpp"

namespace egm {

using Mat = Eigen::MatrixXd;
using Vec = Eigen::VectorXd;

// Bilinear-form parameter of the edge affinity, kept symmetric on
// construction.
class LambdaParam {
public:
    LambdaParam() = default;
    explicit LambdaParam(const Mat& m) : lam_(0.5 * (m + m.transpose())) {}

    static LambdaParam identity(Eigen::Index d_e) { return LambdaParam(Mat::Identity(d_e, d_e)); }

    // Untrained default for edge features laid out as
    // [desc sum ; |desc diff| ; displacement]. The descriptor blocks are
    // damped so the node affinity anchors the spectrum (a structure-dominant
    // M concentrates its leading eigenvector on hub nodes and starves the
    // rest), while displacement agreement keeps the structural say.
    // Training refines these scales.
    static LambdaParam scale_prior(Eigen::Index d_f, double descriptor_weight = 0.03,
                                   double displacement_weight = 0.7) {
        Mat lam = descriptor_weight * Mat::Identity(2 * d_f + 2, 2 * d_f + 2);
        lam(2 * d_f, 2 * d_f) = displacement_weight;
        lam(2 * d_f + 1, 2 * d_f + 1) = displacement_weight;
        return LambdaParam(lam);
    }

    const Mat& matrix() const { return lam_; }
    Eigen::Index dim() const { return lam_.rows(); }

private:
    Mat lam_;
};

// Node affinity: rectified feature inner products, optionally damped by the
// epipolar penalty. A missing penalty behaves as all-ones.
inline Mat node_affinity(const NodeFeatures& x1, const NodeFeatures& x2,
                         const EpipolarPenalty* penalty = nullptr) {
    if (x1.x.cols() != x2.x.cols())
        throw DimMismatch("node feature dims: " + std::to_string(x1.x.cols()) + " vs " +
                          std::to_string(x2.x.cols()));
    Mat mp = (x1.x * x2.x.transpose()).cwiseMax(0.0);
    if (penalty) {
        if (penalty->w.rows() != mp.rows() || penalty->w.cols() != mp.cols())
            throw DimMismatch("penalty is " + std::to_string(penalty->w.rows()) + "x" +
                              std::to_string(penalty->w.cols()) + ", affinity is " +
                              std::to_string(mp.rows()) + "x" + std::to_string(mp.cols()));
        mp = mp.cwiseProduct(penalty->w);
    }
    return mp;
}

// Edge affinity: rectified bilinear form h1 * lam * h2^T.
inline Mat edge_affinity(const EdgeFeatures& h1, const EdgeFeatures& h2, const LambdaParam& lam) {
    if (h1.h.cols() != lam.dim() || h2.h.cols() != lam.dim())
        throw DimMismatch("edge feature dim vs lambda dim");
    return (h1.h * lam.matrix() * h2.h.transpose()).cwiseMax(0.0);
}

// Factorized representation of the nm x nm affinity matrix M. The diagonal
// holds vec(mp); entry ((i1,i2),(j1,j2)) holds the edge affinity of
// {i1,j1} in graph 1 and {i2,j2} in graph 2. Undirected edges contribute to
// both symmetric orderings, so M is symmetric and nonnegative by
// construction.
struct AffinityFactors {
    Mat mp;                   // n x m
    Mat me;                   // p x q
    std::vector<Edge> edges1; // p canonical edges of graph 1
    std::vector<Edge> edges2; // q canonical edges of graph 2

    Eigen::Index n() const { return mp.rows(); }
    Eigen::Index m() const { return mp.cols(); }
};

// Row-major vec convention throughout: x[i*m + j] pairs node i of graph 1
// with node j of graph 2.
inline Mat assemble_dense_affinity(const AffinityFactors& factors) {
    const Eigen::Index n = factors.n(), m = factors.m();
    const Eigen::Index nm = n * m;
    if (nm > 4096)
        throw TooLarge("dense affinity would be " + std::to_string(nm) + "^2");

    Mat big = Mat::Zero(nm, nm);
    for (Eigen::Index i = 0; i < n; ++i)
        for (Eigen::Index j = 0; j < m; ++j)
            big(i * m + j, i * m + j) = factors.mp(i, j);

    for (std::size_t e1 = 0; e1 < factors.edges1.size(); ++e1) {
        const auto [a, b] = factors.edges1[e1];
        for (std::size_t e2 = 0; e2 < factors.edges2.size(); ++e2) {
            const auto [c, d] = factors.edges2[e2];
            const double w = factors.me(static_cast<Eigen::Index>(e1), static_cast<Eigen::Index>(e2));
            big(a * m + c, b * m + d) += w;
            big(b * m + d, a * m + c) += w;
            big(a * m + d, b * m + c) += w;
            big(b * m + c, a * m + d) += w;
        }
    }
    return big;
}

// M * v without materializing M: O(nm + p*q) arithmetic.
inline Vec affinity_matvec(const AffinityFactors& factors, const Vec& v) {
    const Eigen::Index n = factors.n(), m = factors.m();
    if (v.size() != n * m)
        throw DimMismatch("vector length " + std::to_string(v.size()) + ", expected " +
                          std::to_string(n * m));

    // Reshape of the row-major vec: X(i, j) = v[i*m + j].
    Eigen::Map<const Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>> x(
        v.data(), n, m);
    Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor> y =
        factors.mp.cwiseProduct(x);

    for (std::size_t e1 = 0; e1 < factors.edges1.size(); ++e1) {
        const auto [a, b] = factors.edges1[e1];
        for (std::size_t e2 = 0; e2 < factors.edges2.size(); ++e2) {
            const auto [c, d] = factors.edges2[e2];
            const double w = factors.me(static_cast<Eigen::Index>(e1), static_cast<Eigen::Index>(e2));
            y(a, c) += w * x(b, d);
            y(a, d) += w * x(b, c);
            y(b, c) += w * x(a, d);
            y(b, d) += w * x(a, c);
        }
    }
    return Eigen::Map<const Vec>(y.data(), n * m);
}

}  // namespace egm
