#pragma once

#include <Eigen/Dense>
#include <algorithm>
#include <cmath>
#include <limits>
#include <string>
#include <vector>

#include "egm/error.hpp"

namespace egm {

using Mat3 = Eigen::Matrix3d;
using Vec3 = Eigen::Vector3d;
using Vec2 = Eigen::Vector2d;

struct CameraIntrinsics {
    double fx = 0, fy = 0;
    double cx = 0, cy = 0;
    int width = 0, height = 0;

    void validate() const {
        if (fx <= 0 || fy <= 0)
            throw ConfigError("focal lengths must be positive");
        if (!(cx > 0 && cx < width) || !(cy > 0 && cy < height))
            throw ConfigError("principal point must lie inside the image");
    }

    Mat3 matrix() const {
        Mat3 k;
        k << fx, 0, cx, 0, fy, cy, 0, 0, 1;
        return k;
    }
};

// World-to-camera transform: x_cam = rotation * x_world + translation.
struct Pose {
    Mat3 rotation = Mat3::Identity();
    Vec3 translation = Vec3::Zero();

    void validate(double tol = 1e-9) const {
        if ((rotation.transpose() * rotation - Mat3::Identity()).cwiseAbs().maxCoeff() > tol)
            throw ConfigError("rotation is not orthonormal");
        if (std::abs(rotation.determinant() - 1.0) > tol)
            throw ConfigError("rotation determinant is not +1");
    }

    Vec3 camera_center() const { return -rotation.transpose() * translation; }
};

struct CameraView {
    CameraIntrinsics intrinsics;
    Pose pose;
};

// Projects a world point through the pinhole model. The point must have
// positive depth in the camera frame; the result may fall outside the image.
inline Vec2 project_point(const CameraView& view, const Vec3& point) {
    Vec3 pc = view.pose.rotation * point + view.pose.translation;
    if (pc.z() <= 1e-9)
        throw NonPositiveDepth("depth " + std::to_string(pc.z()));
    const auto& k = view.intrinsics;
    return {k.fx * pc.x() / pc.z() + k.cx, k.fy * pc.y() / pc.z() + k.cy};
}

// 3x3 rank-2 matrix with p1^T F p2 = 0 for corresponding pixels; the epipolar
// line in image 1 of a point in image 2 is l1 = F * homogeneous(p2).
// Canonical scale: unit Frobenius norm, largest-magnitude entry positive.
struct FundamentalMatrix {
    Mat3 f = Mat3::Zero();

    double rank2_residual() const {
        Eigen::JacobiSVD<Mat3> svd(f);
        return svd.singularValues()(2);
    }
};

inline Mat3 skew(const Vec3& t) {
    Mat3 s;
    s << 0, -t.z(), t.y(), t.z(), 0, -t.x(), -t.y(), t.x(), 0;
    return s;
}

// Composes F from two calibrated views. Throws DegenerateBaseline when the
// camera centers coincide (pure rotation carries no epipolar constraint).
inline FundamentalMatrix fundamental_from_views(const CameraView& view1, const CameraView& view2) {
    const Vec3 c1 = view1.pose.camera_center();
    const Vec3 c2 = view2.pose.camera_center();
    if ((c2 - c1).norm() <= 1e-9)
        throw DegenerateBaseline("camera centers coincide");

    // Relative transform from camera 2 to camera 1.
    const Mat3 r12 = view1.pose.rotation * view2.pose.rotation.transpose();
    const Vec3 t12 = view1.pose.translation - r12 * view2.pose.translation;

    const Mat3 e = skew(t12) * r12;
    Mat3 f = view1.intrinsics.matrix().inverse().transpose() * e * view2.intrinsics.matrix().inverse();
    f /= f.norm();

    // Fix the sign so serialization is bit-stable.
    int r = 0, c = 0;
    f.cwiseAbs().maxCoeff(&r, &c);
    if (f(r, c) < 0)
        f = -f;
    return FundamentalMatrix{f};
}

// Perpendicular offset from p_i (image 1) to the epipolar line of p_j
// (image 2). The returned vector points from p_i toward the line; its norm
// is the point-line distance in pixels.
inline Vec2 epipolar_offset_vector(const FundamentalMatrix& f, const Vec2& p_i, const Vec2& p_j) {
    const Vec3 line = f.f * Vec3(p_j.x(), p_j.y(), 1.0);
    const double n2 = std::hypot(line(0), line(1));
    if (n2 <= 1e-12)
        throw DegenerateLine("point maps to the epipole");
    const double signed_dist = line.dot(Vec3(p_i.x(), p_i.y(), 1.0));
    return Vec2(line(0), line(1)) * (-signed_dist / (n2 * n2));
}

// Offset scaled by the candidate box dimensions, so the tolerance grows with
// object size: D = sqrt((vx/w)^2 + (vy/h)^2).
inline double normalized_epipolar_distance(const Vec2& v, double w_j, double h_j) {
    if (w_j <= 0 || h_j <= 0)
        throw InvalidBBox("w=" + std::to_string(w_j) + " h=" + std::to_string(h_j));
    const double a = v.x() / w_j;
    const double b = v.y() / h_j;
    return std::sqrt(a * a + b * b);
}

struct SigmaMode {
    enum class Kind { Fixed, AdaptiveStd } kind = Kind::Fixed;
    double value = 2.0;

    static SigmaMode fixed(double sigma) { return {Kind::Fixed, sigma}; }
    static SigmaMode adaptive_std() { return {Kind::AdaptiveStd, 0.0}; }
};

// Which node's box dimensions normalize the offset vector.
enum class NormalizeBy { Second, First, GeometricMean };

struct EpipolarOptions {
    SigmaMode sigma = SigmaMode::fixed(2.0);
    NormalizeBy normalize_by = NormalizeBy::Second;
};

struct EpipolarPenalty {
    Eigen::MatrixXd d;      // n x m normalized epipolar distances
    Eigen::MatrixXd w;      // n x m Gaussian penalties in (0, 1]
    double sigma = 0.0;

    // No-constraint penalty (zero baseline or plain graph matching).
    static EpipolarPenalty none(Eigen::Index n, Eigen::Index m) {
        EpipolarPenalty p;
        p.d = Eigen::MatrixXd::Zero(n, m);
        p.w = Eigen::MatrixXd::Ones(n, m);
        p.sigma = 0.0;
        return p;
    }
};

// A node as the geometry module sees it: image centroid plus box dimensions.
struct NodeGeometry {
    Vec2 center;
    double w = 0, h = 0;
};

// Builds the distance and penalty matrices over all node pairs. Entries whose
// epipolar line degenerates (point at the epipole) are substituted with the
// maximum finite distance in the matrix so one pathological detection cannot
// abort a batch.
inline EpipolarPenalty epipolar_penalty_matrix(const FundamentalMatrix& f,
                                               const std::vector<NodeGeometry>& nodes1,
                                               const std::vector<NodeGeometry>& nodes2,
                                               const EpipolarOptions& opts = {}) {
    const Eigen::Index n = static_cast<Eigen::Index>(nodes1.size());
    const Eigen::Index m = static_cast<Eigen::Index>(nodes2.size());
    if (n < 1 || m < 1)
        throw DimMismatch("penalty matrix needs at least one node per view");

    EpipolarPenalty out;
    out.d.resize(n, m);
    std::vector<std::pair<Eigen::Index, Eigen::Index>> degenerate;
    double max_finite = 0.0;

    for (Eigen::Index i = 0; i < n; ++i) {
        for (Eigen::Index j = 0; j < m; ++j) {
            double wn = 0, hn = 0;
            switch (opts.normalize_by) {
                case NormalizeBy::Second: wn = nodes2[j].w; hn = nodes2[j].h; break;
                case NormalizeBy::First: wn = nodes1[i].w; hn = nodes1[i].h; break;
                case NormalizeBy::GeometricMean:
                    wn = std::sqrt(nodes1[i].w * nodes2[j].w);
                    hn = std::sqrt(nodes1[i].h * nodes2[j].h);
                    break;
            }
            try {
                const Vec2 v = epipolar_offset_vector(f, nodes1[i].center, nodes2[j].center);
                out.d(i, j) = normalized_epipolar_distance(v, wn, hn);
                max_finite = std::max(max_finite, out.d(i, j));
            } catch (const DegenerateLine&) {
                degenerate.emplace_back(i, j);
            }
        }
    }
    for (const auto& [i, j] : degenerate)
        out.d(i, j) = max_finite;

    double sigma = opts.sigma.value;
    if (opts.sigma.kind == SigmaMode::Kind::AdaptiveStd) {
        const double mean = out.d.mean();
        sigma = std::sqrt((out.d.array() - mean).square().mean());
    }
    sigma = std::max(sigma, 1e-9);
    out.sigma = sigma;

    // Clamp away underflow so entries stay strictly positive.
    out.w = (-out.d.array().square() / (2.0 * sigma * sigma))
                .exp()
                .max(std::numeric_limits<double>::min())
                .matrix();
    return out;
}

}  // namespace egm
