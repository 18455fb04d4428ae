#pragma once

#include <Eigen/Dense>
#include <cmath>

#include "egm/geometry.hpp"
#include "egm/rng.hpp"

namespace egm::test {

inline Mat3 random_rotation(Rng& rng, double max_angle_rad = 0.5) {
    Vec3 axis(rng.normal(), rng.normal(), rng.normal());
    axis.normalize();
    const double angle = rng.uniform(-max_angle_rad, max_angle_rad);
    return Eigen::AngleAxisd(angle, axis).toRotationMatrix();
}

inline CameraView default_view() {
    CameraView v;
    v.intrinsics = {500.0, 500.0, 320.0, 240.0, 640, 480};
    return v;
}

// A mildly perturbed second view with a guaranteed nonzero baseline.
inline CameraView perturbed_view(Rng& rng) {
    CameraView v = default_view();
    const Mat3 cam_to_world = random_rotation(rng, 0.35);
    Vec3 center(rng.uniform(-1.0, 1.0), rng.uniform(-0.3, 0.3), rng.uniform(-1.0, 1.0));
    if (center.norm() < 1e-3)
        center = Vec3(0.5, 0.0, 0.0);
    v.pose.rotation = cam_to_world.transpose();
    v.pose.translation = -cam_to_world.transpose() * center;
    return v;
}

// World point visible in both views (positive depth, resampled as needed).
inline Vec3 visible_point(const CameraView& v1, const CameraView& v2, Rng& rng) {
    for (int attempt = 0; attempt < 1000; ++attempt) {
        Vec3 p(rng.uniform(-4.0, 4.0), rng.uniform(-3.0, 3.0), rng.uniform(4.0, 14.0));
        const Vec3 c1 = v1.pose.rotation * p + v1.pose.translation;
        const Vec3 c2 = v2.pose.rotation * p + v2.pose.translation;
        if (c1.z() > 0.5 && c2.z() > 0.5)
            return p;
    }
    return {0.0, 0.0, 8.0};
}

}  // namespace egm::test
