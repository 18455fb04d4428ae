#pragma once

#include <Eigen/Dense>
#include <algorithm>

namespace egm {

// Center-format bounding box in pixels.
struct BBox {
    double cx = 0, cy = 0, w = 0, h = 0;

    double x_min() const { return cx - 0.5 * w; }
    double x_max() const { return cx + 0.5 * w; }
    double y_min() const { return cy - 0.5 * h; }
    double y_max() const { return cy + 0.5 * h; }
    double area() const { return w * h; }
};

inline double iou(const BBox& a, const BBox& b) {
    const double ix = std::max(0.0, std::min(a.x_max(), b.x_max()) - std::max(a.x_min(), b.x_min()));
    const double iy = std::max(0.0, std::min(a.y_max(), b.y_max()) - std::max(a.y_min(), b.y_min()));
    const double inter = ix * iy;
    const double uni = a.area() + b.area() - inter;
    return uni > 0 ? inter / uni : 0.0;
}

struct Detection {
    int node_id = 0;
    BBox bbox;
    Eigen::VectorXd descriptor;
    int source_object = -1;  // -1 = spurious detection
    int class_id = 0;
};

}  // namespace egm
