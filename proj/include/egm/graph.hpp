#pragma once

#include <Eigen/Dense>
#include <algorithm>
#include <cmath>
#include <numeric>
#include <set>
#include <utility>
#include <vector>

#include "egm/detection.hpp"
#include "egm/error.hpp"

namespace egm {

using Edge = std::pair<int, int>;  // canonical order: first < second

enum class Topology { Delaunay, FullyConnected };

namespace delaunay_detail {

struct Tri {
    int a, b, c;  // CCW order
    bool alive = true;
};

inline double cross(const Eigen::Vector2d& o, const Eigen::Vector2d& p, const Eigen::Vector2d& q) {
    return (p.x() - o.x()) * (q.y() - o.y()) - (p.y() - o.y()) * (q.x() - o.x());
}

// Positive when p lies strictly inside the circumcircle of CCW triangle (a,b,c).
inline double incircle(const Eigen::Vector2d& a, const Eigen::Vector2d& b,
                       const Eigen::Vector2d& c, const Eigen::Vector2d& p) {
    const double ax = a.x() - p.x(), ay = a.y() - p.y();
    const double bx = b.x() - p.x(), by = b.y() - p.y();
    const double cx = c.x() - p.x(), cy = c.y() - p.y();
    return (ax * ax + ay * ay) * (bx * cy - cx * by) -
           (bx * bx + by * by) * (ax * cy - cx * ay) +
           (cx * cx + cy * cy) * (ax * by - bx * ay);
}

}  // namespace delaunay_detail

// Edges of the Delaunay triangulation via Bowyer-Watson insertion.
// Degenerate inputs fall back deterministically: n=1 gives no edges, n=2 a
// single edge, fully collinear points a path graph in lexicographic order.
// Points are inserted in lexicographic order so the result is invariant to
// the input ordering; cocircular ties resolve by that same order (strict
// incircle test).
inline std::vector<Edge> delaunay_edges(const std::vector<Eigen::Vector2d>& points) {
    using namespace delaunay_detail;
    const int n = static_cast<int>(points.size());
    if (n <= 1)
        return {};
    if (n == 2)
        return {{0, 1}};

    std::vector<int> order(n);
    std::iota(order.begin(), order.end(), 0);
    std::sort(order.begin(), order.end(), [&](int i, int j) {
        if (points[i].x() != points[j].x()) return points[i].x() < points[j].x();
        if (points[i].y() != points[j].y()) return points[i].y() < points[j].y();
        return i < j;
    });

    // Collinearity check against the extreme pair.
    {
        const Eigen::Vector2d& p0 = points[order.front()];
        const Eigen::Vector2d& p1 = points[order.back()];
        const double span = (p1 - p0).norm();
        bool collinear = true;
        for (int i : order) {
            if (std::abs(cross(p0, p1, points[i])) > 1e-9 * std::max(span * span, 1.0)) {
                collinear = false;
                break;
            }
        }
        if (collinear) {
            std::vector<Edge> path;
            for (int i = 0; i + 1 < n; ++i) {
                int a = order[i], b = order[i + 1];
                path.emplace_back(std::min(a, b), std::max(a, b));
            }
            std::sort(path.begin(), path.end());
            path.erase(std::unique(path.begin(), path.end()), path.end());
            return path;
        }
    }

    // Super-triangle enclosing ten times the point bounding box. Its corner
    // coordinates only fix three directions: the in-circumcircle predicate
    // treats them as points at infinity, so triangles touching the super
    // corners degenerate to half-planes instead of huge concrete circles
    // (a finite corner placement would suppress hull edges whose witness
    // circumcircles are larger than any fixed margin).
    double xmin = points[0].x(), xmax = xmin, ymin = points[0].y(), ymax = ymin;
    for (const auto& p : points) {
        xmin = std::min(xmin, p.x());
        xmax = std::max(xmax, p.x());
        ymin = std::min(ymin, p.y());
        ymax = std::max(ymax, p.y());
    }
    const double cx = 0.5 * (xmin + xmax), cy = 0.5 * (ymin + ymax);
    const double span = 10.0 * std::max({xmax - xmin, ymax - ymin, 1.0});

    std::vector<Eigen::Vector2d> pts(points);
    pts.emplace_back(cx - 2.0 * span, cy - span);
    pts.emplace_back(cx + 2.0 * span, cy - span);
    pts.emplace_back(cx, cy + 2.0 * span);

    auto is_super = [n](int idx) { return idx >= n; };

    // Strict containment of real point p in the circumcircle of triangle t,
    // with super corners handled symbolically.
    auto contains = [&](const Tri& t, const Eigen::Vector2d& p) {
        int supers = is_super(t.a) + is_super(t.b) + is_super(t.c);
        if (supers == 0)
            return incircle(pts[t.a], pts[t.b], pts[t.c], p) > 0;
        if (supers == 3)
            return true;
        if (supers == 1) {
            // One corner at infinity: the circle is the open half-plane on
            // that corner's side of the real edge.
            int s = t.a, u = t.b, v = t.c;
            if (is_super(t.b)) { s = t.b; u = t.c; v = t.a; }
            else if (is_super(t.c)) { s = t.c; u = t.a; v = t.b; }
            const double side_p = cross(pts[u], pts[v], p);
            const double side_s = cross(pts[u], pts[v], pts[s]);
            return side_s > 0 ? side_p > 0 : side_p < 0;
        }
        // Two corners at infinity: half-plane bounded by the line through the
        // real corner parallel to the direction between the two.
        int u = t.a, si = t.b, sj = t.c;
        if (!is_super(t.a) && is_super(t.b)) { u = t.a; si = t.b; sj = t.c; }
        else if (!is_super(t.b)) { u = t.b; si = t.c; sj = t.a; }
        else if (!is_super(t.c)) { u = t.c; si = t.a; sj = t.b; }
        const Eigen::Vector2d dir = pts[sj] - pts[si];
        const Eigen::Vector2d along = pts[u] + dir;
        const double side_p = cross(pts[u], along, p);
        const double side_s = cross(pts[u], along, pts[si]);
        return side_s > 0 ? side_p > 0 : side_p < 0;
    };

    std::vector<Tri> tris;
    tris.push_back({n, n + 1, n + 2});

    for (int idx : order) {
        const Eigen::Vector2d& p = pts[idx];

        // Cavity: triangles whose circumcircle strictly contains p.
        std::vector<int> bad;
        for (int t = 0; t < static_cast<int>(tris.size()); ++t) {
            if (!tris[t].alive)
                continue;
            if (contains(tris[t], p))
                bad.push_back(t);
        }

        // Boundary of the cavity = edges appearing in exactly one bad triangle.
        std::vector<std::pair<int, int>> boundary;
        for (int t : bad) {
            const Tri& tr = tris[t];
            const std::pair<int, int> es[3] = {{tr.a, tr.b}, {tr.b, tr.c}, {tr.c, tr.a}};
            for (const auto& e : es) {
                bool shared = false;
                for (int u : bad) {
                    if (u == t)
                        continue;
                    const Tri& tu = tris[u];
                    const std::pair<int, int> fs[3] = {{tu.a, tu.b}, {tu.b, tu.c}, {tu.c, tu.a}};
                    for (const auto& g : fs) {
                        if ((g.first == e.second && g.second == e.first) ||
                            (g.first == e.first && g.second == e.second)) {
                            shared = true;
                            break;
                        }
                    }
                    if (shared)
                        break;
                }
                if (!shared)
                    boundary.push_back(e);
            }
        }

        for (int t : bad)
            tris[t].alive = false;
        for (const auto& e : boundary) {
            Tri nt{e.first, e.second, idx};
            if (cross(pts[nt.a], pts[nt.b], pts[nt.c]) < 0)
                std::swap(nt.b, nt.c);
            tris.push_back(nt);
        }
    }

    std::set<Edge> edges;
    for (const Tri& t : tris) {
        if (!t.alive)
            continue;
        if (t.a >= n || t.b >= n || t.c >= n)
            continue;  // touches the super-triangle
        edges.insert({std::min(t.a, t.b), std::max(t.a, t.b)});
        edges.insert({std::min(t.b, t.c), std::max(t.b, t.c)});
        edges.insert({std::min(t.a, t.c), std::max(t.a, t.c)});
    }
    return {edges.begin(), edges.end()};
}

struct ObjectGraph {
    std::vector<Detection> nodes;
    std::vector<Edge> edges;  // canonical (low, high), sorted, unique
    Topology topology = Topology::Delaunay;
    int image_width = 0, image_height = 0;
    Eigen::MatrixXd incidence_tail;  // n x p, one 1 per column at the low endpoint
    Eigen::MatrixXd incidence_head;  // n x p, one 1 per column at the high endpoint
};

inline ObjectGraph build_object_graph(std::vector<Detection> detections, Topology topology,
                                      int image_width, int image_height) {
    if (detections.empty())
        throw ConfigError("cannot build a graph from zero detections");

    ObjectGraph g;
    g.topology = topology;
    g.image_width = image_width;
    g.image_height = image_height;

    const int n = static_cast<int>(detections.size());
    if (topology == Topology::Delaunay) {
        std::vector<Eigen::Vector2d> centers(n);
        for (int i = 0; i < n; ++i)
            centers[i] = {detections[i].bbox.cx, detections[i].bbox.cy};
        g.edges = delaunay_edges(centers);
    } else {
        g.edges.reserve(static_cast<std::size_t>(n) * (n - 1) / 2);
        for (int i = 0; i < n; ++i)
            for (int j = i + 1; j < n; ++j)
                g.edges.emplace_back(i, j);
    }
    g.nodes = std::move(detections);

    const int p = static_cast<int>(g.edges.size());
    g.incidence_tail = Eigen::MatrixXd::Zero(n, p);
    g.incidence_head = Eigen::MatrixXd::Zero(n, p);
    for (int e = 0; e < p; ++e) {
        g.incidence_tail(g.edges[e].first, e) = 1.0;
        g.incidence_head(g.edges[e].second, e) = 1.0;
    }
    return g;
}

struct NodeFeatures {
    Eigen::MatrixXd x;  // n x (d_f + 2): descriptor, then centroid in [0,1]^2
};

inline NodeFeatures node_features_from_detections(const std::vector<Detection>& detections,
                                                  int image_width, int image_height) {
    if (detections.empty())
        throw ConfigError("no detections");
    if (image_width <= 0 || image_height <= 0)
        throw ConfigError("image dimensions must be positive");

    const Eigen::Index n = static_cast<Eigen::Index>(detections.size());
    const Eigen::Index d = detections[0].descriptor.size();
    NodeFeatures f;
    f.x.resize(n, d + 2);
    for (Eigen::Index i = 0; i < n; ++i) {
        const Detection& det = detections[i];
        if (det.descriptor.size() != d)
            throw DimMismatch("descriptor dimensions differ across detections");
        f.x.row(i).head(d) = det.descriptor.transpose();
        f.x(i, d) = det.bbox.cx / image_width;
        f.x(i, d + 1) = det.bbox.cy / image_height;
    }
    return f;
}

inline NodeFeatures node_feature_matrix(const ObjectGraph& g) {
    return node_features_from_detections(g.nodes, g.image_width, g.image_height);
}

struct EdgeFeatures {
    Eigen::MatrixXd h;  // p x (2*d_f + 2)
};

// Row for canonical edge (a, b): [desc_a + desc_b ; |desc_a - desc_b| ;
// (cx_b - cx_a)/W ; (cy_b - cy_a)/H]. The first two blocks are symmetric
// under endpoint swap, the displacement block is taken low-to-high.
inline EdgeFeatures edge_feature_matrix(const ObjectGraph& g) {
    if (g.edges.empty())
        throw EmptyEdgeSet("graph has no edges");

    const Eigen::Index p = static_cast<Eigen::Index>(g.edges.size());
    const Eigen::Index d = g.nodes[0].descriptor.size();
    EdgeFeatures f;
    f.h.resize(p, 2 * d + 2);
    for (Eigen::Index e = 0; e < p; ++e) {
        const Detection& a = g.nodes[g.edges[e].first];
        const Detection& b = g.nodes[g.edges[e].second];
        f.h.row(e).head(d) = (a.descriptor + b.descriptor).transpose();
        f.h.row(e).segment(d, d) = (a.descriptor - b.descriptor).cwiseAbs().transpose();
        f.h(e, 2 * d) = (b.bbox.cx - a.bbox.cx) / g.image_width;
        f.h(e, 2 * d + 1) = (b.bbox.cy - a.bbox.cy) / g.image_height;
    }
    return f;
}

}  // namespace egm
