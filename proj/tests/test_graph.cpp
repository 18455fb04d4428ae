#include <gtest/gtest.h>

#include <algorithm>
#include <set>

#include "egm/graph.hpp"
#include "egm/rng.hpp"

using namespace egm;

namespace {

// Brute-force Delaunay characterization: an edge (a, b) belongs to the
// triangulation iff some circumcircle through a, b, and a witness point
// contains no other point strictly inside. Independent of the incremental
// construction.
std::set<Edge> delaunay_oracle(const std::vector<Eigen::Vector2d>& pts) {
    const int n = static_cast<int>(pts.size());
    std::set<Edge> edges;
    auto strictly_inside = [&](const Eigen::Vector2d& center, double r2, int skip_a, int skip_b,
                               int skip_c) {
        for (int k = 0; k < n; ++k) {
            if (k == skip_a || k == skip_b || k == skip_c)
                continue;
            if ((pts[k] - center).squaredNorm() < r2 - 1e-12 * std::max(r2, 1.0))
                return true;
        }
        return false;
    };
    for (int a = 0; a < n; ++a) {
        for (int b = a + 1; b < n; ++b) {
            bool is_delaunay = false;
            for (int c = 0; c < n && !is_delaunay; ++c) {
                if (c == a || c == b)
                    continue;
                // Circumcenter of (a, b, c).
                const Eigen::Vector2d& p = pts[a];
                const Eigen::Vector2d& q = pts[b];
                const Eigen::Vector2d& r = pts[c];
                const double d = 2.0 * (p.x() * (q.y() - r.y()) + q.x() * (r.y() - p.y()) +
                                        r.x() * (p.y() - q.y()));
                if (std::abs(d) < 1e-12)
                    continue;
                const double ux = (p.squaredNorm() * (q.y() - r.y()) +
                                   q.squaredNorm() * (r.y() - p.y()) +
                                   r.squaredNorm() * (p.y() - q.y())) /
                                  d;
                const double uy = (p.squaredNorm() * (r.x() - q.x()) +
                                   q.squaredNorm() * (p.x() - r.x()) +
                                   r.squaredNorm() * (q.x() - p.x())) /
                                  d;
                const Eigen::Vector2d center(ux, uy);
                const double r2 = (pts[a] - center).squaredNorm();
                if (!strictly_inside(center, r2, a, b, c))
                    is_delaunay = true;
            }
            if (is_delaunay)
                edges.insert({a, b});
        }
    }
    return edges;
}

std::vector<Detection> make_detections(const std::vector<Eigen::Vector2d>& centers, int d_f = 4) {
    std::vector<Detection> dets;
    Rng rng(5);
    for (std::size_t i = 0; i < centers.size(); ++i) {
        Detection d;
        d.node_id = static_cast<int>(i);
        d.bbox = {centers[i].x(), centers[i].y(), 20.0, 15.0};
        Eigen::VectorXd desc(d_f);
        for (int k = 0; k < d_f; ++k)
            desc(k) = rng.normal();
        d.descriptor = desc.normalized();
        dets.push_back(std::move(d));
    }
    return dets;
}

}  // namespace

TEST(Delaunay, TinyInputs) {
    EXPECT_TRUE(delaunay_edges({}).empty());
    EXPECT_TRUE(delaunay_edges({{1.0, 2.0}}).empty());
    const auto two = delaunay_edges({{1.0, 2.0}, {3.0, 4.0}});
    ASSERT_EQ(two.size(), 1u);
    EXPECT_EQ(two[0], Edge(0, 1));
}

TEST(Delaunay, SingleTriangle) {
    const auto edges = delaunay_edges({{0.0, 0.0}, {10.0, 0.0}, {5.0, 8.0}});
    EXPECT_EQ(edges.size(), 3u);
}

TEST(Delaunay, ConvexQuadrilateral) {
    const auto edges = delaunay_edges({{0.0, 0.0}, {10.0, 0.0}, {10.0, 7.0}, {0.0, 7.0}});
    EXPECT_EQ(edges.size(), 5u);  // four sides plus one diagonal
}

TEST(Delaunay, CollinearPointsFormPath) {
    const auto edges = delaunay_edges({{6.0, 6.0}, {0.0, 0.0}, {2.0, 2.0}, {4.0, 4.0}});
    std::set<Edge> got(edges.begin(), edges.end());
    // Sorted by x: indices 1, 2, 3, 0 -> path 1-2, 2-3, 3-0.
    EXPECT_EQ(got, (std::set<Edge>{{1, 2}, {2, 3}, {0, 3}}));
}

TEST(Delaunay, MatchesBruteForceOracle) {
    Rng rng(123);
    for (int trial = 0; trial < 12; ++trial) {
        const int n = 10 + static_cast<int>(rng.uniform_index(41));
        std::vector<Eigen::Vector2d> pts;
        pts.reserve(n);
        for (int i = 0; i < n; ++i)
            pts.push_back({rng.uniform(0.0, 640.0), rng.uniform(0.0, 480.0)});
        const auto got = delaunay_edges(pts);
        const std::set<Edge> got_set(got.begin(), got.end());
        EXPECT_EQ(got_set, delaunay_oracle(pts)) << "trial " << trial << " n=" << n;
    }
}

TEST(Delaunay, InvariantToInputOrder) {
    Rng rng(99);
    std::vector<Eigen::Vector2d> pts;
    for (int i = 0; i < 30; ++i)
        pts.push_back({rng.uniform(0.0, 640.0), rng.uniform(0.0, 480.0)});
    const auto base = delaunay_edges(pts);

    // Reverse the points and map edges back through the permutation.
    std::vector<Eigen::Vector2d> reversed(pts.rbegin(), pts.rend());
    const int n = static_cast<int>(pts.size());
    std::set<Edge> remapped;
    for (const auto& [a, b] : delaunay_edges(reversed)) {
        const int ra = n - 1 - a, rb = n - 1 - b;
        remapped.insert({std::min(ra, rb), std::max(ra, rb)});
    }
    EXPECT_EQ(remapped, std::set<Edge>(base.begin(), base.end()));
}

TEST(ObjectGraph, FullyConnectedEdgeCount) {
    const auto dets = make_detections({{10, 10}, {100, 40}, {200, 200}, {300, 100}});
    const ObjectGraph g = build_object_graph(dets, Topology::FullyConnected, 640, 480);
    EXPECT_EQ(g.edges.size(), 6u);
}

TEST(ObjectGraph, SingleNodeHasNoEdges) {
    const auto dets = make_detections({{10, 10}});
    EXPECT_TRUE(build_object_graph(dets, Topology::Delaunay, 640, 480).edges.empty());
    EXPECT_TRUE(build_object_graph(dets, Topology::FullyConnected, 640, 480).edges.empty());
}

TEST(ObjectGraph, IncidenceStructure) {
    Rng rng(3);
    std::vector<Eigen::Vector2d> centers;
    for (int i = 0; i < 30; ++i)
        centers.push_back({rng.uniform(10.0, 630.0), rng.uniform(10.0, 470.0)});
    const ObjectGraph g = build_object_graph(make_detections(centers), Topology::Delaunay, 640, 480);

    ASSERT_FALSE(g.edges.empty());
    EXPECT_LE(g.edges.size(), 3u * 30 - 6);
    const Eigen::MatrixXd total = g.incidence_tail + g.incidence_head;
    for (Eigen::Index e = 0; e < total.cols(); ++e) {
        EXPECT_DOUBLE_EQ(total.col(e).sum(), 2.0);
        EXPECT_DOUBLE_EQ(g.incidence_tail.col(e).sum(), 1.0);
        EXPECT_DOUBLE_EQ(g.incidence_head.col(e).sum(), 1.0);
    }
    // No duplicates, no self-loops, canonical order.
    std::set<Edge> unique_edges(g.edges.begin(), g.edges.end());
    EXPECT_EQ(unique_edges.size(), g.edges.size());
    for (const auto& [a, b] : g.edges)
        EXPECT_LT(a, b);
}

TEST(NodeFeatures, CenterAndDescriptorLayout) {
    auto dets = make_detections({{320, 240}, {64, 48}});
    const ObjectGraph g = build_object_graph(dets, Topology::FullyConnected, 640, 480);
    const NodeFeatures f = node_feature_matrix(g);
    ASSERT_EQ(f.x.rows(), 2);
    ASSERT_EQ(f.x.cols(), 4 + 2);
    EXPECT_DOUBLE_EQ(f.x(0, 4), 0.5);
    EXPECT_DOUBLE_EQ(f.x(0, 5), 0.5);
    EXPECT_DOUBLE_EQ(f.x(1, 4), 0.1);
    EXPECT_DOUBLE_EQ(f.x(1, 5), 0.1);
    for (int i = 0; i < 2; ++i)
        EXPECT_NEAR((f.x.row(i).head(4).transpose() - dets[i].descriptor).norm(), 0.0, 1e-15);
}

TEST(EdgeFeatures, IdenticalEndpointsGiveZeroBlocks) {
    std::vector<Detection> dets = make_detections({{100, 100}, {100, 100}});
    dets[1].descriptor = dets[0].descriptor;
    const ObjectGraph g = build_object_graph(dets, Topology::FullyConnected, 640, 480);
    const EdgeFeatures f = edge_feature_matrix(g);
    ASSERT_EQ(f.h.rows(), 1);
    ASSERT_EQ(f.h.cols(), 2 * 4 + 2);
    EXPECT_NEAR(f.h.row(0).segment(4, 4).norm(), 0.0, 1e-15);  // |difference| block
    EXPECT_DOUBLE_EQ(f.h(0, 8), 0.0);
    EXPECT_DOUBLE_EQ(f.h(0, 9), 0.0);
}

TEST(EdgeFeatures, CanonicalOrderIndependentOfDetectionSwap) {
    auto dets = make_detections({{100, 100}, {400, 300}});
    const ObjectGraph g = build_object_graph(dets, Topology::FullyConnected, 640, 480);
    const EdgeFeatures f = edge_feature_matrix(g);

    // Swapping the two detections relabels the canonical edge to the same
    // low-to-high representative.
    std::swap(dets[0], dets[1]);
    dets[0].node_id = 0;
    dets[1].node_id = 1;
    const ObjectGraph swapped = build_object_graph(dets, Topology::FullyConnected, 640, 480);
    const EdgeFeatures f2 = edge_feature_matrix(swapped);
    EXPECT_NEAR((f.h.row(0).head(8) - f2.h.row(0).head(8)).norm(), 0.0, 1e-15);
    EXPECT_DOUBLE_EQ(f.h(0, 8), -f2.h(0, 8));
    EXPECT_DOUBLE_EQ(f.h(0, 9), -f2.h(0, 9));
}

TEST(EdgeFeatures, ThrowsOnEdgeFreeGraph) {
    const auto dets = make_detections({{10, 10}});
    const ObjectGraph g = build_object_graph(dets, Topology::Delaunay, 640, 480);
    EXPECT_THROW(edge_feature_matrix(g), EmptyEdgeSet);
}

TEST(ObjectGraph, RowCountMatchesEdgeCount) {
    Rng rng(8);
    std::vector<Eigen::Vector2d> centers;
    for (int i = 0; i < 17; ++i)
        centers.push_back({rng.uniform(10.0, 630.0), rng.uniform(10.0, 470.0)});
    const ObjectGraph g = build_object_graph(make_detections(centers), Topology::Delaunay, 640, 480);
    const EdgeFeatures f = edge_feature_matrix(g);
    EXPECT_EQ(static_cast<std::size_t>(f.h.rows()), g.edges.size());
}
