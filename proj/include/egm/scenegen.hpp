#pragma once

#include <Eigen/Dense>
#include <algorithm>
#include <cmath>
#include <cstdint>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "egm/detection.hpp"
#include "egm/error.hpp"
#include "egm/geometry.hpp"
#include "egm/rng.hpp"

namespace egm {

inline constexpr const char* kGeneratorVersion = "1.0.0";

struct SceneObject {
    int id = 0;
    int class_id = 0;
    Vec3 center = Vec3::Zero();   // meters, world frame (= camera-1 frame)
    Vec3 size = Vec3::Ones();     // box extent, meters
    Eigen::VectorXd latent;       // unit descriptor
};

// Camera viewpoint sampling ranges. Set 1 pins both views to the reference
// pose; sets 2-4 differ only in the yaw magnitude band.
struct ViewpointProtocol {
    int set_id = 1;
    double yaw_min_deg = 0.0, yaw_max_deg = 0.0;
    double translation_range_m = 0.0;
    double roll_pitch_range_deg = 0.0;

    static ViewpointProtocol set(int id) {
        switch (id) {
            case 1: return {1, 0.0, 0.0, 0.0, 0.0};
            case 2: return {2, 0.0, 10.0, 1.0, 5.0};
            case 3: return {3, 10.0, 20.0, 1.0, 5.0};
            case 4: return {4, 20.0, 30.0, 1.0, 5.0};
            default: throw ConfigError("protocol set must be 1..4, got " + std::to_string(id));
        }
    }
};

struct PosePair {
    Pose pose1, pose2;
    double yaw_deg = 0.0;   // signed relative yaw
    double pitch_deg = 0.0;
    double roll_deg = 0.0;
    Vec2 translation_m = Vec2::Zero();  // horizontal components (lateral, forward)
};

namespace scenegen_detail {

inline Mat3 rot_x(double rad) {
    Mat3 r;
    r << 1, 0, 0, 0, std::cos(rad), -std::sin(rad), 0, std::sin(rad), std::cos(rad);
    return r;
}

inline Mat3 rot_y(double rad) {
    Mat3 r;
    r << std::cos(rad), 0, std::sin(rad), 0, 1, 0, -std::sin(rad), 0, std::cos(rad);
    return r;
}

inline Mat3 rot_z(double rad) {
    Mat3 r;
    r << std::cos(rad), -std::sin(rad), 0, std::sin(rad), std::cos(rad), 0, 0, 0, 1;
    return r;
}

inline double deg2rad(double d) { return d * 0.017453292519943295; }

}  // namespace scenegen_detail

// Reference view is the identity pose; the second view perturbs yaw within
// the protocol band (random sign), roll/pitch within their range, and the
// camera center within the horizontal plane (x lateral, z forward; y is the
// vertical axis of the camera frame).
inline PosePair sample_pose_pair(const ViewpointProtocol& protocol, Rng& rng) {
    PosePair pair;
    if (protocol.set_id == 1)
        return pair;  // identical poses

    using namespace scenegen_detail;
    const double yaw_mag = rng.uniform(protocol.yaw_min_deg, protocol.yaw_max_deg);
    const double yaw = rng.uniform() < 0.5 ? -yaw_mag : yaw_mag;
    const double pitch = rng.uniform(-protocol.roll_pitch_range_deg, protocol.roll_pitch_range_deg);
    const double roll = rng.uniform(-protocol.roll_pitch_range_deg, protocol.roll_pitch_range_deg);
    const double tx = rng.uniform(-protocol.translation_range_m, protocol.translation_range_m);
    const double tz = rng.uniform(-protocol.translation_range_m, protocol.translation_range_m);

    const Mat3 cam_to_world = rot_z(deg2rad(roll)) * rot_x(deg2rad(pitch)) * rot_y(deg2rad(yaw));
    const Vec3 center(tx, 0.0, tz);
    pair.pose2.rotation = cam_to_world.transpose();
    pair.pose2.translation = -cam_to_world.transpose() * center;
    pair.yaw_deg = yaw;
    pair.pitch_deg = pitch;
    pair.roll_deg = roll;
    pair.translation_m = {tx, tz};
    return pair;
}

struct SceneConfig {
    int object_count = 18;
    int class_count = 4;
    int descriptor_dim = 16;
    double depth_min = 4.0, depth_max = 14.0;  // meters along the optical axis
    double depth_jitter = 0.10;    // per-object scatter around the scene depth ramp
    double image_margin = 0.12;    // frustum placement margin, fraction of image
    double size_min = 0.25, size_max = 0.9;    // object extent, meters
    double class_spread = 0.35;    // latent scatter around the class mean
    CameraIntrinsics intrinsics{500.0, 500.0, 320.0, 240.0, 640, 480};

    void validate() const {
        if (object_count < 1)
            throw ConfigError("object_count must be >= 1");
        if (!(depth_min > 1.0 && depth_max < 100.0 && depth_min < depth_max))
            throw ConfigError("depth range must satisfy 1 < min < max < 100");
        if (class_count < 1 || descriptor_dim < 2)
            throw ConfigError("need class_count >= 1 and descriptor_dim >= 2");
        if (image_margin < 0.0 || image_margin >= 0.5)
            throw ConfigError("image_margin must be in [0, 0.5)");
        intrinsics.validate();
    }
};

namespace scenegen_detail {

// Class means are a fixed function of (class_id, dim): random unit vectors
// from a dedicated stream, near-orthogonal for d >= 8.
inline Eigen::VectorXd class_mean(int class_id, int dim) {
    Rng rng(derive_seed(0x636c6173736d65ULL, static_cast<std::uint64_t>(class_id),
                        static_cast<std::uint64_t>(dim)));
    Eigen::VectorXd v(dim);
    for (int i = 0; i < dim; ++i)
        v(i) = rng.normal();
    return v.normalized();
}

inline Eigen::VectorXd sample_latent(int class_id, int dim, double spread, Rng& rng) {
    Eigen::VectorXd noise(dim);
    for (int i = 0; i < dim; ++i)
        noise(i) = rng.normal();
    return (class_mean(class_id, dim) + spread * noise).normalized();
}

}  // namespace scenegen_detail

// Places objects in the reference camera's frustum: an image location is
// drawn inside the margin box and back-projected to a depth from a smooth
// per-scene ramp (depth varies coherently across the image, as in a street
// scene receding to one side) plus per-object jitter. Nearby detections
// therefore sit at similar depths and move coherently between views.
inline std::vector<SceneObject> generate_scene(const SceneConfig& config, Rng& rng) {
    config.validate();
    const auto& k = config.intrinsics;

    const double ramp_angle = rng.uniform(0.0, 6.283185307179586);
    const Vec2 ramp_dir(std::cos(ramp_angle), std::sin(ramp_angle));
    const double ramp_gain = rng.uniform(0.5, 1.0);

    std::vector<SceneObject> objects;
    objects.reserve(config.object_count);
    for (int i = 0; i < config.object_count; ++i) {
        SceneObject obj;
        obj.id = i;
        obj.class_id = static_cast<int>(rng.uniform_index(config.class_count));
        const double u = rng.uniform(config.image_margin * k.width, (1.0 - config.image_margin) * k.width);
        const double v = rng.uniform(config.image_margin * k.height, (1.0 - config.image_margin) * k.height);
        const Vec2 rel(u / k.width - 0.5, v / k.height - 0.5);
        const double t = std::clamp(0.5 + ramp_gain * ramp_dir.dot(rel) +
                                        config.depth_jitter * rng.normal(),
                                    0.0, 1.0);
        const double z = config.depth_min + (config.depth_max - config.depth_min) * t;
        obj.center = {(u - k.cx) / k.fx * z, (v - k.cy) / k.fy * z, z};
        obj.size = {rng.uniform(config.size_min, config.size_max),
                    rng.uniform(config.size_min, config.size_max),
                    rng.uniform(config.size_min, config.size_max)};
        obj.latent = scenegen_detail::sample_latent(obj.class_id, config.descriptor_dim,
                                                    config.class_spread, rng);
        objects.push_back(std::move(obj));
    }
    return objects;
}

enum class ChangeType { Deleted, Replaced, Appeared };

struct ChangeEvent {
    int object_id = 0;
    ChangeType type = ChangeType::Deleted;
};

struct ChangeRecord {
    std::vector<ChangeEvent> events;

    bool changed(int object_id) const {
        for (const auto& e : events)
            if (e.object_id == object_id)
                return true;
        return false;
    }
};

struct ChangeConfig {
    double change_rate = 0.25;   // per-object P(deleted or replaced)
    double delete_share = 0.5;   // fraction of change_rate that deletes
    double appear_rate = 0.08;   // expected appear-only objects per existing object

    void validate() const {
        if (change_rate < 0 || change_rate > 1)
            throw ConfigError("change_rate must be in [0,1]");
        if (delete_share < 0 || delete_share > 1)
            throw ConfigError("delete_share must be in [0,1]");
        if (appear_rate < 0)
            throw ConfigError("appear_rate must be >= 0");
    }
};

// Second-epoch scene: each object is independently kept, deleted, or
// replaced in place (fresh class and latent, geometry unchanged); appearing
// objects are drawn like first-epoch ones with new ids.
inline std::pair<std::vector<SceneObject>, ChangeRecord> inject_changes(
    const std::vector<SceneObject>& objects, const SceneConfig& scene_config,
    const ChangeConfig& change_config, Rng& rng) {
    change_config.validate();
    const double p_delete = change_config.change_rate * change_config.delete_share;
    const double p_replace = change_config.change_rate - p_delete;

    std::vector<SceneObject> out;
    ChangeRecord record;
    int next_id = 0;
    for (const auto& obj : objects)
        next_id = std::max(next_id, obj.id + 1);

    for (const auto& obj : objects) {
        const double u = rng.uniform();
        if (u < p_delete) {
            record.events.push_back({obj.id, ChangeType::Deleted});
        } else if (u < p_delete + p_replace) {
            SceneObject repl = obj;
            repl.class_id = static_cast<int>(rng.uniform_index(scene_config.class_count));
            repl.latent = scenegen_detail::sample_latent(repl.class_id, scene_config.descriptor_dim,
                                                         scene_config.class_spread, rng);
            record.events.push_back({obj.id, ChangeType::Replaced});
            out.push_back(std::move(repl));
        } else {
            out.push_back(obj);
        }
    }

    for (std::size_t i = 0; i < objects.size(); ++i) {
        if (rng.uniform() >= change_config.appear_rate)
            continue;
        SceneConfig one = scene_config;
        one.object_count = 1;
        SceneObject fresh = generate_scene(one, rng)[0];
        fresh.id = next_id++;
        record.events.push_back({fresh.id, ChangeType::Appeared});
        out.push_back(std::move(fresh));
    }
    return {std::move(out), std::move(record)};
}

struct NoiseModel {
    double sigma_view = 0.6;   // descriptor noise per radian of relative yaw
    double sigma_det = 0.05;   // viewpoint-independent descriptor noise
    double dropout = 0.06;     // per-view detection dropout probability
    double spurious = 0.03;    // per-object spurious detection probability
};

struct ScenePair {
    CameraView view1, view2;
    std::optional<FundamentalMatrix> fundamental;  // absent for zero baseline
    std::vector<Detection> detections1, detections2;
    std::vector<std::pair<int, int>> gt_match;  // -1 encodes "no partner"
    std::vector<bool> gt_change;                // aligned with gt_match
    ViewpointProtocol protocol;
    std::uint64_t seed = 0;
};

namespace scenegen_detail {

// Detection box: centered on the projected 3D center (this keeps ground-truth
// pairs exactly on each other's epipolar lines), with extents from the hull
// of the eight projected corners.
inline std::optional<BBox> project_box(const CameraView& view, const SceneObject& obj) {
    Vec2 center;
    try {
        center = project_point(view, obj.center);
    } catch (const NonPositiveDepth&) {
        return std::nullopt;
    }
    const auto& k = view.intrinsics;
    if (!(center.x() >= 0 && center.x() < k.width && center.y() >= 0 && center.y() < k.height))
        return std::nullopt;

    double xmin = center.x(), xmax = center.x(), ymin = center.y(), ymax = center.y();
    for (int corner = 0; corner < 8; ++corner) {
        const Vec3 offset(((corner & 1) ? 0.5 : -0.5) * obj.size.x(),
                          ((corner & 2) ? 0.5 : -0.5) * obj.size.y(),
                          ((corner & 4) ? 0.5 : -0.5) * obj.size.z());
        try {
            const Vec2 p = project_point(view, obj.center + offset);
            xmin = std::min(xmin, p.x());
            xmax = std::max(xmax, p.x());
            ymin = std::min(ymin, p.y());
            ymax = std::max(ymax, p.y());
        } catch (const NonPositiveDepth&) {
            return std::nullopt;
        }
    }
    BBox box;
    box.cx = center.x();
    box.cy = center.y();
    box.w = std::min(std::max(xmax - xmin, 1.0), static_cast<double>(k.width));
    box.h = std::min(std::max(ymax - ymin, 1.0), static_cast<double>(k.height));
    return box;
}

inline Eigen::VectorXd observe_descriptor(const Eigen::VectorXd& latent, double sigma_total,
                                          Rng& rng) {
    if (sigma_total <= 0)
        return latent;
    Eigen::VectorXd noise(latent.size());
    for (Eigen::Index i = 0; i < latent.size(); ++i)
        noise(i) = rng.normal();
    return (latent + sigma_total * noise).normalized();
}

struct RenderedView {
    std::vector<Detection> detections;
    std::vector<std::pair<int, int>> object_to_detection;  // (object id, index)
};

inline RenderedView render_one_view(const std::vector<SceneObject>& scene, const CameraView& view,
                                    double sigma_descriptor, const NoiseModel& noise,
                                    int descriptor_dim, Rng& rng) {
    RenderedView out;
    for (const auto& obj : scene) {
        const auto box = project_box(view, obj);
        const Eigen::VectorXd desc = observe_descriptor(obj.latent, sigma_descriptor, rng);
        const bool dropped = rng.uniform() < noise.dropout;
        if (!box || dropped)
            continue;
        Detection det;
        det.node_id = static_cast<int>(out.detections.size());
        det.bbox = *box;
        det.descriptor = desc;
        det.source_object = obj.id;
        det.class_id = obj.class_id;
        out.object_to_detection.emplace_back(obj.id, det.node_id);
        out.detections.push_back(std::move(det));
    }
    // Spurious detections: random box and descriptor, no source object.
    const auto& k = view.intrinsics;
    for (std::size_t i = 0; i < scene.size(); ++i) {
        if (rng.uniform() >= noise.spurious)
            continue;
        Detection det;
        det.node_id = static_cast<int>(out.detections.size());
        det.bbox.cx = rng.uniform(0.05 * k.width, 0.95 * k.width);
        det.bbox.cy = rng.uniform(0.05 * k.height, 0.95 * k.height);
        det.bbox.w = rng.uniform(10.0, 0.2 * k.width);
        det.bbox.h = rng.uniform(10.0, 0.2 * k.height);
        Eigen::VectorXd d(descriptor_dim);
        for (Eigen::Index j = 0; j < d.size(); ++j)
            d(j) = rng.normal();
        det.descriptor = d.normalized();
        det.source_object = -1;
        det.class_id = -1;
        out.detections.push_back(std::move(det));
    }
    return out;
}

}  // namespace scenegen_detail

// Renders both epochs into detections with ground-truth matching and change
// labels. View-2 descriptors carry the viewpoint-dependent noise
// (sigma_view * |relative yaw|); both views carry sigma_det. Throws EmptyView
// when either view ends up with no detections so the caller can resample.
inline ScenePair render_views(const std::vector<SceneObject>& scene1,
                              const std::vector<SceneObject>& scene2,
                              const ChangeRecord& changes, const PosePair& poses,
                              const SceneConfig& config, const NoiseModel& noise, Rng& rng) {
    using namespace scenegen_detail;
    ScenePair pair;
    pair.view1 = {config.intrinsics, poses.pose1};
    pair.view2 = {config.intrinsics, poses.pose2};

    const double viewgap = std::abs(deg2rad(poses.yaw_deg));
    RenderedView r1 = render_one_view(scene1, pair.view1, noise.sigma_det, noise,
                                      config.descriptor_dim, rng);
    RenderedView r2 = render_one_view(scene2, pair.view2,
                                      noise.sigma_det + noise.sigma_view * viewgap, noise,
                                      config.descriptor_dim, rng);
    if (r1.detections.empty() || r2.detections.empty())
        throw EmptyView("a rendered view has no detections");

    const Vec3 c1 = pair.view1.pose.camera_center();
    const Vec3 c2 = pair.view2.pose.camera_center();
    if ((c2 - c1).norm() > 1e-9)
        pair.fundamental = fundamental_from_views(pair.view1, pair.view2);

    // Ground truth: pair detections that originate from the same object id.
    std::vector<std::pair<int, int>> idx1 = r1.object_to_detection;
    std::vector<std::pair<int, int>> idx2 = r2.object_to_detection;
    auto find2 = [&](int object_id) {
        for (const auto& [id, det] : idx2)
            if (id == object_id)
                return det;
        return -1;
    };
    std::vector<bool> used2(r2.detections.size(), false);
    for (const auto& [object_id, det1] : idx1) {
        const int det2 = find2(object_id);
        pair.gt_match.emplace_back(det1, det2);
        pair.gt_change.push_back(changes.changed(object_id));
        if (det2 >= 0)
            used2[det2] = true;
    }
    for (const auto& [object_id, det2] : idx2) {
        if (used2[det2])
            continue;
        pair.gt_match.emplace_back(-1, det2);
        pair.gt_change.push_back(changes.changed(object_id));
        used2[det2] = true;
    }
    // Spurious detections have no partner and count as changed.
    for (const auto& det : r1.detections)
        if (det.source_object < 0) {
            pair.gt_match.emplace_back(det.node_id, -1);
            pair.gt_change.push_back(true);
        }
    for (const auto& det : r2.detections)
        if (det.source_object < 0) {
            pair.gt_match.emplace_back(-1, det.node_id);
            pair.gt_change.push_back(true);
        }

    pair.detections1 = std::move(r1.detections);
    pair.detections2 = std::move(r2.detections);
    return pair;
}

// Greedy best-IoU association of detections to ground-truth boxes. Returns
// one entry per detection: the matched ground-truth index or -1.
inline std::vector<int> associate_detections(const std::vector<BBox>& detections,
                                             const std::vector<BBox>& gt_boxes,
                                             double iou_threshold) {
    if (!(iou_threshold > 0.0 && iou_threshold < 1.0))
        throw ConfigError("iou_threshold must be in (0,1)");

    struct Cand {
        double score;
        int det, gt;
    };
    std::vector<Cand> cands;
    for (int d = 0; d < static_cast<int>(detections.size()); ++d)
        for (int g = 0; g < static_cast<int>(gt_boxes.size()); ++g) {
            const double s = iou(detections[d], gt_boxes[g]);
            if (s >= iou_threshold)
                cands.push_back({s, d, g});
        }
    std::sort(cands.begin(), cands.end(), [](const Cand& a, const Cand& b) {
        if (a.score != b.score) return a.score > b.score;
        if (a.det != b.det) return a.det < b.det;
        return a.gt < b.gt;
    });

    std::vector<int> result(detections.size(), -1);
    std::vector<bool> gt_used(gt_boxes.size(), false);
    for (const auto& c : cands) {
        if (result[c.det] >= 0 || gt_used[c.gt])
            continue;
        result[c.det] = c.gt;
        gt_used[c.gt] = true;
    }
    return result;
}

struct GeneratorConfig {
    SceneConfig scene;
    NoiseModel noise;
    ChangeConfig change;
    int max_attempts = 20;
};

// One complete benchmark instance. The per-pair seed is a pure function of
// (master seed, set, index), so generation order and thread count do not
// matter.
inline ScenePair generate_pair(const GeneratorConfig& config, const ViewpointProtocol& protocol,
                               std::uint64_t master_seed, std::uint64_t pair_index) {
    const std::uint64_t pair_seed =
        derive_seed(master_seed, static_cast<std::uint64_t>(protocol.set_id), pair_index);
    for (int attempt = 0; attempt < config.max_attempts; ++attempt) {
        Rng rng(derive_seed(pair_seed, static_cast<std::uint64_t>(attempt)));
        auto scene1 = generate_scene(config.scene, rng);
        auto [scene2, record] = inject_changes(scene1, config.scene, config.change, rng);
        const PosePair poses = sample_pose_pair(protocol, rng);
        try {
            ScenePair pair = render_views(scene1, scene2, record, poses, config.scene,
                                          config.noise, rng);
            pair.protocol = protocol;
            pair.seed = pair_seed;
            return pair;
        } catch (const EmptyView&) {
            continue;
        }
    }
    throw ConfigError("could not render a nonempty scene pair in " +
                      std::to_string(config.max_attempts) + " attempts");
}

}  // namespace egm
