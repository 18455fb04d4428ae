#pragma once

#include <cstdio>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

#include <json.hpp>

#include "egm/scenegen.hpp"

namespace egm {

namespace io_detail {

// All floating point in scene-pair files is written with 17 significant
// digits, enough to round-trip any double.
inline std::string fmt(double v) {
    char buf[64];
    std::snprintf(buf, sizeof(buf), "%.17g", v);
    return buf;
}

class JsonWriter {
public:
    void begin_object() { sep(); out_ << '{'; stack_.push_back(false); }
    void end_object() { out_ << '}'; stack_.pop_back(); }
    void begin_array() { sep(); out_ << '['; stack_.push_back(false); }
    void end_array() { out_ << ']'; stack_.pop_back(); }

    void key(const std::string& k) {
        sep();
        out_ << '"' << k << "\":";
        after_key_ = true;
    }
    void value(double v) { sep(); out_ << fmt(v); }
    void value(int v) { sep(); out_ << v; }
    void value(std::uint64_t v) { sep(); out_ << v; }
    void value(bool v) { sep(); out_ << (v ? "true" : "false"); }
    void value(const std::string& s) { sep(); out_ << '"' << s << '"'; }

    std::string str() const { return out_.str(); }

private:
    // Comma before any element except the first of its container; a value
    // directly after its key never takes one.
    void sep() {
        if (after_key_) {
            after_key_ = false;
            return;
        }
        if (!stack_.empty()) {
            if (stack_.back())
                out_ << ',';
            stack_.back() = true;
        }
    }

    std::ostringstream out_;
    std::vector<bool> stack_;
    bool after_key_ = false;
};

inline void write_pose(JsonWriter& w, const Pose& pose) {
    w.begin_object();
    w.key("rotation");
    w.begin_array();
    for (int r = 0; r < 3; ++r)
        for (int c = 0; c < 3; ++c)
            w.value(pose.rotation(r, c));
    w.end_array();
    w.key("translation");
    w.begin_array();
    for (int i = 0; i < 3; ++i)
        w.value(pose.translation(i));
    w.end_array();
    w.end_object();
}

inline void write_view(JsonWriter& w, const CameraView& view) {
    w.begin_object();
    w.key("intrinsics");
    w.begin_object();
    w.key("fx"); w.value(view.intrinsics.fx);
    w.key("fy"); w.value(view.intrinsics.fy);
    w.key("cx"); w.value(view.intrinsics.cx);
    w.key("cy"); w.value(view.intrinsics.cy);
    w.key("width"); w.value(view.intrinsics.width);
    w.key("height"); w.value(view.intrinsics.height);
    w.end_object();
    w.key("pose");
    write_pose(w, view.pose);
    w.end_object();
}

inline void write_detections(JsonWriter& w, const std::vector<Detection>& dets) {
    w.begin_array();
    for (const auto& d : dets) {
        w.begin_object();
        w.key("id"); w.value(d.node_id);
        w.key("bbox");
        w.begin_array();
        w.value(d.bbox.cx); w.value(d.bbox.cy); w.value(d.bbox.w); w.value(d.bbox.h);
        w.end_array();
        w.key("descriptor");
        w.begin_array();
        for (Eigen::Index i = 0; i < d.descriptor.size(); ++i)
            w.value(d.descriptor(i));
        w.end_array();
        w.key("class"); w.value(d.class_id);
        w.key("source"); w.value(d.source_object);
        w.end_object();
    }
    w.end_array();
}

}  // namespace io_detail

inline std::string scene_pair_to_json(const ScenePair& pair) {
    io_detail::JsonWriter w;
    w.begin_object();

    w.key("meta");
    w.begin_object();
    w.key("seed"); w.value(pair.seed);
    w.key("protocol");
    w.begin_object();
    w.key("set_id"); w.value(pair.protocol.set_id);
    w.key("yaw_min_deg"); w.value(pair.protocol.yaw_min_deg);
    w.key("yaw_max_deg"); w.value(pair.protocol.yaw_max_deg);
    w.key("translation_range_m"); w.value(pair.protocol.translation_range_m);
    w.key("roll_pitch_range_deg"); w.value(pair.protocol.roll_pitch_range_deg);
    w.end_object();
    w.key("generator_version"); w.value(std::string(kGeneratorVersion));
    w.end_object();

    w.key("views");
    w.begin_array();
    io_detail::write_view(w, pair.view1);
    io_detail::write_view(w, pair.view2);
    w.end_array();

    // A zero-baseline pair has no epipolar geometry; all-zero entries mark
    // the absent matrix.
    w.key("fundamental");
    w.begin_array();
    const Mat3 f = pair.fundamental ? pair.fundamental->f : Mat3::Zero();
    for (int r = 0; r < 3; ++r)
        for (int c = 0; c < 3; ++c)
            w.value(f(r, c));
    w.end_array();

    w.key("detections1");
    io_detail::write_detections(w, pair.detections1);
    w.key("detections2");
    io_detail::write_detections(w, pair.detections2);

    w.key("gt_match");
    w.begin_array();
    for (const auto& [i, j] : pair.gt_match) {
        w.begin_array();
        w.value(i);
        w.value(j);
        w.end_array();
    }
    w.end_array();

    w.key("gt_change");
    w.begin_array();
    for (bool c : pair.gt_change)
        w.value(c ? 1 : 0);
    w.end_array();

    w.end_object();
    return w.str() + "\n";
}

inline void save_scene_pair(const ScenePair& pair, const std::string& path) {
    std::ofstream out(path, std::ios::binary);
    if (!out)
        throw IoError("cannot open " + path + " for writing");
    out << scene_pair_to_json(pair);
    if (!out)
        throw IoError("write failed: " + path);
}

namespace io_detail {

inline Pose parse_pose(const nlohmann::json& j) {
    Pose p;
    const auto& r = j.at("rotation");
    const auto& t = j.at("translation");
    if (r.size() != 9 || t.size() != 3)
        throw IoError("pose arrays have wrong length");
    for (int a = 0; a < 3; ++a)
        for (int b = 0; b < 3; ++b)
            p.rotation(a, b) = r[a * 3 + b].get<double>();
    for (int a = 0; a < 3; ++a)
        p.translation(a) = t[a].get<double>();
    return p;
}

inline CameraView parse_view(const nlohmann::json& j) {
    CameraView v;
    const auto& k = j.at("intrinsics");
    v.intrinsics.fx = k.at("fx").get<double>();
    v.intrinsics.fy = k.at("fy").get<double>();
    v.intrinsics.cx = k.at("cx").get<double>();
    v.intrinsics.cy = k.at("cy").get<double>();
    v.intrinsics.width = k.at("width").get<int>();
    v.intrinsics.height = k.at("height").get<int>();
    v.pose = parse_pose(j.at("pose"));
    return v;
}

inline std::vector<Detection> parse_detections(const nlohmann::json& j) {
    std::vector<Detection> dets;
    dets.reserve(j.size());
    for (const auto& d : j) {
        Detection det;
        det.node_id = d.at("id").get<int>();
        const auto& b = d.at("bbox");
        if (b.size() != 4)
            throw IoError("bbox must have 4 entries");
        det.bbox = {b[0].get<double>(), b[1].get<double>(), b[2].get<double>(), b[3].get<double>()};
        const auto& desc = d.at("descriptor");
        det.descriptor.resize(static_cast<Eigen::Index>(desc.size()));
        for (std::size_t i = 0; i < desc.size(); ++i)
            det.descriptor(static_cast<Eigen::Index>(i)) = desc[i].get<double>();
        det.class_id = d.at("class").get<int>();
        det.source_object = d.value("source", -1);
        dets.push_back(std::move(det));
    }
    return dets;
}

}  // namespace io_detail

inline ScenePair scene_pair_from_json(const std::string& text, const std::string& origin = "<memory>") {
    nlohmann::json j;
    try {
        j = nlohmann::json::parse(text);
    } catch (const nlohmann::json::parse_error& e) {
        throw IoError(origin + ": " + e.what());
    }
    try {
        ScenePair pair;
        const auto& meta = j.at("meta");
        pair.seed = meta.at("seed").get<std::uint64_t>();
        const auto& proto = meta.at("protocol");
        pair.protocol.set_id = proto.at("set_id").get<int>();
        pair.protocol.yaw_min_deg = proto.at("yaw_min_deg").get<double>();
        pair.protocol.yaw_max_deg = proto.at("yaw_max_deg").get<double>();
        pair.protocol.translation_range_m = proto.at("translation_range_m").get<double>();
        pair.protocol.roll_pitch_range_deg = proto.at("roll_pitch_range_deg").get<double>();

        const auto& views = j.at("views");
        if (views.size() != 2)
            throw IoError("expected exactly two views");
        pair.view1 = io_detail::parse_view(views[0]);
        pair.view2 = io_detail::parse_view(views[1]);

        const auto& fj = j.at("fundamental");
        if (fj.size() != 9)
            throw IoError("fundamental must have 9 entries");
        Mat3 f;
        for (int r = 0; r < 3; ++r)
            for (int c = 0; c < 3; ++c)
                f(r, c) = fj[r * 3 + c].get<double>();
        if (f.norm() > 0)
            pair.fundamental = FundamentalMatrix{f};

        pair.detections1 = io_detail::parse_detections(j.at("detections1"));
        pair.detections2 = io_detail::parse_detections(j.at("detections2"));

        for (const auto& e : j.at("gt_match")) {
            if (e.size() != 2)
                throw IoError("gt_match entries must be [i, j]");
            pair.gt_match.emplace_back(e[0].get<int>(), e[1].get<int>());
        }
        for (const auto& c : j.at("gt_change"))
            pair.gt_change.push_back(c.get<int>() != 0);
        if (pair.gt_change.size() != pair.gt_match.size())
            throw IoError("gt_change and gt_match lengths differ");
        return pair;
    } catch (const nlohmann::json::exception& e) {
        throw IoError(origin + ": " + e.what());
    }
}

inline ScenePair load_scene_pair(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in)
        throw IoError("cannot open " + path);
    std::ostringstream ss;
    ss << in.rdbuf();
    return scene_pair_from_json(ss.str(), path);
}

}  // namespace egm
