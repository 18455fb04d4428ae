#pragma once

#include <chrono>
#include <cstdio>
#include <optional>
#include <sstream>
#include <string>
#include <utility>
#include <vector>

#include <json.hpp>

#include "egm/error.hpp"
#include "egm/learn.hpp"
#include "egm/parallel.hpp"
#include "egm/scenegen.hpp"
#include "egm/solver.hpp"

namespace egm {

enum class Method { NN, ENN, GMN, EGMNetFC, EGMNetDT };

inline const char* method_name(Method m) {
    switch (m) {
        case Method::NN: return "NN";
        case Method::ENN: return "ENN";
        case Method::GMN: return "GMN";
        case Method::EGMNetFC: return "EGMNet-FC";
        case Method::EGMNetDT: return "EGMNet-DT";
    }
    return "?";
}

inline Method method_from_name(const std::string& name) {
    for (Method m : {Method::NN, Method::ENN, Method::GMN, Method::EGMNetFC, Method::EGMNetDT})
        if (name == method_name(m))
            return m;
    throw ConfigError("unknown method '" + name + "'");
}

namespace eval_detail {

// Partner arrays with full coverage validation: every node appears exactly
// once as a pair member or an unmatched entry.
struct Partners {
    std::vector<int> of1;  // size n, partner in graph 2 or -1
    std::vector<int> of2;  // size m, partner in graph 1 or -1
};

inline Partners partners(const Assignment& a) {
    int n = -1, m = -1;
    for (const auto& [i, j] : a.pairs) {
        n = std::max(n, i);
        m = std::max(m, j);
    }
    for (int i : a.unmatched1)
        n = std::max(n, i);
    for (int j : a.unmatched2)
        m = std::max(m, j);

    Partners p;
    p.of1.assign(static_cast<std::size_t>(n + 1), -2);
    p.of2.assign(static_cast<std::size_t>(m + 1), -2);
    auto place = [](std::vector<int>& v, int idx, int val) {
        if (idx < 0 || idx >= static_cast<int>(v.size()) || v[idx] != -2)
            throw CoverageMismatch("node " + std::to_string(idx) +
                                   " repeated or out of range in assignment");
        v[idx] = val;
    };
    for (const auto& [i, j] : a.pairs) {
        place(p.of1, i, j);
        place(p.of2, j, i);
    }
    for (int i : a.unmatched1)
        place(p.of1, i, -1);
    for (int j : a.unmatched2)
        place(p.of2, j, -1);
    for (int v : p.of1)
        if (v == -2)
            throw CoverageMismatch("assignment misses a graph-1 node");
    for (int v : p.of2)
        if (v == -2)
            throw CoverageMismatch("assignment misses a graph-2 node");
    return p;
}

}  // namespace eval_detail

enum class AccuracyMode {
    PerNode,   // every node of both graphs contributes one verdict
    PerEntry,  // every ground-truth entry (pair or phi) contributes one
};

struct VerdictCounts {
    long correct = 0;
    long total = 0;

    double ratio() const { return total > 0 ? static_cast<double>(correct) / total : 0.0; }
};

inline VerdictCounts matching_verdicts(const Assignment& pred, const Assignment& gt,
                                       AccuracyMode mode = AccuracyMode::PerNode) {
    const auto pp = eval_detail::partners(pred);
    const auto gp = eval_detail::partners(gt);
    if (pp.of1.size() != gp.of1.size() || pp.of2.size() != gp.of2.size())
        throw CoverageMismatch("prediction covers " + std::to_string(pp.of1.size()) + "+" +
                               std::to_string(pp.of2.size()) + " nodes, ground truth " +
                               std::to_string(gp.of1.size()) + "+" +
                               std::to_string(gp.of2.size()));

    VerdictCounts c;
    if (mode == AccuracyMode::PerNode) {
        for (std::size_t i = 0; i < pp.of1.size(); ++i)
            c.correct += pp.of1[i] == gp.of1[i];
        for (std::size_t j = 0; j < pp.of2.size(); ++j)
            c.correct += pp.of2[j] == gp.of2[j];
        c.total = static_cast<long>(pp.of1.size() + pp.of2.size());
    } else {
        for (const auto& [i, j] : gt.pairs) {
            c.correct += pp.of1[static_cast<std::size_t>(i)] == j;
            ++c.total;
        }
        for (int i : gt.unmatched1) {
            c.correct += pp.of1[static_cast<std::size_t>(i)] == -1;
            ++c.total;
        }
        for (int j : gt.unmatched2) {
            c.correct += pp.of2[static_cast<std::size_t>(j)] == -1;
            ++c.total;
        }
    }
    return c;
}

inline double matching_accuracy(const Assignment& pred, const Assignment& gt,
                                AccuracyMode mode = AccuracyMode::PerNode) {
    return matching_verdicts(pred, gt, mode).ratio();
}

struct ChangeMetrics {
    double precision = 0.0;
    double recall = 0.0;
    double f1 = 0.0;
    long tp = 0, fp = 0, fn = 0, tn = 0;
    bool no_positive_predictions = false;
};

inline ChangeMetrics change_metrics(const std::vector<bool>& pred, const std::vector<bool>& gt) {
    if (pred.size() != gt.size())
        throw LengthMismatch("predicted " + std::to_string(pred.size()) + " labels, ground truth " +
                             std::to_string(gt.size()));
    ChangeMetrics m;
    for (std::size_t i = 0; i < pred.size(); ++i) {
        if (pred[i] && gt[i]) ++m.tp;
        else if (pred[i] && !gt[i]) ++m.fp;
        else if (!pred[i] && gt[i]) ++m.fn;
        else ++m.tn;
    }
    m.no_positive_predictions = (m.tp + m.fp) == 0;
    m.precision = m.no_positive_predictions ? 0.0 : static_cast<double>(m.tp) / (m.tp + m.fp);
    m.recall = (m.tp + m.fn) == 0 ? 0.0 : static_cast<double>(m.tp) / (m.tp + m.fn);
    m.f1 = (m.precision + m.recall) > 0 ? 2.0 * m.precision * m.recall / (m.precision + m.recall)
                                        : 0.0;
    return m;
}

inline Assignment gt_assignment(const ScenePair& pair) {
    Assignment a;
    for (const auto& [i, j] : pair.gt_match) {
        if (i >= 0 && j >= 0) {
            a.pairs.emplace_back(i, j);
            a.confidence.push_back(1.0);
        } else if (i >= 0) {
            a.unmatched1.push_back(i);
        } else if (j >= 0) {
            a.unmatched2.push_back(j);
        }
    }
    return a;
}

struct BenchmarkConfig {
    std::vector<Method> methods{Method::NN, Method::ENN, Method::GMN, Method::EGMNetFC,
                                Method::EGMNetDT};
    std::vector<int> sets{1, 2, 3, 4};
    int pairs_per_set = 200;
    std::uint64_t seed = 0;
    GeneratorConfig generator;
    double gamma = 0.5;
    bool calibrate_gamma = true;
    int calibration_pairs = 32;
    double change_threshold = 0.05;
    EpipolarOptions epipolar;
    double solver_tol = 1e-10;
    int solver_max_iter = 1000;
    int jobs = 1;
    bool collect_timing = true;
    AccuracyMode accuracy_mode = AccuracyMode::PerNode;
    std::optional<TrainedModel> model;
    Topology gmn_topology = Topology::Delaunay;  // EGMNet variants pin their own

    void validate() const {
        if (methods.empty())
            throw ConfigError("method list is empty");
        if (sets.empty())
            throw ConfigError("set list is empty");
        for (int s : sets)
            if (s < 1 || s > 4)
                throw ConfigError("sets must be within 1..4");
        if (pairs_per_set < 1)
            throw ConfigError("pairs_per_set must be >= 1");
        if (jobs < 1)
            throw ConfigError("jobs must be >= 1");
    }
};

struct BenchRow {
    Method method;
    int set = 0;
    int pairs = 0;
    double accuracy = 0.0;
    double precision = 0.0;
    double recall = 0.0;
    double f1 = 0.0;
    double seconds = 0.0;
};

struct EvalReport {
    std::vector<BenchRow> rows;  // method-major, then set ascending
    std::vector<std::pair<Method, double>> gammas;  // per-method threshold used
    std::uint64_t seed = 0;
    std::string config_echo;  // flat key=value snapshot

    std::string to_csv() const {
        std::ostringstream out;
        out << "method,set,pairs,accuracy,precision,recall,f1,seconds\n";
        char buf[256];
        for (const auto& r : rows) {
            std::snprintf(buf, sizeof(buf), "%s,%d,%d,%.6f,%.6f,%.6f,%.6f,%.3f\n",
                          method_name(r.method), r.set, r.pairs, r.accuracy, r.precision, r.recall,
                          r.f1, r.seconds);
            out << buf;
        }
        return out.str();
    }

    std::string to_json() const {
        nlohmann::json j;
        j["seed"] = seed;
        j["config"] = config_echo;
        nlohmann::json gam = nlohmann::json::object();
        for (const auto& [m, g] : gammas)
            gam[method_name(m)] = g;
        j["gamma"] = gam;
        j["results"] = nlohmann::json::array();
        for (const auto& r : rows)
            j["results"].push_back({{"method", method_name(r.method)},
                                    {"set", r.set},
                                    {"pairs", r.pairs},
                                    {"accuracy", r.accuracy},
                                    {"precision", r.precision},
                                    {"recall", r.recall},
                                    {"f1", r.f1},
                                    {"seconds", r.seconds}});
        return j.dump(2) + "\n";
    }
};

namespace eval_detail {

// Everything derived once per scene pair and shared across methods.
struct PairContext {
    ScenePair pair;  // descriptors already projected when a model says so
    NodeFeatures x1, x2;
    EpipolarPenalty penalty;
    bool has_f = false;
    ObjectGraph g1_dt, g2_dt, g1_fc, g2_fc;
    Assignment gt;
};

inline std::vector<NodeGeometry> geometry_of(const std::vector<Detection>& dets) {
    std::vector<NodeGeometry> out(dets.size());
    for (std::size_t i = 0; i < dets.size(); ++i)
        out[i] = {{dets[i].bbox.cx, dets[i].bbox.cy}, dets[i].bbox.w, dets[i].bbox.h};
    return out;
}

inline PairContext make_context(ScenePair pair, const BenchmarkConfig& cfg, bool need_dt,
                                bool need_fc) {
    PairContext ctx;
    if (cfg.model && cfg.model->projection) {
        for (auto* dets : {&pair.detections1, &pair.detections2})
            for (auto& d : *dets) {
                Vec p = (*cfg.model->projection) * d.descriptor;
                const double n = p.norm();
                d.descriptor = n > 0 ? Vec(p / n) : p;
            }
    }
    ctx.pair = std::move(pair);

    const int w = ctx.pair.view1.intrinsics.width, h = ctx.pair.view1.intrinsics.height;
    ctx.x1 = node_features_from_detections(ctx.pair.detections1, w, h);
    ctx.x2 = node_features_from_detections(ctx.pair.detections2, w, h);
    ctx.has_f = ctx.pair.fundamental.has_value();
    ctx.penalty = ctx.has_f
                      ? epipolar_penalty_matrix(*ctx.pair.fundamental,
                                                geometry_of(ctx.pair.detections1),
                                                geometry_of(ctx.pair.detections2), cfg.epipolar)
                      : EpipolarPenalty::none(ctx.x1.x.rows(), ctx.x2.x.rows());
    if (need_dt) {
        ctx.g1_dt = build_object_graph(ctx.pair.detections1, Topology::Delaunay, w, h);
        ctx.g2_dt = build_object_graph(ctx.pair.detections2, Topology::Delaunay, w, h);
    }
    if (need_fc) {
        ctx.g1_fc = build_object_graph(ctx.pair.detections1, Topology::FullyConnected, w, h);
        ctx.g2_fc = build_object_graph(ctx.pair.detections2, Topology::FullyConnected, w, h);
    }
    ctx.gt = gt_assignment(ctx.pair);
    return ctx;
}

inline MatchingScores method_scores(const PairContext& ctx, Method method,
                                    const BenchmarkConfig& cfg) {
    const LambdaParam lam =
        cfg.model ? cfg.model->lam
                  : LambdaParam::scale_prior(ctx.pair.detections1[0].descriptor.size());
    GraphMatchOptions opts;
    opts.gamma = cfg.gamma;
    opts.epipolar = cfg.epipolar;
    opts.tol = cfg.solver_tol;
    opts.max_iter = cfg.solver_max_iter;

    const FundamentalMatrix* f =
        ctx.pair.fundamental ? &ctx.pair.fundamental.value() : nullptr;
    const bool gmn_dt = cfg.gmn_topology == Topology::Delaunay;
    switch (method) {
        case Method::NN:
            return nn_scores(ctx.x1, ctx.x2);
        case Method::ENN:
            return nn_scores(ctx.x1, ctx.x2, &ctx.penalty);
        case Method::GMN:
            return graph_match(gmn_dt ? ctx.g1_dt : ctx.g1_fc, gmn_dt ? ctx.g2_dt : ctx.g2_fc,
                               nullptr, lam, opts)
                .scores;
        case Method::EGMNetFC:
            return graph_match(ctx.g1_fc, ctx.g2_fc, f, lam, opts).scores;
        case Method::EGMNetDT:
            return graph_match(ctx.g1_dt, ctx.g2_dt, f, lam, opts).scores;
    }
    throw ConfigError("unhandled method");
}

// Change labels are evaluated per ground-truth entry: matched predictions
// compare descriptor distance against the threshold, unmatched objects are
// changed by definition.
inline void change_labels(const PairContext& ctx, const Assignment& pred,
                          double threshold, std::vector<bool>& pred_out,
                          std::vector<bool>& gt_out) {
    const auto pp = partners(pred);
    pred_out.clear();
    gt_out.clear();
    for (std::size_t e = 0; e < ctx.pair.gt_match.size(); ++e) {
        const auto [gi, gj] = ctx.pair.gt_match[e];
        bool predicted_change = true;
        if (gi >= 0) {
            const int j2 = pp.of1[static_cast<std::size_t>(gi)];
            if (j2 >= 0)
                predicted_change = classify_change(ctx.pair.detections1[gi].descriptor,
                                                   ctx.pair.detections2[j2].descriptor, threshold)
                                       .changed;
        } else if (gj >= 0) {
            const int i2 = pp.of2[static_cast<std::size_t>(gj)];
            if (i2 >= 0)
                predicted_change = classify_change(ctx.pair.detections1[i2].descriptor,
                                                   ctx.pair.detections2[gj].descriptor, threshold)
                                       .changed;
        }
        pred_out.push_back(predicted_change);
        gt_out.push_back(ctx.pair.gt_change[e]);
    }
}

struct MethodOutcome {
    VerdictCounts verdicts;
    long tp = 0, fp = 0, fn = 0, tn = 0;
    double seconds = 0.0;
};

struct PairOutcome {
    std::vector<MethodOutcome> per_method;
};

}  // namespace eval_detail

struct SinglePairRun {
    MatchingScores scores;
    Assignment assignment;
    double accuracy = 0.0;
    ChangeMetrics change;
    std::vector<ChangeVerdict> match_verdicts;  // aligned with assignment.pairs
};

// One method on one stored pair, scored against the pair's ground truth.
inline SinglePairRun evaluate_single_pair(const ScenePair& pair, Method method,
                                          const BenchmarkConfig& cfg) {
    using namespace eval_detail;
    const bool need_dt = method == Method::EGMNetDT ||
                         (method == Method::GMN && cfg.gmn_topology == Topology::Delaunay);
    const bool need_fc = method == Method::EGMNetFC ||
                         (method == Method::GMN && cfg.gmn_topology == Topology::FullyConnected);
    const PairContext ctx = make_context(pair, cfg, need_dt, need_fc);

    SinglePairRun run;
    run.scores = method_scores(ctx, method, cfg);
    run.assignment = infer_matching(run.scores, cfg.gamma);
    run.accuracy = matching_accuracy(run.assignment, ctx.gt, cfg.accuracy_mode);
    for (const auto& [i, j] : run.assignment.pairs)
        run.match_verdicts.push_back(classify_change(ctx.pair.detections1[i].descriptor,
                                                     ctx.pair.detections2[j].descriptor,
                                                     cfg.change_threshold));
    std::vector<bool> pred_labels, gt_labels;
    change_labels(ctx, run.assignment, cfg.change_threshold, pred_labels, gt_labels);
    run.change = change_metrics(pred_labels, gt_labels);
    return run;
}

// Runs every requested method on identical generated pairs and aggregates
// pooled verdict and confusion counts per (method, set). Bit-identical
// across reruns and worker counts for a fixed config and seed (timing
// excluded; zero it via collect_timing=false for byte-stable reports).
inline EvalReport run_benchmark(const BenchmarkConfig& cfg) {
    using namespace eval_detail;
    using clock = std::chrono::steady_clock;
    cfg.validate();

    bool need_dt = false, need_fc = false;
    for (Method m : cfg.methods) {
        need_dt |= (m == Method::GMN && cfg.gmn_topology == Topology::Delaunay) ||
                   m == Method::EGMNetDT;
        need_fc |= (m == Method::GMN && cfg.gmn_topology == Topology::FullyConnected) ||
                   m == Method::EGMNetFC;
    }

    // Per-method gamma: calibrated on a disjoint validation stream when
    // enabled, otherwise the configured value.
    std::vector<double> gamma_of(cfg.methods.size(), cfg.gamma);
    if (cfg.calibrate_gamma) {
        struct Sample {
            std::vector<MatchingScores> scores;
            Assignment gt;
        };
        const std::size_t per_set = static_cast<std::size_t>(cfg.calibration_pairs);
        const std::size_t total = per_set * cfg.sets.size();
        std::vector<Sample> samples(total);
        const std::uint64_t val_seed = derive_seed(cfg.seed, 0x76616c6964ULL);
        parallel_for(total, cfg.jobs, [&](std::size_t task) {
            const int set = cfg.sets[task / per_set];
            const std::uint64_t index = task % per_set;
            ScenePair pair;
            try {
                pair = generate_pair(cfg.generator, ViewpointProtocol::set(set), val_seed, index);
            } catch (const Error& e) {
                throw ConfigError("calibration pair " + std::to_string(index) + " of set " +
                                  std::to_string(set) + ": " + e.what());
            }
            PairContext ctx = make_context(std::move(pair), cfg, need_dt, need_fc);
            Sample s;
            s.scores.reserve(cfg.methods.size());
            for (Method m : cfg.methods)
                s.scores.push_back(method_scores(ctx, m, cfg));
            s.gt = ctx.gt;
            samples[task] = std::move(s);
        });

        for (std::size_t mi = 0; mi < cfg.methods.size(); ++mi) {
            double best_gamma = cfg.gamma;
            double best_acc = -1.0;
            for (int k = 1; k <= 70; ++k) {
                const double gamma = 0.01 * k;
                VerdictCounts pooled;
                for (const auto& s : samples) {
                    const VerdictCounts v = matching_verdicts(
                        infer_matching(s.scores[mi], gamma), s.gt, cfg.accuracy_mode);
                    pooled.correct += v.correct;
                    pooled.total += v.total;
                }
                if (pooled.ratio() > best_acc) {
                    best_acc = pooled.ratio();
                    best_gamma = gamma;
                }
            }
            gamma_of[mi] = best_gamma;
        }
    }

    const std::size_t per_set = static_cast<std::size_t>(cfg.pairs_per_set);
    const std::size_t total = per_set * cfg.sets.size();
    std::vector<PairOutcome> outcomes(total);
    parallel_for(total, cfg.jobs, [&](std::size_t task) {
        const int set = cfg.sets[task / per_set];
        const std::uint64_t index = task % per_set;
        ScenePair pair;
        try {
            pair = generate_pair(cfg.generator, ViewpointProtocol::set(set), cfg.seed, index);
        } catch (const Error& e) {
            throw ConfigError("pair " + std::to_string(index) + " of set " + std::to_string(set) +
                              ": " + e.what());
        }
        PairContext ctx;
        try {
            ctx = make_context(std::move(pair), cfg, need_dt, need_fc);
        } catch (const Error& e) {
            throw Error("pair " + std::to_string(index) + " of set " + std::to_string(set) + ": " +
                        e.what());
        }

        PairOutcome out;
        out.per_method.resize(cfg.methods.size());
        std::vector<bool> pred_labels, gt_labels;
        for (std::size_t mi = 0; mi < cfg.methods.size(); ++mi) {
            const auto t0 = clock::now();
            MatchingScores scores;
            try {
                scores = method_scores(ctx, cfg.methods[mi], cfg);
            } catch (const Error& e) {
                throw Error(std::string(method_name(cfg.methods[mi])) + " on pair " +
                            std::to_string(index) + " of set " + std::to_string(set) + ": " +
                            e.what());
            }
            const Assignment pred = infer_matching(scores, gamma_of[mi]);
            MethodOutcome& mo = out.per_method[mi];
            mo.verdicts = matching_verdicts(pred, ctx.gt, cfg.accuracy_mode);
            change_labels(ctx, pred, cfg.change_threshold, pred_labels, gt_labels);
            for (std::size_t e = 0; e < pred_labels.size(); ++e) {
                if (pred_labels[e] && gt_labels[e]) ++mo.tp;
                else if (pred_labels[e] && !gt_labels[e]) ++mo.fp;
                else if (!pred_labels[e] && gt_labels[e]) ++mo.fn;
                else ++mo.tn;
            }
            if (cfg.collect_timing)
                mo.seconds = std::chrono::duration<double>(clock::now() - t0).count();
        }
        outcomes[task] = std::move(out);
    });

    EvalReport report;
    report.seed = cfg.seed;
    for (std::size_t mi = 0; mi < cfg.methods.size(); ++mi) {
        report.gammas.emplace_back(cfg.methods[mi], gamma_of[mi]);
        for (std::size_t si = 0; si < cfg.sets.size(); ++si) {
            BenchRow row;
            row.method = cfg.methods[mi];
            row.set = cfg.sets[si];
            row.pairs = cfg.pairs_per_set;
            VerdictCounts verdicts;
            long tp = 0, fp = 0, fn = 0, tn = 0;
            double seconds = 0.0;
            for (std::size_t k = 0; k < per_set; ++k) {
                const MethodOutcome& mo = outcomes[si * per_set + k].per_method[mi];
                verdicts.correct += mo.verdicts.correct;
                verdicts.total += mo.verdicts.total;
                tp += mo.tp;
                fp += mo.fp;
                fn += mo.fn;
                tn += mo.tn;
                seconds += mo.seconds;
            }
            row.accuracy = verdicts.ratio();
            row.precision = (tp + fp) > 0 ? static_cast<double>(tp) / (tp + fp) : 0.0;
            row.recall = (tp + fn) > 0 ? static_cast<double>(tp) / (tp + fn) : 0.0;
            row.f1 = (row.precision + row.recall) > 0
                         ? 2.0 * row.precision * row.recall / (row.precision + row.recall)
                         : 0.0;
            row.seconds = seconds;
            report.rows.push_back(row);
        }
    }
    return report;
}

}  // namespace egm
