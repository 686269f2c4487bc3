#include "surgseg/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <ostream>

#include "surgseg/errors.hpp"

namespace surgseg {

ConfusionCounts confusion_counts(const BinaryMask& pred, const BinaryMask& gt) {
    if (pred.width() != gt.width() || pred.height() != gt.height()) {
        throw InvalidArgument("confusion_counts: dimension mismatch (" +
                              std::to_string(pred.width()) + "x" + std::to_string(pred.height()) +
                              " vs " + std::to_string(gt.width()) + "x" +
                              std::to_string(gt.height()) + ")");
    }
    ConfusionCounts counts;
    const auto& p = pred.bitmap();
    const auto& g = gt.bitmap();
    for (std::size_t i = 0; i < p.size(); ++i) {
        counts.tp += p[i] & g[i];
        counts.fp += p[i] & static_cast<std::uint8_t>(1 - g[i]);
        counts.fn += g[i] & static_cast<std::uint8_t>(1 - p[i]);
    }
    return counts;
}

double iou(const ConfusionCounts& c) {
    const std::uint64_t denom = c.tp + c.fp + c.fn;
    if (denom == 0) return 1.0;  // empty vs empty: correct absence
    return static_cast<double>(c.tp) / static_cast<double>(denom);
}

double dice(const ConfusionCounts& c) {
    const std::uint64_t denom = 2 * c.tp + c.fp + c.fn;
    if (denom == 0) return 1.0;
    return 2.0 * static_cast<double>(c.tp) / static_cast<double>(denom);
}

double overlap_phi(const ConfusionCounts& c) { return iou(c); }

double mae(const BinaryMask& pred, const BinaryMask& gt) {
    const auto counts = confusion_counts(pred, gt);
    const std::uint64_t n = pred.pixel_count();
    if (n == 0) return 0.0;
    return static_cast<double>(counts.fp + counts.fn) / static_cast<double>(n);
}

namespace {

struct FramePair {
    const std::map<ObjectId, BinaryMask>* predicted;
    const std::vector<InstanceAnnotation>* ground_truth;
    int width;
    int height;
};

/// Class-level semantic masks: union of the instances of the class.
BinaryMask class_mask_gt(const FramePair& frame, ClassId cls) {
    BinaryMask out(frame.width, frame.height);
    for (const auto& ann : *frame.ground_truth) {
        if (ann.class_id == cls) out = out.unite(ann.mask);
    }
    return out;
}

BinaryMask class_mask_pred(const FramePair& frame, ClassId cls,
                           const std::map<ObjectId, ClassId>& object_classes) {
    BinaryMask out(frame.width, frame.height);
    for (const auto& [object, mask] : *frame.predicted) {
        const auto it = object_classes.find(object);
        if (it != object_classes.end() && it->second == cls) out = out.unite(mask);
    }
    return out;
}

struct VideoRun {
    const SegmentationResult* result;
    const AnnotatedVideo* gt;
};

MetricsReport aggregate_runs(std::span<const VideoRun> runs, AggregationOrder order) {
    struct PerFrameAccum {
        double iou_sum = 0, dice_sum = 0, mae_sum = 0;
        std::uint64_t frames = 0;
        std::uint64_t gt_pixels = 0;
    };
    std::map<ClassId, ConfusionCounts> class_counts;
    std::map<ClassId, std::uint64_t> class_gt_pixels;
    std::map<ClassId, PerFrameAccum> per_frame;
    std::map<ClassId, std::uint64_t> class_pixels_n;  // N per class for count-order mae
    ConfusionCounts total;
    std::uint64_t common_frames = 0;
    bool pseudo = false;

    for (const auto& run : runs) {
        pseudo = pseudo || run.gt->pseudo_ground_truth || run.result->provenance.pseudo_ground_truth;
        const auto object_classes = run.gt->object_classes();
        const auto [w, h] = run.gt->frame_size();
        std::set<ClassId> classes;
        for (const auto& [obj, cls] : object_classes) classes.insert(cls);

        for (const auto& [frame_index, anns] : run.gt->annotations) {
            if (anns.empty()) continue;
            const auto pred_it = run.result->masks.find(frame_index);
            if (pred_it == run.result->masks.end()) continue;
            ++common_frames;
            FramePair frame{&pred_it->second, &anns, w, h};
            for (ClassId cls : classes) {
                const BinaryMask gt_mask = class_mask_gt(frame, cls);
                const BinaryMask pred_mask = class_mask_pred(frame, cls, object_classes);
                const auto counts = confusion_counts(pred_mask, gt_mask);
                const std::uint64_t gt_px = gt_mask.foreground_count();
                class_counts[cls] += counts;
                class_gt_pixels[cls] += gt_px;
                class_pixels_n[cls] += gt_mask.pixel_count();
                total += counts;
                auto& acc = per_frame[cls];
                if (gt_px > 0) {
                    acc.iou_sum += iou(counts);
                    acc.dice_sum += dice(counts);
                    acc.mae_sum += static_cast<double>(counts.fp + counts.fn) /
                                   static_cast<double>(gt_mask.pixel_count());
                    ++acc.frames;
                }
                acc.gt_pixels += gt_px;
            }
        }
    }

    if (common_frames == 0) {
        throw InvalidArgument("aggregate: result and ground truth share no annotated frames");
    }

    MetricsReport report;
    report.pseudo_ground_truth = pseudo;
    double iou_total = 0, dice_total = 0, mae_total = 0;
    int present = 0;
    for (const auto& [cls, counts] : class_counts) {
        // Classes with zero GT pixels across the span are excluded from C.
        if (class_gt_pixels[cls] == 0) continue;
        ClassScore score;
        score.gt_pixels = class_gt_pixels[cls];
        if (order == AggregationOrder::per_class_over_video) {
            score.iou = iou(counts);
            score.dice = dice(counts);
            score.mae = static_cast<double>(counts.fp + counts.fn) /
                        static_cast<double>(class_pixels_n[cls]);
        } else {
            const auto& acc = per_frame.at(cls);
            score.iou = acc.iou_sum / static_cast<double>(acc.frames);
            score.dice = acc.dice_sum / static_cast<double>(acc.frames);
            score.mae = acc.mae_sum / static_cast<double>(acc.frames);
        }
        report.per_class[cls] = score;
        iou_total += score.iou;
        dice_total += score.dice;
        mae_total += score.mae;
        ++present;
        report.pixel_count += class_pixels_n[cls];
    }
    report.class_count = present;
    if (present > 0) {
        report.miou = iou_total / present;
        report.mdice = dice_total / present;
        report.mae = mae_total / present;
    }
    report.phi = overlap_phi(total);
    report.aggregation = order == AggregationOrder::per_class_over_video
                             ? "per_class_over_video"
                             : "per_frame_then_class";
    return report;
}

}  // namespace

MetricsReport aggregate(const SegmentationResult& result, const AnnotatedVideo& gt,
                        AggregationOrder order) {
    const VideoRun run{&result, &gt};
    return aggregate_runs(std::span<const VideoRun>(&run, 1), order);
}

MetricsReport aggregate_videos(
    std::span<const std::pair<const SegmentationResult*, const AnnotatedVideo*>> runs,
    AggregationOrder order) {
    std::vector<VideoRun> converted;
    converted.reserve(runs.size());
    for (const auto& [result, gt] : runs) converted.push_back({result, gt});
    return aggregate_runs(converted, order);
}

double mean_average_precision(const SegmentationResult& result, const AnnotatedVideo& gt,
                              std::span<const double> iou_thresholds) {
    struct Instance {
        FrameIndex frame;
        ObjectId object;
        const BinaryMask* mask;
        std::uint64_t area;
    };
    const auto object_classes = gt.object_classes();

    std::map<ClassId, std::vector<Instance>> gt_instances;
    for (const auto& [frame, anns] : gt.annotations) {
        for (const auto& ann : anns) {
            gt_instances[ann.class_id].push_back(
                {frame, ann.object_id, &ann.mask, ann.mask.foreground_count()});
        }
    }
    std::map<ClassId, std::vector<Instance>> pred_instances;
    for (const auto& [frame, objects] : result.masks) {
        if (!gt.has_annotations(frame)) continue;
        for (const auto& [object, mask] : objects) {
            if (mask.empty()) continue;
            const auto cls_it = object_classes.find(object);
            if (cls_it == object_classes.end()) continue;
            pred_instances[cls_it->second].push_back(
                {frame, object, &mask, mask.foreground_count()});
        }
    }

    std::vector<double> thresholds(iou_thresholds.begin(), iou_thresholds.end());
    if (thresholds.empty()) thresholds.push_back(0.5);

    double ap_sum = 0.0;
    int cells = 0;
    for (const auto& [cls, gts] : gt_instances) {
        auto preds = pred_instances[cls];
        // No confidence scores in this pipeline: area is the ranking key.
        std::sort(preds.begin(), preds.end(), [](const Instance& a, const Instance& b) {
            return std::tie(b.area, a.frame, a.object) < std::tie(a.area, b.frame, b.object);
        });
        for (double threshold : thresholds) {
            std::vector<bool> gt_used(gts.size(), false);
            std::uint64_t tp = 0;
            std::uint64_t considered = 0;
            double ap = 0.0;
            for (const auto& pred : preds) {
                ++considered;
                double best_iou = 0.0;
                std::size_t best_gt = gts.size();
                for (std::size_t g = 0; g < gts.size(); ++g) {
                    if (gt_used[g] || gts[g].frame != pred.frame) continue;
                    const auto counts = confusion_counts(*pred.mask, *gts[g].mask);
                    const double overlap = iou(counts);
                    if (overlap > best_iou) {
                        best_iou = overlap;
                        best_gt = g;
                    }
                }
                if (best_gt < gts.size() && best_iou >= threshold) {
                    gt_used[best_gt] = true;
                    ++tp;
                    // all-point AP: precision at this recall step
                    ap += static_cast<double>(tp) / static_cast<double>(considered) /
                          static_cast<double>(gts.size());
                }
            }
            ap_sum += ap;
            ++cells;
        }
    }
    if (cells == 0) return 1.0;  // no GT instances at all
    return ap_sum / cells;
}

std::string csv_escape(const std::string& field) {
    if (field.find_first_of(",\"\n") == std::string::npos) return field;
    std::string escaped = "\"";
    for (char c : field) {
        if (c == '"') escaped += '"';
        escaped += c;
    }
    escaped += '"';
    return escaped;
}

namespace {

std::string fmt(double v) {
    char buf[32];
    std::snprintf(buf, sizeof(buf), "%.6f", v);
    return buf;
}

}  // namespace

void write_metrics_csv(std::ostream& out, const MetricsReport& report,
                       const std::map<ClassId, std::string>& class_names) {
    out << "row,class_id,class_name,iou,dice,mae,phi,map,pseudo_gt,aggregation\n";
    for (const auto& [cls, score] : report.per_class) {
        std::string name;
        const auto it = class_names.find(cls);
        if (it != class_names.end()) name = it->second;
        out << "class," << cls << ',' << csv_escape(name) << ',' << fmt(score.iou) << ','
            << fmt(score.dice) << ',' << fmt(score.mae) << ",,,"
            << (report.pseudo_ground_truth ? "1" : "0") << ','
            << csv_escape(report.aggregation) << '\n';
    }
    out << "aggregate,,," << fmt(report.miou) << ',' << fmt(report.mdice) << ','
        << fmt(report.mae) << ',' << fmt(report.phi) << ','
        << (report.map_score ? fmt(*report.map_score) : std::string()) << ','
        << (report.pseudo_ground_truth ? "1" : "0") << ',' << csv_escape(report.aggregation)
        << '\n';
}

}  // namespace surgseg
