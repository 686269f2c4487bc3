#pragma once

#include <iosfwd>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "surgseg/propagation.hpp"

namespace surgseg {

struct ConfusionCounts {
    std::uint64_t tp = 0;
    std::uint64_t fp = 0;
    std::uint64_t fn = 0;

    ConfusionCounts& operator+=(const ConfusionCounts& other) {
        tp += other.tp;
        fp += other.fp;
        fn += other.fn;
        return *this;
    }
};

/// Pixelwise counts; throws InvalidArgument on dimension mismatch.
ConfusionCounts confusion_counts(const BinaryMask& pred, const BinaryMask& gt);

/// TP/(TP+FP+FN); empty-vs-empty (all counts zero) scores 1.0.
double iou(const ConfusionCounts& counts);
/// 2TP/(2TP+FP+FN); empty-vs-empty scores 1.0.
double dice(const ConfusionCounts& counts);
/// Numerically identical to iou; kept as the named overlap measure.
double overlap_phi(const ConfusionCounts& counts);
/// (FP+FN)/N over all N pixels.
double mae(const BinaryMask& pred, const BinaryMask& gt);

enum class AggregationOrder { per_frame_then_class, per_class_over_video };

struct ClassScore {
    double iou = 0.0;
    double dice = 0.0;
    double mae = 0.0;
    std::uint64_t gt_pixels = 0;
};

struct MetricsReport {
    std::map<ClassId, ClassScore> per_class;
    double miou = 0.0;
    double mdice = 0.0;
    double mae = 0.0;
    /// Micro-averaged overlap over the summed per-class counts.
    double phi = 0.0;
    std::optional<double> map_score;
    int class_count = 0;          // C: classes present in ground truth
    std::uint64_t pixel_count = 0;  // N: pixels contributing to mae
    std::string aggregation;
    bool pseudo_ground_truth = false;
};

/// Per-class scores in the declared order, averaged over the classes present
/// in ground truth; frames without ground truth are excluded. Throws
/// InvalidArgument when result and ground truth share no frames.
MetricsReport aggregate(const SegmentationResult& result, const AnnotatedVideo& gt,
                        AggregationOrder order);

/// Dataset-level report across (result, gt) pairs with the same semantics.
MetricsReport aggregate_videos(
    std::span<const std::pair<const SegmentationResult*, const AnnotatedVideo*>> runs,
    AggregationOrder order);

/// Instance-level AP, predictions ranked by descending mask area, greedy
/// matching at each IoU threshold; mAP averages over classes and thresholds.
double mean_average_precision(const SegmentationResult& result, const AnnotatedVideo& gt,
                              std::span<const double> iou_thresholds);

/// CSV rows: one per class, then one "aggregate" row. Fixed field order and
/// formatting so identical runs serialize identically.
void write_metrics_csv(std::ostream& out, const MetricsReport& report,
                       const std::map<ClassId, std::string>& class_names);

std::string csv_escape(const std::string& field);

}  // namespace surgseg
