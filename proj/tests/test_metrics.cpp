#include <doctest.h>

#include <cmath>
#include <sstream>

#include "surgseg/errors.hpp"
#include "surgseg/metrics.hpp"
#include "surgseg/mock_segmenter.hpp"
#include "surgseg/synthetic.hpp"
#include "testutil.hpp"

using namespace surgseg;

namespace {

BinaryMask rect(int w, int h, int x0, int y0, int rw, int rh) {
    BinaryMask mask(w, h);
    for (int y = y0; y < y0 + rh; ++y) {
        for (int x = x0; x < x0 + rw; ++x) mask.set(x, y, true);
    }
    return mask;
}

SegmentationResult result_for(const AnnotatedVideo& video,
                              const std::map<FrameIndex, std::map<ObjectId, BinaryMask>>& masks) {
    SegmentationResult result;
    result.masks = masks;
    return result;
}

}  // namespace

TEST_CASE("confusion counts on identical, disjoint, and random masks") {
    const auto a = rect(8, 8, 1, 1, 3, 3);
    SUBCASE("identity") {
        const auto counts = confusion_counts(a, a);
        CHECK(counts.tp == 9);
        CHECK(counts.fp == 0);
        CHECK(counts.fn == 0);
    }
    SUBCASE("disjoint") {
        const auto b = rect(8, 8, 5, 5, 2, 2);
        const auto counts = confusion_counts(a, b);
        CHECK(counts.tp == 0);
        CHECK(counts.fp == 9);
        CHECK(counts.fn == 4);
    }
    SUBCASE("random pairs match the pixel-loop oracle") {
        Rng rng(1);
        for (int i = 0; i < 200; ++i) {
            BinaryMask p(8, 8);
            BinaryMask g(8, 8);
            for (int y = 0; y < 8; ++y) {
                for (int x = 0; x < 8; ++x) {
                    p.set(x, y, rng.below(2) == 1);
                    g.set(x, y, rng.below(2) == 1);
                }
            }
            const auto counts = confusion_counts(p, g);
            const auto oracle = testutil::brute_force_counts(p, g);
            CHECK(counts.tp == oracle.tp);
            CHECK(counts.fp == oracle.fp);
            CHECK(counts.fn == oracle.fn);
        }
    }
    SUBCASE("dimension mismatch errors") {
        CHECK_THROWS_AS(confusion_counts(a, BinaryMask(4, 4)), InvalidArgument);
        CHECK_THROWS_AS(mae(a, BinaryMask(4, 4)), InvalidArgument);
    }
}

TEST_CASE("iou and dice formulas") {
    CHECK(iou({9, 0, 0}) == 1.0);
    CHECK(dice({9, 0, 0}) == 1.0);
    CHECK(iou({1, 1, 1}) == doctest::Approx(1.0 / 3.0));
    CHECK(dice({1, 1, 1}) == doctest::Approx(0.5));
    SUBCASE("dice-iou identity on random counts") {
        Rng rng(2);
        for (int i = 0; i < 300; ++i) {
            ConfusionCounts c{rng.below(100), rng.below(100), rng.below(100)};
            if (c.tp + c.fp + c.fn == 0) c.tp = 1;
            const double identity = 2.0 * iou(c) / (1.0 + iou(c));
            CHECK(std::abs(dice(c) - identity) < 1e-12);
            CHECK(iou(c) <= dice(c));
            CHECK(dice(c) <= 1.0);
        }
    }
}

TEST_CASE("mae counts disagreeing pixels") {
    const auto a = rect(8, 8, 0, 0, 4, 4);
    CHECK(mae(a, a) == 0.0);
    BinaryMask complement(8, 8);
    for (int y = 0; y < 8; ++y) {
        for (int x = 0; x < 8; ++x) complement.set(x, y, !a.at(x, y));
    }
    CHECK(mae(a, complement) == 1.0);
    SUBCASE("cross-check against counts") {
        Rng rng(3);
        for (int i = 0; i < 100; ++i) {
            const auto p = testutil::random_mask(rng, 16);
            BinaryMask g(p.width(), p.height());
            for (int y = 0; y < g.height(); ++y) {
                for (int x = 0; x < g.width(); ++x) g.set(x, y, rng.below(2) == 1);
            }
            const auto counts = confusion_counts(p, g);
            const double expected =
                static_cast<double>(counts.fp + counts.fn) / static_cast<double>(p.pixel_count());
            CHECK(mae(p, g) == doctest::Approx(expected).epsilon(1e-12));
            // accuracy complement
            CHECK(mae(p, g) + (1.0 - mae(p, g)) == doctest::Approx(1.0));
        }
    }
}

TEST_CASE("phi is the iou formula with an empty-vs-empty convention") {
    Rng rng(4);
    for (int i = 0; i < 100; ++i) {
        const ConfusionCounts c{rng.below(50), rng.below(50), rng.below(50)};
        CHECK(overlap_phi(c) == iou(c));
    }
    CHECK(overlap_phi({0, 3, 4}) == 0.0);
    CHECK(overlap_phi({0, 0, 0}) == 1.0);
}

TEST_CASE("symmetry of iou, dice, and mae") {
    Rng rng(5);
    for (int i = 0; i < 100; ++i) {
        const auto a = testutil::random_mask(rng, 12);
        BinaryMask b(a.width(), a.height());
        for (int y = 0; y < b.height(); ++y) {
            for (int x = 0; x < b.width(); ++x) b.set(x, y, rng.below(2) == 1);
        }
        const auto ab = confusion_counts(a, b);
        const auto ba = confusion_counts(b, a);
        CHECK(iou(ab) == iou(ba));
        CHECK(dice(ab) == dice(ba));
        CHECK(mae(a, b) == mae(b, a));
    }
}

TEST_CASE("aggregate on a perfect prediction") {
    const auto video = generate_synthetic_video(default_synthetic_spec(10));
    MockSegmenterSession session(video, DriftModel{});
    const auto result = run_sequence(video, PromptStrategy::mask(), ReinitPolicy{}, session);
    for (auto order :
         {AggregationOrder::per_class_over_video, AggregationOrder::per_frame_then_class}) {
        const auto report = aggregate(result, video, order);
        CHECK(report.miou == 1.0);
        CHECK(report.mdice == 1.0);
        CHECK(report.mae == 0.0);
        CHECK(report.phi == 1.0);
        CHECK(report.class_count == 3);
    }
}

TEST_CASE("one perfect class and one missing class average to 0.5") {
    SyntheticVideoSpec spec;
    spec.frames = 1;
    spec.width = 32;
    spec.height = 32;
    SyntheticObjectSpec a;
    a.object_id = 0;
    a.class_id = 1;
    a.x = 2;
    a.y = 2;
    a.w = 6;
    a.h = 6;
    spec.objects.push_back(a);
    SyntheticObjectSpec b = a;
    b.object_id = 1;
    b.class_id = 2;
    b.x = 20;
    spec.objects.push_back(b);
    const auto video = generate_synthetic_video(spec);

    std::map<FrameIndex, std::map<ObjectId, BinaryMask>> masks;
    masks[0][0] = *video.object_mask(0, 0);       // class 1 perfect
    masks[0][1] = BinaryMask(32, 32);             // class 2 absent
    const auto report =
        aggregate(result_for(video, masks), video, AggregationOrder::per_class_over_video);
    CHECK(report.miou == doctest::Approx(0.5));
    CHECK(report.class_count == 2);
    CHECK(report.per_class.at(1).iou == 1.0);
    CHECK(report.per_class.at(2).iou == 0.0);
    CHECK(report.aggregation == "per_class_over_video");
}

TEST_CASE("aggregate errors when no frames are shared") {
    const auto video = generate_synthetic_video(default_synthetic_spec(4));
    SegmentationResult empty;
    CHECK_THROWS_AS(aggregate(empty, video, AggregationOrder::per_class_over_video),
                    InvalidArgument);
}

TEST_CASE("aggregation is invariant to class relabeling") {
    const auto video = generate_synthetic_video(default_synthetic_spec(6));
    MockSegmenterSession session(video, DriftModel{1.0, 0.0, 0.0, {}});
    const auto result = run_sequence(video, PromptStrategy::mask(), ReinitPolicy{}, session);
    const auto report = aggregate(result, video, AggregationOrder::per_class_over_video);

    AnnotatedVideo relabeled = video;
    std::map<ClassId, std::string> names;
    for (auto& [frame, anns] : relabeled.annotations) {
        for (auto& ann : anns) ann.class_id += 10;
    }
    for (const auto& [cls, name] : video.class_names) names[cls + 10] = name;
    relabeled.class_names = names;
    const auto relabeled_report =
        aggregate(result, relabeled, AggregationOrder::per_class_over_video);
    CHECK(report.miou == doctest::Approx(relabeled_report.miou).epsilon(1e-12));
    CHECK(report.mdice == doctest::Approx(relabeled_report.mdice).epsilon(1e-12));
}

TEST_CASE("mean average precision") {
    const auto video = generate_synthetic_video(default_synthetic_spec(3));
    MockSegmenterSession session(video, DriftModel{});
    const auto perfect = run_sequence(video, PromptStrategy::mask(), ReinitPolicy{}, session);
    const std::vector<double> t50{0.5};

    SUBCASE("perfect predictions score 1.0") {
        CHECK(mean_average_precision(perfect, video, t50) == doctest::Approx(1.0));
    }
    SUBCASE("no predictions score 0.0") {
        SegmentationResult none;
        for (const auto& [frame, anns] : video.annotations) {
            none.masks[frame] = {};
        }
        CHECK(mean_average_precision(none, video, t50) == 0.0);
    }
    SUBCASE("one of two instances matched at iou 0.6 gives AP 0.5") {
        SyntheticVideoSpec spec;
        spec.frames = 1;
        spec.width = 32;
        spec.height = 32;
        for (int i = 0; i < 2; ++i) {
            SyntheticObjectSpec obj;
            obj.object_id = i;
            obj.class_id = 1;
            obj.x = i * 16 + 2;
            obj.y = 2;
            obj.w = 10;
            obj.h = 10;
            spec.objects.push_back(obj);
        }
        const auto two = generate_synthetic_video(spec);
        // object 0 predicted as a 6x10 sub-rectangle (iou 60/100 = 0.6),
        // object 1 not predicted at all
        std::map<FrameIndex, std::map<ObjectId, BinaryMask>> masks;
        BinaryMask partial(32, 32);
        for (int y = 2; y < 12; ++y) {
            for (int x = 2; x < 8; ++x) partial.set(x, y, true);
        }
        masks[0][0] = partial;
        const double map = mean_average_precision(result_for(two, masks), two, t50);
        CHECK(map == doctest::Approx(0.5));
    }
}

TEST_CASE("csv output is stable and escaped") {
    MetricsReport report;
    report.per_class[1] = {0.5, 2.0 / 3.0, 0.1, 100};
    report.miou = 0.5;
    report.mdice = 2.0 / 3.0;
    report.mae = 0.1;
    report.phi = 0.5;
    report.aggregation = "per_class_over_video";
    std::map<ClassId, std::string> names{{1, "tool, large"}};
    std::stringstream out;
    write_metrics_csv(out, report, names);
    const std::string text = out.str();
    CHECK(text.find("\"tool, large\"") != std::string::npos);
    CHECK(text.find("0.500000") != std::string::npos);
    std::stringstream again;
    write_metrics_csv(again, report, names);
    CHECK(text == again.str());
}

TEST_CASE("metrics match a brute-force implementation on random pairs") {
    Rng rng(6);
    for (int i = 0; i < 500; ++i) {
        const int w = 1 + static_cast<int>(rng.below(32));
        const int h = 1 + static_cast<int>(rng.below(32));
        BinaryMask p(w, h);
        BinaryMask g(w, h);
        for (int y = 0; y < h; ++y) {
            for (int x = 0; x < w; ++x) {
                p.set(x, y, rng.below(3) == 0);
                g.set(x, y, rng.below(3) == 0);
            }
        }
        const auto oracle = testutil::brute_force_counts(p, g);
        const double denom = static_cast<double>(oracle.tp + oracle.fp + oracle.fn);
        const double oracle_iou = denom == 0 ? 1.0 : oracle.tp / denom;
        const double oracle_dice = (2.0 * oracle.tp + oracle.fp + oracle.fn) == 0
                                       ? 1.0
                                       : 2.0 * oracle.tp / (2.0 * oracle.tp + oracle.fp + oracle.fn);
        const double oracle_mae =
            static_cast<double>(oracle.fp + oracle.fn) / (static_cast<double>(w) * h);
        const auto counts = confusion_counts(p, g);
        CHECK(std::abs(iou(counts) - oracle_iou) < 1e-12);
        CHECK(std::abs(dice(counts) - oracle_dice) < 1e-12);
        CHECK(std::abs(mae(p, g) - oracle_mae) < 1e-12);
    }
}
