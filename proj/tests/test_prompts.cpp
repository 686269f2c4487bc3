#include <doctest.h>

#include <sstream>

#include "surgseg/errors.hpp"
#include "surgseg/prompts.hpp"
#include "surgseg/synthetic.hpp"
#include "testutil.hpp"

using namespace surgseg;

namespace {

BinaryMask rect_mask(int w, int h, int x0, int y0, int rw, int rh) {
    BinaryMask mask(w, h);
    for (int y = y0; y < y0 + rh; ++y) {
        for (int x = x0; x < x0 + rw; ++x) mask.set(x, y, true);
    }
    return mask;
}

BinaryMask two_region_mask() {
    BinaryMask mask = rect_mask(32, 16, 2, 2, 5, 5);
    for (int y = 2; y < 7; ++y) {
        for (int x = 20; x < 25; ++x) mask.set(x, y, true);
    }
    return mask;
}

}  // namespace

TEST_CASE("positive points land inside their region before fluctuation") {
    const auto ann = testutil::make_annotation(rect_mask(16, 16, 3, 4, 6, 5));
    PointSamplingConfig config;
    config.positives_per_region = 3;
    config.fluctuation_radius = 0;
    config.seed = 11;
    const auto points = sample_positive_points(ann, config);
    REQUIRE(points.size() == 3);
    for (const auto& p : points) {
        CHECK(ann.mask.at(p.x, p.y));
        CHECK(p.label == PointLabel::positive);
        CHECK(p.object_id == ann.object_id);
    }
}

TEST_CASE("occlusion-split objects get N points per region") {
    const auto ann = testutil::make_annotation(two_region_mask());
    PointSamplingConfig config;
    config.positives_per_region = 1;
    config.fluctuation_radius = 0;
    const auto points = sample_positive_points(ann, config);
    CHECK(points.size() == 2);
    CHECK(points[0].x < 10);   // one per region, region scan order
    CHECK(points[1].x >= 20);
}

TEST_CASE("a single-pixel region yields repeated points") {
    BinaryMask mask(8, 8);
    mask.set(5, 5, true);
    const auto ann = testutil::make_annotation(mask);
    PointSamplingConfig config;
    config.positives_per_region = 2;
    config.fluctuation_radius = 0;
    const auto points = sample_positive_points(ann, config);
    REQUIRE(points.size() == 2);
    for (const auto& p : points) {
        CHECK(p.x == 5);
        CHECK(p.y == 5);
    }
}

TEST_CASE("negative points come from other objects' positives") {
    const auto target = testutil::make_annotation(rect_mask(32, 16, 2, 2, 5, 5), 0);
    const auto donor = testutil::make_annotation(rect_mask(32, 16, 20, 4, 6, 6), 1);
    PointSamplingConfig config;
    config.negatives_per_region = 1;
    config.fluctuation_radius = 0;

    SUBCASE("no donors means no negatives") {
        const std::vector<InstanceAnnotation> others{target};
        CHECK(sample_negative_points(target, others, config).empty());
    }
    SUBCASE("one donor yields one in-donor negative per region") {
        const std::vector<InstanceAnnotation> others{target, donor};
        const auto negatives = sample_negative_points(target, others, config);
        REQUIRE(negatives.size() == 1);
        CHECK(negatives[0].label == PointLabel::negative);
        CHECK(negatives[0].object_id == 0);
        CHECK(donor.mask.at(negatives[0].x, negatives[0].y));
    }
    SUBCASE("M = 0 yields none") {
        config.negatives_per_region = 0;
        const std::vector<InstanceAnnotation> others{target, donor};
        CHECK(sample_negative_points(target, others, config).empty());
    }
}

TEST_CASE("fluctuation clamps to the image bounds") {
    Rng rng(5);
    SUBCASE("beta 0 is the identity") {
        PointPrompt p{7, 9, PointLabel::positive, 0, 0};
        const auto q = fluctuate_point(p, 0, 16, 16, rng);
        CHECK(q.x == 7);
        CHECK(q.y == 9);
    }
    SUBCASE("origin corner") {
        for (int i = 0; i < 50; ++i) {
            PointPrompt p{0, 0, PointLabel::positive, 0, 0};
            const auto q = fluctuate_point(p, 5, 16, 16, rng);
            CHECK(q.x >= 0);
            CHECK(q.x <= 5);
            CHECK(q.y >= 0);
            CHECK(q.y <= 5);
        }
    }
    SUBCASE("far corner") {
        for (int i = 0; i < 50; ++i) {
            PointPrompt p{15, 15, PointLabel::positive, 0, 0};
            const auto q = fluctuate_point(p, 3, 16, 16, rng);
            CHECK(q.x <= 15);
            CHECK(q.x >= 12);
            CHECK(q.y <= 15);
            CHECK(q.y >= 12);
        }
    }
}

TEST_CASE("center point modes") {
    SUBCASE("box center is the bbox midpoint") {
        const auto ann = testutil::make_annotation(rect_mask(16, 16, 0, 0, 11, 11));
        const auto p = center_point(ann, CenterMode::box_center);
        CHECK(p.x == 5);
        CHECK(p.y == 5);
        CHECK(p.label == PointLabel::positive);
    }
    SUBCASE("mass center of a solid square is its middle") {
        const auto ann = testutil::make_annotation(rect_mask(8, 8, 0, 0, 3, 3));
        const auto p = center_point(ann, CenterMode::mass_center);
        CHECK(p.x == 1);
        CHECK(p.y == 1);
    }
    SUBCASE("background centroid snaps to the nearest foreground pixel") {
        // ring: 7x7 square outline, centroid falls in the hole
        BinaryMask ring(16, 16);
        for (int i = 4; i <= 10; ++i) {
            ring.set(i, 4, true);
            ring.set(i, 10, true);
            ring.set(4, i, true);
            ring.set(10, i, true);
        }
        const auto ann = testutil::make_annotation(ring);
        const auto p = center_point(ann, CenterMode::mass_center);
        CHECK(ring.at(p.x, p.y));
        // oracle: nearest fg pixel to the true centroid (7,7) by full scan
        long long best = 1LL << 60;
        for (int y = 0; y < 16; ++y) {
            for (int x = 0; x < 16; ++x) {
                if (!ring.at(x, y)) continue;
                const long long d2 = (x - 7LL) * (x - 7LL) + (y - 7LL) * (y - 7LL);
                best = std::min(best, d2);
            }
        }
        const long long got = (p.x - 7LL) * (p.x - 7LL) + (p.y - 7LL) * (p.y - 7LL);
        CHECK(got == best);
    }
}

TEST_CASE("box prompts carry tight corners with fixed labels") {
    SUBCASE("two-pixel diagonal") {
        BinaryMask mask(16, 16);
        mask.set(2, 3, true);
        mask.set(5, 7, true);
        const auto box = box_from_annotation(testutil::make_annotation(mask));
        CHECK(box.x_min == 2);
        CHECK(box.y_min == 3);
        CHECK(box.x_max == 5);
        CHECK(box.y_max == 7);
        CHECK(BoxPrompt::kTopLeftLabel == 2);
        CHECK(BoxPrompt::kBottomRightLabel == 3);
    }
    SUBCASE("full-frame mask") {
        const auto box =
            box_from_annotation(testutil::make_annotation(BinaryMask(12, 9, true)));
        CHECK(box.x_min == 0);
        CHECK(box.y_min == 0);
        CHECK(box.x_max == 11);
        CHECK(box.y_max == 8);
    }
    SUBCASE("single-pixel mask expands to keep strict ordering") {
        BinaryMask mask(8, 8);
        mask.set(3, 3, true);
        const auto box = box_from_annotation(testutil::make_annotation(mask));
        CHECK(box.x_min < box.x_max);
        CHECK(box.y_min < box.y_max);
        CHECK(box.x_min <= 3);
        CHECK(box.x_max >= 3);
    }
    SUBCASE("single pixel at the far corner expands inward") {
        BinaryMask mask(8, 8);
        mask.set(7, 7, true);
        const auto box = box_from_annotation(testutil::make_annotation(mask));
        CHECK(box.x_min == 6);
        CHECK(box.x_max == 7);
        CHECK(box.y_min == 6);
        CHECK(box.y_max == 7);
    }
}

TEST_CASE("build_prompt_set shapes per strategy") {
    auto video = generate_synthetic_video(default_synthetic_spec(5));
    SUBCASE("mask strategy: one MaskPrompt per object") {
        const auto prompts = build_prompt_set(video, 0, PromptStrategy::mask());
        CHECK(prompts.size() == 3);
        for (const auto& p : prompts) CHECK(std::holds_alternative<MaskPrompt>(p));
    }
    SUBCASE("box strategy: one BoxPrompt per object") {
        const auto prompts = build_prompt_set(video, 0, PromptStrategy::box());
        CHECK(prompts.size() == 3);
        for (const auto& p : prompts) CHECK(std::holds_alternative<BoxPrompt>(p));
    }
    SUBCASE("3 points: N positives per region plus up to M negatives") {
        PointSamplingConfig config;
        config.positives_per_region = 3;
        config.negatives_per_region = 1;
        config.seed = 2;
        const auto prompts =
            build_prompt_set(video, 0, PromptStrategy::random_points(3, config));
        // objects 0 and 1 are single-region (3 pos + 1 neg), object 2 has two
        // regions (6 pos + 2 neg)
        int positives = 0, negatives = 0;
        for (const auto& p : prompts) {
            const auto& point = std::get<PointPrompt>(p);
            (point.label == PointLabel::positive ? positives : negatives)++;
        }
        CHECK(positives == 12);
        CHECK(negatives == 4);
    }
    SUBCASE("center strategy: one deterministic point per object") {
        const auto a = build_prompt_set(video, 0, PromptStrategy::center_point());
        const auto b = build_prompt_set(video, 0, PromptStrategy::center_point());
        CHECK(a.size() == 3);
        CHECK(a == b);
    }
    SUBCASE("unannotated frame is an error") {
        video.annotations.erase(2);
        CHECK_THROWS_AS(build_prompt_set(video, 2, PromptStrategy::mask()), IntegrityError);
    }
}

TEST_CASE("prompt sets are deterministic in (annotation, config, seed)") {
    Rng rng(31);
    for (int trial = 0; trial < 50; ++trial) {
        const auto ann = testutil::make_annotation(testutil::random_nonempty_mask(rng), 3, 1, 7);
        PointSamplingConfig config;
        config.positives_per_region = 2;
        config.fluctuation_radius = 2;
        config.seed = rng.next();
        const auto a = sample_positive_points(ann, config);
        const auto b = sample_positive_points(ann, config);
        CHECK(a == b);
        // and beta=0 replays the same base points
        PointSamplingConfig base = config;
        base.fluctuation_radius = 0;
        const auto c = sample_positive_points(ann, base);
        REQUIRE(a.size() == c.size());
        for (std::size_t i = 0; i < a.size(); ++i) {
            CHECK(std::abs(a[i].x - c[i].x) <= 2);
            CHECK(std::abs(a[i].y - c[i].y) <= 2);
            CHECK(ann.mask.at(c[i].x, c[i].y));
        }
    }
}

TEST_CASE("prompt records survive a write/read round trip") {
    const auto video = generate_synthetic_video(default_synthetic_spec(5));
    PointSamplingConfig config;
    config.positives_per_region = 2;
    config.seed = 13;
    auto prompts = build_prompt_set(video, 0, PromptStrategy::random_points(2, config));
    const auto boxes = build_prompt_set(video, 0, PromptStrategy::box());
    const auto masks = build_prompt_set(video, 0, PromptStrategy::mask());
    prompts.insert(prompts.end(), boxes.begin(), boxes.end());
    prompts.insert(prompts.end(), masks.begin(), masks.end());

    std::stringstream stream;
    write_prompt_records(stream, video.sequence.video_id, prompts);
    const auto parsed = read_prompt_records(stream);
    REQUIRE(parsed.size() == prompts.size());
    for (std::size_t i = 0; i < prompts.size(); ++i) {
        CHECK(parsed[i] == prompts[i]);
    }
}
