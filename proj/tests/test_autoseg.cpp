#include <doctest.h>

#include <fstream>

#include "surgseg/autoseg.hpp"
#include "surgseg/errors.hpp"
#include "surgseg/metrics.hpp"
#include "surgseg/mock_segmenter.hpp"
#include "surgseg/propagation.hpp"
#include "surgseg/synthetic.hpp"
#include "testutil.hpp"

using namespace surgseg;

namespace {

class ThrowingGenerator : public AutoMaskGenerator {
public:
    std::vector<AutoMaskCandidate> generate(const FrameRef&, const AutoSegConfig& config) override {
        if (config.points_per_side == 13) throw IoError("unlucky configuration");
        return {};
    }
};

}  // namespace

TEST_CASE("sweep produces one cell per config and isolates failures") {
    const auto video = generate_synthetic_video(default_synthetic_spec(3));
    MockAutoMaskGenerator generator(video);
    const FrameRef& frame = video.sequence.frames[0];

    SUBCASE("single cell") {
        const auto report = sweep(frame, {AutoSegConfig{}}, generator);
        CHECK(report.cells.size() == 1);
        CHECK_FALSE(report.cells[0].failed);
        CHECK(report.cells[0].candidate_count > 0);
    }
    SUBCASE("duplicate configs give identical cells") {
        AutoSegConfig config;
        const auto report = sweep(frame, {config, config}, generator);
        REQUIRE(report.cells.size() == 2);
        CHECK(report.cells[0].candidate_count == report.cells[1].candidate_count);
        CHECK(report.cells[0].coverage_fraction == report.cells[1].coverage_fraction);
        CHECK(report.cells[0].boundary_area_ratio == report.cells[1].boundary_area_ratio);
        CHECK(report.cells[0].max_pairwise_iou == report.cells[1].max_pairwise_iou);
    }
    SUBCASE("raising min_mask_region_area never increases the candidate count") {
        AutoSegConfig low;
        AutoSegConfig high;
        high.min_mask_region_area = 700;
        const auto report = sweep(frame, {low, high}, generator);
        CHECK(report.cells[1].candidate_count <= report.cells[0].candidate_count);
    }
    SUBCASE("empty grid is an error") {
        CHECK_THROWS_AS(sweep(frame, {}, generator), InvalidArgument);
    }
    SUBCASE("a failing cell does not abort the sweep") {
        ThrowingGenerator throwing;
        AutoSegConfig ok;
        AutoSegConfig bad;
        bad.points_per_side = 13;
        const auto report = sweep(frame, {ok, bad, ok}, throwing);
        REQUIRE(report.cells.size() == 3);
        CHECK_FALSE(report.cells[0].failed);
        CHECK(report.cells[1].failed);
        CHECK(report.cells[1].failure_reason.find("unlucky") != std::string::npos);
        CHECK_FALSE(report.cells[2].failed);
    }
}

TEST_CASE("pseudo ground truth selection orders objects by area") {
    const auto video = generate_synthetic_video(default_synthetic_spec(3));
    MockAutoMaskGenerator generator(video);
    const auto report = sweep(video.sequence.frames[0], {AutoSegConfig{}}, generator);

    const auto annotations = select_pseudo_ground_truth(report, 0);
    REQUIRE(annotations.size() >= 3);
    for (std::size_t i = 0; i + 1 < annotations.size(); ++i) {
        CHECK(annotations[i].mask.foreground_count() >=
              annotations[i + 1].mask.foreground_count());
        CHECK(annotations[i].object_id == static_cast<ObjectId>(i));
        CHECK(annotations[i].frame_index == 0);
    }

    SUBCASE("unknown or failed cells are errors") {
        CHECK_THROWS_AS(select_pseudo_ground_truth(report, 99), InvalidArgument);
        ThrowingGenerator throwing;
        AutoSegConfig bad;
        bad.points_per_side = 13;
        const auto failed = sweep(video.sequence.frames[0], {bad}, throwing);
        CHECK_THROWS_AS(select_pseudo_ground_truth(failed, 0), InvalidArgument);
    }
    SUBCASE("an empty candidate cell is an error") {
        AutoSegConfig impossible;
        impossible.min_mask_region_area = 1u << 20;
        const auto empty = sweep(video.sequence.frames[0], {impossible}, generator);
        CHECK_THROWS_AS(select_pseudo_ground_truth(empty, 0), IntegrityError);
    }
}

TEST_CASE("pseudo ground truth taints every downstream report") {
    const auto source = generate_synthetic_video(default_synthetic_spec(3));
    MockAutoMaskGenerator generator(source);
    const auto report = sweep(source.sequence.frames[0], {AutoSegConfig{}}, generator);
    auto annotations = select_pseudo_ground_truth(report, 0);
    const auto video =
        video_with_pseudo_ground_truth(source.sequence, std::move(annotations));
    CHECK(video.pseudo_ground_truth);

    MockSegmenterSession session(video, DriftModel{});
    const auto result = run_sequence(video, PromptStrategy::mask(), ReinitPolicy{}, session);
    CHECK(result.provenance.pseudo_ground_truth);
    const auto metrics = aggregate(result, video, AggregationOrder::per_class_over_video);
    CHECK(metrics.pseudo_ground_truth);
}

TEST_CASE("gallery renders one overlay per cell plus an index") {
    testutil::TempDir dir("gallery");
    const auto video = generate_synthetic_video(default_synthetic_spec(3));
    MockAutoMaskGenerator generator(video);
    AutoSegConfig a;
    AutoSegConfig b;
    b.points_per_side = 32;
    const auto report = sweep(video.sequence.frames[0], {a, b}, generator);
    write_sweep_gallery(report, dir.path());

    CHECK(std::filesystem::exists(dir.path() / "cell_0.png"));
    CHECK(std::filesystem::exists(dir.path() / "cell_1.png"));
    std::ifstream in(dir.path() / "index.json");
    REQUIRE(in.good());
    nlohmann::json index;
    in >> index;
    REQUIRE(index["cells"].size() == 2);
    for (const auto& cell : index["cells"]) {
        CHECK(cell.contains("coverage_fraction"));
        CHECK(cell.contains("boundary_area_ratio"));
        CHECK(cell.contains("max_pairwise_iou"));
    }
}
