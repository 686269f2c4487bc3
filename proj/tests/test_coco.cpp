#include <doctest.h>

#include <fstream>

#include "surgseg/coco.hpp"
#include "surgseg/errors.hpp"
#include "testutil.hpp"

using namespace surgseg;
using nlohmann::json;

namespace {

json base_document() {
    return json{
        {"images", json::array()},
        {"annotations", json::array()},
        {"categories", json::array({{{"id", 1}, {"name", "instrument"}}})},
    };
}

json image_record(long long id, const std::string& video, int frame, int w = 4, int h = 4) {
    return {{"id", id},         {"video_id", video}, {"frame_index", frame},
            {"file_name", video + "/" + std::to_string(frame) + ".png"},
            {"width", w},       {"height", h}};
}

}  // namespace

TEST_CASE("rle annotation decodes to the expected foreground") {
    auto doc = base_document();
    doc["images"].push_back(image_record(1, "v0", 0));
    doc["annotations"].push_back({
        {"id", 1},
        {"image_id", 1},
        {"category_id", 1},
        {"object_id", 7},
        {"segmentation", {{"size", {4, 4}}, {"counts", {5, 3, 8}}}},
    });
    const auto videos = load_coco_annotations(doc, "");
    REQUIRE(videos.size() == 1);
    REQUIRE(videos[0].annotations.count(0) == 1);
    const auto& ann = videos[0].annotations.at(0).front();
    CHECK(ann.mask.foreground_count() == 3);
    CHECK(ann.object_id == 7);
    CHECK(ann.bbox == PixelBox{1, 1, 1, 3});  // recomputed from the mask
}

TEST_CASE("document without annotations yields an empty annotation map") {
    auto doc = base_document();
    doc["images"].push_back(image_record(1, "v0", 0));
    const auto videos = load_coco_annotations(doc, "");
    REQUIRE(videos.size() == 1);
    CHECK(videos[0].annotations.empty());
    CHECK(videos[0].sequence.frames.size() == 1);
}

TEST_CASE("video grouping: 17 clips and 13 categories load as 17 videos") {
    json doc;
    doc["images"] = json::array();
    doc["annotations"] = json::array();
    doc["categories"] = json::array();
    for (int c = 1; c <= 13; ++c) {
        doc["categories"].push_back({{"id", c}, {"name", "class" + std::to_string(c)}});
    }
    long long image_id = 1;
    for (int clip = 0; clip < 17; ++clip) {
        for (int f = 0; f < 2; ++f) {
            doc["images"].push_back(image_record(image_id++, "clip" + std::to_string(clip), f));
        }
    }
    const auto videos = load_coco_annotations(doc, "");
    CHECK(videos.size() == 17);
    for (const auto& v : videos) CHECK(v.class_names.size() == 13);
}

TEST_CASE("polygon segmentation rasterizes to the enclosed pixels") {
    auto doc = base_document();
    doc["images"].push_back(image_record(1, "v0", 0, 8, 8));
    doc["annotations"].push_back({
        {"id", 1},
        {"image_id", 1},
        {"category_id", 1},
        {"object_id", 0},
        {"segmentation", json::array({json::array({1.0, 1.0, 5.0, 1.0, 5.0, 4.0, 1.0, 4.0})})},
    });
    const auto videos = load_coco_annotations(doc, "");
    const auto& mask = videos[0].annotations.at(0).front().mask;
    CHECK(mask.foreground_count() == 12);  // 4 wide x 3 tall at pixel centers
    CHECK(mask.at(1, 1));
    CHECK(mask.at(4, 3));
    CHECK_FALSE(mask.at(5, 1));
    CHECK_FALSE(mask.at(1, 4));
}

TEST_CASE("compressed rle strings decode per the reference scheme") {
    CHECK(decode_rle_string("538") == std::vector<std::uint64_t>{5, 3, 8});
    CHECK(decode_rle_string("3251<NI0") ==
          std::vector<std::uint64_t>{3, 2, 5, 3, 17, 1, 10, 1});
    CHECK(decode_rle_string("0:j2") == std::vector<std::uint64_t>{0, 10, 90});
    CHECK(decode_rle_string("Pb`n0P^_1") == std::vector<std::uint64_t>{1000000, 48576});

    auto doc = base_document();
    doc["images"].push_back(image_record(1, "v0", 0));
    doc["annotations"].push_back({
        {"id", 1},
        {"image_id", 1},
        {"category_id", 1},
        {"object_id", 0},
        {"segmentation", {{"size", {4, 4}}, {"counts", "538"}}},
    });
    const auto videos = load_coco_annotations(doc, "");
    CHECK(videos[0].annotations.at(0).front().mask.foreground_count() == 3);
}

TEST_CASE("load, re-serialize, reload gives identical videos") {
    testutil::TempDir dir("coco_roundtrip");
    json doc;
    doc["images"] = json::array();
    doc["annotations"] = json::array();
    doc["categories"] = json::array({{{"id", 1}, {"name", "tool"}}, {{"id", 2}, {"name", "organ"}}});
    long long image_id = 1;
    long long ann_id = 1;
    Rng rng(99);
    for (int v = 0; v < 3; ++v) {
        const std::string video = "vid" + std::to_string(v);
        for (int f = 0; f < 3; ++f) {
            doc["images"].push_back(image_record(image_id, video, f, 12, 10));
            for (int obj = 0; obj < 2; ++obj) {
                BinaryMask mask(12, 10);
                const int x0 = static_cast<int>(rng.below(8));
                const int y0 = static_cast<int>(rng.below(6));
                for (int y = y0; y < y0 + 3; ++y) {
                    for (int x = x0; x < x0 + 3; ++x) mask.set(x, y, true);
                }
                doc["annotations"].push_back({
                    {"id", ann_id++},
                    {"image_id", image_id},
                    {"category_id", obj + 1},
                    {"object_id", obj},
                    {"segmentation", {{"size", {10, 12}}, {"counts", mask.to_rle()}}},
                });
            }
            ++image_id;
        }
    }
    // one polygon annotation mixed in
    doc["images"].push_back(image_record(image_id, "vid0", 3, 12, 10));
    doc["annotations"].push_back({
        {"id", ann_id++},
        {"image_id", image_id},
        {"category_id", 1},
        {"object_id", 0},
        {"segmentation", json::array({json::array({0.0, 0.0, 4.0, 0.0, 4.0, 4.0, 0.0, 4.0})})},
    });

    const auto first = load_coco_annotations(doc, "root");
    const auto path = dir.path() / "roundtrip.json";
    save_coco_annotations(first, path);
    const auto second = load_coco_annotations(path, "");
    REQUIRE(first.size() == second.size());
    for (std::size_t i = 0; i < first.size(); ++i) {
        CHECK(first[i] == second[i]);
    }
}

TEST_CASE("malformed and inconsistent documents raise typed errors") {
    SUBCASE("missing collections") {
        CHECK_THROWS_AS(load_coco_annotations(json{{"images", json::array()}}, ""), ParseError);
    }
    SUBCASE("annotation referencing an unknown image") {
        auto doc = base_document();
        doc["images"].push_back(image_record(1, "v0", 0));
        doc["annotations"].push_back({
            {"id", 9},
            {"image_id", 42},
            {"category_id", 1},
            {"segmentation", {{"size", {4, 4}}, {"counts", {16}}}},
        });
        CHECK_THROWS_AS(load_coco_annotations(doc, ""), IntegrityError);
        try {
            load_coco_annotations(doc, "");
        } catch (const IntegrityError& e) {
            CHECK(std::string(e.what()).find("9") != std::string::npos);
        }
    }
    SUBCASE("image without a video grouping field") {
        auto doc = base_document();
        doc["images"].push_back({{"id", 1}, {"file_name", "x.png"}, {"width", 4}, {"height", 4}});
        CHECK_THROWS_AS(load_coco_annotations(doc, ""), IntegrityError);
    }
    SUBCASE("unknown category") {
        auto doc = base_document();
        doc["images"].push_back(image_record(1, "v0", 0));
        doc["annotations"].push_back({
            {"id", 1},
            {"image_id", 1},
            {"category_id", 77},
            {"segmentation", {{"size", {4, 4}}, {"counts", {5, 3, 8}}}},
        });
        CHECK_THROWS_AS(load_coco_annotations(doc, ""), IntegrityError);
    }
    SUBCASE("mixed object-id presence within a video") {
        auto doc = base_document();
        doc["images"].push_back(image_record(1, "v0", 0));
        doc["annotations"].push_back({
            {"id", 1},
            {"image_id", 1},
            {"category_id", 1},
            {"object_id", 0},
            {"segmentation", {{"size", {4, 4}}, {"counts", {5, 3, 8}}}},
        });
        doc["annotations"].push_back({
            {"id", 2},
            {"image_id", 1},
            {"category_id", 1},
            {"segmentation", {{"size", {4, 4}}, {"counts", {0, 3, 13}}}},
        });
        CHECK_THROWS_AS(load_coco_annotations(doc, ""), IntegrityError);
    }
}

TEST_CASE("annotations decoding to empty masks are dropped with a warning") {
    static int warnings = 0;
    warnings = 0;
    set_warn_handler([](const std::string&) { ++warnings; });
    auto doc = base_document();
    doc["images"].push_back(image_record(1, "v0", 0));
    doc["annotations"].push_back({
        {"id", 5},
        {"image_id", 1},
        {"category_id", 1},
        {"object_id", 0},
        {"segmentation", {{"size", {4, 4}}, {"counts", {16}}}},  // all background
    });
    const auto videos = load_coco_annotations(doc, "");
    set_warn_handler(nullptr);
    CHECK(videos[0].annotations.empty());
    CHECK(warnings == 1);
}

TEST_CASE("annotations without object ids are linked by class and overlap") {
    auto doc = base_document();
    doc["images"].push_back(image_record(1, "v0", 0, 16, 8));
    doc["images"].push_back(image_record(2, "v0", 1, 16, 8));
    auto rect_rle = [](int x0) {
        BinaryMask mask(16, 8);
        for (int y = 1; y < 6; ++y) {
            for (int x = x0; x < x0 + 5; ++x) mask.set(x, y, true);
        }
        return mask.to_rle();
    };
    doc["annotations"].push_back({
        {"id", 1}, {"image_id", 1}, {"category_id", 1},
        {"segmentation", {{"size", {8, 16}}, {"counts", rect_rle(2)}}},
    });
    doc["annotations"].push_back({
        {"id", 2}, {"image_id", 2}, {"category_id", 1},
        {"segmentation", {{"size", {8, 16}}, {"counts", rect_rle(3)}}},
    });
    const auto videos = load_coco_annotations(doc, "");
    CHECK(videos[0].annotations.at(0).front().object_id ==
          videos[0].annotations.at(1).front().object_id);
}
