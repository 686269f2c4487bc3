#include "surgseg/experiment.hpp"

#include <algorithm>
#include <atomic>
#include <fstream>
#include <mutex>
#include <sstream>
#include <thread>

#include "surgseg/coco.hpp"
#include "surgseg/errors.hpp"
#include "surgseg/image_io.hpp"
#include "surgseg/pixel_masks.hpp"

namespace surgseg {

namespace {

std::string sanitize(const std::string& raw) {
    std::string out;
    for (char c : raw) {
        if (std::isalnum(static_cast<unsigned char>(c)) || c == '-' || c == '+' || c == '.') {
            out += c;
        } else if (c == ' ') {
            // drop
        } else {
            out += '_';
        }
    }
    return out;
}

std::string fmt_pct(double fraction) {
    char buf[32];
    std::snprintf(buf, sizeof(buf), "%.4f", fraction * 100.0);
    return buf;
}

std::string fmt_pct2(double fraction) {
    char buf[32];
    std::snprintf(buf, sizeof(buf), "%.2f", fraction * 100.0);
    return buf;
}

}  // namespace

std::string SegmenterConfig::label() const {
    switch (kind) {
        case Kind::mock: return "mock";
        case Kind::bridge: return "bridge";
        case Kind::finetuned: return "finetuned";
    }
    return "?";
}

ExperimentConfig ExperimentConfig::parse(const nlohmann::json& document) {
    ExperimentConfig config;
    config.source = document;
    config.schema_version = document.value("schema_version", -1);
    if (config.schema_version != kConfigSchemaVersion) {
        throw ParseError("config schema_version must be " +
                         std::to_string(kConfigSchemaVersion) + ", got " +
                         std::to_string(config.schema_version));
    }
    config.seeds.clear();
    if (document.contains("seeds")) {
        for (const auto& s : document["seeds"]) config.seeds.push_back(s.get<std::uint64_t>());
    } else {
        config.seeds.push_back(document.value("seed", 0ULL));
    }
    config.output_dir = document.value("output_dir", std::string("out"));

    for (const auto& d : document.value("datasets", nlohmann::json::array())) {
        DatasetConfig dataset;
        dataset.name = d.value("name", std::string());
        const std::string adapter = d.value("adapter", std::string("synthetic"));
        if (adapter == "synthetic") {
            dataset.adapter = DatasetConfig::Adapter::synthetic;
            dataset.synthetic = d.contains("synthetic")
                                    ? synthetic_spec_from_json(d["synthetic"])
                                    : default_synthetic_spec();
        } else if (adapter == "coco") {
            dataset.adapter = DatasetConfig::Adapter::coco;
            dataset.annotations = d.value("annotations", std::string());
            dataset.image_root = d.value("image_root", std::string());
        } else if (adapter == "pixel_masks") {
            dataset.adapter = DatasetConfig::Adapter::pixel_masks;
            dataset.masks_dir = d.value("masks_dir", std::string());
            dataset.palette = d.value("palette", std::string());
            dataset.source_fps = d.value("source_fps", 1.0);
        } else {
            throw ParseError("unknown dataset adapter '" + adapter + "'");
        }
        if (d.contains("target_fps") && !d["target_fps"].is_null()) {
            dataset.target_fps = d["target_fps"].get<double>();
        }
        dataset.compute_map = d.value("map", false);
        config.datasets.push_back(std::move(dataset));
    }

    for (const auto& s : document.value("strategies", nlohmann::json::array())) {
        const std::string kind = s.value("kind", std::string());
        PromptStrategy strategy;
        if (kind == "center_point") {
            strategy = PromptStrategy::center_point();
        } else if (kind == "random_points") {
            PointSamplingConfig pc;
            pc.positives_per_region = s.value("points", 1);
            pc.negatives_per_region = s.value("negatives", pc.negatives_per_region);
            pc.fluctuation_radius = s.value("fluctuation", pc.fluctuation_radius);
            strategy = PromptStrategy::random_points(pc.positives_per_region, pc);
        } else if (kind == "box") {
            strategy = PromptStrategy::box();
        } else if (kind == "mask") {
            strategy = PromptStrategy::mask();
        } else {
            throw ParseError("unknown prompt strategy kind '" + kind + "'");
        }
        config.strategies.push_back(strategy);
    }

    for (const auto& p : document.value("policies", nlohmann::json::array())) {
        ReinitPolicy policy;
        if (p.contains("interval") && !p["interval"].is_null()) {
            policy.interval = p["interval"].get<int>();
        }
        policy.new_object_trigger = p.value("new_object_trigger", false);
        config.policies.push_back(policy);
    }

    if (document.contains("segmenter")) {
        const auto& s = document["segmenter"];
        const std::string kind = s.value("kind", std::string("mock"));
        if (kind == "mock") {
            config.segmenter.kind = SegmenterConfig::Kind::mock;
        } else if (kind == "bridge") {
            config.segmenter.kind = SegmenterConfig::Kind::bridge;
        } else if (kind == "finetuned") {
            config.segmenter.kind = SegmenterConfig::Kind::finetuned;
            config.segmenter.checkpoint = s.value("checkpoint", std::string());
        } else {
            throw ParseError("unknown segmenter kind '" + kind + "'");
        }
        if (s.contains("drift")) {
            const auto& d = s["drift"];
            config.segmenter.drift.dx = d.value("dx", 0.0);
            config.segmenter.drift.dy = d.value("dy", 0.0);
            config.segmenter.drift.erosion_rate = d.value("erosion_rate", 0.0);
            if (d.contains("dropout_after") && !d["dropout_after"].is_null()) {
                config.segmenter.drift.dropout_after = d["dropout_after"].get<int>();
            }
        }
        if (s.contains("bridge")) {
            const auto& b = s["bridge"];
            for (const auto& arg : b.value("server_command", nlohmann::json::array())) {
                config.segmenter.bridge.server_command.push_back(arg.get<std::string>());
            }
            config.segmenter.bridge.checkpoint_locator = b.value("checkpoint", std::string());
            config.segmenter.bridge.model_variant =
                b.value("variant", config.segmenter.bridge.model_variant);
            config.segmenter.bridge.device = b.value("device", config.segmenter.bridge.device);
            if (b.contains("options")) config.segmenter.bridge.runtime_options = b["options"];
        }
    }

    if (document.contains("metrics")) {
        const auto& m = document["metrics"];
        const std::string order = m.value("aggregation", std::string("per_class_over_video"));
        if (order == "per_class_over_video") {
            config.aggregation = AggregationOrder::per_class_over_video;
        } else if (order == "per_frame_then_class") {
            config.aggregation = AggregationOrder::per_frame_then_class;
        } else {
            throw ParseError("unknown aggregation order '" + order + "'");
        }
        if (m.contains("map_thresholds")) {
            config.map_thresholds = m["map_thresholds"].get<std::vector<double>>();
        }
    }

    if (document.contains("finetune")) {
        const auto& f = document["finetune"];
        FinetuneSection section;
        section.dataset = f.value("dataset", std::string());
        if (f.contains("variants")) {
            section.variants = f["variants"].get<std::vector<std::string>>();
        }
        FinetuneConfig base;
        if (f.contains("regime")) {
            const auto& r = f["regime"];
            const std::string kind = r.value("kind", std::string("image_dense"));
            if (kind == "image_dense") {
                base.regime.kind = TrainingRegime::Kind::image_dense;
            } else if (kind == "image_sparse") {
                base.regime.kind = TrainingRegime::Kind::image_sparse;
            } else if (kind == "video_sparse") {
                base.regime.kind = TrainingRegime::Kind::video_sparse;
            } else {
                throw ParseError("unknown finetune regime '" + kind + "'");
            }
            base.regime.stride = r.value("stride", base.regime.stride);
        }
        const std::string prompt = f.value("prompt_type", std::string("mask"));
        if (prompt == "point") base.prompt_type = FinetunePromptType::point;
        else if (prompt == "box") base.prompt_type = FinetunePromptType::box;
        else if (prompt == "mask") base.prompt_type = FinetunePromptType::mask;
        else throw ParseError("unknown finetune prompt_type '" + prompt + "'");
        if (f.contains("split") && !f["split"].is_null()) {
            SplitSpec split;
            split.train_fraction = f["split"].value("train_fraction", 0.7);
            split.seed = f["split"].value("seed", 0ULL);
            split.unit = f["split"].value("unit", std::string("video")) == "frame"
                             ? SplitSpec::Unit::frame
                             : SplitSpec::Unit::video;
            base.split = split;
        }
        base.epochs = f.value("epochs", base.epochs);
        base.learning_rate = f.value("learning_rate", base.learning_rate);
        base.seed = f.value("seed", config.seeds.front());
        section.base = base;
        config.finetune = std::move(section);
    }

    if (document.contains("sweep")) {
        const auto& s = document["sweep"];
        SweepSection section;
        section.dataset = s.value("dataset", std::string());
        section.frame_index = s.value("frame_index", 0);
        for (const auto& cell : s.value("grid", nlohmann::json::array())) {
            section.grid.push_back(AutoSegConfig::from_json(cell));
        }
        config.sweep = std::move(section);
    }

    return config;
}

ExperimentConfig ExperimentConfig::load(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw IoError("cannot open config: " + path.string());
    nlohmann::json document;
    try {
        in >> document;
    } catch (const nlohmann::json::exception& e) {
        throw ParseError("invalid JSON in " + path.string() + ": " + e.what());
    }
    return parse(document);
}

std::vector<std::string> ExperimentConfig::validate() const {
    std::vector<std::string> errors;
    if (datasets.empty()) errors.push_back("config declares no datasets");
    if (strategies.empty()) errors.push_back("config declares no prompt strategies");
    if (policies.empty()) errors.push_back("config declares no reinit policies");
    if (seeds.empty()) errors.push_back("config declares no seeds");

    std::set<std::string> names;
    for (const auto& d : datasets) {
        if (d.name.empty()) errors.push_back("dataset with empty name");
        if (!names.insert(d.name).second) {
            errors.push_back("duplicate dataset name '" + d.name + "'");
        }
        switch (d.adapter) {
            case DatasetConfig::Adapter::coco:
                if (!std::filesystem::exists(d.annotations)) {
                    errors.push_back("dataset '" + d.name + "': annotations file not found: " +
                                     d.annotations.string());
                }
                break;
            case DatasetConfig::Adapter::pixel_masks:
                if (!std::filesystem::exists(d.masks_dir)) {
                    errors.push_back("dataset '" + d.name + "': masks_dir not found: " +
                                     d.masks_dir.string());
                }
                if (!std::filesystem::exists(d.palette)) {
                    errors.push_back("dataset '" + d.name + "': palette not found: " +
                                     d.palette.string());
                }
                break;
            case DatasetConfig::Adapter::synthetic:
                if (d.synthetic.objects.empty()) {
                    errors.push_back("dataset '" + d.name + "': synthetic spec has no objects");
                }
                break;
        }
    }
    for (const auto& p : policies) {
        if (p.interval && *p.interval <= 0) {
            errors.push_back("reinit interval must be positive, got " +
                             std::to_string(*p.interval));
        }
    }
    for (const auto& s : strategies) {
        if (s.kind == StrategyKind::random_points) {
            if (s.point_config.positives_per_region < 0 ||
                s.point_config.negatives_per_region < 0 || s.point_config.fluctuation_radius < 0) {
                errors.push_back("random_points strategy with negative sampling parameters");
            }
        }
    }
    if (segmenter.kind == SegmenterConfig::Kind::bridge &&
        segmenter.bridge.server_command.empty()) {
        errors.push_back("bridge segmenter without server_command");
    }
    if (segmenter.kind == SegmenterConfig::Kind::finetuned &&
        !std::filesystem::exists(segmenter.checkpoint)) {
        errors.push_back("finetuned segmenter checkpoint not found: " +
                         segmenter.checkpoint.string());
    }
    if (finetune) {
        if (!names.count(finetune->dataset)) {
            errors.push_back("finetune section references unknown dataset '" +
                             finetune->dataset + "'");
        }
        for (const auto& v : finetune->variants) {
            try {
                named_variant(v);
            } catch (const std::exception& e) {
                errors.push_back(e.what());
            }
        }
    }
    if (sweep && !names.count(sweep->dataset)) {
        errors.push_back("sweep section references unknown dataset '" + sweep->dataset + "'");
    }
    if (sweep && sweep->grid.empty()) {
        errors.push_back("sweep section with empty grid");
    }
    return errors;
}

std::string ExperimentConfig::digest() const {
    const std::string canonical = source.dump();
    return digest_hex(fnv1a(canonical.data(), canonical.size()));
}

std::string RunDescriptor::key() const {
    return sanitize(dataset) + "__" + sanitize(strategy.label()) + "__" +
           sanitize(policy.label()) + "__" + sanitize(segmenter_label) + "__s" +
           std::to_string(seed);
}

std::string RunDescriptor::method_label() const {
    std::string label = segmenter_label + "-" + strategy.label();
    if (policy.interval || policy.new_object_trigger) label += "-" + policy.label();
    return label;
}

std::vector<RunDescriptor> expand_matrix(const ExperimentConfig& config) {
    const auto errors = config.validate();
    if (!errors.empty()) {
        std::string joined = "invalid experiment config:";
        for (const auto& e : errors) joined += "\n  - " + e;
        throw InvalidArgument(joined);
    }
    std::vector<RunDescriptor> descriptors;
    std::set<std::string> seen;
    for (const auto& dataset : config.datasets) {
        for (const auto& strategy : config.strategies) {
            for (const auto& policy : config.policies) {
                for (std::uint64_t seed : config.seeds) {
                    RunDescriptor descriptor;
                    descriptor.dataset = dataset.name;
                    descriptor.strategy = strategy;
                    descriptor.strategy.point_config.seed = seed;
                    descriptor.policy = policy;
                    descriptor.segmenter_label = config.segmenter.label();
                    descriptor.seed = seed;
                    if (seen.insert(descriptor.key()).second) {
                        descriptors.push_back(std::move(descriptor));
                    }
                }
            }
        }
    }
    return descriptors;
}

std::vector<AnnotatedVideo> load_dataset(const DatasetConfig& config) {
    std::vector<AnnotatedVideo> videos;
    switch (config.adapter) {
        case DatasetConfig::Adapter::synthetic:
            videos.push_back(generate_synthetic_video(config.synthetic));
            break;
        case DatasetConfig::Adapter::coco:
            videos = load_coco_annotations(config.annotations, config.image_root);
            break;
        case DatasetConfig::Adapter::pixel_masks: {
            std::vector<std::filesystem::path> files;
            for (const auto& entry : std::filesystem::directory_iterator(config.masks_dir)) {
                if (!entry.is_regular_file()) continue;
                const auto ext = entry.path().extension().string();
                if (ext == ".png" || ext == ".jpg" || ext == ".jpeg" || ext == ".PNG") {
                    files.push_back(entry.path());
                }
            }
            std::sort(files.begin(), files.end());
            if (files.empty()) {
                throw IntegrityError("pixel_masks dataset '" + config.name +
                                     "': no mask images in " + config.masks_dir.string());
            }
            const Palette palette = Palette::load(config.palette);
            std::vector<LabelImage> frames;
            frames.reserve(files.size());
            for (const auto& f : files) frames.push_back(load_label_image(f));
            videos.push_back(
                video_from_label_frames(config.name, frames, palette, config.source_fps));
            break;
        }
    }
    if (config.target_fps) {
        for (auto& video : videos) video = sample_video(video, *config.target_fps);
    }
    return videos;
}

namespace {

std::unique_ptr<SegmenterSession> make_session(const SegmenterConfig& config,
                                               const AnnotatedVideo& video) {
    switch (config.kind) {
        case SegmenterConfig::Kind::mock:
            return std::make_unique<MockSegmenterSession>(video, config.drift);
        case SegmenterConfig::Kind::finetuned: {
            // A finetuned desk-scale segmenter: the trained checkpoint's
            // capability attenuates the drift the vanilla mock would suffer.
            const double capability =
                MockTrainableRuntime::capability_from_checkpoint(config.checkpoint);
            DriftModel drift = config.drift;
            const double keep = std::clamp(1.0 - capability, 0.0, 1.0);
            drift.dx *= keep;
            drift.dy *= keep;
            drift.erosion_rate *= keep;
            return std::make_unique<MockSegmenterSession>(video, drift);
        }
        case SegmenterConfig::Kind::bridge:
            return open_session(video.sequence, config.bridge);
    }
    throw InvalidArgument("unknown segmenter kind");
}

nlohmann::json metrics_to_json(const MetricsReport& report) {
    nlohmann::json per_class = nlohmann::json::object();
    for (const auto& [cls, score] : report.per_class) {
        per_class[std::to_string(cls)] = {
            {"iou", score.iou}, {"dice", score.dice}, {"mae", score.mae},
            {"gt_pixels", score.gt_pixels}};
    }
    nlohmann::json j = {
        {"miou", report.miou},
        {"mdice", report.mdice},
        {"mae", report.mae},
        {"phi", report.phi},
        {"class_count", report.class_count},
        {"pixel_count", report.pixel_count},
        {"aggregation", report.aggregation},
        {"pseudo_ground_truth", report.pseudo_ground_truth},
        {"per_class", per_class},
    };
    if (report.map_score) j["map"] = *report.map_score;
    return j;
}

MetricsReport metrics_from_json(const nlohmann::json& j) {
    MetricsReport report;
    report.miou = j.value("miou", 0.0);
    report.mdice = j.value("mdice", 0.0);
    report.mae = j.value("mae", 0.0);
    report.phi = j.value("phi", 0.0);
    report.class_count = j.value("class_count", 0);
    report.pixel_count = j.value("pixel_count", 0ULL);
    report.aggregation = j.value("aggregation", std::string());
    report.pseudo_ground_truth = j.value("pseudo_ground_truth", false);
    if (j.contains("map")) report.map_score = j["map"].get<double>();
    if (j.contains("per_class")) {
        for (const auto& [key, value] : j["per_class"].items()) {
            ClassScore score;
            score.iou = value.value("iou", 0.0);
            score.dice = value.value("dice", 0.0);
            score.mae = value.value("mae", 0.0);
            score.gt_pixels = value.value("gt_pixels", 0ULL);
            report.per_class[std::stoi(key)] = score;
        }
    }
    return report;
}

struct RunContext {
    const ExperimentConfig* config;
    const DatasetConfig* dataset_config;
    const std::vector<AnnotatedVideo>* videos;
};

RunSummary execute_run(const RunDescriptor& descriptor, const RunContext& context,
                       const std::filesystem::path& run_dir) {
    RunSummary summary;
    summary.key = descriptor.key();
    summary.dataset = descriptor.dataset;
    summary.method = descriptor.method_label();

    std::filesystem::create_directories(run_dir);
    nlohmann::json manifest = {
        {"key", summary.key},
        {"dataset", descriptor.dataset},
        {"strategy", descriptor.strategy.label()},
        {"policy", descriptor.policy.label()},
        {"segmenter", descriptor.segmenter_label},
        {"seed", descriptor.seed},
        {"config_digest", context.config->digest()},
        {"code_version", kCodeVersion},
    };

    try {
        std::vector<SegmentationResult> results;
        nlohmann::json video_records = nlohmann::json::array();
        bool pseudo = false;
        for (const auto& video : *context.videos) {
            auto session = make_session(context.config->segmenter, video);
            SegmentationResult result =
                run_sequence(video, descriptor.strategy, descriptor.policy, *session);
            pseudo = pseudo || result.provenance.pseudo_ground_truth;

            const std::string tag = sanitize(video.sequence.video_id);
            write_run_log(run_dir / ("frames_" + tag + ".jsonl"), result);
            write_result_masks(run_dir / ("masks_" + tag + ".rle"), result);

            nlohmann::json events = nlohmann::json::array();
            for (const auto& event : result.provenance.events) {
                events.push_back(
                    {{"frame", event.frame_index},
                     {"cause", event.cause == ReinitCause::interval ? "interval" : "new_object"},
                     {"objects_seeded", event.objects_seeded}});
            }
            nlohmann::json record = {
                {"video_id", video.sequence.video_id},
                {"initial_prompt_frame", result.provenance.initial_prompt_frame},
                {"segmenter_identity", result.provenance.segmenter,},
                {"events", events},
            };
            if (result.failed_at) {
                record["failed_at"] = *result.failed_at;
                record["failure_reason"] = result.failure_reason;
            }
            video_records.push_back(std::move(record));
            results.push_back(std::move(result));
        }
        manifest["videos"] = video_records;
        manifest["pseudo_ground_truth"] = pseudo;

        std::vector<std::pair<const SegmentationResult*, const AnnotatedVideo*>> pairs;
        for (std::size_t i = 0; i < results.size(); ++i) {
            pairs.emplace_back(&results[i], &(*context.videos)[i]);
        }
        MetricsReport report = aggregate_videos(pairs, context.config->aggregation);
        if (context.dataset_config->compute_map) {
            double map_sum = 0.0;
            for (const auto& [result, gt] : pairs) {
                map_sum += mean_average_precision(*result, *gt, context.config->map_thresholds);
            }
            report.map_score = map_sum / static_cast<double>(pairs.size());
        }
        summary.metrics = report;
        manifest["metrics"] = metrics_to_json(report);
        manifest["status"] = "completed";
        summary.completed = true;

        std::map<ClassId, std::string> class_names;
        for (const auto& video : *context.videos) {
            class_names.insert(video.class_names.begin(), video.class_names.end());
        }
        std::ofstream csv(run_dir / "metrics.csv");
        write_metrics_csv(csv, report, class_names);
    } catch (const std::exception& e) {
        manifest["status"] = "failed";
        manifest["failure"] = e.what();
        summary.failure = e.what();
    }

    std::ofstream out(run_dir / "manifest.json");
    out << manifest.dump(2) << '\n';
    return summary;
}

}  // namespace

std::size_t BundleSummary::failed_count() const {
    std::size_t failed = 0;
    for (const auto& run : runs) {
        if (!run.completed && !run.skipped) ++failed;
    }
    return failed;
}

BundleSummary run_all(const ExperimentConfig& config,
                      const std::vector<RunDescriptor>& descriptors,
                      const std::filesystem::path& bundle_dir, const std::string& filter,
                      int worker_count) {
    BundleSummary bundle;
    bundle.directory = bundle_dir;
    std::filesystem::create_directories(bundle_dir / "runs");

    // Datasets load once and are shared read-only across workers.
    std::map<std::string, std::vector<AnnotatedVideo>> datasets;
    std::map<std::string, const DatasetConfig*> dataset_configs;
    for (const auto& d : config.datasets) {
        dataset_configs[d.name] = &d;
    }

    std::vector<const RunDescriptor*> selected;
    for (const auto& descriptor : descriptors) {
        if (!filter.empty() && descriptor.key().find(filter) == std::string::npos) continue;
        selected.push_back(&descriptor);
        if (!datasets.count(descriptor.dataset)) {
            datasets[descriptor.dataset] = load_dataset(*dataset_configs.at(descriptor.dataset));
        }
    }

    for (const auto& [name, videos] : datasets) {
        write_dataset_manifest(videos, bundle_dir / ("dataset_" + sanitize(name) + ".jsonl"));
    }

    std::vector<RunSummary> summaries(selected.size());
    std::atomic<std::size_t> next{0};
    // Bridge runs own a subprocess each; serialize them. Mock runs span CPUs.
    int workers = worker_count > 0 ? worker_count
                                   : (config.segmenter.kind == SegmenterConfig::Kind::bridge
                                          ? 1
                                          : static_cast<int>(std::thread::hardware_concurrency()));
    workers = std::clamp<int>(workers, 1, static_cast<int>(selected.size() ? selected.size() : 1));

    auto work = [&]() {
        while (true) {
            const std::size_t i = next.fetch_add(1);
            if (i >= selected.size()) return;
            const RunDescriptor& descriptor = *selected[i];
            const auto run_dir = bundle_dir / "runs" / descriptor.key();
            const auto manifest_path = run_dir / "manifest.json";
            if (std::filesystem::exists(manifest_path)) {
                try {
                    std::ifstream in(manifest_path);
                    nlohmann::json manifest;
                    in >> manifest;
                    if (manifest.value("status", std::string()) == "completed") {
                        RunSummary summary;
                        summary.key = descriptor.key();
                        summary.dataset = descriptor.dataset;
                        summary.method = descriptor.method_label();
                        summary.completed = true;
                        summary.skipped = true;
                        summary.metrics = metrics_from_json(manifest["metrics"]);
                        summaries[i] = std::move(summary);
                        continue;
                    }
                } catch (const std::exception&) {
                    // unreadable manifest: re-run the cell
                }
            }
            RunContext context{&config, dataset_configs.at(descriptor.dataset),
                               &datasets.at(descriptor.dataset)};
            summaries[i] = execute_run(descriptor, context, run_dir);
        }
    };

    if (workers <= 1) {
        work();
    } else {
        std::vector<std::thread> pool;
        for (int w = 0; w < workers; ++w) pool.emplace_back(work);
        for (auto& t : pool) t.join();
    }

    bundle.runs = std::move(summaries);
    emit_report(bundle_dir, "csv");
    emit_report(bundle_dir, "markdown");
    return bundle;
}

namespace {

struct ReportRow {
    std::string key;
    std::string method;
    std::string strategy;
    std::string policy;
    MetricsReport metrics;
    bool failed = false;
    std::string failure;
};

}  // namespace

void emit_report(const std::filesystem::path& bundle_dir, const std::string& format) {
    if (format != "csv" && format != "markdown") {
        throw InvalidArgument("emit_report: format must be 'csv' or 'markdown'");
    }
    const auto runs_dir = bundle_dir / "runs";
    std::map<std::string, std::vector<ReportRow>> by_dataset;
    if (std::filesystem::exists(runs_dir)) {
        std::vector<std::filesystem::path> run_dirs;
        for (const auto& entry : std::filesystem::directory_iterator(runs_dir)) {
            if (entry.is_directory()) run_dirs.push_back(entry.path());
        }
        std::sort(run_dirs.begin(), run_dirs.end());
        for (const auto& dir : run_dirs) {
            const auto manifest_path = dir / "manifest.json";
            if (!std::filesystem::exists(manifest_path)) continue;
            std::ifstream in(manifest_path);
            nlohmann::json manifest;
            try {
                in >> manifest;
            } catch (const nlohmann::json::exception&) {
                warn("skipping unreadable manifest: " + manifest_path.string());
                continue;
            }
            ReportRow row;
            row.key = manifest.value("key", dir.filename().string());
            row.strategy = manifest.value("strategy", std::string());
            row.policy = manifest.value("policy", std::string());
            row.method = manifest.value("segmenter", std::string()) + "-" + row.strategy;
            if (row.policy != "None" && !row.policy.empty()) row.method += "-" + row.policy;
            if (manifest.value("status", std::string()) == "completed") {
                row.metrics = metrics_from_json(manifest["metrics"]);
            } else {
                row.failed = true;
                row.failure = manifest.value("failure", std::string("unknown"));
            }
            by_dataset[manifest.value("dataset", std::string("?"))].push_back(std::move(row));
        }
    }

    const auto reports_dir = bundle_dir / "reports";
    std::filesystem::create_directories(reports_dir);
    const auto reference = ReferenceTable::load_default();

    if (format == "csv") {
        // Cross-dataset summary; headers survive even an empty bundle.
        std::ofstream summary(reports_dir / "summary.csv");
        summary << "dataset,method,miou,mdice,mae,phi,map,pseudo_gt,status\n";
        for (const auto& [dataset, rows] : by_dataset) {
            for (const auto& row : rows) {
                if (row.failed) {
                    summary << csv_escape(dataset) << ',' << csv_escape(row.method)
                            << ",,,,,,," << csv_escape("failed: " + row.failure) << '\n';
                    continue;
                }
                summary << csv_escape(dataset) << ',' << csv_escape(row.method) << ','
                        << fmt_pct(row.metrics.miou) << ',' << fmt_pct(row.metrics.mdice) << ','
                        << fmt_pct(row.metrics.mae) << ',' << fmt_pct(row.metrics.phi) << ','
                        << (row.metrics.map_score ? fmt_pct(*row.metrics.map_score)
                                                  : std::string())
                        << ',' << (row.metrics.pseudo_ground_truth ? "1" : "0")
                        << ",completed\n";
            }
        }
    }

    for (auto& [dataset, rows] : by_dataset) {
        std::sort(rows.begin(), rows.end(),
                  [](const ReportRow& a, const ReportRow& b) { return a.key < b.key; });
        if (format == "csv") {
            std::ofstream out(reports_dir / (sanitize(dataset) + ".csv"));
            out << "method,miou,mdice,mae,phi,map,pseudo_gt,status\n";
            for (const auto& row : rows) {
                if (row.failed) {
                    out << csv_escape(row.method) << ",,,,,,," << csv_escape("failed: " + row.failure)
                        << '\n';
                    continue;
                }
                out << csv_escape(row.method) << ',' << fmt_pct(row.metrics.miou) << ','
                    << fmt_pct(row.metrics.mdice) << ',' << fmt_pct(row.metrics.mae) << ','
                    << fmt_pct(row.metrics.phi) << ','
                    << (row.metrics.map_score ? fmt_pct(*row.metrics.map_score) : std::string())
                    << ',' << (row.metrics.pseudo_ground_truth ? "1" : "0") << ",completed\n";
            }
        } else {
            std::ofstream out(reports_dir / (sanitize(dataset) + ".md"));
            out << "## " << dataset << "\n\n";
            out << "Scores in percent. `paper` columns quote the published reference values "
                   "where a matching row exists.\n\n";
            out << "| Method | mIoU | mDice | MAE | phi | mAP | paper mIoU | paper mDice | paper mAP |\n";
            out << "|---|---|---|---|---|---|---|---|---|\n";
            for (const auto& row : rows) {
                out << "| " << row.method << " | ";
                if (row.failed) {
                    out << "failed | | | | | | | |\n";
                    continue;
                }
                out << fmt_pct2(row.metrics.miou) << " | " << fmt_pct2(row.metrics.mdice)
                    << " | " << fmt_pct2(row.metrics.mae) << " | " << fmt_pct2(row.metrics.phi)
                    << " | "
                    << (row.metrics.map_score ? fmt_pct2(*row.metrics.map_score) : std::string("-"));
                std::optional<ReferenceScore> ref;
                if (reference) {
                    // Published rows are keyed "SAM2-<Strategy>[-<Policy>]".
                    std::string method = "SAM2-" + row.strategy;
                    if (row.policy != "None" && !row.policy.empty()) method += "-" + row.policy;
                    ref = reference->lookup(dataset, method);
                }
                auto ref_cell = [](const std::optional<double>& v) {
                    return v ? std::to_string(*v).substr(0, std::to_string(*v).find('.') + 3)
                             : std::string("-");
                };
                if (ref) {
                    out << " | " << ref_cell(ref->miou) << " | " << ref_cell(ref->mdice) << " | "
                        << ref_cell(ref->map) << " |";
                } else {
                    out << " | - | - | - |";
                }
                if (row.metrics.pseudo_ground_truth) out << " (pseudo-GT)";
                out << '\n';
            }
            out << '\n';
        }
    }
}

void run_finetune(const ExperimentConfig& config, const std::filesystem::path& out_dir) {
    if (!config.finetune) throw InvalidArgument("config has no finetune section");
    const auto& section = *config.finetune;

    const DatasetConfig* dataset_config = nullptr;
    for (const auto& d : config.datasets) {
        if (d.name == section.dataset) dataset_config = &d;
    }
    if (!dataset_config) {
        throw InvalidArgument("finetune dataset '" + section.dataset + "' not declared");
    }
    auto videos = load_dataset(*dataset_config);

    std::vector<AnnotatedVideo> train_split = videos;
    std::vector<AnnotatedVideo> test_split = videos;
    if (section.base.split) {
        auto [tr, te] = split_train_test(videos, *section.base.split);
        train_split = std::move(tr);
        test_split = std::move(te);
    }

    const auto finetune_dir = out_dir / "finetune";
    std::filesystem::create_directories(finetune_dir);

    const char* regime_name =
        section.base.regime.kind == TrainingRegime::Kind::image_dense    ? "image_dense"
        : section.base.regime.kind == TrainingRegime::Kind::image_sparse ? "image_sparse"
                                                                         : "video_sparse";
    const char* prompt_name = section.base.prompt_type == FinetunePromptType::point ? "point"
                              : section.base.prompt_type == FinetunePromptType::box ? "box"
                                                                                    : "mask";

    std::ofstream table(finetune_dir / "report.csv");
    table << "variant,prompt_type,regime,miou,mdice,mae,final_loss,epochs,aborted\n";

    for (const auto& variant : section.variants) {
        FinetuneConfig ft = section.base;
        ft.trainable = named_variant(variant);
        const auto plan = build_plan(train_split, ft);

        MockTrainableRuntime runtime(ft.seed);
        const auto variant_dir = finetune_dir / sanitize(variant);
        const auto outcome = train(plan, ft, runtime, train_split, variant_dir);

        // Finetuned variants evaluate without re-initialization.
        SegmenterConfig eval_segmenter = config.segmenter;
        eval_segmenter.kind = SegmenterConfig::Kind::finetuned;
        eval_segmenter.checkpoint = outcome.checkpoint;
        PromptStrategy strategy;
        switch (ft.prompt_type) {
            case FinetunePromptType::point:
                strategy = PromptStrategy::random_points(1);
                break;
            case FinetunePromptType::box:
                strategy = PromptStrategy::box();
                break;
            case FinetunePromptType::mask:
                strategy = PromptStrategy::mask();
                break;
        }
        strategy.point_config.seed = ft.seed;

        std::vector<SegmentationResult> results;
        std::vector<std::pair<const SegmentationResult*, const AnnotatedVideo*>> pairs;
        results.reserve(test_split.size());
        for (const auto& video : test_split) {
            auto session = make_session(eval_segmenter, video);
            results.push_back(run_sequence(video, strategy, ReinitPolicy{}, *session));
        }
        for (std::size_t i = 0; i < results.size(); ++i) {
            pairs.emplace_back(&results[i], &test_split[i]);
        }
        const MetricsReport report = aggregate_videos(pairs, config.aggregation);

        table << csv_escape(variant) << ',' << prompt_name << ',' << regime_name << ','
              << fmt_pct(report.miou) << ',' << fmt_pct(report.mdice) << ','
              << fmt_pct(report.mae) << ',' << outcome.final_loss << ','
              << outcome.epochs_completed << ',' << (outcome.aborted ? "1" : "0") << '\n';
    }
}

void run_sweep(const ExperimentConfig& config, const std::filesystem::path& out_dir) {
    if (!config.sweep) throw InvalidArgument("config has no sweep section");
    const auto& section = *config.sweep;

    const DatasetConfig* dataset_config = nullptr;
    for (const auto& d : config.datasets) {
        if (d.name == section.dataset) dataset_config = &d;
    }
    if (!dataset_config) {
        throw InvalidArgument("sweep dataset '" + section.dataset + "' not declared");
    }
    auto videos = load_dataset(*dataset_config);
    if (videos.empty()) throw IntegrityError("sweep dataset loaded no videos");
    const auto& video = videos.front();
    if (section.frame_index < 0 ||
        section.frame_index >= static_cast<FrameIndex>(video.sequence.frames.size())) {
        throw InvalidArgument("sweep frame_index out of range");
    }
    const FrameRef& frame = video.sequence.frames[section.frame_index];

    std::unique_ptr<AutoMaskGenerator> generator;
    std::unique_ptr<BridgeSession> bridge_holder;
    if (config.segmenter.kind == SegmenterConfig::Kind::bridge) {
        bridge_holder = open_session(video.sequence, config.segmenter.bridge);
        generator.reset(nullptr);
    } else {
        generator = std::make_unique<MockAutoMaskGenerator>(video);
    }
    AutoMaskGenerator& gen = bridge_holder ? static_cast<AutoMaskGenerator&>(*bridge_holder)
                                           : *generator;

    const auto report = sweep(frame, section.grid, gen);
    const auto gallery_dir = out_dir / "sweep" / sanitize(section.dataset);
    write_sweep_gallery(report, gallery_dir, frame.image_locator);
}

}  // namespace surgseg
