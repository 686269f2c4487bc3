#pragma once

#include <filesystem>
#include <map>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "surgseg/autoseg.hpp"
#include "surgseg/bridge.hpp"
#include "surgseg/finetune.hpp"
#include "surgseg/metrics.hpp"
#include "surgseg/mock_segmenter.hpp"
#include "surgseg/reference.hpp"
#include "surgseg/synthetic.hpp"

namespace surgseg {

inline constexpr const char* kCodeVersion = "surgseg 0.1.0";
inline constexpr int kConfigSchemaVersion = 1;

struct DatasetConfig {
    std::string name;
    enum class Adapter { synthetic, coco, pixel_masks } adapter = Adapter::synthetic;
    // synthetic
    SyntheticVideoSpec synthetic;
    // coco
    std::filesystem::path annotations;
    std::string image_root;
    // pixel_masks
    std::filesystem::path masks_dir;
    std::filesystem::path palette;
    double source_fps = 1.0;
    /// Frame sampling applied after loading; nullopt keeps the native rate.
    std::optional<double> target_fps;
    bool compute_map = false;
};

struct SegmenterConfig {
    enum class Kind { mock, bridge, finetuned } kind = Kind::mock;
    DriftModel drift;                  // mock + finetuned base drift
    BridgeConfig bridge;               // bridge
    std::filesystem::path checkpoint;  // finetuned

    std::string label() const;
};

struct FinetuneSection {
    std::string dataset;
    std::vector<std::string> variants{"MD", "MD+PE", "MD+PE+IE"};
    FinetuneConfig base;
};

struct SweepSection {
    std::string dataset;
    FrameIndex frame_index = 0;
    std::vector<AutoSegConfig> grid;
};

struct ExperimentConfig {
    int schema_version = kConfigSchemaVersion;
    std::vector<std::uint64_t> seeds{0};
    std::filesystem::path output_dir = "out";
    std::vector<DatasetConfig> datasets;
    std::vector<PromptStrategy> strategies;
    std::vector<ReinitPolicy> policies;
    SegmenterConfig segmenter;
    AggregationOrder aggregation = AggregationOrder::per_class_over_video;
    std::vector<double> map_thresholds{0.5};
    std::optional<FinetuneSection> finetune;
    std::optional<SweepSection> sweep;

    nlohmann::json source;  // the parsed document, for digesting

    static ExperimentConfig parse(const nlohmann::json& document);
    static ExperimentConfig load(const std::filesystem::path& path);

    /// Every problem found, not just the first; empty means valid.
    std::vector<std::string> validate() const;

    std::string digest() const;
};

struct RunDescriptor {
    std::string dataset;
    PromptStrategy strategy;
    ReinitPolicy policy;
    std::string segmenter_label;
    std::uint64_t seed = 0;

    /// Unique, filesystem-safe cell key.
    std::string key() const;
    /// Report row label, e.g. "SAM2-Mask-Reinit 30" shaped.
    std::string method_label() const;
};

/// Cartesian product of the config axes, deduplicated by key, in
/// deterministic order. Throws InvalidArgument listing all validation
/// failures when the config is invalid.
std::vector<RunDescriptor> expand_matrix(const ExperimentConfig& config);

struct RunSummary {
    std::string key;
    std::string dataset;
    std::string method;
    bool completed = false;
    bool skipped = false;  // already present in the bundle
    std::string failure;
    std::optional<MetricsReport> metrics;
};

struct BundleSummary {
    std::filesystem::path directory;
    std::vector<RunSummary> runs;

    std::size_t failed_count() const;
};

/// Executes the descriptors against the config's segmenter, persisting each
/// run (manifest, metrics CSV, masks, run log) under its key. Cells already
/// completed in the bundle are skipped; failures are recorded and do not
/// abort the bundle. `filter` is a substring match on the key.
BundleSummary run_all(const ExperimentConfig& config,
                      const std::vector<RunDescriptor>& descriptors,
                      const std::filesystem::path& bundle_dir, const std::string& filter = {},
                      int worker_count = 0);

/// Regenerates reports/<dataset>.{csv,md} from the bundle's manifests; the
/// markdown includes reference columns where published values exist.
void emit_report(const std::filesystem::path& bundle_dir, const std::string& format);

/// Loads the datasets declared in the config (adapter dispatch + sampling).
std::vector<AnnotatedVideo> load_dataset(const DatasetConfig& config);

/// Runs the config's finetune section: per variant, split, plan, train, then
/// test-split evaluation without re-initialization; writes a Table-2-shaped
/// report under out_dir/finetune.
void run_finetune(const ExperimentConfig& config, const std::filesystem::path& out_dir);

/// Runs the config's sweep section and writes the gallery + index.
void run_sweep(const ExperimentConfig& config, const std::filesystem::path& out_dir);

}  // namespace surgseg
