#pragma once

#include <filesystem>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include "surgseg/dataset.hpp"
#include "surgseg/prompts.hpp"

namespace surgseg {

enum class ModuleGroup {
    mask_decoder,
    prompt_encoder,
    image_encoder,
    memory_encoder,
    memory_attention,
};

const std::vector<ModuleGroup>& all_module_groups();
std::string module_group_name(ModuleGroup group);
ModuleGroup module_group_from_name(const std::string& name);  // throws InvalidArgument

/// Named trainable-module variants: "MD", "MD+PE", "MD+PE+IE".
std::set<ModuleGroup> named_variant(const std::string& name);

struct TrainingRegime {
    enum class Kind { image_dense, image_sparse, video_sparse } kind = Kind::image_dense;
    /// Supervision stride for the sparse regimes, anchored at each video's
    /// first annotated frame.
    int stride = 4;
};

enum class FinetunePromptType { point, box, mask };

struct FinetuneConfig {
    std::set<ModuleGroup> trainable{ModuleGroup::mask_decoder};
    TrainingRegime regime;
    FinetunePromptType prompt_type = FinetunePromptType::mask;
    std::optional<SplitSpec> split;  // nullopt = official split supplied upstream
    int epochs = 10;
    double learning_rate = 1e-4;
    std::uint64_t seed = 0;

    void validate() const;  // throws InvalidArgument
    std::string variant_label() const;  // "MD", "MD+PE", ... by trainable set
};

struct PlanEntry {
    std::string video_id;
    FrameIndex frame_index = 0;
    bool supervised = false;

    bool operator==(const PlanEntry&) const = default;
};

struct TrainingPlan {
    std::vector<PlanEntry> entries;
    std::map<ModuleGroup, bool> freeze_manifest;  // true = trainable
};

/// Frame schedule per the regime plus a freeze manifest matching the
/// trainable set exactly. Videos whose sparse schedule is empty are skipped
/// with a warning.
TrainingPlan build_plan(std::span<const AnnotatedVideo> train_split,
                        const FinetuneConfig& config);

/// Runtime surface the orchestrator drives. Gradient computation lives
/// behind this interface; the mock implementation makes the orchestration
/// testable without any model runtime.
class TrainableRuntime {
public:
    virtual ~TrainableRuntime() = default;

    virtual std::vector<ModuleGroup> module_groups() const = 0;
    virtual std::size_t parameter_count(ModuleGroup group) const = 0;
    virtual void set_trainable(ModuleGroup group, bool trainable) = 0;
    virtual bool is_trainable(ModuleGroup group) const = 0;
    virtual std::uint64_t parameter_digest(ModuleGroup group) const = 0;

    /// One optimization step on a supervised frame; returns the loss
    /// (cross-entropy + soft-Dice against the frame's ground truth).
    virtual double training_step(const AnnotatedVideo& video, FrameIndex frame,
                                 std::span<const Prompt> prompts, double learning_rate) = 0;

    virtual void save_checkpoint(const std::filesystem::path& path) const = 0;
    virtual std::string identity() const = 0;
};

/// Five parameter blocks evolved by a deterministic update rule; prediction
/// quality (and therefore the loss) is a smooth function of how far the
/// trainable parameters have moved toward their targets.
class MockTrainableRuntime : public TrainableRuntime {
public:
    explicit MockTrainableRuntime(std::uint64_t seed);

    std::vector<ModuleGroup> module_groups() const override;
    std::size_t parameter_count(ModuleGroup group) const override;
    void set_trainable(ModuleGroup group, bool trainable) override;
    bool is_trainable(ModuleGroup group) const override;
    std::uint64_t parameter_digest(ModuleGroup group) const override;
    double training_step(const AnnotatedVideo& video, FrameIndex frame,
                         std::span<const Prompt> prompts, double learning_rate) override;
    void save_checkpoint(const std::filesystem::path& path) const override;
    std::string identity() const override;

    /// Training progress in [0,1]; 0 at random init, 1 at convergence.
    double capability() const;
    static double capability_from_checkpoint(const std::filesystem::path& path);

    /// Test hook: produce a non-finite loss after the given number of steps.
    void poison_after_steps(int steps) { poison_after_ = steps; }

    /// Exclude groups from the exposed surface (exercises the unknown-group
    /// error path in apply_freeze).
    void hide_group(ModuleGroup group) { hidden_.insert(group); }

private:
    std::map<ModuleGroup, std::vector<double>> params_;
    std::map<ModuleGroup, bool> trainable_;
    std::set<ModuleGroup> hidden_;
    int steps_taken_ = 0;
    std::optional<int> poison_after_;
};

struct FreezeReport {
    struct Entry {
        ModuleGroup group;
        bool trainable = false;
        std::size_t parameter_count = 0;
    };
    std::vector<Entry> entries;
};

/// Applies the manifest so exactly the listed modules are trainable. Throws
/// InvalidArgument when the manifest names a group the runtime lacks.
FreezeReport apply_freeze(TrainableRuntime& runtime,
                          const std::map<ModuleGroup, bool>& manifest);

struct TrainOutcome {
    std::filesystem::path checkpoint;
    std::filesystem::path log;
    bool aborted = false;
    std::string abort_reason;
    int epochs_completed = 0;
    double final_loss = 0.0;
};

/// Runs the plan: loss only on supervised entries, prompts per the config's
/// prompt type, line-delimited log records (epoch, step, video, frame, loss,
/// lr), checkpoint written at the end (or the last good one on divergence).
TrainOutcome train(const TrainingPlan& plan, const FinetuneConfig& config,
                   TrainableRuntime& runtime, std::span<const AnnotatedVideo> train_split,
                   const std::filesystem::path& out_dir);

}  // namespace surgseg
