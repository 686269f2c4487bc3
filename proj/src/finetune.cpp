#include "surgseg/finetune.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <limits>

#include <nlohmann/json.hpp>

#include "surgseg/errors.hpp"
#include "surgseg/rng.hpp"

namespace surgseg {

const std::vector<ModuleGroup>& all_module_groups() {
    static const std::vector<ModuleGroup> groups = {
        ModuleGroup::mask_decoder, ModuleGroup::prompt_encoder, ModuleGroup::image_encoder,
        ModuleGroup::memory_encoder, ModuleGroup::memory_attention,
    };
    return groups;
}

std::string module_group_name(ModuleGroup group) {
    switch (group) {
        case ModuleGroup::mask_decoder: return "mask_decoder";
        case ModuleGroup::prompt_encoder: return "prompt_encoder";
        case ModuleGroup::image_encoder: return "image_encoder";
        case ModuleGroup::memory_encoder: return "memory_encoder";
        case ModuleGroup::memory_attention: return "memory_attention";
    }
    return "?";
}

ModuleGroup module_group_from_name(const std::string& name) {
    for (ModuleGroup group : all_module_groups()) {
        if (module_group_name(group) == name) return group;
    }
    throw InvalidArgument("unknown module group '" + name + "'");
}

std::set<ModuleGroup> named_variant(const std::string& name) {
    if (name == "MD") return {ModuleGroup::mask_decoder};
    if (name == "MD+PE") return {ModuleGroup::mask_decoder, ModuleGroup::prompt_encoder};
    if (name == "MD+PE+IE") {
        return {ModuleGroup::mask_decoder, ModuleGroup::prompt_encoder,
                ModuleGroup::image_encoder};
    }
    throw InvalidArgument("unknown finetune variant '" + name + "' (expected MD, MD+PE, MD+PE+IE)");
}

void FinetuneConfig::validate() const {
    if (trainable.empty()) throw InvalidArgument("finetune: trainable set must be non-empty");
    if (regime.kind == TrainingRegime::Kind::image_sparse && regime.stride < 2) {
        throw InvalidArgument("finetune: image_sparse stride must be >= 2");
    }
    if (regime.stride < 1) throw InvalidArgument("finetune: stride must be >= 1");
    if (epochs < 1) throw InvalidArgument("finetune: epochs must be >= 1");
    if (!(learning_rate > 0)) throw InvalidArgument("finetune: learning_rate must be positive");
}

std::string FinetuneConfig::variant_label() const {
    static const std::vector<std::pair<ModuleGroup, std::string>> order = {
        {ModuleGroup::mask_decoder, "MD"},      {ModuleGroup::prompt_encoder, "PE"},
        {ModuleGroup::image_encoder, "IE"},     {ModuleGroup::memory_encoder, "ME"},
        {ModuleGroup::memory_attention, "MA"},
    };
    std::string label;
    for (const auto& [group, tag] : order) {
        if (!trainable.count(group)) continue;
        if (!label.empty()) label += '+';
        label += tag;
    }
    return label;
}

TrainingPlan build_plan(std::span<const AnnotatedVideo> train_split,
                        const FinetuneConfig& config) {
    config.validate();
    if (train_split.empty()) throw InvalidArgument("build_plan: empty train split");

    TrainingPlan plan;
    for (ModuleGroup group : all_module_groups()) {
        plan.freeze_manifest[group] = config.trainable.count(group) > 0;
    }

    for (const auto& video : train_split) {
        const auto annotated = video.annotated_frames();
        if (annotated.empty()) {
            warn("build_plan: video '" + video.sequence.video_id +
                 "' has no annotated frames; skipped");
            continue;
        }
        const FrameIndex anchor = annotated.front();
        std::set<FrameIndex> sparse;
        for (FrameIndex f : annotated) {
            if ((f - anchor) % config.regime.stride == 0) sparse.insert(f);
        }

        switch (config.regime.kind) {
            case TrainingRegime::Kind::image_dense:
                for (FrameIndex f : annotated) {
                    plan.entries.push_back({video.sequence.video_id, f, true});
                }
                break;
            case TrainingRegime::Kind::image_sparse: {
                if (sparse.empty()) {
                    warn("build_plan: sparse schedule empty for video '" +
                         video.sequence.video_id + "'; skipped");
                    continue;
                }
                for (FrameIndex f : sparse) {
                    plan.entries.push_back({video.sequence.video_id, f, true});
                }
                break;
            }
            case TrainingRegime::Kind::video_sparse:
                if (sparse.empty()) {
                    warn("build_plan: sparse schedule empty for video '" +
                         video.sequence.video_id + "'; skipped");
                    continue;
                }
                for (const auto& frame : video.sequence.frames) {
                    plan.entries.push_back(
                        {video.sequence.video_id, frame.index, sparse.count(frame.index) > 0});
                }
                break;
        }
    }
    return plan;
}

MockTrainableRuntime::MockTrainableRuntime(std::uint64_t seed) {
    static const std::map<ModuleGroup, std::size_t> sizes = {
        {ModuleGroup::mask_decoder, 256},    {ModuleGroup::prompt_encoder, 64},
        {ModuleGroup::image_encoder, 4096},  {ModuleGroup::memory_encoder, 512},
        {ModuleGroup::memory_attention, 768},
    };
    Rng rng(mix_seed(seed, 0x7261696e));
    for (const auto& [group, size] : sizes) {
        auto& p = params_[group];
        p.resize(size);
        for (auto& v : p) {
            v = static_cast<double>(rng.below(1u << 20)) / static_cast<double>(1u << 20);
        }
        trainable_[group] = false;
    }
}

std::vector<ModuleGroup> MockTrainableRuntime::module_groups() const {
    std::vector<ModuleGroup> groups;
    for (const auto& [group, p] : params_) {
        if (!hidden_.count(group)) groups.push_back(group);
    }
    return groups;
}

std::size_t MockTrainableRuntime::parameter_count(ModuleGroup group) const {
    return params_.at(group).size();
}

void MockTrainableRuntime::set_trainable(ModuleGroup group, bool trainable) {
    if (hidden_.count(group)) {
        throw InvalidArgument("runtime does not expose module group '" +
                              module_group_name(group) + "'");
    }
    trainable_.at(group) = trainable;
}

bool MockTrainableRuntime::is_trainable(ModuleGroup group) const {
    return trainable_.at(group);
}

std::uint64_t MockTrainableRuntime::parameter_digest(ModuleGroup group) const {
    const auto& p = params_.at(group);
    return fnv1a(p.data(), p.size() * sizeof(double));
}

double MockTrainableRuntime::capability() const {
    // Mean closeness of the parameters to the convergence target 0.5.
    double distance = 0.0;
    std::size_t n = 0;
    for (const auto& [group, p] : params_) {
        for (double v : p) distance += std::abs(v - 0.5);
        n += p.size();
    }
    const double mean = distance / static_cast<double>(n);
    return std::clamp(1.0 - 4.0 * mean, 0.0, 1.0);
}

namespace {

double prompt_step_scale(std::span<const Prompt> prompts) {
    // Richer prompts supervise better: mask > box > point.
    double scale = 0.0;
    for (const auto& p : prompts) {
        if (std::holds_alternative<MaskPrompt>(p)) scale = std::max(scale, 1.0);
        else if (std::holds_alternative<BoxPrompt>(p)) scale = std::max(scale, 0.9);
        else scale = std::max(scale, 0.75);
    }
    return scale == 0.0 ? 0.75 : scale;
}

double soft_loss(const AnnotatedVideo& video, FrameIndex frame, double capability) {
    const auto it = video.annotations.find(frame);
    std::uint64_t fg = 0;
    std::uint64_t total = 0;
    if (it != video.annotations.end()) {
        for (const auto& ann : it->second) fg += ann.mask.foreground_count();
        const auto [w, h] = video.frame_size();
        total = static_cast<std::uint64_t>(w) * h;
    }
    if (total == 0) total = 1;
    const double eps = 1e-6;
    const double p_fg = std::clamp(0.5 + 0.5 * capability, eps, 1.0 - eps);
    const double p_bg = 1.0 - p_fg;
    const double fg_fraction = static_cast<double>(fg) / static_cast<double>(total);
    // Pixelwise cross-entropy against the binary ground truth...
    const double ce = -(fg_fraction * std::log(p_fg) + (1.0 - fg_fraction) * std::log(1.0 - p_bg));
    // ...plus soft-Dice, equal weights.
    const double dice = 2.0 * p_fg * fg_fraction / (p_fg + fg_fraction + eps);
    return ce + (1.0 - dice);
}

}  // namespace

double MockTrainableRuntime::training_step(const AnnotatedVideo& video, FrameIndex frame,
                                           std::span<const Prompt> prompts,
                                           double learning_rate) {
    ++steps_taken_;
    if (poison_after_ && steps_taken_ > *poison_after_) {
        return std::numeric_limits<double>::quiet_NaN();
    }
    const double scale = prompt_step_scale(prompts);
    for (auto& [group, p] : params_) {
        if (!trainable_.at(group)) continue;
        for (auto& v : p) v += learning_rate * scale * (0.5 - v);
    }
    return soft_loss(video, frame, capability());
}

void MockTrainableRuntime::save_checkpoint(const std::filesystem::path& path) const {
    nlohmann::json j;
    j["format"] = "surgseg-mock-runtime";
    j["capability"] = capability();
    for (const auto& [group, p] : params_) {
        j["modules"][module_group_name(group)] = {
            {"parameters", p},
            {"trainable", trainable_.at(group)},
        };
    }
    std::ofstream out(path);
    if (!out) throw IoError("cannot write checkpoint: " + path.string());
    out << j.dump() << '\n';
}

double MockTrainableRuntime::capability_from_checkpoint(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw IoError("cannot read checkpoint: " + path.string());
    nlohmann::json j;
    try {
        in >> j;
    } catch (const nlohmann::json::exception& e) {
        throw ParseError("invalid checkpoint " + path.string() + ": " + e.what());
    }
    if (j.value("format", std::string()) != "surgseg-mock-runtime") {
        throw ParseError("checkpoint " + path.string() + " has an unknown format");
    }
    return j.at("capability").get<double>();
}

std::string MockTrainableRuntime::identity() const { return "mock-runtime"; }

FreezeReport apply_freeze(TrainableRuntime& runtime,
                          const std::map<ModuleGroup, bool>& manifest) {
    const auto exposed = runtime.module_groups();
    for (const auto& [group, trainable] : manifest) {
        if (std::find(exposed.begin(), exposed.end(), group) == exposed.end()) {
            throw InvalidArgument("apply_freeze: runtime does not expose module group '" +
                                  module_group_name(group) + "'");
        }
    }
    for (ModuleGroup group : exposed) {
        const auto it = manifest.find(group);
        runtime.set_trainable(group, it != manifest.end() && it->second);
    }
    FreezeReport report;
    for (ModuleGroup group : exposed) {
        report.entries.push_back(
            {group, runtime.is_trainable(group), runtime.parameter_count(group)});
    }
    return report;
}

TrainOutcome train(const TrainingPlan& plan, const FinetuneConfig& config,
                   TrainableRuntime& runtime, std::span<const AnnotatedVideo> train_split,
                   const std::filesystem::path& out_dir) {
    config.validate();
    if (plan.entries.empty()) throw InvalidArgument("train: empty training plan");

    std::filesystem::create_directories(out_dir);
    const auto checkpoint_path = out_dir / "checkpoint.json";
    const auto last_good_path = out_dir / "checkpoint.last_good.json";
    const auto log_path = out_dir / "training_log.jsonl";
    std::ofstream log(log_path);
    if (!log) throw IoError("cannot write training log: " + log_path.string());

    std::map<std::string, const AnnotatedVideo*> by_id;
    for (const auto& video : train_split) by_id[video.sequence.video_id] = &video;

    apply_freeze(runtime, plan.freeze_manifest);

    PromptStrategy strategy;
    switch (config.prompt_type) {
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
    strategy.point_config.seed = config.seed;

    TrainOutcome outcome;
    outcome.checkpoint = checkpoint_path;
    outcome.log = log_path;
    runtime.save_checkpoint(last_good_path);

    double last_loss = 0.0;
    for (int epoch = 0; epoch < config.epochs; ++epoch) {
        int step = 0;
        double epoch_loss = 0.0;
        int supervised_steps = 0;
        for (const auto& entry : plan.entries) {
            const auto it = by_id.find(entry.video_id);
            if (it == by_id.end()) {
                throw IntegrityError("train: plan references unknown video '" + entry.video_id +
                                     "'");
            }
            ++step;
            if (!entry.supervised) continue;  // video_sparse context frames carry no loss
            const auto prompts = build_prompt_set(*it->second, entry.frame_index, strategy);
            const double loss =
                runtime.training_step(*it->second, entry.frame_index, prompts,
                                      config.learning_rate);
            if (!std::isfinite(loss)) {
                outcome.aborted = true;
                outcome.abort_reason = "non-finite loss at epoch " + std::to_string(epoch) +
                                       " step " + std::to_string(step);
                log << nlohmann::json{{"event", "abort"},
                                      {"epoch", epoch},
                                      {"step", step},
                                      {"reason", outcome.abort_reason}}
                           .dump()
                    << '\n';
                outcome.checkpoint = last_good_path;
                outcome.final_loss = last_loss;
                return outcome;
            }
            last_loss = loss;
            epoch_loss += loss;
            ++supervised_steps;
            log << nlohmann::json{{"event", "step"},
                                  {"epoch", epoch},
                                  {"step", step},
                                  {"video", entry.video_id},
                                  {"frame", entry.frame_index},
                                  {"loss", loss},
                                  {"lr", config.learning_rate}}
                       .dump()
                << '\n';
        }
        outcome.epochs_completed = epoch + 1;
        log << nlohmann::json{{"event", "epoch"},
                              {"epoch", epoch},
                              {"mean_loss",
                               supervised_steps ? epoch_loss / supervised_steps : 0.0},
                              {"supervised_steps", supervised_steps}}
                   .dump()
            << '\n';
        runtime.save_checkpoint(last_good_path);
    }
    runtime.save_checkpoint(checkpoint_path);
    outcome.final_loss = last_loss;
    return outcome;
}

}  // namespace surgseg
