// surgseg command-line frontend. Drives the shared library exclusively
// through the C API in surgseg/surgseg.h.

#include <cstdio>
#include <string>

#include <CLI11.hpp>

#include "surgseg/surgseg.h"

namespace {

int report_failure(const char* verb, surgseg_status status) {
    std::fprintf(stderr, "surgseg %s failed (status %d):\n%s\n", verb, static_cast<int>(status),
                 surgseg_last_error());
    return 1;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Config-driven benchmark harness for promptable video segmentation"};
    app.require_subcommand(1);

    std::string config_path;
    std::string bundle_dir;
    std::string filter;
    std::string format = "markdown";
    std::string out_dir;
    std::uint64_t seed_override = 0;
    bool has_seed = false;

    auto add_config = [&](CLI::App* cmd) {
        cmd->add_option("-c,--config", config_path, "experiment config (JSON)")->required();
    };

    auto* validate = app.add_subcommand("validate", "check a config and list every problem");
    add_config(validate);

    auto* run = app.add_subcommand("run", "execute the experiment matrix");
    add_config(run);
    run->add_option("-o,--out", bundle_dir, "bundle directory (default: config output_dir)");
    run->add_option("-f,--filter", filter, "substring filter over cell keys");
    run->add_option("-s,--seed", seed_override, "override the config seeds")
        ->each([&](const std::string&) { has_seed = true; });

    auto* report = app.add_subcommand("report", "regenerate reports from a bundle");
    report->add_option("-b,--bundle", bundle_dir, "bundle directory")->required();
    report->add_option("--format", format, "csv or markdown")->check(CLI::IsMember({"csv", "markdown"}));

    auto* sweep = app.add_subcommand("sweep", "run the auto-segmentation hyperparameter sweep");
    add_config(sweep);
    sweep->add_option("-o,--out", out_dir, "output directory (default: config output_dir)");

    auto* finetune = app.add_subcommand("finetune", "run the finetuning ablation matrix");
    add_config(finetune);
    finetune->add_option("-o,--out", out_dir, "output directory (default: config output_dir)");

    CLI11_PARSE(app, argc, argv);

    if (validate->parsed()) {
        surgseg_experiment* experiment = nullptr;
        surgseg_status status = surgseg_experiment_load(config_path.c_str(), &experiment);
        if (status != SURGSEG_OK) return report_failure("validate", status);
        status = surgseg_experiment_validate(experiment);
        if (status != SURGSEG_OK) {
            std::fprintf(stderr, "config is invalid:\n%s\n", surgseg_last_error());
            surgseg_experiment_free(experiment);
            return 1;
        }
        size_t cells = 0;
        surgseg_experiment_cell_count(experiment, &cells);
        std::printf("config OK: %zu matrix cells\n", cells);
        surgseg_experiment_free(experiment);
        return 0;
    }

    if (run->parsed()) {
        surgseg_experiment* experiment = nullptr;
        surgseg_status status = surgseg_experiment_load(config_path.c_str(), &experiment);
        if (status != SURGSEG_OK) return report_failure("run", status);
        size_t failed = 0;
        status = surgseg_experiment_run(experiment, bundle_dir.c_str(), filter.c_str(),
                                        has_seed ? 1 : 0, seed_override, &failed);
        surgseg_experiment_free(experiment);
        if (status != SURGSEG_OK) return report_failure("run", status);
        if (failed > 0) {
            std::fprintf(stderr, "%zu cell(s) failed; see the bundle manifests\n", failed);
            return 2;
        }
        std::printf("matrix complete\n");
        return 0;
    }

    if (report->parsed()) {
        const surgseg_status status =
            surgseg_experiment_report(bundle_dir.c_str(), format.c_str());
        if (status != SURGSEG_OK) return report_failure("report", status);
        std::printf("reports written under %s/reports\n", bundle_dir.c_str());
        return 0;
    }

    if (sweep->parsed()) {
        surgseg_experiment* experiment = nullptr;
        surgseg_status status = surgseg_experiment_load(config_path.c_str(), &experiment);
        if (status != SURGSEG_OK) return report_failure("sweep", status);
        status = surgseg_experiment_sweep(experiment, out_dir.c_str());
        surgseg_experiment_free(experiment);
        if (status != SURGSEG_OK) return report_failure("sweep", status);
        std::printf("sweep gallery written\n");
        return 0;
    }

    if (finetune->parsed()) {
        surgseg_experiment* experiment = nullptr;
        surgseg_status status = surgseg_experiment_load(config_path.c_str(), &experiment);
        if (status != SURGSEG_OK) return report_failure("finetune", status);
        status = surgseg_experiment_finetune(experiment, out_dir.c_str());
        surgseg_experiment_free(experiment);
        if (status != SURGSEG_OK) return report_failure("finetune", status);
        std::printf("finetune report written\n");
        return 0;
    }

    return 0;
}
