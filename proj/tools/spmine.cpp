// spmine: command-line driver for the review-mining pipeline.

#include <CLI11.hpp>
#include <fmt/format.h>
#include <spdlog/spdlog.h>

#include <iostream>
#include <nlohmann/json.hpp>
#include <optional>

#include "spmine/config.hpp"
#include "spmine/error.hpp"
#include "spmine/pipeline.hpp"

namespace {

int exit_code(spmine::ErrorFamily f) {
    switch (f) {
        case spmine::ErrorFamily::usage: return 1;
        case spmine::ErrorFamily::data: return 2;
        case spmine::ErrorFamily::provider: return 3;
    }
    return 2;
}

void print_error(const std::string& kind, const std::string& message, int code) {
    nlohmann::ordered_json j;
    j["error"] = kind;
    j["message"] = message;
    j["exit_code"] = code;
    std::cerr << j.dump() << "\n";
}

void print_outcome(const spmine::StageOutcome& o) {
    nlohmann::ordered_json j;
    j["stage"] = o.stage;
    j["skipped"] = o.skipped;
    j["outputs"] = nlohmann::ordered_json::array();
    for (const auto& p : o.outputs) j["outputs"].push_back(p.generic_string());
    j["summary"] = o.summary;
    if (!o.warnings.empty()) j["warnings"] = o.warnings;
    std::cout << j.dump(2) << "\n";
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Security and privacy concern mining for smart-device reviews"};
    app.require_subcommand(1);
    app.set_version_flag("--version", spmine::kVersion);

    std::string config_path;
    std::optional<std::uint64_t> seed;
    std::string mode;
    std::string out;
    bool force = false;
    bool verbose = false;
    app.add_option("--config", config_path, "INI configuration file")->check(CLI::ExistingFile);
    app.add_option("--seed", seed, "Root seed for splits and example ordering");
    app.add_option("--mode", mode, "Provider mode")->check(CLI::IsMember({"live", "record", "replay"}));
    app.add_option("--out", out, "Output directory");
    app.add_flag("--force", force, "Recompute even when inputs are unchanged");
    app.add_flag("-v,--verbose", verbose, "Debug logging");

    auto* ingest = app.add_subcommand("ingest", "Read the raw review file into corpus.jsonl");
    auto* preprocess = app.add_subcommand("preprocess", "Drop empty, non-English and duplicate reviews");
    auto* finetune = app.add_subcommand("build-finetune", "Write chat JSONL fine-tuning files");
    std::string ft_task;
    finetune->add_option("task", ft_task, "crc or tm")->required()->check(CLI::IsMember({"crc", "tm"}));
    auto* sweep = app.add_subcommand("sweep-temperature", "Score Task 1 on the validation split per temperature");
    auto* classify = app.add_subcommand("classify", "Run the CRC model over the preprocessed corpus");
    auto* map_themes = app.add_subcommand("map-themes", "Map every low-level issue to high-level themes");
    auto* classify_loss = app.add_subcommand("classify-loss", "Classify concerned reviews for customer loss");
    auto* evaluate = app.add_subcommand("evaluate", "Score predictions against gold labels");
    std::string eval_task;
    evaluate->add_option("task", eval_task, "crc or tm")->required()->check(CLI::IsMember({"crc", "tm"}));
    auto* stats = app.add_subcommand("stats", "Proportion tests and rating correlations");
    std::string stats_counts;
    stats->add_option("--counts", stats_counts, "Per-category counts JSON instead of classified output")
        ->check(CLI::ExistingFile);
    auto* report = app.add_subcommand("report", "Write report tables");
    std::string report_kind;
    std::string report_counts;
    report->add_option("kind", report_kind, "ratios, themes, trends or loss")
        ->required()
        ->check(CLI::IsMember({"ratios", "themes", "trends", "loss"}));
    report->add_option("--counts", report_counts, "Per-category counts JSON (ratios only)")->check(CLI::ExistingFile);

    try {
        app.parse(argc, argv);
    } catch (const CLI::CallForHelp& e) {
        return app.exit(e);
    } catch (const CLI::CallForVersion& e) {
        return app.exit(e);
    } catch (const CLI::ParseError& e) {
        print_error("UsageError", e.what(), 1);
        return 1;
    }

    spdlog::set_level(verbose ? spdlog::level::debug : spdlog::level::warn);

    try {
        spmine::StageContext ctx;
        if (!config_path.empty()) ctx.config = spmine::load_config(config_path);
        if (seed) ctx.config.seed = *seed;
        if (!mode.empty()) ctx.config.mode = spmine::parse_mode(mode);
        ctx.out = out.empty() ? ctx.config.resolve(ctx.config.out) : std::filesystem::path(out);
        ctx.force = force;

        std::optional<std::filesystem::path> counts;
        spmine::StageOutcome outcome;
        if (ingest->parsed()) {
            outcome = spmine::run_ingest(ctx);
        } else if (preprocess->parsed()) {
            outcome = spmine::run_preprocess(ctx);
        } else if (finetune->parsed()) {
            outcome = spmine::run_build_finetune(ctx, ft_task == "crc" ? spmine::FineTuneTask::crc
                                                                        : spmine::FineTuneTask::tm);
        } else if (sweep->parsed()) {
            outcome = spmine::run_sweep_temperature(ctx);
        } else if (classify->parsed()) {
            outcome = spmine::run_classify(ctx);
        } else if (map_themes->parsed()) {
            outcome = spmine::run_map_themes(ctx);
        } else if (classify_loss->parsed()) {
            outcome = spmine::run_classify_loss(ctx);
        } else if (evaluate->parsed()) {
            outcome = spmine::run_evaluate(ctx, eval_task == "crc" ? spmine::EvalTask::crc : spmine::EvalTask::tm);
        } else if (stats->parsed()) {
            if (!stats_counts.empty()) counts = stats_counts;
            outcome = spmine::run_stats(ctx, counts);
        } else if (report->parsed()) {
            if (!report_counts.empty()) {
                if (report_kind != "ratios") throw spmine::UsageError("--counts only applies to report ratios");
                counts = report_counts;
            }
            const auto kind = report_kind == "ratios"   ? spmine::ReportKind::ratios
                              : report_kind == "themes" ? spmine::ReportKind::themes
                              : report_kind == "trends" ? spmine::ReportKind::trends
                                                        : spmine::ReportKind::loss;
            outcome = spmine::run_report(ctx, kind, counts);
        }
        print_outcome(outcome);
        return 0;
    } catch (const spmine::Error& e) {
        const int code = exit_code(e.family());
        print_error(e.kind(), e.what(), code);
        return code;
    } catch (const nlohmann::json::exception& e) {
        print_error("MalformedRecord", e.what(), 2);
        return 2;
    } catch (const std::filesystem::filesystem_error& e) {
        print_error("IoError", e.what(), 2);
        return 2;
    } catch (const std::exception& e) {
        print_error("InternalError", e.what(), 2);
        return 2;
    }
}
