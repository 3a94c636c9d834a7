#pragma once

#include <filesystem>
#include <nlohmann/json.hpp>
#include <optional>
#include <string>
#include <vector>

#include "spmine/config.hpp"
#include "spmine/llmclient.hpp"

namespace spmine {

inline constexpr const char* kVersion = "0.1.0";

// Everything a stage needs. `transport` may be null: replay never touches it and
// live/record then open an HttpTransport from the provider settings.
struct StageContext {
    PipelineConfig config;
    std::filesystem::path out;
    Transport* transport = nullptr;
    Clock* clock = nullptr;
    bool force = false;  // ignore cached outputs
};

struct StageOutcome {
    std::string stage;
    bool skipped = false;  // inputs unchanged since the last run
    std::vector<std::filesystem::path> outputs;
    std::vector<std::string> warnings;
    nlohmann::ordered_json summary;
};

enum class FineTuneTask { crc, tm };
enum class EvalTask { crc, tm };
enum class ReportKind { ratios, themes, trends, loss };

// Output files, relative to the output directory.
namespace files {
inline constexpr const char* corpus = "corpus.jsonl";
inline constexpr const char* preprocessed = "preprocessed.jsonl";
inline constexpr const char* preprocess_stats = "preprocess_stats.json";
inline constexpr const char* crc_train = "finetune/crc_train.jsonl";
inline constexpr const char* crc_validation = "finetune/crc_validation.jsonl";
inline constexpr const char* tm_train = "finetune/tm_train.jsonl";
inline constexpr const char* tm_validation = "finetune/tm_validation.jsonl";
inline constexpr const char* sweep = "sweep.json";
inline constexpr const char* classified = "classified.jsonl";
inline constexpr const char* mapped = "mapped.jsonl";
inline constexpr const char* issue_mappings = "issue_mappings.jsonl";
inline constexpr const char* loss = "loss.jsonl";
inline constexpr const char* eval_crc = "eval_crc.json";
inline constexpr const char* eval_tm = "eval_tm.json";
inline constexpr const char* stats = "stats.json";
inline constexpr const char* manifests = "manifests";
}  // namespace files

StageOutcome run_ingest(const StageContext& ctx);
StageOutcome run_preprocess(const StageContext& ctx);
StageOutcome run_build_finetune(const StageContext& ctx, FineTuneTask task);
StageOutcome run_sweep_temperature(const StageContext& ctx);
StageOutcome run_classify(const StageContext& ctx);
StageOutcome run_map_themes(const StageContext& ctx);
StageOutcome run_classify_loss(const StageContext& ctx);
StageOutcome run_evaluate(const StageContext& ctx, EvalTask task);
// `counts`: optional JSON array of {category, concerned, total} used instead of
// classified output for the proportion tests.
StageOutcome run_stats(const StageContext& ctx, const std::optional<std::filesystem::path>& counts = std::nullopt);
StageOutcome run_report(const StageContext& ctx, ReportKind kind,
                        const std::optional<std::filesystem::path>& counts = std::nullopt);

// Per-category {concerned, total} from a counts file.
std::vector<CategoryRatio> load_category_counts(const std::filesystem::path& path);

}  // namespace spmine
