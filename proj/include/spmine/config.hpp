#pragma once

#include <chrono>
#include <cstdint>
#include <filesystem>
#include <nlohmann/json.hpp>
#include <optional>
#include <string>

#include "spmine/llmclient.hpp"
#include "spmine/report.hpp"
#include "spmine/stats.hpp"

namespace spmine {

struct ProviderConfig {
    std::string base_url = "https://api.openai.com/v1";
    std::string api_key_env = "OPENAI_API_KEY";
    std::string crc_model = "gpt-3.5-turbo";
    std::string tm_model = "gpt-3.5-turbo";
    std::string loss_model = "gpt-4o-mini";
    std::string embedding_model = "text-embedding-3-small";
    std::chrono::seconds timeout{60};
};

enum class SimilarityKind { tfidf, dense };

struct PathsConfig {
    std::filesystem::path corpus;       // raw reviews, CSV or JSON lines
    std::filesystem::path labeled;      // CRC labels (training pool)
    std::filesystem::path gold;         // CRC labels to evaluate against
    std::filesystem::path tm_labeled;   // issue -> themes (training pool)
    std::filesystem::path tm_gold;      // issue -> themes to evaluate against
    std::filesystem::path taxonomy;     // empty: built-in 28 themes
};

struct PipelineConfig {
    ProviderConfig provider;
    RetryPolicy retry;
    BatchOptions batch;
    Mode mode = Mode::replay;
    std::filesystem::path cassette;
    std::uint64_t seed = 0;
    std::filesystem::path out = "out";
    PathsConfig paths;
    double train_fraction = 0.8;
    double temperature = 0.0;
    SimilarityKind crc_similarity = SimilarityKind::dense;
    std::size_t tm_examples = 5;
    bool embed_score = true;  // sentence-embedding similarity in CRC evaluation
    bool continuity = true;
    LeveneCenter levene_center = LeveneCenter::mean;
    CountMode count_mode = CountMode::per_review;
    std::size_t top_k = 3;

    // Directory of the config file; relative paths are resolved against it.
    std::filesystem::path base_dir;

    std::filesystem::path resolve(const std::filesystem::path& p) const {
        return p.empty() || p.is_absolute() ? p : base_dir / p;
    }
};

// INI file: `[section]` headers, `key = value` lines, `;` or `#` comments.
// Throws UsageError for unknown keys or bad values.
PipelineConfig load_config(const std::filesystem::path& path);
PipelineConfig parse_config(const std::string& text, const std::filesystem::path& base_dir = {});

// Canonical JSON of every setting, paths as written; recorded in manifests.
// The output directory and base directory are left out.
nlohmann::ordered_json to_json(const PipelineConfig& config);

}  // namespace spmine
