#include "spmine/config.hpp"

#include <boost/property_tree/ini_parser.hpp>
#include <boost/property_tree/ptree.hpp>
#include <fstream>
#include <set>
#include <sstream>

#include "spmine/error.hpp"
#include "spmine/text.hpp"

namespace spmine {

namespace pt = boost::property_tree;

namespace {

const std::set<std::string>& known_keys() {
    static const std::set<std::string> keys = {
        "provider.base_url",     "provider.api_key_env",     "provider.crc_model",   "provider.tm_model",
        "provider.loss_model",   "provider.embedding_model", "provider.timeout",     "rate.max_in_flight",
        "rate.tokens_per_minute", "rate.chars_per_token",    "rate.max_attempts",    "rate.base_delay",
        "rate.factor",           "rate.jitter",              "rate.max_delay",       "run.mode",
        "run.cassette",          "run.seed",                 "run.out",              "run.train_fraction",
        "run.temperature",       "paths.corpus",             "paths.labeled",        "paths.gold",
        "paths.tm_labeled",      "paths.tm_gold",            "paths.taxonomy",       "prompting.crc_similarity",
        "prompting.tm_examples", "stats.continuity",         "stats.levene_center",  "report.count_mode",
        "report.top_k",           "eval.embed_score",
    };
    return keys;
}

template <typename T>
void read(const pt::ptree& tree, const std::string& key, T& target) {
    const auto node = tree.get_optional<std::string>(key);
    if (!node) return;
    const auto raw = std::string(text::trim(*node));
    std::istringstream in(raw);
    T value{};
    in >> value;
    if (in.fail() || !in.eof()) throw UsageError("config: bad value for " + key + ": '" + raw + "'");
    target = value;
}

void read_string(const pt::ptree& tree, const std::string& key, std::string& target) {
    if (const auto node = tree.get_optional<std::string>(key)) target = std::string(text::trim(*node));
}

void read_path(const pt::ptree& tree, const std::string& key, std::filesystem::path& target) {
    if (const auto node = tree.get_optional<std::string>(key)) target = std::string(text::trim(*node));
}

bool parse_bool(const std::string& key, const std::string& raw) {
    const auto v = text::to_lower(text::trim(raw));
    if (v == "true" || v == "yes" || v == "1" || v == "on") return true;
    if (v == "false" || v == "no" || v == "0" || v == "off") return false;
    throw UsageError("config: bad boolean for " + key + ": '" + raw + "'");
}

}  // namespace

PipelineConfig parse_config(const std::string& content, const std::filesystem::path& base_dir) {
    pt::ptree tree;
    std::istringstream in(content);
    try {
        pt::read_ini(in, tree);
    } catch (const pt::ini_parser_error& e) {
        throw UsageError(std::string("config: ") + e.what());
    }
    for (const auto& [section, body] : tree) {
        if (body.empty()) throw UsageError("config: key '" + section + "' outside a section");
        for (const auto& [key, _] : body) {
            const auto full = section + "." + key;
            if (!known_keys().count(full)) throw UsageError("config: unknown key " + full);
        }
    }

    PipelineConfig c;
    c.base_dir = base_dir;
    read_string(tree, "provider.base_url", c.provider.base_url);
    read_string(tree, "provider.api_key_env", c.provider.api_key_env);
    read_string(tree, "provider.crc_model", c.provider.crc_model);
    read_string(tree, "provider.tm_model", c.provider.tm_model);
    read_string(tree, "provider.loss_model", c.provider.loss_model);
    read_string(tree, "provider.embedding_model", c.provider.embedding_model);
    long timeout = c.provider.timeout.count();
    read(tree, "provider.timeout", timeout);
    c.provider.timeout = std::chrono::seconds(timeout);

    read(tree, "rate.max_in_flight", c.batch.max_in_flight);
    read(tree, "rate.tokens_per_minute", c.batch.tokens_per_minute);
    read(tree, "rate.chars_per_token", c.batch.chars_per_token);
    read(tree, "rate.max_attempts", c.retry.max_attempts);
    read(tree, "rate.base_delay", c.retry.base_delay_s);
    read(tree, "rate.factor", c.retry.factor);
    read(tree, "rate.jitter", c.retry.jitter);
    read(tree, "rate.max_delay", c.retry.max_delay_s);

    if (const auto m = tree.get_optional<std::string>("run.mode")) {
        try {
            c.mode = parse_mode(text::trim(*m));
        } catch (const Error& e) {
            throw UsageError(std::string("config: ") + e.what());
        }
    }
    read_path(tree, "run.cassette", c.cassette);
    read(tree, "run.seed", c.seed);
    read_path(tree, "run.out", c.out);
    read(tree, "run.train_fraction", c.train_fraction);
    read(tree, "run.temperature", c.temperature);

    read_path(tree, "paths.corpus", c.paths.corpus);
    read_path(tree, "paths.labeled", c.paths.labeled);
    read_path(tree, "paths.gold", c.paths.gold);
    read_path(tree, "paths.tm_labeled", c.paths.tm_labeled);
    read_path(tree, "paths.tm_gold", c.paths.tm_gold);
    read_path(tree, "paths.taxonomy", c.paths.taxonomy);

    if (const auto v = tree.get_optional<std::string>("prompting.crc_similarity")) {
        const auto s = text::to_lower(text::trim(*v));
        if (s == "tfidf") c.crc_similarity = SimilarityKind::tfidf;
        else if (s == "dense") c.crc_similarity = SimilarityKind::dense;
        else throw UsageError("config: prompting.crc_similarity must be tfidf or dense");
    }
    read(tree, "prompting.tm_examples", c.tm_examples);

    if (const auto v = tree.get_optional<std::string>("eval.embed_score")) c.embed_score = parse_bool("eval.embed_score", *v);
    if (const auto v = tree.get_optional<std::string>("stats.continuity")) c.continuity = parse_bool("stats.continuity", *v);
    if (const auto v = tree.get_optional<std::string>("stats.levene_center")) {
        const auto s = text::to_lower(text::trim(*v));
        if (s == "mean") c.levene_center = LeveneCenter::mean;
        else if (s == "median") c.levene_center = LeveneCenter::median;
        else throw UsageError("config: stats.levene_center must be mean or median");
    }
    if (const auto v = tree.get_optional<std::string>("report.count_mode")) {
        const auto s = text::to_lower(text::trim(*v));
        if (s == "per_review") c.count_mode = CountMode::per_review;
        else if (s == "per_issue") c.count_mode = CountMode::per_issue;
        else throw UsageError("config: report.count_mode must be per_review or per_issue");
    }
    read(tree, "report.top_k", c.top_k);

    if (!(c.train_fraction > 0.0 && c.train_fraction <= 1.0)) throw UsageError("config: run.train_fraction must be in (0, 1]");
    if (c.temperature < 0.0 || c.temperature > 2.0) throw UsageError("config: run.temperature must be in [0, 2]");
    if (c.batch.max_in_flight == 0) throw UsageError("config: rate.max_in_flight must be positive");
    if (c.retry.max_attempts < 1) throw UsageError("config: rate.max_attempts must be positive");
    return c;
}

PipelineConfig load_config(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw UsageError("cannot read config " + path.string());
    std::ostringstream buf;
    buf << in.rdbuf();
    return parse_config(buf.str(), path.parent_path());
}

nlohmann::ordered_json to_json(const PipelineConfig& c) {
    nlohmann::ordered_json j;
    j["provider"] = {{"base_url", c.provider.base_url},
                     {"api_key_env", c.provider.api_key_env},
                     {"crc_model", c.provider.crc_model},
                     {"tm_model", c.provider.tm_model},
                     {"loss_model", c.provider.loss_model},
                     {"embedding_model", c.provider.embedding_model},
                     {"timeout", c.provider.timeout.count()}};
    j["rate"] = {{"max_in_flight", c.batch.max_in_flight},
                 {"tokens_per_minute", c.batch.tokens_per_minute},
                 {"chars_per_token", c.batch.chars_per_token},
                 {"max_attempts", c.retry.max_attempts},
                 {"base_delay", c.retry.base_delay_s},
                 {"factor", c.retry.factor},
                 {"jitter", c.retry.jitter},
                 {"max_delay", c.retry.max_delay_s}};
    j["run"] = {{"mode", std::string(to_string(c.mode))},
                {"cassette", c.cassette.generic_string()},
                {"seed", c.seed},
                {"train_fraction", c.train_fraction},
                {"temperature", c.temperature}};
    j["paths"] = {{"corpus", c.paths.corpus.generic_string()},
                  {"labeled", c.paths.labeled.generic_string()},
                  {"gold", c.paths.gold.generic_string()},
                  {"tm_labeled", c.paths.tm_labeled.generic_string()},
                  {"tm_gold", c.paths.tm_gold.generic_string()},
                  {"taxonomy", c.paths.taxonomy.generic_string()}};
    j["prompting"] = {{"crc_similarity", c.crc_similarity == SimilarityKind::tfidf ? "tfidf" : "dense"},
                      {"tm_examples", c.tm_examples}};
    j["eval"] = {{"embed_score", c.embed_score}};
    j["stats"] = {{"continuity", c.continuity},
                  {"levene_center", c.levene_center == LeveneCenter::mean ? "mean" : "median"}};
    j["report"] = {{"count_mode", c.count_mode == CountMode::per_review ? "per_review" : "per_issue"},
                   {"top_k", c.top_k}};
    return j;
}

}  // namespace spmine
