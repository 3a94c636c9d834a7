#include "spmine/pipeline.hpp"

#include <fmt/format.h>
#include <spdlog/spdlog.h>

#include <fstream>
#include <map>
#include <set>
#include <sstream>

#include "spmine/corpus.hpp"
#include "spmine/error.hpp"
#include "spmine/eval.hpp"
#include "spmine/exemplar.hpp"
#include "spmine/hash.hpp"
#include "spmine/prompting.hpp"
#include "spmine/report.hpp"
#include "spmine/stats.hpp"
#include "spmine/taxonomy.hpp"
#include "spmine/text.hpp"

namespace spmine {

namespace fs = std::filesystem;
using json = nlohmann::json;
using ojson = nlohmann::ordered_json;

namespace {

// --- files -----------------------------------------------------------------------------

std::string read_file(const fs::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw DataError("MissingInput", "cannot read " + path.string());
    std::ostringstream buf;
    buf << in.rdbuf();
    return buf.str();
}

void write_file(const fs::path& path, const std::string& content) {
    if (path.has_parent_path()) fs::create_directories(path.parent_path());
    const auto tmp = fs::path(path.string() + ".tmp");
    {
        std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
        if (!out) throw DataError("IoError", "cannot write " + path.string());
        out << content;
        if (!out) throw DataError("IoError", "cannot write " + path.string());
    }
    fs::rename(tmp, path);
}

void write_json(const fs::path& path, const ojson& j) { write_file(path, j.dump(2) + "\n"); }

std::string jsonl(const std::vector<ojson>& rows) {
    std::string out;
    for (const auto& r : rows) out += r.dump() + "\n";
    return out;
}

std::vector<json> read_jsonl(const fs::path& path) {
    std::vector<json> rows;
    std::istringstream in(read_file(path));
    std::string line;
    std::size_t row = 0;
    while (std::getline(in, line)) {
        ++row;
        if (text::trim(line).empty()) continue;
        try {
            rows.push_back(json::parse(line));
        } catch (const json::parse_error& e) {
            throw MalformedRecord(row, path.filename().string() + ": " + e.what());
        }
    }
    return rows;
}

void require(const fs::path& path, const std::string& what) {
    if (path.empty()) throw UsageError(what + " is not configured");
    if (!fs::exists(path)) throw DataError("MissingInput", what + " not found: " + path.string());
}

// --- manifests and caching ---------------------------------------------------------------

class StageRun {
public:
    StageRun(const StageContext& ctx, std::string stage, ojson args = ojson::object())
        : ctx_(ctx), stage_(std::move(stage)), args_(std::move(args)) {}

    void input(const std::string& name, const fs::path& path) { inputs_[name] = sha256_file(path); }
    void optional_input(const std::string& name, const fs::path& path) {
        inputs_[name] = fs::exists(path) ? sha256_file(path) : "absent";
    }

    // True (and fills `outcome`) when a previous run with identical inputs left
    // its outputs untouched.
    bool cached(StageOutcome& outcome) {
        if (ctx_.force) return false;
        const auto path = manifest_path();
        if (!fs::exists(path)) return false;
        json m;
        try {
            m = json::parse(read_file(path));
        } catch (const json::parse_error&) {
            return false;
        }
        if (m.value("key", "") != key()) return false;
        std::vector<fs::path> outputs;
        for (const auto& [rel, sha] : m["outputs"].items()) {
            const auto p = ctx_.out / rel;
            if (!fs::exists(p) || sha256_file(p) != sha.get<std::string>()) return false;
            outputs.push_back(p);
        }
        outcome.stage = stage_;
        outcome.skipped = true;
        outcome.outputs = std::move(outputs);
        outcome.summary = m.value("summary", ojson::object());
        for (const auto& w : m.value("warnings", json::array())) outcome.warnings.push_back(w.get<std::string>());
        return true;
    }

    StageOutcome finish(const std::vector<std::string>& outputs, ojson summary, std::vector<std::string> warnings = {}) {
        ojson m;
        m["stage"] = stage_;
        m["version"] = kVersion;
        m["key"] = key();
        m["args"] = args_;
        m["config"] = to_json(ctx_.config);
        m["inputs"] = ojson(inputs_);
        m["outputs"] = ojson::object();
        StageOutcome outcome;
        outcome.stage = stage_;
        for (const auto& rel : outputs) {
            m["outputs"][rel] = sha256_file(ctx_.out / rel);
            outcome.outputs.push_back(ctx_.out / rel);
        }
        m["summary"] = summary;
        m["warnings"] = warnings;
        write_json(manifest_path(), m);
        outcome.summary = std::move(summary);
        outcome.warnings = std::move(warnings);
        return outcome;
    }

private:
    fs::path manifest_path() const { return ctx_.out / files::manifests / (stage_ + ".json"); }

    std::string key() const {
        ojson k;
        k["stage"] = stage_;
        k["version"] = kVersion;
        k["args"] = args_;
        k["config"] = to_json(ctx_.config);
        k["inputs"] = ojson(inputs_);
        return sha256_hex(k.dump());
    }

    const StageContext& ctx_;
    std::string stage_;
    ojson args_;
    std::map<std::string, std::string> inputs_;
};

// --- providers -------------------------------------------------------------------------

SystemClock& system_clock() {
    static SystemClock clock;
    return clock;
}

Clock& clock_of(const StageContext& ctx) { return ctx.clock ? *ctx.clock : system_clock(); }

fs::path cassette_path(const StageContext& ctx) {
    return ctx.config.cassette.empty() ? ctx.out / "cassette.jsonl" : ctx.config.resolve(ctx.config.cassette);
}

struct Provider {
    std::unique_ptr<HttpTransport> owned;
    std::unique_ptr<Client> client;
};

Provider open_provider(const StageContext& ctx) {
    Provider p;
    Transport* transport = ctx.transport;
    if (transport == nullptr && ctx.config.mode != Mode::replay) {
        p.owned = std::make_unique<HttpTransport>(ctx.config.provider.base_url, ctx.config.provider.api_key_env,
                                                  ctx.config.provider.timeout);
        transport = p.owned.get();
    }
    ClientOptions options;
    options.mode = ctx.config.mode;
    options.cassette = cassette_path(ctx);
    options.retry = ctx.config.retry;
    options.jitter_seed = derive_seed(ctx.config.seed, "retry-jitter");
    p.client = std::make_unique<Client>(options, transport, clock_of(ctx));
    return p;
}

std::vector<std::string> completions(Client& client, const std::vector<BatchItem>& items, const StageContext& ctx) {
    const auto results = run_batch(client, items, ctx.config.batch, clock_of(ctx));
    std::vector<std::string> out;
    out.reserve(results.size());
    for (const auto& r : results) {
        if (!r.ok()) {
            throw Error(ErrorFamily::provider, r.error_kind.empty() ? "ProviderError" : r.error_kind,
                        "request " + r.id + ": " + r.error_message);
        }
        out.push_back(*r.text);
    }
    return out;
}

ThemeSet load_themes(const StageContext& ctx) {
    if (ctx.config.paths.taxonomy.empty()) return ThemeSet::builtin();
    return load_taxonomy(ctx.config.resolve(ctx.config.paths.taxonomy)).themes;
}

// --- similarities ----------------------------------------------------------------------

Matrix rows_of(const Matrix& m, std::size_t begin, std::size_t end) {
    Matrix out(end - begin, m.cols());
    for (std::size_t r = begin; r < end; ++r) {
        const auto src = m.row(r);
        std::copy(src.begin(), src.end(), out.row(r - begin).begin());
    }
    return out;
}

struct Similarities {
    SimilarityMatrix pool;  // pool x pool
    Matrix queries;         // queries x pool
};

// TF-IDF is fitted over pool and query texts together.
Similarities tfidf_similarities(const std::vector<std::string>& pool, const std::vector<std::string>& queries) {
    std::vector<std::string> all = pool;
    all.insert(all.end(), queries.begin(), queries.end());
    const auto e = tfidf_embed(all);
    const auto pool_rows = rows_of(e.vectors, 0, pool.size());
    Similarities s;
    s.pool = cosine_matrix(pool_rows);
    if (!queries.empty()) s.queries = cosine_cross(rows_of(e.vectors, pool.size(), all.size()), pool_rows);
    return s;
}

Similarities crc_similarities(const StageContext& ctx, Client& client, const std::vector<std::string>& pool,
                              const std::vector<std::string>& queries) {
    if (ctx.config.crc_similarity == SimilarityKind::tfidf) return tfidf_similarities(pool, queries);
    ClientEmbeddingProvider provider(client, ctx.config.provider.embedding_model);
    DenseEmbedder embedder(provider);
    const auto pool_vectors = embedder.embed(pool);
    Similarities s;
    s.pool = cosine_matrix(pool_vectors);
    if (!queries.empty()) s.queries = cosine_cross(embedder.embed(queries).vectors, pool_vectors.vectors);
    return s;
}

// --- shared record shapes ----------------------------------------------------------------

Corpus load_corpus_jsonl(const fs::path& path) {
    require(path, path.filename().string());
    return ingest(path, InputFormat::json_lines);
}

Corpus load_preprocessed_or_empty(const StageContext& ctx) {
    const auto path = ctx.out / files::preprocessed;
    return fs::exists(path) ? ingest(path, InputFormat::json_lines) : Corpus{};
}

struct Classified {
    std::string review_id;
    std::optional<Label> label;  // nullopt: anomalous response
};

std::vector<Classified> load_classified(const fs::path& path) {
    require(path, "classified output");
    std::vector<Classified> out;
    for (const auto& row : read_jsonl(path)) {
        Classified c;
        c.review_id = row.at("review_id").get<std::string>();
        if (row.at("status").get<std::string>() == "ok") {
            std::vector<std::string> issues;
            if (row.at("issues").is_array()) issues = row.at("issues").get<std::vector<std::string>>();
            c.label = Label{row.at("concern").get<std::string>() == "Yes", row.at("rationale").get<std::string>(),
                            std::move(issues)};
        }
        out.push_back(std::move(c));
    }
    return out;
}

std::vector<MappedReview> load_mapped(const fs::path& path, const ThemeSet& themes) {
    require(path, "mapped output");
    std::vector<MappedReview> out;
    for (const auto& row : read_jsonl(path)) {
        MappedReview m;
        m.review_id = row.at("review_id").get<std::string>();
        m.category = Category::parse(row.at("category").get<std::string>());
        if (row.contains("date") && row["date"].is_string()) m.date = parse_date(row["date"].get<std::string>());
        for (const auto& mapping : row.at("mappings")) {
            ThemeMapping tm{mapping.at("issue").get<std::string>(), mapping.at("themes").get<std::vector<std::string>>()};
            for (const auto& t : tm.themes) {
                if (!themes.contains(t)) throw UnknownTheme(t);
            }
            m.mappings.push_back(std::move(tm));
        }
        out.push_back(std::move(m));
    }
    return out;
}

ojson label_fields(const Label& l) {
    ojson j;
    j["concern"] = l.concern ? "Yes" : "No";
    j["rationale"] = l.rationale;
    j["issues"] = l.concern ? ojson(l.issues) : ojson("N/A");
    return j;
}

ojson test_json(const TestResult& t) {
    ojson j;
    j["method"] = t.method;
    j["statistic"] = t.statistic;
    j["df"] = t.df;
    if (t.df2) j["df2"] = *t.df2;
    j["p_value"] = t.p_value;
    j["p_text"] = format_pvalue(t.p_value);
    j["significance"] = significance_stars(t.p_value);
    if (t.estimate) j["estimate"] = *t.estimate;
    return j;
}

template <typename F>
ojson guarded(F&& f) {
    try {
        return f();
    } catch (const DataError& e) {
        return ojson{{"error", e.kind()}, {"message", e.what()}};
    }
}

ojson prf_json(const PRF& p) { return ojson{{"precision", p.precision}, {"recall", p.recall}, {"f1", p.f1}}; }

ojson text_sim_json(const TextSimScores& s) {
    ojson j;
    j["items"] = s.items;
    j["rouge_l"] = s.rouge_l;
    j["meteor_lite"] = s.meteor_lite;
    j["embed_score"] = s.embed_score ? ojson(*s.embed_score) : ojson(nullptr);
    return j;
}

// Training pool for exemplar selection: the seeded training split of the labeled data.
SplitResult labeled_split(const StageContext& ctx) {
    const auto path = ctx.config.resolve(ctx.config.paths.labeled);
    require(path, "paths.labeled");
    const auto labeled = load_labeled(path, load_preprocessed_or_empty(ctx));
    return split(labeled, SplitSpec{ctx.config.train_fraction, derive_seed(ctx.config.seed, "split")});
}

std::pair<std::vector<ThemeMapping>, std::vector<ThemeMapping>> tm_split(const StageContext& ctx,
                                                                         const ThemeSet& themes) {
    const auto path = ctx.config.resolve(ctx.config.paths.tm_labeled);
    require(path, "paths.tm_labeled");
    const auto all = load_mappings(path, themes);
    const auto [train_idx, val_idx] =
        split_indices(all.size(), SplitSpec{ctx.config.train_fraction, derive_seed(ctx.config.seed, "tm-split")});
    std::pair<std::vector<ThemeMapping>, std::vector<ThemeMapping>> out;
    for (auto i : train_idx) out.first.push_back(all[i]);
    for (auto i : val_idx) out.second.push_back(all[i]);
    return out;
}

std::vector<std::string> texts_of(const std::vector<LabeledReview>& v) {
    std::vector<std::string> out;
    for (const auto& l : v) out.push_back(l.review.text);
    return out;
}

std::vector<std::string> issues_of(const std::vector<ThemeMapping>& v) {
    std::vector<std::string> out;
    for (const auto& m : v) out.push_back(m.issue);
    return out;
}

void add_labeled_inputs(StageRun& run, const StageContext& ctx) {
    run.input("labeled", ctx.config.resolve(ctx.config.paths.labeled));
    run.optional_input("preprocessed", ctx.out / files::preprocessed);
}

void add_taxonomy_input(StageRun& run, const StageContext& ctx) {
    if (!ctx.config.paths.taxonomy.empty()) run.input("taxonomy", ctx.config.resolve(ctx.config.paths.taxonomy));
}

}  // namespace

// --- stages ------------------------------------------------------------------------------

StageOutcome run_ingest(const StageContext& ctx) {
    const auto src = ctx.config.resolve(ctx.config.paths.corpus);
    require(src, "paths.corpus");
    StageRun run(ctx, "ingest");
    run.input("corpus", src);
    StageOutcome cached;
    if (run.cached(cached)) return cached;

    const auto corpus = ingest(src, format_from_path(src));
    write_corpus_jsonl(corpus, ctx.out / files::corpus);
    return run.finish({files::corpus}, ojson{{"records", corpus.size()}});
}

StageOutcome run_preprocess(const StageContext& ctx) {
    const auto src = ctx.out / files::corpus;
    require(src, "ingested corpus (run ingest first)");
    StageRun run(ctx, "preprocess");
    run.input("corpus", src);
    StageOutcome cached;
    if (run.cached(cached)) return cached;

    const auto result = preprocess(load_corpus_jsonl(src));
    write_corpus_jsonl(result.corpus, ctx.out / files::preprocessed);
    ojson stats;
    stats["raw"] = result.stats.raw_count;
    stats["after_empty_filter"] = result.stats.after_empty_filter;
    stats["after_language_filter"] = result.stats.after_language_filter;
    stats["after_dedup"] = result.stats.after_dedup;
    write_json(ctx.out / files::preprocess_stats, stats);
    return run.finish({files::preprocessed, files::preprocess_stats}, stats);
}

StageOutcome run_build_finetune(const StageContext& ctx, FineTuneTask task) {
    const bool crc = task == FineTuneTask::crc;
    StageRun run(ctx, crc ? "build-finetune-crc" : "build-finetune-tm");
    if (crc) {
        add_labeled_inputs(run, ctx);
        run.optional_input("cassette", cassette_path(ctx));
    } else {
        run.input("tm_labeled", ctx.config.resolve(ctx.config.paths.tm_labeled));
        add_taxonomy_input(run, ctx);
    }
    StageOutcome cached;
    if (run.cached(cached)) return cached;

    std::vector<FineTuneRecord> train;
    std::vector<FineTuneRecord> validation;
    std::vector<std::string> warnings;
    ojson summary;
    if (crc) {
        auto s = labeled_split(ctx);
        warnings = s.warnings;
        auto provider = open_provider(ctx);
        const auto sims = crc_similarities(ctx, *provider.client, texts_of(s.train), texts_of(s.validation));
        Rng coin(derive_seed(ctx.config.seed, "crc-order"));
        for (std::size_t i = 0; i < s.train.size(); ++i) {
            const auto pair = select_crc_examples(i, s.train, sims.pool, coin);
            train.push_back(make_record(render_crc_prompt(s.train[i].review, pair), render_label(s.train[i].label)));
        }
        for (std::size_t i = 0; i < s.validation.size(); ++i) {
            const auto pair = select_crc_examples_for(sims.queries.row(i), s.train, coin);
            validation.push_back(
                make_record(render_crc_prompt(s.validation[i].review, pair), render_label(s.validation[i].label)));
        }
        const auto balance = balance_check(s.train);
        summary["train_positive"] = balance.positives;
        summary["train_negative"] = balance.negatives;
    } else {
        const auto themes = load_themes(ctx);
        const auto [pool, held_out] = tm_split(ctx, themes);
        const auto sims = tfidf_similarities(issues_of(pool), issues_of(held_out));
        for (std::size_t i = 0; i < pool.size(); ++i) {
            const auto ex = select_tm_examples(i, pool, sims.pool, ctx.config.tm_examples);
            for (const auto& w : ex.warnings) warnings.push_back(pool[i].issue + ": " + w);
            train.push_back(make_record(render_tm_prompt(pool[i].issue, themes, ex), render_mapping(pool[i])));
        }
        for (std::size_t i = 0; i < held_out.size(); ++i) {
            const auto ex = select_tm_examples_for(sims.queries.row(i), pool, ctx.config.tm_examples);
            for (const auto& w : ex.warnings) warnings.push_back(held_out[i].issue + ": " + w);
            validation.push_back(
                make_record(render_tm_prompt(held_out[i].issue, themes, ex), render_mapping(held_out[i])));
        }
    }
    const std::string train_rel = crc ? files::crc_train : files::tm_train;
    const std::string val_rel = crc ? files::crc_validation : files::tm_validation;
    export_finetune(train, ctx.out / train_rel);
    export_finetune(validation, ctx.out / val_rel);
    summary["train"] = train.size();
    summary["validation"] = validation.size();
    return run.finish({train_rel, val_rel}, summary, warnings);
}

StageOutcome run_sweep_temperature(const StageContext& ctx) {
    StageRun run(ctx, "sweep-temperature");
    add_labeled_inputs(run, ctx);
    run.optional_input("cassette", cassette_path(ctx));
    StageOutcome cached;
    if (run.cached(cached)) return cached;

    const auto s = labeled_split(ctx);
    if (s.validation.empty()) throw DataError("EmptyDataset", "the validation split is empty");
    auto provider = open_provider(ctx);
    const auto sims = crc_similarities(ctx, *provider.client, texts_of(s.train), texts_of(s.validation));
    Rng coin(derive_seed(ctx.config.seed, "crc-order"));
    // Same coin sequence as build-finetune: training targets first.
    for (std::size_t i = 0; i < s.train.size(); ++i) coin.uniform01();
    std::vector<Prompt> prompts;
    std::vector<bool> gold;
    for (std::size_t i = 0; i < s.validation.size(); ++i) {
        prompts.push_back(render_crc_prompt(s.validation[i].review,
                                            select_crc_examples_for(sims.queries.row(i), s.train, coin)));
        gold.push_back(s.validation[i].label.concern);
    }
    const auto result = temperature_sweep(*provider.client, ctx.config.provider.crc_model, prompts, gold,
                                          default_sweep_temperatures(), ctx.config.batch, clock_of(ctx));
    ojson j;
    j["best_temperature"] = result.best_temperature;
    j["points"] = ojson::array();
    for (const auto& p : result.points) {
        j["points"].push_back(ojson{{"temperature", p.temperature}, {"accuracy", p.accuracy}, {"anomalies", p.anomalies}});
    }
    write_json(ctx.out / files::sweep, j);
    return run.finish({files::sweep}, ojson{{"best_temperature", result.best_temperature}});
}

StageOutcome run_classify(const StageContext& ctx) {
    const auto corpus_path = ctx.out / files::preprocessed;
    require(corpus_path, "preprocessed corpus (run preprocess first)");
    StageRun run(ctx, "classify");
    add_labeled_inputs(run, ctx);
    run.optional_input("cassette", cassette_path(ctx));
    StageOutcome cached;
    if (run.cached(cached)) return cached;

    const auto corpus = load_corpus_jsonl(corpus_path);
    const auto s = labeled_split(ctx);
    if (s.train.empty()) throw DataError("EmptyTrainingSet", "no labeled training examples");
    std::map<std::string, std::size_t> pool_index;
    std::vector<bool> pool_concern;
    for (std::size_t i = 0; i < s.train.size(); ++i) {
        pool_index.emplace(s.train[i].review.id, i);
        pool_concern.push_back(s.train[i].label.concern);
    }

    auto provider = open_provider(ctx);
    std::vector<std::string> targets;
    for (const auto& r : corpus.reviews) targets.push_back(r.text);
    const auto sims = crc_similarities(ctx, *provider.client, texts_of(s.train), targets);

    Rng coin(derive_seed(ctx.config.seed, "crc-wild-order"));
    std::vector<BatchItem> items;
    for (std::size_t i = 0; i < corpus.size(); ++i) {
        const auto& review = corpus.reviews[i];
        std::optional<std::size_t> exclude;
        if (const auto it = pool_index.find(review.id); it != pool_index.end()) exclude = it->second;
        const auto row = sims.queries.row(i);
        const auto picked = select_crc_indices(row, pool_concern, exclude);
        const auto pair = make_crc_pair(picked, s.train, row, coin.uniform01());
        items.push_back({review.id, make_chat_request(ctx.config.provider.crc_model, render_crc_prompt(review, pair),
                                                      ctx.config.temperature)});
    }
    const auto responses = completions(*provider.client, items, ctx);

    std::vector<ojson> rows;
    std::size_t concerned = 0;
    std::size_t anomalous = 0;
    for (std::size_t i = 0; i < corpus.size(); ++i) {
        const auto& review = corpus.reviews[i];
        ojson row;
        row["review_id"] = review.id;
        try {
            const auto label = parse_crc_response(responses[i]);
            row["status"] = "ok";
            row.update(label_fields(label));
            if (label.concern) ++concerned;
        } catch (const AnomalousResponse& e) {
            ++anomalous;
            row["status"] = "anomalous";
            row["reason"] = e.what();
            row["raw"] = responses[i];
        }
        rows.push_back(std::move(row));
    }
    write_file(ctx.out / files::classified, jsonl(rows));
    std::vector<std::string> warnings;
    if (anomalous > 0) warnings.push_back(fmt::format("{} anomalous responses left out of later stages", anomalous));
    return run.finish({files::classified},
                      ojson{{"reviews", corpus.size()}, {"concerned", concerned}, {"anomalous", anomalous}}, warnings);
}

StageOutcome run_map_themes(const StageContext& ctx) {
    const auto classified_path = ctx.out / files::classified;
    require(classified_path, "classified output (run classify first)");
    StageRun run(ctx, "map-themes");
    run.input("classified", classified_path);
    run.input("preprocessed", ctx.out / files::preprocessed);
    run.input("tm_labeled", ctx.config.resolve(ctx.config.paths.tm_labeled));
    add_taxonomy_input(run, ctx);
    run.optional_input("cassette", cassette_path(ctx));
    StageOutcome cached;
    if (run.cached(cached)) return cached;

    const auto themes = load_themes(ctx);
    const auto corpus = load_corpus_jsonl(ctx.out / files::preprocessed);
    const auto classified = load_classified(classified_path);
    const auto [pool, unused] = tm_split(ctx, themes);
    (void)unused;
    if (pool.empty()) throw DataError("EmptyTrainingSet", "no labeled theme mappings");

    std::vector<Label> labels;
    for (const auto& c : classified) {
        if (c.label && c.label->concern) labels.push_back(*c.label);
    }
    const auto inventory = split_issues(labels);
    const auto sims = tfidf_similarities(issues_of(pool), inventory.unique);

    auto provider = open_provider(ctx);
    std::vector<BatchItem> items;
    std::vector<std::string> warnings;
    for (std::size_t i = 0; i < inventory.unique.size(); ++i) {
        const auto ex = select_tm_examples_for(sims.queries.row(i), pool, ctx.config.tm_examples);
        for (const auto& w : ex.warnings) warnings.push_back(inventory.unique[i] + ": " + w);
        items.push_back({fmt::format("issue-{}", i),
                         make_chat_request(ctx.config.provider.tm_model,
                                           render_tm_prompt(inventory.unique[i], themes, ex), ctx.config.temperature)});
    }
    const auto responses = completions(*provider.client, items, ctx);

    std::map<std::string, std::optional<std::vector<std::string>>> mapped;
    std::vector<ojson> issue_rows;
    std::size_t anomalous = 0;
    for (std::size_t i = 0; i < inventory.unique.size(); ++i) {
        const auto& issue = inventory.unique[i];
        ojson row;
        row["issue"] = issue;
        try {
            const auto q = parse_mapping_for(issue, responses[i], themes);
            if (q.echo_mismatch) warnings.push_back(fmt::format("EchoMismatch: '{}' echoed as '{}'", issue, q.echoed_issue));
            mapped[issue] = q.mapping.themes;
            row["status"] = "ok";
            row["themes"] = q.mapping.themes;
        } catch (const DataError& e) {
            ++anomalous;
            mapped[issue] = std::nullopt;
            row["status"] = "anomalous";
            row["reason"] = e.what();
            row["raw"] = responses[i];
        }
        issue_rows.push_back(std::move(row));
    }

    std::vector<ojson> review_rows;
    for (const auto& c : classified) {
        if (!c.label || !c.label->concern) continue;
        const auto* review = corpus.find(c.review_id);
        if (review == nullptr) throw DataError("MissingInput", "classified review not in corpus: " + c.review_id);
        ojson row;
        row["review_id"] = review->id;
        row["category"] = review->category.name();
        row["date"] = review->date ? ojson(format_date(*review->date)) : ojson(nullptr);
        row["mappings"] = ojson::array();
        row["unmapped"] = ojson::array();
        for (const auto& issue : c.label->issues) {
            const auto& themes_for = mapped.at(issue);
            if (themes_for) {
                row["mappings"].push_back(ojson{{"issue", issue}, {"themes", *themes_for}});
            } else {
                row["unmapped"].push_back(issue);
            }
        }
        review_rows.push_back(std::move(row));
    }
    write_file(ctx.out / files::issue_mappings, jsonl(issue_rows));
    write_file(ctx.out / files::mapped, jsonl(review_rows));
    return run.finish({files::mapped, files::issue_mappings},
                      ojson{{"concerned_reviews", review_rows.size()},
                            {"issues", inventory.total},
                            {"unique_issues", inventory.unique.size()},
                            {"anomalous", anomalous}},
                      warnings);
}

StageOutcome run_classify_loss(const StageContext& ctx) {
    const auto classified_path = ctx.out / files::classified;
    require(classified_path, "classified output (run classify first)");
    StageRun run(ctx, "classify-loss");
    run.input("classified", classified_path);
    run.input("preprocessed", ctx.out / files::preprocessed);
    run.optional_input("cassette", cassette_path(ctx));
    StageOutcome cached;
    if (run.cached(cached)) return cached;

    const auto corpus = load_corpus_jsonl(ctx.out / files::preprocessed);
    std::vector<const Review*> concerned;
    for (const auto& c : load_classified(classified_path)) {
        if (!c.label || !c.label->concern) continue;
        const auto* review = corpus.find(c.review_id);
        if (review == nullptr) throw DataError("MissingInput", "classified review not in corpus: " + c.review_id);
        concerned.push_back(review);
    }
    auto provider = open_provider(ctx);
    std::vector<BatchItem> items;
    for (const auto* r : concerned) {
        items.push_back({r->id, make_chat_request(ctx.config.provider.loss_model, render_customer_loss_prompt(*r),
                                                  ctx.config.temperature)});
    }
    const auto responses = completions(*provider.client, items, ctx);
    std::vector<ojson> rows;
    std::size_t anomalous = 0;
    for (std::size_t i = 0; i < concerned.size(); ++i) {
        ojson row;
        row["review_id"] = concerned[i]->id;
        try {
            row["action"] = std::string(to_string(parse_customer_loss(responses[i])));
        } catch (const AnomalousResponse&) {
            ++anomalous;
            row["action"] = nullptr;
            row["raw"] = responses[i];
        }
        rows.push_back(std::move(row));
    }
    write_file(ctx.out / files::loss, jsonl(rows));
    return run.finish({files::loss}, ojson{{"classified", concerned.size()}, {"anomalous", anomalous}});
}

StageOutcome run_evaluate(const StageContext& ctx, EvalTask task) {
    if (task == EvalTask::crc) {
        const auto gold_path = ctx.config.resolve(ctx.config.paths.gold);
        require(gold_path, "paths.gold");
        const auto classified_path = ctx.out / files::classified;
        require(classified_path, "classified output (run classify first)");
        StageRun run(ctx, "evaluate-crc");
        run.input("gold", gold_path);
        run.input("classified", classified_path);
        run.optional_input("preprocessed", ctx.out / files::preprocessed);
        if (ctx.config.embed_score) run.optional_input("cassette", cassette_path(ctx));
        StageOutcome cached;
        if (run.cached(cached)) return cached;

        const auto gold = load_labeled(gold_path, load_preprocessed_or_empty(ctx));
        std::map<std::string, std::optional<Label>> by_id;
        for (auto& c : load_classified(classified_path)) by_id[c.review_id] = std::move(c.label);
        std::vector<std::optional<Label>> predictions;
        std::vector<Label> golds;
        for (const auto& g : gold) {
            const auto it = by_id.find(g.review.id);
            if (it == by_id.end()) throw UnclassifiedReview(g.review.id);
            predictions.push_back(it->second);
            golds.push_back(g.label);
        }
        Provider provider;
        std::unique_ptr<ClientEmbeddingProvider> embed_provider;
        std::unique_ptr<DenseEmbedder> embedder;
        EmbedScoreOptions embed;
        if (ctx.config.embed_score) {
            provider = open_provider(ctx);
            embed_provider =
                std::make_unique<ClientEmbeddingProvider>(*provider.client, ctx.config.provider.embedding_model);
            embedder = std::make_unique<DenseEmbedder>(*embed_provider);
            embed.embedder = embedder.get();
        }
        const auto e = evaluate_crc(predictions, golds, embed);
        ojson j;
        j["evaluated"] = e.evaluated;
        j["anomalous"] = e.anomalous;
        j["approximate_meteor"] = e.approximate_meteor;
        ojson t1;
        t1["accuracy"] = e.task1.accuracy;
        t1["confusion"] = ojson{{"tp", e.task1.matrix.tp}, {"fp", e.task1.matrix.fp}, {"fn", e.task1.matrix.fn},
                                {"tn", e.task1.matrix.tn}};
        t1["yes"] = prf_json(e.task1.positive.prf);
        t1["yes"]["support"] = e.task1.positive.support;
        t1["no"] = prf_json(e.task1.negative.prf);
        t1["no"]["support"] = e.task1.negative.support;
        t1["macro"] = prf_json(e.task1.macro);
        t1["micro"] = prf_json(e.task1.micro);
        t1["weighted"] = prf_json(e.task1.weighted);
        j["task1"] = t1;
        j["task2"] = text_sim_json(e.task2);
        j["task3_na"] = text_sim_json(e.task3_na);
        j["task3_other"] = text_sim_json(e.task3_other);
        write_json(ctx.out / files::eval_crc, j);
        return run.finish({files::eval_crc}, ojson{{"accuracy", e.task1.accuracy}, {"evaluated", e.evaluated}});
    }

    const auto gold_path = ctx.config.resolve(ctx.config.paths.tm_gold);
    require(gold_path, "paths.tm_gold");
    const auto pred_path = ctx.out / files::issue_mappings;
    require(pred_path, "issue mappings (run map-themes first)");
    StageRun run(ctx, "evaluate-tm");
    run.input("tm_gold", gold_path);
    run.input("issue_mappings", pred_path);
    add_taxonomy_input(run, ctx);
    StageOutcome cached;
    if (run.cached(cached)) return cached;

    const auto themes = load_themes(ctx);
    const auto gold = load_mappings(gold_path, themes);
    std::map<std::string, std::optional<std::vector<std::string>>> predicted;
    for (const auto& row : read_jsonl(pred_path)) {
        const auto issue = row.at("issue").get<std::string>();
        if (row.at("status").get<std::string>() == "ok") {
            predicted[issue] = row.at("themes").get<std::vector<std::string>>();
        } else {
            predicted[issue] = std::nullopt;
        }
    }
    BoolMatrix pred_rows;
    BoolMatrix gold_rows;
    std::size_t missing = 0;
    std::size_t anomalous = 0;
    auto to_row = [&](const std::vector<std::string>& names) {
        std::vector<bool> row(themes.size(), false);
        for (const auto& n : names) {
            const auto idx = themes.index_of(n);
            if (!idx) throw UnknownTheme(n);
            row[*idx] = true;
        }
        return row;
    };
    for (const auto& g : gold) {
        const auto it = predicted.find(g.issue);
        if (it == predicted.end()) {
            ++missing;
            continue;
        }
        if (!it->second) {
            ++anomalous;
            continue;
        }
        pred_rows.push_back(to_row(*it->second));
        gold_rows.push_back(to_row(g.themes));
    }
    if (gold_rows.empty()) throw DataError("EmptyDataset", "no gold issue has a predicted mapping");
    const auto r = multilabel_report(pred_rows, gold_rows, themes.names());
    ojson j;
    j["issues"] = gold_rows.size();
    j["missing"] = missing;
    j["anomalous"] = anomalous;
    j["macro"] = prf_json(r.macro);
    j["micro"] = prf_json(r.micro);
    j["tp"] = r.tp;
    j["fp"] = r.fp;
    j["fn"] = r.fn;
    j["per_theme"] = ojson::array();
    for (const auto& t : r.per_theme) {
        auto row = prf_json(t.prf);
        row["theme"] = t.theme;
        row["annotated"] = t.annotated;
        row["predicted"] = t.predicted;
        row["tp"] = t.tp;
        j["per_theme"].push_back(std::move(row));
    }
    write_json(ctx.out / files::eval_tm, j);
    return run.finish({files::eval_tm}, ojson{{"macro_f1", r.macro.f1}, {"micro_f1", r.micro.f1}});
}

// --- stats ---------------------------------------------------------------------------------

std::vector<CategoryRatio> load_category_counts(const fs::path& path) {
    const auto j = json::parse(read_file(path), nullptr, false);
    if (j.is_discarded() || !j.is_array()) throw DataError("MalformedRecord", path.string() + ": expected a JSON array");
    std::vector<CategoryRatio> out;
    for (const auto& row : j) {
        CategoryRatio c;
        c.category = row.at("category").get<std::string>();
        c.concerned = row.at("concerned").get<std::uint64_t>();
        c.total = row.at("total").get<std::uint64_t>();
        out.push_back(std::move(c));
    }
    return out;
}

namespace {

struct CategoryData {
    std::string category;
    std::uint64_t concerned = 0;
    std::uint64_t total = 0;
    std::optional<RatingHistogram> ratings_concerned;
    std::optional<RatingHistogram> ratings_other;
};

RatingHistogram histogram_from(const json& j) {
    const auto v = j.get<std::vector<std::uint64_t>>();
    if (v.size() != 5) throw DataError("MalformedRecord", "rating histograms need five counts (1..5 stars)");
    RatingHistogram h{};
    std::copy(v.begin(), v.end(), h.begin());
    return h;
}

std::vector<CategoryData> data_from_counts(const fs::path& path) {
    const auto j = json::parse(read_file(path));
    std::vector<CategoryData> out;
    for (const auto& row : j) {
        CategoryData d;
        d.category = row.at("category").get<std::string>();
        d.concerned = row.at("concerned").get<std::uint64_t>();
        d.total = row.at("total").get<std::uint64_t>();
        if (row.contains("ratings")) {
            d.ratings_concerned = histogram_from(row["ratings"].at("concerned"));
            d.ratings_other = histogram_from(row["ratings"].at("other"));
        }
        out.push_back(std::move(d));
    }
    return out;
}

struct ClassifiedCorpus {
    Corpus corpus;  // reviews with a usable classification
    std::map<std::string, bool> concern;
    std::size_t anomalous = 0;
};

ClassifiedCorpus classified_corpus(const StageContext& ctx) {
    const auto corpus = load_corpus_jsonl(ctx.out / files::preprocessed);
    ClassifiedCorpus out;
    std::map<std::string, std::optional<bool>> by_id;
    for (const auto& c : load_classified(ctx.out / files::classified)) {
        by_id[c.review_id] = c.label ? std::optional<bool>(c.label->concern) : std::nullopt;
    }
    for (const auto& r : corpus.reviews) {
        const auto it = by_id.find(r.id);
        if (it == by_id.end()) throw UnclassifiedReview(r.id);
        if (!it->second) {
            ++out.anomalous;
            continue;
        }
        out.concern[r.id] = *it->second;
        out.corpus.reviews.push_back(r);
    }
    return out;
}

std::vector<CategoryData> data_from_classified(const ClassifiedCorpus& cc) {
    std::map<Category, CategoryData> by_cat;
    for (const auto& r : cc.corpus.reviews) {
        auto& d = by_cat[r.category];
        d.category = r.category.name();
        if (!d.ratings_concerned) {
            d.ratings_concerned = RatingHistogram{};
            d.ratings_other = RatingHistogram{};
        }
        const bool concerned = cc.concern.at(r.id);
        ++d.total;
        if (concerned) ++d.concerned;
        if (r.rating >= 1 && r.rating <= 5) {
            auto& h = concerned ? *d.ratings_concerned : *d.ratings_other;
            ++h[static_cast<std::size_t>(r.rating - 1)];
        }
    }
    std::vector<CategoryData> out;
    for (auto& [_, d] : by_cat) out.push_back(std::move(d));
    return out;
}

std::vector<double> expand(const RatingHistogram& h) {
    std::vector<double> v;
    for (std::size_t s = 0; s < 5; ++s) v.insert(v.end(), h[s], static_cast<double>(s + 1));
    return v;
}

ojson rating_tests(const RatingHistogram& concerned, const RatingHistogram& other, LeveneCenter center) {
    ojson j;
    j["point_biserial"] = guarded([&] { return test_json(point_biserial(other, concerned)); });
    const auto a = expand(concerned);
    const auto b = expand(other);
    j["levene"] = guarded([&] { return test_json(levene({a, b}, center)); });
    j["welch"] = guarded([&] { return test_json(welch_t(a, b)); });
    return j;
}

}  // namespace

StageOutcome run_stats(const StageContext& ctx, const std::optional<fs::path>& counts) {
    StageRun run(ctx, "stats", ojson{{"counts", counts.has_value()}});
    if (counts) {
        run.input("counts", *counts);
    } else {
        run.input("classified", ctx.out / files::classified);
        run.input("preprocessed", ctx.out / files::preprocessed);
    }
    StageOutcome cached;
    if (run.cached(cached)) return cached;

    std::size_t anomalous = 0;
    std::vector<CategoryData> data;
    if (counts) {
        data = data_from_counts(*counts);
    } else {
        const auto cc = classified_corpus(ctx);
        anomalous = cc.anomalous;
        data = data_from_classified(cc);
    }

    std::vector<ProportionSample> samples;
    for (const auto& d : data) samples.push_back({d.category, d.concerned, d.total});
    ojson j;
    j["excluded_anomalous"] = anomalous;
    ojson props;
    props["samples"] = ojson::array();
    for (const auto& s : samples) {
        props["samples"].push_back(ojson{{"category", s.label},
                                         {"concerned", s.successes},
                                         {"total", s.total},
                                         {"ratio", s.total ? static_cast<double>(s.successes) / s.total : 0.0}});
    }
    props["omnibus"] = guarded([&] { return test_json(chisq_proportions(samples, false)); });
    props["pairwise"] = guarded([&] {
        ojson arr = ojson::array();
        for (const auto& p : pairwise_prop_tests(samples, PAdjust::bonferroni, ctx.config.continuity)) {
            auto row = test_json(p.test);
            row["a"] = p.a;
            row["b"] = p.b;
            row["p_adjusted"] = p.p_adjusted;
            row["p_adjusted_text"] = format_pvalue(p.p_adjusted, 1);
            arr.push_back(std::move(row));
        }
        return arr;
    });
    j["proportions"] = props;

    RatingHistogram all_concerned{};
    RatingHistogram all_other{};
    bool have_ratings = false;
    ojson per_category = ojson::object();
    for (const auto& d : data) {
        if (!d.ratings_concerned) continue;
        have_ratings = true;
        for (std::size_t s = 0; s < 5; ++s) {
            all_concerned[s] += (*d.ratings_concerned)[s];
            all_other[s] += (*d.ratings_other)[s];
        }
        per_category[d.category] = rating_tests(*d.ratings_concerned, *d.ratings_other, ctx.config.levene_center);
    }
    if (have_ratings) {
        j["ratings"] = ojson{{"overall", rating_tests(all_concerned, all_other, ctx.config.levene_center)},
                             {"per_category", per_category}};
    }
    write_json(ctx.out / files::stats, j);
    return run.finish({files::stats}, ojson{{"categories", samples.size()}});
}

// --- reports -------------------------------------------------------------------------------

StageOutcome run_report(const StageContext& ctx, ReportKind kind, const std::optional<fs::path>& counts) {
    static const char* names[] = {"ratios", "themes", "trends", "loss"};
    const std::string name = names[static_cast<int>(kind)];
    StageRun run(ctx, "report-" + name, ojson{{"counts", counts.has_value()}});
    const auto mapped_path = ctx.out / files::mapped;
    if (kind == ReportKind::ratios) {
        if (counts) {
            run.input("counts", *counts);
        } else {
            run.input("classified", ctx.out / files::classified);
            run.input("preprocessed", ctx.out / files::preprocessed);
        }
    } else {
        require(mapped_path, "mapped output (run map-themes first)");
        run.input("mapped", mapped_path);
        add_taxonomy_input(run, ctx);
        if (kind == ReportKind::loss) run.input("loss", ctx.out / files::loss);
    }
    StageOutcome cached;
    if (run.cached(cached)) return cached;

    const std::string base = "report/" + name;
    std::vector<std::string> outputs = {base + ".json", base + ".txt"};
    std::vector<std::string> warnings;
    ojson summary;
    if (kind == ReportKind::ratios) {
        ConcernRatioSummary s;
        if (counts) {
            s = concern_ratios(load_category_counts(*counts));
        } else {
            const auto cc = classified_corpus(ctx);
            if (cc.anomalous > 0) warnings.push_back(fmt::format("{} anomalous reviews left out", cc.anomalous));
            s = concern_ratios(cc.corpus, cc.concern);
        }
        write_json(ctx.out / outputs[0], to_json(s));
        write_file(ctx.out / outputs[1], to_text(s));
        summary["overall_ratio"] = s.overall.ratio;
    } else {
        const auto themes = load_themes(ctx);
        const auto mapped = load_mapped(mapped_path, themes);
        if (kind == ReportKind::themes) {
            const auto d = theme_distribution(mapped, themes, ctx.config.count_mode);
            outputs.push_back(base + ".csv");
            write_json(ctx.out / outputs[0], to_json(d));
            write_file(ctx.out / outputs[1], to_text(d));
            write_file(ctx.out / outputs[2], to_csv(d));
            summary["categories"] = d.categories.size();
        } else if (kind == ReportKind::trends) {
            const auto t = quarterly_trends(mapped, themes, ctx.config.top_k);
            outputs.push_back(base + ".csv");
            write_json(ctx.out / outputs[0], to_json(t));
            write_file(ctx.out / outputs[1], to_text(t));
            write_file(ctx.out / outputs[2], to_csv(t));
            warnings = t.warnings;
            summary["buckets"] = t.buckets.size();
        } else {
            std::map<std::string, LossAction> actions;
            std::set<std::string> anomalous;
            for (const auto& row : read_jsonl(ctx.out / files::loss)) {
                const auto id = row.at("review_id").get<std::string>();
                if (row.at("action").is_null()) {
                    anomalous.insert(id);
                    continue;
                }
                const auto a = row["action"].get<std::string>();
                for (auto cand : {LossAction::uninstalled, LossAction::replaced, LossAction::stopped_using,
                                  LossAction::none}) {
                    if (to_string(cand) == a) actions[id] = cand;
                }
                if (!actions.count(id)) throw DataError("MalformedRecord", "unknown loss action '" + a + "'");
            }
            std::vector<MappedReview> kept;
            for (const auto& m : mapped) {
                if (!anomalous.count(m.review_id)) kept.push_back(m);
            }
            if (!anomalous.empty()) {
                warnings.push_back(fmt::format("{} reviews with anomalous loss responses left out", anomalous.size()));
            }
            const auto s = customer_loss_summary(kept, actions, themes);
            write_json(ctx.out / outputs[0], to_json(s));
            write_file(ctx.out / outputs[1], to_text(s));
            summary["rate"] = s.rate;
        }
    }
    return run.finish(outputs, summary, warnings);
}

}  // namespace spmine
