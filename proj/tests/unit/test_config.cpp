#include <gtest/gtest.h>

#include "spmine/config.hpp"
#include "spmine/error.hpp"
#include "test_util.hpp"

using namespace spmine;

TEST(Config, Defaults) {
    const auto c = parse_config("");
    EXPECT_EQ(c.mode, Mode::replay);
    EXPECT_EQ(c.seed, 0u);
    EXPECT_EQ(c.train_fraction, 0.8);
    EXPECT_EQ(c.temperature, 0.0);
    EXPECT_EQ(c.tm_examples, 5u);
    EXPECT_EQ(c.top_k, 3u);
    EXPECT_TRUE(c.continuity);
    EXPECT_EQ(c.crc_similarity, SimilarityKind::dense);
    EXPECT_EQ(c.provider.crc_model, "gpt-3.5-turbo");
}

TEST(Config, EverySection) {
    const auto c = parse_config(R"(
# comment
[provider]
base_url = http://localhost:9000/v1
crc_model = ft:crc
timeout = 5
[rate]
max_in_flight = 3
max_attempts = 2
jitter = 0
[run]
mode = record
cassette = tape.jsonl
seed = 42
train_fraction = 0.5
temperature = 0.2
[paths]
corpus = reviews.csv
[prompting]
crc_similarity = tfidf
tm_examples = 3
[eval]
embed_score = off
[stats]
continuity = false
levene_center = median
[report]
count_mode = per_issue
top_k = 5
)",
                                "/base");
    EXPECT_EQ(c.provider.base_url, "http://localhost:9000/v1");
    EXPECT_EQ(c.provider.crc_model, "ft:crc");
    EXPECT_EQ(c.provider.timeout.count(), 5);
    EXPECT_EQ(c.batch.max_in_flight, 3u);
    EXPECT_EQ(c.retry.max_attempts, 2);
    EXPECT_EQ(c.retry.jitter, 0.0);
    EXPECT_EQ(c.mode, Mode::record);
    EXPECT_EQ(c.seed, 42u);
    EXPECT_EQ(c.train_fraction, 0.5);
    EXPECT_EQ(c.temperature, 0.2);
    EXPECT_EQ(c.crc_similarity, SimilarityKind::tfidf);
    EXPECT_EQ(c.tm_examples, 3u);
    EXPECT_FALSE(c.embed_score);
    EXPECT_FALSE(c.continuity);
    EXPECT_EQ(c.levene_center, LeveneCenter::median);
    EXPECT_EQ(c.count_mode, CountMode::per_issue);
    EXPECT_EQ(c.top_k, 5u);
    EXPECT_EQ(c.resolve(c.paths.corpus), std::filesystem::path("/base/reviews.csv"));
    EXPECT_EQ(c.resolve("/abs/x"), std::filesystem::path("/abs/x"));
    EXPECT_TRUE(c.resolve(c.paths.gold).empty());

    const auto j = to_json(c);
    EXPECT_EQ(j["run"]["seed"], 42);
    EXPECT_EQ(j["paths"]["corpus"], "reviews.csv");
    EXPECT_EQ(j["stats"]["levene_center"], "median");
}

TEST(Config, RejectsUnknownKeysAndBadValues) {
    EXPECT_THROW(parse_config("[run]\nsede = 1\n"), UsageError);
    EXPECT_THROW(parse_config("[nope]\nx = 1\n"), UsageError);
    EXPECT_THROW(parse_config("[run]\nseed = many\n"), UsageError);
    EXPECT_THROW(parse_config("[run]\nmode = fast\n"), UsageError);
    EXPECT_THROW(parse_config("[run]\ntrain_fraction = 0\n"), UsageError);
    EXPECT_THROW(parse_config("[run]\ntemperature = 3\n"), UsageError);
    EXPECT_THROW(parse_config("[rate]\nmax_in_flight = 0\n"), UsageError);
    EXPECT_THROW(parse_config("[eval]\nembed_score = maybe\n"), UsageError);
    EXPECT_THROW(parse_config("[prompting]\ncrc_similarity = bm25\n"), UsageError);
    EXPECT_THROW(load_config("/nonexistent/config.ini"), UsageError);
}

TEST(Config, LoadResolvesAgainstFileDirectory) {
    spmine::testing::TempDir dir;
    spmine::testing::write_file(dir / "c.ini", "[paths]\ncorpus = data/r.csv\n");
    const auto c = load_config(dir / "c.ini");
    EXPECT_EQ(c.resolve(c.paths.corpus), dir / "data/r.csv");
}
