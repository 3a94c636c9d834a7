#include <gtest/gtest.h>

#include <cstdlib>
#include <fstream>

#include "e2e.hpp"
#include "spmine/config.hpp"
#include "spmine/error.hpp"
#include "test_util.hpp"

using namespace spmine;
namespace fs = std::filesystem;

namespace {

fs::path e2e_dir() { return spmine::testing::fixture_dir() / "e2e"; }

StageContext replay_context(const fs::path& out) {
    StageContext ctx;
    ctx.config = load_config(e2e_dir() / "config.ini");
    ctx.out = out;
    return ctx;
}

std::size_t line_count(const fs::path& p) {
    std::ifstream in(p);
    std::size_t n = 0;
    for (std::string line; std::getline(in, line);) n += !line.empty();
    return n;
}

int run_cli(const std::string& args, const fs::path& log) {
    const auto cmd = std::string(SPMINE_CLI_PATH) + " " + args + " > " + log.string() + " 2>&1";
    const int status = std::system(cmd.c_str());
    return WIFEXITED(status) ? WEXITSTATUS(status) : -1;
}

}  // namespace

TEST(Pipeline, ReplayRunsEveryStage) {
    spmine::testing::TempDir dir;
    const auto outcomes = spmine::testing::run_full_pipeline(replay_context(dir.path()));
    ASSERT_EQ(outcomes.size(), 15u);
    for (const auto& o : outcomes) {
        EXPECT_FALSE(o.skipped) << o.stage;
        for (const auto& p : o.outputs) EXPECT_TRUE(fs::exists(p)) << p;
    }
    EXPECT_EQ(line_count(dir / files::crc_train) + line_count(dir / files::crc_validation), 10u);
    EXPECT_EQ(line_count(dir / files::crc_validation), 2u);
    EXPECT_TRUE(fs::exists(dir / files::stats));
}

TEST(Pipeline, SecondRunIsCachedUnlessForced) {
    spmine::testing::TempDir dir;
    auto ctx = replay_context(dir.path());
    spmine::testing::run_full_pipeline(ctx);
    const auto before = spmine::testing::read_file(dir / files::classified);
    for (const auto& o : spmine::testing::run_full_pipeline(ctx)) EXPECT_TRUE(o.skipped) << o.stage;

    // Touching an output invalidates that stage only.
    spmine::testing::write_file(dir / files::stats, "{}");
    EXPECT_FALSE(run_stats(ctx).skipped);
    EXPECT_TRUE(run_classify(ctx).skipped);

    ctx.force = true;
    const auto forced = run_classify(ctx);
    EXPECT_FALSE(forced.skipped);
    EXPECT_EQ(spmine::testing::read_file(dir / files::classified), before);
}

TEST(Pipeline, MissingInputsAreDataErrors) {
    spmine::testing::TempDir dir;
    auto ctx = replay_context(dir.path());
    EXPECT_THROW(run_classify(ctx), Error);
    ctx.config.paths.corpus = dir / "absent.csv";
    try {
        run_ingest(ctx);
        FAIL() << "expected an error";
    } catch (const Error& e) {
        EXPECT_EQ(e.family(), ErrorFamily::data);
    }
}

TEST(Cli, ExitCodes) {
    spmine::testing::TempDir dir;
    const auto config = (e2e_dir() / "config.ini").string();
    const auto out = (dir / "out").string();
    EXPECT_EQ(run_cli("no-such-command", dir / "log"), 1);
    EXPECT_EQ(run_cli("report bogus", dir / "log"), 1);
    EXPECT_EQ(run_cli("--config " + config + " --out " + out + " ingest", dir / "log"), 0);
    EXPECT_EQ(run_cli("--config " + config + " --out " + out + " preprocess", dir / "log"), 0);

    spmine::testing::write_file(dir / "bad.ini", "[paths]\ncorpus = missing.csv\n");
    EXPECT_EQ(run_cli("--config " + (dir / "bad.ini").string() + " --out " + out + "2 ingest", dir / "log"), 2);

    // A different seed changes the split, so the recorded requests no longer match.
    EXPECT_EQ(run_cli("--config " + config + " --seed 9 --out " + out + " build-finetune crc", dir / "log"), 3);
    EXPECT_NE(spmine::testing::read_file(dir / "log").find("CassetteMiss"), std::string::npos);
}
