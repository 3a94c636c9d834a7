// Records the end-to-end cassette from the rule-based fake provider.
// usage: make_cassette <fixture-dir> <cassette-out> <scratch-dir>

#include <filesystem>
#include <iostream>

#include "e2e.hpp"
#include "fake_provider.hpp"
#include "spmine/config.hpp"
#include "spmine/error.hpp"

int main(int argc, char** argv) {
    if (argc != 4) {
        std::cerr << "usage: make_cassette <fixture-dir> <cassette-out> <scratch-dir>\n";
        return 1;
    }
    namespace fs = std::filesystem;
    const fs::path fixture = argv[1];
    const fs::path cassette = fs::absolute(argv[2]);
    const fs::path scratch = argv[3];
    try {
        fs::remove_all(scratch);
        fs::remove(cassette);
        spmine::testing::FakeProvider provider;
        spmine::ManualClock clock;
        spmine::StageContext ctx;
        ctx.config = spmine::load_config(fixture / "config.ini");
        ctx.config.mode = spmine::Mode::record;
        ctx.config.cassette = cassette;
        // One request at a time keeps the cassette's line order reproducible.
        ctx.config.batch.max_in_flight = 1;
        ctx.out = scratch;
        ctx.transport = &provider;
        ctx.clock = &clock;
        ctx.force = true;
        spmine::testing::run_full_pipeline(ctx);
        std::cout << "recorded " << provider.calls() << " requests into " << cassette.string() << "\n";
        return 0;
    } catch (const std::exception& e) {
        std::cerr << e.what() << "\n";
        return 2;
    }
}
