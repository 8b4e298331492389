// Writes the synthetic corpora used for offline runs.

#include <iostream>

#include <CLI11.hpp>

#include "selfprompt/demo_data.hpp"

int main(int argc, char** argv) {
    CLI::App app{"Write a LIMA-shaped stand-in, the eight benchmarks and LIMA-test questions."};
    std::string dir = "demo";
    std::size_t lima_size = 50;
    std::uint64_t seed = 0;
    app.add_option("dir", dir, "Destination directory")->capture_default_str();
    app.add_option("--lima-size", lima_size, "Dialogues in the stand-in")->capture_default_str();
    app.add_option("--seed", seed)->capture_default_str();
    CLI11_PARSE(app, argc, argv);
    try {
        const auto p = selfprompt::demo::write_demo_data(dir, lima_size, seed);
        std::cout << p.lima.string() << "\n" << p.benchmarks.string() << "\n" << p.lima_test.string() << "\n";
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    }
    return 0;
}
