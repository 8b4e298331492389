#pragma once

// Command-line entry point: annotate, forge, train-plan, toy-train, eval,
// judge, analyze and report over one output directory.

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <string>
#include <utility>
#include <vector>

namespace selfprompt::cli {

struct ModelEndpoint {
    std::string name;
    std::string endpoint;
};

/// "NAME=ENDPOINT", or a bare endpoint that doubles as the name.
ModelEndpoint parse_model_endpoint(const std::string& spec);

struct PipelineConfig {
    std::filesystem::path output_dir = "out";
    std::filesystem::path dataset;
    std::filesystem::path benchmarks_dir;
    std::filesystem::path lima_test;
    std::string annotator_endpoint = "stub:annotator";
    std::string judge_endpoint = "stub:judge-longer";
    std::vector<std::string> models;
    std::vector<std::uint64_t> seeds = {0, 1, 2, 3};
    int template_id = 8;
    double sandbox_timeout = 10.0;
    std::string python = "python3";
    bool no_isolation = false;
    int max_concurrent = 4;
    int max_retries = 3;
    std::string auth_env;

    void validate() const;
};

/// Runs one subcommand. Returns the process exit status; messages go to
/// `out` and errors to `err`.
int run_command(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

int run_command(int argc, char** argv);

}  // namespace selfprompt::cli
