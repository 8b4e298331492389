#pragma once

// Runs untrusted Python in a child process: fresh user and network
// namespaces (no network), resource limits and a wall-clock deadline.

#include <chrono>
#include <string>

#include "selfprompt/text.hpp"

namespace selfprompt::eval {

struct SandboxConfig {
    std::string python = "python3";
    std::chrono::milliseconds timeout{10'000};
    /// Refuse to run when the network namespace cannot be created.
    bool require_isolation = true;
    std::size_t memory_limit_mb = 1024;
};

struct SandboxResult {
    bool passed = false;
    bool timed_out = false;
    int exit_code = 0;
    std::string output;  ///< combined stdout/stderr, truncated
};

/// Whether programs can run under `config` on this machine (probed once
/// per python/isolation combination).
bool sandbox_available(const SandboxConfig& config);

/// Passes when the program exits 0 before the deadline.
SandboxResult run_python(const std::string& program, const SandboxConfig& config);

/// Candidate code, the problem's test code, then `check(<entry_point>)`.
std::string humaneval_program(const std::string& candidate, const std::string& test_code,
                              const std::string& entry_point);

}  // namespace selfprompt::eval
