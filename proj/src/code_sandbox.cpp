#include "selfprompt/code_sandbox.hpp"

#include <fcntl.h>
#include <sched.h>
#include <signal.h>
#include <sys/resource.h>
#include <sys/wait.h>
#include <unistd.h>

#include <cstdlib>
#include <filesystem>
#include <map>
#include <mutex>
#include <thread>

namespace selfprompt::eval {

namespace fs = std::filesystem;

namespace {

constexpr int kIsolationFailed = 125;
constexpr int kExecFailed = 126;
constexpr std::size_t kMaxOutput = 4096;

struct TempDir {
    fs::path path;
    TempDir() {
        std::string tmpl = (fs::temp_directory_path() / "selfprompt-sbx-XXXXXX").string();
        if (!mkdtemp(tmpl.data())) throw IoError("cannot create sandbox directory");
        path = tmpl;
    }
    ~TempDir() {
        std::error_code ec;
        fs::remove_all(path, ec);
    }
};

[[noreturn]] void child_main(const SandboxConfig& config, const std::string& dir, const std::string& script,
                             const std::string& out_path) {
    setpgid(0, 0);
    if (config.require_isolation && unshare(CLONE_NEWUSER | CLONE_NEWNET) != 0) _exit(kIsolationFailed);

    const rlim_t cpu = static_cast<rlim_t>(config.timeout.count() / 1000 + 2);
    rlimit lim{cpu, cpu};
    setrlimit(RLIMIT_CPU, &lim);
    const rlim_t mem = static_cast<rlim_t>(config.memory_limit_mb) * 1024 * 1024;
    lim = {mem, mem};
    setrlimit(RLIMIT_AS, &lim);
    lim = {16 * 1024 * 1024, 16 * 1024 * 1024};
    setrlimit(RLIMIT_FSIZE, &lim);
    lim = {0, 0};
    setrlimit(RLIMIT_CORE, &lim);

    const int devnull = open("/dev/null", O_RDONLY);
    const int out = open(out_path.c_str(), O_WRONLY | O_CREAT | O_TRUNC, 0600);
    if (devnull < 0 || out < 0 || chdir(dir.c_str()) != 0) _exit(kExecFailed);
    dup2(devnull, STDIN_FILENO);
    dup2(out, STDOUT_FILENO);
    dup2(out, STDERR_FILENO);
    execlp(config.python.c_str(), config.python.c_str(), "-I", "-B", script.c_str(), static_cast<char*>(nullptr));
    _exit(kExecFailed);
}

SandboxResult run_in_child(const std::string& program, const SandboxConfig& config) {
    TempDir dir;
    const fs::path script = dir.path / "main.py";
    const fs::path out_path = dir.path / "output.txt";
    write_file(script, program);
    const std::string dir_s = dir.path.string(), script_s = script.string(), out_s = out_path.string();

    const pid_t pid = fork();
    if (pid < 0) throw IoError("fork failed");
    if (pid == 0) child_main(config, dir_s, script_s, out_s);

    SandboxResult result;
    const auto deadline = std::chrono::steady_clock::now() + config.timeout;
    int status = 0;
    auto pause = std::chrono::microseconds(200);
    while (true) {
        const pid_t r = waitpid(pid, &status, WNOHANG);
        if (r == pid) break;
        if (std::chrono::steady_clock::now() >= deadline) {
            kill(-pid, SIGKILL);
            kill(pid, SIGKILL);
            waitpid(pid, &status, 0);
            result.timed_out = true;
            break;
        }
        std::this_thread::sleep_for(pause);
        pause = std::min(pause * 2, std::chrono::microseconds(20'000));
    }
    if (!result.timed_out) kill(-pid, SIGKILL);  // stray grandchildren

    if (WIFEXITED(status)) {
        result.exit_code = WEXITSTATUS(status);
    } else if (WIFSIGNALED(status)) {
        result.exit_code = 128 + WTERMSIG(status);
    }
    std::error_code ec;
    if (fs::exists(out_path, ec)) {
        std::string out = read_file(out_path);
        if (out.size() > kMaxOutput) out = out.substr(out.size() - kMaxOutput);
        result.output = std::move(out);
    }
    if (result.timed_out) {
        result.output += "\n[timeout]";
    } else if (result.exit_code == kIsolationFailed) {
        result.output += "\n[isolation unavailable]";
    }
    result.passed = !result.timed_out && WIFEXITED(status) && result.exit_code == 0;
    return result;
}

}  // namespace

bool sandbox_available(const SandboxConfig& config) {
    static std::mutex mu;
    static std::map<std::pair<std::string, bool>, bool> probed;
    std::lock_guard lock(mu);
    const auto key = std::make_pair(config.python, config.require_isolation);
    if (auto it = probed.find(key); it != probed.end()) return it->second;
    SandboxConfig probe = config;
    probe.timeout = std::chrono::milliseconds(15'000);
    bool ok = false;
    try {
        ok = run_in_child("import sys\nsys.exit(0)\n", probe).passed;
    } catch (const Error&) {
        ok = false;
    }
    probed[key] = ok;
    return ok;
}

SandboxResult run_python(const std::string& program, const SandboxConfig& config) {
    if (config.timeout.count() <= 0) throw ValidationError("sandbox timeout must be positive");
    return run_in_child(program, config);
}

std::string humaneval_program(const std::string& candidate, const std::string& test_code,
                              const std::string& entry_point) {
    return candidate + "\n\n" + test_code + "\n\ncheck(" + entry_point + ")\n";
}

}  // namespace selfprompt::eval
