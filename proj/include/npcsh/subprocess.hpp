#pragma once

#include <atomic>
#include <chrono>
#include <filesystem>
#include <map>
#include <string>
#include <vector>

namespace npcsh {

// Set by the caller (Ctrl-C handler, harness timeout watcher) to abort an
// in-flight child process without tearing down the owner.
using CancelFlag = std::atomic<bool>;

struct CommandResult {
    int exit_code = 0;
    std::string out;
    std::string err;
    bool timed_out = false;
    bool cancelled = false;
    double duration_s = 0.0;

    bool ok() const { return exit_code == 0 && !timed_out && !cancelled; }
};

struct CommandOptions {
    std::filesystem::path workdir;                // empty = inherit cwd
    std::map<std::string, std::string> env;      // overlaid on the inherited env
    std::chrono::milliseconds timeout{0};        // 0 = unbounded
    const CancelFlag* cancel = nullptr;
    std::string stdin_data;
};

// Runs `/bin/sh -c command`. The child gets its own process group so a
// timeout or cancellation kills the whole pipeline, not just the shell.
CommandResult run_shell(const std::string& command, const CommandOptions& opts = {});

// Runs an argv directly (no shell).
CommandResult run_argv(const std::vector<std::string>& argv, const CommandOptions& opts = {});

} // namespace npcsh
