#pragma once

#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <vector>

namespace ripple {

struct ProcessOptions {
    std::optional<std::filesystem::path> cwd;
    std::map<std::string, std::string> env;  // added to the inherited environment
    std::string stdin_data;
};

struct ProcessResult {
    int exit_code = -1;
    std::string out;
    std::string err;

    bool ok() const { return exit_code == 0; }
};

/// Runs argv[0] (PATH lookup) to completion, capturing both output streams.
/// Throws IoError if the process cannot be started.
ProcessResult run_process(const std::vector<std::string>& argv, const ProcessOptions& options = {});

/// Convenience for `/bin/sh -c <command>`.
ProcessResult run_shell(const std::string& command, const ProcessOptions& options = {});

/// A long-lived child speaking a line protocol over stdin/stdout.
/// stderr is inherited. The child is killed on destruction if still alive.
class ChildProcess {
public:
    ChildProcess(const std::vector<std::string>& argv, const ProcessOptions& options = {});
    ~ChildProcess();

    ChildProcess(const ChildProcess&) = delete;
    ChildProcess& operator=(const ChildProcess&) = delete;

    void write_line(const std::string& line);
    /// Returns nullopt on EOF.
    std::optional<std::string> read_line();
    void close_stdin();
    /// Waits for exit and returns the exit status.
    int wait();
    bool alive();
    int pid() const { return pid_; }

private:
    int pid_ = -1;
    int in_fd_ = -1;
    int out_fd_ = -1;
    std::string buffer_;
    std::optional<int> status_;
};

std::string shell_quote(const std::string& s);

}  // namespace ripple
