#include "ripple/process.hpp"

#include "ripple/error.hpp"

#include <cerrno>
#include <csignal>
#include <cstring>
#include <fcntl.h>
#include <poll.h>
#include <sys/wait.h>
#include <unistd.h>

extern char** environ;

namespace ripple {

namespace {

struct Pipe {
    int fds[2] = {-1, -1};
    Pipe() {
        if (::pipe2(fds, O_CLOEXEC) != 0) throw IoError(std::string("pipe: ") + std::strerror(errno));
    }
    int read_end() const { return fds[0]; }
    int write_end() const { return fds[1]; }
};

void close_fd(int& fd) {
    if (fd >= 0) ::close(fd);
    fd = -1;
}

std::vector<std::string> merged_environment(const std::map<std::string, std::string>& extra) {
    std::map<std::string, std::string> env;
    for (char** e = environ; e && *e; ++e) {
        std::string kv(*e);
        const auto eq = kv.find('=');
        if (eq == std::string::npos) continue;
        env[kv.substr(0, eq)] = kv.substr(eq + 1);
    }
    for (const auto& [k, v] : extra) env[k] = v;
    std::vector<std::string> out;
    out.reserve(env.size());
    for (const auto& [k, v] : env) out.push_back(k + "=" + v);
    return out;
}

// Forks and execs; the child's stdin/stdout/stderr are dup'ed from the given fds
// (-1 keeps the parent's descriptor).
int spawn(const std::vector<std::string>& argv, const ProcessOptions& options, int in_fd, int out_fd,
          int err_fd) {
    if (argv.empty()) throw IoError("spawn: empty argv");
    std::vector<std::string> env_strings = merged_environment(options.env);
    std::vector<char*> envp;
    for (auto& s : env_strings) envp.push_back(s.data());
    envp.push_back(nullptr);
    std::vector<std::string> args = argv;
    std::vector<char*> cargs;
    for (auto& s : args) cargs.push_back(s.data());
    cargs.push_back(nullptr);
    const std::string cwd = options.cwd ? options.cwd->string() : std::string();

    Pipe status;  // reports exec failure to the parent
    const pid_t pid = ::fork();
    if (pid < 0) throw IoError(std::string("fork: ") + std::strerror(errno));
    if (pid == 0) {
        if (in_fd >= 0) ::dup2(in_fd, STDIN_FILENO);
        if (out_fd >= 0) ::dup2(out_fd, STDOUT_FILENO);
        if (err_fd >= 0) ::dup2(err_fd, STDERR_FILENO);
        if (!cwd.empty() && ::chdir(cwd.c_str()) != 0) {
            int e = errno;
            (void)!::write(status.write_end(), &e, sizeof e);
            ::_exit(127);
        }
        environ = envp.data();
        ::execvp(cargs[0], cargs.data());
        int e = errno;
        (void)!::write(status.write_end(), &e, sizeof e);
        ::_exit(127);
    }
    ::close(status.fds[1]);
    int child_errno = 0;
    const auto n = ::read(status.read_end(), &child_errno, sizeof child_errno);
    ::close(status.fds[0]);
    if (n == sizeof child_errno) {
        int st;
        ::waitpid(pid, &st, 0);
        throw IoError("cannot start '" + argv[0] + "': " + std::strerror(child_errno));
    }
    return pid;
}

int decode_status(int st) {
    if (WIFEXITED(st)) return WEXITSTATUS(st);
    if (WIFSIGNALED(st)) return 128 + WTERMSIG(st);
    return -1;
}

}  // namespace

ProcessResult run_process(const std::vector<std::string>& argv, const ProcessOptions& options) {
    Pipe in, out, err;
    const int pid = spawn(argv, options, in.read_end(), out.write_end(), err.write_end());
    ::close(in.fds[0]);
    ::close(out.fds[1]);
    ::close(err.fds[1]);
    int in_fd = in.fds[1];
    int out_fd = out.fds[0];
    int err_fd = err.fds[0];

    ProcessResult result;
    std::size_t written = 0;
    const std::string& input = options.stdin_data;
    if (input.empty()) close_fd(in_fd);
    else ::fcntl(in_fd, F_SETFL, O_NONBLOCK);

    char buf[8192];
    while (out_fd >= 0 || err_fd >= 0) {
        std::vector<pollfd> fds;
        if (out_fd >= 0) fds.push_back({out_fd, POLLIN, 0});
        if (err_fd >= 0) fds.push_back({err_fd, POLLIN, 0});
        if (in_fd >= 0) fds.push_back({in_fd, POLLOUT, 0});
        if (::poll(fds.data(), fds.size(), -1) < 0) {
            if (errno == EINTR) continue;
            break;
        }
        for (const auto& p : fds) {
            if (!p.revents) continue;
            if (p.fd == in_fd) {
                const auto n = ::write(in_fd, input.data() + written, input.size() - written);
                if (n > 0) written += static_cast<std::size_t>(n);
                if (n < 0 && errno != EAGAIN) written = input.size();
                if (written >= input.size()) close_fd(in_fd);
                continue;
            }
            const auto n = ::read(p.fd, buf, sizeof buf);
            if (n > 0) {
                (p.fd == out_fd ? result.out : result.err).append(buf, static_cast<std::size_t>(n));
            } else if (n == 0 || errno != EINTR) {
                if (p.fd == out_fd) close_fd(out_fd);
                else close_fd(err_fd);
            }
        }
    }
    close_fd(in_fd);
    int st = 0;
    while (::waitpid(pid, &st, 0) < 0 && errno == EINTR) {
    }
    result.exit_code = decode_status(st);
    return result;
}

ProcessResult run_shell(const std::string& command, const ProcessOptions& options) {
    return run_process({"/bin/sh", "-c", command}, options);
}

ChildProcess::ChildProcess(const std::vector<std::string>& argv, const ProcessOptions& options) {
    Pipe in, out;
    pid_ = spawn(argv, options, in.read_end(), out.write_end(), -1);
    ::close(in.fds[0]);
    ::close(out.fds[1]);
    in_fd_ = in.fds[1];
    out_fd_ = out.fds[0];
}

ChildProcess::~ChildProcess() {
    close_fd(in_fd_);
    if (!status_ && pid_ > 0) {
        if (alive()) {
            ::kill(pid_, SIGKILL);
        }
        if (!status_) {
            int st;
            ::waitpid(pid_, &st, 0);
        }
    }
    close_fd(out_fd_);
}

void ChildProcess::write_line(const std::string& line) {
    if (in_fd_ < 0) throw IoError("child stdin closed");
    std::string data = line + "\n";
    std::size_t off = 0;
    while (off < data.size()) {
        const auto n = ::write(in_fd_, data.data() + off, data.size() - off);
        if (n < 0) {
            if (errno == EINTR) continue;
            throw IoError(std::string("write to child: ") + std::strerror(errno));
        }
        off += static_cast<std::size_t>(n);
    }
}

std::optional<std::string> ChildProcess::read_line() {
    for (;;) {
        const auto nl = buffer_.find('\n');
        if (nl != std::string::npos) {
            std::string line = buffer_.substr(0, nl);
            buffer_.erase(0, nl + 1);
            return line;
        }
        if (out_fd_ < 0) return std::nullopt;
        char buf[4096];
        const auto n = ::read(out_fd_, buf, sizeof buf);
        if (n < 0 && errno == EINTR) continue;
        if (n <= 0) {
            close_fd(out_fd_);
            if (buffer_.empty()) return std::nullopt;
            std::string rest = std::move(buffer_);
            buffer_.clear();
            return rest;
        }
        buffer_.append(buf, static_cast<std::size_t>(n));
    }
}

void ChildProcess::close_stdin() { close_fd(in_fd_); }

int ChildProcess::wait() {
    if (status_) return *status_;
    close_fd(in_fd_);
    int st = 0;
    while (::waitpid(pid_, &st, 0) < 0 && errno == EINTR) {
    }
    status_ = decode_status(st);
    return *status_;
}

bool ChildProcess::alive() {
    if (status_) return false;
    int st = 0;
    const auto r = ::waitpid(pid_, &st, WNOHANG);
    if (r == pid_) {
        status_ = decode_status(st);
        return false;
    }
    return r == 0;
}

std::string shell_quote(const std::string& s) {
    std::string out = "'";
    for (char c : s) {
        if (c == '\'') out += "'\\''";
        else out += c;
    }
    out += "'";
    return out;
}

}  // namespace ripple
