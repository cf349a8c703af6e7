#include "npcsh/subprocess.hpp"

#include <fcntl.h>
#include <poll.h>
#include <signal.h>
#include <sys/wait.h>
#include <unistd.h>

#include <cerrno>
#include <cstring>

extern char** environ;

namespace npcsh {

namespace {

struct Pipe {
    int fds[2] = {-1, -1};
    Pipe() {
        if (pipe(fds) != 0) throw std::runtime_error("pipe() failed");
    }
    ~Pipe() {
        close_read();
        close_write();
    }
    int read_end() const { return fds[0]; }
    int write_end() const { return fds[1]; }
    void close_read() {
        if (fds[0] >= 0) { ::close(fds[0]); fds[0] = -1; }
    }
    void close_write() {
        if (fds[1] >= 0) { ::close(fds[1]); fds[1] = -1; }
    }
};

void set_nonblocking(int fd) {
    int flags = fcntl(fd, F_GETFL, 0);
    fcntl(fd, F_SETFL, flags | O_NONBLOCK);
}

// Drains whatever is ready on fd into sink; returns false once the fd hits EOF.
bool drain(int fd, std::string& sink) {
    char buf[4096];
    for (;;) {
        ssize_t n = ::read(fd, buf, sizeof(buf));
        if (n > 0) {
            sink.append(buf, static_cast<size_t>(n));
        } else if (n == 0) {
            return false;
        } else {
            if (errno == EAGAIN || errno == EWOULDBLOCK) return true;
            if (errno == EINTR) continue;
            return false;
        }
    }
}

CommandResult run_child(const std::vector<std::string>& argv, const CommandOptions& opts) {
    auto started = std::chrono::steady_clock::now();

    Pipe out_pipe;
    Pipe err_pipe;
    Pipe in_pipe;

    pid_t pid = fork();
    if (pid < 0) throw std::runtime_error("fork() failed");

    if (pid == 0) {
        // child
        setpgid(0, 0);
        dup2(in_pipe.read_end(), STDIN_FILENO);
        dup2(out_pipe.write_end(), STDOUT_FILENO);
        dup2(err_pipe.write_end(), STDERR_FILENO);
        in_pipe.close_read();
        in_pipe.close_write();
        out_pipe.close_read();
        out_pipe.close_write();
        err_pipe.close_read();
        err_pipe.close_write();

        if (!opts.workdir.empty()) {
            if (chdir(opts.workdir.c_str()) != 0) {
                fprintf(stderr, "cannot chdir to %s: %s\n", opts.workdir.c_str(), strerror(errno));
                _exit(127);
            }
        }
        for (const auto& [k, v] : opts.env) {
            setenv(k.c_str(), v.c_str(), 1);
        }

        std::vector<char*> cargv;
        cargv.reserve(argv.size() + 1);
        for (const auto& a : argv) cargv.push_back(const_cast<char*>(a.c_str()));
        cargv.push_back(nullptr);
        execvp(cargv[0], cargv.data());
        fprintf(stderr, "exec %s failed: %s\n", cargv[0], strerror(errno));
        _exit(127);
    }

    // parent
    setpgid(pid, pid); // harmless if the child already did it
    in_pipe.close_read();
    out_pipe.close_write();
    err_pipe.close_write();

    if (!opts.stdin_data.empty()) {
        size_t off = 0;
        while (off < opts.stdin_data.size()) {
            ssize_t n = ::write(in_pipe.write_end(), opts.stdin_data.data() + off,
                                opts.stdin_data.size() - off);
            if (n < 0) {
                if (errno == EINTR) continue;
                break;
            }
            off += static_cast<size_t>(n);
        }
    }
    in_pipe.close_write();

    set_nonblocking(out_pipe.read_end());
    set_nonblocking(err_pipe.read_end());

    CommandResult result;
    bool out_open = true;
    bool err_open = true;
    bool killed = false;

    auto deadline = opts.timeout.count() > 0
                        ? started + opts.timeout
                        : std::chrono::steady_clock::time_point::max();

    while (out_open || err_open) {
        struct pollfd pfds[2];
        nfds_t n = 0;
        if (out_open) pfds[n++] = {out_pipe.read_end(), POLLIN, 0};
        if (err_open) pfds[n++] = {err_pipe.read_end(), POLLIN, 0};

        int wait_ms = 50;
        if (deadline != std::chrono::steady_clock::time_point::max()) {
            auto left = std::chrono::duration_cast<std::chrono::milliseconds>(
                            deadline - std::chrono::steady_clock::now())
                            .count();
            if (left < 0) left = 0;
            wait_ms = static_cast<int>(std::min<long long>(left, 50));
        }
        int rc = ::poll(pfds, n, wait_ms);
        if (rc < 0 && errno != EINTR) break;

        nfds_t i = 0;
        if (out_open) {
            if (pfds[i].revents & (POLLIN | POLLHUP)) out_open = drain(out_pipe.read_end(), result.out);
            ++i;
        }
        if (err_open) {
            if (pfds[i].revents & (POLLIN | POLLHUP)) err_open = drain(err_pipe.read_end(), result.err);
        }

        bool over_deadline = std::chrono::steady_clock::now() >= deadline;
        bool cancelled = opts.cancel && opts.cancel->load(std::memory_order_relaxed);
        if (!killed && (over_deadline || cancelled)) {
            ::kill(-pid, SIGKILL);
            killed = true;
            result.timed_out = over_deadline;
            result.cancelled = cancelled && !over_deadline;
        }
    }

    int status = 0;
    while (waitpid(pid, &status, 0) < 0 && errno == EINTR) {
    }

    if (WIFEXITED(status)) {
        result.exit_code = WEXITSTATUS(status);
    } else if (WIFSIGNALED(status)) {
        result.exit_code = 128 + WTERMSIG(status);
    } else {
        result.exit_code = -1;
    }
    result.duration_s = std::chrono::duration<double>(std::chrono::steady_clock::now() - started).count();
    return result;
}

} // namespace

CommandResult run_shell(const std::string& command, const CommandOptions& opts) {
    return run_child({"/bin/sh", "-c", command}, opts);
}

CommandResult run_argv(const std::vector<std::string>& argv, const CommandOptions& opts) {
    if (argv.empty()) throw std::runtime_error("run_argv: empty argv");
    return run_child(argv, opts);
}

} // namespace npcsh
