#include "dfqa/sandbox.hpp"

#include "dfqa/text.hpp"

#include <cerrno>
#include <csignal>
#include <cstdlib>
#include <cstring>
#include <fcntl.h>
#include <poll.h>
#include <sys/wait.h>
#include <unistd.h>

#include <mutex>
#include <stdexcept>

extern char** environ;

#ifndef DFQA_DEFAULT_WORKER_SCRIPT
#define DFQA_DEFAULT_WORKER_SCRIPT "python/dfqa/worker.py"
#endif

namespace dfqa::sandbox {

namespace {

using Clock = std::chrono::steady_clock;

enum class ReadStatus { Line, Timeout, Eof };

void ignore_sigpipe() {
    static std::once_flag once;
    std::call_once(once, [] { std::signal(SIGPIPE, SIG_IGN); });
}

bool write_all(int fd, std::string_view data) {
    while (!data.empty()) {
        const auto n = ::write(fd, data.data(), data.size());
        if (n < 0) {
            if (errno == EINTR) continue;
            return false;
        }
        data.remove_prefix(static_cast<std::size_t>(n));
    }
    return true;
}

std::string describe_exit(int status) {
    if (WIFSIGNALED(status)) return "killed by signal " + std::to_string(WTERMSIG(status));
    if (WIFEXITED(status)) return "exited with status " + std::to_string(WEXITSTATUS(status));
    return "stopped";
}

}  // namespace

struct Pool::Worker {
    pid_t pid = -1;
    int to_worker = -1;
    int from_worker = -1;
    std::string buffer;
    bool ready = false;
    int exit_status = 0;
    bool reaped = false;

    ~Worker() { terminate(); }

    void terminate() {
        if (to_worker >= 0) ::close(to_worker);
        if (from_worker >= 0) ::close(from_worker);
        to_worker = from_worker = -1;
        if (pid > 0 && !reaped) {
            ::kill(-pid, SIGKILL);
            ::kill(pid, SIGKILL);
            while (::waitpid(pid, &exit_status, 0) < 0 && errno == EINTR) {
            }
            reaped = true;
        }
    }

    /// Exit description for a worker whose stdout hit EOF.
    std::string reap() {
        if (pid > 0 && !reaped) {
            // The process closed stdout; give it a moment to finish dying.
            const auto until = Clock::now() + std::chrono::milliseconds(500);
            while (Clock::now() < until) {
                const auto r = ::waitpid(pid, &exit_status, WNOHANG);
                if (r == pid) {
                    reaped = true;
                    break;
                }
                ::usleep(5000);
            }
        }
        return reaped ? describe_exit(exit_status) : "closed its output";
    }

    ReadStatus read_line(Clock::time_point deadline, std::string& line) {
        char chunk[65536];
        while (true) {
            if (const auto nl = buffer.find('\n'); nl != std::string::npos) {
                line = buffer.substr(0, nl);
                buffer.erase(0, nl + 1);
                return ReadStatus::Line;
            }
            const auto remaining = std::chrono::duration_cast<std::chrono::milliseconds>(deadline - Clock::now());
            if (remaining.count() <= 0) return ReadStatus::Timeout;
            pollfd pfd{from_worker, POLLIN, 0};
            const int rc = ::poll(&pfd, 1, static_cast<int>(std::min<long long>(remaining.count() + 1, 1 << 30)));
            if (rc < 0) {
                if (errno == EINTR) continue;
                return ReadStatus::Eof;
            }
            if (rc == 0) continue;
            const auto n = ::read(from_worker, chunk, sizeof chunk);
            if (n < 0) {
                if (errno == EINTR || errno == EAGAIN) continue;
                return ReadStatus::Eof;
            }
            if (n == 0) return ReadStatus::Eof;
            buffer.append(chunk, static_cast<std::size_t>(n));
        }
    }
};

HandshakeMismatch::HandshakeMismatch(int worker, int host)
    : Error("protocol version mismatch: worker speaks " + std::to_string(worker) + ", host speaks " +
            std::to_string(host)),
      worker_version(worker),
      host_version(host) {}

std::vector<std::string> default_worker_command() {
    const char* py = std::getenv("DFQA_PYTHON");
    const char* script = std::getenv("DFQA_WORKER_SCRIPT");
    return {py && *py ? py : "python3", script && *script ? script : DFQA_DEFAULT_WORKER_SCRIPT};
}

Pool::Pool(PoolOptions options) : options_(std::move(options)) {
    if (options_.size == 0) throw std::invalid_argument("pool size must be at least 1");
    if (options_.command.empty()) options_.command = default_worker_command();
    ignore_sigpipe();
    std::vector<std::unique_ptr<Worker>> started;
    for (std::size_t i = 0; i < options_.size; ++i) started.push_back(spawn());
    // Spawn first, then handshake, so interpreter start-up overlaps.
    for (auto& w : started) handshake(*w);
    std::lock_guard lock(mu_);
    live_ = started.size();
    idle_ = std::move(started);
}

Pool::~Pool() { shutdown(); }

std::unique_ptr<Pool::Worker> Pool::spawn() {
    std::vector<std::string> env_strings;
    const std::vector<std::pair<std::string, std::string>> overrides{
        {"OPENBLAS_NUM_THREADS", "1"}, {"OMP_NUM_THREADS", "1"},         {"MKL_NUM_THREADS", "1"},
        {"PYTHONHASHSEED", "0"},       {"PYTHONDONTWRITEBYTECODE", "1"}, {"PYTHONUNBUFFERED", "1"},
    };
    for (char** e = environ; e && *e; ++e) {
        const std::string_view entry(*e);
        bool replaced = false;
        for (const auto& [k, v] : overrides) {
            if (entry.size() > k.size() && entry.substr(0, k.size()) == k && entry[k.size()] == '=') replaced = true;
        }
        if (!replaced) env_strings.emplace_back(entry);
    }
    for (const auto& [k, v] : overrides) env_strings.push_back(k + "=" + v);

    std::vector<char*> argv;
    for (auto& a : options_.command) argv.push_back(a.data());
    argv.push_back(nullptr);
    std::vector<char*> envp;
    for (auto& e : env_strings) envp.push_back(e.data());
    envp.push_back(nullptr);

    int in_pipe[2], out_pipe[2], err_pipe[2];
    if (::pipe2(in_pipe, O_CLOEXEC) != 0) throw SpawnError(std::string("pipe: ") + std::strerror(errno));
    if (::pipe2(out_pipe, O_CLOEXEC) != 0) {
        ::close(in_pipe[0]);
        ::close(in_pipe[1]);
        throw SpawnError(std::string("pipe: ") + std::strerror(errno));
    }
    if (::pipe2(err_pipe, O_CLOEXEC) != 0) {
        for (int fd : {in_pipe[0], in_pipe[1], out_pipe[0], out_pipe[1]}) ::close(fd);
        throw SpawnError(std::string("pipe: ") + std::strerror(errno));
    }
    const int devnull = options_.inherit_stderr ? -1 : ::open("/dev/null", O_WRONLY | O_CLOEXEC);

    const pid_t pid = ::fork();
    if (pid < 0) {
        for (int fd : {in_pipe[0], in_pipe[1], out_pipe[0], out_pipe[1], err_pipe[0], err_pipe[1], devnull}) {
            if (fd >= 0) ::close(fd);
        }
        throw SpawnError(std::string("fork: ") + std::strerror(errno));
    }
    if (pid == 0) {
        // Only async-signal-safe calls until exec.
        ::setpgid(0, 0);
        ::dup2(in_pipe[0], STDIN_FILENO);
        ::dup2(out_pipe[1], STDOUT_FILENO);
        if (devnull >= 0) ::dup2(devnull, STDERR_FILENO);
        ::execvpe(argv[0], argv.data(), envp.data());
        const int err = errno;
        [[maybe_unused]] auto ignored = ::write(err_pipe[1], &err, sizeof err);
        ::_exit(127);
    }
    ::close(in_pipe[0]);
    ::close(out_pipe[1]);
    ::close(err_pipe[1]);
    if (devnull >= 0) ::close(devnull);

    auto w = std::make_unique<Worker>();
    w->pid = pid;
    w->to_worker = in_pipe[1];
    w->from_worker = out_pipe[0];

    int child_errno = 0;
    ssize_t n;
    while ((n = ::read(err_pipe[0], &child_errno, sizeof child_errno)) < 0 && errno == EINTR) {
    }
    ::close(err_pipe[0]);
    if (n > 0) {
        w->terminate();
        throw SpawnError("cannot execute '" + options_.command.front() + "': " + std::strerror(child_errno));
    }
    return w;
}

void Pool::handshake(Worker& w) {
    std::string line;
    const auto status = w.read_line(Clock::now() + options_.handshake_timeout, line);
    if (status == ReadStatus::Timeout) {
        w.terminate();
        throw SpawnError("worker did not send hello within the handshake timeout");
    }
    if (status == ReadStatus::Eof) throw SpawnError("worker exited before hello: " + w.reap());
    int version = 0;
    try {
        version = protocol::parse_hello(protocol::parse_frame(line));
    } catch (const protocol::ProtocolError& e) {
        w.terminate();
        throw SpawnError(std::string("bad hello frame: ") + e.what());
    }
    if (version != protocol::kProtocolVersion) {
        w.terminate();
        throw HandshakeMismatch(version, protocol::kProtocolVersion);
    }
    w.ready = true;
    std::lock_guard lock(mu_);
    ++handshakes_;
}

void Pool::replace(std::unique_ptr<Worker>& w) {
    w->terminate();
    try {
        // The new worker's hello is read lazily, on its first request.
        w = spawn();
    } catch (const SpawnError&) {
        w.reset();
    }
}

std::unique_ptr<Pool::Worker> Pool::acquire() {
    std::unique_lock lock(mu_);
    idle_cv_.wait(lock, [&] { return closed_ || !idle_.empty() || live_ == 0; });
    if (closed_) throw Error("pool is shut down");
    if (idle_.empty()) throw SpawnError("no live workers remain in the pool");
    auto w = std::move(idle_.back());
    idle_.pop_back();
    return w;
}

void Pool::release(std::unique_ptr<Worker> w) {
    {
        std::lock_guard lock(mu_);
        if (!w) {
            --live_;
        } else if (closed_) {
            --live_;
            w.reset();
        } else {
            idle_.push_back(std::move(w));
        }
    }
    idle_cv_.notify_one();
}

ExecResponse Pool::execute(const ExecRequest& request) {
    protocol::check_limits(request.limits);
    if (!request.table) throw std::invalid_argument("ExecRequest.table is null");
    const auto frame = protocol::exec_line(request.request_id, *request.table, request.query, request.limits) + "\n";

    auto w = acquire();
    ExecResponse response{request.request_id, ExecError{}, 0};
    const auto finish = [&](bool timeout, bool crash) {
        {
            std::lock_guard lock(mu_);
            ++summary_.executed;
            if (timeout) ++summary_.timeouts;
            if (crash) ++summary_.crashes;
        }
        release(std::move(w));
        return response;
    };
    const auto fail = [&](ExecErrorKind kind, std::string message) {
        response.result = ExecError{kind, std::move(message)};
    };

    if (!w->ready) {
        try {
            handshake(*w);
        } catch (const std::exception& e) {
            fail(ExecErrorKind::RuntimeError, std::string("worker unavailable: ") + e.what());
            replace(w);
            return finish(false, true);
        }
    }

    const auto start = Clock::now();
    if (!write_all(w->to_worker, frame)) {
        fail(ExecErrorKind::RuntimeError, "worker crashed: " + w->reap());
        replace(w);
        return finish(false, true);
    }
    const auto deadline = start + std::chrono::duration_cast<Clock::duration>(
                                      std::chrono::duration<double>(request.limits.wall_seconds));
    std::string line;
    const auto status = w->read_line(deadline, line);
    response.wall_ms =
        std::chrono::duration_cast<std::chrono::milliseconds>(Clock::now() - start).count();
    if (status == ReadStatus::Timeout) {
        fail(ExecErrorKind::Timeout, "wall clock limit of " + text::format_number(request.limits.wall_seconds) +
                                         "s exceeded; worker killed");
        replace(w);
        return finish(true, false);
    }
    if (status == ReadStatus::Eof) {
        fail(ExecErrorKind::RuntimeError, "worker crashed: " + w->reap());
        replace(w);
        return finish(false, true);
    }
    try {
        auto frame_in = protocol::parse_result(protocol::parse_frame(line));
        if (frame_in.request_id != request.request_id) {
            throw protocol::ProtocolError("reply for '" + frame_in.request_id + "' while waiting for '" +
                                          request.request_id + "'");
        }
        if (const auto problems = validate_result(frame_in.result); !problems.empty()) {
            fail(ExecErrorKind::RuntimeError, "invalid result payload: " + problems.front());
        } else {
            response.result = std::move(frame_in.result);
            response.wall_ms = frame_in.wall_ms;
        }
    } catch (const protocol::ProtocolError& e) {
        fail(ExecErrorKind::RuntimeError, std::string("worker crashed: ") + e.what());
        replace(w);
        return finish(false, true);
    }
    return finish(false, false);
}

PoolSummary Pool::shutdown() {
    std::vector<std::unique_ptr<Worker>> idle;
    {
        std::lock_guard lock(mu_);
        if (closed_) return summary_;
        closed_ = true;
        idle = std::move(idle_);
        idle_.clear();
        live_ -= idle.size();
    }
    idle_cv_.notify_all();
    idle.clear();  // destructors kill and reap
    std::lock_guard lock(mu_);
    return summary_;
}

PoolSummary Pool::summary() const {
    std::lock_guard lock(mu_);
    return summary_;
}

std::size_t Pool::live_workers() const {
    std::lock_guard lock(mu_);
    return live_;
}

std::size_t Pool::handshakes() const {
    std::lock_guard lock(mu_);
    return handshakes_;
}

}  // namespace dfqa::sandbox
