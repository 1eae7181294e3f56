#pragma once

// Pool of restricted executor worker processes speaking the NDJSON protocol
// over stdin/stdout. Wall-clock limits are enforced here by killing the
// worker; memory limits are enforced by the worker itself.

#include "dfqa/model.hpp"
#include "dfqa/protocol.hpp"

#include <chrono>
#include <condition_variable>
#include <cstdint>
#include <memory>
#include <mutex>
#include <string>
#include <vector>

namespace dfqa::sandbox {

using protocol::Limits;

class SpawnError : public Error {
public:
    using Error::Error;
};

class HandshakeMismatch : public Error {
public:
    HandshakeMismatch(int worker_version, int host_version);
    int worker_version;
    int host_version;
};

struct ExecRequest {
    std::string request_id;
    const DataTable* table = nullptr;
    std::string query;
    Limits limits;
};

struct ExecResponse {
    std::string request_id;
    CanonResult result;
    std::int64_t wall_ms = 0;
};

/// Anything that can run a query against a table.
class Executor {
public:
    virtual ~Executor() = default;
    virtual ExecResponse execute(const ExecRequest& request) = 0;
};

struct PoolSummary {
    std::size_t executed = 0;
    std::size_t timeouts = 0;
    std::size_t crashes = 0;
    friend bool operator==(const PoolSummary&, const PoolSummary&) = default;
};

struct PoolOptions {
    std::size_t size = 1;
    /// argv of the worker process; empty means default_worker_command().
    std::vector<std::string> command;
    std::chrono::milliseconds handshake_timeout{60000};
    /// Forward worker stderr to ours instead of discarding it.
    bool inherit_stderr = false;
};

/// `$DFQA_PYTHON` (default python3) running `$DFQA_WORKER_SCRIPT`, falling
/// back to the worker script of this source tree.
std::vector<std::string> default_worker_command();

class Pool : public Executor {
public:
    /// Spawns `options.size` workers and completes every handshake.
    /// Throws std::invalid_argument for size 0, SpawnError, HandshakeMismatch.
    explicit Pool(PoolOptions options);
    ~Pool() override;
    Pool(const Pool&) = delete;
    Pool& operator=(const Pool&) = delete;

    /// Blocks until a worker is idle. Never throws for query-level problems;
    /// timeouts, crashes and transport failures become ExecError results.
    ExecResponse execute(const ExecRequest& request) override;

    PoolSummary shutdown();
    PoolSummary summary() const;
    std::size_t size() const { return options_.size; }
    /// Workers with a live process.
    std::size_t live_workers() const;
    std::size_t handshakes() const;

private:
    struct Worker;
    std::unique_ptr<Worker> spawn();
    void handshake(Worker& w);
    void replace(std::unique_ptr<Worker>& w);
    std::unique_ptr<Worker> acquire();
    void release(std::unique_ptr<Worker> w);

    PoolOptions options_;
    mutable std::mutex mu_;
    std::condition_variable idle_cv_;
    std::vector<std::unique_ptr<Worker>> idle_;
    std::size_t live_ = 0;
    std::size_t handshakes_ = 0;
    PoolSummary summary_;
    bool closed_ = false;
};

}  // namespace dfqa::sandbox
