#include "doctest.h"

#include "dfqa/json_io.hpp"
#include "dfqa/protocol.hpp"
#include "dfqa/sandbox.hpp"
#include "oracles.hpp"

#include <chrono>
#include <filesystem>
#include <thread>

using namespace dfqa;
using namespace dfqa::sandbox;

namespace {

DataTable abalone_like() {
    DataTable t;
    t.schema.table_id = "abalone";
    t.schema.columns = {{"Sex", Dtype::String, {}, {}}, {"Shell_weight", Dtype::Float, {}, {}}, {"Rings", Dtype::Int, {}, {}}};
    t.rows = {{std::string("M"), 0.15, std::int64_t{15}},
              {std::string("F"), 0.21, std::int64_t{9}},
              {std::string("M"), 0.07, std::int64_t{9}},
              {std::string("I"), 0.03, std::int64_t{7}}};
    return t;
}

std::vector<std::string> fake_worker(const std::string& version = "1") {
    return {"env", "VERSION=" + version, "python3", std::string(DFQA_SOURCE_DIR) + "/tests/fixtures/fake_worker.py"};
}

ExecRequest req(const std::string& id, const DataTable& t, const std::string& q, double wall = 10) {
    ExecRequest r;
    r.request_id = id;
    r.table = &t;
    r.query = q;
    r.limits.wall_seconds = wall;
    return r;
}

ExecErrorKind error_kind(const CanonResult& r) {
    REQUIRE(is_error(r));
    return std::get<ExecError>(r).kind;
}

}  // namespace

TEST_CASE("protocol frames round-trip") {
    const auto t = abalone_like();
    protocol::Limits lim{2.5, 256, 1000};
    const auto frame = protocol::parse_exec(protocol::parse_frame(protocol::exec_line("r1", t, "result = 1", lim)));
    CHECK(frame.request_id == "r1");
    CHECK(frame.query == "result = 1");
    CHECK(frame.limits == lim);
    CHECK(frame.table == table_to_wire(t));
    CHECK(protocol::parse_hello(protocol::parse_frame(protocol::hello_line())) == protocol::kProtocolVersion);

    oracle::ResultGen gen(5);
    for (int i = 0; i < 500; ++i) {
        protocol::ResultFrame rf{"id" + std::to_string(i), gen.result(), i};
        const auto back = protocol::parse_result(protocol::parse_frame(protocol::result_line(rf)));
        CHECK(back.request_id == rf.request_id);
        CHECK(back.result == rf.result);
        CHECK(back.wall_ms == i);
    }
    CHECK_THROWS_AS(protocol::parse_frame("not json"), protocol::ProtocolError);
    CHECK_THROWS_AS(protocol::parse_frame("{\"x\":1}"), protocol::ProtocolError);
    CHECK_THROWS_AS(protocol::parse_result(protocol::parse_frame(R"({"type":"hello","protocol_version":1})")),
                    protocol::ProtocolError);
    CHECK_THROWS_AS(protocol::check_limits({0, 512, 10}), std::invalid_argument);
    CHECK_THROWS_AS(protocol::check_limits({1, 0, 10}), std::invalid_argument);
}

TEST_CASE("pool construction errors") {
    CHECK_THROWS_AS(Pool(PoolOptions{0, default_worker_command()}), std::invalid_argument);
    CHECK_THROWS_AS(Pool(PoolOptions{1, {"/nonexistent/dfqa-worker"}}), SpawnError);
    try {
        Pool p(PoolOptions{1, fake_worker("7")});
        FAIL("expected a handshake mismatch");
    } catch (const HandshakeMismatch& e) {
        CHECK(e.worker_version == 7);
        CHECK(e.host_version == protocol::kProtocolVersion);
        CHECK(std::string(e.what()).find("worker speaks 7") != std::string::npos);
    }
}

TEST_CASE("crashes and protocol violations replace the worker") {
    const auto t = abalone_like();
    Pool pool(PoolOptions{1, fake_worker()});
    CHECK(pool.execute(req("a", t, "ok")).result == CanonResult{Scalar::number(4)});
    for (const char* marker : {"CRASH", "GARBAGE", "WRONGID"}) {
        CAPTURE(marker);
        const auto r = pool.execute(req("b", t, marker)).result;
        CHECK(error_kind(r) == ExecErrorKind::RuntimeError);
        CHECK(pool.live_workers() == 1);
        CHECK(pool.execute(req("c", t, "ok")).result == CanonResult{Scalar::number(4)});
    }
    const auto r = pool.execute(req("d", t, "CRASH")).result;
    CHECK(std::get<ExecError>(r).message.find("signal 9") != std::string::npos);
    const auto s = pool.summary();
    CHECK(s.crashes == 4);
    CHECK(s.executed == 8);
    CHECK(pool.shutdown() == s);
    CHECK(pool.live_workers() == 0);
}

TEST_CASE("timeouts kill within the deadline and restore the pool") {
    const auto t = abalone_like();
    Pool pool(PoolOptions{2, fake_worker()});
    const auto start = std::chrono::steady_clock::now();
    const auto r = pool.execute(req("h", t, "HANG", 1.0)).result;
    const auto took = std::chrono::steady_clock::now() - start;
    CHECK(error_kind(r) == ExecErrorKind::Timeout);
    CHECK(took < std::chrono::seconds(3));
    CHECK(pool.live_workers() == 2);
    CHECK(pool.summary().timeouts == 1);
    CHECK(pool.execute(req("ok", t, "ok")).result == CanonResult{Scalar::number(4)});
}

TEST_CASE("concurrent submissions share a bounded pool") {
    const auto t = abalone_like();
    Pool pool(PoolOptions{2, fake_worker()});
    std::vector<std::thread> threads;
    std::atomic<int> good{0};
    for (int i = 0; i < 6; ++i) {
        threads.emplace_back([&, i] {
            for (int k = 0; k < 5; ++k) {
                const auto id = std::to_string(i) + "-" + std::to_string(k);
                const auto resp = pool.execute(req(id, t, "ok"));
                if (resp.request_id == id && resp.result == CanonResult{Scalar::number(4)}) ++good;
            }
        });
    }
    for (auto& th : threads) th.join();
    CHECK(good == 30);
    CHECK(pool.handshakes() == 2);
}

TEST_CASE("reference worker answers pandas queries") {
    const auto t = abalone_like();
    Pool pool(PoolOptions{1, default_worker_command()});
    auto r = pool.execute(req("1", t, "result = df.groupby('Rings')['Shell_weight'].mean()")).result;
    REQUIRE(std::holds_alternative<Series>(r));
    const auto& s = std::get<Series>(r);
    CHECK(s.index == std::vector<Scalar>{Scalar::number(7), Scalar::number(9), Scalar::number(15)});
    // Means computed by hand: 0.03, (0.21 + 0.07) / 2, 0.15.
    CHECK(s.values[0].as_number() == doctest::Approx(0.03));
    CHECK(s.values[1].as_number() == doctest::Approx(0.14));
    CHECK(s.values[2].as_number() == doctest::Approx(0.15));

    r = pool.execute(req("2", t, "df['Rings'].max()")).result;
    CHECK(r == CanonResult{Scalar::number(15)});
    r = pool.execute(req("3", t, "x = 1")).result;
    CHECK(error_kind(r) == ExecErrorKind::NoResult);
    r = pool.execute(req("4", t, "result = df['Age'].mode()")).result;
    CHECK(error_kind(r) == ExecErrorKind::RuntimeError);
    CHECK(std::get<ExecError>(r).message.find("KeyError") != std::string::npos);
    r = pool.execute(req("5", t, "result = df[df['Sex'] == 'M']")).result;
    REQUIRE(std::holds_alternative<TableResult>(r));
    CHECK(std::get<TableResult>(r).rows.size() == 2);
    auto big = req("6", t, "result = list(range(1000))");
    big.limits.max_result_cells = 10;
    CHECK(error_kind(pool.execute(big).result) == ExecErrorKind::ResultTooLarge);
    r = pool.execute(req("7", t, "result = df.groupby('Sex')['Rings'].agg(['mean', 'median'])")).result;
    REQUIRE(std::holds_alternative<TableResult>(r));
    CHECK(std::get<TableResult>(r).columns == std::vector<std::string>{"Sex", "mean", "median"});
}

TEST_CASE("adversarial snippets are rejected or killed") {
    const auto scratch = std::filesystem::temp_directory_path() / "dfqa-scratch";
    std::filesystem::remove_all(scratch);
    std::filesystem::create_directories(scratch);
    const auto p = scratch.string() + "/pwned";
    const std::vector<std::string> attacks{
        "import os\nos.system('touch " + p + "')",
        "import subprocess\nsubprocess.run(['touch', '" + p + "'])",
        "open('" + p + "', 'w').write('x')",
        "df.to_csv('" + p + "')",
        "df.to_pickle('" + p + "')",
        "np.save('" + p + "', df.values)",
        "np.savetxt('" + p + "', df[['Rings']].values)",
        "pd.read_csv('/etc/passwd')",
        "__import__('os').system('touch " + p + "')",
        "exec(\"import os; os.system('touch " + p + "')\")",
        "eval('1+1')",
        "getattr(df, 'to_csv')('" + p + "')",
        "result = ().__class__.__base__.__subclasses__()",
        "result = (lambda: 0).__globals__",
        "result = '{0.__class__}'.format(df)",
        "from os import system\nsystem('touch " + p + "')",
        "import ctypes",
        "result = globals()",
        "result = pd.io.common",
        "result = np.lib.format",
        "while True:\n    pass",
        "result = 'a' * (10 ** 11)",
        "def f(n):\n    return f(n + 1)\nresult = f(0)",
        "result = df.to_string('" + p + "')",
        "import sys\nsys.exit(0)",
    };
    REQUIRE(attacks.size() == 25);
    const auto t = abalone_like();
    Pool pool(PoolOptions{1, default_worker_command()});
    std::size_t contained = 0;
    for (std::size_t i = 0; i < attacks.size(); ++i) {
        CAPTURE(attacks[i]);
        const auto start = std::chrono::steady_clock::now();
        const auto r = pool.execute(req(std::to_string(i), t, attacks[i], 2.0)).result;
        const auto took = std::chrono::steady_clock::now() - start;
        CHECK(took < std::chrono::seconds(4));
        REQUIRE(is_error(r));
        const auto kind = std::get<ExecError>(r).kind;
        CHECK((kind == ExecErrorKind::RejectedUnsafe || kind == ExecErrorKind::RuntimeError ||
               kind == ExecErrorKind::Timeout || kind == ExecErrorKind::ResourceLimit));
        CHECK(pool.live_workers() == 1);
        contained += is_error(r);
    }
    CHECK(contained == 25);
    CHECK(std::filesystem::is_empty(scratch));
    std::filesystem::remove_all(scratch);
}

TEST_CASE("wire values survive a round trip through the reference worker") {
    // The worker echoes the table back as a table result.
    std::mt19937_64 rng(12);
    const auto pick = [&](std::size_t n) { return std::uniform_int_distribution<std::size_t>(0, n - 1)(rng); };
    Pool pool(PoolOptions{1, default_worker_command()});
    std::size_t same = 0;
    for (int i = 0; i < 500; ++i) {
        DataTable t;
        t.schema.table_id = "r";
        const auto ncols = 1 + pick(4);
        for (std::size_t c = 0; c < ncols; ++c) t.schema.columns.push_back({"c" + std::to_string(c), static_cast<Dtype>(pick(5)), {}, {}});
        for (std::size_t r = 0; r < 1 + pick(4); ++r) {
            Row row;
            for (const auto& col : t.schema.columns) {
                if (pick(5) == 0) {
                    row.push_back(std::monostate{});
                    continue;
                }
                switch (col.dtype) {
                    case Dtype::Int: row.push_back(static_cast<std::int64_t>(pick(2000)) - 1000); break;
                    case Dtype::Float: row.push_back(static_cast<double>(pick(20000)) / 8.0 - 1000); break;
                    case Dtype::String: row.push_back("s" + std::to_string(pick(100)) + (pick(2) ? " x" : "É")); break;
                    case Dtype::Bool: row.push_back(pick(2) == 1); break;
                    case Dtype::Datetime: row.push_back(DateTime{"2021-0" + std::to_string(1 + pick(9)) + "-1" + std::to_string(pick(10))}); break;
                }
            }
            t.rows.push_back(row);
        }
        const auto r = pool.execute(req(std::to_string(i), t, "result = df")).result;
        // Expected: the same cells as scalars, with ints widened to float when
        // the column holds nulls, which the judge treats as equal numbers.
        TableResult want;
        for (const auto& c : t.schema.columns) want.columns.push_back(c.name);
        for (const auto& row : t.rows) {
            std::vector<Scalar> out;
            for (const auto& cell : row) {
                if (is_null(cell)) out.push_back(Scalar::null());
                else if (auto* x = std::get_if<std::int64_t>(&cell)) out.push_back(Scalar::number(static_cast<double>(*x)));
                else if (auto* d = std::get_if<double>(&cell)) out.push_back(Scalar::number(*d));
                else if (auto* s = std::get_if<std::string>(&cell)) out.push_back(Scalar::string(*s));
                else if (auto* b = std::get_if<bool>(&cell)) out.push_back(Scalar::boolean(*b));
                else out.push_back(Scalar::datetime(std::get<DateTime>(cell).iso));
            }
            want.rows.push_back(out);
        }
        if (r == CanonResult{want}) {
            ++same;
        } else {
            MESSAGE("mismatch: " << result_to_json(r).dump() << " vs " << result_to_json(want).dump());
        }
    }
    CHECK(same == 500);
}
