#pragma once

// NDJSON worker protocol, version 1. One frame per line:
//   worker -> host  {"type":"hello","protocol_version":1}
//   host -> worker  {"type":"exec","request_id":...,"table":{...},"query":"...","limits":{...}}
//   worker -> host  {"type":"result","request_id":...,"result":{...},"wall_ms":N}

#include "dfqa/json_io.hpp"
#include "dfqa/model.hpp"

#include <cstdint>
#include <string>

namespace dfqa::protocol {

inline constexpr int kProtocolVersion = 1;

class ProtocolError : public Error {
public:
    using Error::Error;
};

struct Limits {
    double wall_seconds = 10;
    std::size_t memory_mb = 512;
    std::size_t max_result_cells = 100000;
    friend bool operator==(const Limits&, const Limits&) = default;
};

/// Throws std::invalid_argument unless every limit is strictly positive.
void check_limits(const Limits& limits);

json limits_to_json(const Limits& limits);
Limits limits_from_json(const json& j);

struct ExecFrame {
    std::string request_id;
    json table;  // wire table payload
    std::string query;
    Limits limits;
};

struct ResultFrame {
    std::string request_id;
    CanonResult result;
    std::int64_t wall_ms = 0;
};

std::string hello_line(int version = kProtocolVersion);
std::string exec_line(const std::string& request_id, const DataTable& table, const std::string& query,
                      const Limits& limits);
std::string result_line(const ResultFrame& frame);

/// Parses one line; throws ProtocolError on malformed JSON or missing "type".
json parse_frame(std::string_view line);
/// Returns the protocol_version of a hello frame.
int parse_hello(const json& frame);
ExecFrame parse_exec(const json& frame);
ResultFrame parse_result(const json& frame);

}  // namespace dfqa::protocol
