#include "dfqa/protocol.hpp"

#include <cmath>
#include <stdexcept>

namespace dfqa::protocol {

namespace {

const json& require(const json& frame, const char* key) {
    const auto it = frame.find(key);
    if (it == frame.end()) throw ProtocolError(std::string("frame missing '") + key + "'");
    return *it;
}

void expect_type(const json& frame, std::string_view type) {
    const auto& t = require(frame, "type");
    if (!t.is_string() || t.get<std::string>() != type) {
        throw ProtocolError("expected " + std::string(type) + " frame, got " + t.dump());
    }
}

}  // namespace

void check_limits(const Limits& limits) {
    if (!(limits.wall_seconds > 0) || !std::isfinite(limits.wall_seconds)) {
        throw std::invalid_argument("limits.wall_seconds must be positive");
    }
    if (limits.memory_mb == 0) throw std::invalid_argument("limits.memory_mb must be positive");
    if (limits.max_result_cells == 0) throw std::invalid_argument("limits.max_result_cells must be positive");
}

json limits_to_json(const Limits& limits) {
    return {{"wall_seconds", limits.wall_seconds},
            {"memory_mb", limits.memory_mb},
            {"max_result_cells", limits.max_result_cells}};
}

Limits limits_from_json(const json& j) {
    Limits l;
    if (j.contains("wall_seconds")) l.wall_seconds = j.at("wall_seconds").get<double>();
    if (j.contains("memory_mb")) l.memory_mb = j.at("memory_mb").get<std::size_t>();
    if (j.contains("max_result_cells")) l.max_result_cells = j.at("max_result_cells").get<std::size_t>();
    check_limits(l);
    return l;
}

std::string hello_line(int version) { return dump_line({{"type", "hello"}, {"protocol_version", version}}); }

std::string exec_line(const std::string& request_id, const DataTable& table, const std::string& query,
                      const Limits& limits) {
    return dump_line({{"type", "exec"},
                      {"request_id", request_id},
                      {"table", table_to_wire(table)},
                      {"query", query},
                      {"limits", limits_to_json(limits)}});
}

std::string result_line(const ResultFrame& frame) {
    return dump_line({{"type", "result"},
                      {"request_id", frame.request_id},
                      {"result", result_to_json(frame.result)},
                      {"wall_ms", frame.wall_ms}});
}

json parse_frame(std::string_view line) {
    json j;
    try {
        j = json::parse(line);
    } catch (const json::exception& e) {
        throw ProtocolError(std::string("malformed frame: ") + e.what());
    }
    if (!j.is_object() || !j.contains("type")) throw ProtocolError("frame is not an object with a 'type'");
    return j;
}

int parse_hello(const json& frame) {
    expect_type(frame, "hello");
    const auto& v = require(frame, "protocol_version");
    if (!v.is_number_integer()) throw ProtocolError("hello protocol_version is not an integer");
    return v.get<int>();
}

ExecFrame parse_exec(const json& frame) {
    expect_type(frame, "exec");
    try {
        return {require(frame, "request_id").get<std::string>(), require(frame, "table"),
                require(frame, "query").get<std::string>(),
                frame.contains("limits") ? limits_from_json(frame.at("limits")) : Limits{}};
    } catch (const json::exception& e) {
        throw ProtocolError(std::string("bad exec frame: ") + e.what());
    }
}

ResultFrame parse_result(const json& frame) {
    expect_type(frame, "result");
    try {
        ResultFrame r;
        r.request_id = require(frame, "request_id").get<std::string>();
        r.result = result_from_json(require(frame, "result"));
        if (frame.contains("wall_ms")) r.wall_ms = static_cast<std::int64_t>(frame.at("wall_ms").get<double>());
        return r;
    } catch (const json::exception& e) {
        throw ProtocolError(std::string("bad result frame: ") + e.what());
    } catch (const ProtocolError&) {
        throw;
    } catch (const Error& e) {
        throw ProtocolError(std::string("bad result payload: ") + e.what());
    }
}

}  // namespace dfqa::protocol
