#include "dfqa/json_io.hpp"

#include <cmath>

namespace dfqa {

namespace {

json datetime_json(const std::string& iso) { return json{{"$dt", iso}}; }

bool is_datetime_json(const json& j) { return j.is_object() && j.size() == 1 && j.contains("$dt"); }

json number_json(double v) {
    if (!std::isfinite(v)) return nullptr;
    if (std::floor(v) == v && std::fabs(v) < 9.007199254740992e15) return static_cast<std::int64_t>(v);
    return v;
}

std::vector<Scalar> scalars_from(const json& arr) {
    std::vector<Scalar> out;
    out.reserve(arr.size());
    for (const auto& v : arr) out.push_back(scalar_from_json(v));
    return out;
}

json scalars_to(const std::vector<Scalar>& xs) {
    json arr = json::array();
    for (const auto& s : xs) arr.push_back(scalar_to_json(s));
    return arr;
}

}  // namespace

json cell_to_json(const Cell& c) {
    struct Visitor {
        json operator()(std::monostate) const { return nullptr; }
        json operator()(std::int64_t v) const { return v; }
        json operator()(double v) const {
            if (!std::isfinite(v)) return nullptr;
            return v;
        }
        json operator()(const std::string& v) const { return v; }
        json operator()(bool v) const { return v; }
        json operator()(const DateTime& v) const { return datetime_json(v.iso); }
    };
    return std::visit(Visitor{}, c);
}

Cell cell_from_json(const json& j, Dtype dtype) {
    if (j.is_null()) return std::monostate{};
    const auto bad = [&] {
        return Error("cell " + j.dump() + " does not match dtype " + std::string(to_string(dtype)));
    };
    switch (dtype) {
        case Dtype::Int:
            if (j.is_number_integer()) return j.get<std::int64_t>();
            if (j.is_number_float()) {
                const double v = j.get<double>();
                if (std::floor(v) == v && std::fabs(v) < 9.2e18) return static_cast<std::int64_t>(v);
            }
            throw bad();
        case Dtype::Float:
            if (j.is_number()) return j.get<double>();
            throw bad();
        case Dtype::String:
            if (j.is_string()) return j.get<std::string>();
            throw bad();
        case Dtype::Bool:
            if (j.is_boolean()) return j.get<bool>();
            throw bad();
        case Dtype::Datetime:
            if (is_datetime_json(j)) return DateTime{j.at("$dt").get<std::string>()};
            if (j.is_string()) return DateTime{j.get<std::string>()};
            throw bad();
    }
    throw bad();
}

json scalar_to_json(const Scalar& s) {
    struct Visitor {
        json operator()(std::monostate) const { return nullptr; }
        json operator()(double v) const { return number_json(v); }
        json operator()(const std::string& v) const { return v; }
        json operator()(bool v) const { return v; }
        json operator()(const DateTime& v) const { return datetime_json(v.iso); }
    };
    return std::visit(Visitor{}, s.value);
}

Scalar scalar_from_json(const json& j) {
    if (j.is_null()) return Scalar::null();
    if (j.is_boolean()) return Scalar::boolean(j.get<bool>());
    if (j.is_number()) return Scalar::number(j.get<double>());
    if (j.is_string()) return Scalar::string(j.get<std::string>());
    if (is_datetime_json(j)) return Scalar::datetime(j.at("$dt").get<std::string>());
    throw Error("not a scalar: " + j.dump());
}

json result_to_json(const CanonResult& r) {
    struct Visitor {
        json operator()(const Scalar& s) const {
            return json{{"kind", "scalar"}, {"dtype", to_string(s.kind())}, {"value", scalar_to_json(s)}};
        }
        json operator()(const ValueList& l) const { return json{{"kind", "list"}, {"values", scalars_to(l.values)}}; }
        json operator()(const Series& s) const {
            json j{{"kind", "series"}, {"index", scalars_to(s.index)}, {"values", scalars_to(s.values)}};
            j["name"] = s.name ? json(*s.name) : json(nullptr);
            return j;
        }
        json operator()(const TableResult& t) const {
            json rows = json::array();
            for (const auto& row : t.rows) rows.push_back(scalars_to(row));
            return json{{"kind", "table"}, {"columns", t.columns}, {"rows", rows}};
        }
        json operator()(const ExecError& e) const {
            return json{{"kind", "error"}, {"error", to_string(e.kind)}, {"message", e.message}};
        }
    };
    return std::visit(Visitor{}, r);
}

CanonResult result_from_json(const json& j) {
    const auto kind = j.at("kind").get<std::string>();
    if (kind == "scalar") return scalar_from_json(j.at("value"));
    if (kind == "list") return ValueList{scalars_from(j.at("values"))};
    if (kind == "series") {
        Series s;
        if (j.contains("name") && !j.at("name").is_null()) {
            const auto& n = j.at("name");
            s.name = n.is_string() ? n.get<std::string>() : n.dump();
        }
        s.index = scalars_from(j.at("index"));
        s.values = scalars_from(j.at("values"));
        return s;
    }
    if (kind == "table") {
        TableResult t;
        for (const auto& c : j.at("columns")) t.columns.push_back(c.is_string() ? c.get<std::string>() : c.dump());
        for (const auto& row : j.at("rows")) t.rows.push_back(scalars_from(row));
        return t;
    }
    if (kind == "error") {
        return ExecError{parse_exec_error_kind(j.at("error").get<std::string>()), j.value("message", std::string{})};
    }
    throw Error("unknown result kind '" + kind + "'");
}

json column_to_json(const ColumnSpec& c) {
    json j{{"name", c.name}, {"dtype", to_string(c.dtype)}};
    if (c.description) j["description"] = *c.description;
    if (c.format_hint) j["format_hint"] = *c.format_hint;
    return j;
}

ColumnSpec column_from_json(const json& j) {
    ColumnSpec c;
    c.name = j.at("name").get<std::string>();
    c.dtype = parse_dtype(j.at("dtype").get<std::string>());
    if (j.contains("description") && !j["description"].is_null()) c.description = j["description"].get<std::string>();
    if (j.contains("format_hint") && !j["format_hint"].is_null()) c.format_hint = j["format_hint"].get<std::string>();
    return c;
}

json table_to_json(const DataTable& t) {
    json cols = json::array();
    for (const auto& c : t.schema.columns) cols.push_back(column_to_json(c));
    json rows = json::array();
    for (const auto& row : t.rows) {
        json r = json::array();
        for (const auto& cell : row) r.push_back(cell_to_json(cell));
        rows.push_back(std::move(r));
    }
    json j{{"table_id", t.schema.table_id}, {"columns", cols}, {"rows", rows}};
    if (t.schema.notes) j["notes"] = *t.schema.notes;
    return j;
}

DataTable table_from_json(const json& j) {
    DataTable t;
    t.schema.table_id = j.value("table_id", std::string{});
    for (const auto& c : j.at("columns")) t.schema.columns.push_back(column_from_json(c));
    if (j.contains("notes") && !j["notes"].is_null()) t.schema.notes = j["notes"].get<std::string>();
    const auto& cols = t.schema.columns;
    for (const auto& row : j.at("rows")) {
        if (row.size() != cols.size()) {
            throw Error("table '" + t.schema.table_id + "': row arity " + std::to_string(row.size()) +
                        " != " + std::to_string(cols.size()));
        }
        Row r;
        r.reserve(cols.size());
        for (std::size_t c = 0; c < cols.size(); ++c) r.push_back(cell_from_json(row[c], cols[c].dtype));
        t.rows.push_back(std::move(r));
    }
    return t;
}

json table_to_wire(const DataTable& t) {
    json cols = json::array();
    for (const auto& c : t.schema.columns) cols.push_back(json{{"name", c.name}, {"dtype", to_string(c.dtype)}});
    json rows = json::array();
    for (const auto& row : t.rows) {
        json r = json::array();
        for (const auto& cell : row) r.push_back(cell_to_json(cell));
        rows.push_back(std::move(r));
    }
    return json{{"columns", cols}, {"rows", rows}};
}

json question_to_json(const Question& q) {
    json j{{"qid", q.qid}, {"text", q.text}};
    if (q.role) j["role"] = to_string(*q.role);
    if (q.qtype) j["qtype"] = to_string(*q.qtype);
    return j;
}

Question question_from_json(const json& j) {
    Question q;
    q.qid = j.at("qid").get<std::string>();
    q.text = j.at("text").get<std::string>();
    if (j.contains("role") && !j["role"].is_null()) q.role = parse_role(j["role"].get<std::string>());
    if (j.contains("qtype") && !j["qtype"].is_null()) q.qtype = parse_qtype(j["qtype"].get<std::string>());
    return q;
}

json query_to_json(const QueryText& q) {
    json lint = json::array();
    for (auto l : q.lint) lint.push_back(to_string(l));
    return json{{"source", q.source}, {"lint", lint}};
}

QueryText query_from_json(const json& j) {
    QueryText q;
    q.source = j.at("source").get<std::string>();
    if (j.contains("lint")) {
        for (const auto& l : j["lint"]) q.lint.push_back(parse_lint(l.get<std::string>()));
    }
    return q;
}

json task_to_json(const TaskInstance& t) {
    json gt;
    if (const auto* ref = std::get_if<ReferenceQuery>(&t.ground_truth)) {
        gt["reference_query"] = query_to_json(ref->query);
    } else {
        gt["answer"] = result_to_json(std::get<KnownAnswer>(t.ground_truth).answer);
    }
    json j{{"question", question_to_json(t.question)}, {"table_id", t.table_id}, {"ground_truth", gt}};
    if (t.reviewed) j["reviewed"] = true;
    if (t.failure_type) j["failure_type"] = *t.failure_type;
    return j;
}

TaskInstance task_from_json(const json& j) {
    TaskInstance t;
    t.question = question_from_json(j.at("question"));
    t.table_id = j.at("table_id").get<std::string>();
    const auto& gt = j.at("ground_truth");
    if (gt.contains("reference_query")) {
        t.ground_truth = ReferenceQuery{query_from_json(gt["reference_query"])};
    } else if (gt.contains("answer")) {
        t.ground_truth = KnownAnswer{result_from_json(gt["answer"])};
    } else {
        throw Error("task '" + t.question.qid + "': ground_truth needs reference_query or answer");
    }
    t.reviewed = j.value("reviewed", false);
    if (j.contains("failure_type") && !j["failure_type"].is_null()) t.failure_type = j["failure_type"].get<std::string>();
    return t;
}

json supplementary_to_json(const SupplementarySpec& s) {
    json flags = json::array();
    for (auto f : s.mitigation_flags) flags.push_back(to_string(f));
    return json{{"assumptions", s.assumptions}, {"constraints", s.constraints}, {"mitigation_flags", flags}};
}

SupplementarySpec supplementary_from_json(const json& j) {
    SupplementarySpec s;
    if (j.contains("assumptions")) s.assumptions = j["assumptions"].get<std::vector<std::string>>();
    if (j.contains("constraints")) s.constraints = j["constraints"].get<std::vector<std::string>>();
    if (j.contains("mitigation_flags")) {
        for (const auto& f : j["mitigation_flags"]) s.mitigation_flags.insert(parse_mitigation_flag(f.get<std::string>()));
    }
    return s;
}

std::string dump_line(const json& j) { return j.dump(-1, ' ', false, json::error_handler_t::replace); }

}  // namespace dfqa
