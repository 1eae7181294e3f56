#include "dfqa/model.hpp"

#include "dfqa/text.hpp"

#include <array>
#include <charconv>
#include <cmath>
#include <unordered_set>
#include <utility>

namespace dfqa {

namespace {

template <typename Enum, std::size_t N>
Enum parse_enum(std::string_view text, const std::array<std::pair<Enum, std::string_view>, N>& table,
                std::string_view what) {
    for (const auto& [value, name] : table) {
        if (name == text) return value;
    }
    throw Error("unknown " + std::string(what) + ": '" + std::string(text) + "'");
}

template <typename Enum, std::size_t N>
std::string_view enum_name(Enum v, const std::array<std::pair<Enum, std::string_view>, N>& table) {
    for (const auto& [value, name] : table) {
        if (value == v) return name;
    }
    return "?";
}

constexpr std::array<std::pair<Dtype, std::string_view>, 5> kDtypes{{
    {Dtype::Int, "int"},
    {Dtype::Float, "float"},
    {Dtype::String, "string"},
    {Dtype::Bool, "bool"},
    {Dtype::Datetime, "datetime"},
}};

constexpr std::array<std::pair<MitigationFlag, std::string_view>, 5> kFlags{{
    {MitigationFlag::QuoteValues, "quote_values"},
    {MitigationFlag::ColumnDescriptions, "column_descriptions"},
    {MitigationFlag::DateFormatHints, "date_format_hints"},
    {MitigationFlag::NoImportDirective, "no_import_directive"},
    {MitigationFlag::LowercaseDirective, "lowercase_directive"},
}};

constexpr std::array<std::pair<Role, std::string_view>, 3> kRoles{{
    {Role::DataScientist, "data_scientist"},
    {Role::GeneralUser, "general_user"},
    {Role::DataOwner, "data_owner"},
}};

constexpr std::array<std::pair<QType, std::string_view>, 3> kQTypes{{
    {QType::Retrieval, "retrieval"},
    {QType::Aggregation, "aggregation"},
    {QType::DataAnalysis, "data_analysis"},
}};

constexpr std::array<std::pair<LintFinding, std::string_view>, 3> kLint{{
    {LintFinding::HasImport, "has_import"},
    {LintFinding::HasComments, "has_comments"},
    {LintFinding::MissingResultAssignment, "missing_result_assignment"},
}};

constexpr std::array<std::pair<ScalarKind, std::string_view>, 5> kScalarKinds{{
    {ScalarKind::Number, "number"},
    {ScalarKind::String, "string"},
    {ScalarKind::Bool, "bool"},
    {ScalarKind::Null, "null"},
    {ScalarKind::Datetime, "datetime"},
}};

constexpr std::array<std::pair<ExecErrorKind, std::string_view>, 6> kErrorKinds{{
    {ExecErrorKind::RejectedUnsafe, "rejected_unsafe"},
    {ExecErrorKind::RuntimeError, "runtime_error"},
    {ExecErrorKind::NoResult, "no_result"},
    {ExecErrorKind::Timeout, "timeout"},
    {ExecErrorKind::ResourceLimit, "resource_limit"},
    {ExecErrorKind::ResultTooLarge, "result_too_large"},
}};

constexpr std::array<std::pair<Verdict, std::string_view>, 7> kVerdicts{{
    {Verdict::CorrectStrict, "correct_strict"},
    {Verdict::CorrectRelaxed, "correct_relaxed"},
    {Verdict::Incorrect, "incorrect"},
    {Verdict::NeedsReview, "needs_review"},
    {Verdict::ExecErrorVerdict, "exec_error"},
    {Verdict::RejectedUnsafe, "rejected_unsafe"},
    {Verdict::Timeout, "timeout"},
}};

bool valid_date(int y, int m, int d) {
    if (m < 1 || m > 12 || d < 1) return false;
    static constexpr std::array<int, 12> days{31, 29, 31, 30, 31, 30, 31, 31, 30, 31, 30, 31};
    if (d > days[static_cast<std::size_t>(m - 1)]) return false;
    if (m == 2 && d == 29) return (y % 4 == 0 && y % 100 != 0) || y % 400 == 0;
    return true;
}

bool parse_fixed_int(std::string_view s, int& out) {
    if (s.empty()) return false;
    for (char c : s) {
        if (c < '0' || c > '9') return false;
    }
    auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), out);
    return ec == std::errc{} && ptr == s.data() + s.size();
}

// Accepts YYYY-MM-DD with an optional "T" or " " separated HH:MM[:SS[.fff]].
std::optional<std::string> normalize_iso(std::string_view s) {
    if (s.size() < 10 || s[4] != '-' || s[7] != '-') return std::nullopt;
    int y = 0, m = 0, d = 0;
    if (!parse_fixed_int(s.substr(0, 4), y) || !parse_fixed_int(s.substr(5, 2), m) ||
        !parse_fixed_int(s.substr(8, 2), d) || !valid_date(y, m, d)) {
        return std::nullopt;
    }
    std::string out(s.substr(0, 10));
    if (s.size() == 10) return out;
    if (s[10] != 'T' && s[10] != ' ') return std::nullopt;
    const auto time = s.substr(11);
    if (time.size() < 5 || time[2] != ':') return std::nullopt;
    int hh = 0, mm = 0, ss = 0;
    if (!parse_fixed_int(time.substr(0, 2), hh) || !parse_fixed_int(time.substr(3, 2), mm) || hh > 23 ||
        mm > 59) {
        return std::nullopt;
    }
    if (time.size() > 5) {
        if (time[5] != ':' || time.size() < 8 || !parse_fixed_int(time.substr(6, 2), ss) || ss > 60) {
            return std::nullopt;
        }
        if (time.size() > 8) {
            if (time[8] != '.' || time.size() == 9) return std::nullopt;
            for (char c : time.substr(9)) {
                if (c < '0' || c > '9') return std::nullopt;
            }
        }
    }
    out += 'T';
    out += time;
    return out;
}

}  // namespace

std::string_view to_string(Dtype dtype) { return enum_name(dtype, kDtypes); }
Dtype parse_dtype(std::string_view text) { return parse_enum(text, kDtypes, "dtype"); }
std::string_view to_string(MitigationFlag flag) { return enum_name(flag, kFlags); }
MitigationFlag parse_mitigation_flag(std::string_view text) { return parse_enum(text, kFlags, "mitigation flag"); }
std::string_view to_string(Role role) { return enum_name(role, kRoles); }
Role parse_role(std::string_view text) { return parse_enum(text, kRoles, "role"); }
std::string_view to_string(QType qtype) { return enum_name(qtype, kQTypes); }
QType parse_qtype(std::string_view text) { return parse_enum(text, kQTypes, "qtype"); }
std::string_view to_string(LintFinding lint) { return enum_name(lint, kLint); }
LintFinding parse_lint(std::string_view text) { return parse_enum(text, kLint, "lint finding"); }
std::string_view to_string(ScalarKind kind) { return enum_name(kind, kScalarKinds); }
std::string_view to_string(ExecErrorKind kind) { return enum_name(kind, kErrorKinds); }
ExecErrorKind parse_exec_error_kind(std::string_view text) { return parse_enum(text, kErrorKinds, "error kind"); }
std::string_view to_string(Verdict v) { return enum_name(v, kVerdicts); }
Verdict parse_verdict(std::string_view text) { return parse_enum(text, kVerdicts, "verdict"); }

bool cell_matches(const Cell& c, Dtype dtype) {
    if (is_null(c)) return true;
    switch (dtype) {
        case Dtype::Int: return std::holds_alternative<std::int64_t>(c);
        case Dtype::Float: return std::holds_alternative<double>(c) && std::isfinite(std::get<double>(c));
        case Dtype::String: return std::holds_alternative<std::string>(c);
        case Dtype::Bool: return std::holds_alternative<bool>(c);
        case Dtype::Datetime: return std::holds_alternative<DateTime>(c);
    }
    return false;
}

std::string cell_text(const Cell& c) {
    struct Visitor {
        std::string operator()(std::monostate) const { return "null"; }
        std::string operator()(std::int64_t v) const { return std::to_string(v); }
        std::string operator()(double v) const { return text::format_number(v); }
        std::string operator()(const std::string& v) const { return v; }
        std::string operator()(bool v) const { return v ? "true" : "false"; }
        std::string operator()(const DateTime& v) const { return v.iso; }
    };
    return std::visit(Visitor{}, c);
}

std::optional<std::size_t> TableSchema::find(std::string_view name) const {
    for (std::size_t i = 0; i < columns.size(); ++i) {
        if (columns[i].name == name) return i;
    }
    return std::nullopt;
}

std::vector<std::string> validate_table(const DataTable& table, bool require_lowercase) {
    std::vector<std::string> out;
    const auto& cols = table.schema.columns;
    if (cols.empty()) out.emplace_back("schema: no columns");
    std::unordered_set<std::string> seen;
    for (std::size_t c = 0; c < cols.size(); ++c) {
        if (cols[c].name.empty()) out.push_back("column " + std::to_string(c) + ": empty name");
        if (!seen.insert(cols[c].name).second) {
            out.push_back("column " + std::to_string(c) + ": duplicate name '" + cols[c].name + "'");
        }
    }
    for (std::size_t r = 0; r < table.rows.size(); ++r) {
        const auto& row = table.rows[r];
        if (row.size() != cols.size()) {
            out.push_back("row " + std::to_string(r) + ": arity " + std::to_string(row.size()) +
                          " != " + std::to_string(cols.size()));
            continue;
        }
        for (std::size_t c = 0; c < cols.size(); ++c) {
            if (!cell_matches(row[c], cols[c].dtype)) {
                out.push_back("row " + std::to_string(r) + ", column '" + cols[c].name + "': expected " +
                              std::string(to_string(cols[c].dtype)) + ", got '" + cell_text(row[c]) + "'");
            } else if (require_lowercase && std::holds_alternative<std::string>(row[c]) &&
                       !text::is_lower(std::get<std::string>(row[c]))) {
                out.push_back("row " + std::to_string(r) + ", column '" + cols[c].name +
                              "': string not lowercase");
            }
        }
    }
    return out;
}

Cell coerce_cell(std::string_view raw, Dtype dtype) {
    const auto s = text::trim(raw);
    if (s.empty()) return std::monostate{};
    const auto fail = [&]() -> CoercionError {
        return CoercionError("cannot parse '" + std::string(s) + "' as " + std::string(to_string(dtype)));
    };
    switch (dtype) {
        case Dtype::String: return std::string(s);
        case Dtype::Float: {
            const auto v = text::parse_grouped_number(s);
            if (!v) {
                const auto l = text::lower(s);
                if (l == "nan" || l == "inf" || l == "-inf") return std::monostate{};
                throw fail();
            }
            return *v;
        }
        case Dtype::Int: {
            std::string digits;
            std::string_view body = s;
            if (!body.empty() && body.front() == '+') body.remove_prefix(1);
            if (body.find(',') != std::string_view::npos) {
                // Reuse the grouping validator, then require an integral value.
                const auto v = text::parse_grouped_number(body);
                if (!v || std::floor(*v) != *v || body.find('.') != std::string_view::npos) throw fail();
                for (char c : body) {
                    if (c != ',') digits.push_back(c);
                }
            } else {
                digits = std::string(body);
            }
            std::int64_t v = 0;
            auto [ptr, ec] = std::from_chars(digits.data(), digits.data() + digits.size(), v);
            if (ec != std::errc{} || ptr != digits.data() + digits.size()) throw fail();
            return v;
        }
        case Dtype::Bool: {
            const auto l = text::lower(s);
            if (l == "true" || l == "yes" || l == "1" || l == "t" || l == "y") return true;
            if (l == "false" || l == "no" || l == "0" || l == "f" || l == "n") return false;
            throw fail();
        }
        case Dtype::Datetime: {
            auto iso = normalize_iso(s);
            if (!iso) throw fail();
            return DateTime{std::move(*iso)};
        }
    }
    throw fail();
}

Scalar Scalar::number(double v) {
    if (!std::isfinite(v)) return Scalar::null();
    return Scalar{v};
}

ScalarKind Scalar::kind() const {
    switch (value.index()) {
        case 0: return ScalarKind::Null;
        case 1: return ScalarKind::Number;
        case 2: return ScalarKind::String;
        case 3: return ScalarKind::Bool;
        default: return ScalarKind::Datetime;
    }
}

namespace {

void check_scalars(const std::vector<Scalar>& xs, std::string_view where, std::vector<std::string>& out) {
    for (std::size_t i = 0; i < xs.size(); ++i) {
        if (xs[i].is_number() && !std::isfinite(xs[i].as_number())) {
            out.push_back(std::string(where) + "[" + std::to_string(i) + "]: non-finite number");
        }
    }
}

}  // namespace

std::vector<std::string> validate_result(const CanonResult& r) {
    std::vector<std::string> out;
    if (const auto* s = std::get_if<Scalar>(&r)) {
        check_scalars({*s}, "scalar", out);
    } else if (const auto* l = std::get_if<ValueList>(&r)) {
        check_scalars(l->values, "list", out);
    } else if (const auto* se = std::get_if<Series>(&r)) {
        if (se->index.size() != se->values.size()) out.emplace_back("series: index and values differ in length");
        check_scalars(se->index, "series.index", out);
        check_scalars(se->values, "series.values", out);
    } else if (const auto* t = std::get_if<TableResult>(&r)) {
        for (std::size_t i = 0; i < t->rows.size(); ++i) {
            if (t->rows[i].size() != t->columns.size()) {
                out.push_back("table: row " + std::to_string(i) + " is not rectangular");
            }
            check_scalars(t->rows[i], "table.row", out);
        }
    }
    return out;
}

std::string_view result_kind_name(const CanonResult& r) {
    static constexpr std::array<std::string_view, 5> names{"scalar", "list", "series", "table", "error"};
    return names[r.index()];
}

}  // namespace dfqa
