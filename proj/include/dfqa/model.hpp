#pragma once

// Shared data model: table schemas, typed tables, questions, queries,
// canonical execution results and verdicts.

#include <cstdint>
#include <optional>
#include <set>
#include <stdexcept>
#include <string>
#include <string_view>
#include <variant>
#include <vector>

namespace dfqa {

class Error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

class CoercionError : public Error {
public:
    using Error::Error;
};

enum class Dtype { Int, Float, String, Bool, Datetime };

std::string_view to_string(Dtype dtype);
Dtype parse_dtype(std::string_view text);

/// ISO-8601 date or date-time, stored in its normalized text form.
struct DateTime {
    std::string iso;
    friend bool operator==(const DateTime&, const DateTime&) = default;
};

/// A table cell. `std::monostate` is the null cell.
using Cell = std::variant<std::monostate, std::int64_t, double, std::string, bool, DateTime>;

inline bool is_null(const Cell& c) { return std::holds_alternative<std::monostate>(c); }
bool cell_matches(const Cell& c, Dtype dtype);
std::string cell_text(const Cell& c);

struct ColumnSpec {
    std::string name;
    Dtype dtype = Dtype::String;
    std::optional<std::string> description;
    std::optional<std::string> format_hint;

    friend bool operator==(const ColumnSpec&, const ColumnSpec&) = default;
};

struct TableSchema {
    std::string table_id;
    std::vector<ColumnSpec> columns;
    std::optional<std::string> notes;

    /// Index of the named column, if present.
    std::optional<std::size_t> find(std::string_view name) const;

    friend bool operator==(const TableSchema&, const TableSchema&) = default;
};

using Row = std::vector<Cell>;

struct DataTable {
    TableSchema schema;
    std::vector<Row> rows;

    std::size_t column_count() const { return schema.columns.size(); }

    friend bool operator==(const DataTable&, const DataTable&) = default;
};

/// Lists every invariant violation: schema shape, row arity, cell types and,
/// when `require_lowercase` is set, non-lowercase string cells.
std::vector<std::string> validate_table(const DataTable& table, bool require_lowercase = false);

/// Parses `raw` as `dtype`. Empty or whitespace-only input yields null.
/// Throws CoercionError when non-empty input does not parse.
Cell coerce_cell(std::string_view raw, Dtype dtype);

enum class MitigationFlag {
    QuoteValues,
    ColumnDescriptions,
    DateFormatHints,
    NoImportDirective,
    LowercaseDirective,
};

std::string_view to_string(MitigationFlag flag);
MitigationFlag parse_mitigation_flag(std::string_view text);

/// Assumptions, constraints and prompt mitigations that accompany a question.
struct SupplementarySpec {
    std::vector<std::string> assumptions;
    std::vector<std::string> constraints;
    std::set<MitigationFlag> mitigation_flags;

    friend bool operator==(const SupplementarySpec&, const SupplementarySpec&) = default;
};

enum class Role { DataScientist, GeneralUser, DataOwner };
enum class QType { Retrieval, Aggregation, DataAnalysis };

std::string_view to_string(Role role);
Role parse_role(std::string_view text);
std::string_view to_string(QType qtype);
QType parse_qtype(std::string_view text);

struct Question {
    std::string qid;
    std::string text;
    std::optional<Role> role;
    std::optional<QType> qtype;

    friend bool operator==(const Question&, const Question&) = default;
};

enum class LintFinding { HasImport, HasComments, MissingResultAssignment };

std::string_view to_string(LintFinding lint);
LintFinding parse_lint(std::string_view text);

struct QueryText {
    std::string source;
    std::vector<LintFinding> lint;

    friend bool operator==(const QueryText&, const QueryText&) = default;
};

// ---------------------------------------------------------------------------
// Canonical results

enum class ScalarKind { Number, String, Bool, Null, Datetime };

std::string_view to_string(ScalarKind kind);

struct Scalar {
    std::variant<std::monostate, double, std::string, bool, DateTime> value;

    static Scalar null() { return {}; }
    /// Non-finite input becomes null.
    static Scalar number(double v);
    static Scalar string(std::string v) { return Scalar{std::move(v)}; }
    static Scalar boolean(bool v) { return Scalar{v}; }
    static Scalar datetime(std::string iso) { return Scalar{DateTime{std::move(iso)}}; }

    ScalarKind kind() const;
    bool is_number() const { return std::holds_alternative<double>(value); }
    bool is_string() const { return std::holds_alternative<std::string>(value); }
    double as_number() const { return std::get<double>(value); }
    const std::string& as_string() const { return std::get<std::string>(value); }

    friend bool operator==(const Scalar&, const Scalar&) = default;
};

struct ValueList {
    std::vector<Scalar> values;
    friend bool operator==(const ValueList&, const ValueList&) = default;
};

struct Series {
    std::optional<std::string> name;
    std::vector<Scalar> index;
    std::vector<Scalar> values;
    friend bool operator==(const Series&, const Series&) = default;
};

struct TableResult {
    std::vector<std::string> columns;
    std::vector<std::vector<Scalar>> rows;
    friend bool operator==(const TableResult&, const TableResult&) = default;
};

enum class ExecErrorKind { RejectedUnsafe, RuntimeError, NoResult, Timeout, ResourceLimit, ResultTooLarge };

std::string_view to_string(ExecErrorKind kind);
ExecErrorKind parse_exec_error_kind(std::string_view text);

struct ExecError {
    ExecErrorKind kind = ExecErrorKind::RuntimeError;
    std::string message;
    friend bool operator==(const ExecError&, const ExecError&) = default;
};

using CanonResult = std::variant<Scalar, ValueList, Series, TableResult, ExecError>;

inline bool is_error(const CanonResult& r) { return std::holds_alternative<ExecError>(r); }
/// Series, TableResult and ValueList are containers; Scalar is not.
inline bool is_container(const CanonResult& r) {
    return std::holds_alternative<ValueList>(r) || std::holds_alternative<Series>(r) ||
           std::holds_alternative<TableResult>(r);
}

/// Checks Series arity, Table rectangularity and number finiteness.
std::vector<std::string> validate_result(const CanonResult& r);

std::string_view result_kind_name(const CanonResult& r);

// ---------------------------------------------------------------------------

enum class Verdict {
    CorrectStrict,
    CorrectRelaxed,
    Incorrect,
    NeedsReview,
    ExecErrorVerdict,
    RejectedUnsafe,
    Timeout,
};

std::string_view to_string(Verdict v);
Verdict parse_verdict(std::string_view text);
inline bool is_correct(Verdict v) { return v == Verdict::CorrectStrict || v == Verdict::CorrectRelaxed; }

struct ReferenceQuery {
    QueryText query;
    friend bool operator==(const ReferenceQuery&, const ReferenceQuery&) = default;
};

struct KnownAnswer {
    CanonResult answer;
    friend bool operator==(const KnownAnswer&, const KnownAnswer&) = default;
};

struct TaskInstance {
    Question question;
    std::string table_id;
    std::variant<ReferenceQuery, KnownAnswer> ground_truth;
    /// Human review bit for curated datasets.
    bool reviewed = false;
    /// Failure-type annotation for curated failure fixtures.
    std::optional<std::string> failure_type;

    friend bool operator==(const TaskInstance&, const TaskInstance&) = default;
};

}  // namespace dfqa
