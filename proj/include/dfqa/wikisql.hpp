#pragma once

// WikiSQL release records -> task bundles, with ground truth computed by
// executing the released logical forms.

#include "dfqa/bundle.hpp"
#include "dfqa/json_io.hpp"
#include "dfqa/model.hpp"

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

namespace dfqa::wikisql {

class IngestError : public Error {
public:
    using Error::Error;
};

class OracleError : public Error {
public:
    using Error::Error;
};

enum class Agg { None, Max, Min, Count, Sum, Avg };
enum class CondOp { Eq, Gt, Lt };

/// Release encoding: agg index into ["", MAX, MIN, COUNT, SUM, AVG].
Agg agg_from_index(int index);
/// Release encoding: op index into ["=", ">", "<"].
CondOp op_from_index(int index);

struct Condition {
    std::size_t column = 0;
    CondOp op = CondOp::Eq;
    /// Verbatim value from the release: number or string.
    std::variant<double, std::string> value;
};

struct LogicalForm {
    std::size_t sel = 0;
    Agg agg = Agg::None;
    std::vector<Condition> conds;
};

LogicalForm logical_form_from_json(const json& sql);

/// Empty iff the form is valid against a schema of `arity` columns.
std::vector<std::string> validate_logical_form(const LogicalForm& lf, std::size_t arity);

struct IngestReport {
    /// Names of 'real' columns demoted to string because a cell did not parse.
    std::vector<std::string> demoted_columns;
};

/// Converts a raw table record (id, header, types, rows). 'real' columns
/// become float; string cells are lowercased.
DataTable ingest_table(const json& raw, IngestReport* report = nullptr);

std::string lower_question(std::string_view text);

struct EvalInfo {
    /// A gt/lt condition compared at least one pair lexicographically.
    bool lexicographic_fallback = false;
};

CanonResult eval_logical_form(const LogicalForm& lf, const DataTable& table, EvalInfo* info = nullptr);

QType classify_qtype(const LogicalForm& lf);

struct SkippedTask {
    std::size_t index = 0;
    std::string qid;
    std::string reason;
};

struct BuildManifest {
    std::size_t questions_read = 0;
    std::size_t selected = 0;
    std::size_t emitted = 0;
    std::vector<SkippedTask> skipped;
    std::vector<std::string> lexicographic_fallbacks;
    std::vector<std::pair<std::string, std::string>> demoted_columns;
    std::vector<std::string> excluded;

    json to_json() const;
};

struct BuildOptions {
    std::optional<std::size_t> limit;
    std::uint64_t seed = 0;
    std::string qid_prefix = "wikisql";
    /// qids dropped before sampling (curated bad-item list).
    std::vector<std::string> exclude;
};

struct BuildResult {
    TaskBundle bundle;
    BuildManifest manifest;
};

BuildResult build_bundle(const std::vector<json>& raw_tables, const std::vector<json>& raw_questions,
                         const BuildOptions& options);

/// Reads `<dir>/<split>.tables.jsonl` and `<dir>/<split>.jsonl`.
BuildResult build_bundle_from_release(const std::string& dir, const std::string& split, const BuildOptions& options);

/// Default meta for WikiSQL bundles: lowercase directive and lowercase judging.
BundleMeta default_meta();

}  // namespace dfqa::wikisql
