#pragma once

// Role-conditioned question/query generation over user-supplied tables:
// parsing generated pairs, automatic curation, ground truth via the sandbox,
// and the CSV importer.

#include "dfqa/bundle.hpp"
#include "dfqa/gateway.hpp"
#include "dfqa/model.hpp"
#include "dfqa/prompt.hpp"
#include "dfqa/sandbox.hpp"

#include <map>
#include <optional>
#include <string>
#include <vector>

namespace dfqa::uci {

enum class RejectionReason { ExecError, DisallowedImport, EmptyResult, NeedsManualReview };

std::string_view to_string(RejectionReason r);
RejectionReason parse_rejection_reason(std::string_view text);

struct GeneratedPair {
    std::string question;
    QueryText query;
    Role role = Role::GeneralUser;
    bool keep = true;
    std::optional<RejectionReason> rejection_reason;
    /// Set by a human reviewer; kept pairs start unreviewed.
    bool reviewed = false;
    /// Explicit label; the heuristic applies when unset.
    std::optional<QType> qtype;
    std::optional<CanonResult> ground_truth;
    /// Execution error text for rejected pairs.
    std::string note;
};

/// keep=false iff rejection_reason is set.
bool pair_consistent(const GeneratedPair& p);

struct ParseOutcome {
    std::vector<GeneratedPair> pairs;
    /// Numbered blocks that lacked a question or a query.
    std::size_t warnings = 0;
};

/// Extracts numbered "Question: ... Query: ```python ...```" blocks.
ParseOutcome parse_generated_pairs(std::string_view llm_text, Role role);

/// Imported module roots outside pandas/numpy/math.
std::vector<std::string> disallowed_imports(std::string_view source);

/// Retrieval for a single filter/projection, aggregation for one aggregation
/// call, data_analysis for anything more.
QType heuristic_qtype(std::string_view source);

class CurationError : public Error {
public:
    CurationError(std::size_t index, const std::string& what);
    std::size_t index;
};

/// Runs the pair's reference query. ExecError results are returned as is.
CanonResult compute_ground_truth(const GeneratedPair& pair, const DataTable& table, sandbox::Executor& executor,
                                 const protocol::Limits& limits = {});

/// True for null scalars and containers with no values or rows.
bool is_empty_result(const CanonResult& r);

/// Executes every pair and records rejections. Kept pairs get their ground
/// truth and qtype attached and stay unreviewed. Transport failures throw
/// CurationError naming the pair index.
std::vector<GeneratedPair> curate(std::vector<GeneratedPair> pairs, const DataTable& table,
                                  sandbox::Executor& executor, const protocol::Limits& limits = {});

json curation_record(const GeneratedPair& p, const std::string& table_id, std::size_t index,
                     const std::optional<std::string>& qid);

struct RoleTypeCounts {
    std::size_t retrieval_aggregation = 0;
    std::size_t data_analysis = 0;
    std::size_t total() const { return retrieval_aggregation + data_analysis; }
    /// Integer percentage of retrieval/aggregation, rounded half up.
    int retrieval_aggregation_percent() const;
    int data_analysis_percent() const;
};

/// Per-role counts of tasks that carry both a role and a qtype.
std::map<Role, RoleTypeCounts> role_distribution(const std::vector<TaskInstance>& tasks);
RoleTypeCounts overall_distribution(const std::vector<TaskInstance>& tasks);

// ---------------------------------------------------------------------------
// CSV import

/// RFC 4180 records; quoted fields may contain separators, quotes and newlines.
std::vector<std::vector<std::string>> parse_csv(std::string_view text, char separator = ',');

/// Missing-value markers: empty, "?", "NA", "N/A", "NaN", "nan", "null", "None".
bool is_missing_marker(std::string_view s);

Dtype infer_dtype(const std::vector<std::string>& values);

/// Header row plus inferred dtypes. `overrides` maps column name to a dtype
/// string or to {"dtype", "description", "format_hint"}.
DataTable import_csv_text(std::string_view text, const std::string& table_id, const json& overrides = json::object());

/// Reads `<path>` and, if present, `<stem>.dtypes.json` beside it.
DataTable import_csv(const std::string& path);

/// Every *.csv in `dir`, sorted by file name.
std::vector<DataTable> import_csv_dir(const std::string& dir);

// ---------------------------------------------------------------------------
// End-to-end generation

struct GenOptions {
    std::vector<Role> roles{Role::DataScientist, Role::GeneralUser, Role::DataOwner};
    std::size_t n = 20;
    llm::GenParams params;
    std::size_t max_in_flight = 4;
    protocol::Limits limits;
};

struct GenResult {
    TaskBundle bundle;
    std::vector<json> curation;
    std::size_t parse_warnings = 0;
    std::size_t generation_failures = 0;
};

GenResult generate_dataset(const std::vector<DataTable>& tables, const prompt::TemplateSet& templates,
                           llm::Gateway& gateway, sandbox::Executor& executor, const GenOptions& options);

}  // namespace dfqa::uci
