#pragma once

// Evaluation pipeline: prompt -> completion -> code -> sandbox -> judge, plus
// pass@1, breakdowns, error classification and report files.

#include "dfqa/bundle.hpp"
#include "dfqa/equivalence.hpp"
#include "dfqa/gateway.hpp"
#include "dfqa/prompt.hpp"
#include "dfqa/sandbox.hpp"

#include <functional>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <vector>

namespace dfqa::runner {

class EmptyRun : public Error {
public:
    EmptyRun() : Error("no records to score") {}
};

struct EvalConfig {
    llm::GenParams params;
    judge::JudgeConfig judge;
    /// Concurrent completions.
    std::size_t llm_in_flight = 4;
    /// Concurrent sandbox submissions; normally the pool size.
    std::size_t exec_in_flight = 2;
    protocol::Limits limits;
    std::string dataset;
};

struct EvalRecord {
    std::string qid;
    std::string model;
    std::string table_id;
    std::string question;
    std::optional<Role> role;
    std::optional<QType> qtype;
    std::string prompt_digest;
    std::string completion;
    QueryText query;
    CanonResult exec_result;
    /// Ground-truth answer; unset when it could not be computed.
    std::optional<CanonResult> expected;
    Verdict verdict = Verdict::Incorrect;
    std::optional<std::set<prompt::ErrorClass>> error_classes;
    std::int64_t latency_ms = 0;
    /// Why the pipeline stopped short for this task, if it did.
    std::string note;
};

/// error_classes only on non-correct records.
bool record_consistent(const EvalRecord& r);

json record_to_json(const EvalRecord& r);
EvalRecord record_from_json(const json& j);
std::vector<EvalRecord> read_records(const std::string& path);

struct Breakdown {
    std::size_t total = 0;
    std::size_t correct = 0;
    double pass_at_1() const { return total ? static_cast<double>(correct) / static_cast<double>(total) : 0.0; }
};

using ErrorMatrix = std::map<std::string, std::map<prompt::ErrorClass, std::size_t>>;

struct Report {
    double pass_at_1 = 0;
    std::size_t total = 0;
    std::map<Verdict, std::size_t> verdict_counts;
    std::map<std::string, Breakdown> by_role;
    std::map<std::string, Breakdown> by_qtype;
    ErrorMatrix error_matrix;
    /// Non-correct records still lacking error classes.
    std::size_t unclassified = 0;
    json metadata = json::object();
};

/// (strict + relaxed [+ needs_review]) / N. Throws EmptyRun.
double pass_at_1(const std::vector<EvalRecord>& records, bool count_needs_review = false);

Report build_report(const std::vector<EvalRecord>& records, bool count_needs_review, json metadata);
json report_to_json(const Report& report);

/// Digest of the run configuration, stable across processes.
std::string config_digest(const json& config);

struct EvalOutput {
    Report report;
    std::vector<EvalRecord> records;
};

/// Runs every task of the bundle. Only bundle or protocol problems throw.
EvalOutput run_eval(const TaskBundle& bundle, const prompt::TemplateSet& templates, llm::Gateway& gateway,
                    sandbox::Executor& executor, const EvalConfig& cfg);

/// Human-readable rendering used for classification prompts.
std::string render_result_text(const CanonResult& r, std::size_t max_chars = 2000);

struct ClassifyOutcome {
    std::size_t classified = 0;
    std::size_t failures = 0;
};

/// Fills error_classes on every non-correct record. Gateway failures leave
/// the record unclassified and are counted.
ClassifyOutcome classify_errors(std::vector<EvalRecord>& records, llm::Gateway& gateway, const llm::GenParams& params,
                                const prompt::TemplateSet& templates,
                                const std::function<const DataTable*(const std::string&)>& table_lookup,
                                std::size_t max_in_flight = 4);

/// Re-judges stored results under `cfg`, then applies review decisions
/// ({"qid", "accept": true|false|null}) to records left at needs_review.
void rejudge(std::vector<EvalRecord>& records, const judge::JudgeConfig& cfg, const std::vector<json>& reviews = {});

struct EmitOptions {
    bool write_json = true;
    bool write_csv = true;
};

EmitOptions parse_formats(std::string_view formats);

/// Deterministic per-record CSV (no latency or timestamps).
std::string records_csv(const std::vector<EvalRecord>& records);
/// One row per model, one column per error class.
std::string error_matrix_csv(const ErrorMatrix& matrix);
std::vector<json> review_lines(const std::vector<EvalRecord>& records);

/// Writes summary.json, records.jsonl (json); records.csv, error_matrix.csv
/// (csv); and review.jsonl.
void emit_report(const Report& report, const std::vector<EvalRecord>& records, const std::string& out_dir,
                 const EmitOptions& formats);

std::string utc_timestamp();

}  // namespace dfqa::runner
