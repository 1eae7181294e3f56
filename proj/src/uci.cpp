#include "dfqa/uci.hpp"

#include "dfqa/text.hpp"

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <regex>
#include <set>

namespace dfqa::uci {

namespace fs = std::filesystem;

namespace {

constexpr std::array<std::pair<RejectionReason, std::string_view>, 4> kReasons{{
    {RejectionReason::ExecError, "exec_error"},
    {RejectionReason::DisallowedImport, "disallowed_import"},
    {RejectionReason::EmptyResult, "empty_result"},
    {RejectionReason::NeedsManualReview, "needs_manual_review"},
}};

const std::set<std::string>& allowed_modules() {
    static const std::set<std::string> mods{"pandas", "numpy", "math"};
    return mods;
}

std::string strip_markdown(std::string_view s) {
    std::string out;
    for (std::size_t i = 0; i < s.size(); ++i) {
        if (s[i] == '*' && i + 1 < s.size() && s[i + 1] == '*') {
            ++i;
            continue;
        }
        out.push_back(s[i]);
    }
    return std::string(text::trim(out));
}

/// Removes a case-insensitive "label:" prefix; returns false if absent.
bool take_label(std::string& line, std::string_view label) {
    const auto t = std::string(text::trim(line));
    if (!text::starts_with_ci(t, label)) return false;
    auto rest = std::string_view(t).substr(label.size());
    if (rest.empty() || rest.front() != ':') return false;
    line = std::string(text::trim(rest.substr(1)));
    return true;
}

int percent(std::size_t part, std::size_t total) {
    if (total == 0) return 0;
    return static_cast<int>(std::floor(100.0 * static_cast<double>(part) / static_cast<double>(total) + 0.5));
}

}  // namespace

std::string_view to_string(RejectionReason r) {
    for (const auto& [k, v] : kReasons) {
        if (k == r) return v;
    }
    return "exec_error";
}

RejectionReason parse_rejection_reason(std::string_view text) {
    for (const auto& [k, v] : kReasons) {
        if (v == text) return k;
    }
    throw Error("unknown rejection reason '" + std::string(text) + "'");
}

bool pair_consistent(const GeneratedPair& p) { return p.keep != p.rejection_reason.has_value(); }

ParseOutcome parse_generated_pairs(std::string_view llm_text, Role role) {
    static const std::regex numbered(R"(^\s*\**\s*(\d+)\s*[.)]\s*(.*)$)");
    const auto lines = text::split(llm_text, '\n');

    std::vector<std::vector<std::string>> blocks;
    bool in_fence = false;
    for (const auto& raw : lines) {
        const auto line = std::string(raw.size() && raw.back() == '\r' ? raw.substr(0, raw.size() - 1) : raw);
        const bool fence = text::trim(line).rfind("```", 0) == 0;
        std::smatch m;
        if (!in_fence && !fence && std::regex_match(line, m, numbered)) {
            blocks.push_back({m[2].str()});
        } else if (!blocks.empty()) {
            blocks.back().push_back(line);
        }
        if (fence) in_fence = !in_fence;
    }

    ParseOutcome out;
    for (const auto& block : blocks) {
        std::vector<std::string> question_lines;
        std::vector<std::string> query_lines;
        bool seen_query_label = false, in_code = false, code_done = false, inline_query = false;
        for (std::size_t i = 0; i < block.size(); ++i) {
            auto line = i == 0 ? strip_markdown(block[i]) : block[i];
            const auto trimmed = std::string(text::trim(line));
            if (trimmed.rfind("```", 0) == 0) {
                if (in_code) {
                    in_code = false;
                    code_done = true;
                } else if (!code_done) {
                    in_code = true;
                    if (inline_query) query_lines.clear();
                }
                continue;
            }
            if (in_code) {
                query_lines.push_back(line);
                continue;
            }
            if (code_done) continue;
            auto plain = strip_markdown(trimmed);
            if (take_label(plain, "Query") || take_label(plain, "Pandas Query") || take_label(plain, "Code")) {
                seen_query_label = true;
                if (!plain.empty()) {
                    query_lines.push_back(plain);
                    inline_query = true;
                }
                continue;
            }
            if (seen_query_label) {
                if (!plain.empty()) query_lines.push_back(plain);
                continue;
            }
            take_label(plain, "Question");
            if (!plain.empty()) question_lines.push_back(plain);
        }
        const auto question = text::join(question_lines, " ");
        auto query = std::string(text::trim(text::join(query_lines, "\n")));
        // Inline code span: `result = ...`
        if (query.size() >= 2 && query.front() == '`' && query.back() == '`' &&
            query.find('`', 1) == query.size() - 1) {
            query = std::string(text::trim(query.substr(1, query.size() - 2)));
        }
        if (question.empty() || query.empty()) {
            ++out.warnings;
            continue;
        }
        GeneratedPair p;
        p.question = question;
        p.query = QueryText{query, prompt::lint_query(query)};
        p.role = role;
        out.pairs.push_back(std::move(p));
    }
    return out;
}

std::vector<std::string> disallowed_imports(std::string_view source) {
    static const std::regex import_stmt(R"(^\s*import\s+(.+)$)");
    static const std::regex from_stmt(R"(^\s*from\s+([\w.]+)\s+import\b.*$)");
    std::vector<std::string> out;
    const auto check = [&](std::string module) {
        module = std::string(text::trim(module));
        const auto root = module.substr(0, module.find('.'));
        if (!root.empty() && !allowed_modules().count(root) && std::find(out.begin(), out.end(), root) == out.end()) {
            out.push_back(root);
        }
    };
    for (const auto& raw : text::split(source, '\n')) {
        for (const auto& stmt : text::split(raw, ';')) {
            std::smatch m;
            const std::string s(stmt);
            if (std::regex_match(s, m, from_stmt)) {
                check(m[1].str());
            } else if (std::regex_match(s, m, import_stmt)) {
                for (const auto& part : text::split(m[1].str(), ',')) {
                    auto name = std::string(text::trim(part));
                    if (const auto sp = name.find(' '); sp != std::string::npos) name = name.substr(0, sp);
                    check(name);
                }
            }
        }
    }
    return out;
}

QType heuristic_qtype(std::string_view source) {
    static const std::set<std::string> analysis_ops{
        "groupby", "corr",   "corrwith", "sort_values", "sort_index", "nlargest",    "nsmallest", "value_counts",
        "pivot",   "pivot_table", "merge", "join",      "apply",      "agg",         "aggregate", "describe",
        "quantile", "cov",   "rolling",  "cumsum",      "cumprod",    "rank",        "crosstab",  "transform",
        "resample", "cut",   "qcut",     "map",         "diff",       "pct_change",  "melt",      "stack",
        "unstack", "explode", "expanding", "ewm",       "polyfit",    "corrcoef",    "concat",    "drop_duplicates",
    };
    static const std::set<std::string> aggregation_ops{
        "mean", "sum", "count", "max", "min", "median", "nunique", "size", "idxmax", "idxmin",
        "unique", "mode", "std", "var", "len", "shape", "prod", "any", "all",
    };
    static const std::regex call(R"(\.?\b([A-Za-z_]\w*)\s*\()");
    static const std::regex attr(R"(\.(shape|size)\b)");

    std::size_t statements = 0;
    std::string code;
    for (const auto& raw : text::split(source, '\n')) {
        const auto t = text::trim(raw);
        if (t.empty() || t.front() == '#') continue;
        if (t.rfind("import ", 0) == 0 || t.rfind("from ", 0) == 0) continue;
        for (const auto& stmt : text::split(t, ';')) {
            if (!text::trim(stmt).empty()) ++statements;
        }
        code += std::string(t) + "\n";
    }
    if (statements > 1) return QType::DataAnalysis;

    std::size_t aggregations = 0;
    for (auto it = std::sregex_iterator(code.begin(), code.end(), call); it != std::sregex_iterator(); ++it) {
        const auto name = (*it)[1].str();
        if (analysis_ops.count(name)) return QType::DataAnalysis;
        if (aggregation_ops.count(name)) ++aggregations;
    }
    for (auto it = std::sregex_iterator(code.begin(), code.end(), attr); it != std::sregex_iterator(); ++it) {
        // `.size(` was already counted as a call.
        const auto end = static_cast<std::size_t>(it->position() + it->length());
        if (end < code.size() && code[end] == '(') continue;
        ++aggregations;
    }
    if (aggregations > 1) return QType::DataAnalysis;
    return aggregations == 1 ? QType::Aggregation : QType::Retrieval;
}

CurationError::CurationError(std::size_t i, const std::string& what)
    : Error("curation failed at pair " + std::to_string(i) + ": " + what), index(i) {}

CanonResult compute_ground_truth(const GeneratedPair& pair, const DataTable& table, sandbox::Executor& executor,
                                 const protocol::Limits& limits) {
    sandbox::ExecRequest req{"gt", &table, pair.query.source, limits};
    return executor.execute(req).result;
}

bool is_empty_result(const CanonResult& r) {
    if (const auto* s = std::get_if<Scalar>(&r)) return s->kind() == ScalarKind::Null;
    if (const auto* l = std::get_if<ValueList>(&r)) return l->values.empty();
    if (const auto* s = std::get_if<Series>(&r)) return s->values.empty();
    if (const auto* t = std::get_if<TableResult>(&r)) return t->rows.empty() || t->columns.empty();
    return false;
}

std::vector<GeneratedPair> curate(std::vector<GeneratedPair> pairs, const DataTable& table,
                                  sandbox::Executor& executor, const protocol::Limits& limits) {
    for (std::size_t i = 0; i < pairs.size(); ++i) {
        auto& p = pairs[i];
        const auto reject = [&](RejectionReason reason, std::string note) {
            p.keep = false;
            p.rejection_reason = reason;
            p.note = std::move(note);
            p.ground_truth.reset();
        };
        if (const auto bad = disallowed_imports(p.query.source); !bad.empty()) {
            reject(RejectionReason::DisallowedImport, "imports " + text::join(bad, ", "));
            continue;
        }
        CanonResult truth;
        try {
            truth = compute_ground_truth(p, table, executor, limits);
        } catch (const std::invalid_argument&) {
            throw;
        } catch (const std::exception& e) {
            throw CurationError(i, e.what());
        }
        if (const auto* err = std::get_if<ExecError>(&truth)) {
            const bool import_error = err->kind == ExecErrorKind::RejectedUnsafe &&
                                      err->message.find("import") != std::string::npos;
            reject(import_error ? RejectionReason::DisallowedImport : RejectionReason::ExecError,
                   std::string(to_string(err->kind)) + ": " + err->message);
            continue;
        }
        if (is_empty_result(truth)) {
            reject(RejectionReason::EmptyResult, "query returned an empty result");
            continue;
        }
        p.keep = true;
        p.rejection_reason.reset();
        p.reviewed = false;
        p.ground_truth = std::move(truth);
        if (!p.qtype) p.qtype = heuristic_qtype(p.query.source);
    }
    return pairs;
}

json curation_record(const GeneratedPair& p, const std::string& table_id, std::size_t index,
                     const std::optional<std::string>& qid) {
    json j{{"table_id", table_id},
           {"index", index},
           {"role", to_string(p.role)},
           {"question", p.question},
           {"query", p.query.source},
           {"keep", p.keep},
           {"rejection_reason", p.rejection_reason ? json(to_string(*p.rejection_reason)) : json(nullptr)},
           {"reviewed", p.reviewed}};
    if (qid) j["qid"] = *qid;
    if (p.qtype) j["qtype"] = to_string(*p.qtype);
    if (!p.note.empty()) j["note"] = p.note;
    if (p.ground_truth) j["ground_truth"] = result_to_json(*p.ground_truth);
    return j;
}

int RoleTypeCounts::retrieval_aggregation_percent() const { return percent(retrieval_aggregation, total()); }
int RoleTypeCounts::data_analysis_percent() const { return percent(data_analysis, total()); }

std::map<Role, RoleTypeCounts> role_distribution(const std::vector<TaskInstance>& tasks) {
    std::map<Role, RoleTypeCounts> out;
    for (const auto& t : tasks) {
        if (!t.question.role || !t.question.qtype) continue;
        auto& c = out[*t.question.role];
        if (*t.question.qtype == QType::DataAnalysis) {
            ++c.data_analysis;
        } else {
            ++c.retrieval_aggregation;
        }
    }
    return out;
}

RoleTypeCounts overall_distribution(const std::vector<TaskInstance>& tasks) {
    RoleTypeCounts total;
    for (const auto& [role, c] : role_distribution(tasks)) {
        total.retrieval_aggregation += c.retrieval_aggregation;
        total.data_analysis += c.data_analysis;
    }
    return total;
}

// ---------------------------------------------------------------------------

std::vector<std::vector<std::string>> parse_csv(std::string_view input, char separator) {
    std::vector<std::vector<std::string>> rows;
    std::vector<std::string> row;
    std::string field;
    bool quoted = false, field_started = false;
    const auto end_field = [&] {
        row.push_back(std::move(field));
        field.clear();
        field_started = false;
    };
    const auto end_row = [&] {
        end_field();
        rows.push_back(std::move(row));
        row.clear();
    };
    for (std::size_t i = 0; i < input.size(); ++i) {
        const char c = input[i];
        if (quoted) {
            if (c == '"') {
                if (i + 1 < input.size() && input[i + 1] == '"') {
                    field.push_back('"');
                    ++i;
                } else {
                    quoted = false;
                }
            } else {
                field.push_back(c);
            }
        } else if (c == '"' && !field_started) {
            quoted = true;
            field_started = true;
        } else if (c == separator) {
            end_field();
        } else if (c == '\n' || c == '\r') {
            if (c == '\r' && i + 1 < input.size() && input[i + 1] == '\n') ++i;
            end_row();
        } else {
            field.push_back(c);
            field_started = true;
        }
    }
    if (quoted) throw Error("CSV: unterminated quoted field");
    if (field_started || !field.empty() || !row.empty()) end_row();
    return rows;
}

bool is_missing_marker(std::string_view s) {
    static const std::set<std::string, std::less<>> markers{"", "?", "NA", "N/A", "NaN", "nan", "null", "None"};
    return markers.count(text::trim(s)) > 0;
}

Dtype infer_dtype(const std::vector<std::string>& values) {
    static const std::regex iso_date(R"(^\d{4}-\d{2}-\d{2}([T ]\d{2}:\d{2}(:\d{2}(\.\d+)?)?)?$)");
    bool any = false, all_int = true, all_num = true, all_bool = true, all_date = true;
    for (const auto& raw : values) {
        if (is_missing_marker(raw)) continue;
        any = true;
        const auto v = std::string(text::trim(raw));
        const auto num = text::parse_number(v);
        if (!num) {
            all_num = all_int = false;
        } else if (v.find_first_of(".eE") != std::string::npos || std::fabs(*num) >= 9.2e18) {
            all_int = false;
        }
        const auto lv = text::lower(v);
        if (lv != "true" && lv != "false") all_bool = false;
        if (!std::regex_match(v, iso_date)) all_date = false;
    }
    if (!any) return Dtype::String;
    if (all_int) return Dtype::Int;
    if (all_num) return Dtype::Float;
    if (all_bool) return Dtype::Bool;
    if (all_date) return Dtype::Datetime;
    return Dtype::String;
}

DataTable import_csv_text(std::string_view csv, const std::string& table_id, const json& overrides) {
    auto records = parse_csv(csv);
    // A trailing blank line parses as one empty field.
    records.erase(std::remove_if(records.begin(), records.end(),
                                 [](const auto& r) { return r.size() == 1 && text::trim(r[0]).empty(); }),
                  records.end());
    if (records.empty()) throw Error("CSV '" + table_id + "' has no header row");
    DataTable t;
    t.schema.table_id = table_id;
    const auto& header = records.front();
    std::set<std::string> seen;
    for (const auto& h : header) {
        const auto name = std::string(text::trim(h));
        if (name.empty()) throw Error("CSV '" + table_id + "': empty column name");
        if (!seen.insert(name).second) throw Error("CSV '" + table_id + "': duplicate column '" + name + "'");
        t.schema.columns.push_back(ColumnSpec{name, Dtype::String, std::nullopt, std::nullopt});
    }
    for (std::size_t r = 1; r < records.size(); ++r) {
        if (records[r].size() != header.size()) {
            throw Error("CSV '" + table_id + "' line " + std::to_string(r + 1) + ": " +
                        std::to_string(records[r].size()) + " fields, header has " + std::to_string(header.size()));
        }
    }
    for (std::size_t c = 0; c < header.size(); ++c) {
        auto& col = t.schema.columns[c];
        std::vector<std::string> values;
        for (std::size_t r = 1; r < records.size(); ++r) values.push_back(records[r][c]);
        col.dtype = infer_dtype(values);
        if (overrides.is_object() && overrides.contains(col.name)) {
            const auto& o = overrides.at(col.name);
            if (o.is_string()) {
                col.dtype = parse_dtype(o.get<std::string>());
            } else {
                if (o.contains("dtype")) col.dtype = parse_dtype(o.at("dtype").get<std::string>());
                if (o.contains("description")) col.description = o.at("description").get<std::string>();
                if (o.contains("format_hint")) col.format_hint = o.at("format_hint").get<std::string>();
            }
        }
    }
    if (overrides.is_object() && overrides.contains("$notes")) t.schema.notes = overrides.at("$notes").get<std::string>();
    for (std::size_t r = 1; r < records.size(); ++r) {
        Row row;
        for (std::size_t c = 0; c < header.size(); ++c) {
            const auto& raw = records[r][c];
            const auto dtype = t.schema.columns[c].dtype;
            if (is_missing_marker(raw) && (dtype != Dtype::String || text::trim(raw).empty() || text::trim(raw) == "?")) {
                row.emplace_back(std::monostate{});
                continue;
            }
            try {
                row.push_back(coerce_cell(raw, dtype));
            } catch (const CoercionError& e) {
                throw Error("CSV '" + table_id + "' line " + std::to_string(r + 1) + ", column '" +
                            t.schema.columns[c].name + "': " + e.what());
            }
        }
        t.rows.push_back(std::move(row));
    }
    return t;
}

DataTable import_csv(const std::string& path) {
    const fs::path p(path);
    const auto stem = p.stem().string();
    const auto override_path = p.parent_path() / (stem + ".dtypes.json");
    json overrides = json::object();
    if (fs::exists(override_path)) overrides = json::parse(text::read_file(override_path.string()));
    return import_csv_text(text::read_file(path), stem, overrides);
}

std::vector<DataTable> import_csv_dir(const std::string& dir) {
    std::vector<fs::path> files;
    for (const auto& e : fs::directory_iterator(dir)) {
        if (e.is_regular_file() && e.path().extension() == ".csv") files.push_back(e.path());
    }
    std::sort(files.begin(), files.end());
    std::vector<DataTable> out;
    for (const auto& f : files) out.push_back(import_csv(f.string()));
    return out;
}

GenResult generate_dataset(const std::vector<DataTable>& tables, const prompt::TemplateSet& templates,
                           llm::Gateway& gateway, sandbox::Executor& executor, const GenOptions& options) {
    struct Job {
        const DataTable* table;
        Role role;
    };
    std::vector<Job> jobs;
    std::vector<llm::CompletionRequest> requests;
    for (const auto& t : tables) {
        for (auto role : options.roles) {
            jobs.push_back({&t, role});
            requests.push_back({prompt::build_generation_prompt(templates, t.schema, role, options.n).messages,
                                options.params});
        }
    }
    const auto completions = gateway.complete_batch(requests, options.max_in_flight);

    GenResult out;
    out.bundle.meta.name = "uci-generated";
    out.bundle.meta.supplementary.mitigation_flags.insert(MitigationFlag::NoImportDirective);
    std::set<std::string> used_tables;
    for (std::size_t j = 0; j < jobs.size(); ++j) {
        const auto& job = jobs[j];
        const auto& table_id = job.table->schema.table_id;
        if (!completions[j].ok()) {
            ++out.generation_failures;
            out.curation.push_back({{"table_id", table_id},
                                    {"role", to_string(job.role)},
                                    {"generation_error", completions[j].error_type + ": " + completions[j].error}});
            continue;
        }
        auto parsed = parse_generated_pairs(*completions[j].text, job.role);
        out.parse_warnings += parsed.warnings;
        const auto curated = curate(std::move(parsed.pairs), *job.table, executor, options.limits);
        for (std::size_t k = 0; k < curated.size(); ++k) {
            const auto& p = curated[k];
            const auto qid = table_id + "-" + std::string(to_string(job.role)) + "-" + std::to_string(k + 1);
            out.curation.push_back(curation_record(p, table_id, k, qid));
            if (!p.keep) continue;
            TaskInstance task;
            task.question = Question{qid, p.question, p.role, p.qtype};
            task.table_id = table_id;
            task.ground_truth = ReferenceQuery{p.query};
            task.reviewed = false;
            out.bundle.tasks.push_back(std::move(task));
            used_tables.insert(table_id);
        }
    }
    for (const auto& t : tables) {
        if (used_tables.count(t.schema.table_id)) out.bundle.tables.push_back(t);
    }
    return out;
}

}  // namespace dfqa::uci
