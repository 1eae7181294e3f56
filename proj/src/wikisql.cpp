#include "dfqa/wikisql.hpp"

#include "dfqa/text.hpp"

#include <algorithm>
#include <filesystem>
#include <map>
#include <random>
#include <set>
#include <unordered_map>

namespace dfqa::wikisql {

Agg agg_from_index(int index) {
    switch (index) {
        case 0: return Agg::None;
        case 1: return Agg::Max;
        case 2: return Agg::Min;
        case 3: return Agg::Count;
        case 4: return Agg::Sum;
        case 5: return Agg::Avg;
        default: throw OracleError("aggregation index out of range: " + std::to_string(index));
    }
}

CondOp op_from_index(int index) {
    switch (index) {
        case 0: return CondOp::Eq;
        case 1: return CondOp::Gt;
        case 2: return CondOp::Lt;
        default: throw OracleError("condition operator index out of range: " + std::to_string(index));
    }
}

LogicalForm logical_form_from_json(const json& sql) {
    LogicalForm lf;
    try {
        const auto sel = sql.at("sel").get<long long>();
        if (sel < 0) throw OracleError("negative sel");
        lf.sel = static_cast<std::size_t>(sel);
        lf.agg = agg_from_index(sql.at("agg").get<int>());
        for (const auto& c : sql.at("conds")) {
            if (!c.is_array() || c.size() != 3) throw OracleError("condition must be [column, op, value]");
            const auto col = c[0].get<long long>();
            if (col < 0) throw OracleError("negative condition column");
            Condition cond;
            cond.column = static_cast<std::size_t>(col);
            cond.op = op_from_index(c[1].get<int>());
            if (c[2].is_number()) {
                cond.value = c[2].get<double>();
            } else if (c[2].is_string()) {
                cond.value = c[2].get<std::string>();
            } else {
                cond.value = c[2].dump();
            }
            lf.conds.push_back(std::move(cond));
        }
    } catch (const json::exception& e) {
        throw OracleError(std::string("malformed logical form: ") + e.what());
    }
    return lf;
}

std::vector<std::string> validate_logical_form(const LogicalForm& lf, std::size_t arity) {
    std::vector<std::string> out;
    if (lf.sel >= arity) out.push_back("sel " + std::to_string(lf.sel) + " out of range");
    for (std::size_t i = 0; i < lf.conds.size(); ++i) {
        if (lf.conds[i].column >= arity) {
            out.push_back("condition " + std::to_string(i) + " column " + std::to_string(lf.conds[i].column) +
                          " out of range");
        }
    }
    return out;
}

namespace {

std::string raw_cell_text(const json& v) {
    if (v.is_null()) return {};
    if (v.is_string()) return v.get<std::string>();
    if (v.is_number()) return text::format_number(v.get<double>());
    return v.dump();
}

std::string unique_header(std::string name, std::size_t index, std::set<std::string>& used) {
    if (text::trim(name).empty()) name = "column_" + std::to_string(index);
    std::string candidate = name;
    for (int k = 2; used.count(candidate); ++k) candidate = name + " (" + std::to_string(k) + ")";
    used.insert(candidate);
    return candidate;
}

std::string norm_text(std::string_view s) { return text::lower(text::trim(s)); }

std::optional<double> numeric_of(const Cell& c) {
    if (const auto* d = std::get_if<double>(&c)) return *d;
    if (const auto* i = std::get_if<std::int64_t>(&c)) return static_cast<double>(*i);
    if (const auto* s = std::get_if<std::string>(&c)) return text::parse_grouped_number(text::trim(*s));
    return std::nullopt;
}

std::optional<double> numeric_of(const std::variant<double, std::string>& v) {
    if (const auto* d = std::get_if<double>(&v)) return *d;
    return text::parse_grouped_number(text::trim(std::get<std::string>(v)));
}

std::string value_text(const std::variant<double, std::string>& v) {
    if (const auto* d = std::get_if<double>(&v)) return text::format_number(*d);
    return std::get<std::string>(v);
}

bool condition_holds(const Condition& cond, const Cell& cell, Dtype dtype, EvalInfo* info) {
    if (is_null(cell)) return false;
    if (cond.op == CondOp::Eq) {
        if (dtype == Dtype::Float) {
            const auto want = numeric_of(cond.value);
            return want && std::get<double>(cell) == *want;
        }
        return norm_text(cell_text(cell)) == norm_text(value_text(cond.value));
    }
    const auto lhs = numeric_of(cell);
    const auto rhs = numeric_of(cond.value);
    if (lhs && rhs) return cond.op == CondOp::Gt ? *lhs > *rhs : *lhs < *rhs;
    if (info) info->lexicographic_fallback = true;
    const auto a = norm_text(cell_text(cell));
    const auto b = norm_text(value_text(cond.value));
    return cond.op == CondOp::Gt ? a > b : a < b;
}

Scalar cell_scalar(const Cell& c) {
    if (is_null(c)) return Scalar::null();
    if (const auto* d = std::get_if<double>(&c)) return Scalar::number(*d);
    if (const auto* i = std::get_if<std::int64_t>(&c)) return Scalar::number(static_cast<double>(*i));
    if (const auto* b = std::get_if<bool>(&c)) return Scalar::boolean(*b);
    if (const auto* t = std::get_if<DateTime>(&c)) return Scalar::datetime(t->iso);
    return Scalar::string(std::get<std::string>(c));
}

std::string_view agg_name(Agg agg) {
    switch (agg) {
        case Agg::None: return "none";
        case Agg::Max: return "max";
        case Agg::Min: return "min";
        case Agg::Count: return "count";
        case Agg::Sum: return "sum";
        case Agg::Avg: return "avg";
    }
    return "?";
}

}  // namespace

DataTable ingest_table(const json& raw, IngestReport* report) {
    if (!raw.is_object()) throw IngestError("table record is not an object");
    if (!raw.contains("header") || !raw["header"].is_array()) throw IngestError("table record has no header");
    if (!raw.contains("rows") || !raw["rows"].is_array()) throw IngestError("table record has no rows");
    const auto& header = raw["header"];
    const std::size_t arity = header.size();
    if (arity == 0) throw IngestError("table record has an empty header");
    std::vector<std::string> types(arity, "text");
    if (raw.contains("types")) {
        if (!raw["types"].is_array() || raw["types"].size() != arity) {
            throw IngestError("types length does not match header");
        }
        for (std::size_t c = 0; c < arity; ++c) types[c] = text::lower(raw["types"][c].get<std::string>());
    }

    DataTable t;
    t.schema.table_id = raw.value("id", std::string{});
    std::set<std::string> used;
    for (std::size_t c = 0; c < arity; ++c) {
        ColumnSpec spec;
        spec.name = unique_header(header[c].is_string() ? header[c].get<std::string>() : header[c].dump(), c, used);
        spec.dtype = types[c] == "real" ? Dtype::Float : Dtype::String;
        t.schema.columns.push_back(std::move(spec));
    }

    std::vector<std::vector<std::string>> texts;
    texts.reserve(raw["rows"].size());
    for (std::size_t r = 0; r < raw["rows"].size(); ++r) {
        const auto& row = raw["rows"][r];
        if (!row.is_array() || row.size() != arity) {
            throw IngestError("row " + std::to_string(r) + ": arity " + std::to_string(row.is_array() ? row.size() : 0) +
                              " != " + std::to_string(arity));
        }
        std::vector<std::string> cells;
        cells.reserve(arity);
        for (const auto& v : row) cells.push_back(raw_cell_text(v));
        texts.push_back(std::move(cells));
    }

    // A 'real' column with any unparseable cell is kept as text as a whole.
    for (std::size_t c = 0; c < arity; ++c) {
        if (t.schema.columns[c].dtype != Dtype::Float) continue;
        for (const auto& row : texts) {
            try {
                (void)coerce_cell(row[c], Dtype::Float);
            } catch (const CoercionError&) {
                t.schema.columns[c].dtype = Dtype::String;
                if (report) report->demoted_columns.push_back(t.schema.columns[c].name);
                break;
            }
        }
    }

    t.rows.reserve(texts.size());
    for (const auto& row : texts) {
        Row out;
        out.reserve(arity);
        for (std::size_t c = 0; c < arity; ++c) {
            const auto dtype = t.schema.columns[c].dtype;
            Cell cell = coerce_cell(row[c], dtype);
            if (auto* s = std::get_if<std::string>(&cell)) *s = text::lower(*s);
            out.push_back(std::move(cell));
        }
        t.rows.push_back(std::move(out));
    }
    return t;
}

std::string lower_question(std::string_view text) { return text::lower(text); }

CanonResult eval_logical_form(const LogicalForm& lf, const DataTable& table, EvalInfo* info) {
    const auto& cols = table.schema.columns;
    if (const auto problems = validate_logical_form(lf, cols.size()); !problems.empty()) {
        throw OracleError("invalid logical form: " + problems.front());
    }

    std::vector<Scalar> projected;
    for (const auto& row : table.rows) {
        bool keep = true;
        for (const auto& cond : lf.conds) {
            if (!condition_holds(cond, row[cond.column], cols[cond.column].dtype, info)) {
                keep = false;
                break;
            }
        }
        if (keep) projected.push_back(cell_scalar(row[lf.sel]));
    }

    switch (lf.agg) {
        case Agg::None: return ValueList{std::move(projected)};
        case Agg::Count: return Scalar::number(static_cast<double>(projected.size()));
        default: break;
    }

    std::vector<double> numbers;
    std::vector<std::string> strings;
    for (const auto& s : projected) {
        if (s.is_number()) {
            numbers.push_back(s.as_number());
        } else if (s.is_string()) {
            if (auto n = text::parse_grouped_number(text::trim(s.as_string()))) {
                numbers.push_back(*n);
            } else {
                strings.push_back(s.as_string());
            }
        }
    }
    if (numbers.empty() && strings.empty()) return Scalar::null();

    if (lf.agg == Agg::Max || lf.agg == Agg::Min) {
        const bool is_max = lf.agg == Agg::Max;
        if (!numbers.empty()) {
            return Scalar::number(is_max ? *std::max_element(numbers.begin(), numbers.end())
                                         : *std::min_element(numbers.begin(), numbers.end()));
        }
        return Scalar::string(is_max ? *std::max_element(strings.begin(), strings.end())
                                     : *std::min_element(strings.begin(), strings.end()));
    }

    if (numbers.empty()) {
        throw OracleError(std::string(agg_name(lf.agg)) + " over column '" + cols[lf.sel].name +
                          "' with no numeric values");
    }
    double sum = 0;
    for (double v : numbers) sum += v;
    if (lf.agg == Agg::Sum) return Scalar::number(sum);
    return Scalar::number(sum / static_cast<double>(numbers.size()));
}

QType classify_qtype(const LogicalForm& lf) { return lf.agg == Agg::None ? QType::Retrieval : QType::Aggregation; }

json BuildManifest::to_json() const {
    json skipped_json = json::array();
    for (const auto& s : skipped) skipped_json.push_back(json{{"index", s.index}, {"qid", s.qid}, {"reason", s.reason}});
    json demoted = json::array();
    for (const auto& [table, column] : demoted_columns) demoted.push_back(json{{"table_id", table}, {"column", column}});
    return json{{"questions_read", questions_read},
                {"selected", selected},
                {"emitted", emitted},
                {"skipped_count", skipped.size()},
                {"skipped", skipped_json},
                {"lexicographic_fallbacks", lexicographic_fallbacks},
                {"demoted_columns", demoted},
                {"excluded", excluded}};
}

BundleMeta default_meta() {
    BundleMeta meta;
    meta.name = "wikisql";
    meta.supplementary.mitigation_flags = {MitigationFlag::LowercaseDirective, MitigationFlag::NoImportDirective};
    meta.judge = json{{"lowercase_compare", true}};
    return meta;
}

BuildResult build_bundle(const std::vector<json>& raw_tables, const std::vector<json>& raw_questions,
                         const BuildOptions& options) {
    BuildResult out;
    out.bundle.meta = default_meta();
    auto& manifest = out.manifest;
    manifest.questions_read = raw_questions.size();

    std::unordered_map<std::string, const json*> tables_by_id;
    for (const auto& t : raw_tables) {
        if (t.contains("id") && t["id"].is_string()) tables_by_id.emplace(t["id"].get<std::string>(), &t);
    }

    const std::set<std::string> exclude(options.exclude.begin(), options.exclude.end());
    std::vector<std::size_t> candidates;
    for (std::size_t i = 0; i < raw_questions.size(); ++i) {
        const auto qid = options.qid_prefix + "-" + std::to_string(i);
        if (exclude.count(qid)) {
            manifest.excluded.push_back(qid);
            continue;
        }
        candidates.push_back(i);
    }

    if (options.limit && *options.limit < candidates.size()) {
        // Partial Fisher-Yates; the raw engine output keeps this identical
        // across standard library implementations.
        std::mt19937_64 rng(options.seed);
        for (std::size_t i = 0; i < *options.limit; ++i) {
            const auto span = candidates.size() - i;
            const auto j = i + static_cast<std::size_t>(rng() % span);
            std::swap(candidates[i], candidates[j]);
        }
        candidates.resize(*options.limit);
        std::sort(candidates.begin(), candidates.end());
    }
    manifest.selected = candidates.size();

    std::unordered_map<std::string, std::size_t> ingested;  // table id -> bundle index
    std::set<std::string> failed_tables;
    for (const auto i : candidates) {
        const auto& q = raw_questions[i];
        const auto qid = options.qid_prefix + "-" + std::to_string(i);
        const auto skip = [&](std::string reason) { manifest.skipped.push_back({i, qid, std::move(reason)}); };

        const auto table_id = q.value("table_id", std::string{});
        const auto raw_table = tables_by_id.find(table_id);
        if (raw_table == tables_by_id.end()) {
            skip("missing table '" + table_id + "'");
            continue;
        }
        if (failed_tables.count(table_id)) {
            skip("table '" + table_id + "' failed to ingest");
            continue;
        }
        auto slot = ingested.find(table_id);
        if (slot == ingested.end()) {
            try {
                IngestReport report;
                auto table = ingest_table(*raw_table->second, &report);
                table.schema.table_id = table_id;
                for (const auto& c : report.demoted_columns) manifest.demoted_columns.emplace_back(table_id, c);
                out.bundle.tables.push_back(std::move(table));
                slot = ingested.emplace(table_id, out.bundle.tables.size() - 1).first;
            } catch (const IngestError& e) {
                failed_tables.insert(table_id);
                skip(std::string("ingest: ") + e.what());
                continue;
            }
        }
        const auto& table = out.bundle.tables[slot->second];

        try {
            if (!q.contains("sql")) throw OracleError("question has no logical form");
            const auto lf = logical_form_from_json(q["sql"]);
            EvalInfo info;
            auto answer = eval_logical_form(lf, table, &info);
            if (info.lexicographic_fallback) manifest.lexicographic_fallbacks.push_back(qid);

            TaskInstance task;
            task.question.qid = qid;
            task.question.text = lower_question(q.value("question", std::string{}));
            task.question.qtype = classify_qtype(lf);
            task.table_id = table_id;
            task.ground_truth = KnownAnswer{std::move(answer)};
            out.bundle.tasks.push_back(std::move(task));
        } catch (const OracleError& e) {
            skip(std::string("oracle: ") + e.what());
        }
    }

    // Drop tables no emitted task refers to.
    std::set<std::string> referenced;
    for (const auto& t : out.bundle.tasks) referenced.insert(t.table_id);
    std::erase_if(out.bundle.tables, [&](const DataTable& t) { return !referenced.count(t.schema.table_id); });
    manifest.emitted = out.bundle.tasks.size();
    return out;
}

BuildResult build_bundle_from_release(const std::string& dir, const std::string& split, const BuildOptions& options) {
    namespace fs = std::filesystem;
    const auto tables = read_jsonl((fs::path(dir) / (split + ".tables.jsonl")).string());
    const auto questions = read_jsonl((fs::path(dir) / (split + ".jsonl")).string());
    return build_bundle(tables, questions, options);
}

}  // namespace dfqa::wikisql
