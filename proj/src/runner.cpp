#include "dfqa/runner.hpp"

#include "dfqa/text.hpp"

#include <atomic>
#include <chrono>
#include <ctime>
#include <filesystem>
#include <thread>

namespace dfqa::runner {

namespace fs = std::filesystem;

namespace {

constexpr std::array<Verdict, 7> kAllVerdicts{
    Verdict::CorrectStrict, Verdict::CorrectRelaxed, Verdict::Incorrect, Verdict::NeedsReview,
    Verdict::ExecErrorVerdict, Verdict::RejectedUnsafe, Verdict::Timeout,
};

bool counts_as_correct(Verdict v, bool count_needs_review) {
    return is_correct(v) || (count_needs_review && v == Verdict::NeedsReview);
}

/// Runs fn(i) for i in [0, n) on up to `width` threads.
template <class Fn>
void parallel_for(std::size_t n, std::size_t width, Fn fn) {
    std::atomic<std::size_t> next{0};
    std::exception_ptr failure;
    std::mutex failure_mu;
    const auto work = [&] {
        for (std::size_t i; (i = next.fetch_add(1)) < n;) {
            try {
                fn(i);
            } catch (...) {
                std::lock_guard lock(failure_mu);
                if (!failure) failure = std::current_exception();
                next = n;
            }
        }
    };
    const auto threads_needed = std::min(std::max<std::size_t>(width, 1), n);
    std::vector<std::thread> threads;
    for (std::size_t t = 1; t < threads_needed; ++t) threads.emplace_back(work);
    work();
    for (auto& t : threads) t.join();
    if (failure) std::rethrow_exception(failure);
}

std::string csv_field(std::string_view s) {
    if (s.find_first_of(",\"\r\n") == std::string_view::npos) return std::string(s);
    std::string out = "\"";
    for (char c : s) {
        if (c == '"') out.push_back('"');
        out.push_back(c);
    }
    out.push_back('"');
    return out;
}

std::string csv_row(const std::vector<std::string>& fields) {
    std::vector<std::string> quoted;
    quoted.reserve(fields.size());
    for (const auto& f : fields) quoted.push_back(csv_field(f));
    return text::join(quoted, ",") + "\n";
}

std::string scalar_text(const Scalar& s) {
    switch (s.kind()) {
        case ScalarKind::Null: return "NaN";
        case ScalarKind::Bool: return std::get<bool>(s.value) ? "True" : "False";
        case ScalarKind::Number: return text::format_number(s.as_number());
        case ScalarKind::String: return s.as_string();
        case ScalarKind::Datetime: return std::get<DateTime>(s.value).iso;
    }
    return "";
}

std::string label_or(const std::optional<std::string>& s) { return s ? *s : "unspecified"; }

}  // namespace

bool record_consistent(const EvalRecord& r) { return !(r.error_classes && is_correct(r.verdict)); }

json record_to_json(const EvalRecord& r) {
    json classes = nullptr;
    if (r.error_classes) {
        classes = json::array();
        for (auto c : *r.error_classes) classes.push_back(prompt::to_string(c));
    }
    json j{{"qid", r.qid},
           {"model", r.model},
           {"table_id", r.table_id},
           {"question", r.question},
           {"role", r.role ? json(to_string(*r.role)) : json(nullptr)},
           {"qtype", r.qtype ? json(to_string(*r.qtype)) : json(nullptr)},
           {"prompt_digest", r.prompt_digest},
           {"completion", r.completion},
           {"query", query_to_json(r.query)},
           {"exec_result", result_to_json(r.exec_result)},
           {"expected", r.expected ? result_to_json(*r.expected) : json(nullptr)},
           {"verdict", to_string(r.verdict)},
           {"error_classes", classes},
           {"latency_ms", r.latency_ms},
           {"note", r.note}};
    return j;
}

EvalRecord record_from_json(const json& j) {
    EvalRecord r;
    r.qid = j.at("qid").get<std::string>();
    r.model = j.value("model", std::string{});
    r.table_id = j.value("table_id", std::string{});
    r.question = j.value("question", std::string{});
    if (j.contains("role") && !j["role"].is_null()) r.role = parse_role(j["role"].get<std::string>());
    if (j.contains("qtype") && !j["qtype"].is_null()) r.qtype = parse_qtype(j["qtype"].get<std::string>());
    r.prompt_digest = j.value("prompt_digest", std::string{});
    r.completion = j.value("completion", std::string{});
    if (j.contains("query")) r.query = query_from_json(j.at("query"));
    r.exec_result = result_from_json(j.at("exec_result"));
    if (j.contains("expected") && !j["expected"].is_null()) r.expected = result_from_json(j["expected"]);
    r.verdict = parse_verdict(j.at("verdict").get<std::string>());
    if (j.contains("error_classes") && !j["error_classes"].is_null()) {
        std::set<prompt::ErrorClass> classes;
        for (const auto& c : j["error_classes"]) classes.insert(prompt::parse_error_class_id(c.get<std::string>()));
        r.error_classes = std::move(classes);
    }
    r.latency_ms = j.value("latency_ms", std::int64_t{0});
    r.note = j.value("note", std::string{});
    return r;
}

std::vector<EvalRecord> read_records(const std::string& path) {
    std::vector<EvalRecord> out;
    for (const auto& j : read_jsonl(path)) out.push_back(record_from_json(j));
    return out;
}

double pass_at_1(const std::vector<EvalRecord>& records, bool count_needs_review) {
    if (records.empty()) throw EmptyRun();
    std::size_t correct = 0;
    for (const auto& r : records) correct += counts_as_correct(r.verdict, count_needs_review) ? 1 : 0;
    return static_cast<double>(correct) / static_cast<double>(records.size());
}

Report build_report(const std::vector<EvalRecord>& records, bool count_needs_review, json metadata) {
    Report rep;
    rep.pass_at_1 = pass_at_1(records, count_needs_review);
    rep.total = records.size();
    for (auto v : kAllVerdicts) rep.verdict_counts[v] = 0;
    for (const auto& r : records) {
        ++rep.verdict_counts[r.verdict];
        const bool ok = counts_as_correct(r.verdict, count_needs_review);
        auto& role = rep.by_role[label_or(r.role ? std::optional<std::string>(to_string(*r.role)) : std::nullopt)];
        ++role.total;
        role.correct += ok;
        auto& qt = rep.by_qtype[label_or(r.qtype ? std::optional<std::string>(to_string(*r.qtype)) : std::nullopt)];
        ++qt.total;
        qt.correct += ok;
        auto& row = rep.error_matrix[r.model];
        for (auto c : prompt::kAllErrorClasses) row.try_emplace(c, 0);
        if (r.error_classes) {
            for (auto c : *r.error_classes) ++row[c];
        } else if (!is_correct(r.verdict)) {
            ++rep.unclassified;
        }
    }
    metadata["count_needs_review"] = count_needs_review;
    rep.metadata = std::move(metadata);
    return rep;
}

json report_to_json(const Report& report) {
    json verdicts = json::object();
    for (const auto& [v, n] : report.verdict_counts) verdicts[std::string(to_string(v))] = n;
    const auto breakdown = [](const std::map<std::string, Breakdown>& m) {
        json out = json::object();
        for (const auto& [k, b] : m) out[k] = {{"total", b.total}, {"correct", b.correct}, {"pass_at_1", b.pass_at_1()}};
        return out;
    };
    json matrix = json::object();
    for (const auto& [model, row] : report.error_matrix) {
        json r = json::object();
        for (const auto& [c, n] : row) r[std::string(prompt::to_string(c))] = n;
        matrix[model] = r;
    }
    return {{"pass_at_1", report.pass_at_1},
            {"total", report.total},
            {"verdict_counts", verdicts},
            {"breakdowns", {{"role", breakdown(report.by_role)}, {"qtype", breakdown(report.by_qtype)}}},
            {"error_matrix", matrix},
            {"unclassified", report.unclassified},
            {"metadata", report.metadata}};
}

std::string config_digest(const json& config) { return llm::sha256_hex(config.dump()); }

std::string utc_timestamp() {
    const auto now = std::chrono::system_clock::to_time_t(std::chrono::system_clock::now());
    std::tm tm{};
    gmtime_r(&now, &tm);
    char buf[32];
    std::strftime(buf, sizeof buf, "%Y-%m-%dT%H:%M:%SZ", &tm);
    return buf;
}

EvalOutput run_eval(const TaskBundle& bundle, const prompt::TemplateSet& templates, llm::Gateway& gateway,
                    sandbox::Executor& executor, const EvalConfig& cfg) {
    if (const auto problems = bundle.validate(); !problems.empty()) {
        throw Error("invalid bundle: " + problems.front());
    }
    llm::check_params(cfg.params);
    protocol::check_limits(cfg.limits);
    const auto started = utc_timestamp();
    const auto& tasks = bundle.tasks;

    std::vector<llm::CompletionRequest> requests;
    std::vector<EvalRecord> records(tasks.size());
    for (std::size_t i = 0; i < tasks.size(); ++i) {
        const auto& task = tasks[i];
        const auto& table = bundle.table(task.table_id);
        auto messages = prompt::build_qa_prompt(templates, bundle.meta.supplementary, table.schema, task.question).messages;
        auto& r = records[i];
        r.qid = task.question.qid;
        r.model = cfg.params.model_name;
        r.table_id = task.table_id;
        r.question = task.question.text;
        r.role = task.question.role;
        r.qtype = task.question.qtype;
        r.prompt_digest = llm::cache_key(messages, cfg.params);
        requests.push_back({std::move(messages), cfg.params});
    }

    const auto completions = gateway.complete_batch(requests, cfg.llm_in_flight);

    parallel_for(tasks.size(), cfg.exec_in_flight, [&](std::size_t i) {
        const auto& task = tasks[i];
        const auto& table = bundle.table(task.table_id);
        auto& r = records[i];
        const auto t0 = std::chrono::steady_clock::now();

        if (const auto* known = std::get_if<KnownAnswer>(&task.ground_truth)) {
            r.expected = known->answer;
        } else {
            const auto& ref = std::get<ReferenceQuery>(task.ground_truth);
            auto truth = executor.execute({r.qid + "#reference", &table, ref.query.source, cfg.limits}).result;
            if (is_error(truth)) {
                const auto& e = std::get<ExecError>(truth);
                r.note = "reference query failed: " + std::string(to_string(e.kind)) + ": " + e.message;
            } else {
                r.expected = std::move(truth);
            }
        }

        const auto& slot = completions[i];
        if (!slot.ok()) {
            r.exec_result = ExecError{ExecErrorKind::RuntimeError, "completion failed: " + slot.error_type + ": " + slot.error};
            r.verdict = Verdict::ExecErrorVerdict;
            return;
        }
        r.completion = *slot.text;
        try {
            r.query = prompt::extract_code(r.completion);
        } catch (const prompt::EmptyCompletion&) {
            r.exec_result = ExecError{ExecErrorKind::NoResult, "completion contains no code"};
            r.verdict = Verdict::ExecErrorVerdict;
            return;
        }
        const auto response = executor.execute({r.qid, &table, r.query.source, cfg.limits});
        r.exec_result = response.result;
        r.latency_ms = std::chrono::duration_cast<std::chrono::milliseconds>(std::chrono::steady_clock::now() - t0).count();

        if (const auto* e = std::get_if<ExecError>(&r.exec_result)) {
            r.verdict = judge::error_verdict(e->kind);
        } else if (!r.expected) {
            // Nothing to compare against; a human has to decide.
            r.verdict = Verdict::NeedsReview;
        } else {
            r.verdict = judge::judge(r.exec_result, *r.expected, cfg.judge);
        }
    });

    const json config{{"model", cfg.params.model_name},
                      {"temperature", cfg.params.temperature},
                      {"max_tokens", cfg.params.max_tokens},
                      {"judge", judge::config_to_json(cfg.judge)},
                      {"limits", protocol::limits_to_json(cfg.limits)},
                      {"template_version", templates.version},
                      {"dataset", cfg.dataset},
                      {"supplementary", supplementary_to_json(bundle.meta.supplementary)}};
    json meta{{"model", cfg.params.model_name},
              {"dataset", cfg.dataset.empty() ? bundle.meta.name : cfg.dataset},
              {"config_digest", config_digest(config)},
              {"config", config},
              {"cache_mode", to_string(gateway.mode())},
              {"template_version", templates.version},
              {"protocol_version", protocol::kProtocolVersion},
              {"started_at", started},
              {"finished_at", utc_timestamp()}};
    EvalOutput out;
    out.report = build_report(records, cfg.judge.count_needs_review, std::move(meta));
    out.records = std::move(records);
    return out;
}

std::string render_result_text(const CanonResult& r, std::size_t max_chars) {
    std::string out;
    struct Visitor {
        std::string& out;
        void operator()(const Scalar& s) const { out = scalar_text(s); }
        void operator()(const ValueList& l) const {
            std::vector<std::string> parts;
            for (const auto& v : l.values) parts.push_back(scalar_text(v));
            out = "[" + text::join(parts, ", ") + "]";
        }
        void operator()(const Series& s) const {
            std::vector<std::string> lines;
            for (std::size_t i = 0; i < s.values.size(); ++i) {
                lines.push_back((i < s.index.size() ? scalar_text(s.index[i]) : std::to_string(i)) + "    " +
                                scalar_text(s.values[i]));
            }
            if (s.name) lines.push_back("Name: " + *s.name);
            out = text::join(lines, "\n");
        }
        void operator()(const TableResult& t) const {
            std::vector<std::string> lines{text::join(t.columns, " | ")};
            for (const auto& row : t.rows) {
                std::vector<std::string> cells;
                for (const auto& c : row) cells.push_back(scalar_text(c));
                lines.push_back(text::join(cells, " | "));
            }
            out = text::join(lines, "\n");
        }
        void operator()(const ExecError& e) const {
            out = e.kind == ExecErrorKind::Timeout ? std::string("timeout")
                                                   : std::string(to_string(e.kind)) + ": " + e.message;
        }
    };
    std::visit(Visitor{out}, r);
    if (out.size() > max_chars) out = out.substr(0, max_chars) + "\n...";
    return out;
}

ClassifyOutcome classify_errors(std::vector<EvalRecord>& records, llm::Gateway& gateway, const llm::GenParams& params,
                                const prompt::TemplateSet& templates,
                                const std::function<const DataTable*(const std::string&)>& table_lookup,
                                std::size_t max_in_flight) {
    std::vector<std::size_t> targets;
    std::vector<llm::CompletionRequest> requests;
    for (std::size_t i = 0; i < records.size(); ++i) {
        auto& r = records[i];
        if (is_correct(r.verdict)) {
            r.error_classes.reset();
            continue;
        }
        prompt::ClassificationRecord cr;
        cr.question = r.question;
        if (const auto* table = table_lookup(r.table_id)) {
            cr.schema = table->schema;
            cr.sample_rows.assign(table->rows.begin(), table->rows.begin() + std::min<std::size_t>(3, table->rows.size()));
        }
        cr.query = r.query.source.empty() ? r.completion : r.query.source;
        cr.exec_output = render_result_text(r.exec_result);
        cr.expected = r.expected ? render_result_text(*r.expected) : std::string("(unavailable)");
        targets.push_back(i);
        requests.push_back({prompt::build_error_classification_prompt(templates, cr).messages, params});
    }
    const auto slots = gateway.complete_batch(requests, max_in_flight);
    ClassifyOutcome out;
    for (std::size_t k = 0; k < targets.size(); ++k) {
        if (!slots[k].ok()) {
            ++out.failures;
            continue;
        }
        records[targets[k]].error_classes = prompt::parse_error_classes(*slots[k].text);
        ++out.classified;
    }
    return out;
}

void rejudge(std::vector<EvalRecord>& records, const judge::JudgeConfig& cfg, const std::vector<json>& reviews) {
    std::map<std::string, bool> decisions;
    for (const auto& rv : reviews) {
        if (!rv.contains("qid") || !rv.contains("accept") || !rv["accept"].is_boolean()) continue;
        decisions[rv["qid"].get<std::string>() + "\x1f" + rv.value("model", std::string{})] = rv["accept"].get<bool>();
    }
    for (auto& r : records) {
        if (const auto* e = std::get_if<ExecError>(&r.exec_result)) {
            r.verdict = judge::error_verdict(e->kind);
        } else if (r.expected) {
            r.verdict = judge::judge(r.exec_result, *r.expected, cfg);
        }
        if (r.verdict == Verdict::NeedsReview) {
            auto it = decisions.find(r.qid + "\x1f" + r.model);
            if (it == decisions.end()) it = decisions.find(r.qid + "\x1f");
            if (it != decisions.end()) r.verdict = it->second ? Verdict::CorrectRelaxed : Verdict::Incorrect;
        }
        if (is_correct(r.verdict)) r.error_classes.reset();
    }
}

EmitOptions parse_formats(std::string_view formats) {
    EmitOptions o{false, false};
    for (const auto& f : text::split(formats, ',')) {
        const auto t = text::trim(f);
        if (t == "json") {
            o.write_json = true;
        } else if (t == "csv") {
            o.write_csv = true;
        } else if (!t.empty()) {
            throw Error("unknown report format '" + std::string(t) + "'");
        }
    }
    return o;
}

std::string records_csv(const std::vector<EvalRecord>& records) {
    std::string out = csv_row({"qid", "model", "table_id", "role", "qtype", "verdict", "prompt_digest", "result_kind",
                               "exec_result", "expected", "query", "lint", "error_classes", "note"});
    for (const auto& r : records) {
        std::vector<std::string> lint;
        for (auto l : r.query.lint) lint.emplace_back(to_string(l));
        std::vector<std::string> classes;
        if (r.error_classes) {
            for (auto c : *r.error_classes) classes.emplace_back(prompt::to_string(c));
        }
        out += csv_row({r.qid, r.model, r.table_id, r.role ? std::string(to_string(*r.role)) : "",
                        r.qtype ? std::string(to_string(*r.qtype)) : "", std::string(to_string(r.verdict)),
                        r.prompt_digest, std::string(result_kind_name(r.exec_result)),
                        dump_line(result_to_json(r.exec_result)), r.expected ? dump_line(result_to_json(*r.expected)) : "",
                        r.query.source, text::join(lint, "|"), text::join(classes, "|"), r.note});
    }
    return out;
}

std::string error_matrix_csv(const ErrorMatrix& matrix) {
    std::vector<std::string> header{"model"};
    for (auto c : prompt::kAllErrorClasses) header.emplace_back(prompt::to_string(c));
    std::string out = csv_row(header);
    for (const auto& [model, row] : matrix) {
        std::vector<std::string> fields{model};
        for (auto c : prompt::kAllErrorClasses) {
            const auto it = row.find(c);
            fields.push_back(std::to_string(it == row.end() ? 0 : it->second));
        }
        out += csv_row(fields);
    }
    return out;
}

std::vector<json> review_lines(const std::vector<EvalRecord>& records) {
    std::vector<json> out;
    for (const auto& r : records) {
        if (r.verdict != Verdict::NeedsReview) continue;
        out.push_back({{"qid", r.qid},
                       {"model", r.model},
                       {"question", r.question},
                       {"query", r.query.source},
                       {"exec_result", result_to_json(r.exec_result)},
                       {"expected", r.expected ? result_to_json(*r.expected) : json(nullptr)},
                       {"accept", nullptr}});
    }
    return out;
}

void emit_report(const Report& report, const std::vector<EvalRecord>& records, const std::string& out_dir,
                 const EmitOptions& formats) {
    fs::create_directories(out_dir);
    const auto path = [&](const char* name) { return (fs::path(out_dir) / name).string(); };
    if (formats.write_json) {
        text::write_file_atomic(path("summary.json"), report_to_json(report).dump(2) + "\n");
        std::vector<json> lines;
        for (const auto& r : records) lines.push_back(record_to_json(r));
        write_jsonl(path("records.jsonl"), lines);
    }
    if (formats.write_csv) {
        text::write_file_atomic(path("records.csv"), records_csv(records));
        text::write_file_atomic(path("error_matrix.csv"), error_matrix_csv(report.error_matrix));
    }
    write_jsonl(path("review.jsonl"), review_lines(records));
}

}  // namespace dfqa::runner
