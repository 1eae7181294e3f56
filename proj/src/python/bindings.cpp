// Python bindings. Structured values cross the boundary as JSON text; the
// dfqa package wraps them with json.loads/json.dumps.

#include "dfqa/bundle.hpp"
#include "dfqa/equivalence.hpp"
#include "dfqa/gateway.hpp"
#include "dfqa/json_io.hpp"
#include "dfqa/prompt.hpp"
#include "dfqa/runner.hpp"
#include "dfqa/sandbox.hpp"
#include "dfqa/wikisql.hpp"

#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

namespace py = pybind11;
using namespace dfqa;

namespace {

judge::JudgeConfig judge_config(const std::string& config) {
    return judge::config_from_json(config.empty() ? json::object() : json::parse(config));
}

std::vector<llm::Message> messages_from_json(const std::string& text) {
    std::vector<llm::Message> out;
    for (const auto& m : json::parse(text)) {
        out.push_back({prompt::parse_message_role(m.at("role").get<std::string>()), m.at("content").get<std::string>()});
    }
    return out;
}

json messages_to_json(const std::vector<llm::Message>& messages) {
    json out = json::array();
    for (const auto& m : messages) out.push_back({{"role", prompt::to_string(m.role)}, {"content", m.content}});
    return out;
}

prompt::TemplateSet templates(const std::string& dir) {
    return prompt::TemplateSet::load(dir.empty() ? prompt::default_template_dir() : dir);
}

std::string judge_results(const std::string& predicted, const std::string& truth, const std::string& config) {
    return std::string(to_string(
        judge::judge(result_from_json(json::parse(predicted)), result_from_json(json::parse(truth)), judge_config(config))));
}

bool strict_equal(const std::string& a, const std::string& b, const std::string& config) {
    return judge::strict_equal(result_from_json(json::parse(a)), result_from_json(json::parse(b)), judge_config(config));
}

std::string normalize(const std::string& r, const std::string& config) {
    return result_to_json(judge::normalize(result_from_json(json::parse(r)), judge_config(config))).dump();
}

std::string cache_key(const std::string& messages, const std::string& model, double temperature, std::size_t max_tokens) {
    llm::GenParams p;
    p.model_name = model;
    p.temperature = temperature;
    p.max_tokens = max_tokens;
    return llm::cache_key(messages_from_json(messages), p);
}

std::string build_qa_prompt(const std::string& table, const std::string& question, const std::string& supplementary,
                            const std::string& template_dir) {
    auto t = json::parse(table);
    if (!t.contains("rows")) t["rows"] = json::array();
    const auto schema = table_from_json(t).schema;
    const auto sup = supplementary.empty() ? SupplementarySpec{} : supplementary_from_json(json::parse(supplementary));
    const auto bundle = prompt::build_qa_prompt(templates(template_dir), sup, schema, {"q", question, {}, {}});
    return json{{"messages", messages_to_json(bundle.messages)}, {"token_estimate", bundle.token_estimate}}.dump();
}

std::string extract_code(const std::string& completion) { return query_to_json(prompt::extract_code(completion)).dump(); }

std::string eval_logical_form(const std::string& raw_table, const std::string& sql) {
    const auto table = wikisql::ingest_table(json::parse(raw_table));
    return result_to_json(wikisql::eval_logical_form(wikisql::logical_form_from_json(json::parse(sql)), table)).dump();
}

std::string classify_qtype(const std::string& sql) {
    return std::string(to_string(wikisql::classify_qtype(wikisql::logical_form_from_json(json::parse(sql)))));
}

std::vector<std::string> parse_error_classes(const std::string& completion) {
    std::vector<std::string> out;
    for (auto c : prompt::parse_error_classes(completion)) out.emplace_back(prompt::to_string(c));
    return out;
}

std::vector<std::string> validate_bundle(const std::string& dir) { return load_bundle(dir).validate(); }

std::string report_from_records(const std::vector<std::string>& paths, bool count_needs_review) {
    std::vector<runner::EvalRecord> records;
    for (const auto& p : paths) {
        auto part = runner::read_records(p);
        records.insert(records.end(), part.begin(), part.end());
    }
    return runner::report_to_json(runner::build_report(records, count_needs_review, json::object())).dump();
}

std::string eval_replay(const std::string& bundle_dir, const std::string& cache_dir, const std::string& model,
                        std::size_t pool_size, const std::string& out_dir, const std::string& judge_overrides) {
    const auto bundle = load_bundle(bundle_dir);
    runner::EvalConfig cfg;
    cfg.params.model_name = model;
    cfg.exec_in_flight = pool_size;
    cfg.judge = judge::config_from_json(bundle.meta.judge);
    if (!judge_overrides.empty()) cfg.judge = judge::config_from_json(json::parse(judge_overrides), cfg.judge);
    runner::EvalOutput out;
    {
        py::gil_scoped_release release;
        sandbox::PoolOptions po;
        po.size = pool_size;
        sandbox::Pool pool(po);
        llm::Gateway gateway(nullptr, cache_dir, llm::CacheMode::ReplayOnly);
        out = runner::run_eval(bundle, templates(""), gateway, pool, cfg);
        if (!out_dir.empty()) runner::emit_report(out.report, out.records, out_dir, {});
    }
    return runner::report_to_json(out.report).dump();
}

}  // namespace

PYBIND11_MODULE(_core, m) {
    m.doc() = "DataFrame QA evaluation core";
    m.attr("PROTOCOL_VERSION") = protocol::kProtocolVersion;

    py::register_exception<Error>(m, "DfqaError");

    m.def("judge", &judge_results, py::arg("predicted"), py::arg("truth"), py::arg("config") = "",
          "Verdict name for a predicted result against the truth (JSON results).");
    m.def("strict_equal", &strict_equal, py::arg("a"), py::arg("b"), py::arg("config") = "");
    m.def("normalize", &normalize, py::arg("result"), py::arg("config") = "");
    m.def("cache_key", &cache_key, py::arg("messages"), py::arg("model"), py::arg("temperature") = 0.0,
          py::arg("max_tokens") = 512);
    m.def("build_qa_prompt", &build_qa_prompt, py::arg("table"), py::arg("question"), py::arg("supplementary") = "",
          py::arg("template_dir") = "");
    m.def("extract_code", &extract_code, py::arg("completion"));
    m.def("eval_logical_form", &eval_logical_form, py::arg("raw_table"), py::arg("sql"));
    m.def("classify_qtype", &classify_qtype, py::arg("sql"));
    m.def("parse_error_classes", &parse_error_classes, py::arg("completion"));
    m.def("validate_bundle", &validate_bundle, py::arg("bundle_dir"));
    m.def("report_from_records", &report_from_records, py::arg("paths"), py::arg("count_needs_review") = false);
    m.def("eval_replay", &eval_replay, py::arg("bundle_dir"), py::arg("cache_dir"), py::arg("model"),
          py::arg("pool_size") = 2, py::arg("out_dir") = "", py::arg("judge") = "",
          "Runs a bundle from cached completions only and returns the summary JSON.");
}
