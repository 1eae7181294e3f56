#include "doctest.h"

#include "dfqa/runner.hpp"
#include "dfqa/text.hpp"
#include "oracles.hpp"

#include <filesystem>
#include <random>

using namespace dfqa;
using namespace dfqa::runner;

namespace {

const prompt::TemplateSet& templates() {
    static const prompt::TemplateSet t = prompt::TemplateSet::load(prompt::default_template_dir());
    return t;
}

struct TempDir {
    std::filesystem::path path;
    explicit TempDir(const std::string& name) : path(std::filesystem::temp_directory_path() / name) {
        std::filesystem::remove_all(path);
    }
    ~TempDir() { std::filesystem::remove_all(path); }
};

EvalRecord rec(const std::string& qid, Verdict v, const std::string& model = "m") {
    EvalRecord r;
    r.qid = qid;
    r.model = model;
    r.table_id = "t";
    r.verdict = v;
    r.exec_result = Scalar::number(1);
    r.expected = Scalar::number(1);
    return r;
}

TaskBundle bundle() {
    TaskBundle b;
    b.meta.name = "mini";
    DataTable t;
    t.schema.table_id = "players";
    t.schema.columns = {{"Player", Dtype::String, {}, {}}, {"Nationality", Dtype::String, {}, {}}};
    t.rows = {{std::string("terrence ross"), std::string("united states")}, {std::string("jalen rose"), std::string("united states")}};
    b.tables.push_back(t);
    const auto add = [&](const std::string& qid, const std::string& text, std::variant<ReferenceQuery, KnownAnswer> gt) {
        TaskInstance task;
        task.question = {qid, text, Role::GeneralUser, QType::Retrieval};
        task.table_id = "players";
        task.ground_truth = std::move(gt);
        b.tasks.push_back(task);
    };
    add("q1", "what nationality is terrence ross?", KnownAnswer{Scalar::string("united states")});
    add("q2", "how many players are there?", ReferenceQuery{{"result = len(df)", {}}});
    add("q3", "which players are listed?", ReferenceQuery{{"result = df['Player']", {}}});
    return b;
}

std::string fence(const std::string& code) { return "```python\n" + code + "\n```"; }

}  // namespace

TEST_CASE("pass@1 counts strict and relaxed, optionally needs_review") {
    std::vector<EvalRecord> rs{rec("a", Verdict::CorrectStrict), rec("b", Verdict::CorrectRelaxed),
                               rec("c", Verdict::NeedsReview), rec("d", Verdict::Incorrect)};
    CHECK(pass_at_1(rs) == doctest::Approx(0.5));
    CHECK(pass_at_1(rs, true) == doctest::Approx(0.75));
    CHECK_THROWS_AS(pass_at_1({}), EmptyRun);
}

TEST_CASE("report partitions verdicts and moves by exactly 1/N per flip") {
    std::mt19937_64 rng(11);
    const Verdict all[] = {Verdict::CorrectStrict, Verdict::CorrectRelaxed, Verdict::Incorrect, Verdict::NeedsReview,
                           Verdict::ExecErrorVerdict, Verdict::RejectedUnsafe, Verdict::Timeout};
    for (int round = 0; round < 200; ++round) {
        std::vector<EvalRecord> rs;
        const std::size_t n = 1 + rng() % 40;
        for (std::size_t i = 0; i < n; ++i) rs.push_back(rec("q" + std::to_string(i), all[rng() % 7]));
        const auto rep = build_report(rs, false, json::object());
        std::size_t sum = 0;
        for (const auto& [v, k] : rep.verdict_counts) sum += k;
        CHECK(sum == n);
        CHECK(rep.verdict_counts.size() == 7);
        for (auto& r : rs) {
            if (r.verdict != Verdict::Incorrect) continue;
            const double before = pass_at_1(rs);
            r.verdict = Verdict::CorrectStrict;
            CHECK(pass_at_1(rs) - before == doctest::Approx(1.0 / static_cast<double>(n)).epsilon(1e-12));
            break;
        }
    }
}

TEST_CASE("report breakdowns and error matrix") {
    auto a = rec("a", Verdict::CorrectStrict, "gpt-4");
    a.role = Role::DataOwner;
    a.qtype = QType::Aggregation;
    auto b = rec("b", Verdict::Incorrect, "gpt-4");
    b.role = Role::DataOwner;
    b.error_classes = std::set<prompt::ErrorClass>{prompt::ErrorClass::StringError, prompt::ErrorClass::ConditionError};
    auto c = rec("c", Verdict::ExecErrorVerdict, "llama");
    const auto rep = build_report({a, b, c}, false, json::object());
    CHECK(rep.by_role.at("data_owner").total == 2);
    CHECK(rep.by_role.at("data_owner").correct == 1);
    CHECK(rep.by_qtype.at("aggregation").pass_at_1() == doctest::Approx(1.0));
    CHECK(rep.error_matrix.size() == 2);
    CHECK(rep.error_matrix.at("gpt-4").at(prompt::ErrorClass::StringError) == 1);
    CHECK(rep.unclassified == 1);
    const auto csv = error_matrix_csv(rep.error_matrix);
    CHECK(std::count(csv.begin(), csv.end(), '\n') == 3);
    CHECK(csv.rfind("model,", 0) == 0);
    const auto j = report_to_json(rep);
    CHECK(j["metadata"]["count_needs_review"] == false);
    CHECK(j["verdict_counts"]["exec_error"] == 1);
}

TEST_CASE("record consistency and JSON round-trip") {
    auto r = rec("a", Verdict::Incorrect);
    r.role = Role::DataScientist;
    r.qtype = QType::DataAnalysis;
    r.completion = fence("result = 1");
    r.query = {"result = 1", {}};
    r.error_classes = std::set<prompt::ErrorClass>{prompt::ErrorClass::AccessError};
    r.note = "x";
    CHECK(record_consistent(r));
    const auto back = record_from_json(record_to_json(r));
    CHECK(record_to_json(back) == record_to_json(r));
    r.verdict = Verdict::CorrectStrict;
    CHECK_FALSE(record_consistent(r));
}

TEST_CASE("rejudge applies review decisions and clears classes on correct records") {
    auto a = rec("a", Verdict::NeedsReview);
    a.exec_result = ValueList{{Scalar::number(1), Scalar::number(2)}};
    a.expected = ValueList{{Scalar::number(1), Scalar::number(3)}};
    auto b = a;
    b.qid = "b";
    auto c = a;
    c.qid = "c";
    c.error_classes = std::set<prompt::ErrorClass>{prompt::ErrorClass::Others};
    std::vector<EvalRecord> rs{a, b, c};
    REQUIRE(review_lines(rs).size() == 3);
    rejudge(rs, {}, {json{{"qid", "a"}, {"accept", true}}, json{{"qid", "b"}, {"accept", false}},
                     json{{"qid", "c"}, {"accept", nullptr}}});
    CHECK(rs[0].verdict == Verdict::CorrectRelaxed);
    CHECK(rs[1].verdict == Verdict::Incorrect);
    CHECK(rs[2].verdict == Verdict::NeedsReview);
    CHECK(review_lines(rs).size() == 1);
    for (const auto& r : rs) CHECK(record_consistent(r));
}

TEST_CASE("per-record CSV is deterministic and excludes latency") {
    auto a = rec("a", Verdict::Incorrect);
    a.query = {"result = df[df['x'] == \"a,b\"]", {}};
    a.latency_ms = 17;
    auto b = a;
    b.latency_ms = 99;
    CHECK(records_csv({a}) == records_csv({b}));
    CHECK(records_csv({a}).find("latency") == std::string::npos);
    CHECK(records_csv({a}).find("\"result = df[df['x'] == \"\"a,b\"\"]\"") != std::string::npos);
    CHECK(parse_formats("json,csv").write_csv);
    CHECK_FALSE(parse_formats("json").write_csv);
    CHECK_THROWS(parse_formats("xml"));
}

TEST_CASE("run_eval scores a perfect and a corrupted model") {
    const auto b = bundle();
    oracle::MapExecutor exec({{"result = len(df)", Scalar::number(2)},
                              {"result = df['Player']", Series{"Player", {Scalar::number(0), Scalar::number(1)},
                                                               {Scalar::string("terrence ross"), Scalar::string("jalen rose")}}},
                              {"result = df[df['Player'] == 'terrence ross']['Nationality'].iloc[0]",
                               Scalar::string("united states")},
                              {"result = 'wrong'", Scalar::string("wrong")}});
    EvalConfig cfg;
    cfg.params.model_name = "scripted";

    TempDir dir("dfqa-runner-cache");
    auto perfect = std::make_shared<oracle::LookupEndpoint>(std::map<std::string, std::string>{
        {"terrence ross", fence("result = df[df['Player'] == 'terrence ross']['Nationality'].iloc[0]")},
        {"how many players", fence("result = len(df)")},
        {"which players", fence("result = df['Player']")}});
    llm::Gateway g(perfect, dir.path.string(), llm::CacheMode::Record);
    const auto out = run_eval(b, templates(), g, exec, cfg);
    CHECK(out.report.pass_at_1 == 1.0);
    CHECK(out.report.total == 3);
    CHECK(out.report.metadata["cache_mode"] == "record");
    CHECK(out.report.metadata["config_digest"].get<std::string>().size() == 64);
    for (const auto& r : out.records) CHECK(r.verdict == Verdict::CorrectStrict);

    // Replay gives identical records without the endpoint.
    llm::Gateway replay(nullptr, dir.path.string(), llm::CacheMode::ReplayOnly);
    const auto again = run_eval(b, templates(), replay, exec, cfg);
    CHECK(records_csv(again.records) == records_csv(out.records));
    CHECK(perfect->calls == 3);

    auto corrupted = std::make_shared<oracle::LookupEndpoint>(std::map<std::string, std::string>{{"?", fence("result = 'wrong'")}});
    llm::Gateway h(corrupted, "", llm::CacheMode::Off);
    const auto bad = run_eval(b, templates(), h, exec, cfg);
    CHECK(bad.report.pass_at_1 == 0.0);
    CHECK(bad.report.verdict_counts.at(Verdict::Incorrect) == 3);
}

TEST_CASE("run_eval isolates completion, code and reference failures") {
    auto b = bundle();
    b.tasks[2].ground_truth = ReferenceQuery{{"result = missing", {}}};
    oracle::MapExecutor exec({{"result = len(df)", Scalar::number(2)}, {"result = df['Player']", ValueList{}}});
    // q1 has no scripted answer, q2 answers with prose only.
    auto ep = std::make_shared<oracle::LookupEndpoint>(std::map<std::string, std::string>{
        {"how many players", "   "}, {"which players", fence("result = df['Player']")}});
    llm::Gateway g(ep, "", llm::CacheMode::Off);
    EvalConfig cfg;
    cfg.params.model_name = "scripted";
    const auto out = run_eval(b, templates(), g, exec, cfg);
    REQUIRE(out.records.size() == 3);
    CHECK(out.records[0].verdict == Verdict::ExecErrorVerdict);
    CHECK(std::get<ExecError>(out.records[0].exec_result).message.find("completion failed") == 0);
    CHECK(out.records[1].verdict == Verdict::ExecErrorVerdict);
    CHECK(std::get<ExecError>(out.records[1].exec_result).kind == ExecErrorKind::NoResult);
    CHECK(out.records[2].verdict == Verdict::NeedsReview);
    CHECK_FALSE(out.records[2].expected.has_value());
    CHECK(out.records[2].note.find("reference query failed") == 0);
}

TEST_CASE("error classification fills classes on failures only") {
    const auto b = bundle();
    auto wrong = rec("q1", Verdict::ExecErrorVerdict);
    wrong.table_id = "players";
    wrong.question = "what nationality is terrence ross?";
    wrong.query = {"result = df[df['Player']=='Terrence Ross']['Nationality'].values[0]", {}};
    wrong.exec_result = ExecError{ExecErrorKind::RuntimeError, "IndexError: index 0 is out of bounds"};
    auto right = rec("q2", Verdict::CorrectStrict);
    right.table_id = "players";
    auto unknown = rec("q3", Verdict::Incorrect);
    unknown.table_id = "players";
    unknown.question = "unscripted";
    std::vector<EvalRecord> rs{wrong, right, unknown};
    auto ep = std::make_shared<oracle::LookupEndpoint>(std::map<std::string, std::string>{
        {"Terrence Ross", "It capitalizes the name.\nClasses: String Error; Condition Error"}});
    llm::Gateway g(ep, "", llm::CacheMode::Off);
    llm::GenParams p;
    p.model_name = "judge";
    const auto out = classify_errors(rs, g, p, templates(), [&](const std::string& id) { return b.find_table(id); });
    CHECK(out.classified == 1);
    CHECK(out.failures == 1);
    CHECK(rs[0].error_classes ==
          std::set<prompt::ErrorClass>{prompt::ErrorClass::StringError, prompt::ErrorClass::ConditionError});
    CHECK_FALSE(rs[1].error_classes.has_value());
    CHECK_FALSE(rs[2].error_classes.has_value());
    for (const auto& r : rs) CHECK(record_consistent(r));
}

TEST_CASE("emit_report writes the requested files") {
    TempDir dir("dfqa-report");
    std::vector<EvalRecord> rs{rec("a", Verdict::CorrectStrict), rec("b", Verdict::NeedsReview)};
    const auto rep = build_report(rs, false, json{{"model", "m"}});
    emit_report(rep, rs, dir.path.string(), {});
    for (const char* f : {"summary.json", "records.jsonl", "records.csv", "error_matrix.csv", "review.jsonl"}) {
        CHECK(std::filesystem::exists(dir.path / f));
    }
    const auto summary = json::parse(text::read_file((dir.path / "summary.json").string()));
    CHECK(summary["pass_at_1"] == 0.5);
    CHECK(read_records((dir.path / "records.jsonl").string()).size() == 2);
    CHECK(read_jsonl((dir.path / "review.jsonl").string()).size() == 1);

    TempDir only_json("dfqa-report-json");
    emit_report(rep, rs, only_json.path.string(), parse_formats("json"));
    CHECK_FALSE(std::filesystem::exists(only_json.path / "records.csv"));
}
