#include "dfqa/bundle.hpp"
#include "dfqa/equivalence.hpp"
#include "dfqa/gateway.hpp"
#include "dfqa/prompt.hpp"
#include "dfqa/runner.hpp"
#include "dfqa/sandbox.hpp"
#include "dfqa/text.hpp"
#include "dfqa/uci.hpp"
#include "dfqa/wikisql.hpp"

#include <CLI11.hpp>

#include <cstdlib>
#include <filesystem>
#include <iostream>
#include <unistd.h>

#ifndef DFQA_DEFAULT_WORKER_SCRIPT
#define DFQA_DEFAULT_WORKER_SCRIPT "python/dfqa/worker.py"
#endif

namespace fs = std::filesystem;
using namespace dfqa;

namespace {

/// Options shared by every subcommand that talks to a model.
struct ModelFlags {
    std::string model = "gpt-4";
    bool replay_only = false;
    bool record = false;
    std::string cache_dir = "cache";
    double temperature = 0.0;
    std::size_t max_tokens = 512;
    std::size_t llm_in_flight = 4;
    std::string templates;
};

struct ExecFlags {
    std::size_t pool_size = 2;
    double wall_seconds = 10;
    std::size_t memory_mb = 512;
    std::size_t max_result_cells = 100000;
};

void add_model_flags(CLI::App* app, ModelFlags& f) {
    app->add_option("--model", f.model, "Model name sent to the endpoint");
    auto* replay = app->add_flag("--replay-only", f.replay_only, "Serve completions from the cache only");
    app->add_flag("--record", f.record, "Call the endpoint on cache misses and store the result")->excludes(replay);
    app->add_option("--cache-dir", f.cache_dir, "Completion cache directory");
    app->add_option("--temperature", f.temperature, "Sampling temperature (default 0, greedy)");
    app->add_option("--max-tokens", f.max_tokens, "Completion token limit");
    app->add_option("--llm-in-flight", f.llm_in_flight, "Concurrent completions");
    app->add_option("--templates", f.templates, "Prompt template directory");
}

void add_exec_flags(CLI::App* app, ExecFlags& f) {
    app->add_option("--pool-size", f.pool_size, "Executor worker processes");
    app->add_option("--wall-seconds", f.wall_seconds, "Per-query wall clock limit");
    app->add_option("--memory-mb", f.memory_mb, "Per-query memory budget");
    app->add_option("--max-result-cells", f.max_result_cells, "Largest result accepted");
}

/// Fills options the user did not pass on the command line from a JSON
/// config whose keys are the long flag names (dashes or underscores).
void apply_config(CLI::App* app, const std::string& path) {
    if (path.empty()) return;
    const auto cfg = json::parse(text::read_file(path));
    if (!cfg.is_object()) throw CLI::ValidationError("--config", "config file must hold a JSON object");
    for (auto* opt : app->get_options()) {
        if (opt->count() > 0 || opt->get_lnames().empty()) continue;
        const auto& name = opt->get_lnames().front();
        auto underscored = name;
        std::replace(underscored.begin(), underscored.end(), '-', '_');
        const json* value = nullptr;
        if (cfg.contains(name)) value = &cfg.at(name);
        else if (cfg.contains(underscored)) value = &cfg.at(underscored);
        if (!value) continue;
        if (value->is_boolean()) {
            if (value->get<bool>()) opt->add_result("true");
        } else if (value->is_string()) {
            opt->add_result(value->get<std::string>());
        } else if (value->is_array()) {
            for (const auto& v : *value) opt->add_result(v.is_string() ? v.get<std::string>() : v.dump());
        } else {
            opt->add_result(value->dump());
        }
        opt->run_callback();
    }
}

llm::CacheMode cache_mode(const ModelFlags& f) {
    if (f.replay_only) return llm::CacheMode::ReplayOnly;
    return llm::CacheMode::Record;
}

std::unique_ptr<llm::Gateway> make_gateway(const ModelFlags& f) {
    std::shared_ptr<llm::Endpoint> endpoint;
    if (const auto cfg = llm::http_config_from_env()) endpoint = std::make_shared<llm::HttpEndpoint>(*cfg);
    if (f.record && !endpoint) throw Error("--record needs an endpoint: set DFQA_LLM_URL (and DFQA_LLM_API_KEY)");
    return std::make_unique<llm::Gateway>(endpoint, f.cache_dir, cache_mode(f));
}

llm::GenParams gen_params(const ModelFlags& f) {
    llm::GenParams p;
    p.model_name = f.model;
    p.temperature = f.temperature;
    p.max_tokens = f.max_tokens;
    return p;
}

prompt::TemplateSet load_templates(const ModelFlags& f) {
    return prompt::TemplateSet::load(f.templates.empty() ? prompt::default_template_dir() : f.templates);
}

protocol::Limits limits(const ExecFlags& f) { return {f.wall_seconds, f.memory_mb, f.max_result_cells}; }

std::unique_ptr<sandbox::Pool> make_pool(const ExecFlags& f) {
    sandbox::PoolOptions o;
    o.size = f.pool_size;
    o.inherit_stderr = std::getenv("DFQA_WORKER_STDERR") != nullptr;
    return std::make_unique<sandbox::Pool>(o);
}

std::string pct(double v) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.3f", v);
    return buf;
}

void print_report(const runner::Report& rep) {
    std::cout << "tasks: " << rep.total << "\npass@1: " << pct(rep.pass_at_1) << "\n";
    for (const auto& [v, n] : rep.verdict_counts) std::cout << "  " << to_string(v) << ": " << n << "\n";
    for (const auto& [k, b] : rep.by_qtype) {
        std::cout << "  qtype " << k << ": " << b.correct << "/" << b.total << " (" << pct(b.pass_at_1()) << ")\n";
    }
    for (const auto& [k, b] : rep.by_role) {
        std::cout << "  role " << k << ": " << b.correct << "/" << b.total << " (" << pct(b.pass_at_1()) << ")\n";
    }
}

[[noreturn]] void exec_worker() {
    const char* py = std::getenv("DFQA_PYTHON");
    const char* script = std::getenv("DFQA_WORKER_SCRIPT");
    std::string python = py && *py ? py : "python3";
    std::string path = script && *script ? script : DFQA_DEFAULT_WORKER_SCRIPT;
    char* argv[] = {python.data(), path.data(), nullptr};
    ::execvp(argv[0], argv);
    std::perror(("dfqa worker: cannot execute " + python).c_str());
    std::exit(127);
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"DataFrame question answering evaluation harness"};
    app.require_subcommand(1);
    std::string config_path;
    app.add_option("--config", config_path, "JSON file mirroring the command-line flags; flags win")
        ->check(CLI::ExistingFile);

    // build-wikisql
    auto* build = app.add_subcommand("build-wikisql", "Convert a WikiSQL release split into a task bundle");
    std::string ws_in, ws_out, ws_split = "test", ws_exclude;
    std::optional<std::size_t> ws_limit;
    std::uint64_t ws_seed = 0;
    build->add_option("in", ws_in, "Directory holding <split>.jsonl and <split>.tables.jsonl")->required();
    build->add_option("out", ws_out, "Bundle output directory")->required();
    build->add_option("--limit", ws_limit, "Sample this many questions");
    build->add_option("--seed", ws_seed, "Sampling seed");
    build->add_option("--split", ws_split, "Release split name");
    build->add_option("--exclude", ws_exclude, "File of qids to drop, one per line")->check(CLI::ExistingFile);

    // gen-uci
    auto* gen = app.add_subcommand("gen-uci", "Generate and curate question/query pairs over CSV tables");
    std::string gen_dir, gen_out = "uci-generated", gen_roles = "data_scientist,general_user,data_owner";
    std::size_t gen_n = 20;
    ModelFlags gen_model;
    ExecFlags gen_exec;
    gen->add_option("csv-dir", gen_dir, "Directory of <name>.csv (+ optional <name>.dtypes.json)")->required();
    gen->add_option("--roles", gen_roles, "Comma-separated roles");
    gen->add_option("--n", gen_n, "Pairs requested per table and role");
    gen->add_option("--out", gen_out, "Bundle output directory");
    add_model_flags(gen, gen_model);
    add_exec_flags(gen, gen_exec);

    // eval
    auto* eval = app.add_subcommand("eval", "Evaluate a model on a task bundle");
    std::string ev_bundle, ev_out = "out", ev_containment, ev_formats = "json,csv";
    std::optional<double> ev_rel_tol, ev_abs_tol;
    bool ev_order = false, ev_count_review = false;
    ModelFlags ev_model;
    ExecFlags ev_exec;
    eval->add_option("bundle", ev_bundle, "Task bundle directory")->required();
    eval->add_option("--out", ev_out, "Report directory");
    eval->add_option("--rel-tol", ev_rel_tol, "Relative numeric tolerance");
    eval->add_option("--abs-tol", ev_abs_tol, "Absolute numeric tolerance");
    eval->add_flag("--order-sensitive", ev_order, "Compare lists as sequences");
    eval->add_flag("--count-needs-review", ev_count_review, "Count needs_review verdicts as correct");
    eval->add_option("--containment", ev_containment, "cell or row")->check(CLI::IsMember({"cell", "row"}));
    eval->add_option("--formats", ev_formats, "Report formats: json,csv");
    add_model_flags(eval, ev_model);
    add_exec_flags(eval, ev_exec);

    // classify-errors
    auto* classify = app.add_subcommand("classify-errors", "Label failed records with error classes");
    std::string cl_records, cl_bundle, cl_out;
    ModelFlags cl_model;
    cl_model.model = "gpt-3.5-turbo";
    classify->add_option("records", cl_records, "records.jsonl from an eval run")->required()->check(CLI::ExistingFile);
    classify->add_option("--bundle", cl_bundle, "Bundle the records came from (for sample rows)");
    classify->add_option("--out", cl_out, "Report directory (default: next to the records)");
    add_model_flags(classify, cl_model);

    // ask
    auto* ask = app.add_subcommand("ask", "Answer one question over a CSV table");
    std::string ask_csv, ask_question;
    ModelFlags ask_model;
    ExecFlags ask_exec;
    ask_exec.pool_size = 1;
    ask->add_option("table", ask_csv, "CSV file")->required()->check(CLI::ExistingFile);
    ask->add_option("question", ask_question, "Question text")->required();
    add_model_flags(ask, ask_model);
    add_exec_flags(ask, ask_exec);

    // worker
    app.add_subcommand("worker", "Run the restricted query executor on stdin/stdout");

    // report
    auto* report = app.add_subcommand("report", "Rebuild reports from one or more records files");
    std::vector<std::string> rp_records;
    std::string rp_formats = "json,csv", rp_out = "report", rp_rejudge;
    std::optional<double> rp_rel_tol, rp_abs_tol;
    bool rp_order = false, rp_count_review = false;
    std::string rp_containment;
    report->add_option("records", rp_records, "records.jsonl files; several runs are merged")->required()->check(CLI::ExistingFile);
    report->add_option("--formats", rp_formats, "json,csv");
    report->add_option("--out", rp_out, "Report directory");
    report->add_option("--rejudge", rp_rejudge, "review.jsonl with accept decisions; re-judges all records")
        ->check(CLI::ExistingFile);
    report->add_option("--rel-tol", rp_rel_tol, "Relative numeric tolerance for --rejudge");
    report->add_option("--abs-tol", rp_abs_tol, "Absolute numeric tolerance for --rejudge");
    report->add_flag("--order-sensitive", rp_order, "Compare lists as sequences for --rejudge");
    report->add_flag("--count-needs-review", rp_count_review, "Count needs_review verdicts as correct");
    report->add_option("--containment", rp_containment, "cell or row")->check(CLI::IsMember({"cell", "row"}));

    try {
        app.parse(argc, argv);
        for (auto* sub : app.get_subcommands()) apply_config(sub, config_path);
    } catch (const CLI::ParseError& e) {
        return app.exit(e);
    } catch (const std::exception& e) {
        std::cerr << "dfqa: " << e.what() << "\n";
        return 2;
    }

    try {
        if (app.got_subcommand("worker")) exec_worker();

        if (*build) {
            wikisql::BuildOptions opts;
            opts.limit = ws_limit;
            opts.seed = ws_seed;
            if (!ws_exclude.empty()) {
                for (const auto& line : text::split(text::read_file(ws_exclude), '\n')) {
                    if (const auto t = text::trim(line); !t.empty()) opts.exclude.emplace_back(t);
                }
            }
            auto built = wikisql::build_bundle_from_release(ws_in, ws_split, opts);
            save_bundle(built.bundle, ws_out);
            text::write_file_atomic((fs::path(ws_out) / "manifest.json").string(), built.manifest.to_json().dump(2) + "\n");
            std::cout << "questions read: " << built.manifest.questions_read << "\nemitted: " << built.manifest.emitted
                      << "\nskipped: " << built.manifest.skipped.size() << "\n";
            return 0;
        }

        if (*gen) {
            uci::GenOptions opts;
            opts.roles.clear();
            for (const auto& r : text::split(gen_roles, ',')) {
                if (const auto t = text::trim(r); !t.empty()) opts.roles.push_back(parse_role(t));
            }
            opts.n = gen_n;
            opts.params = gen_params(gen_model);
            opts.max_in_flight = gen_model.llm_in_flight;
            opts.limits = limits(gen_exec);
            const auto tables = uci::import_csv_dir(gen_dir);
            if (tables.empty()) throw Error("no .csv files in " + gen_dir);
            auto gateway = make_gateway(gen_model);
            auto pool = make_pool(gen_exec);
            auto result = uci::generate_dataset(tables, load_templates(gen_model), *gateway, *pool, opts);
            save_bundle(result.bundle, gen_out);
            write_jsonl((fs::path(gen_out) / "curation.jsonl").string(), result.curation);
            std::size_t kept = result.bundle.tasks.size();
            std::cout << "kept pairs: " << kept << "\nrecords in curation.jsonl: " << result.curation.size()
                      << "\nparse warnings: " << result.parse_warnings
                      << "\ngeneration failures: " << result.generation_failures << "\n";
            return 0;
        }

        if (*eval) {
            const auto bundle = load_bundle(ev_bundle);
            runner::EvalConfig cfg;
            cfg.params = gen_params(ev_model);
            cfg.judge = judge::config_from_json(bundle.meta.judge);
            if (ev_rel_tol) cfg.judge.rel_tol = *ev_rel_tol;
            if (ev_abs_tol) cfg.judge.abs_tol = *ev_abs_tol;
            if (ev_order) cfg.judge.list_order_sensitive = true;
            if (ev_count_review) cfg.judge.count_needs_review = true;
            if (!ev_containment.empty()) cfg.judge.containment = ev_containment == "row" ? judge::Containment::Row : judge::Containment::Cell;
            cfg.llm_in_flight = ev_model.llm_in_flight;
            cfg.exec_in_flight = ev_exec.pool_size;
            cfg.limits = limits(ev_exec);
            cfg.dataset = bundle.meta.name;
            auto gateway = make_gateway(ev_model);
            auto pool = make_pool(ev_exec);
            auto out = runner::run_eval(bundle, load_templates(ev_model), *gateway, *pool, cfg);
            const auto summary = pool->shutdown();
            out.report.metadata["sandbox"] = {{"executed", summary.executed},
                                              {"timeouts", summary.timeouts},
                                              {"crashes", summary.crashes}};
            runner::emit_report(out.report, out.records, ev_out, runner::parse_formats(ev_formats));
            print_report(out.report);
            return 0;
        }

        if (*classify) {
            auto records = runner::read_records(cl_records);
            std::optional<TaskBundle> bundle;
            if (!cl_bundle.empty()) bundle = load_bundle(cl_bundle);
            auto gateway = make_gateway(cl_model);
            const auto lookup = [&](const std::string& id) -> const DataTable* {
                return bundle ? bundle->find_table(id) : nullptr;
            };
            const auto outcome = runner::classify_errors(records, *gateway, gen_params(cl_model), load_templates(cl_model),
                                                         lookup, cl_model.llm_in_flight);
            const auto dir = cl_out.empty() ? fs::path(cl_records).parent_path().string() : cl_out;
            json meta{{"classifier_model", cl_model.model}, {"classified_at", runner::utc_timestamp()}};
            auto rep = runner::build_report(records, false, meta);
            runner::emit_report(rep, records, dir.empty() ? "." : dir, {});
            std::cout << "classified: " << outcome.classified << "\nfailures: " << outcome.failures << "\n";
            for (const auto& [model, row] : rep.error_matrix) {
                std::cout << model << ":";
                for (const auto& [c, n] : row) std::cout << " " << prompt::to_string(c) << "=" << n;
                std::cout << "\n";
            }
            return outcome.failures ? 1 : 0;
        }

        if (*ask) {
            auto table = uci::import_csv(ask_csv);
            const auto templates = load_templates(ask_model);
            SupplementarySpec spec;
            spec.mitigation_flags.insert(MitigationFlag::NoImportDirective);
            const auto bundle_prompt =
                prompt::build_qa_prompt(templates, spec, table.schema, Question{"ask", ask_question, {}, {}});
            auto gateway = make_gateway(ask_model);
            const auto completion = gateway->complete(bundle_prompt.messages, gen_params(ask_model));
            const auto query = prompt::extract_code(completion);
            auto pool = make_pool(ask_exec);
            const auto response = pool->execute({"ask", &table, query.source, limits(ask_exec)});
            std::cout << "query:\n" << query.source << "\n\nanswer:\n" << runner::render_result_text(response.result) << "\n";
            for (auto l : query.lint) std::cerr << "lint: " << to_string(l) << "\n";
            return is_error(response.result) ? 1 : 0;
        }

        if (*report) {
            std::vector<runner::EvalRecord> records;
            for (const auto& path : rp_records) {
                auto part = runner::read_records(path);
                records.insert(records.end(), std::make_move_iterator(part.begin()), std::make_move_iterator(part.end()));
            }
            json meta{{"sources", rp_records}, {"generated_at", runner::utc_timestamp()}};
            if (!rp_rejudge.empty() || rp_rel_tol || rp_abs_tol || rp_order || !rp_containment.empty()) {
                judge::JudgeConfig cfg;
                if (rp_rel_tol) cfg.rel_tol = *rp_rel_tol;
                if (rp_abs_tol) cfg.abs_tol = *rp_abs_tol;
                cfg.list_order_sensitive = rp_order;
                if (!rp_containment.empty()) cfg.containment = rp_containment == "row" ? judge::Containment::Row : judge::Containment::Cell;
                const auto reviews = rp_rejudge.empty() ? std::vector<json>{} : read_jsonl(rp_rejudge);
                runner::rejudge(records, cfg, reviews);
                meta["rejudged"] = {{"judge", judge::config_to_json(cfg)}, {"reviews", rp_rejudge}};
            }
            auto rep = runner::build_report(records, rp_count_review, meta);
            runner::emit_report(rep, records, rp_out, runner::parse_formats(rp_formats));
            print_report(rep);
            return 0;
        }
    } catch (const std::exception& e) {
        std::cerr << "dfqa: " << e.what() << "\n";
        return 1;
    }
    return 0;
}
