#include "dfqa/bundle.hpp"

#include "dfqa/text.hpp"

#include <filesystem>
#include <fstream>
#include <set>

namespace dfqa {

const DataTable* TaskBundle::find_table(const std::string& table_id) const {
    for (const auto& t : tables) {
        if (t.schema.table_id == table_id) return &t;
    }
    return nullptr;
}

const DataTable& TaskBundle::table(const std::string& table_id) const {
    const auto* t = find_table(table_id);
    if (!t) throw Error("unknown table '" + table_id + "'");
    return *t;
}

std::vector<std::string> TaskBundle::validate() const {
    std::vector<std::string> out;
    std::set<std::string> table_ids;
    for (const auto& t : tables) {
        if (!table_ids.insert(t.schema.table_id).second) out.push_back("duplicate table id '" + t.schema.table_id + "'");
        for (const auto& v : validate_table(t)) out.push_back("table '" + t.schema.table_id + "': " + v);
    }
    std::set<std::string> qids;
    for (const auto& task : tasks) {
        if (!qids.insert(task.question.qid).second) out.push_back("duplicate qid '" + task.question.qid + "'");
        if (!table_ids.count(task.table_id)) {
            out.push_back("task '" + task.question.qid + "': unknown table '" + task.table_id + "'");
        }
    }
    return out;
}

std::vector<json> read_jsonl(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw Error("cannot open " + path);
    std::vector<json> out;
    std::string line;
    std::size_t lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        if (text::trim(line).empty()) continue;
        try {
            out.push_back(json::parse(line));
        } catch (const json::exception& e) {
            throw Error(path + ":" + std::to_string(lineno) + ": " + e.what());
        }
    }
    return out;
}

void write_jsonl(const std::string& path, const std::vector<json>& lines) {
    std::string body;
    for (const auto& j : lines) {
        body += dump_line(j);
        body += '\n';
    }
    text::write_file_atomic(path, body);
}

TaskBundle load_bundle(const std::string& dir) {
    namespace fs = std::filesystem;
    TaskBundle b;
    const fs::path root(dir);
    const auto meta_path = root / "meta.json";
    if (fs::exists(meta_path)) {
        auto meta = json::parse(text::read_file(meta_path.string()));
        b.meta.name = meta.value("name", root.filename().string());
        b.meta.version = meta.value("version", std::string("1"));
        if (meta.contains("supplementary")) b.meta.supplementary = supplementary_from_json(meta["supplementary"]);
        if (meta.contains("judge")) b.meta.judge = meta["judge"];
        for (auto it = meta.begin(); it != meta.end(); ++it) {
            if (it.key() != "name" && it.key() != "version" && it.key() != "supplementary" && it.key() != "judge") {
                b.meta.extra[it.key()] = it.value();
            }
        }
    } else {
        b.meta.name = root.filename().string();
    }
    for (const auto& j : read_jsonl((root / "tables.jsonl").string())) b.tables.push_back(table_from_json(j));
    for (const auto& j : read_jsonl((root / "tasks.jsonl").string())) b.tasks.push_back(task_from_json(j));
    return b;
}

void save_bundle(const TaskBundle& bundle, const std::string& dir) {
    namespace fs = std::filesystem;
    fs::create_directories(dir);
    json meta = bundle.meta.extra;
    meta["name"] = bundle.meta.name;
    meta["version"] = bundle.meta.version;
    meta["supplementary"] = supplementary_to_json(bundle.meta.supplementary);
    meta["judge"] = bundle.meta.judge;
    text::write_file_atomic((fs::path(dir) / "meta.json").string(), meta.dump(2) + "\n");

    std::vector<json> tables;
    tables.reserve(bundle.tables.size());
    for (const auto& t : bundle.tables) tables.push_back(table_to_json(t));
    write_jsonl((fs::path(dir) / "tables.jsonl").string(), tables);

    std::vector<json> tasks;
    tasks.reserve(bundle.tasks.size());
    for (const auto& t : bundle.tasks) tasks.push_back(task_to_json(t));
    write_jsonl((fs::path(dir) / "tasks.jsonl").string(), tasks);
}

}  // namespace dfqa
