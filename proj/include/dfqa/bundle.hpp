#pragma once

// Task bundle on disk: one directory holding tables.jsonl (one DataTable per
// line), tasks.jsonl (one TaskInstance per line) and meta.json.

#include "dfqa/json_io.hpp"
#include "dfqa/model.hpp"

#include <map>
#include <string>
#include <vector>

namespace dfqa {

struct BundleMeta {
    std::string name;
    std::string version = "1";
    SupplementarySpec supplementary;
    /// JudgeConfig overrides; interpreted by the equivalence module.
    json judge = json::object();
    /// Anything else found in meta.json, preserved on save.
    json extra = json::object();
};

struct TaskBundle {
    BundleMeta meta;
    std::vector<DataTable> tables;
    std::vector<TaskInstance> tasks;

    const DataTable& table(const std::string& table_id) const;
    const DataTable* find_table(const std::string& table_id) const;

    /// Problems that make the bundle unusable: unresolvable table ids,
    /// duplicate qids, duplicate table ids, invalid tables.
    std::vector<std::string> validate() const;
};

TaskBundle load_bundle(const std::string& dir);
void save_bundle(const TaskBundle& bundle, const std::string& dir);

/// Reads a JSON-lines file; blank lines are skipped.
std::vector<json> read_jsonl(const std::string& path);
void write_jsonl(const std::string& path, const std::vector<json>& lines);

}  // namespace dfqa
