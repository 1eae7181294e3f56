#pragma once

// JSON encodings shared by the task bundle files and the worker wire protocol.
//
// Cells and scalars: numbers as JSON numbers, strings as JSON strings,
// booleans, null, and datetimes as {"$dt": "<iso>"}.
// CanonResult carries a "kind" discriminator: scalar | list | series | table | error.

#include "dfqa/model.hpp"

#include <nlohmann/json.hpp>

namespace dfqa {

using json = nlohmann::json;

json cell_to_json(const Cell& c);
/// Decodes a cell under the column's dtype; throws Error on mismatch.
Cell cell_from_json(const json& j, Dtype dtype);

json scalar_to_json(const Scalar& s);
Scalar scalar_from_json(const json& j);

json result_to_json(const CanonResult& r);
CanonResult result_from_json(const json& j);

json column_to_json(const ColumnSpec& c);
ColumnSpec column_from_json(const json& j);

/// Full table record: {"table_id", "columns", "notes"?, "rows"}.
json table_to_json(const DataTable& t);
DataTable table_from_json(const json& j);

/// Wire table payload: {"columns":[{"name","dtype"}], "rows":[...]}.
json table_to_wire(const DataTable& t);

json question_to_json(const Question& q);
Question question_from_json(const json& j);

json query_to_json(const QueryText& q);
QueryText query_from_json(const json& j);

json task_to_json(const TaskInstance& t);
TaskInstance task_from_json(const json& j);

json supplementary_to_json(const SupplementarySpec& s);
SupplementarySpec supplementary_from_json(const json& j);

/// Compact single-line dump with UTF-8 passthrough.
std::string dump_line(const json& j);

}  // namespace dfqa
