#include "dfqa/prompt.hpp"

#include "dfqa/json_io.hpp"
#include "dfqa/text.hpp"

#include <algorithm>
#include <cctype>
#include <cstdlib>
#include <filesystem>
#include <regex>
#include <unordered_set>

#ifndef DFQA_DEFAULT_TEMPLATE_DIR
#define DFQA_DEFAULT_TEMPLATE_DIR "templates"
#endif

namespace dfqa::prompt {

namespace {

struct ClassNames {
    ErrorClass id;
    std::string_view snake;
    std::string_view abbreviation;
    std::string_view full_name;
};

constexpr std::array<ClassNames, 8> kClassNames{{
    {ErrorClass::StringError, "string_error", "String Error", "String Matching and Comparison Errors"},
    {ErrorClass::AccessError, "access_error", "Access Error", "Data Access and Bounds Errors"},
    {ErrorClass::ConditionError, "condition_error", "Condition Error", "Query Condition and Value Errors"},
    {ErrorClass::TypeError, "type_error", "Type Error", "Data Type and Operation Errors"},
    {ErrorClass::ExpectationError, "expectation_error", "Expectation Error", "Expectation and Interpretation Errors"},
    {ErrorClass::StructureError, "structure_error", "Structure Error", "Data Structure Reference Errors"},
    {ErrorClass::FunctionError, "function_error", "Function Error", "Function and Method Usage Errors"},
    {ErrorClass::Others, "others", "Others", "Others"},
}};

const ClassNames& names_of(ErrorClass c) {
    for (const auto& n : kClassNames) {
        if (n.id == c) return n;
    }
    return kClassNames.back();
}

std::string bullet_lines(const std::vector<std::string>& lines) {
    std::vector<std::string> out;
    out.reserve(lines.size());
    for (const auto& l : lines) out.push_back("- " + l);
    return text::join(out, "\n");
}

// Drops blank lines left behind by empty placeholders and trailing whitespace.
std::string tidy(const std::string& s) {
    std::vector<std::string> kept;
    bool prev_blank = true;
    for (const auto& line : text::split(s, '\n')) {
        const bool blank = text::trim(line).empty();
        if (blank && prev_blank) continue;
        kept.push_back(line);
        prev_blank = blank;
    }
    while (!kept.empty() && text::trim(kept.back()).empty()) kept.pop_back();
    return text::join(kept, "\n");
}

std::string columns_block(const TableSchema& schema) {
    std::vector<std::string> lines;
    for (const auto& c : schema.columns) lines.push_back(c.name + ": " + std::string(to_string(c.dtype)));
    return bullet_lines(lines);
}

const std::unordered_set<std::string>& stop_words() {
    static const std::unordered_set<std::string> words{
        "a",       "about",   "after",   "all",     "an",      "and",     "any",     "are",     "as",
        "at",      "average", "be",      "been",    "before",  "between", "by",      "can",     "count",
        "did",     "do",      "does",    "during",  "each",    "find",    "for",     "from",    "give",
        "had",     "has",     "have",    "he",      "her",     "highest", "his",     "how",     "i",
        "if",      "in",      "into",    "is",      "it",      "its",     "largest", "least",   "less",
        "list",    "lowest",  "many",    "maximum", "me",      "minimum", "more",    "most",    "much",
        "name",    "names",   "no",      "not",     "number",  "of",      "on",      "or",      "other",
        "per",     "show",    "she",     "smallest","sum",     "tell",    "than",    "that",    "the",
        "their",   "there",   "these",   "they",    "this",    "those",   "to",      "total",   "under",
        "was",     "were",    "what",    "what's",  "when",    "where",   "which",   "who",     "whom",
        "whose",   "why",     "will",    "with",    "greatest","fewer",   "greater", "over",    "being",
    };
    return words;
}

bool is_joiner(const std::string& w) { return w == "of" || w == "and" || w == "the" || w == "de" || w == "&"; }

std::unordered_set<std::string> column_words(const TableSchema& schema) {
    std::unordered_set<std::string> out;
    for (const auto& c : schema.columns) {
        std::string word;
        for (char ch : text::lower(c.name) + " ") {
            if (std::isalnum(static_cast<unsigned char>(ch)) || (static_cast<unsigned char>(ch) & 0x80)) {
                word.push_back(ch);
            } else if (!word.empty()) {
                out.insert(word);
                word.clear();
            }
        }
    }
    return out;
}

bool is_import_line(std::string_view line) {
    const auto t = text::trim(line);
    return t.rfind("import ", 0) == 0 || (t.rfind("from ", 0) == 0 && t.find(" import ") != std::string_view::npos);
}

bool has_comment(std::string_view line) {
    char quote = 0;
    for (std::size_t i = 0; i < line.size(); ++i) {
        const char c = line[i];
        if (quote) {
            if (c == '\\') {
                ++i;
            } else if (c == quote) {
                quote = 0;
            }
        } else if (c == '\'' || c == '"') {
            quote = c;
        } else if (c == '#') {
            return true;
        }
    }
    return false;
}

std::string render_cell(const Cell& c) { return is_null(c) ? "NaN" : cell_text(c); }

}  // namespace

std::string_view to_string(MessageRole role) { return role == MessageRole::System ? "system" : "user"; }

MessageRole parse_message_role(std::string_view text) {
    if (text == "system") return MessageRole::System;
    if (text == "user") return MessageRole::User;
    throw Error("unknown message role '" + std::string(text) + "'");
}

std::size_t estimate_tokens(const std::vector<Message>& messages) {
    std::size_t chars = 0;
    for (const auto& m : messages) chars += m.content.size();
    return (chars + 3) / 4;
}

std::string_view to_string(ErrorClass c) { return names_of(c).snake; }
std::string_view abbreviation(ErrorClass c) { return names_of(c).abbreviation; }

ErrorClass parse_error_class_id(std::string_view id) {
    for (const auto& n : kClassNames) {
        if (n.snake == id) return n.id;
    }
    throw Error("unknown error class '" + std::string(id) + "'");
}

TemplateSet TemplateSet::load(const std::string& dir) {
    namespace fs = std::filesystem;
    const fs::path root(dir);
    const auto read = [&](const char* name) {
        const auto p = root / name;
        if (!fs::exists(p)) throw Error("template file missing: " + p.string());
        return text::read_file(p.string());
    };
    TemplateSet t;
    t.version = std::string(text::trim(fs::exists(root / "VERSION") ? read("VERSION") : std::string("0")));
    t.qa_system = read("qa-system.txt");
    t.qa_user = read("qa-user.txt");
    t.generation = read("generation.txt");
    t.classification = read("classification.txt");
    for (const auto& r : json::parse(read("roles.json"))) {
        t.roles.push_back({parse_role(r.at("role").get<std::string>()), r.at("name").get<std::string>(),
                           r.at("description").get<std::string>()});
    }
    for (const auto& c : json::parse(read("error_classes.json"))) {
        t.error_classes.push_back({parse_error_class_id(c.at("id").get<std::string>()),
                                   c.at("abbreviation").get<std::string>(), c.at("name").get<std::string>(),
                                   c.at("description").get<std::string>()});
    }
    if (t.error_classes.size() != kAllErrorClasses.size()) throw Error("error_classes.json must list all 8 classes");
    if (fs::exists(root / "failure_types.json")) {
        for (const auto& f : json::parse(read("failure_types.json"))) {
            FailureType ft{f.at("id").get<std::string>(), f.at("name").get<std::string>(), {}};
            for (const auto& flag : f.at("mitigation_flags")) ft.mitigations.insert(parse_mitigation_flag(flag.get<std::string>()));
            t.failure_types.push_back(std::move(ft));
        }
    }
    return t;
}

const RoleInfo& TemplateSet::role(Role r) const {
    for (const auto& info : roles) {
        if (info.role == r) return info;
    }
    throw Error("role table has no entry for " + std::string(to_string(r)));
}

const FailureType* TemplateSet::failure_type(std::string_view id) const {
    for (const auto& f : failure_types) {
        if (f.id == id) return &f;
    }
    return nullptr;
}

std::string default_template_dir() {
    if (const char* env = std::getenv("DFQA_TEMPLATE_DIR"); env && *env) return env;
    return DFQA_DEFAULT_TEMPLATE_DIR;
}

ExpandedSupplementary expand_supplementary(const SupplementarySpec& s) {
    ExpandedSupplementary out;
    const auto add = [](std::vector<std::string>& v, std::string line) {
        if (std::find(v.begin(), v.end(), line) == v.end()) v.push_back(std::move(line));
    };
    if (s.mitigation_flags.count(MitigationFlag::LowercaseDirective)) {
        add(out.assumptions, "All strings in the dataframe are lowercase.");
    }
    for (const auto& a : s.assumptions) add(out.assumptions, a);
    if (s.mitigation_flags.count(MitigationFlag::NoImportDirective)) {
        add(out.constraints, "Do not import any library; pandas is pre-imported as pd.");
        add(out.constraints, "Do not write comments.");
    }
    if (s.mitigation_flags.count(MitigationFlag::QuoteValues)) {
        add(out.constraints, "Text in double quotes in the question is an exact cell value.");
    }
    for (const auto& c : s.constraints) add(out.constraints, c);
    return out;
}

std::string quote_literal_phrases(std::string_view question, const TableSchema& schema) {
    const auto cols = column_words(schema);
    const auto& stops = stop_words();

    struct Token {
        std::string raw;
        std::string core;  // lowercase, edge punctuation removed
        std::size_t lead = 0, core_len = 0;
        bool content = false;
    };
    std::vector<Token> tokens;
    for (const auto& raw : text::split(question, ' ')) {
        Token t;
        t.raw = raw;
        std::size_t b = 0, e = raw.size();
        while (b < e && std::string_view("\"'(").find(raw[b]) != std::string_view::npos) ++b;
        while (e > b && std::string_view("?!.,;:)\"'").find(raw[e - 1]) != std::string_view::npos) --e;
        t.lead = b;
        t.core_len = e - b;
        t.core = text::lower(raw.substr(b, e - b));
        t.content = !t.core.empty() && !stops.count(t.core) && !cols.count(t.core);
        tokens.push_back(std::move(t));
    }

    // Mark runs: content tokens, joined through single joiner words.
    std::vector<std::pair<std::size_t, std::size_t>> runs;
    for (std::size_t i = 0; i < tokens.size();) {
        if (!tokens[i].content) {
            ++i;
            continue;
        }
        std::size_t end = i;
        while (true) {
            if (end + 1 < tokens.size() && tokens[end + 1].content) {
                ++end;
            } else if (end + 2 < tokens.size() && is_joiner(tokens[end + 1].core) && tokens[end + 2].content) {
                end += 2;
            } else {
                break;
            }
        }
        runs.emplace_back(i, end);
        i = end + 1;
    }

    for (const auto& [b, e] : runs) {
        auto& first = tokens[b];
        first.raw.insert(first.lead, "\"");
        auto& last = tokens[e];
        const auto close = (b == e ? 1 : 0) + last.lead + last.core_len;
        last.raw.insert(close, "\"");
    }
    std::vector<std::string> parts;
    parts.reserve(tokens.size());
    for (const auto& t : tokens) parts.push_back(t.raw);
    return text::join(parts, " ");
}

PromptBundle build_qa_prompt(const TemplateSet& templates, const SupplementarySpec& s, const TableSchema& schema,
                             const Question& q) {
    const auto sup = expand_supplementary(s);
    std::string assumptions;
    if (!sup.assumptions.empty()) assumptions = "Assumptions:\n" + bullet_lines(sup.assumptions);

    std::vector<std::string> notes;
    if (s.mitigation_flags.count(MitigationFlag::ColumnDescriptions)) {
        if (schema.notes) notes.push_back("Table: " + *schema.notes);
        for (const auto& c : schema.columns) {
            if (c.description) notes.push_back("Column `" + c.name + "`: " + *c.description);
        }
    }
    if (s.mitigation_flags.count(MitigationFlag::DateFormatHints)) {
        for (const auto& c : schema.columns) {
            if (c.format_hint) notes.push_back("Column `" + c.name + "` follows the format: " + *c.format_hint);
        }
    }
    std::string column_notes;
    if (!notes.empty()) column_notes = "Column notes:\n" + bullet_lines(notes);

    const std::string question = s.mitigation_flags.count(MitigationFlag::QuoteValues)
                                     ? quote_literal_phrases(q.text, schema)
                                     : q.text;

    PromptBundle out;
    out.messages.push_back({MessageRole::System,
                            tidy(text::render_template(templates.qa_system, {{"assumptions", assumptions},
                                                                             {"constraints", bullet_lines(sup.constraints)}}))});
    out.messages.push_back({MessageRole::User, tidy(text::render_template(templates.qa_user, {{"columns", columns_block(schema)},
                                                                                              {"column_notes", column_notes},
                                                                                              {"question", question}}))});
    out.token_estimate = estimate_tokens(out.messages);
    return out;
}

std::vector<LintFinding> lint_query(std::string_view source) {
    static const std::regex result_assign(R"((^|;)\s*result\s*(:[^=]+)?=(?!=))");
    bool has_import = false, comments = false, assigns = false;
    for (const auto& line : text::split(source, '\n')) {
        if (is_import_line(line)) has_import = true;
        if (has_comment(line)) comments = true;
        if (std::regex_search(line, result_assign)) assigns = true;
    }
    std::vector<LintFinding> out;
    if (has_import) out.push_back(LintFinding::HasImport);
    if (comments) out.push_back(LintFinding::HasComments);
    if (!assigns) out.push_back(LintFinding::MissingResultAssignment);
    return out;
}

QueryText extract_code(std::string_view completion) {
    std::string_view body = completion;
    if (const auto open = completion.find("```"); open != std::string_view::npos) {
        auto rest = completion.substr(open + 3);
        const auto eol = rest.find('\n');
        // Text on the fence line is a language tag, not code.
        rest = eol == std::string_view::npos ? std::string_view{} : rest.substr(eol + 1);
        const auto close = rest.find("```");
        body = close == std::string_view::npos ? rest : rest.substr(0, close);
    }
    QueryText q;
    q.source = std::string(text::trim(body));
    if (q.source.empty()) throw EmptyCompletion("completion contains no code");
    q.lint = lint_query(q.source);
    return q;
}

PromptBundle build_error_classification_prompt(const TemplateSet& templates, const ClassificationRecord& record) {
    std::vector<std::string> header;
    for (const auto& c : record.schema.columns) header.push_back(c.name);
    std::vector<std::string> lines{text::join(header, " | ")};
    const auto n = std::min<std::size_t>(3, record.sample_rows.size());
    for (std::size_t r = 0; r < n; ++r) {
        std::vector<std::string> cells;
        for (const auto& c : record.sample_rows[r]) cells.push_back(render_cell(c));
        lines.push_back(text::join(cells, " | "));
    }

    std::vector<std::string> classes;
    for (const auto& info : templates.error_classes) {
        classes.push_back(info.abbreviation + " (" + info.name + "): " + info.description);
    }

    const auto or_placeholder = [](const std::string& s) {
        return text::trim(s).empty() ? std::string("(no output)") : s;
    };
    PromptBundle out;
    out.messages.push_back(
        {MessageRole::User,
         tidy(text::render_template(templates.classification, {{"question", record.question},
                                                                {"sample_rows", text::join(lines, "\n")},
                                                                {"query", record.query},
                                                                {"exec_output", or_placeholder(record.exec_output)},
                                                                {"expected", or_placeholder(record.expected)},
                                                                {"error_classes", bullet_lines(classes)}}))});
    out.token_estimate = estimate_tokens(out.messages);
    return out;
}

std::set<ErrorClass> parse_error_classes(std::string_view completion) {
    auto haystack = text::lower(completion);
    // Prefer the explicit answer line when the model followed the format.
    if (const auto pos = haystack.rfind("classes:"); pos != std::string::npos) {
        const auto eol = haystack.find('\n', pos);
        haystack = haystack.substr(pos + 8, eol == std::string::npos ? std::string::npos : eol - pos - 8);
    }
    std::set<ErrorClass> out;
    for (const auto& n : kClassNames) {
        const auto abbr = text::lower(n.abbreviation);
        const auto full = text::lower(n.full_name);
        std::vector<std::string> patterns{std::string(n.snake), abbr, full};
        if (full.size() > 1 && full.back() == 's') patterns.push_back(full.substr(0, full.size() - 1));
        for (const auto& p : patterns) {
            if (haystack.find(p) != std::string::npos) {
                out.insert(n.id);
                break;
            }
        }
    }
    if (out.empty()) out.insert(ErrorClass::Others);
    return out;
}

std::string render_error_classes(const std::set<ErrorClass>& classes) {
    std::vector<std::string> parts;
    for (auto c : classes) parts.emplace_back(abbreviation(c));
    return text::join(parts, "; ");
}

PromptBundle build_generation_prompt(const TemplateSet& templates, const TableSchema& schema, Role role, std::size_t n) {
    if (n == 0) throw std::invalid_argument("build_generation_prompt: n must be at least 1");
    const auto& info = templates.role(role);
    PromptBundle out;
    out.messages.push_back({MessageRole::User, tidy(text::render_template(templates.generation,
                                                                          {{"table_name", schema.table_id},
                                                                           {"columns", columns_block(schema)},
                                                                           {"role_name", info.name},
                                                                           {"role_description", info.description},
                                                                           {"n", std::to_string(n)}}))});
    out.token_estimate = estimate_tokens(out.messages);
    return out;
}

}  // namespace dfqa::prompt
