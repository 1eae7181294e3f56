#pragma once

// Prompt construction from schema metadata only, completion code extraction,
// and the error-classification prompt/parser.

#include "dfqa/model.hpp"

#include <array>
#include <map>
#include <set>
#include <string>
#include <vector>

namespace dfqa::prompt {

enum class MessageRole { System, User };

std::string_view to_string(MessageRole role);
MessageRole parse_message_role(std::string_view text);

struct Message {
    MessageRole role = MessageRole::User;
    std::string content;
    friend bool operator==(const Message&, const Message&) = default;
};

struct PromptBundle {
    std::vector<Message> messages;
    std::size_t token_estimate = 0;
};

/// chars/4, rounded up, over all message contents.
std::size_t estimate_tokens(const std::vector<Message>& messages);

enum class ErrorClass {
    StringError,
    AccessError,
    ConditionError,
    TypeError,
    ExpectationError,
    StructureError,
    FunctionError,
    Others,
};

inline constexpr std::array<ErrorClass, 8> kAllErrorClasses{
    ErrorClass::StringError,    ErrorClass::AccessError,      ErrorClass::ConditionError, ErrorClass::TypeError,
    ErrorClass::ExpectationError, ErrorClass::StructureError, ErrorClass::FunctionError,  ErrorClass::Others,
};

std::string_view to_string(ErrorClass c);
ErrorClass parse_error_class_id(std::string_view id);
/// Short label, e.g. "String Error".
std::string_view abbreviation(ErrorClass c);

struct ErrorClassInfo {
    ErrorClass id;
    std::string abbreviation;
    std::string name;
    std::string description;
};

struct RoleInfo {
    Role role;
    std::string name;
    std::string description;
};

/// Failure types from the curated failure-case fixtures, each with the
/// prompt mitigations that address it.
struct FailureType {
    std::string id;
    std::string name;
    std::set<MitigationFlag> mitigations;
};

/// Versioned prompt templates and the data tables they embed, loaded from a
/// template directory (see templates/README.md for placeholders).
struct TemplateSet {
    std::string version;
    std::string qa_system;
    std::string qa_user;
    std::string generation;
    std::string classification;
    std::vector<RoleInfo> roles;
    std::vector<ErrorClassInfo> error_classes;
    std::vector<FailureType> failure_types;

    static TemplateSet load(const std::string& dir);
    const RoleInfo& role(Role r) const;
    const FailureType* failure_type(std::string_view id) const;
};

/// DFQA_TEMPLATE_DIR if set, else the directory baked in at build time.
std::string default_template_dir();

struct ExpandedSupplementary {
    std::vector<std::string> assumptions;
    std::vector<std::string> constraints;
};

/// Spec lines plus the fixed lines each mitigation flag contributes.
ExpandedSupplementary expand_supplementary(const SupplementarySpec& s);

/// Wraps literal value phrases of a question in double quotes. A phrase is a
/// maximal run of words that are neither stop words nor words of a column
/// name; "of", "and", "the", "de" may join two such words.
std::string quote_literal_phrases(std::string_view question, const TableSchema& schema);

PromptBundle build_qa_prompt(const TemplateSet& templates, const SupplementarySpec& s, const TableSchema& schema,
                             const Question& q);

class EmptyCompletion : public Error {
public:
    using Error::Error;
};

/// First fenced block (language tag stripped) or the whole completion.
QueryText extract_code(std::string_view completion);

std::vector<LintFinding> lint_query(std::string_view source);

struct ClassificationRecord {
    std::string question;
    TableSchema schema;
    /// At most three rows are rendered.
    std::vector<Row> sample_rows;
    std::string query;
    std::string exec_output;
    std::string expected;
};

PromptBundle build_error_classification_prompt(const TemplateSet& templates, const ClassificationRecord& record);

std::set<ErrorClass> parse_error_classes(std::string_view completion);
/// Abbreviations joined by "; " in enum order.
std::string render_error_classes(const std::set<ErrorClass>& classes);

/// Generation prompt for question/query pairs in a given role.
PromptBundle build_generation_prompt(const TemplateSet& templates, const TableSchema& schema, Role role, std::size_t n);

}  // namespace dfqa::prompt
