#pragma once

#include <optional>
#include <string>
#include <string_view>
#include <vector>

namespace dfqa::text {

std::string_view trim(std::string_view s);

/// Lowercases UTF-8 text. Covers ASCII, Latin-1, Latin Extended-A,
/// Greek, Cyrillic, Armenian and fullwidth Latin; other code points pass
/// through unchanged. Invalid byte sequences are copied verbatim.
std::string lower(std::string_view s);

bool is_lower(std::string_view s);

/// Parses the entire string as a finite decimal number. Rejects leading '+',
/// hex, inf and nan.
std::optional<double> parse_number(std::string_view s);

/// Like parse_number but also accepts an optional leading '+' and
/// well-formed thousands separators ("1,234,567.5").
std::optional<double> parse_grouped_number(std::string_view s);

/// Shortest round-trip text for a double; integral values print without a
/// fractional part.
std::string format_number(double v);

std::vector<std::string> split(std::string_view s, char sep);
std::string join(const std::vector<std::string>& parts, std::string_view sep);
bool starts_with_ci(std::string_view s, std::string_view prefix);

/// Replaces every `{{name}}` with the mapped value. Unknown placeholders are
/// left in place.
std::string render_template(std::string_view tmpl,
                            const std::vector<std::pair<std::string, std::string>>& values);

std::string read_file(const std::string& path);
/// Writes via a temporary file and rename so readers never see partial output.
void write_file_atomic(const std::string& path, std::string_view content);

}  // namespace dfqa::text
