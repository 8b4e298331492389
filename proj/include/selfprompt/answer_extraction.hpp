#pragma once

// Turning free-form model replies into canonical answers per benchmark
// format. Role-play prefixes are removed before any rule runs.

#include <optional>
#include <string>
#include <string_view>

namespace selfprompt::eval {

enum class FormatKind { option_letters, yes_no, number, code };

struct AnswerFormat {
    FormatKind kind = FormatKind::option_letters;
    char max_letter = 'D';  ///< only meaningful for option_letters

    static AnswerFormat options(char max_letter) { return {FormatKind::option_letters, max_letter}; }
    static AnswerFormat yes_no() { return {FormatKind::yes_no, 'D'}; }
    static AnswerFormat number() { return {FormatKind::number, 'D'}; }
    static AnswerFormat code() { return {FormatKind::code, 'D'}; }

    bool operator==(const AnswerFormat&) const = default;
};

/// "option(A-D)", "yes/no", "number", "code".
std::string to_string(const AnswerFormat& f);

/// Canonical answer, or nullopt for an extraction failure.
///  - options: explicit markers ("answer is (X)", "Answer: X", a line holding
///    only the letter) win, last one first; then a single line-leading
///    label such as "B) Paris"; then the last parenthesised or "option X"
///    mention; then a lone bare capital. Out-of-range letters fail.
///  - yes/no: "answer is yes|no" first, otherwise the first sentence with a
///    yes/no token, failing when that sentence holds both.
///  - number: explicit marker ("answer is", "####", \boxed{}) first,
///    otherwise the last number; normalised with normalize_number.
///  - code: body of the first fenced block, otherwise the trimmed reply.
std::optional<std::string> extract_answer(const std::string& raw, const AnswerFormat& format);

/// Removes commas, currency symbols, a leading '+', leading zeros and
/// trailing fractional zeros. Throws ValidationError if `s` is not a number.
std::string normalize_number(std::string_view s);

/// Compares an extracted answer to gold for the non-code formats.
bool answers_match(const std::string& extracted, const std::string& gold, const AnswerFormat& format);

}  // namespace selfprompt::eval
