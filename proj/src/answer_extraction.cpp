#include "selfprompt/answer_extraction.hpp"

#include <algorithm>
#include <cctype>
#include <regex>
#include <set>
#include <vector>

#include "selfprompt/template_forge.hpp"
#include "selfprompt/text.hpp"

namespace selfprompt::eval {

namespace {

const std::vector<forge::PromptTemplate>& templates() {
    static const std::vector<forge::PromptTemplate> t = forge::builtin_templates();
    return t;
}

std::string without_role_prefix(const std::string& raw) {
    auto m = forge::match_prefix(raw, templates());
    if (!m) return raw;
    return raw.substr(m->length);
}

struct Mention {
    std::size_t pos = 0;
    char letter = 0;
};

bool rest_is_terminal(const std::string& s, std::size_t i) {
    if (i >= s.size()) return true;
    if (s[i] == '.' || s[i] == ')' || s[i] == '\n') return true;
    return s.find_first_not_of(" \t\r", i) == std::string::npos;
}

// Groups: 1 = parenthesised letter (any case), 2 = bare letter.
void collect_marker(const std::string& s, const std::regex& re, std::vector<Mention>& out) {
    for (auto it = std::sregex_iterator(s.begin(), s.end(), re); it != std::sregex_iterator(); ++it) {
        const auto& m = *it;
        char c = 0;
        if (m[1].matched) {
            c = m[1].str()[0];
        } else if (m[2].matched) {
            c = m[2].str()[0];
            const std::size_t after = static_cast<std::size_t>(m.position(2) + 1);
            if (std::islower(static_cast<unsigned char>(c)) && !rest_is_terminal(s, after)) continue;
        } else {
            continue;
        }
        out.push_back({static_cast<std::size_t>(m.position(0)),
                       static_cast<char>(std::toupper(static_cast<unsigned char>(c)))});
    }
}

std::optional<std::string> letter_result(char c, char max_letter) {
    if (c < 'A' || c > max_letter) return std::nullopt;
    return std::string(1, c);
}

std::optional<std::string> extract_option(const std::string& s, char max_letter) {
    static const std::regex answer_marker(
        R"(\banswer\b(?:\s+is\b)?\s*[:*]*\s*(?:(?:option|choice)\s+)?[:*]*\s*(?:\(([a-z])\)|([a-z])(?![a-z0-9])))",
        std::regex::icase);
    static const std::regex correct_marker(
        R"(\b(?:correct|right|best)\s+(?:option|choice|answer)\b(?:\s+is\b)?\s*[:*]*\s*(?:(?:option|choice)\s+)?(?:\(([a-z])\)|([a-z])(?![a-z0-9])))",
        std::regex::icase);
    static const std::regex lone_line(R"(^\**\(?([A-Z])\)?[.)]?\**$)");
    static const std::regex label_line(R"(^\s*(?:\(([A-Z])\)|([A-Z])[.)])\s+\S)");
    static const std::regex paren_mention(R"(\(([A-Z])\)|\b([A-Z])\))");
    static const std::regex option_mention(R"(\b(?:option|choice)\s+\(?([a-z])\)?(?![a-z0-9]))", std::regex::icase);
    static const std::regex bare(R"(\b([A-Z])\b)");

    // Explicit markers: the last one decides, even when out of range.
    std::vector<Mention> explicit_marks;
    collect_marker(s, answer_marker, explicit_marks);
    collect_marker(s, correct_marker, explicit_marks);
    std::size_t line_start = 0;
    std::vector<std::pair<std::size_t, std::string>> lines;
    for (const auto& line : text::split_lines(s)) {
        lines.emplace_back(line_start, line);
        line_start += line.size() + 1;
    }
    std::smatch m;
    for (const auto& [pos, line] : lines) {
        const std::string t = text::trim(line);
        if (std::regex_match(t, m, lone_line)) explicit_marks.push_back({pos, m[1].str()[0]});
    }
    if (!explicit_marks.empty()) {
        auto last = std::max_element(explicit_marks.begin(), explicit_marks.end(),
                                     [](const Mention& a, const Mention& b) { return a.pos < b.pos; });
        return letter_result(last->letter, max_letter);
    }

    // A single line that starts with an option label, e.g. "B) Paris".
    std::set<char> labels;
    for (const auto& [pos, line] : lines) {
        if (std::regex_search(line, m, label_line)) labels.insert((m[1].matched ? m[1] : m[2]).str()[0]);
    }
    if (labels.size() == 1 && *labels.begin() <= max_letter) return std::string(1, *labels.begin());

    // Weak mentions: "(C)", "C)", "option C". The last in-range one wins.
    std::vector<Mention> weak;
    for (auto it = std::sregex_iterator(s.begin(), s.end(), paren_mention); it != std::sregex_iterator(); ++it) {
        const auto& wm = *it;
        weak.push_back({static_cast<std::size_t>(wm.position(0)), (wm[1].matched ? wm[1] : wm[2]).str()[0]});
    }
    for (auto it = std::sregex_iterator(s.begin(), s.end(), option_mention); it != std::sregex_iterator(); ++it) {
        const auto& wm = *it;
        const char c = wm[1].str()[0];
        if (!std::isupper(static_cast<unsigned char>(c))) continue;
        weak.push_back({static_cast<std::size_t>(wm.position(0)), c});
    }
    std::erase_if(weak, [&](const Mention& w) { return w.letter > max_letter; });
    if (!weak.empty()) {
        auto last = std::max_element(weak.begin(), weak.end(),
                                     [](const Mention& a, const Mention& b) { return a.pos < b.pos; });
        return std::string(1, last->letter);
    }

    // Bare capitals. A sentence-initial "A" is read as the article.
    std::set<char> bare_letters;
    for (auto it = std::sregex_iterator(s.begin(), s.end(), bare); it != std::sregex_iterator(); ++it) {
        const char c = (*it)[1].str()[0];
        if (c > max_letter) continue;
        const std::size_t pos = static_cast<std::size_t>(it->position(0));
        if (c == 'A') {
            const auto prev = s.find_last_not_of(" \t\r\n", pos == 0 ? std::string::npos : pos - 1);
            if (pos == 0 || prev == std::string::npos || std::string_view(".!?").find(s[prev]) != std::string_view::npos) {
                continue;
            }
        }
        bare_letters.insert(c);
    }
    if (bare_letters.size() == 1) return std::string(1, *bare_letters.begin());
    return std::nullopt;
}

std::optional<std::string> extract_yes_no(const std::string& s) {
    static const std::regex marker(R"(\banswer\b(?:\s+is\b)?\s*[:*]*\s*(yes|no)\b)", std::regex::icase);
    static const std::regex token(
        R"(\b(yes)\b|\b(nope|no(?:\s+way)?)\b(?=\s*(?:[.,!;:?-]|—|–|$)))", std::regex::icase);

    std::optional<std::string> explicit_answer;
    for (auto it = std::sregex_iterator(s.begin(), s.end(), marker); it != std::sregex_iterator(); ++it) {
        explicit_answer = text::to_lower((*it)[1].str());
    }
    if (explicit_answer) return explicit_answer;

    struct Tok {
        std::size_t pos;
        bool yes;
    };
    std::vector<Tok> toks;
    for (auto it = std::sregex_iterator(s.begin(), s.end(), token); it != std::sregex_iterator(); ++it) {
        toks.push_back({static_cast<std::size_t>(it->position(0)), (*it)[1].matched});
    }
    if (toks.empty()) return std::nullopt;
    const Tok first = toks.front();
    const std::size_t end = s.find_first_of(".!?\n", first.pos);
    for (const auto& t : toks) {
        if (t.pos >= end) break;
        if (t.yes != first.yes) return std::nullopt;
    }
    return first.yes ? "yes" : "no";
}

const std::string kNumber = R"(([-+]?(?:\$|€|£)?[-+]?(?:\d{1,3}(?:,\d{3})+|\d+)(?:\.\d+)?))";

std::optional<std::string> clean_number(const std::string& s, std::size_t pos, std::string tok) {
    // A minus glued to a preceding word or digit is a hyphen, not a sign.
    if (!tok.empty() && (tok[0] == '-' || tok[0] == '+') && pos > 0 &&
        std::isalnum(static_cast<unsigned char>(s[pos - 1]))) {
        tok.erase(0, 1);
    }
    try {
        return normalize_number(tok);
    } catch (const ValidationError&) {
        return std::nullopt;
    }
}

std::optional<std::string> extract_number(const std::string& s) {
    static const std::regex marker(
        R"((?:\banswer\b(?:\s+is\b)?\s*[:*]*\s*(?:\\boxed\{)?\s*|####\s*|\\boxed\{\s*))" + kNumber,
        std::regex::icase);
    static const std::regex number(kNumber);

    std::optional<std::string> found;
    for (auto it = std::sregex_iterator(s.begin(), s.end(), marker); it != std::sregex_iterator(); ++it) {
        if (auto n = clean_number(s, static_cast<std::size_t>(it->position(1)), (*it)[1].str())) found = n;
    }
    if (found) return found;
    for (auto it = std::sregex_iterator(s.begin(), s.end(), number); it != std::sregex_iterator(); ++it) {
        if (auto n = clean_number(s, static_cast<std::size_t>(it->position(1)), (*it)[1].str())) found = n;
    }
    return found;
}

std::string trim_code(std::string_view s) {
    std::size_t b = 0;
    while (b < s.size() && (s[b] == '\n' || s[b] == '\r')) ++b;
    std::size_t e = s.size();
    while (e > b && std::isspace(static_cast<unsigned char>(s[e - 1]))) --e;
    return std::string(s.substr(b, e - b));
}

std::optional<std::string> extract_code(const std::string& s) {
    const auto open = s.find("```");
    if (open == std::string::npos) {
        std::string body = trim_code(s);
        if (body.empty()) return std::nullopt;
        return body;
    }
    const auto body_start = s.find('\n', open);
    if (body_start == std::string::npos) return std::nullopt;
    const auto close = s.find("```", body_start + 1);
    std::string body = trim_code(std::string_view(s).substr(
        body_start + 1, close == std::string::npos ? std::string::npos : close - body_start - 1));
    if (body.empty()) return std::nullopt;
    return body;
}

}  // namespace

std::string to_string(const AnswerFormat& f) {
    switch (f.kind) {
        case FormatKind::option_letters: return std::string("option(A-") + f.max_letter + ")";
        case FormatKind::yes_no: return "yes/no";
        case FormatKind::number: return "number";
        case FormatKind::code: return "code";
    }
    return "unknown";
}

std::optional<std::string> extract_answer(const std::string& raw, const AnswerFormat& format) {
    const std::string s = without_role_prefix(raw);
    switch (format.kind) {
        case FormatKind::option_letters: return extract_option(s, format.max_letter);
        case FormatKind::yes_no: return extract_yes_no(s);
        case FormatKind::number: return extract_number(s);
        case FormatKind::code: return extract_code(s);
    }
    return std::nullopt;
}

std::string normalize_number(std::string_view in) {
    std::string s = text::trim(in);
    for (const char* cur : {"$", "€", "£"}) s = text::replace_all(s, cur, "");
    s = text::replace_all(s, ",", "");
    bool negative = false;
    std::size_t i = 0;
    while (i < s.size() && (s[i] == '-' || s[i] == '+')) {
        if (s[i] == '-') negative = !negative;
        ++i;
    }
    s = s.substr(i);
    if (!s.empty() && s.back() == '.') s.pop_back();
    const auto dot = s.find('.');
    std::string whole = s.substr(0, dot);
    std::string frac = dot == std::string::npos ? "" : s.substr(dot + 1);
    auto all_digits = [](const std::string& x) {
        return std::all_of(x.begin(), x.end(), [](unsigned char c) { return std::isdigit(c); });
    };
    if (whole.empty() || !all_digits(whole) || !all_digits(frac) || (dot != std::string::npos && frac.empty())) {
        throw ValidationError("not a number: '" + std::string(in) + "'");
    }
    whole.erase(0, std::min(whole.find_first_not_of('0'), whole.size() - 1));
    while (!frac.empty() && frac.back() == '0') frac.pop_back();
    std::string out = whole;
    if (!frac.empty()) out += "." + frac;
    if (negative && out != "0") out = "-" + out;
    return out;
}

bool answers_match(const std::string& extracted, const std::string& gold, const AnswerFormat& format) {
    switch (format.kind) {
        case FormatKind::option_letters:
        case FormatKind::yes_no:
            return text::to_lower(text::trim(extracted)) == text::to_lower(text::trim(gold));
        case FormatKind::number:
            try {
                return normalize_number(extracted) == normalize_number(gold);
            } catch (const ValidationError&) {
                return false;
            }
        case FormatKind::code:
            return trim_code(extracted) == trim_code(gold);
    }
    return false;
}

}  // namespace selfprompt::eval
