#include "selfprompt/template_forge.hpp"

#include <algorithm>
#include <cctype>
#include <fstream>

namespace selfprompt::forge {

namespace {

std::size_t count_occurrences(std::string_view s, std::string_view needle) {
    std::size_t n = 0;
    for (auto pos = s.find(needle); pos != std::string_view::npos; pos = s.find(needle, pos + 1)) ++n;
    return n;
}

std::string strip_trailing_periods(std::string s) {
    s = text::trim(s);
    while (!s.empty() && s.back() == '.') s.pop_back();
    return text::trim(s);
}

}  // namespace

bool PromptTemplate::has_question() const {
    return pattern.find(kQuestionSlot) != std::string::npos;
}

bool PromptTemplate::has_role() const {
    return pattern.find(kRoleSlot) != std::string::npos;
}

std::string PromptTemplate::junction() const {
    auto q = pattern.find(kQuestionSlot);
    auto r = pattern.find(kRoleSlot);
    if (q == std::string::npos || r == std::string::npos || r < q) return {};
    auto start = q + kQuestionSlot.size();
    return pattern.substr(start, r - start);
}

std::string PromptTemplate::tail() const {
    auto r = pattern.find(kRoleSlot);
    if (r != std::string::npos) return pattern.substr(r + kRoleSlot.size());
    auto q = pattern.find(kQuestionSlot);
    if (q != std::string::npos) return pattern.substr(q + kQuestionSlot.size());
    return {};
}

void validate_template(const PromptTemplate& t) {
    const auto where = "template " + std::to_string(t.template_id) + ": ";
    if (t.template_id < 0) throw ValidationError(where + "id must be non-negative");
    if (t.pattern.empty()) return;
    auto nq = count_occurrences(t.pattern, kQuestionSlot);
    auto nr = count_occurrences(t.pattern, kRoleSlot);
    if (nq != 1) throw ValidationError(where + "needs exactly one {question} slot");
    if (nr > 1) throw ValidationError(where + "has more than one {role} slot");
    if (nr == 1) {
        if (t.pattern.find(kRoleSlot) < t.pattern.find(kQuestionSlot)) {
            throw ValidationError(where + "{question} must come before {role}");
        }
        if (text::is_blank(t.junction())) throw ValidationError(where + "junction text is empty");
    }
}

std::vector<PromptTemplate> builtin_templates() {
    return {
        {0, ""},
        {1, "{question}."},
        {2, "{question}. As a result, I will solve it like {role}."},
        {3, "{question}. Therefore, I will answer it as {role}."},
        {4, "{question}. To solve this problem, I will act as {role}."},
        {5, "{question}. So I will become {role}."},
        {6, "{question}. Fortunately, I am {role}."},
        {7, "{question}. For this reason, I will be {role}."},
        {8, "{question}. From now on, I will think like {role}."},
    };
}

PromptTemplate builtin_template(int template_id) {
    auto all = builtin_templates();
    if (template_id < 0 || template_id >= static_cast<int>(all.size())) {
        throw ValidationError("no built-in template " + std::to_string(template_id) +
                              " (valid ids: 0-8)");
    }
    return all[static_cast<std::size_t>(template_id)];
}

std::vector<PromptTemplate> load_templates(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw IoError("cannot open template file " + path.string());
    std::vector<PromptTemplate> out;
    std::string line;
    std::size_t line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        if (!line.empty() && line.back() == '\r') line.pop_back();
        std::string trimmed = text::trim(line);
        if (trimmed.empty() || trimmed.front() == '#') continue;
        PromptTemplate t{static_cast<int>(out.size()), trimmed == "(none)" ? "" : trimmed};
        try {
            validate_template(t);
        } catch (const ValidationError& e) {
            throw corpus::LoadError(line_no, e.what());
        }
        out.push_back(std::move(t));
    }
    return out;
}

void save_templates(const std::vector<PromptTemplate>& templates, const std::filesystem::path& path) {
    std::string body = "# one pattern per line; line order is the template id\n";
    for (std::size_t i = 0; i < templates.size(); ++i) {
        if (templates[i].template_id != static_cast<int>(i)) {
            throw ValidationError("template ids must be 0..n-1 in order to be saved");
        }
        body += templates[i].pattern.empty() ? "(none)" : templates[i].pattern;
        body += '\n';
    }
    write_file(path, body);
}

std::string render_prefix(const PromptTemplate& t, const annotate::RoleAnnotation& annotation) {
    if (t.pattern.empty()) return {};
    std::string summary = strip_trailing_periods(annotation.question_summary);
    std::string role = strip_trailing_periods(annotation.role_description);
    if (t.has_question() && summary.empty()) {
        throw ValidationError("template " + std::to_string(t.template_id) + " needs a question summary (" +
                              annotation.example_id + ")");
    }
    if (t.has_role() && role.empty()) {
        throw ValidationError("template " + std::to_string(t.template_id) + " needs a role description (" +
                              annotation.example_id + ")");
    }
    std::string out = t.pattern;
    auto q = out.find(kQuestionSlot);
    out.replace(q, kQuestionSlot.size(), summary);
    auto r = out.find(kRoleSlot);
    if (r != std::string::npos) out.replace(r, kRoleSlot.size(), role);
    return text::collapse_spaces(text::trim(out));
}

corpus::DialogueExample RoleAugmentedExample::materialize() const {
    corpus::DialogueExample out = base;
    if (prefix.empty()) return out;
    auto idx = corpus::first_assistant_index(out);
    if (!idx) throw ValidationError("example '" + base.id + "' has no assistant turn");
    auto& content = out.turns[*idx].content;
    content = prefix + std::string(kPrefixSeparator) + content;
    return out;
}

RoleAugmentedExample augment_example(const corpus::DialogueExample& example,
                                     const annotate::RoleAnnotation& annotation,
                                     const PromptTemplate& t) {
    return {example, render_prefix(t, annotation), t.template_id};
}

corpus::InstructionDataset assemble_role_dataset(const corpus::InstructionDataset& dataset,
                                                 const annotate::AnnotationMap& annotations,
                                                 const PromptTemplate& t) {
    validate_template(t);
    std::vector<std::string> missing;
    for (const auto& ex : dataset.examples) {
        if (!annotations.count(ex.id)) missing.push_back(ex.id);
    }
    if (!missing.empty()) {
        throw ValidationError("missing annotations for " + std::to_string(missing.size()) +
                              " example(s): " + text::join(missing, ", "));
    }
    corpus::InstructionDataset out;
    out.name = dataset.name;
    out.system_prompt = dataset.system_prompt;
    out.template_id = t.template_id;
    out.examples.reserve(dataset.examples.size());
    for (const auto& ex : dataset.examples) {
        out.examples.push_back(augment_example(ex, annotations.at(ex.id), t).materialize());
    }
    return out;
}

// ---------------------------------------------------------------------------

namespace {

constexpr std::size_t kMaxSummaryBytes = 400;

bool is_space_or_end(std::string_view s, std::size_t pos) {
    return pos >= s.size() || std::isspace(static_cast<unsigned char>(s[pos])) != 0;
}

// Position just past the tail that closes a role starting at `from`.
std::optional<std::pair<std::size_t, std::size_t>> find_tail(std::string_view s, std::size_t from,
                                                             const std::string& tail) {
    if (tail.empty()) {
        auto end = s.find_first_of(".\n", from);
        if (end == std::string_view::npos) end = s.size();
        return std::make_pair(end, end);
    }
    for (auto pos = s.find(tail, from); pos != std::string_view::npos; pos = s.find(tail, pos + 1)) {
        if (tail.back() != '.' || is_space_or_end(s, pos + tail.size())) {
            return std::make_pair(pos, pos + tail.size());
        }
    }
    return std::nullopt;
}

}  // namespace

std::optional<PrefixMatch> match_prefix(std::string_view s,
                                        const std::vector<PromptTemplate>& templates) {
    std::string_view first_line = s.substr(0, s.find('\n'));
    std::optional<PrefixMatch> best;
    std::size_t best_pos = std::string_view::npos;
    std::size_t junction_hits = 0;

    for (const auto& t : templates) {
        if (!t.has_question() || !t.has_role()) continue;
        const std::string junction = t.junction();
        junction_hits += count_occurrences(s, junction);
        auto pos = first_line.find(junction);
        if (pos == std::string_view::npos || pos == 0 || pos > kMaxSummaryBytes) continue;
        if (best && pos >= best_pos) continue;

        std::string_view head = s.substr(0, pos);
        std::string leading = t.pattern.substr(0, t.pattern.find(kQuestionSlot));
        if (!leading.empty() && head.substr(0, leading.size()) != leading) continue;
        std::string summary = text::trim(head.substr(leading.size()));
        if (summary.empty()) continue;

        std::size_t role_start = pos + junction.size();
        auto tail = find_tail(s, role_start, t.tail());
        if (!tail) continue;
        std::string_view role_view = s.substr(role_start, tail->first - role_start);
        if (role_view.find('\n') != std::string_view::npos) continue;
        std::string role = text::trim(role_view);
        if (role.empty()) continue;

        best = PrefixMatch{t.template_id, summary, role, tail->second, false};
        best_pos = pos;
    }
    if (best) best->ambiguous = junction_hits > 1;
    return best;
}

std::vector<std::string> junction_phrases(const std::vector<PromptTemplate>& templates) {
    std::vector<std::string> out;
    for (const auto& t : templates) {
        std::string j = t.junction();
        std::size_t b = 0;
        while (b < j.size() && (std::ispunct(static_cast<unsigned char>(j[b])) ||
                                std::isspace(static_cast<unsigned char>(j[b])))) {
            ++b;
        }
        std::string phrase = text::trim(j.substr(b));
        if (!phrase.empty()) out.push_back(phrase);
    }
    return out;
}

namespace {

struct Parts {
    std::optional<std::string> summary;
    std::optional<std::string> role;
    std::string answer;
};

std::string after_separator(std::string_view rest) {
    if (rest.substr(0, kPrefixSeparator.size()) == kPrefixSeparator) rest.remove_prefix(kPrefixSeparator.size());
    return std::string(rest);
}

std::optional<Parts> decompose(const PromptTemplate& t, const std::string& content) {
    if (t.pattern.empty()) return Parts{std::nullopt, std::nullopt, content};
    if (!t.has_role()) return std::nullopt;
    auto m = match_prefix(content, {t});
    if (!m) return std::nullopt;
    return Parts{m->summary, m->role, after_separator(std::string_view(content).substr(m->length))};
}

// Question-only templates cannot be split on their own; use the answer the
// other side revealed.
std::optional<Parts> decompose_with_answer(const PromptTemplate& t, const std::string& content,
                                           const std::string& answer) {
    const std::string suffix = std::string(kPrefixSeparator) + answer;
    if (content.size() < suffix.size() || content.compare(content.size() - suffix.size(), suffix.size(), suffix) != 0) {
        return std::nullopt;
    }
    std::string prefix = content.substr(0, content.size() - suffix.size());
    std::string tail = t.tail();
    if (prefix.size() < tail.size() || prefix.compare(prefix.size() - tail.size(), tail.size(), tail) != 0) {
        return std::nullopt;
    }
    return Parts{text::trim(prefix.substr(0, prefix.size() - tail.size())), std::nullopt, answer};
}

const PromptTemplate& find_template(const std::vector<PromptTemplate>& templates,
                                    const corpus::InstructionDataset& d) {
    if (!d.template_id) {
        throw ValidationError("dataset '" + d.name + "' carries no template id");
    }
    for (const auto& t : templates) {
        if (t.template_id == *d.template_id) return t;
    }
    throw ValidationError("dataset '" + d.name + "' uses unknown template " + std::to_string(*d.template_id));
}

}  // namespace

TemplateDiffReport diff_templates(const corpus::InstructionDataset& a, const corpus::InstructionDataset& b,
                                  const std::vector<PromptTemplate>& templates) {
    const PromptTemplate& ta = find_template(templates, a);
    const PromptTemplate& tb = find_template(templates, b);
    if (a.examples.size() != b.examples.size()) {
        throw ValidationError("datasets differ in size (" + std::to_string(a.examples.size()) + " vs " +
                              std::to_string(b.examples.size()) + ")");
    }

    TemplateDiffReport report;
    report.template_a = ta.template_id;
    report.template_b = tb.template_id;

    for (std::size_t i = 0; i < a.examples.size(); ++i) {
        const auto& ea = a.examples[i];
        const auto& eb = b.examples[i];
        if (ea.id != eb.id || ea.turns.size() != eb.turns.size()) {
            throw ValidationError("datasets are unrelated: example " + std::to_string(i) + " is '" + ea.id +
                                  "' vs '" + eb.id + "'");
        }
        auto first = corpus::first_assistant_index(ea);
        for (std::size_t k = 0; k < ea.turns.size(); ++k) {
            if (first && k == *first) continue;
            if (ea.turns[k] != eb.turns[k]) {
                throw ValidationError("datasets are unrelated: example '" + ea.id + "' differs outside the first answer");
            }
        }

        TemplateDiffEntry entry;
        entry.example_id = ea.id;
        entry.junction_a = ta.junction();
        entry.junction_b = tb.junction();
        const std::string& ca = ea.turns[*first].content;
        const std::string& cb = eb.turns[*first].content;
        entry.identical = ca == cb;

        auto pa = decompose(ta, ca);
        auto pb = decompose(tb, cb);
        if (!pa && pb) pa = decompose_with_answer(ta, ca, pb->answer);
        if (!pb && pa) pb = decompose_with_answer(tb, cb, pa->answer);

        if (entry.identical) {
            entry.summary_equal = entry.role_equal = entry.answer_equal = true;
            entry.localized = true;
        } else if (pa && pb) {
            entry.answer_equal = pa->answer == pb->answer;
            entry.summary_equal = !pa->summary || !pb->summary || *pa->summary == *pb->summary;
            entry.role_equal = !pa->role || !pb->role || *pa->role == *pb->role;
            const bool same_slots = ta.has_question() == tb.has_question() && ta.has_role() == tb.has_role();
            entry.localized = same_slots && entry.answer_equal && entry.summary_equal && entry.role_equal;
            if (!entry.answer_equal) {
                throw ValidationError("datasets are unrelated: example '" + ea.id + "' has different answers");
            }
        }
        if (!entry.identical) ++report.differing;
        if (!entry.localized) report.all_localized = false;
        report.entries.push_back(std::move(entry));
    }
    return report;
}

}  // namespace selfprompt::forge
