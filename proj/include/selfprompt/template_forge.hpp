#pragma once

// Role-play prefix templates (ablation ids 0-8), prefix rendering, dataset
// assembly, and the matcher that recognises rendered prefixes in free text.

#include <filesystem>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "selfprompt/corpus.hpp"
#include "selfprompt/role_annotator.hpp"

namespace selfprompt::forge {

inline constexpr std::string_view kQuestionSlot = "{question}";
inline constexpr std::string_view kRoleSlot = "{role}";
inline constexpr int kDefaultTemplateId = 8;
/// Joins the rendered prefix and the original answer.
inline constexpr std::string_view kPrefixSeparator = " ";

struct PromptTemplate {
    int template_id = 0;
    std::string pattern;

    bool has_question() const;
    bool has_role() const;
    /// Text between the question and role slots; empty unless both exist.
    std::string junction() const;
    /// Text after the last slot.
    std::string tail() const;

    bool operator==(const PromptTemplate&) const = default;
};

/// Throws ValidationError unless: an empty pattern, or the question slot
/// alone, or both slots exactly once with the question first and a
/// non-empty junction between them.
void validate_template(const PromptTemplate& t);

/// The nine ablation templates; 0 is the empty prefix, 8 the default.
std::vector<PromptTemplate> builtin_templates();
PromptTemplate builtin_template(int template_id);

/// One pattern per line, line order = template id. `(none)` stands for the
/// empty pattern; lines starting with '#' and blank lines are skipped.
std::vector<PromptTemplate> load_templates(const std::filesystem::path& path);
void save_templates(const std::vector<PromptTemplate>& templates, const std::filesystem::path& path);

/// Substitutes summary and role. Trailing periods on either value are
/// dropped so the template's own punctuation is the only one; runs of
/// spaces collapse to one.
std::string render_prefix(const PromptTemplate& t, const annotate::RoleAnnotation& annotation);

struct RoleAugmentedExample {
    corpus::DialogueExample base;
    std::string prefix;
    int template_id = 0;

    /// `base` with the first assistant turn replaced by prefix + " " + answer.
    corpus::DialogueExample materialize() const;
};

RoleAugmentedExample augment_example(const corpus::DialogueExample& example,
                                     const annotate::RoleAnnotation& annotation,
                                     const PromptTemplate& t);

/// Same examples in the same order with only first assistant turns prefixed.
/// Throws ValidationError listing every id without an annotation.
corpus::InstructionDataset assemble_role_dataset(const corpus::InstructionDataset& dataset,
                                                 const annotate::AnnotationMap& annotations,
                                                 const PromptTemplate& t);

struct PrefixMatch {
    int template_id = 0;
    std::string summary;
    std::string role;
    /// Bytes of `text` covered by the prefix, terminating punctuation included.
    std::size_t length = 0;
    /// Another junction phrase also occurs in the text.
    bool ambiguous = false;
};

/// Finds a rendered prefix (summary + junction + role + tail) at the start
/// of `text`, trying every template that has both slots. The summary must
/// sit on the first line. When several junctions occur the earliest wins.
std::optional<PrefixMatch> match_prefix(std::string_view text,
                                        const std::vector<PromptTemplate>& templates);

/// Junction phrases without surrounding punctuation, e.g.
/// "From now on, I will think like". Used for blinding scans.
std::vector<std::string> junction_phrases(const std::vector<PromptTemplate>& templates);

struct TemplateDiffEntry {
    std::string example_id;
    bool identical = false;
    bool summary_equal = false;
    bool role_equal = false;
    bool answer_equal = false;
    std::string junction_a;
    std::string junction_b;
    /// Every difference lies in junction text.
    bool localized = false;
};

struct TemplateDiffReport {
    int template_a = 0;
    int template_b = 0;
    std::vector<TemplateDiffEntry> entries;
    std::size_t differing = 0;
    bool all_localized = true;
};

/// Compares two role datasets built from the same base corpus and
/// annotations. Both must carry a template id that `templates` defines.
/// Throws ValidationError if the datasets are structurally unrelated.
TemplateDiffReport diff_templates(const corpus::InstructionDataset& a,
                                  const corpus::InstructionDataset& b,
                                  const std::vector<PromptTemplate>& templates = builtin_templates());

}  // namespace selfprompt::forge
