#pragma once

// Which roles a tuned model assigns itself: extraction from generations,
// per-domain frequency tables and word-cloud data export.

#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "selfprompt/template_forge.hpp"

namespace selfprompt::roles {

struct RoleExtraction {
    std::string item_id;
    std::string domain;
    std::optional<std::string> role_phrase;
    std::optional<int> matched_template;
    bool ambiguous = false;
};

/// Role span of the leading prefix, if any template with a role slot matches.
RoleExtraction extract_role(const std::string& item_id, const std::string& domain, const std::string& generated,
                            const std::vector<forge::PromptTemplate>& templates = forge::builtin_templates());

/// Lowercase, collapse whitespace, drop leading "a", "an" and "the".
std::string normalize_role(std::string_view role);

struct TermCount {
    std::string term;
    std::size_t count = 0;

    bool operator==(const TermCount&) const = default;
};

/// Descending by count, ties in lexicographic order.
using FrequencyTable = std::vector<TermCount>;

FrequencyTable rank_terms(const std::vector<std::string>& roles);

/// One table per domain seen in `extractions`, absent roles skipped.
std::map<std::string, FrequencyTable> role_frequencies(const std::vector<RoleExtraction>& extractions);

/// File-name-safe form of a domain label.
std::string domain_slug(const std::string& domain);

/// Writes `<dir>/<slug>.csv` (header term,count) per domain and returns
/// the paths in domain order.
std::vector<std::filesystem::path> export_wordcloud_data(const std::map<std::string, FrequencyTable>& tables,
                                                         const std::filesystem::path& dir);

std::string table_csv(const FrequencyTable& table);

/// {domain: [[term, count], ...]}
std::string aggregate_json(const std::map<std::string, FrequencyTable>& tables);

}  // namespace selfprompt::roles
