#include "selfprompt/role_analysis.hpp"

#include <algorithm>
#include <cctype>

#include <json.hpp>

namespace selfprompt::roles {

RoleExtraction extract_role(const std::string& item_id, const std::string& domain, const std::string& generated,
                            const std::vector<forge::PromptTemplate>& templates) {
    RoleExtraction out;
    out.item_id = item_id;
    out.domain = domain;
    if (auto m = forge::match_prefix(generated, templates)) {
        out.role_phrase = m->role;
        out.matched_template = m->template_id;
        out.ambiguous = m->ambiguous;
    }
    return out;
}

std::string normalize_role(std::string_view role) {
    std::string s = text::trim(text::collapse_spaces(text::to_lower(role)));
    for (;;) {
        bool stripped = false;
        for (std::string_view article : {"a ", "an ", "the "}) {
            if (s.size() > article.size() && s.compare(0, article.size(), article) == 0) {
                s = text::trim(s.substr(article.size()));
                stripped = true;
                break;
            }
        }
        if (!stripped) break;
    }
    return s;
}

FrequencyTable rank_terms(const std::vector<std::string>& roles) {
    std::map<std::string, std::size_t> counts;
    for (const auto& r : roles) ++counts[normalize_role(r)];
    FrequencyTable out;
    for (const auto& [term, n] : counts) out.push_back({term, n});
    std::stable_sort(out.begin(), out.end(), [](const TermCount& a, const TermCount& b) {
        if (a.count != b.count) return a.count > b.count;
        return a.term < b.term;
    });
    return out;
}

std::map<std::string, FrequencyTable> role_frequencies(const std::vector<RoleExtraction>& extractions) {
    std::map<std::string, std::vector<std::string>> grouped;
    for (const auto& e : extractions) {
        auto& bucket = grouped[e.domain];
        if (e.role_phrase) bucket.push_back(*e.role_phrase);
    }
    std::map<std::string, FrequencyTable> out;
    for (const auto& [domain, roles] : grouped) out[domain] = rank_terms(roles);
    return out;
}

std::string domain_slug(const std::string& domain) {
    std::string out;
    for (unsigned char c : text::to_lower(domain)) {
        if (std::isalnum(c)) {
            out.push_back(static_cast<char>(c));
        } else if (!out.empty() && out.back() != '_') {
            out.push_back('_');
        }
    }
    while (!out.empty() && out.back() == '_') out.pop_back();
    return out.empty() ? "domain" : out;
}

std::string table_csv(const FrequencyTable& table) {
    std::string out = "term,count\n";
    for (const auto& t : table) {
        std::string term = t.term;
        if (term.find_first_of(",\"\n") != std::string::npos) term = "\"" + text::replace_all(term, "\"", "\"\"") + "\"";
        out += term + "," + std::to_string(t.count) + "\n";
    }
    return out;
}

std::vector<std::filesystem::path> export_wordcloud_data(const std::map<std::string, FrequencyTable>& tables,
                                                         const std::filesystem::path& dir) {
    std::vector<std::filesystem::path> out;
    for (const auto& [domain, table] : tables) {
        const auto path = dir / (domain_slug(domain) + ".csv");
        write_file(path, table_csv(table));
        out.push_back(path);
    }
    return out;
}

std::string aggregate_json(const std::map<std::string, FrequencyTable>& tables) {
    nlohmann::ordered_json j = nlohmann::ordered_json::object();
    for (const auto& [domain, table] : tables) {
        auto rows = nlohmann::ordered_json::array();
        for (const auto& t : table) rows.push_back({t.term, t.count});
        j[domain] = rows;
    }
    return j.dump(2) + "\n";
}

}  // namespace selfprompt::roles
